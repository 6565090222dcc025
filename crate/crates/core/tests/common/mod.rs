//! Oracles shared by the integration suites. Everything here is computed
//! without the crate's own solvers or rearrangement kernel.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qdopt::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense matrix of the discrete Laplacian, column by column.
pub fn dense_laplacian(mesh: &Mesh) -> DMatrix<f64> {
    let n = mesh.len();
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = mesh.laplacian(&e).unwrap();
        e[j] = 0.0;
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    a
}

/// Ground energy of `λ²u = γLu + qu + 2λpu` from the companion form
/// `λ [u; v] = [[0, I], [γL + Q, 2P]] [u; v]`: the smallest nonnegative real
/// eigenvalue, confirmed by a positive null vector of `λ² − 2λP − (γL + Q)`.
pub fn companion_ground_energy(mesh: &Mesh, p: &[f64], q: &[f64], gamma: f64) -> f64 {
    let n = mesh.len();
    let k = dense_laplacian(mesh) * gamma + DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(q));
    let mut c = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        c[(i, n + i)] = 1.0;
        c[(n + i, n + i)] = 2.0 * p[i];
        for j in 0..n {
            c[(n + i, j)] = k[(i, j)];
        }
    }
    let scale = c.amax().max(1.0);
    let mut real: Vec<f64> = c
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * scale && z.re > -1e-12 * scale)
        .map(|z| z.re)
        .collect();
    real.sort_by(f64::total_cmp);
    let lambda = real.into_iter().find(|&l| l > 0.0).expect("no positive real eigenvalue");
    let lambda = refine(mesh, &k, p, lambda);

    // the null vector of the quadratic pencil must have one sign
    let mut pencil = -k.clone();
    for i in 0..n {
        pencil[(i, i)] += lambda * lambda - 2.0 * lambda * p[i];
    }
    // symmetrize with the measures so the SVD works on a symmetric matrix
    let sq: Vec<f64> = mesh.measures().iter().map(|m| m.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| sq[i] * pencil[(i, j)] / sq[j]);
    let svd = sym.svd(false, true);
    let (imin, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &s)| if s < a.1 { (i, s) } else { a });
    let v = svd.v_t.unwrap().row(imin).transpose();
    let sign = v.iter().map(|x| x.signum()).sum::<f64>().signum();
    assert!(v.iter().all(|x| x * sign > -1e-10), "null vector changes sign");
    lambda
}

/// Secant polish of the companion eigenvalue on `g(λ) = μ₁(K + 2λP) − λ²`,
/// with μ₁ from a dense symmetric eigensolve of the measure-symmetrized
/// operator.
fn refine(mesh: &Mesh, k: &DMatrix<f64>, p: &[f64], guess: f64) -> f64 {
    let n = mesh.len();
    let sq: Vec<f64> = mesh.measures().iter().map(|m| m.sqrt()).collect();
    let g = |lambda: f64| {
        let mut s = DMatrix::from_fn(n, n, |i, j| sq[i] * k[(i, j)] / sq[j]);
        s = (&s + s.transpose()) * 0.5;
        for i in 0..n {
            s[(i, i)] += 2.0 * lambda * p[i];
        }
        s.symmetric_eigenvalues().min() - lambda * lambda
    };
    let (mut x0, mut x1) = (guess, guess * (1.0 + 1e-7));
    let (mut f0, mut f1) = (g(x0), g(x1));
    for _ in 0..20 {
        if f1 == f0 || f1.abs() <= 1e-15 * (1.0 + x1 * x1) {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        (x0, f0) = (x1, f1);
        x1 = x2;
        f1 = g(x1);
    }
    assert!((x1 - guess).abs() <= 1e-8 * guess, "companion {guess} vs polished {x1}");
    x1
}

/// Exhaustive minimum of `Σ v[σ(i)] w[i]` over permutations σ of `values`.
pub fn permutation_extremes(values: &[f64], w: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    heap_permute(&mut v, values.len(), &mut |perm| {
        let s: f64 = perm.iter().zip(w).map(|(a, b)| a * b).sum();
        lo = lo.min(s);
        hi = hi.max(s);
    });
    (lo, hi)
}

fn heap_permute(v: &mut Vec<f64>, k: usize, visit: &mut impl FnMut(&[f64])) {
    if k == 1 {
        visit(v);
        return;
    }
    for i in 0..k {
        heap_permute(v, k - 1, visit);
        let j = if k % 2 == 0 { i } else { 0 };
        v.swap(j, k - 1);
    }
}

/// Exhaustive extremes of `Σ_{i∈S} w[i]` over supports of `size` cells.
pub fn support_extremes(w: &[f64], size: usize) -> (f64, f64) {
    let n = w.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo, hi)
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}
