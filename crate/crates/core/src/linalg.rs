//! Sparse symmetric solves and the ground eigenpair of `γL + diag(V)`.
//!
//! All matrices here are in stiffness form `A = γS + M diag(V)`; the
//! generalized problem `A x = μ M x` is the measure-weighted eigenproblem of
//! the operator `γL + V`.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Banded LDLᵀ-free Cholesky `A = C Cᵀ`, band stored row-wise.
struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

impl BandedCholesky {
    fn factor(n: usize, bw: usize, mut band: Vec<f64>) -> Option<Self> {
        let w = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let kstart = lo.max(j.saturating_sub(bw));
                let ri = &band[i * w + (kstart + bw - i)..i * w + (j + bw - i)];
                let rj = &band[j * w + (kstart + bw - j)..j * w + bw];
                let s = band[i * w + (j + bw - i)] - dot(ri, rj);
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Some(Self { n, bw, band })
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let s = rhs[i] - dot(&self.band[i * w + (lo + bw - i)..i * w + bw], &out[lo..i]);
            out[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = out[i];
            for k in i + 1..=hi {
                s -= self.band[k * w + (i + bw - k)] * out[k];
            }
            out[i] = s / self.band[i * w + bw];
        }
    }
}

/// `A = γS + M diag(V)` with `V ≥ 0`.
struct StiffnessOperator<'a> {
    mesh: &'a Mesh,
    gamma: f64,
    potential: &'a [f64],
}

impl StiffnessOperator<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.mesh.apply_stiffness(x, out);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.gamma * *o + self.mesh.measures()[i] * self.potential[i] * x[i];
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.mesh
            .stiffness_diag()
            .iter()
            .zip(self.mesh.measures())
            .zip(self.potential)
            .map(|((d, m), v)| self.gamma * d + m * v)
            .collect()
    }

    /// `xᵀ A x` as a sum of nonnegative terms.
    fn energy(&self, x: &[f64]) -> f64 {
        let kinetic = self.mesh.dirichlet_energy(x).expect("length checked by caller");
        let potential: f64 = x
            .iter()
            .zip(self.potential)
            .zip(self.mesh.measures())
            .map(|((x, v), m)| v * x * x * m)
            .sum();
        self.gamma * kinetic + potential
    }
}

enum LinearSolver<'a> {
    Banded(BandedCholesky),
    Cg { op: &'a StiffnessOperator<'a>, inv_diag: Vec<f64> },
}

const BANDED_FLOP_LIMIT: f64 = 6e9;
const BANDED_ENTRY_LIMIT: usize = 64_000_000;

impl<'a> LinearSolver<'a> {
    fn new(op: &'a StiffnessOperator<'a>) -> Self {
        let n = op.mesh.len();
        let bw = op.mesh.bandwidth();
        let w = bw + 1;
        if (n as f64) * (bw as f64).powi(2) <= BANDED_FLOP_LIMIT && n * w <= BANDED_ENTRY_LIMIT {
            let mut band = vec![0.0; n * w];
            for (i, d) in op.diagonal().into_iter().enumerate() {
                band[i * w + bw] = d;
            }
            for f in op.mesh.faces() {
                // lower triangle: row f.b, column f.a
                band[f.b * w + (f.a + bw - f.b)] -= op.gamma * f.conductance;
            }
            if let Some(chol) = BandedCholesky::factor(n, bw, band) {
                return Self::Banded(chol);
            }
        }
        let inv_diag = op.diagonal().iter().map(|d| 1.0 / d).collect();
        Self::Cg { op, inv_diag }
    }

    fn solve(&self, rhs: &[f64], guess: &mut [f64]) -> Result<()> {
        match self {
            Self::Banded(chol) => {
                chol.solve(rhs, guess);
                Ok(())
            }
            Self::Cg { op, inv_diag } => conjugate_gradient(op, inv_diag, rhs, guess),
        }
    }
}

fn conjugate_gradient(op: &StiffnessOperator, inv_diag: &[f64], rhs: &[f64], x: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = 1e-14 * dot(rhs, rhs).sqrt();
    let max_iter = 20 * n + 100;
    for _ in 0..max_iter {
        if dot(&r, &r).sqrt() <= target {
            return Ok(());
        }
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        what: "conjugate gradient",
        iterations: max_iter,
        residual: dot(&r, &r).sqrt(),
    })
}

#[derive(Debug, Clone)]
pub(crate) struct EigenPair {
    pub mu: f64,
    /// Measure-normalized, positive mean.
    pub vector: Vec<f64>,
    /// `‖(γL + V)u − μu‖` in the measure norm.
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest eigenpair of `γL + diag(V)` by inverse iteration on the
/// nonnegatively shifted operator.
pub(crate) fn smallest_eigenpair(
    mesh: &Mesh,
    gamma: f64,
    potential: &[f64],
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
) -> Result<EigenPair> {
    let n = mesh.len();
    let shift = potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = potential.iter().map(|v| v - shift).collect();
    let op = StiffnessOperator { mesh, gamma, potential: &shifted };
    let solver = LinearSolver::new(&op);
    let vmax = shifted.iter().cloned().fold(0.0, f64::max);
    let roundoff = 64.0 * f64::EPSILON * (gamma * mesh.laplacian_norm_bound() + vmax);

    let measures = mesh.measures();
    let mut x: Vec<f64> = match start {
        Some(s) if s.len() == n && s.iter().any(|v| *v != 0.0) => s.to_vec(),
        _ => vec![1.0; n],
    };
    normalize(mesh, &mut x);
    let mut rhs = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut mu = op.energy(&x);
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        for i in 0..n {
            rhs[i] = measures[i] * x[i];
            y[i] = x[i] / mu.max(f64::MIN_POSITIVE);
        }
        solver.solve(&rhs, &mut y)?;
        x.copy_from_slice(&y);
        normalize(mesh, &mut x);
        mu = op.energy(&x);
        op.apply(&x, &mut ax);
        residual = (0..n)
            .map(|i| {
                let r = ax[i] / measures[i] - mu * x[i];
                r * r * measures[i]
            })
            .sum::<f64>()
            .sqrt();
        if residual <= tol * (1.0 + mu.abs() + shift.abs()) + roundoff {
            if mesh.inner_unchecked(&x, &vec![1.0; n]) < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok(EigenPair { mu: mu + shift, vector: x, residual, iterations: iteration });
        }
    }
    Err(Error::NotConverged { what: "inverse iteration", iterations: max_iter, residual })
}

fn normalize(mesh: &Mesh, x: &mut [f64]) {
    let norm = mesh.inner_unchecked(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}
