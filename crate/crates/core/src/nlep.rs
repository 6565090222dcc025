//! Ground state of `−γΔu + q u + 2λ p u = λ² u` with Dirichlet data.
//!
//! For fixed λ the operator `γL + q + 2λp` is linear and symmetric; its
//! smallest eigenvalue μ₁(λ) is increasing in λ with derivative `2∫p u_λ²`.
//! The nonlinear ground state is the root of `g(λ) = μ₁(λ) − λ²`, which is
//! strictly decreasing through that root.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::linalg::smallest_eigenpair;
use crate::mesh::Mesh;

/// γ = ħ²/2m in eV²·nm² for the particle mass used in the disk example.
pub const DEFAULT_GAMMA: f64 = 0.4441;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub gamma: f64,
    /// Relative tolerance on the eigen-residual of the frozen operator.
    pub eig_tol: f64,
    /// Tolerance on `|g(λ)| / (1 + λ²)`.
    pub root_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Only search `[0, √max q]`, widened once by 50%; otherwise fall back to
    /// the Rayleigh bound of the `λ = 0` eigenvector when that fails.
    pub strict_interval: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            eig_tol: 1e-11,
            root_tol: 1e-12,
            max_outer: 200,
            max_inner: 2000,
            strict_interval: false,
        }
    }
}

impl SolverOptions {
    pub fn with_gamma(gamma: f64) -> Self {
        Self { gamma, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.eig_tol > 0.0 && self.root_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(Error::InvalidArgument("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Iterations {
    pub outer: usize,
    pub inner: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub lambda: f64,
    /// Positive, unit L² norm.
    pub u: Field,
    pub residual: f64,
    /// μ₁ of the frozen operator at `lambda`; equals λ² at the root.
    pub linear_mu: f64,
    pub iterations: Iterations,
    /// λ < √max q: the energy lies in the interval where the Rayleigh
    /// functional is defined.
    pub within_interval: bool,
    /// Fraction of cells whose value of u is shared by another cell to 1e-12.
    pub tied_fraction: f64,
}

/// JSON export of a ground state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateSummary {
    pub lambda: f64,
    pub lambda_squared: f64,
    pub residual: f64,
    pub iterations: Iterations,
    pub linear_mu: f64,
    pub within_interval: bool,
    pub tied_fraction: f64,
}

impl GroundState {
    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            lambda: self.lambda,
            lambda_squared: self.lambda * self.lambda,
            residual: self.residual,
            iterations: self.iterations,
            linear_mu: self.linear_mu,
            within_interval: self.within_interval,
            tied_fraction: self.tied_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGroundState {
    pub mu: f64,
    pub u: Field,
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest eigenpair of `γL + diag(V)`, positive and L²-normalized.
pub fn linear_ground_state(mesh: &Mesh, potential: &[f64], gamma: f64, tol: f64) -> Result<(f64, Field)> {
    let gs = linear_ground_state_from(mesh, potential, gamma, tol, SolverOptions::default().max_inner, None)?;
    Ok((gs.mu, gs.u))
}

/// [`linear_ground_state`] with an explicit iteration limit and starting vector.
pub fn linear_ground_state_from(
    mesh: &Mesh,
    potential: &[f64],
    gamma: f64,
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
) -> Result<LinearGroundState> {
    check_len(mesh.len(), potential.len())?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("potential must be finite".into()));
    }
    let pair = smallest_eigenpair(mesh, gamma, potential, tol, max_iter, start)?;
    Ok(LinearGroundState {
        mu: pair.mu,
        u: Field::new(pair.vector),
        residual: pair.residual,
        iterations: pair.iterations,
    })
}

/// Ground state of the frozen operator `γL + q + 2λp`.
pub fn frozen_ground_state(
    mesh: &Mesh,
    p: &[f64],
    q: &[f64],
    lambda: f64,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<LinearGroundState> {
    check_len(mesh.len(), p.len())?;
    check_len(mesh.len(), q.len())?;
    let v: Vec<f64> = q.iter().zip(p).map(|(q, p)| q + 2.0 * lambda * p).collect();
    linear_ground_state_from(mesh, &v, opts.gamma, opts.eig_tol, opts.max_inner, start)
}

/// Closed-form root of `λ²‖u‖² − 2λ∫pu² − (∫qu² + γ‖∇u‖²) = 0`, without the
/// domain restriction.
pub fn rayleigh_value(mesh: &Mesh, p: &[f64], q: &[f64], u: &[f64], gamma: f64) -> Result<f64> {
    let norm2 = mesh.inner(u, u)?;
    if norm2 == 0.0 {
        return Err(Error::InvalidArgument("Rayleigh functional of the zero field".into()));
    }
    let a = mesh.weighted_square(p, u)?;
    let b = mesh.weighted_square(q, u)? + gamma * mesh.dirichlet_energy(u)?;
    Ok((a + (a * a + b * norm2).sqrt()) / norm2)
}

/// The Rayleigh functional; `None` when the value reaches `√max q`, i.e. `u`
/// lies outside the set on which the functional is defined. A potential with
/// `max q = 0` has no such restriction.
pub fn rayleigh_functional(mesh: &Mesh, p: &[f64], q: &[f64], u: &[f64], gamma: f64) -> Result<Option<f64>> {
    let value = rayleigh_value(mesh, p, q, u, gamma)?;
    let qmax = q.iter().cloned().fold(0.0, f64::max);
    if qmax > 0.0 && value >= qmax.sqrt() {
        return Ok(None);
    }
    Ok(Some(value))
}

/// `‖λ²u − (γLu + qu + 2λpu)‖` in L².
pub fn residual(mesh: &Mesh, p: &[f64], q: &[f64], lambda: f64, u: &[f64], gamma: f64) -> Result<f64> {
    check_len(mesh.len(), p.len())?;
    check_len(mesh.len(), q.len())?;
    let lu = mesh.laplacian(u)?;
    let r: Vec<f64> = (0..mesh.len())
        .map(|i| lambda * lambda * u[i] - (gamma * lu[i] + q[i] * u[i] + 2.0 * lambda * p[i] * u[i]))
        .collect();
    mesh.norm_l2(&r)
}

#[derive(Clone)]
struct Probe {
    lambda: f64,
    g: f64,
    state: LinearGroundState,
}

/// Solves the nonlinear ground-state problem: bisection on `g` down to a
/// bracket of width `1e-3·√max q`, then safeguarded Newton steps using
/// `g′(λ) = 2∫p u_λ² − 2λ`.
pub fn solve_nonlinear(mesh: &Mesh, p: &[f64], q: &[f64], opts: &SolverOptions) -> Result<GroundState> {
    solve_nonlinear_from(mesh, p, q, opts, None)
}

/// [`solve_nonlinear`] warm-started from a previous eigenvector.
pub fn solve_nonlinear_from(
    mesh: &Mesh,
    p: &[f64],
    q: &[f64],
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<GroundState> {
    opts.validate()?;
    check_len(mesh.len(), p.len())?;
    check_len(mesh.len(), q.len())?;
    if p.iter().chain(q).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("potentials must be finite".into()));
    }
    let mut inner = 0usize;
    let mut outer = 0usize;
    let mut warm: Option<Vec<f64>> = start.map(|s| s.to_vec());
    let probe = |lambda: f64, warm: &mut Option<Vec<f64>>, inner: &mut usize| -> Result<Probe> {
        let state = frozen_ground_state(mesh, p, q, lambda, opts, warm.as_deref())?;
        *inner += state.iterations;
        *warm = Some(state.u.to_vec());
        Ok(Probe { lambda, g: state.mu - lambda * lambda, state })
    };

    let at_zero = probe(0.0, &mut warm, &mut inner)?;
    if at_zero.g <= 0.0 {
        return Err(Error::ConditionsViolated(format!(
            "g(0) = {:e} is not positive; the ground energy has no positive root",
            at_zero.g
        )));
    }
    let qmax = q.iter().cloned().fold(0.0, f64::max);
    let sqrt_qmax = qmax.sqrt();

    // constant p only shifts the spectrum: μ₁(λ) = μ₁(0) + 2λp̄
    if p.iter().all(|v| *v == p[0]) {
        let (pbar, mu0) = (p[0], at_zero.state.mu);
        let lambda = pbar + (pbar * pbar + mu0).sqrt();
        if opts.strict_interval && !(lambda <= 1.5 * sqrt_qmax) {
            return Err(Error::ConditionsViolated(format!(
                "g has no sign change on [0, {:.6}]",
                1.5 * sqrt_qmax
            )));
        }
        let u = at_zero.state.u;
        return Ok(GroundState {
            lambda,
            residual: residual(mesh, p, q, lambda, &u, opts.gamma)?,
            linear_mu: mu0 + 2.0 * lambda * pbar,
            iterations: Iterations { outer, inner },
            within_interval: lambda < sqrt_qmax,
            tied_fraction: tied_fraction(&u, 1e-12),
            u,
        });
    }

    let mut lo = at_zero;
    let mut hi: Option<Probe> = None;
    if sqrt_qmax > 0.0 {
        for right in [sqrt_qmax, 1.5 * sqrt_qmax] {
            let candidate = probe(right, &mut warm, &mut inner)?;
            if candidate.g <= 0.0 {
                hi = Some(candidate);
                break;
            }
            lo = candidate;
        }
    }
    if hi.is_none() {
        if opts.strict_interval {
            return Err(Error::ConditionsViolated(format!(
                "g has no sign change on [0, {:.6}]",
                1.5 * sqrt_qmax
            )));
        }
        // μ₁(λ) ≤ ⟨u₀, (γL + q + 2λp) u₀⟩, so g is nonpositive at the
        // Rayleigh value of the λ = 0 eigenvector.
        let mut bound = rayleigh_value(mesh, p, q, &lo.state.u, opts.gamma)?.max(lo.lambda);
        for _ in 0..8 {
            let candidate = probe(bound, &mut warm, &mut inner)?;
            if candidate.g <= 0.0 {
                hi = Some(candidate);
                break;
            }
            lo = candidate;
            bound *= 1.0 + 1e-6;
        }
    }
    let Some(mut hi) = hi else {
        return Err(Error::ConditionsViolated("could not bracket the ground energy".into()));
    };

    let scale = if sqrt_qmax > 0.0 { sqrt_qmax } else { hi.lambda };
    let width = 1e-3 * scale;
    while hi.lambda - lo.lambda > width {
        outer += 1;
        if outer > opts.max_outer {
            return Err(Error::NotConverged { what: "bisection", iterations: outer, residual: hi.lambda - lo.lambda });
        }
        let mid = probe(0.5 * (lo.lambda + hi.lambda), &mut warm, &mut inner)?;
        if mid.g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut current = if lo.g.abs() < hi.g.abs() { lo.clone() } else { hi.clone() };
    loop {
        if current.g.abs() <= opts.root_tol * (1.0 + current.lambda * current.lambda) {
            break;
        }
        outer += 1;
        if outer > opts.max_outer {
            return Err(Error::NotConverged { what: "energy root", iterations: outer, residual: current.g.abs() });
        }
        let slope = 2.0 * mesh.weighted_square(p, &current.state.u)? - 2.0 * current.lambda;
        let mut next = current.lambda - current.g / slope;
        if !(slope < 0.0 && next > lo.lambda && next < hi.lambda) {
            next = 0.5 * (lo.lambda + hi.lambda);
        }
        if next == current.lambda {
            break;
        }
        let candidate = probe(next, &mut warm, &mut inner)?;
        if candidate.g > 0.0 {
            lo = candidate.clone();
        } else {
            hi = candidate.clone();
        }
        current = candidate;
        if hi.lambda - lo.lambda <= f64::EPSILON * hi.lambda.abs() * 4.0 {
            break;
        }
    }

    let lambda = current.lambda;
    let u = current.state.u;
    let res = residual(mesh, p, q, lambda, &u, opts.gamma)?;
    Ok(GroundState {
        lambda,
        residual: res,
        linear_mu: current.state.mu,
        iterations: Iterations { outer, inner },
        within_interval: lambda < sqrt_qmax,
        tied_fraction: tied_fraction(&u, 1e-12),
        u,
    })
}

/// Fraction of entries that coincide with another entry to `tol`.
pub fn tied_fraction(values: &[f64], tol: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tied = (0..sorted.len())
        .filter(|&i| {
            (i > 0 && sorted[i] - sorted[i - 1] <= tol) || (i + 1 < sorted.len() && sorted[i + 1] - sorted[i] <= tol)
        })
        .count();
    tied as f64 / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_annular_characteristic;
    use std::f64::consts::PI;

    #[test]
    fn rectangle_ground_mode_matches_sines() {
        let mesh = Mesh::rectangle(PI, PI, 128, 128).unwrap();
        let (mu, u) = linear_ground_state(&mesh, &vec![0.0; mesh.len()], 1.0, 1e-11).unwrap();
        assert!((mu - 2.0).abs() < 2e-3 * 2.0);
        let peak = 2.0 / PI;
        for (c, v) in mesh.centers().iter().zip(u.iter()) {
            let exact = peak * c[0].sin() * c[1].sin();
            assert!((v - exact).abs() < 1e-3 * peak);
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let mesh = Mesh::disk_radial(2.4, 128).unwrap();
        let (mu0, u0) = linear_ground_state(&mesh, &vec![0.0; mesh.len()], 0.4441, 1e-12).unwrap();
        let (mu1, u1) = linear_ground_state(&mesh, &vec![1.7; mesh.len()], 0.4441, 1e-12).unwrap();
        assert!((mu1 - mu0 - 1.7).abs() < 1e-10);
        assert!(u0.iter().zip(u1.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn rayleigh_collapses_without_potential() {
        let mesh = Mesh::disk_radial(1.0, 32).unwrap();
        let zero = vec![0.0; mesh.len()];
        let (_, u) = linear_ground_state(&mesh, &zero, 1.0, 1e-12).unwrap();
        let r = rayleigh_functional(&mesh, &zero, &zero, &u, 0.3).unwrap().unwrap();
        let expected = (0.3 * mesh.dirichlet_energy(&u).unwrap()).sqrt();
        assert!((r - expected).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_is_scale_invariant_and_rejects_zero() {
        let mesh = Mesh::disk_radial(2.4, 64).unwrap();
        let p = make_annular_characteristic(&mesh, 0.27, 2.26, 2.4).unwrap();
        let q = make_annular_characteristic(&mesh, 2.13, 2.13, 2.4).unwrap();
        let u: Vec<f64> = mesh.centers().iter().map(|c| 2.4 - c[0]).collect();
        let base = rayleigh_value(&mesh, &p, &q, &u, 0.4441).unwrap();
        for c in [-3.0, 1e-3, 17.0] {
            let scaled: Vec<f64> = u.iter().map(|v| c * v).collect();
            let r = rayleigh_value(&mesh, &p, &q, &scaled, 0.4441).unwrap();
            assert!((r - base).abs() <= 1e-12 * base);
        }
        assert!(rayleigh_value(&mesh, &p, &q, &vec![0.0; 64], 0.4441).is_err());
    }

    #[test]
    fn rayleigh_outside_domain_is_undefined() {
        let mesh = Mesh::disk_radial(1.0, 32).unwrap();
        let p = vec![0.0; 32];
        let q = vec![0.01; 32];
        let u = vec![1.0; 32];
        assert_eq!(rayleigh_functional(&mesh, &p, &q, &u, 1.0).unwrap(), None);
    }

    #[test]
    fn negative_potential_reports_violation() {
        let mesh = Mesh::disk_radial(1.0, 32).unwrap();
        let q = vec![-50.0; 32];
        let err = solve_nonlinear(&mesh, &vec![0.0; 32], &q, &SolverOptions::with_gamma(1.0)).unwrap_err();
        assert!(matches!(err, Error::ConditionsViolated(_)));
    }

    #[test]
    fn strict_interval_rejects_unconfined_energy() {
        let mesh = Mesh::disk_radial(1.0, 32).unwrap();
        let q = vec![0.01; 32];
        let opts = SolverOptions { strict_interval: true, ..SolverOptions::with_gamma(1.0) };
        assert!(matches!(
            solve_nonlinear(&mesh, &vec![0.0; 32], &q, &opts),
            Err(Error::ConditionsViolated(_))
        ));
        let relaxed = SolverOptions::with_gamma(1.0);
        let gs = solve_nonlinear(&mesh, &vec![0.0; 32], &q, &relaxed).unwrap();
        assert!(!gs.within_interval);
    }

    #[test]
    fn ties_are_counted() {
        assert_eq!(tied_fraction(&[1.0, 2.0, 3.0], 1e-12), 0.0);
        assert_eq!(tied_fraction(&[1.0, 1.0, 3.0, 4.0], 1e-12), 0.5);
    }

    #[test]
    fn perturbing_lambda_raises_residual() {
        let mesh = Mesh::disk_radial(2.4, 64).unwrap();
        let p = make_annular_characteristic(&mesh, 0.27, 2.26, 2.4).unwrap();
        let q = make_annular_characteristic(&mesh, 2.13, 2.13, 2.4).unwrap();
        let opts = SolverOptions::default();
        let gs = solve_nonlinear(&mesh, &p, &q, &opts).unwrap();
        assert!(gs.residual <= 1e-8);
        let shifted = gs.lambda + 0.1;
        let r = residual(&mesh, &p, &q, shifted, &gs.u, opts.gamma).unwrap();
        // λ²u − 2λpu changes by the quadratic increment; recompute directly.
        let direct: Vec<f64> = (0..mesh.len())
            .map(|i| (shifted * shifted - gs.lambda * gs.lambda - 0.2 * p[i]) * gs.u[i])
            .collect();
        let expected = mesh.norm_l2(&direct).unwrap();
        assert!((r - expected).abs() <= gs.residual + 1e-10);
        let pu2 = mesh.weighted_square(&p, &gs.u).unwrap();
        assert!(r >= 0.1 * (2.0 * gs.lambda + 0.1 - 2.0 * pu2).abs() * 0.5);
    }
}
