//! Alternating minimization of the ground energy over two rearrangement
//! classes.
//!
//! Each step freezes the wave function `u` of the current potentials and
//! replaces `q` by the bathtub minimizer of `∫ q u²` and `p` by the member of
//! its class arranged oppositely to `u²`. Both replacements lower the Rayleigh
//! functional at fixed `u`, and re-solving minimizes it over `u`, so the
//! energies never increase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::{l1_distance, Distribution, Field};
use crate::mesh::Mesh;
use crate::nlep::{solve_nonlinear_from, GroundState, GroundStateSummary, SolverOptions};
use crate::rearrange::{bathtub_min, opposite_rearrangement, schwarz_increasing, similar_rearrangement};

/// Per-step slack allowed in the descent check.
pub const DESCENT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum StartPolicy {
    /// Both classes arranged like a radially decreasing seed: the potentials
    /// sit where the wave function wants to be.
    Adversarial,
    /// Both classes arranged oppositely to the radially decreasing seed.
    Schwarz,
    /// Placement against uniform random weights.
    Random { seed: u64 },
    Custom { p: Field, q: Field },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Stagnation tolerance on λ (absolute); fields must also move by at most
    /// this much in measure-weighted L¹.
    pub tol: f64,
    pub start: StartPolicy,
    /// Keep `(p, q)` of every iterate in the report.
    pub record_snapshots: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-10, start: StartPolicy::Adversarial, record_snapshots: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchwarzGap {
    /// `‖p − {p₀}_*‖_{L¹}`.
    pub p: f64,
    pub q: f64,
    /// `2 · max cell measure · height` for each class.
    pub p_bound: f64,
    pub q_bound: f64,
}

impl SchwarzGap {
    pub fn within_bound(&self) -> bool {
        self.p <= self.p_bound && self.q <= self.q_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub lambda: f64,
    pub p: Field,
    pub q: Field,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationReport {
    pub lambda_history: Vec<f64>,
    pub p_final: Field,
    pub q_final: Field,
    pub u_final: Field,
    /// Number of update steps taken.
    pub iterations: usize,
    pub converged: bool,
    /// The iteration revisited an earlier `(p, q)` without reaching a fixed point.
    pub cycling: bool,
    pub fixed_point_gap: f64,
    pub schwarz_gap: Option<SchwarzGap>,
    pub monotone: bool,
    pub ground_state: GroundStateSummary,
    /// Largest distribution error introduced by cell quantization in the
    /// final fields.
    pub measure_error: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<Snapshot>,
}

impl OptimizationReport {
    pub fn lambda(&self) -> f64 {
        self.ground_state.lambda
    }
}

#[derive(Debug, Clone)]
pub struct DescentStep {
    pub p: Field,
    pub q: Field,
    pub ground_state: GroundState,
    pub measure_error: f64,
}

fn seed_weight(mesh: &Mesh) -> Vec<f64> {
    let far = (0..mesh.len()).map(|i| mesh.radial_distance(i)).fold(0.0, f64::max);
    (0..mesh.len()).map(|i| far - mesh.radial_distance(i)).collect()
}

/// Initial `(p, q)` for a start policy.
pub fn initial_fields(
    mesh: &Mesh,
    p_dist: &Distribution,
    q_dist: &Distribution,
    start: &StartPolicy,
) -> Result<(Field, Field)> {
    Ok(match start {
        StartPolicy::Adversarial => {
            let w = seed_weight(mesh);
            (similar_rearrangement(mesh, p_dist, &w)?.field, similar_rearrangement(mesh, q_dist, &w)?.field)
        }
        StartPolicy::Schwarz if mesh.is_disk() => {
            (schwarz_increasing(mesh, p_dist)?.field, schwarz_increasing(mesh, q_dist)?.field)
        }
        StartPolicy::Schwarz => {
            let w = seed_weight(mesh);
            (opposite_rearrangement(mesh, p_dist, &w)?.field, opposite_rearrangement(mesh, q_dist, &w)?.field)
        }
        StartPolicy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let wp: Vec<f64> = (0..mesh.len()).map(|_| rng.random::<f64>()).collect();
            let wq: Vec<f64> = (0..mesh.len()).map(|_| rng.random::<f64>()).collect();
            (opposite_rearrangement(mesh, p_dist, &wp)?.field, opposite_rearrangement(mesh, q_dist, &wq)?.field)
        }
        StartPolicy::Custom { p, q } => {
            check_len(mesh.len(), p.len())?;
            check_len(mesh.len(), q.len())?;
            (p.clone(), q.clone())
        }
    })
}

/// Bathtub update of `q` against `u²`.
pub fn update_q(mesh: &Mesh, q_dist: &Distribution, u: &[f64]) -> Result<crate::rearrange::Rearranged> {
    let w: Vec<f64> = u.iter().map(|v| v * v).collect();
    bathtub_min(mesh, q_dist, &w)
}

/// Opposite-rearrangement update of `p` against `u²`.
pub fn update_p(mesh: &Mesh, p_dist: &Distribution, u: &[f64]) -> Result<crate::rearrange::Rearranged> {
    let w: Vec<f64> = u.iter().map(|v| v * v).collect();
    opposite_rearrangement(mesh, p_dist, &w)
}

/// One alternating step from a solved ground state.
pub fn descent_step(
    mesh: &Mesh,
    p_dist: &Distribution,
    q_dist: &Distribution,
    gs: &GroundState,
    opts: &SolverOptions,
) -> Result<DescentStep> {
    let q = update_q(mesh, q_dist, &gs.u)?;
    let p = update_p(mesh, p_dist, &gs.u)?;
    let next = solve_nonlinear_from(mesh, &p.field, &q.field, opts, Some(&gs.u))?;
    Ok(DescentStep {
        measure_error: p.measure_error.max(q.measure_error),
        p: p.field,
        q: q.field,
        ground_state: next,
    })
}

fn validate_classes(mesh: &Mesh, p_dist: &Distribution, q_dist: &Distribution) -> Result<()> {
    if q_dist.as_characteristic().is_none() {
        return Err(Error::InvalidArgument("q class must consist of characteristic functions".into()));
    }
    if !p_dist.is_nonnegative() || !q_dist.is_nonnegative() {
        return Err(Error::InvalidArgument("classes must be nonnegative".into()));
    }
    let area: f64 = mesh.measures().iter().sum();
    for (name, d) in [("p", p_dist), ("q", q_dist)] {
        if (d.total_measure() - area).abs() > 1e-9 * area {
            return Err(Error::InvalidArgument(format!(
                "{name} class measure {} differs from the domain area {area}",
                d.total_measure()
            )));
        }
    }
    Ok(())
}

/// L¹ distance of `(p, q)` to the Schwarz increasing rearrangements of their
/// classes. On polar meshes both sides are averaged over rings first: a
/// partly filled ring can be occupied at any angle by a radial optimum.
pub fn schwarz_gap(mesh: &Mesh, p: &[f64], q: &[f64], p_dist: &Distribution, q_dist: &Distribution) -> Result<Option<SchwarzGap>> {
    if !mesh.is_disk() {
        return Ok(None);
    }
    let ps = schwarz_increasing(mesh, p_dist)?.field;
    let qs = schwarz_increasing(mesh, q_dist)?.field;
    let cell = mesh.max_measure();
    let gap = |f: &[f64], g: &[f64]| -> Result<f64> { l1_distance(mesh, &mesh.ring_mean(f)?, &mesh.ring_mean(g)?) };
    Ok(Some(SchwarzGap {
        p: gap(p, &ps)?,
        q: gap(q, &qs)?,
        p_bound: 2.0 * cell * p_dist.max_value(),
        q_bound: 2.0 * cell * q_dist.max_value(),
    }))
}

/// Alternating minimization of the ground energy over the classes of
/// `p_dist` and `q_dist`.
pub fn minimize_ground_state(
    mesh: &Mesh,
    p_dist: &Distribution,
    q_dist: &Distribution,
    solver: &SolverOptions,
    opts: &OptimizeOptions,
) -> Result<OptimizationReport> {
    validate_classes(mesh, p_dist, q_dist)?;
    let (mut p, mut q) = initial_fields(mesh, p_dist, q_dist, &opts.start)?;
    let mut gs = solve_nonlinear_from(mesh, &p, &q, solver, None)
        .map_err(|e| Error::Iterate { iteration: 0, source: Box::new(e) })?;
    let mut history = vec![gs.lambda];
    let mut snapshots = Vec::new();
    if opts.record_snapshots {
        snapshots.push(Snapshot { lambda: gs.lambda, p: p.clone(), q: q.clone() });
    }
    let mut visited: Vec<(Field, Field)> = vec![(p.clone(), q.clone())];
    let mut best = (gs.clone(), p.clone(), q.clone());
    let mut converged = false;
    let mut cycling = false;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut measure_error = 0.0;

    while iterations < opts.max_iters {
        iterations += 1;
        let step = descent_step(mesh, p_dist, q_dist, &gs, solver)
            .map_err(|e| Error::Iterate { iteration: iterations, source: Box::new(e) })?;
        gap = l1_distance(mesh, &step.p, &p)? + l1_distance(mesh, &step.q, &q)?;
        let previous = gs.lambda;
        history.push(step.ground_state.lambda);
        measure_error = step.measure_error;
        p = step.p;
        q = step.q;
        gs = step.ground_state;
        if opts.record_snapshots {
            snapshots.push(Snapshot { lambda: gs.lambda, p: p.clone(), q: q.clone() });
        }
        if gs.lambda < best.0.lambda {
            best = (gs.clone(), p.clone(), q.clone());
        }
        if gap <= opts.tol && (gs.lambda - previous).abs() <= opts.tol {
            converged = true;
            break;
        }
        if visited.iter().any(|(vp, vq)| *vp == p && *vq == q) {
            cycling = true;
            break;
        }
        visited.push((p.clone(), q.clone()));
    }

    if !converged {
        (gs, p, q) = best;
    }
    let monotone = history.windows(2).all(|w| w[1] <= w[0] + DESCENT_SLACK);
    Ok(OptimizationReport {
        schwarz_gap: schwarz_gap(mesh, &p, &q, p_dist, q_dist)?,
        lambda_history: history,
        ground_state: gs.summary(),
        u_final: gs.u,
        p_final: p,
        q_final: q,
        iterations,
        converged,
        cycling,
        fixed_point_gap: gap,
        monotone,
        measure_error,
        snapshots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointCertificate {
    /// Cells where recomputing the `p` update from `u_final` disagrees with `p_final`.
    pub p_mismatch: Vec<usize>,
    pub q_mismatch: Vec<usize>,
    pub schwarz: Option<SchwarzGap>,
    pub passed: bool,
}

/// Recomputes both updates from `u_final` and checks that they reproduce
/// the reported fields; on disks also compares against the Schwarz
/// increasing rearrangements of the classes.
pub fn certify_fixed_point(
    mesh: &Mesh,
    report: &OptimizationReport,
    p_dist: &Distribution,
    q_dist: &Distribution,
) -> Result<FixedPointCertificate> {
    if !report.converged {
        return Err(Error::InvalidArgument("certificate needs a converged report".into()));
    }
    let p = update_p(mesh, p_dist, &report.u_final)?.field;
    let q = update_q(mesh, q_dist, &report.u_final)?.field;
    let mismatch = |a: &[f64], b: &[f64]| (0..a.len()).filter(|&i| a[i] != b[i]).collect::<Vec<_>>();
    let p_mismatch = mismatch(&p, &report.p_final);
    let q_mismatch = mismatch(&q, &report.q_final);
    let schwarz = schwarz_gap(mesh, &report.p_final, &report.q_final, p_dist, q_dist)?;
    let passed = p_mismatch.is_empty() && q_mismatch.is_empty() && schwarz.is_none_or(|s| s.within_bound());
    Ok(FixedPointCertificate { p_mismatch, q_mismatch, schwarz, passed })
}
