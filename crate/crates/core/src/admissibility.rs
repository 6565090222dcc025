//! Standing hypotheses on the generators p₀, q₀ and the quantities they use:
//! the Poincaré constant, the Laplacian ground mode ψ and, on the disk, J₀.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::{Distribution, Field};
use crate::mesh::Mesh;
use crate::nlep::linear_ground_state;
use crate::rearrange::{bathtub_max, similar_rearrangement};

/// First positive zero of J₀.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Joules per electronvolt.
pub const JOULES_PER_EV: f64 = 1.602_176_634e-19;

/// Converts ħ²/2m from J·m² to the internal eV·nm² scale.
pub fn gamma_from_si(gamma_si: f64) -> f64 {
    gamma_si / JOULES_PER_EV * 1e18
}

pub const UNIT_NOTE: &str = "internal units: lengths in nm; p and λ in eV; q, λ² and γ‖∇u‖² \
     on the energy-squared scale (γ in eV²·nm²); γ converted from J·m² by 1e18/e";

/// Bessel function of the first kind of order zero.
///
/// Power series below |x| = 8, Miller's backward recurrence normalized by
/// `J₀ + 2 Σ J₂ₖ = 1` above. Absolute error is near 1e-15 on |x| ≤ 50.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 8.0 {
        let y = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -y / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-3) {
                break;
            }
        }
        return sum;
    }
    let start = 2 * ((x + 20.0 + 4.0 * x.sqrt()) as usize / 2 + 1);
    let (mut above, mut here) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * here - above;
        above = here;
        here = below;
        if here.abs() > 1e200 {
            above *= 1e-200;
            here *= 1e-200;
            norm *= 1e-200;
        }
        // `here` now holds J_{k-1}
        if k == 1 {
            j0 = here;
        } else if (k - 1) % 2 == 0 {
            norm += 2.0 * here;
        }
    }
    j0 / (norm + j0)
}

/// Largest constant in Poincaré's inequality: the first Dirichlet eigenvalue.
pub fn poincare_constant(mesh: &Mesh, tol: f64) -> Result<f64> {
    Ok(linear_ground_state(mesh, &vec![0.0; mesh.len()], 1.0, tol)?.0)
}

/// Positive, L²-normalized first Dirichlet mode of the Laplacian.
pub fn laplacian_ground_mode(mesh: &Mesh, tol: f64) -> Result<Field> {
    Ok(linear_ground_state(mesh, &vec![0.0; mesh.len()], 1.0, tol)?.1)
}

/// Analytic normalized ground mode of the disk of radius `radius`.
pub fn disk_ground_mode(radius: f64, r: f64) -> f64 {
    // J₁(j₀,₁)
    const J1_AT_ZERO: f64 = 0.519_147_497_289_466_6;
    bessel_j0(J0_FIRST_ZERO * r / radius) / (radius * std::f64::consts::PI.sqrt() * J1_AT_ZERO)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionP {
    pub ok: bool,
    /// `√(γ C_Ω)/2 − max p₀`.
    pub margin: f64,
    pub rhs: f64,
}

/// `max p₀ < √(γ C_Ω)/2`, strictly.
pub fn check_condition_p(p_dist: &Distribution, gamma: f64, c_omega: f64) -> ConditionP {
    let rhs = (gamma * c_omega).sqrt() / 2.0;
    let max = p_dist.max_value();
    ConditionP { ok: p_dist.is_nonnegative() && max < rhs, margin: rhs - max, rhs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionQ {
    pub ok: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// The Rayleigh value of ψ for the maximizers p̃, q̃ of `∫ f ψ²` in each
/// class must stay below `√max q₀`.
pub fn check_condition_q(
    mesh: &Mesh,
    p_dist: &Distribution,
    q_dist: &Distribution,
    psi: &[f64],
    gamma: f64,
) -> Result<ConditionQ> {
    check_len(mesh.len(), psi.len())?;
    if q_dist.as_characteristic().is_none() {
        return Err(Error::InvalidArgument("condition on q₀ needs a characteristic class".into()));
    }
    let w: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let p_max = match p_dist.as_characteristic() {
        Some(_) => bathtub_max(mesh, p_dist, &w)?,
        None => similar_rearrangement(mesh, p_dist, &w)?,
    };
    let q_max = bathtub_max(mesh, q_dist, &w)?;
    let a = mesh.weighted_square(&p_max.field, psi)?;
    let b = mesh.weighted_square(&q_max.field, psi)?;
    let lhs = a + (a * a + b + gamma * mesh.dirichlet_energy(psi)?).sqrt();
    let rhs = q_dist.max_value().max(0.0).sqrt();
    Ok(ConditionQ { ok: lhs < rhs, lhs, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Confinement {
    /// 1 where `q + 2λp < λ²`.
    pub mask: Field,
    pub confined_measure: f64,
}

pub fn confinement_mask(mesh: &Mesh, p: &[f64], q: &[f64], lambda: f64) -> Result<Confinement> {
    check_len(mesh.len(), p.len())?;
    check_len(mesh.len(), q.len())?;
    let mask: Field = p
        .iter()
        .zip(q)
        .map(|(p, q)| if q + 2.0 * lambda * p < lambda * lambda { 1.0 } else { 0.0 })
        .collect();
    let confined_measure = mesh.integrate(&mask)?;
    Ok(Confinement { mask, confined_measure })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub c_omega: f64,
    #[serde(skip)]
    pub psi: Field,
    pub gamma: f64,
    pub cond_p_ok: bool,
    pub cond_p_margin: f64,
    pub cond_p_rhs: f64,
    pub cond_q_ok: bool,
    pub cond_q_lhs: f64,
    pub cond_q_rhs: f64,
    pub notes: Vec<String>,
}

impl AdmissibilityReport {
    pub fn ok(&self) -> bool {
        self.cond_p_ok && self.cond_q_ok
    }
}

pub fn check_admissibility(
    mesh: &Mesh,
    p_dist: &Distribution,
    q_dist: &Distribution,
    gamma: f64,
    tol: f64,
) -> Result<AdmissibilityReport> {
    let (c_omega, psi) = linear_ground_state(mesh, &vec![0.0; mesh.len()], 1.0, tol)?;
    let cond_p = check_condition_p(p_dist, gamma, c_omega);
    let cond_q = check_condition_q(mesh, p_dist, q_dist, &psi, gamma)?;
    let mut notes = vec![UNIT_NOTE.to_string()];
    if q_dist.max_value() == 0.0 {
        notes.push("q₀ vanishes identically: the energy interval is empty and the q condition cannot hold".into());
    }
    if !cond_p.ok {
        notes.push(format!("max p₀ = {} does not stay below {:.6}", p_dist.max_value(), cond_p.rhs));
    }
    if !cond_q.ok {
        notes.push(format!("q condition: lhs {:.6} is not below rhs {:.6}", cond_q.lhs, cond_q.rhs));
    }
    Ok(AdmissibilityReport {
        c_omega,
        psi,
        gamma,
        cond_p_ok: cond_p.ok,
        cond_p_margin: cond_p.margin,
        cond_p_rhs: cond_p.rhs,
        cond_q_ok: cond_q.ok,
        cond_q_lhs: cond_q.lhs,
        cond_q_rhs: cond_q.rhs,
        notes,
    })
}
