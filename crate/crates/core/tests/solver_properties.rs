mod common;

use std::f64::consts::PI;

use qdopt::admissibility::{disk_ground_mode, laplacian_ground_mode, poincare_constant, J0_FIRST_ZERO};
use qdopt::field::make_annular_characteristic;
use qdopt::nlep::{frozen_ground_state, rayleigh_value, solve_nonlinear, solve_nonlinear_from, DEFAULT_GAMMA};
use qdopt::{Error, Mesh, SolverOptions};
use rand::Rng;

fn convergence_ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

#[test]
fn second_order_convergence_on_disk_and_rectangle() {
    let exact = J0_FIRST_ZERO.powi(2);
    let disk: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| (poincare_constant(&Mesh::disk_radial(1.0, n).unwrap(), 1e-13).unwrap() - exact).abs())
        .collect();
    let rect: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| (poincare_constant(&Mesh::rectangle(PI, PI, n, n).unwrap(), 1e-13).unwrap() - 2.0).abs())
        .collect();
    for ratios in [convergence_ratios(&disk), convergence_ratios(&rect)] {
        for r in ratios {
            assert!((3.5..=4.5).contains(&r), "ratio {r}");
        }
    }
}

#[test]
fn ground_mode_matches_the_bessel_profile() {
    let mesh = Mesh::disk_radial(2.4, 2048).unwrap();
    let psi = laplacian_ground_mode(&mesh, 1e-13).unwrap();
    // amplitude of the L²-normalized mode: 1 / (R √π J₁(j₀₁))
    let amp = 1.0 / (2.4 * PI.sqrt() * 0.519_147_497_289_466_6);
    assert!((amp - 0.452_817_348_4).abs() < 1e-9);
    for i in (0..mesh.len()).step_by(97) {
        let r = mesh.radial_distance(i);
        assert!((psi[i] - disk_ground_mode(2.4, r)).abs() < 1e-5, "r = {r}");
    }
}

fn dot_problem(n: usize) -> (Mesh, Vec<f64>, Vec<f64>) {
    let mesh = Mesh::disk_radial(2.4, n).unwrap();
    let p = make_annular_characteristic(&mesh, 0.27, 2.26, 2.4).unwrap().into_inner();
    let q = make_annular_characteristic(&mesh, 2.13, 2.13, 2.4).unwrap().into_inner();
    (mesh, p, q)
}

#[test]
fn ground_energy_minimizes_the_rayleigh_value() {
    let (mesh, p, q) = dot_problem(256);
    let lambda = solve_nonlinear(&mesh, &p, &q, &SolverOptions::default()).unwrap().lambda;
    let mut rng = common::rng(11);
    for _ in 0..100 {
        let (a, b) = (rng.random_range(0.1..3.0), rng.random_range(-0.5..0.5));
        let u: Vec<f64> = (0..mesh.len())
            .map(|i| {
                let r = mesh.radial_distance(i) / 2.4;
                (1.0 - r * r).powf(a) * (1.0 + b * r) + rng.random_range(0.0..0.01)
            })
            .collect();
        let value = rayleigh_value(&mesh, &p, &q, &u, DEFAULT_GAMMA).unwrap();
        assert!(value >= lambda - 1e-12, "{value} < {lambda}");
    }
}

#[test]
fn root_is_unique_and_crossed_downward() {
    let (mesh, p, q) = dot_problem(256);
    let opts = SolverOptions::default();
    let base = solve_nonlinear(&mesh, &p, &q, &opts).unwrap();
    let mut rng = common::rng(12);
    for _ in 0..5 {
        let start = common::uniform(&mut rng, mesh.len(), 0.1, 1.0);
        let other = solve_nonlinear_from(&mesh, &p, &q, &opts, Some(&start)).unwrap();
        assert!((other.lambda - base.lambda).abs() < 1e-10);
    }
    let slope = 2.0 * mesh.weighted_square(&p, &base.u).unwrap() - 2.0 * base.lambda;
    assert!(slope < 0.0);
    // sign change of g around the root
    for (dl, positive) in [(-1e-3, true), (1e-3, false)] {
        let st = frozen_ground_state(&mesh, &p, &q, base.lambda + dl, &opts, None).unwrap();
        let g = st.mu - (base.lambda + dl).powi(2);
        assert_eq!(g > 0.0, positive);
    }
    assert!(base.within_interval);
    assert!(base.u.iter().all(|&v| v > 0.0));
    assert!(base.residual < 1e-7);
}

#[test]
fn vanishing_q_uses_the_rayleigh_bracket() {
    let mesh = Mesh::disk_radial(1.0, 128).unwrap();
    let p = make_annular_characteristic(&mesh, 0.2, 0.5, 1.0).unwrap();
    let q = vec![0.0; mesh.len()];
    let gs = solve_nonlinear(&mesh, &p, &q, &SolverOptions::default()).unwrap();
    assert!(!gs.within_interval);
    let strict = SolverOptions { strict_interval: true, ..SolverOptions::default() };
    assert!(matches!(solve_nonlinear(&mesh, &p, &q, &strict), Err(Error::ConditionsViolated(_))));
    // the oracle agrees with the fallback root
    let small = Mesh::disk_radial(1.0, 40).unwrap();
    let p = make_annular_characteristic(&small, 0.2, 0.5, 1.0).unwrap();
    let got = solve_nonlinear(&small, &p, &vec![0.0; 40], &SolverOptions::default()).unwrap().lambda;
    let oracle = common::companion_ground_energy(&small, &p, &vec![0.0; 40], DEFAULT_GAMMA);
    assert!((got - oracle).abs() <= 1e-9 * oracle);
}

#[test]
fn invalid_inputs_are_rejected() {
    let mesh = Mesh::disk_radial(1.0, 16).unwrap();
    let z = vec![0.0; 16];
    assert!(matches!(solve_nonlinear(&mesh, &z[..15], &z, &SolverOptions::default()), Err(Error::LengthMismatch { .. })));
    let mut bad = z.clone();
    bad[3] = f64::NAN;
    assert!(solve_nonlinear(&mesh, &bad, &z, &SolverOptions::default()).is_err());
    assert!(solve_nonlinear(&mesh, &z, &z, &SolverOptions::with_gamma(-1.0)).is_err());
}

#[test]
fn dilation_scales_the_zero_potential_energy() {
    let mesh = Mesh::rectangle(1.0, 1.5, 24, 36).unwrap();
    let c = poincare_constant(&mesh, 1e-13).unwrap();
    let c2 = poincare_constant(&mesh.dilated(2.0).unwrap(), 1e-13).unwrap();
    assert!((c / c2 - 4.0).abs() < 1e-9);
}
