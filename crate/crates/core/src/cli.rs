//! Command-line front end. `run` returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | `check`: an admissibility condition fails |
//! | 2 | solver error |
//! | 3 | configuration or I/O error, bad arguments |
//! | 4 | `optimize`: admissibility fails and `--force` was not given |
//! | 5 | `reproduce-paper`: an assertion on the result fails |

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::admissibility::{check_admissibility, confinement_mask, gamma_from_si, AdmissibilityReport, UNIT_NOTE};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::field::{distribution_of, l1_distance, make_annular_characteristic, read_field_csv, write_field_csv, Distribution, Field};
use crate::mesh::{Mesh, MeshKind, MeshSpec};
use crate::nlep::{solve_nonlinear, GroundStateSummary, SolverOptions, DEFAULT_GAMMA};
use crate::optimize::{
    certify_fixed_point, minimize_ground_state, FixedPointCertificate, OptimizationReport, OptimizeOptions,
    SchwarzGap, StartPolicy,
};
use crate::rearrange::schwarz_increasing;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INADMISSIBLE: i32 = 4;
pub const EXIT_ASSERTION: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "qdopt", version, about = "Ground-state optimization over rearrangement classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the nonlinear ground state for fixed p and q.
    Solve(RunArgs),
    /// Minimize the ground energy over the classes of p₀ and q₀.
    Optimize(OptimizeArgs),
    /// Evaluate the admissibility conditions.
    Check(RunArgs),
    /// Write the Schwarz increasing rearrangements of p and q.
    Schwarz(RunArgs),
    /// Rerun the built-in quantum-dot example and check the result.
    ReproducePaper(ReproduceArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the radial count (disks) or nx (rectangles, ny scaled along).
    #[arg(long)]
    resolution: Option<usize>,
    /// Overrides the root tolerance of the nonlinear solve.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// adversarial | schwarz | random | csv:DIR (reads DIR/p_final.csv and DIR/q_final.csv)
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2048)]
    resolution: usize,
    #[arg(long)]
    tol: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Schwarz(a) => cmd_schwarz(&a),
        Command::ReproducePaper(a) => cmd_reproduce_paper(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error that aborted a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } | Error::ConditionsViolated(_) | Error::Iterate { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

/// Marks errors raised while reading inputs as configuration errors.
fn config_err(err: Error) -> Error {
    match err {
        Error::Config(_) => err,
        other => Error::Config(other.to_string()),
    }
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    out.write_record(header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

struct Loaded {
    cfg: Config,
    mesh: Mesh,
    solver: SolverOptions,
}

fn load(args: &RunArgs) -> Result<Loaded> {
    let cfg = Config::load(&args.config)?;
    let mesh = cfg.mesh.build(args.resolution).map_err(config_err)?;
    let mut solver = cfg.solver_options();
    if let Some(tol) = args.tol {
        solver.root_tol = tol;
    }
    solver.validate().map_err(config_err)?;
    Ok(Loaded { cfg, mesh, solver })
}

fn classes(l: &Loaded) -> Result<(Distribution, Distribution)> {
    let p0 = l.cfg.p_distribution(&l.mesh).map_err(config_err)?;
    let q0 = l.cfg.q_distribution(&l.mesh).map_err(config_err)?;
    Ok((p0, q0))
}

#[derive(Serialize)]
struct GroundStateFile<'a> {
    mesh: &'a MeshSpec,
    gamma: f64,
    #[serde(flatten)]
    ground_state: GroundStateSummary,
    units: &'static str,
}

fn print_ground_state(gs: &GroundStateSummary) {
    println!("lambda         = {:.10} eV", gs.lambda);
    println!("lambda^2       = {:.10} eV^2", gs.lambda_squared);
    println!("residual       = {:.3e}", gs.residual);
    println!("iterations     = {} outer, {} inner", gs.iterations.outer, gs.iterations.inner);
    if !gs.within_interval {
        println!("note: lambda lies above sqrt(max q); the state is not confined by q");
    }
}

fn cmd_solve(args: &RunArgs) -> Result<i32> {
    let l = load(args)?;
    let p = l.cfg.p_field(&l.mesh).map_err(config_err)?;
    let q = l.cfg.q_field(&l.mesh).map_err(config_err)?;
    prepare_out_dir(&args.out_dir)?;
    let gs = solve_nonlinear(&l.mesh, &p, &q, &l.solver)?;
    let summary = gs.summary();
    print_ground_state(&summary);
    write_json(
        &args.out_dir.join("groundstate.json"),
        &GroundStateFile { mesh: l.mesh.spec(), gamma: l.solver.gamma, ground_state: summary, units: UNIT_NOTE },
    )?;
    write_field_csv(&l.mesh, &gs.u, &args.out_dir.join("u.csv"))?;
    Ok(EXIT_OK)
}

fn print_admissibility(r: &AdmissibilityReport) {
    println!("C_Omega        = {:.10}", r.c_omega);
    println!(
        "condition p    : {} (max p0 margin {:.6}, bound {:.6})",
        if r.cond_p_ok { "ok" } else { "FAILS" },
        r.cond_p_margin,
        r.cond_p_rhs
    );
    println!(
        "condition q    : {} (lhs {:.6} vs sqrt(max q0) {:.6})",
        if r.cond_q_ok { "ok" } else { "FAILS" },
        r.cond_q_lhs,
        r.cond_q_rhs
    );
    for note in &r.notes {
        println!("note: {note}");
    }
}

fn admissibility(l: &Loaded, p0: &Distribution, q0: &Distribution) -> Result<AdmissibilityReport> {
    check_admissibility(&l.mesh, p0, q0, l.solver.gamma, l.solver.eig_tol)
}

fn cmd_check(args: &RunArgs) -> Result<i32> {
    let l = load(args)?;
    let (p0, q0) = classes(&l)?;
    let report = admissibility(&l, &p0, &q0)?;
    print_admissibility(&report);
    prepare_out_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("admissibility.json"), &report)?;
    Ok(if report.ok() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Parses a start policy: `adversarial`, `schwarz`, `random` or `csv:DIR`.
pub fn parse_start(spec: &str, seed: u64, mesh: &Mesh, base: &Path) -> Result<StartPolicy> {
    Ok(match spec {
        "adversarial" => StartPolicy::Adversarial,
        "schwarz" => StartPolicy::Schwarz,
        "random" => StartPolicy::Random { seed },
        other => match other.strip_prefix("csv:") {
            Some(dir) => {
                let dir = base.join(dir);
                StartPolicy::Custom {
                    p: read_field_csv(mesh, &dir.join("p_final.csv")).map_err(config_err)?,
                    q: read_field_csv(mesh, &dir.join("q_final.csv")).map_err(config_err)?,
                }
            }
            None => return Err(Error::Config(format!("unknown start policy {other:?}"))),
        },
    })
}

#[derive(Serialize)]
struct ReportFile<'a> {
    mesh: &'a MeshSpec,
    gamma: f64,
    lambda: f64,
    lambda_squared: f64,
    iterations: usize,
    converged: bool,
    cycling: bool,
    monotone: bool,
    fixed_point_gap: f64,
    measure_error: f64,
    schwarz_gap: Option<SchwarzGap>,
    certificate: Option<FixedPointCertificate>,
    admissibility: &'a AdmissibilityReport,
    forced: bool,
    ground_state: GroundStateSummary,
    lambda_history: &'a [f64],
}

fn write_lambda_history(path: &Path, history: &[f64]) -> Result<()> {
    write_rows(
        path,
        &["iteration", "lambda", "lambda_squared"],
        history.iter().enumerate().map(|(k, l)| vec![k.to_string(), l.to_string(), (l * l).to_string()]),
    )
}

/// Radial profile of a disk solution; polar rings are averaged over angle.
fn write_radial_profile(mesh: &Mesh, lambda: f64, p: &[f64], q: &[f64], u: &[f64], path: &Path) -> Result<()> {
    let rings: Vec<Vec<usize>> = match mesh.kind() {
        MeshKind::DiskRadial => (0..mesh.len()).map(|i| vec![i]).collect(),
        MeshKind::DiskPolar => {
            let nt = mesh.spec().resolution[1];
            (0..mesh.len() / nt).map(|ir| (ir * nt..(ir + 1) * nt).collect()).collect()
        }
        MeshKind::Rectangle => return Ok(()),
    };
    let mean = |f: &[f64], ring: &[usize]| ring.iter().map(|&i| f[i]).sum::<f64>() / ring.len() as f64;
    write_rows(
        path,
        &["r", "p", "q", "V", "u"],
        rings.iter().map(|ring| {
            let (pm, qm) = (mean(p, ring), mean(q, ring));
            vec![
                mesh.radial_distance(ring[0]).to_string(),
                pm.to_string(),
                qm.to_string(),
                (qm + 2.0 * lambda * pm).to_string(),
                mean(u, ring).to_string(),
            ]
        }),
    )
}

fn print_report(report: &OptimizationReport, cert: Option<&FixedPointCertificate>) {
    println!("lambda         = {:.10} eV", report.lambda());
    println!("lambda^2       = {:.10} eV^2", report.ground_state.lambda_squared);
    println!("iterations     = {}", report.iterations);
    println!("converged      = {}", report.converged);
    if report.cycling {
        println!("cycling        = true");
    }
    println!("monotone       : {}", if report.monotone { "ok" } else { "FAILS" });
    match cert {
        Some(c) => println!(
            "fixed point    : {} ({} p cells, {} q cells off)",
            if c.p_mismatch.is_empty() && c.q_mismatch.is_empty() { "ok" } else { "FAILS" },
            c.p_mismatch.len(),
            c.q_mismatch.len()
        ),
        None => println!("fixed point    : not certified (gap {:.3e})", report.fixed_point_gap),
    }
    if let Some(s) = report.schwarz_gap {
        println!(
            "schwarz gap    : {} (p {:.3e} <= {:.3e}, q {:.3e} <= {:.3e})",
            if s.within_bound() { "ok" } else { "FAILS" },
            s.p,
            s.p_bound,
            s.q,
            s.q_bound
        );
    }
}

struct OptimizeRun {
    report: OptimizationReport,
    certificate: Option<FixedPointCertificate>,
}

fn optimize_and_write(
    mesh: &Mesh,
    p0: &Distribution,
    q0: &Distribution,
    solver: &SolverOptions,
    opts: &OptimizeOptions,
    admissibility: &AdmissibilityReport,
    forced: bool,
    out_dir: &Path,
) -> Result<OptimizeRun> {
    let report = minimize_ground_state(mesh, p0, q0, solver, opts)?;
    let certificate = if report.converged { Some(certify_fixed_point(mesh, &report, p0, q0)?) } else { None };
    print_report(&report, certificate.as_ref());
    write_json(
        &out_dir.join("report.json"),
        &ReportFile {
            mesh: mesh.spec(),
            gamma: solver.gamma,
            lambda: report.lambda(),
            lambda_squared: report.ground_state.lambda_squared,
            iterations: report.iterations,
            converged: report.converged,
            cycling: report.cycling,
            monotone: report.monotone,
            fixed_point_gap: report.fixed_point_gap,
            measure_error: report.measure_error,
            schwarz_gap: report.schwarz_gap,
            certificate: certificate.clone(),
            admissibility,
            forced,
            ground_state: report.ground_state.clone(),
            lambda_history: &report.lambda_history,
        },
    )?;
    write_field_csv(mesh, &report.p_final, &out_dir.join("p_final.csv"))?;
    write_field_csv(mesh, &report.q_final, &out_dir.join("q_final.csv"))?;
    write_field_csv(mesh, &report.u_final, &out_dir.join("u_final.csv"))?;
    write_lambda_history(&out_dir.join("lambda_history.csv"), &report.lambda_history)?;
    write_radial_profile(
        mesh,
        report.lambda(),
        &report.p_final,
        &report.q_final,
        &report.u_final,
        &out_dir.join("radial_profile.csv"),
    )?;
    Ok(OptimizeRun { report, certificate })
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<i32> {
    let l = load(&args.run)?;
    let (p0, q0) = classes(&l)?;
    let seed = args.seed.or(l.cfg.seed).unwrap_or(0);
    let start = args.start.as_deref().or(l.cfg.start.as_deref()).unwrap_or("adversarial");
    let base = if args.start.is_some() { Path::new(".") } else { l.cfg.base_dir.as_path() };
    let start = parse_start(start, seed, &l.mesh, base)?;
    let mut opts = OptimizeOptions { start, tol: l.cfg.tolerances.opt_tol, ..OptimizeOptions::default() };
    if let Some(n) = args.max_iters.or(l.cfg.max_iters) {
        opts.max_iters = n;
    }
    if let Some(tol) = args.run.tol {
        opts.tol = tol;
    }

    let adm = admissibility(&l, &p0, &q0)?;
    print_admissibility(&adm);
    if !adm.ok() && !args.force {
        eprintln!("error: the classes are not admissible; rerun with --force to optimize anyway");
        return Ok(EXIT_INADMISSIBLE);
    }
    prepare_out_dir(&args.run.out_dir)?;
    optimize_and_write(&l.mesh, &p0, &q0, &l.solver, &opts, &adm, args.force, &args.run.out_dir)?;
    Ok(EXIT_OK)
}

fn cmd_schwarz(args: &RunArgs) -> Result<i32> {
    let l = load(args)?;
    if !l.mesh.is_disk() {
        return Err(Error::Config("schwarz needs a disk mesh".into()));
    }
    let (p0, q0) = classes(&l)?;
    prepare_out_dir(&args.out_dir)?;
    let p = schwarz_increasing(&l.mesh, &p0)?;
    let q = schwarz_increasing(&l.mesh, &q0)?;
    let given = [
        l.cfg.p.as_ref().map(|_| l.cfg.p_field(&l.mesh)),
        l.cfg.q.as_ref().map(|_| l.cfg.q_field(&l.mesh)),
    ];
    for ((name, out), given) in [("p", &p), ("q", &q)].into_iter().zip(given) {
        println!("{name}_schwarz measure error = {:.3e}", out.measure_error);
        if let Some(field) = given {
            let gap = l1_distance(&l.mesh, &field.map_err(config_err)?, &out.field)?;
            println!("{name} L1 distance to its Schwarz rearrangement = {gap:.6e}");
        }
        write_field_csv(&l.mesh, &out.field, &args.out_dir.join(format!("{name}_schwarz.csv")))?;
    }
    Ok(EXIT_OK)
}

/// Built-in dot example: radius, breakpoints and heights.
pub mod example {
    pub const RADIUS: f64 = 2.4;
    pub const R1: f64 = 2.13;
    pub const R2: f64 = 2.26;
    pub const H_P: f64 = 0.27;
    pub const H_Q: f64 = 2.13;
    /// Electron effective mass of the example, kg.
    pub const MASS_KG: f64 = 7.816_38e-32;
    /// ħ²/2m for that mass, J·m².
    pub const GAMMA_SI: f64 = 7.114_043_325e-38;
    pub const LAMBDA_SQUARED: f64 = 0.45;
    pub const BAND: f64 = 0.1;
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    expected: String,
    observed: String,
    passed: bool,
}

fn cmd_reproduce_paper(args: &ReproduceArgs) -> Result<i32> {
    use example::*;
    let started = Instant::now();
    let mesh = Mesh::disk_radial(RADIUS, args.resolution).map_err(config_err)?;
    let mut solver = SolverOptions::with_gamma(DEFAULT_GAMMA);
    if let Some(tol) = args.tol {
        solver.root_tol = tol;
    }
    println!("gamma (SI)     = {GAMMA_SI:e} J m^2  (m = {MASS_KG:e} kg)");
    println!("gamma          = {:.6} eV^2 nm^2 converted, {DEFAULT_GAMMA} used", gamma_from_si(GAMMA_SI));
    println!("mesh           = disk_radial, R = {RADIUS} nm, n = {}", args.resolution);

    let p_hat = make_annular_characteristic(&mesh, H_P, R2, RADIUS)?;
    let q_hat = make_annular_characteristic(&mesh, H_Q, R1, RADIUS)?;
    let p0 = distribution_of(&mesh, &p_hat)?;
    let q0 = distribution_of(&mesh, &q_hat)?;
    let adm = check_admissibility(&mesh, &p0, &q0, solver.gamma, solver.eig_tol)?;
    print_admissibility(&adm);

    prepare_out_dir(&args.out_dir)?;
    let fixed = solve_nonlinear(&mesh, &p_hat, &q_hat, &solver)?;
    println!("fixed annuli   : lambda^2 = {:.10}", fixed.lambda * fixed.lambda);
    let run = optimize_and_write(
        &mesh,
        &p0,
        &q0,
        &solver,
        &OptimizeOptions::default(),
        &adm,
        false,
        &args.out_dir,
    )?;
    let report = &run.report;
    let lambda = report.lambda();
    let l2 = lambda * lambda;

    write_rows(
        &args.out_dir.join("potential_table.csv"),
        &["r_from", "r_to", "V"],
        [
            (0.0, R1, 0.0),
            (R1, R2, H_Q),
            (R2, RADIUS, H_Q + 2.0 * lambda * H_P),
        ]
        .iter()
        .map(|(a, b, v)| vec![a.to_string(), b.to_string(), v.to_string()]),
    )?;

    let conf = confinement_mask(&mesh, &report.p_final, &report.q_final, lambda)?;
    let confined_ok = (0..mesh.len()).all(|i| (conf.mask[i] == 1.0) == (mesh.radial_distance(i) <= R1));
    let observed_v = |r_lo: f64, r_hi: f64| -> (f64, f64) {
        let vals: Vec<f64> = (0..mesh.len())
            .filter(|&i| mesh.radial_distance(i) > r_lo && mesh.radial_distance(i) <= r_hi)
            .map(|i| report.q_final[i] + 2.0 * lambda * report.p_final[i])
            .collect();
        (vals.iter().cloned().fold(f64::INFINITY, f64::min), vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let (lo1, hi1) = observed_v(R1, R2);
    let (lo2, hi2) = observed_v(R2, RADIUS);
    let v_tol = 1e-12;
    let lo = LAMBDA_SQUARED * (1.0 - BAND);
    let hi = LAMBDA_SQUARED * (1.0 + BAND);
    let certified = run.certificate.as_ref().is_some_and(|c| c.passed);
    let checks = vec![
        Check {
            name: "lambda^2 band",
            expected: format!("[{lo:.3}, {hi:.3}]"),
            observed: format!("{l2:.6}"),
            passed: (lo..=hi).contains(&l2),
        },
        Check {
            name: "fixed-point and Schwarz certificate",
            expected: "passed".into(),
            observed: if certified { "passed".into() } else { "failed".into() },
            passed: certified,
        },
        Check {
            name: "optimum equals the fixed annuli",
            expected: "0".into(),
            observed: format!(
                "{:.3e}",
                l1_distance(&mesh, &report.p_final, &p_hat)? + l1_distance(&mesh, &report.q_final, &q_hat)?
            ),
            passed: *report.p_final == *p_hat && *report.q_final == *q_hat,
        },
        Check {
            name: "V < lambda^2 exactly on r <= r1",
            expected: format!("confined measure {:.6}", std::f64::consts::PI * R1 * R1),
            observed: format!("confined measure {:.6}", conf.confined_measure),
            passed: confined_ok,
        },
        Check {
            name: "V on (r1, r2]",
            expected: format!("{H_Q}"),
            observed: format!("[{lo1}, {hi1}]"),
            passed: (lo1 - H_Q).abs() <= v_tol && (hi1 - H_Q).abs() <= v_tol,
        },
        Check {
            name: "V on (r2, R]",
            expected: format!("{:.10}", H_Q + 2.0 * lambda * H_P),
            observed: format!("[{lo2:.10}, {hi2:.10}]"),
            passed: [lo2, hi2].iter().all(|v| (v - (H_Q + 2.0 * lambda * H_P)).abs() <= v_tol),
        },
    ];
    write_json(&args.out_dir.join("reproduce.json"), &checks)?;
    println!("{:<40} {:>28} {:>28}", "check", "expected", "observed");
    for c in &checks {
        println!(
            "{:<40} {:>28} {:>28}  {}",
            c.name,
            c.expected,
            c.observed,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    println!("elapsed        = {:.2?}", started.elapsed());
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_ASSERTION })
}

/// Field CSV used by `--start csv:DIR`, kept here so tests can build inputs.
pub fn write_start_fields(mesh: &Mesh, p: &Field, q: &Field, dir: &Path) -> Result<()> {
    write_field_csv(mesh, p, &dir.join("p_final.csv"))?;
    write_field_csv(mesh, q, &dir.join("q_final.csv"))
}
