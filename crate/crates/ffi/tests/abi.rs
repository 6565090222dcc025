use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use qdopt_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qd_last_error_message()) }.to_string_lossy().into_owned()
}

fn disk(n: usize) -> *mut QdMesh {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { qd_mesh_disk_radial(2.4, n, &mut mesh) }, QdStatus::Ok);
    mesh
}

#[test]
fn mesh_lifecycle_and_accessors() {
    unsafe {
        let mesh = disk(64);
        assert_eq!(qd_mesh_len(mesh), 64);
        let mut m = vec![0.0; 64];
        assert_eq!(qd_mesh_measures(mesh, m.as_mut_ptr(), m.len()), QdStatus::Ok);
        let area: f64 = m.iter().sum();
        assert!((area - std::f64::consts::PI * 2.4 * 2.4).abs() < 1e-12);
        let mut short = vec![0.0; 10];
        assert_eq!(qd_mesh_radial_distance(mesh, short.as_mut_ptr(), 10), QdStatus::BufferTooSmall);
        qd_mesh_free(mesh);

        let mut polar = ptr::null_mut();
        assert_eq!(qd_mesh_disk_polar(1.0, 16, 8, &mut polar), QdStatus::Ok);
        assert_eq!(qd_mesh_len(polar), 128);
        qd_mesh_free(polar);
        qd_mesh_free(ptr::null_mut());
        assert_eq!(qd_mesh_len(ptr::null()), 0);
    }
}

#[test]
fn invalid_arguments_set_the_message() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(qd_mesh_rectangle(-1.0, 1.0, 8, 8, &mut mesh), QdStatus::InvalidArgument);
        assert!(mesh.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(qd_mesh_disk_radial(1.0, 16, ptr::null_mut()), QdStatus::NullPointer);
        assert!(last_error().contains("null"));
    }
}

#[test]
fn solve_fixed_annuli() {
    unsafe {
        let n = 512;
        let mesh = disk(n);
        let mut r = vec![0.0; n];
        qd_mesh_radial_distance(mesh, r.as_mut_ptr(), n);
        let p: Vec<f64> = r.iter().map(|&r| if r > 2.26 { 0.27 } else { 0.0 }).collect();
        let q: Vec<f64> = r.iter().map(|&r| if r > 2.13 { 2.13 } else { 0.0 }).collect();
        let mut lambda = 0.0;
        let mut u = vec![0.0; n];
        let st = qd_solve(mesh, p.as_ptr(), q.as_ptr(), n, 0.4441, &mut lambda, u.as_mut_ptr());
        assert_eq!(st, QdStatus::Ok, "{}", last_error());
        assert!((lambda * lambda - 0.4564).abs() < 2e-3, "{lambda}");
        assert!(u.iter().all(|&v| v > 0.0));
        let st = qd_solve(mesh, p.as_ptr(), q.as_ptr(), n, 0.4441, &mut lambda, ptr::null_mut());
        assert_eq!(st, QdStatus::Ok);

        let zero = vec![0.0; n];
        let st = qd_solve(mesh, zero.as_ptr(), zero.as_ptr(), n - 1, 0.4441, &mut lambda, ptr::null_mut());
        assert_eq!(st, QdStatus::LengthMismatch);
        qd_mesh_free(mesh);
    }
}

#[test]
fn optimize_and_read_report() {
    unsafe {
        let n = 256;
        let mesh = disk(n);
        let (pv, pm) = ([0.27], [2.0496]);
        let (qv, qm) = ([2.13], [3.8425]);
        let (mut p_ok, mut q_ok) = (false, false);
        let st = qd_check_admissibility(mesh, pv.as_ptr(), pm.as_ptr(), 1, qv.as_ptr(), qm.as_ptr(), 1, 0.4441, &mut p_ok, &mut q_ok);
        assert_eq!(st, QdStatus::Ok);
        assert!(p_ok && q_ok);

        let mut report = ptr::null_mut();
        let st = qd_optimize(
            mesh, pv.as_ptr(), pm.as_ptr(), 1, qv.as_ptr(), qm.as_ptr(), 1, 0.4441, 100, 1e-10,
            QdStart::Random, 3, &mut report,
        );
        assert_eq!(st, QdStatus::Ok, "{}", last_error());
        assert!(qd_report_converged(report));
        assert!(qd_report_monotone(report));
        let k = qd_report_history_len(report);
        assert_eq!(k, qd_report_iterations(report) + 1);
        let mut hist = vec![0.0; k];
        assert_eq!(qd_report_history(report, hist.as_mut_ptr(), k), QdStatus::Ok);
        assert_eq!(*hist.last().unwrap(), qd_report_lambda(report));
        let mut q = vec![0.0; n];
        assert_eq!(qd_report_q(report, q.as_mut_ptr(), n), QdStatus::Ok);
        // optimum pushes q to the rim
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
        let mut p = vec![0.0; n];
        let mut u = vec![0.0; n];
        assert_eq!(qd_report_p(report, p.as_mut_ptr(), n), QdStatus::Ok);
        assert_eq!(qd_report_u(report, u.as_mut_ptr(), n), QdStatus::Ok);
        qd_report_free(report);
        assert!(qd_report_lambda(ptr::null()).is_nan());
        qd_mesh_free(mesh);
    }
}

#[test]
fn bessel_passthrough() {
    assert_eq!(qd_bessel_j0(0.0), 1.0);
    assert!(qd_bessel_j0(2.404_825_557_695_773).abs() < 1e-14);
}

#[test]
fn header_is_valid_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qdopt.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["qd_mesh_disk_radial", "qd_optimize", "qd_report_free", "qd_last_error_message", "QD_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => panic!("{compiler} not available: {e}"),
        }
    }
}
