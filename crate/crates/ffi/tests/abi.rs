use std::ffi::{CStr, CString};
use std::ptr;

use qpsolver_ffi::*;

fn c(re: f64, im: f64) -> QpComplex {
    QpComplex { re, im }
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let needed = unsafe { qp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    if needed == 0 {
        return String::new();
    }
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn lattice(n_modes: usize, d: usize, n: usize, p: &[f64]) -> *mut QpLattice {
    let mut lat = ptr::null_mut();
    let st = unsafe { qp_lattice_new(n_modes, d, n, p.as_ptr(), &mut lat) };
    assert_eq!(st, QpStatus::Ok, "{}", last_error());
    lat
}

#[test]
fn lattice_round_trip() {
    let lat = lattice(4, 2, 2, &[1.0, 0.0, 0.0, 1.0]);
    unsafe {
        assert_eq!(qp_lattice_size(lat), 16);
        assert_eq!(qp_lattice_torus_dim(lat), 2);
        for i in 0..16 {
            let mut k = [0i64; 2];
            assert_eq!(qp_lattice_vector_to_tensor(lat, i, k.as_mut_ptr(), 2), QpStatus::Ok);
            let mut back = usize::MAX;
            assert_eq!(qp_lattice_tensor_to_vector(lat, k.as_ptr(), 2, &mut back), QpStatus::Ok);
            assert_eq!(back, i);
        }
        let mut idx = 0;
        let k = [-2i64, 1];
        qp_lattice_tensor_to_vector(lat, k.as_ptr(), 2, &mut idx);
        assert_eq!(idx, 2 * 4 + 1);
        qp_lattice_free(lat);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut lat = ptr::null_mut();
        let rank_deficient = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(
            qp_lattice_new(4, 2, 2, rank_deficient.as_ptr(), &mut lat),
            QpStatus::InvalidLattice
        );
        assert!(lat.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(qp_lattice_new(4, 1, 1, ptr::null(), &mut lat), QpStatus::NullPointer);
        assert_eq!(
            qp_lattice_new(3, 1, 1, [1.0].as_ptr(), &mut lat),
            QpStatus::InvalidLattice
        );

        let lat = lattice(4, 1, 1, &[1.0]);
        let mut idx = 0;
        assert_eq!(
            qp_lattice_tensor_to_vector(lat, [2i64].as_ptr(), 1, &mut idx),
            QpStatus::InvalidArgument
        );
        assert!(last_error().contains("[2]"), "{}", last_error());
        assert_eq!(
            qp_lattice_vector_to_tensor(lat, 0, [0i64; 2].as_mut_ptr(), 2),
            QpStatus::DimensionMismatch
        );
        assert_eq!(qp_lattice_size(ptr::null()), 0);

        // A successful call clears the message.
        assert_eq!(
            qp_lattice_tensor_to_vector(lat, [1i64].as_ptr(), 1, &mut idx),
            QpStatus::Ok
        );
        assert_eq!(qp_last_error_message(ptr::null_mut(), 0), 0);

        // Modes colliding mod N.
        let mut op = ptr::null_mut();
        let ks = [1i64, -3];
        let amps = [c(1.0, 0.0), c(1.0, 0.0)];
        assert_eq!(
            qp_operator_new(lat, ks.as_ptr(), amps.as_ptr(), 2, QpConvolution::Truncated, &mut op),
            QpStatus::InvalidArgument
        );
        qp_lattice_free(lat);
    }
}

#[test]
fn operator_apply_matches_hand_computation() {
    // alpha = 1 on P = [1]: Q is diagonal with entries k^2.
    let lat = lattice(8, 1, 1, &[1.0]);
    unsafe {
        let mut op = ptr::null_mut();
        let st = qp_operator_new(
            lat,
            [0i64].as_ptr(),
            [c(1.0, 0.0)].as_ptr(),
            1,
            QpConvolution::Wrapped,
            &mut op,
        );
        assert_eq!(st, QpStatus::Ok);
        let v: Vec<QpComplex> = (0..8).map(|i| c(1.0, i as f64)).collect();
        let mut out = vec![QpComplex::default(); 8];
        assert_eq!(qp_operator_apply(op, v.as_ptr(), out.as_mut_ptr(), 8), QpStatus::Ok);
        for (i, o) in out.iter().enumerate() {
            let mut k = [0i64];
            qp_lattice_vector_to_tensor(lat, i, k.as_mut_ptr(), 1);
            let w = (k[0] * k[0]) as f64;
            assert_eq!(*o, c(w, w * i as f64));
        }
        assert_eq!(
            qp_operator_apply(op, v.as_ptr(), out.as_mut_ptr(), 7),
            QpStatus::DimensionMismatch
        );
        qp_operator_free(op);
        qp_lattice_free(lat);
    }
}

#[test]
fn dft_round_trip() {
    let lat = lattice(4, 2, 2, &[1.0, 0.0, 0.0, 1.0]);
    unsafe {
        let values: Vec<QpComplex> = (0..16).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let mut coeffs = vec![QpComplex::default(); 16];
        let mut back = vec![QpComplex::default(); 16];
        assert_eq!(
            qp_forward_dft(lat, values.as_ptr(), coeffs.as_mut_ptr(), 16),
            QpStatus::Ok
        );
        assert_eq!(
            qp_inverse_dft(lat, coeffs.as_ptr(), back.as_mut_ptr(), 16),
            QpStatus::Ok
        );
        for (a, b) in values.iter().zip(&back) {
            assert!((a.re - b.re).abs() < 1e-14 && (a.im - b.im).abs() < 1e-14);
        }
        // Constant field has only the zero mode.
        let ones = vec![c(1.0, 0.0); 16];
        qp_forward_dft(lat, ones.as_ptr(), coeffs.as_mut_ptr(), 16);
        let mut zero = 0usize;
        qp_lattice_tensor_to_vector(lat, [0i64, 0].as_ptr(), 2, &mut zero);
        for (i, x) in coeffs.iter().enumerate() {
            let want = if i == zero { 1.0 } else { 0.0 };
            assert!((x.re - want).abs() < 1e-15 && x.im.abs() < 1e-15);
        }
        qp_lattice_free(lat);
    }
}

const CONFIG: &str = r#"{
  "d": 1, "n": 2,
  "projection": [["2*pi", "2*sqrt(5)*pi"]],
  "alpha": [[[0, 0], 6], [[1, 0], 0.5], [[-1, 0], 0.5], [[0, 1], 0.5], [[0, -1], 0.5]],
  "exact_solution": { "modes": [[[1, 0], 1], [[0, 1], 1]], "carrier": { "im": "-2*pi" } },
  "N_list": [8], "tau_list": [1e-5, 5e-6, 2.5e-6], "T": 1e-4
}"#;

#[test]
fn run_sweep_returns_csv() {
    let cfg = CString::new(CONFIG).unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            qp_run_sweep(cfg.as_ptr(), QpSweep::Time, &mut out),
            QpStatus::Ok,
            "{}",
            last_error()
        );
        let text = CStr::from_ptr(out).to_str().unwrap().to_owned();
        qp_string_free(out);
        assert!(text.starts_with("tau,err,kappa,wall_seconds,iters\n"));
        assert_eq!(text.lines().count(), 4);

        let mut out = ptr::null_mut();
        assert_eq!(
            qp_run_sweep(cfg.as_ptr(), QpSweep::Space, &mut out),
            QpStatus::ConfigError
        );
        assert!(last_error().contains("tau_list"));
        assert!(out.is_null());

        let bad = CString::new("{").unwrap();
        assert_eq!(
            qp_run_sweep(bad.as_ptr(), QpSweep::Time, &mut out),
            QpStatus::ConfigError
        );
        assert_eq!(
            qp_run_sweep(ptr::null(), QpSweep::Time, &mut out),
            QpStatus::NullPointer
        );
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(qp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
