use std::ffi::CStr;
use std::path::Path;
use std::ptr;

use fastchain_ffi::*;

fn last_error() -> String {
    let p = fc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn hamiltonian_round_trip() {
    unsafe {
        let mut pi = ptr::null_mut();
        assert_eq!(fc_pi_new([0.25; 4].as_ptr(), 4, &mut pi), FcStatus::Ok);
        let mut l = ptr::null_mut();
        let cycle = [0usize, 1, 2, 3];
        assert_eq!(fc_cycle_generator(pi, cycle.as_ptr(), 4, &mut l), FcStatus::Ok);
        assert_eq!(fc_generator_dim(l), 4);

        let mut f = 0.0;
        assert_eq!(fc_inverse_speed(l, pi, &mut f), FcStatus::Ok);
        assert!((f - 1.5).abs() < 1e-12);
        let mut fs = 0.0;
        assert_eq!(fc_eigentime_spectral(l, &mut fs), FcStatus::Ok);
        assert!((fs - 1.5).abs() < 1e-10);

        let mut rates = [0.0; 16];
        assert_eq!(fc_generator_rates(l, rates.as_mut_ptr(), 16), FcStatus::Ok);
        assert_eq!(rates[1], 1.0);
        assert_eq!(rates[0], -1.0);
        let mut e = [0.0; 16];
        assert_eq!(fc_expected_hitting_times(l, pi, e.as_mut_ptr(), 16), FcStatus::Ok);
        assert!((e[1] - 1.0).abs() < 1e-12);
        assert!((e[4] - 3.0).abs() < 1e-12);
        assert_eq!(fc_expected_hitting_times(l, pi, e.as_mut_ptr(), 15), FcStatus::InvalidInput);

        let mut l2 = ptr::null_mut();
        assert_eq!(fc_generator_new(4, rates.as_ptr(), &mut l2), FcStatus::Ok);
        let mut pi2 = ptr::null_mut();
        assert_eq!(fc_invariant_measure(l2, &mut pi2), FcStatus::Ok);
        let mut f2 = 0.0;
        assert_eq!(fc_inverse_speed(l2, pi2, &mut f2), FcStatus::Ok);
        assert!((f2 - 1.5).abs() < 1e-12);

        fc_pi_free(pi2);
        fc_generator_free(l2);
        fc_generator_free(l);
        fc_pi_free(pi);
    }
}

#[test]
fn optimize_and_dp() {
    unsafe {
        let edges = [0usize, 1, 1, 0, 1, 2, 2, 1];
        let mut g = ptr::null_mut();
        assert_eq!(fc_graph_new(3, edges.as_ptr(), 4, &mut g), FcStatus::Ok);
        let mut pi = ptr::null_mut();
        assert_eq!(fc_pi_new([1.0 / 3.0; 3].as_ptr(), 3, &mut pi), FcStatus::Ok);
        let mut f = 0.0;
        let mut l = ptr::null_mut();
        assert_eq!(fc_optimize(g, pi, 0, &mut f, &mut l), FcStatus::Ok);
        assert!((f - 16.0 / 9.0).abs() < 1e-6);
        assert_eq!(fc_generator_dim(l), 3);
        let (mut fc, mut p) = (0.0, 0.0);
        assert_eq!(fc_s2_closed_form([0.2, 0.3, 0.5].as_ptr(), &mut fc, &mut p), FcStatus::Ok);
        assert!((fc - 1.62).abs() < 1e-12 && (p - 4.0 / 9.0).abs() < 1e-12);

        let mut v = 0.0;
        assert_eq!(fc_dp_discrete_value(g, 0, false, &mut v), FcStatus::Ok);
        assert_eq!(v, 3.0);
        assert_eq!(fc_dp_discrete_value(g, 7, false, &mut v), FcStatus::InvalidInput);

        fc_generator_free(l);
        fc_pi_free(pi);
        fc_graph_free(g);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut pi = ptr::null_mut();
        assert_eq!(fc_pi_new([0.5, 0.6].as_ptr(), 2, &mut pi), FcStatus::InvalidInput);
        assert!(pi.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(fc_pi_new(ptr::null(), 2, &mut pi), FcStatus::NullPointer);
        let mut out = 0.0;
        assert_eq!(fc_inverse_speed(ptr::null(), ptr::null(), &mut out), FcStatus::NullPointer);
        let mut g = ptr::null_mut();
        assert_eq!(fc_graph_new(2, [0usize, 5].as_ptr(), 1, &mut g), FcStatus::InvalidInput);
        let (mut f, mut p) = (0.0, 0.0);
        assert_eq!(fc_s2_closed_form([0.2, 0.0, 0.8].as_ptr(), &mut f, &mut p), FcStatus::InvalidInput);
        fc_graph_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fastchain.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["fc_graph_new", "fc_optimize", "fc_last_error_message", "FC_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler available, skipping syntax check");
        return;
    };
    assert!(status.success());
}
