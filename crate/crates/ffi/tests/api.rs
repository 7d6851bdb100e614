use std::ffi::CStr;
use std::ptr;

use mfmd_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mfmd_last_error()) }.to_string_lossy().into_owned()
}

fn case_model(label: u8, m: f64) -> *mut MfmdModel {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { mfmd_model_from_case(label as _, m, &mut model) }, MfmdStatus::Ok);
    assert!(!model.is_null());
    model
}

#[test]
fn model_queries_round_trip() {
    let model = case_model(b'E', 100.0);
    let (mut l0, mut l1) = (0.0, 0.0);
    assert_eq!(unsafe { mfmd_model_eigenvalues(model, 0.0, &mut l0, &mut l1) }, MfmdStatus::Ok);
    // at x = 0 the coupling reduces to c * delta = 0.1
    let quartic = 0.25 * 0.5f64.powi(4);
    assert!((l0 - (quartic - 0.1)).abs() < 1e-15 && (l1 - (quartic + 0.1)).abs() < 1e-15);

    let (mut v, mut g) = (0.0, 0.0);
    assert_eq!(unsafe { mfmd_model_mean_field(model, 0.7, &mut v, &mut g) }, MfmdStatus::Ok);
    let (mut a, mut b) = (0.0, 0.0);
    let h = 1e-5;
    unsafe {
        mfmd_model_mean_field(model, 0.7 + h, &mut a, &mut 0.0);
        mfmd_model_mean_field(model, 0.7 - h, &mut b, &mut 0.0);
    }
    assert!(((a - b) / (2.0 * h) - g).abs() < 1e-8);

    let mut q1 = 0.0;
    let status = unsafe {
        mfmd_model_diagnostics(model, -6.0, 6.0, 2400, &mut q1, ptr::null_mut(), ptr::null_mut(), ptr::null_mut())
    };
    assert_eq!(status, MfmdStatus::Ok);
    assert!((q1 - 0.1627).abs() < 1e-3, "{q1}");
    unsafe { mfmd_model_free(model) };
}

#[test]
fn invalid_input_maps_to_status_codes() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { mfmd_model_new(-1.0, 1.0, 0.1, 100.0, &mut model) }, MfmdStatus::InvalidArgument);
    assert!(model.is_null());
    assert!(last_error().contains("beta"));

    assert_eq!(unsafe { mfmd_model_from_case(b'Z' as _, 100.0, &mut model) }, MfmdStatus::InvalidArgument);
    assert_eq!(unsafe { mfmd_model_new(1.0, 1.0, 0.1, 100.0, ptr::null_mut()) }, MfmdStatus::NullPointer);
    assert!(last_error().contains("out_model"));
    assert_eq!(unsafe { mfmd_model_eigenvalues(ptr::null(), 0.0, &mut 0.0, &mut 0.0) }, MfmdStatus::NullPointer);

    // delta = 0 with c != 0 has a kink at x = 0
    let singular = {
        let mut m = ptr::null_mut();
        assert_eq!(unsafe { mfmd_model_new(1.0, 1.0, 0.0, 100.0, &mut m) }, MfmdStatus::Ok);
        m
    };
    let mut g = 0.0;
    assert_eq!(unsafe { mfmd_model_mean_field(singular, 0.0, &mut 0.0, &mut g) }, MfmdStatus::DomainError);

    // a domain that cuts off the Gibbs weight
    let model = case_model(b'D', 100.0);
    let mut e1 = 0.0;
    let status = unsafe {
        mfmd_model_diagnostics(model, -1.0, 1.0, 200, ptr::null_mut(), &mut e1, ptr::null_mut(), ptr::null_mut())
    };
    assert_eq!(status, MfmdStatus::DomainError);
    assert_eq!(e1, 0.0);

    let taus = [0.0, 0.05];
    let mut out = [0.0; 2];
    let status = unsafe {
        mfmd_classical_correlation(model, 7, 0, -6.0, 6.0, 10.0, 40, 0.005, taus.as_ptr(), 2, out.as_mut_ptr())
    };
    assert_eq!(status, MfmdStatus::InvalidArgument);
    unsafe {
        mfmd_model_free(model);
        mfmd_model_free(singular);
        mfmd_model_free(ptr::null_mut());
        mfmd_quantum_free(ptr::null_mut());
    }
}

#[test]
fn quantum_handle_matches_library() {
    let model = case_model(b'E', 20.0);
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { mfmd_quantum_new(model, -6.0, 6.0, 200, &mut q) }, MfmdStatus::Ok);
    let mut dim = 0;
    assert_eq!(unsafe { mfmd_quantum_dim(q, &mut dim) }, MfmdStatus::Ok);
    assert_eq!(dim, 402);

    let mut evs = [0.0; 5];
    assert_eq!(unsafe { mfmd_quantum_eigenvalues(q, evs.as_mut_ptr(), 5) }, MfmdStatus::Ok);
    assert!(evs.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(unsafe { mfmd_quantum_eigenvalues(q, evs.as_mut_ptr(), 1000) }, MfmdStatus::InvalidArgument);

    let mut rho = vec![0.0; 201];
    assert_eq!(unsafe { mfmd_quantum_density(q, rho.as_mut_ptr(), 201) }, MfmdStatus::Ok);
    let integral = mfmd::grid::simpson(&rho, 12.0 / 200.0);
    assert!((integral - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { mfmd_quantum_density(q, rho.as_mut_ptr(), 200) }, MfmdStatus::InvalidArgument);

    let taus = [0.0, 0.5, 1.0];
    let mut s = [0.0; 3];
    let status =
        unsafe { mfmd_quantum_correlation(q, MfmdObservable::Momentum as i32, taus.as_ptr(), 3, s.as_mut_ptr()) };
    assert_eq!(status, MfmdStatus::Ok);
    let ctx = mfmd::cli::CasePreset::by_label("E").unwrap().context(20.0).unwrap();
    let grid = mfmd::grid::SpatialGrid::new(-6.0, 6.0, 200).unwrap();
    let h = mfmd::quantum::build_hamiltonian(&grid, &ctx);
    let eig = mfmd::quantum::eigendecompose(&h).unwrap();
    let ops = mfmd::quantum::observable_matrices(&grid, &h).unwrap();
    let want =
        mfmd::quantum::correlation_qm(&eig, &ops, mfmd::quantum::Observable::Momentum, ctx.beta, 20.0, &taus).unwrap();
    assert_eq!(s.to_vec(), want.values);

    let bad = [0.5, 1.0];
    let status = unsafe { mfmd_quantum_correlation(q, 0, bad.as_ptr(), 2, s.as_mut_ptr()) };
    assert_eq!(status, MfmdStatus::InvalidArgument);
    unsafe {
        mfmd_quantum_free(q);
        mfmd_model_free(model);
    }
}

#[test]
fn classical_and_gibbs_entry_points() {
    let model = case_model(b'E', 100.0);
    let taus = [0.0, 0.5];
    let mut mf = [0.0; 2];
    let mut es = [0.0; 2];
    unsafe {
        let code = MfmdObservable::Momentum as i32;
        assert_eq!(
            mfmd_classical_correlation(model, MfmdDynamics::MeanField as i32, code, -6.0, 6.0, 8.0, 120, 0.005, taus.as_ptr(), 2, mf.as_mut_ptr()),
            MfmdStatus::Ok
        );
        assert_eq!(
            mfmd_classical_correlation(model, MfmdDynamics::ExcitedState as i32, code, -6.0, 6.0, 8.0, 120, 0.005, taus.as_ptr(), 2, es.as_mut_ptr()),
            MfmdStatus::Ok
        );
    }
    assert!((mf[0] - 1.0).abs() < 1e-8 && (mf[0] - es[0]).abs() < 1e-10);

    let (mut re, mut im, mut se) = ([0.0; 4], [0.0; 4], [0.0; 4]);
    let status = unsafe {
        mfmd_gibbs_correction(model, 0.3, 0.5, 4000, 32, 11, re.as_mut_ptr(), im.as_mut_ptr(), se.as_mut_ptr())
    };
    assert_eq!(status, MfmdStatus::Ok);
    assert!(se.iter().all(|s| *s > 0.0));
    assert!((re[1] - re[2]).abs() < 5.0 * se[1].max(se[2]));
    let status = unsafe {
        mfmd_gibbs_correction(model, 0.3, 0.5, 0, 32, 11, re.as_mut_ptr(), im.as_mut_ptr(), se.as_mut_ptr())
    };
    assert_eq!(status, MfmdStatus::InvalidArgument);
    unsafe { mfmd_model_free(model) };
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(mfmd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
