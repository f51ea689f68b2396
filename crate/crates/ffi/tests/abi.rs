use std::ffi::CStr;
use std::ptr;

use photon_moments_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        pm_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn statistics_round_trip() {
    unsafe {
        let probs = [0.2, 0.5, 0.3];
        let mut s = ptr::null_mut();
        assert_eq!(pm_statistics_new(probs.as_ptr(), 3, &mut s), PmStatus::Ok);
        assert_eq!(pm_statistics_len(s), 3);
        let mut back = [0.0; 3];
        assert_eq!(pm_statistics_probs(s, back.as_mut_ptr(), 3), PmStatus::Ok);
        assert_eq!(back, probs);
        assert_eq!(pm_statistics_probs(s, back.as_mut_ptr(), 2), PmStatus::BufferTooSmall);

        let mut mean = 0.0;
        assert_eq!(pm_statistics_mean(s, &mut mean), PmStatus::Ok);
        assert!((mean - 1.1).abs() < 1e-15);

        let mut raw = [0.0; 3];
        assert_eq!(pm_factorial_moments(s, 2, raw.as_mut_ptr(), 3), PmStatus::Ok);
        assert!((raw[2] - 0.6).abs() < 1e-15);

        let mut g = [0.0; 1];
        assert_eq!(pm_normalized_moments(s, 2, &mut mean, g.as_mut_ptr(), 1), PmStatus::Ok);
        let mut rec = [0.0; 3];
        let mut physical = false;
        assert_eq!(
            pm_reconstruct(mean, g.as_ptr(), 1, rec.as_mut_ptr(), 3, &mut physical),
            PmStatus::Ok
        );
        assert!(physical);
        for (a, b) in rec.iter().zip(probs) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut m = 0.0;
        assert_eq!(pm_mgf(s, 2.0, &mut m), PmStatus::Ok);
        assert!((m - 0.0).abs() < 1e-15);
        pm_statistics_free(s);
    }
}

#[test]
fn loss_preserves_normalized_moments() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(pm_statistics_heralded_pdc(0.3, 0.2, 30, &mut s), PmStatus::Ok);
        let mut lossy = ptr::null_mut();
        assert_eq!(pm_apply_loss(s, 0.4, &mut lossy), PmStatus::Ok);
        let (mut m0, mut m1) = (0.0, 0.0);
        let (mut g0, mut g1) = ([0.0; 3], [0.0; 3]);
        pm_normalized_moments(s, 4, &mut m0, g0.as_mut_ptr(), 3);
        pm_normalized_moments(lossy, 4, &mut m1, g1.as_mut_ptr(), 3);
        assert!((m1 - 0.4 * m0).abs() < 1e-12);
        for (a, b) in g0.iter().zip(g1) {
            assert!((a - b).abs() < 1e-10);
        }
        pm_statistics_free(lossy);
        pm_statistics_free(s);
    }
}

#[test]
fn model_matches_closed_form() {
    unsafe {
        let mut fock = ptr::null_mut();
        assert_eq!(pm_statistics_fock(1, 1, &mut fock), PmStatus::Ok);
        let mut model = ptr::null_mut();
        assert_eq!(pm_model_new(fock, 1.0, 2.0, &mut model), PmStatus::Ok);
        let mut g2 = 0.0;
        assert_eq!(pm_model_g_eff(model, 2, &mut g2), PmStatus::Ok);
        assert!((g2 - 4.0 / 3.0).abs() < 1e-10);
        assert_eq!(pm_g_ideal(2, 2.0), 4.0 / 3.0);
        let mut mean = 0.0;
        pm_model_mean_eff(model, &mut mean);
        assert!((mean - 3.0).abs() < 1e-12);

        let mut exact = ptr::null_mut();
        assert_eq!(pm_model_exact_statistics(model, &mut exact), PmStatus::Ok);
        let mut ghat = 0.0;
        assert_eq!(pm_tmd_estimate_g(exact, 8, 0.01, 0.0, 2, &mut ghat), PmStatus::Ok);
        assert!((ghat - 4.0 / 3.0).abs() < 0.01 * 4.0 / 3.0);

        let mut displaced = ptr::null_mut();
        assert_eq!(pm_displace(fock, 2.0, 60, &mut displaced), PmStatus::Ok);
        let mut d_mean = 0.0;
        pm_statistics_mean(displaced, &mut d_mean);
        assert!((d_mean - 3.0).abs() < 1e-9);

        let (mut range, mut ceiling) = (0.0, true);
        assert_eq!(pm_reliable_range(model, 4, &mut range, &mut ceiling), PmStatus::Ok);
        assert!(range > 1.0 && !ceiling);

        pm_statistics_free(displaced);
        pm_statistics_free(exact);
        pm_model_free(model);
        pm_statistics_free(fock);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(
            pm_statistics_new([0.5, 0.2].as_ptr(), 2, &mut s),
            PmStatus::InvalidStatistics
        );
        assert!(s.is_null());
        assert!(last_error().contains("invalid photon statistics"), "{}", last_error());

        assert_eq!(pm_statistics_fock(3, 2, &mut s), PmStatus::Truncation);
        assert_eq!(pm_statistics_new(ptr::null(), 2, &mut s), PmStatus::NullPointer);
        assert_eq!(pm_statistics_mean(ptr::null(), &mut 0.0), PmStatus::NullPointer);
        assert_eq!(pm_statistics_coherent(-1.0, 10, &mut s), PmStatus::InvalidArgument);

        let mut vac = ptr::null_mut();
        pm_statistics_fock(0, 0, &mut vac);
        let mut g = [0.0; 2];
        assert_eq!(
            pm_normalized_moments(vac, 3, &mut 0.0, g.as_mut_ptr(), 2),
            PmStatus::ZeroMean
        );
        assert_eq!(pm_statistics_len(ptr::null()), 0);
        pm_statistics_free(vac);
        pm_statistics_free(ptr::null_mut());

        let (mut bound, mut unbounded) = (0.0, false);
        assert_eq!(pm_truncation_bound(1.2, 0.0, &mut bound, &mut unbounded), PmStatus::Ok);
        assert!(unbounded && bound.is_infinite());
        assert_eq!(pm_truncation_bound(0.7, 0.5, &mut bound, &mut unbounded), PmStatus::Ok);
        assert!((bound - 1.4).abs() < 1e-15 && !unbounded);

        let mut k = PmKlyshko::default();
        assert_eq!(pm_klyshko(0.0, 0.3, 0.1, 1000, 1, &mut k), PmStatus::NoHeralds);
        assert_eq!(pm_klyshko(0.3, 0.3, 0.5, 200_000, 1, &mut k), PmStatus::Ok);
        assert!((k.efficiency - 0.3).abs() < 4.0 * k.std_error);
        assert_eq!(last_error(), "");
    }
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/photon_moments.h");
    for name in [
        "PHOTON_MOMENTS_H",
        "typedef struct PmStatistics PmStatistics;",
        "typedef struct PmModel PmModel;",
        "PM_STATUS_BUFFER_TOO_SMALL",
        "pm_last_error_message",
        "pm_statistics_new",
        "pm_reconstruct",
        "pm_model_g_eff",
        "pm_klyshko",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
