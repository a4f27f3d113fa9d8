use gamow_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_error() -> String {
    let p = gamow_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn reference_pipeline_through_the_c_abi() {
    unsafe {
        let mut pot = ptr::null_mut();
        assert_eq!(gamow_potential_delta_shell(6.0, 1.0, &mut pot), GamowStatus::Ok);
        let mut psi = ptr::null_mut();
        assert_eq!(gamow_initial_box_mode(1, 1.0, &mut psi), GamowStatus::Ok);
        let mut poles = ptr::null_mut();
        assert_eq!(gamow_poles_locate(pot, 130.0, -4.0, 1e-12, &mut poles), GamowStatus::Ok);
        let mut len = 0usize;
        assert_eq!(gamow_poles_len(poles, &mut len), GamowStatus::Ok);
        assert_eq!(len, 41);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(gamow_poles_get(poles, 1, &mut re, &mut im), GamowStatus::Ok);
        assert!((re - 2.7579383212949247).abs() < 1e-10 && (im + 0.1404327324662333).abs() < 1e-10);
        assert_eq!(gamow_poles_get(poles, -1, &mut re, &mut im), GamowStatus::Ok);
        assert!(re < 0.0 && im < 0.0);

        let mut exp = ptr::null_mut();
        assert_eq!(gamow_expansion_build(poles, psi, 20, false, &mut exp), GamowStatus::Ok);
        assert_eq!(gamow_expansion_coefficient(exp, 1, &mut re, &mut im), GamowStatus::Ok);
        assert!((re - 0.99591).abs() < 1e-4);
        let times = [0.0, 0.5, 1.0];
        let mut p = [0.0; 3];
        assert_eq!(gamow_expansion_nonescape(exp, times.as_ptr(), 3, 20, GamowOverlapMode::Closed, p.as_mut_ptr()), GamowStatus::Ok);
        assert!((p[0] - 1.0).abs() < 1e-2 && p[1] < p[0] && p[2] < p[1]);
        let (mut d_sum, mut d_int) = (0.0, 0.0);
        assert_eq!(gamow_expansion_tail_t1(exp, 5, &mut d_sum, &mut d_int), GamowStatus::Ok);
        assert!(d_sum > 0.0 && ((d_sum - d_int) / d_int).abs() < 1e-6);

        gamow_expansion_free(exp);
        gamow_poles_free(poles);
        gamow_initial_free(psi);
        gamow_potential_free(pot);
    }
}

#[test]
fn oracle_series_round_trip() {
    unsafe {
        let mut pot = ptr::null_mut();
        assert_eq!(gamow_potential_delta_shell(6.0, 1.0, &mut pot), GamowStatus::Ok);
        let mut psi = ptr::null_mut();
        assert_eq!(gamow_initial_box_mode(1, 1.0, &mut psi), GamowStatus::Ok);
        let grid = GamowGridSpec {
            box_length: 10.0,
            intervals_per_range: 200,
            time_step: 1e-3,
            final_time: 0.5,
            leak_threshold: 1e-8,
            max_wavenumber: 20.0,
            record_every: 100,
            absorber_width: 0.0,
            absorber_strength: 0.0,
            energy_cutoff: 0.0,
            analysis_end: 0.0,
        };
        let mut series = ptr::null_mut();
        assert_eq!(gamow_oracle_evolve(pot, psi, &grid, &mut series), GamowStatus::Ok);
        let mut len = 0;
        assert_eq!(gamow_series_len(series, &mut len), GamowStatus::Ok);
        assert_eq!(len, 6);
        let (mut t, mut p) = (vec![0.0; len], vec![0.0; len]);
        assert_eq!(gamow_series_copy(series, t.as_mut_ptr(), p.as_mut_ptr(), len), GamowStatus::Ok);
        assert!((t[5] - 0.5).abs() < 1e-12 && p[5] < p[0]);
        assert_eq!(gamow_series_copy(series, t.as_mut_ptr(), ptr::null_mut(), 2), GamowStatus::InvalidArgument);
        let mut h = 0.0;
        assert_eq!(gamow_series_horizon(series, &mut h), GamowStatus::Ok);
        assert!(h > 0.0 && h < 0.5, "small box reaches its wall early, got {h}");
        gamow_series_free(series);

        let coarse = GamowGridSpec { intervals_per_range: 20, ..grid };
        let mut none = ptr::null_mut();
        assert_eq!(gamow_oracle_evolve(pot, psi, &coarse, &mut none), GamowStatus::InvalidGrid);
        assert!(none.is_null());
        assert!(last_error().contains("R/200"));
        gamow_initial_free(psi);
        gamow_potential_free(pot);
    }
}

#[test]
fn errors_and_null_pointers() {
    unsafe {
        let mut pot = ptr::null_mut();
        assert_eq!(gamow_potential_delta_shell(-1.0, 1.0, &mut pot), GamowStatus::InvalidPotential);
        assert!(last_error().contains("strength"));
        assert_eq!(gamow_potential_delta_shell(6.0, 1.0, ptr::null_mut()), GamowStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut len = 0;
        assert_eq!(gamow_poles_len(ptr::null(), &mut len), GamowStatus::NullPointer);
        // A successful call clears the message.
        assert_eq!(gamow_potential_delta_shell(6.0, 1.0, &mut pot), GamowStatus::Ok);
        assert!(gamow_last_error_message().is_null());
        let mut poles = ptr::null_mut();
        assert_eq!(gamow_poles_locate(pot, -1.0, -4.0, 1e-12, &mut poles), GamowStatus::InvalidArgument);
        let (lo, hi, v) = ([0.0, 0.5], [0.5, 1.0], [0.0, 30.0]);
        let mut well = ptr::null_mut();
        assert_eq!(gamow_potential_piecewise(lo.as_ptr(), hi.as_ptr(), v.as_ptr(), 2, &mut well), GamowStatus::Ok);
        gamow_potential_free(well);
        gamow_potential_free(pot);
        gamow_potential_free(ptr::null_mut());
        let v = CStr::from_ptr(gamow_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gamow.h")).unwrap();
    for name in [
        "GAMOW_H",
        "GAMOW_STATUS_OK",
        "typedef struct GamowPoleSet GamowPoleSet",
        "gamow_poles_locate",
        "gamow_expansion_nonescape",
        "gamow_oracle_evolve",
        "gamow_last_error_message",
        "GamowGridSpec",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
