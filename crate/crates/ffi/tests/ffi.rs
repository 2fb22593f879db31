use difflab_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

const CONFIG: &str = r#"{
  "experiment": "estimate",
  "delta": 0.125,
  "truth": {"type": "bumps", "base": 1.0, "bumps": [{"center": [0.5], "radius": 0.125, "amplitude": 0.5}]},
  "estimator": {"wavelet_order": 4, "level": {"rule": "fixed", "j": 7}}
}"#;

fn last_error() -> String {
    let p = dl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn simulate_estimate_round_trip() {
    let cfg = CString::new(CONFIG).unwrap();
    unsafe {
        let mut obs = ptr::null_mut();
        assert_eq!(dl_simulate(cfg.as_ptr(), 4096, 7, &mut obs), DlStatus::Ok);
        assert_eq!(dl_observations_len(obs), 4096);
        assert_eq!(dl_observations_dim(obs), 1);
        let mut pts = vec![0.0; 4097];
        assert_eq!(dl_observations_copy(obs, pts.as_mut_ptr(), pts.len()), DlStatus::Ok);
        assert!(pts.iter().all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(dl_observations_copy(obs, pts.as_mut_ptr(), 10), DlStatus::InvalidArgument);

        // Rewrapping the copied points gives the same estimate.
        let mut again = ptr::null_mut();
        let d = 4096f64.powf(-0.6);
        assert_eq!(dl_observations_new(1, d, pts.as_ptr(), 4097, &mut again), DlStatus::Ok);

        let mut est = ptr::null_mut();
        let mut est2 = ptr::null_mut();
        assert_eq!(dl_estimate(cfg.as_ptr(), obs, &mut est), DlStatus::Ok);
        assert_eq!(dl_estimate(cfg.as_ptr(), again, &mut est2), DlStatus::Ok);
        let (mut j0, mut j, mut m) = (0u32, 0u32, 0usize);
        assert_eq!(dl_estimate_info(est, &mut j0, &mut j, &mut m), DlStatus::Ok);
        assert_eq!((j0, j), (7, 7));
        assert!(m > 0);
        for x in [0.3, 0.5, 0.6] {
            let (mut a, mut b) = (0.0, 0.0);
            assert_eq!(dl_estimate_value(est, &x, 1, 1, &mut a), DlStatus::Ok);
            assert_eq!(dl_estimate_value(est2, &x, 1, 1, &mut b), DlStatus::Ok);
            assert_eq!(a, b);
            assert!(a >= 0.0);
        }
        let xy = [0.5, 0.5];
        let mut v = 0.0;
        assert_eq!(dl_estimate_value(est, xy.as_ptr(), 2, 0, &mut v), DlStatus::InvalidArgument);
        dl_estimate_free(est);
        dl_estimate_free(est2);
        dl_observations_free(obs);
        dl_observations_free(again);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let bad = CString::new("{\"experiment\": \"estimate\", \"delta\": -1}").unwrap();
        let mut obs = ptr::null_mut();
        assert_eq!(dl_simulate(bad.as_ptr(), 10, 0, &mut obs), DlStatus::InvalidArgument);
        assert!(obs.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(dl_simulate(ptr::null(), 10, 0, &mut obs), DlStatus::NullPointer);
        assert!(last_error().contains("config_json"));
        let junk = CString::new("not json").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(dl_field_from_json(junk.as_ptr(), &mut f), DlStatus::InvalidArgument);
        dl_field_free(ptr::null_mut());
        dl_observations_free(ptr::null_mut());
        dl_estimate_free(ptr::null_mut());
    }
}

#[test]
fn log_q_and_rates() {
    let spec = CString::new(r#"{"type":"constant","value":1.0}"#).unwrap();
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(dl_field_from_json(spec.as_ptr(), &mut f), DlStatus::Ok);
        let x = [0.5];
        let mut v = 0.0;
        assert_eq!(dl_field_value(f, x.as_ptr(), 1, &mut v), DlStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(dl_log_q(f, 0.01, x.as_ptr(), x.as_ptr(), 1, &mut v), DlStatus::Ok);
        assert!((v - 1.037_073).abs() < 1e-6);
        assert_eq!(dl_log_q(f, 0.0, x.as_ptr(), x.as_ptr(), 1, &mut v), DlStatus::InvalidArgument);
        dl_field_free(f);
        let mut r = DlRates::default();
        assert_eq!(dl_ratecalc(1, 0.6, 7.0, 1e4, &mut r), DlStatus::Ok);
        assert_eq!(r.alpha_d, 4);
        assert!((r.s_star - 7.0).abs() < 1e-9);
        assert!((r.d_interval - 1e4f64.powf(-0.6)).abs() < 1e-15);
        assert_eq!(dl_ratecalc(12, 0.6, 7.0, 1e4, &mut r), DlStatus::Ok);
        assert_eq!(r.alpha_d, 6);
    }
    let v = unsafe { CStr::from_ptr(dl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a small C program against the generated header and static library.
#[test]
fn c_program_links_against_header() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let profile_dir = tmp.parent().unwrap().join(if cfg!(debug_assertions) { "debug" } else { "release" });
    let lib = profile_dir.join("libdifflab_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let exe = tmp.join("difflab_smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = status else {
        eprintln!("skipping: no C compiler");
        return;
    };
    assert!(status.success(), "C compilation failed");
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
