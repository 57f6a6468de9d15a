use mslab_ffi::*;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/ou_bench.toml")
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mslab_last_error()) }
        .to_string_lossy()
        .into_owned()
}

/// A cheap variant of the fixture: small invariant-measure sample, few replicas.
fn quick_config() -> *mut MslabConfig {
    let text = std::fs::read_to_string(fixture())
        .unwrap()
        .replace("sampler_n = 200000", "sampler_n = 20000")
        .replace("n_mc = 200", "n_mc = 16");
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { mslab_config_parse(text.as_ptr(), &mut cfg) };
    assert_eq!(s, MslabStatus::Ok, "{}", last_error());
    cfg
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(mslab_config_load(ptr::null(), &mut cfg), MslabStatus::NullPointer);
        assert!(cfg.is_null());
        let mut out = 0.0;
        assert_eq!(
            mslab_config_predicted_strong_slope(ptr::null(), &mut out),
            MslabStatus::NullPointer
        );
        assert!(last_error().contains("cfg"));
        mslab_config_free(ptr::null_mut());
        mslab_curve_free(ptr::null_mut());
        mslab_expr_free(ptr::null_mut());
    }
}

#[test]
fn invalid_configs_map_to_input_errors() {
    let bad = CString::new("[system]\nd1 = 1\n").unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { mslab_config_parse(bad.as_ptr(), &mut cfg) };
    assert_eq!(s, MslabStatus::InvalidInput);
    assert!(last_error().contains("config error"), "{}", last_error());

    let text = std::fs::read_to_string(fixture())
        .unwrap()
        .replace("b_exp = 0.0", "b_exp = 2.0");
    let text = CString::new(text).unwrap();
    let s = unsafe { mslab_config_parse(text.as_ptr(), &mut cfg) };
    assert_eq!(s, MslabStatus::InvalidInput);
    assert!(last_error().contains("standing assumption"), "{}", last_error());
}

#[test]
fn eps_list_is_validated() {
    let cfg = quick_config();
    unsafe {
        let up = [0.1, 0.2];
        assert_eq!(
            mslab_config_set_eps(cfg, up.as_ptr(), 2),
            MslabStatus::InvalidInput
        );
        assert_eq!(
            mslab_config_set_eps(cfg, ptr::null(), 2),
            MslabStatus::NullPointer
        );
        let ok = [0.25, 0.125];
        assert_eq!(mslab_config_set_eps(cfg, ok.as_ptr(), 2), MslabStatus::Ok);
        assert_eq!(mslab_config_set_replicas(cfg, 1), MslabStatus::InvalidInput);
        mslab_config_free(cfg);
    }
}

#[test]
fn strong_curve_round_trip() {
    let cfg = quick_config();
    unsafe {
        let eps = [0.25, 0.125, 0.0625];
        assert_eq!(mslab_config_set_eps(cfg, eps.as_ptr(), 3), MslabStatus::Ok);
        assert_eq!(mslab_config_set_seed(cfg, 11), MslabStatus::Ok);
        let mut pred = 0.0;
        assert_eq!(
            mslab_config_predicted_strong_slope(cfg, &mut pred),
            MslabStatus::Ok
        );
        assert_eq!(pred, 2.0);

        let mut curve = ptr::null_mut();
        assert_eq!(
            mslab_strong_error(cfg, &mut curve),
            MslabStatus::Ok,
            "{}",
            last_error()
        );
        let mut n = 0;
        assert_eq!(mslab_curve_len(curve, &mut n), MslabStatus::Ok);
        assert_eq!(n, 3);
        let (mut e, mut err) = (0.0, 0.0);
        assert_eq!(
            mslab_curve_point(curve, 1, &mut e, &mut err, ptr::null_mut()),
            MslabStatus::Ok
        );
        assert_eq!(e, 0.125);
        assert!(err > 0.0);
        assert_eq!(
            mslab_curve_point(curve, 3, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            MslabStatus::OutOfRange
        );
        let mut fit = MslabFit {
            slope: 0.0,
            intercept: 0.0,
            r_squared: 0.0,
            slope_stderr: 0.0,
            predicted_slope: 0.0,
        };
        assert_eq!(mslab_curve_fit(curve, &mut fit), MslabStatus::Ok);
        assert_eq!(fit.predicted_slope, 2.0);
        assert!(fit.slope.is_finite());

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("c.csv").to_str().unwrap()).unwrap();
        assert_eq!(mslab_curve_write_csv(curve, path.as_ptr()), MslabStatus::Ok);
        let text = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        mslab_curve_free(curve);
        mslab_config_free(cfg);
    }
}

#[test]
fn expression_errors() {
    unsafe {
        let src = CString::new("1 / (x1 - 1)").unwrap();
        let mut e = ptr::null_mut();
        assert_eq!(mslab_expr_parse(src.as_ptr(), &mut e), MslabStatus::Ok);
        let x = [1.0];
        let mut v = 0.0;
        assert_eq!(
            mslab_expr_eval(e, 0.0, x.as_ptr(), 1, ptr::null(), 0, &mut v),
            MslabStatus::Numerical
        );
        assert!(last_error().contains("division by zero"), "{}", last_error());
        let mut d = ptr::null_mut();
        assert_eq!(
            mslab_expr_derivative(e, b'x' as _, 0, &mut d),
            MslabStatus::OutOfRange
        );
        assert_eq!(
            mslab_expr_derivative(e, b'q' as _, 1, &mut d),
            MslabStatus::InvalidInput
        );
        mslab_expr_free(e);
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = lib_dir.join("libmslab_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/smoke.c"))
        .arg(format!("-I{}", root.join("include").display()))
        .arg(format!("-DMSLAB_FIXTURE=\"{}\"", fixture().display()))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
