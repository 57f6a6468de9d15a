use mslab::cli::run;
use std::path::{Path, PathBuf};

fn fixture_text() -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/ou_bench.toml")).unwrap()
}

/// The fixture with a small measure sample and replica count.
fn quick(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = fixture_text()
        .replace("sampler_n = 200000", "sampler_n = 20000")
        .replace("n_mc = 200", "n_mc = 12")
        .replace("eps_grid = \"2^-4..2^-8\"", "eps_grid = \"2^-2..2^-4\"")
        .replace("clt_eps = 0.0625", "clt_eps = 0.125");
    let path = dir.join("run.toml");
    std::fs::write(&path, edit(text)).unwrap();
    path
}

fn mslab(args: &[&str]) -> i32 {
    run(std::iter::once("mslab").chain(args.iter().copied()))
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn rates_are_bit_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(tmp.path(), |t| t);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(
            mslab(&[
                "rates",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                d.to_str().unwrap()
            ]),
            0
        );
    }
    let (ra, rb) = (read_dir(&a), read_dir(&b));
    let names: Vec<&str> = ra.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "strong_NoHomogenization.csv",
            "strong_NoHomogenization_fit.csv",
            "strong_NoHomogenization_profile.csv",
            "weak_R0_2.csv",
            "weak_R0_2_fit.csv",
            "weak_R0_2_profile.csv",
        ]
    );
    assert_eq!(ra, rb);

    let c = tmp.path().join("c");
    let args = [
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "7",
    ];
    assert_eq!(mslab(&args), 0);
    assert_ne!(read_dir(&c)[0], ra[0]);
}

#[test]
fn every_subcommand_writes_its_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(tmp.path(), |t| t);
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let c = cfg.to_str().unwrap();
    for cmd in ["check", "simulate", "homogenize", "clt", "fluct"] {
        assert_eq!(mslab(&[cmd, "--config", c, "--out", o]), 0, "{cmd}");
    }
    let head = |name: &str| {
        let text = std::fs::read_to_string(out.join(name)).unwrap_or_else(|_| panic!("{name} missing"));
        text.lines().next().unwrap().to_string()
    };
    assert_eq!(head("assumptions.csv"), "quantity,t,radius,value,y0");
    assert_eq!(head("path_x.csv"), "t,dim0");
    assert_eq!(head("path_y.csv"), "t,dim0");
    assert_eq!(head("effective_R0_2.csv"), "t,y0,name,value,stderr");
    assert_eq!(
        head("clt_R0_2.csv"),
        "statistic,component,eps_value,eps_stderr,limit_value,limit_stderr,z_score"
    );
    assert_eq!(head("clt_R0_2_samples.csv"), "source,z0");
    assert_eq!(head("fluct.csv"), "eps,error,stderr,exploded_fraction");
    assert_eq!(
        head("fluct_fit.csv"),
        "slope,intercept,r2,slope_stderr,predicted_slope"
    );
    assert!(!out.join("errors.csv").exists());
}

#[test]
fn dry_run_simulates_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(tmp.path(), |t| t);
    let out = tmp.path().join("o");
    let args = [
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--dry-run",
    ];
    assert_eq!(mslab(&args), 0);
    assert!(!out.exists());
}

fn errors(out: &Path) -> Vec<String> {
    std::fs::read_to_string(out.join("errors.csv"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn regime_mismatch_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(tmp.path(), |t| t);
    let out = tmp.path().join("o");
    let args = [
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--regime-expect",
        "Regime2",
    ];
    assert_eq!(mslab(&args), 1);
    let e = errors(&out);
    assert_eq!(e[0], "command,kind,exit_code,message");
    assert!(e[1].starts_with("rates,regime-mismatch,1,"), "{}", e[1]);
}

#[test]
fn invalid_schedule_is_rejected_at_load() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(tmp.path(), |t| t.replace("b_exp = 0.0", "b_exp = 2.0"));
    let out = tmp.path().join("o");
    assert_eq!(
        mslab(&[
            "check",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        1
    );
    assert!(errors(&out)[1].contains("standing assumption"));
}

#[test]
fn explosions_beyond_the_cap_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(tmp.path(), |t| {
        t.replace("f = [\"x1^2 + y1\"]", "f = [\"y1^3\"]")
            .replace("y0 = [0.0]", "y0 = [3.0]")
    });
    let out = tmp.path().join("o");
    let args = [
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--kind",
        "strong",
    ];
    assert_eq!(mslab(&args), 2);
    assert!(
        errors(&out)[1].starts_with("rates,explosion-cap,2,"),
        "{:?}",
        errors(&out)
    );
}

#[test]
fn eps_grid_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(tmp.path(), |t| t);
    let out = tmp.path().join("o");
    let args = [
        "fluct",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--eps-grid",
        "2^-1..2^-3",
    ];
    assert_eq!(mslab(&args), 0);
    let text = std::fs::read_to_string(out.join("fluct.csv")).unwrap();
    let eps: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        eps,
        [
            "5.0000000000000000e-1",
            "2.5000000000000000e-1",
            "1.2500000000000000e-1"
        ]
    );
}
