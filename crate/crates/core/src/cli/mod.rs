//! Command-line front end. `main.rs` only forwards to [`run`].

mod config;

pub use config::{parse_eps_grid, RunConfig};

use crate::error::{Error, Result};
use crate::experiments::{
    clt_compare, fit_rate, fluctuation_scaling, strong_error, weak_error, AveragedModel, CltReport,
    ErrorCurve,
};
use crate::homogenize::{build_limit_spec, estimate_effective, EffectiveCoefficients, LimitSdeSpec, Needs};
use crate::model::{
    classify_deviation_regime, predicted_fluctuation_rate, predicted_strong_rate, predicted_weak_rate,
    verify_assumptions, AuditParams, DevTag, DeviationRegime, RateModel,
};
use crate::rng::replica_key;
use crate::sde::{generate_noise, simulate_multiscale};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Parser)]
#[command(
    name = "mslab",
    version,
    about = "Averaging and fluctuation experiments for three-scale SDEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run description.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding `[output] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `2^-4..2^-8` or a comma list, overriding the configured eps list.
    #[arg(long = "eps-grid")]
    pub eps_grid: Option<String>,
    /// Print the plan and exit without simulating.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateKind {
    Strong,
    Weak,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Audit ellipticity, recurrence, centering and growth; writes assumptions.csv.
    Check(Common),
    /// One coupled path at a single eps; writes path_x.csv and path_y.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        replica: u64,
    },
    /// Tabulates the effective coefficients; writes effective_<tag>.csv.
    Homogenize {
        #[command(flatten)]
        common: Common,
        /// Deviation tag to estimate for; defaults to the classified one.
        #[arg(long)]
        regime: Option<String>,
    },
    /// Error curves and rate fits over the eps list.
    Rates {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = RateKind::Both)]
        kind: RateKind,
        /// Fail unless the classifier agrees (averaging class or deviation tag).
        #[arg(long = "regime-expect")]
        regime_expect: Option<String>,
    },
    /// Law of the rescaled deviation against the limit equation at one eps.
    Clt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Scaling of the integrated fluctuation of `fluct_f`.
    Fluct(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Simulate { .. } => "simulate",
            Command::Homogenize { .. } => "homogenize",
            Command::Rates { .. } => "rates",
            Command::Clt { .. } => "clt",
            Command::Fluct(_) => "fluct",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Check(c) | Command::Fluct(c) => c,
            Command::Simulate { common, .. }
            | Command::Homogenize { common, .. }
            | Command::Rates { common, .. }
            | Command::Clt { common, .. } => common,
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures are also appended to `errors.csv` in the output directory.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let dir = error_dir(cli.command.common());
            if let Err(w) = append_error(&dir, cli.command.name(), &e) {
                eprintln!("error: cannot write errors.csv: {w}");
            }
            e.exit_code()
        }
    }
}

fn error_dir(c: &Common) -> PathBuf {
    if let Some(o) = &c.out {
        return o.clone();
    }
    RunConfig::load(&c.config)
        .map(|r| r.out_dir)
        .unwrap_or_else(|_| PathBuf::from("."))
}

/// Appends `command,kind,exit_code,message`, writing the header on creation.
pub fn append_error(dir: &Path, command: &str, e: &Error) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("errors.csv");
    let fresh = !path.exists();
    let f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)?;
    let mut wr = csv::Writer::from_writer(f);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if fresh {
        wr.write_record(["command", "kind", "exit_code", "message"])
            .map_err(io)?;
    }
    wr.write_record([command, e.kind(), &e.exit_code().to_string(), &e.to_string()])
        .map_err(io)?;
    wr.flush()?;
    Ok(())
}

fn load(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(g) = &c.eps_grid {
        cfg = cfg.with_eps(parse_eps_grid(g)?)?;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn rates(cfg: &RunConfig) -> Result<RateModel> {
    RateModel::new(1.0, 1.0, cfg.experiment.q)
}

/// Human-readable plan: regimes, predicted exponents and the cost per eps.
pub fn plan(cfg: &RunConfig) -> Result<String> {
    let s = cfg.normalized_schedule();
    let class = cfg.averaging_class();
    let rm = rates(cfg)?;
    let q = cfg.experiment.q;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "schedule: a_exp={} b_exp={} g_exp={}",
        s.a_exp, s.b_exp, s.g_exp
    );
    let _ = writeln!(out, "averaging regime: {class}");
    match predicted_strong_rate(&s, class, &rm) {
        Ok(r) => {
            let _ = writeln!(out, "predicted strong slope (q={q}): {}", q * r);
        }
        Err(e) => {
            let _ = writeln!(out, "predicted strong slope: unavailable ({e})");
        }
    }
    match classify_deviation_regime(&s, class) {
        Ok(dev) => {
            let _ = writeln!(out, "deviation regime: {} (eta = eps^{})", dev.tag, dev.eta_exp);
            let _ = writeln!(
                out,
                "predicted weak slope: {}",
                predicted_weak_rate(&s, &dev, &rm)
            );
        }
        Err(e) => {
            let _ = writeln!(out, "deviation regime: unavailable ({e})");
        }
    }
    let _ = writeln!(
        out,
        "predicted fluctuation slope (q={q}): {}",
        q * predicted_fluctuation_rate(&s, &rm)
    );
    let _ = writeln!(out, "eps,dt,steps");
    for &eps in &cfg.experiment.eps_list {
        let g = cfg.experiment.grid(&s, eps)?;
        let _ = writeln!(out, "{eps:e},{:e},{}", g.dt, g.n_steps);
    }
    let per = cfg.experiment.steps_per_replica(&s)?;
    let _ = writeln!(
        out,
        "total coupled steps: {} ({} replicas x {per})",
        per * cfg.experiment.n_mc,
        cfg.experiment.n_mc
    );
    Ok(out)
}

fn execute(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let cfg = load(common)?;
    if common.dry_run {
        print!("{}", plan(&cfg)?);
        return Ok(());
    }
    match cmd {
        Command::Check(_) => check(&cfg),
        Command::Simulate { eps, replica, .. } => simulate(&cfg, eps.unwrap_or(cfg.clt_eps), *replica),
        Command::Homogenize { regime, .. } => homogenize(&cfg, regime.as_deref()),
        Command::Rates {
            kind, regime_expect, ..
        } => rate_curves(&cfg, *kind, regime_expect.as_deref()),
        Command::Clt { eps, .. } => clt(&cfg, eps.unwrap_or(cfg.clt_eps)),
        Command::Fluct(_) => fluct(&cfg),
    }
}

fn check(cfg: &RunConfig) -> Result<()> {
    let p = AuditParams {
        sampler: cfg.homogenize.sampler,
        seed: cfg.seed,
        ..AuditParams::around(&cfg.system)
    };
    let rep = verify_assumptions(&cfg.system, &p)?;
    rep.write_csv(create(&cfg.out_dir, "assumptions.csv")?, cfg.system.d2)?;
    println!(
        "lambda_est={} growth_exponent_est={} recurrence_flag={}",
        rep.lambda_est, rep.growth_exponent_est, rep.recurrence_flag
    );
    Ok(())
}

fn simulate(cfg: &RunConfig, eps: f64, replica: u64) -> Result<()> {
    let s = cfg.normalized_schedule();
    let single = crate::experiments::ExperimentConfig {
        eps_list: vec![eps],
        ..cfg.experiment.clone()
    };
    single.validate(&s)?;
    let grid = single.grid(&s, eps)?;
    let noise = generate_noise(
        grid,
        cfg.system.d1,
        cfg.system.d2,
        replica_key(cfg.seed, 0, replica),
    );
    let (px, py) = simulate_multiscale(&cfg.system, &s, eps, &grid, &noise)?;
    px.write_csv(create(&cfg.out_dir, "path_x.csv")?)?;
    py.write_csv(create(&cfg.out_dir, "path_y.csv")?)?;
    if let Some(n) = py.exploded_at {
        eprintln!("warning: path exploded at step {n}");
    }
    Ok(())
}

/// Estimates everything `tag` and the averaged drift need, in one pass.
fn effective_for(cfg: &RunConfig, tag: DevTag, k: u8) -> Result<EffectiveCoefficients> {
    let needs = Needs::for_tag(tag).union(Needs::averaging(k));
    estimate_effective(&cfg.system, needs, &cfg.lattice, &cfg.homogenize)
}

fn averaged_from(eff: &EffectiveCoefficients, k: u8) -> Result<AveragedModel> {
    let tab = if k == 2 { &eff.fbar2 } else { &eff.fbar1 };
    let tab = tab
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("averaged drift {k} was not estimated")))?;
    Ok(AveragedModel {
        k,
        fbar: Arc::new(tab.value.clone()),
    })
}

fn limit_model(cfg: &RunConfig) -> Result<(DeviationRegime, AveragedModel, LimitSdeSpec)> {
    let dev = cfg.deviation()?;
    let k = AveragedModel::index_for(cfg.averaging_class());
    let eff = effective_for(cfg, dev.tag, k)?;
    let avg = averaged_from(&eff, k)?;
    let limit = build_limit_spec(dev.tag, &cfg.system, &eff)?;
    Ok((dev, avg, limit))
}

fn homogenize(cfg: &RunConfig, regime: Option<&str>) -> Result<()> {
    let tag = match regime {
        Some(t) => t.parse::<DevTag>()?,
        None => cfg.deviation()?.tag,
    };
    let k = if tag.family() == 2 { 2 } else { 1 };
    let eff = effective_for(cfg, tag, k)?;
    // surfaces missing components before anything is written
    build_limit_spec(tag, &cfg.system, &eff)?;
    eff.write_csv(create(&cfg.out_dir, &format!("effective_{tag}.csv"))?)?;
    if eff.zeta_clamp.clamped > 0.0 {
        eprintln!(
            "note: clamped negative eigen-mass {:e} of {:e} in zeta",
            eff.zeta_clamp.clamped, eff.zeta_clamp.total
        );
    }
    Ok(())
}

fn write_curve(dir: &Path, stem: &str, c: &ErrorCurve) -> Result<()> {
    c.write_csv(create(dir, &format!("{stem}.csv"))?)?;
    c.write_profile_csv(create(dir, &format!("{stem}_profile.csv"))?)?;
    match fit_rate(c) {
        Ok(f) => {
            f.write_csv(create(dir, &format!("{stem}_fit.csv"))?)?;
            println!(
                "{stem}: slope {:.4} +/- {:.4} (r2 {:.4}), predicted {}",
                f.slope,
                f.slope_stderr,
                f.r_squared,
                f.predicted_slope.map_or("n/a".to_string(), |p| format!("{p:.4}"))
            );
            Ok(())
        }
        // fewer than three points: the curve alone is still useful
        Err(Error::InsufficientPoints { found }) => {
            eprintln!("note: {stem}: no fit with {found} points");
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn check_expectation(cfg: &RunConfig, expect: &str) -> Result<()> {
    let class = cfg.averaging_class();
    let found = match expect.parse::<DevTag>() {
        Ok(_) => cfg.deviation()?.tag.to_string(),
        Err(_) => class.to_string(),
    };
    if found.eq_ignore_ascii_case(expect.trim()) {
        Ok(())
    } else {
        Err(Error::RegimeMismatch {
            expected: expect.trim().to_string(),
            found,
        })
    }
}

/// Estimates the averaged drift and runs the strong error curve.
pub fn strong_curve(cfg: &RunConfig) -> Result<ErrorCurve> {
    let k = AveragedModel::index_for(cfg.averaging_class());
    let eff = estimate_effective(&cfg.system, Needs::averaging(k), &cfg.lattice, &cfg.homogenize)?;
    strong_error(
        &cfg.system,
        &cfg.schedule,
        &averaged_from(&eff, k)?,
        &cfg.experiment,
    )
}

fn rate_curves(cfg: &RunConfig, kind: RateKind, expect: Option<&str>) -> Result<()> {
    if let Some(e) = expect {
        check_expectation(cfg, e)?;
    }
    let class = cfg.averaging_class();
    if kind == RateKind::Strong {
        return write_curve(&cfg.out_dir, &format!("strong_{class}"), &strong_curve(cfg)?);
    }
    let (dev, avg, limit) = limit_model(cfg)?;
    if kind == RateKind::Both {
        let c = strong_error(&cfg.system, &cfg.schedule, &avg, &cfg.experiment)?;
        write_curve(&cfg.out_dir, &format!("strong_{class}"), &c)?;
    }
    let c = weak_error(&cfg.system, &cfg.schedule, &dev, &avg, &limit, &cfg.experiment)?;
    write_curve(&cfg.out_dir, &format!("weak_{}", dev.tag), &c)
}

/// Estimates the limit equation and compares laws at `eps`.
pub fn clt_report(cfg: &RunConfig, eps: f64) -> Result<CltReport> {
    let (dev, avg, limit) = limit_model(cfg)?;
    clt_compare(
        &cfg.system,
        &cfg.schedule,
        &dev,
        &avg,
        &limit,
        eps,
        &cfg.cf_nodes,
        &cfg.experiment,
    )
}

fn clt(cfg: &RunConfig, eps: f64) -> Result<()> {
    let r = clt_report(cfg, eps)?;
    r.write_csv(create(&cfg.out_dir, &format!("clt_{}.csv", r.tag))?)?;
    r.write_samples_csv(create(&cfg.out_dir, &format!("clt_{}_samples.csv", r.tag))?)?;
    let worst = r.rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    println!("clt_{}: {} statistics, max |z| = {worst:.3}", r.tag, r.rows.len());
    Ok(())
}

fn fluct(cfg: &RunConfig) -> Result<()> {
    let f = cfg
        .fluct_f
        .as_ref()
        .ok_or_else(|| Error::Config("fluct needs experiment.fluct_f".into()))?;
    let c = fluctuation_scaling(
        &cfg.system,
        &cfg.schedule,
        f,
        &cfg.homogenize.sampler,
        &cfg.experiment,
    )?;
    write_curve(&cfg.out_dir, "fluct", &c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/ou_bench.toml")
    }

    #[test]
    fn dry_run_plan() {
        let cfg = RunConfig::load(&fixture()).unwrap();
        let p = plan(&cfg).unwrap();
        assert!(p.contains("averaging regime: NoHomogenization"), "{p}");
        assert!(p.contains("deviation regime: R0_2 (eta = eps^1)"), "{p}");
        assert!(p.contains("predicted strong slope (q=2): 2"), "{p}");
        assert_eq!(p.lines().filter(|l| l.starts_with("6.25e-2,")).count(), 1, "{p}");
    }

    #[test]
    fn errors_csv_appends() {
        let dir = tempfile::tempdir().unwrap();
        let e = Error::RegimeMismatch {
            expected: "Regime1".into(),
            found: "Regime2".into(),
        };
        append_error(dir.path(), "rates", &e).unwrap();
        append_error(dir.path(), "rates", &e).unwrap();
        let text = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "command,kind,exit_code,message");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("rates,"), "{}", lines[1]);
        assert!(lines[1].contains(",1,"), "{}", lines[1]);
    }

    #[test]
    fn regime_expectation() {
        let cfg = RunConfig::load(&fixture()).unwrap();
        assert!(check_expectation(&cfg, "NoHomogenization").is_ok());
        assert!(check_expectation(&cfg, "r0_2").is_ok());
        let e = check_expectation(&cfg, "Regime1").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(matches!(e, Error::RegimeMismatch { .. }));
    }

    #[test]
    fn bad_arguments_exit_one() {
        assert_eq!(run(["mslab", "nonsense"]), 1);
        assert_eq!(run(["mslab", "--help"]), 0);
    }
}
