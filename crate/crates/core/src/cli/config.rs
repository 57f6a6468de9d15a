//! TOML run configuration.

use crate::dsl::{ArgSignature, CoefficientField};
use crate::ergodics::{FkParams, SamplerParams};
use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, TestFunctional};
use crate::homogenize::{collapse_time, CellParams, HomogenizeParams, LatticeSpec};
use crate::model::{
    classify_averaging_regime, classify_deviation_regime, DeviationRegime, MultiscaleSystem, RegimeClass,
    ScaleSchedule, SystemSpec,
};
use crate::rng::derive_key;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    d1: usize,
    d2: usize,
    b: Vec<String>,
    #[serde(default)]
    c: Option<Vec<String>>,
    sigma: Vec<String>,
    f: Vec<String>,
    #[serde(default)]
    h: Option<Vec<String>>,
    g: Vec<String>,
    x0: Vec<f64>,
    y0: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    a_exp: f64,
    #[serde(default)]
    b_exp: f64,
    #[serde(default)]
    g_exp: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunctional {
    name: String,
    expr: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    eps: Option<Vec<f64>>,
    eps_grid: Option<String>,
    n_mc: Option<usize>,
    dt_fraction: Option<f64>,
    horizon: Option<f64>,
    q: Option<f64>,
    checkpoints: Option<usize>,
    explosion_cap: Option<f64>,
    functionals: Option<Vec<RawFunctional>>,
    clt_eps: Option<f64>,
    cf_nodes: Option<Vec<f64>>,
    fluct_f: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAveraging {
    y_min: Option<Vec<f64>>,
    y_max: Option<Vec<f64>>,
    ny: Option<usize>,
    nt: Option<usize>,
    sampler_n: Option<usize>,
    burn_in: Option<f64>,
    thinning: Option<f64>,
    sampler_dt: Option<f64>,
    fk_paths: Option<usize>,
    fk_t_trunc: Option<f64>,
    fk_dt: Option<f64>,
    n_outer: Option<usize>,
    psi_outer: Option<usize>,
    grad_h: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    schedule: RawSchedule,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    averaging: RawAveraging,
    #[serde(default)]
    output: RawOutput,
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: MultiscaleSystem,
    /// As written; rate predictions use the normalized form.
    pub schedule: ScaleSchedule,
    pub experiment: ExperimentConfig,
    pub homogenize: HomogenizeParams,
    pub lattice: LatticeSpec,
    pub clt_eps: f64,
    pub cf_nodes: Vec<f64>,
    pub fluct_f: Option<CoefficientField>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

/// Parses `2^-4..2^-8` (every power in between) or a comma-separated list.
pub fn parse_eps_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || {
        Error::Config(format!(
            "cannot read eps grid \"{s}\"; use 2^-4..2^-8 or a comma list"
        ))
    };
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..") {
        let exp = |p: &str| -> Result<i32> {
            let p = p.trim();
            let e = p.strip_prefix("2^").ok_or_else(bad)?;
            e.trim().parse::<i32>().map_err(|_| bad())
        };
        let (a, b) = (exp(lo)?, exp(hi)?);
        let step = if b >= a { 1 } else { -1 };
        let mut out = Vec::new();
        let mut k = a;
        loop {
            out.push(2f64.powi(k));
            if k == b {
                break;
            }
            k += step;
        }
        return Ok(out);
    }
    s.split(',')
        .map(|p| {
            let p = p.trim();
            match p.strip_prefix("2^") {
                Some(e) => e.parse::<i32>().map(|k| 2f64.powi(k)).map_err(|_| bad()),
                None => p.parse::<f64>().map_err(|_| bad()),
            }
        })
        .collect()
}

fn check_len(name: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::Config(format!(
            "{name} has {} entries, expected {d}",
            v.len()
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let s = raw.system;
        let spec = SystemSpec {
            d1: s.d1,
            d2: s.d2,
            b: s.b,
            c: s.c,
            sigma: s.sigma,
            f: s.f,
            h: s.h,
            g: s.g,
            x0: s.x0,
            y0: s.y0,
        };
        let system = spec.build()?;
        let schedule = ScaleSchedule::new(raw.schedule.a_exp, raw.schedule.b_exp, raw.schedule.g_exp)?;
        let (d1, d2) = (system.d1, system.d2);

        let e = raw.experiment;
        let seed = raw.output.seed.unwrap_or(0);
        let mut experiment = ExperimentConfig {
            master_seed: seed,
            ..ExperimentConfig::desk(d2)
        };
        match (e.eps, e.eps_grid) {
            (Some(_), Some(_)) => return Err(Error::Config("give either eps or eps_grid, not both".into())),
            (Some(v), None) => experiment.eps_list = v,
            (None, Some(g)) => experiment.eps_list = parse_eps_grid(&g)?,
            (None, None) => {}
        }
        if let Some(v) = e.n_mc {
            experiment.n_mc = v;
        }
        if let Some(v) = e.dt_fraction {
            experiment.dt_fraction = v;
        }
        if let Some(v) = e.horizon {
            experiment.horizon = v;
        }
        if let Some(v) = e.q {
            experiment.q = v;
        }
        if let Some(v) = e.checkpoints {
            experiment.checkpoints = v;
        }
        if let Some(v) = e.explosion_cap {
            experiment.explosion_cap = v;
        }
        if let Some(fs) = e.functionals {
            experiment.functionals = fs
                .iter()
                .map(|f| TestFunctional::parse(&f.name, &f.expr))
                .collect::<Result<_>>()?;
        }
        experiment.validate(&schedule.normalized(system.c_present(), system.h_present()))?;
        experiment.check_functionals(&system)?;
        let clt_eps = e
            .clt_eps
            .unwrap_or(experiment.eps_list[experiment.eps_list.len() / 2]);
        let cf_nodes = e.cf_nodes.unwrap_or_else(|| vec![1.0]);
        let fluct_f = match e.fluct_f {
            Some(v) => {
                let refs: Vec<&str> = v.iter().map(String::as_str).collect();
                let f = CoefficientField::parse("fluct_f", refs.len(), 1, &refs, ArgSignature::TXY)?;
                f.validate(d1, d2)?;
                Some(f)
            }
            None => None,
        };

        let a = raw.averaging;
        // the frozen process is simulated with the fast step of the coupled scheme
        let h = experiment.dt_fraction;
        let sampler = SamplerParams {
            burn_in: a.burn_in.unwrap_or(10.0),
            thinning: a.thinning.unwrap_or(1.0),
            n: a.sampler_n.unwrap_or(1_000_000),
            dt: a.sampler_dt.unwrap_or(h),
            seed: derive_key(&[seed, 1]),
        };
        let defaults = CellParams::default();
        let cell = CellParams {
            fk: FkParams {
                t_trunc: a.fk_t_trunc.unwrap_or(10.0),
                dt: a.fk_dt.unwrap_or(h),
                n_paths: a.fk_paths.unwrap_or(4),
                seed: derive_key(&[seed, 2]),
                rhs_stride: 1,
            },
            n_outer: a.n_outer.unwrap_or(defaults.n_outer),
            psi_outer: a.psi_outer.unwrap_or(defaults.psi_outer),
            nested: FkParams {
                seed: derive_key(&[seed, 3]),
                ..defaults.nested
            },
        };
        let homogenize = HomogenizeParams {
            sampler,
            cell,
            grad_h: a.grad_h.unwrap_or(0.05),
        };
        let lo = a
            .y_min
            .unwrap_or_else(|| system.y0.iter().map(|v| v - 5.0).collect());
        let hi = a
            .y_max
            .unwrap_or_else(|| system.y0.iter().map(|v| v + 5.0).collect());
        check_len("averaging.y_min", &lo, d2)?;
        check_len("averaging.y_max", &hi, d2)?;
        let bounds: Vec<(f64, f64)> = lo.into_iter().zip(hi).collect();
        let lattice =
            LatticeSpec::uniform(experiment.horizon, a.nt.unwrap_or(3), &bounds, a.ny.unwrap_or(5))?;
        let lattice = collapse_time(lattice, &system);

        let out_dir = raw.output.dir.unwrap_or_else(|| PathBuf::from("out"));
        let out_dir = if out_dir.is_relative() {
            base.join(out_dir)
        } else {
            out_dir
        };
        Ok(RunConfig {
            system,
            schedule,
            experiment,
            homogenize,
            lattice,
            clt_eps,
            cf_nodes,
            fluct_f,
            out_dir,
            seed,
        })
    }

    /// Reads and validates a config file; relative output paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base)
    }

    /// Replaces the seed everywhere it was derived from.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.experiment.master_seed = seed;
        self.homogenize.sampler.seed = derive_key(&[seed, 1]);
        self.homogenize.cell.fk.seed = derive_key(&[seed, 2]);
        self.homogenize.cell.nested.seed = derive_key(&[seed, 3]);
        self
    }

    pub fn with_eps(mut self, eps: Vec<f64>) -> Result<Self> {
        self.experiment.eps_list = eps;
        let s = self.normalized_schedule();
        self.experiment.validate(&s)?;
        Ok(self)
    }

    pub fn normalized_schedule(&self) -> ScaleSchedule {
        self.schedule
            .normalized(self.system.c_present(), self.system.h_present())
    }

    pub fn averaging_class(&self) -> RegimeClass {
        classify_averaging_regime(&self.normalized_schedule(), self.system.h_present())
    }

    pub fn deviation(&self) -> Result<DeviationRegime> {
        classify_deviation_regime(&self.normalized_schedule(), self.averaging_class())
    }
}
