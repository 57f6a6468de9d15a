//! Monte Carlo drivers. Replicas run in parallel and are reduced in replica
//! order, so results do not depend on the worker count.

use super::config::{thread_pool, ExperimentConfig};
use super::curve::{CurvePoint, ErrorCurve, ProfilePoint};
use crate::dsl::CoefficientField;
use crate::ergodics::{check_centered, sample_invariant, PointFn, SamplerParams};
use crate::error::{Error, Result};
use crate::homogenize::{estimate_effective, HomogenizeParams, LatticeSpec, LimitSdeSpec, Needs};
use crate::model::{
    classify_averaging_regime, predicted_fluctuation_rate, predicted_strong_rate, predicted_weak_rate,
    DeviationRegime, MultiscaleSystem, RateModel, RegimeClass, ScaleSchedule,
};
use crate::rng::replica_key;
use crate::sde::{csv_err, fmt17};
use crate::sde::{
    generate_noise, run_averaged, run_averaged_with_limit, run_multiscale, SharedField, TimeGrid,
};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// Drift of the averaged equation, `k = 1` or `2`.
#[derive(Clone)]
pub struct AveragedModel {
    pub k: u8,
    pub fbar: SharedField,
}

impl AveragedModel {
    /// `k = 2` in the second averaging regime, else `k = 1`.
    pub fn index_for(class: RegimeClass) -> u8 {
        if class == RegimeClass::Regime2 {
            2
        } else {
            1
        }
    }

    /// Tabulates the averaged drift on `lattice`.
    pub fn estimate(
        sys: &MultiscaleSystem,
        k: u8,
        lattice: &LatticeSpec,
        params: &HomogenizeParams,
    ) -> Result<Self> {
        let eff = estimate_effective(sys, Needs::averaging(k), lattice, params)?;
        let tab = if k == 2 { eff.fbar2 } else { eff.fbar1 };
        let tab =
            tab.ok_or_else(|| Error::Validation(format!("averaged drift index must be 1 or 2, got {k}")))?;
        Ok(AveragedModel {
            k,
            fbar: Arc::new(tab.value),
        })
    }
}

fn g_field(sys: &MultiscaleSystem) -> SharedField {
    Arc::new(sys.g.clone())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Runs `n` replicas; `None` marks an exploded replica.
fn run_replicas<T, F>(cfg: &ExperimentConfig, eps: f64, f: F) -> Result<(Vec<T>, f64)>
where
    T: Send,
    F: Fn(usize) -> Result<Option<T>> + Sync + Send,
{
    let out: Vec<Result<Option<T>>> = (0..cfg.n_mc).into_par_iter().map(f).collect();
    let mut rows = Vec::with_capacity(cfg.n_mc);
    let mut exploded = 0usize;
    for r in out {
        match r? {
            Some(v) => rows.push(v),
            None => exploded += 1,
        }
    }
    let fraction = exploded as f64 / cfg.n_mc as f64;
    if fraction > cfg.explosion_cap || rows.len() < 2 {
        return Err(Error::ExplosionCap { eps, fraction });
    }
    Ok((rows, fraction))
}

/// Mean and standard error of each column of `rows`.
fn column_stats(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    let k = rows[0].len();
    (0..k)
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, (v / n).sqrt())
        })
        .collect()
}

/// Collects the state at each checkpoint index.
struct Recorder<'a> {
    cps: &'a [usize],
    next: usize,
    out: Vec<f64>,
}

impl<'a> Recorder<'a> {
    fn new(cps: &'a [usize], dim: usize) -> Self {
        Recorder {
            cps,
            next: 0,
            out: Vec::with_capacity(cps.len() * dim),
        }
    }

    fn see(&mut self, step: usize, v: &[f64]) {
        if self.next < self.cps.len() && self.cps[self.next] == step {
            self.out.extend_from_slice(v);
            self.next += 1;
        }
    }
}

fn rate_model(cfg: &ExperimentConfig) -> Result<RateModel> {
    RateModel::new(1.0, 1.0, cfg.q)
}

/// `sup_t E|Y^eps_t - Ybar_t|^q` over checkpoints, with `Y^eps` and `Ybar`
/// driven by the same W2.
pub fn strong_error(
    sys: &MultiscaleSystem,
    sched: &ScaleSchedule,
    avg: &AveragedModel,
    cfg: &ExperimentConfig,
) -> Result<ErrorCurve> {
    let sched = sched.normalized(sys.c_present(), sys.h_present());
    cfg.validate(&sched)?;
    let class = classify_averaging_regime(&sched, sys.h_present());
    let predicted = predicted_strong_rate(&sched, class, &rate_model(cfg)?)
        .ok()
        .map(|r| cfg.q * r);
    let g = g_field(sys);
    let d2 = sys.d2;
    let pool = thread_pool()?;
    let mut points = Vec::new();
    let mut profile = Vec::new();
    for (level, &eps) in cfg.eps_list.iter().enumerate() {
        let grid = cfg.grid(&sched, eps)?;
        let cps = grid.checkpoints(cfg.checkpoints);
        let (rows, frac) = pool.install(|| {
            run_replicas(cfg, eps, |r| {
                let noise = generate_noise(
                    grid,
                    sys.d1,
                    d2,
                    replica_key(cfg.master_seed, level as u64, r as u64),
                );
                let mut ye = Recorder::new(&cps, d2);
                if run_multiscale(sys, &sched, eps, &grid, &noise, |n, _, _, y| ye.see(n, y))?.is_some() {
                    return Ok(None);
                }
                let mut yb = Recorder::new(&cps, d2);
                if run_averaged(
                    avg.fbar.as_ref(),
                    g.as_ref(),
                    &sys.y0,
                    &grid,
                    &noise,
                    |n, _, y| yb.see(n, y),
                )?
                .is_some()
                {
                    return Ok(None);
                }
                Ok(Some(
                    ye.out
                        .chunks(d2)
                        .zip(yb.out.chunks(d2))
                        .map(|(a, b)| {
                            let d: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
                            norm(&d).powf(cfg.q)
                        })
                        .collect::<Vec<f64>>(),
                ))
            })
        })?;
        let stats = column_stats(&rows);
        push_curve(eps, &grid, &cps, &stats, frac, &mut points, &mut profile);
    }
    Ok(ErrorCurve {
        kind: "strong".into(),
        regime: class.to_string(),
        q: cfg.q,
        functionals: vec![],
        points,
        profile,
        predicted_slope: predicted,
    })
}

fn push_curve(
    eps: f64,
    grid: &TimeGrid,
    cps: &[usize],
    stats: &[(f64, f64)],
    frac: f64,
    points: &mut Vec<CurvePoint>,
    profile: &mut Vec<ProfilePoint>,
) {
    let per_cp = stats.len() / cps.len();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (c, &step) in cps.iter().enumerate() {
        for &(m, se) in &stats[c * per_cp..(c + 1) * per_cp] {
            let e = m.abs();
            profile.push(ProfilePoint {
                eps,
                t: grid.time(step),
                error: e,
                stderr: se,
            });
            if e > best.0 {
                best = (e, se);
            }
        }
    }
    points.push(CurvePoint {
        eps,
        error: best.0,
        stderr: best.1,
        exploded_fraction: frac,
    });
}

/// Per replica: `Z^eps` and the limit `Zbar` at each checkpoint, `cps x d2` each.
#[allow(clippy::too_many_arguments)]
fn deviation_pair(
    sys: &MultiscaleSystem,
    sched: &ScaleSchedule,
    dev: &DeviationRegime,
    avg: &AveragedModel,
    limit: &LimitSdeSpec,
    eps: f64,
    grid: &TimeGrid,
    cps: &[usize],
    key: u64,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let d2 = sys.d2;
    let noise = generate_noise(*grid, sys.d1, d2, key);
    let mut ye = Recorder::new(cps, d2);
    if run_multiscale(sys, sched, eps, grid, &noise, |n, _, _, y| ye.see(n, y))?.is_some() {
        return Ok(None);
    }
    let mut yb = Recorder::new(cps, d2);
    let mut zb = Recorder::new(cps, d2);
    let g = g_field(sys);
    let ex = run_averaged_with_limit(
        avg.fbar.as_ref(),
        g.as_ref(),
        limit,
        &sys.y0,
        grid,
        &noise,
        |n, _, y, z| {
            yb.see(n, y);
            zb.see(n, z);
        },
    )?;
    if ex.is_some() {
        return Ok(None);
    }
    let eta = dev.eta(eps);
    let z: Vec<f64> = ye.out.iter().zip(&yb.out).map(|(a, b)| (a - b) / eta).collect();
    Ok(Some((z, zb.out)))
}

/// `sup_t max_phi |E phi(Z^eps_t) - E phi(Zbar_t)|`, paired per replica.
pub fn weak_error(
    sys: &MultiscaleSystem,
    sched: &ScaleSchedule,
    dev: &DeviationRegime,
    avg: &AveragedModel,
    limit: &LimitSdeSpec,
    cfg: &ExperimentConfig,
) -> Result<ErrorCurve> {
    let sched = sched.normalized(sys.c_present(), sys.h_present());
    cfg.validate(&sched)?;
    cfg.check_functionals(sys)?;
    if cfg.functionals.is_empty() {
        return Err(Error::Validation(
            "weak error needs at least one test functional".into(),
        ));
    }
    let predicted = predicted_weak_rate(&sched, dev, &rate_model(cfg)?);
    let d2 = sys.d2;
    let pool = thread_pool()?;
    let mut points = Vec::new();
    let mut profile = Vec::new();
    for (level, &eps) in cfg.eps_list.iter().enumerate() {
        let grid = cfg.grid(&sched, eps)?;
        let cps = grid.checkpoints(cfg.checkpoints);
        let (rows, frac) = pool.install(|| {
            run_replicas(cfg, eps, |r| {
                let key = replica_key(cfg.master_seed, level as u64, r as u64);
                let Some((z, zb)) = deviation_pair(sys, &sched, dev, avg, limit, eps, &grid, &cps, key)?
                else {
                    return Ok(None);
                };
                let mut row = Vec::with_capacity(cps.len() * cfg.functionals.len());
                for (a, b) in z.chunks(d2).zip(zb.chunks(d2)) {
                    for phi in &cfg.functionals {
                        row.push(phi.eval(a)? - phi.eval(b)?);
                    }
                }
                Ok(Some(row))
            })
        })?;
        let stats = column_stats(&rows);
        push_curve(eps, &grid, &cps, &stats, frac, &mut points, &mut profile);
    }
    Ok(ErrorCurve {
        kind: "weak".into(),
        regime: dev.tag.to_string(),
        q: cfg.q,
        functionals: cfg.functionals.iter().map(|f| f.name.clone()).collect(),
        points,
        profile,
        predicted_slope: Some(predicted),
    })
}

/// One compared statistic of `Z_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    /// `mean`, `variance`, `cf_re(u)` or `cf_im(u)`.
    pub statistic: String,
    pub component: usize,
    pub eps_value: f64,
    pub eps_stderr: f64,
    pub limit_value: f64,
    pub limit_stderr: f64,
    /// Difference over the combined standard error, treating the two
    /// samples as independent.
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub eps: f64,
    pub tag: String,
    pub rows: Vec<CltRow>,
    /// Terminal samples, one `d2` row per kept replica.
    pub z_eps: Vec<Vec<f64>>,
    pub z_limit: Vec<Vec<f64>>,
    pub exploded_fraction: f64,
}

impl CltReport {
    /// `statistic,component,eps_value,eps_stderr,limit_value,limit_stderr,z_score`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "statistic",
            "component",
            "eps_value",
            "eps_stderr",
            "limit_value",
            "limit_stderr",
            "z_score",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            wr.write_record([
                r.statistic.clone(),
                r.component.to_string(),
                fmt17(r.eps_value),
                fmt17(r.eps_stderr),
                fmt17(r.limit_value),
                fmt17(r.limit_stderr),
                fmt17(r.z_score),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// `source,z0,..`; `source` is `eps` or `limit`.
    pub fn write_samples_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let d2 = self.z_eps.first().map_or(0, Vec::len);
        let mut header = vec!["source".to_string()];
        header.extend((0..d2).map(|j| format!("z{j}")));
        wr.write_record(&header).map_err(csv_err)?;
        for (src, rows) in [("eps", &self.z_eps), ("limit", &self.z_limit)] {
            for z in rows {
                let mut row = vec![src.to_string()];
                row.extend(z.iter().map(|&v| fmt17(v)));
                wr.write_record(&row).map_err(csv_err)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Unbiased variance and the standard error `sqrt((m4 - s^4) / n)`.
fn var_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (s2, ((m4 - s2 * s2).max(0.0) / n).sqrt())
}

/// Compares the law of `Z^eps_T` with the simulated limit at one `eps`.
#[allow(clippy::too_many_arguments)]
pub fn clt_compare(
    sys: &MultiscaleSystem,
    sched: &ScaleSchedule,
    dev: &DeviationRegime,
    avg: &AveragedModel,
    limit: &LimitSdeSpec,
    eps: f64,
    cf_nodes: &[f64],
    cfg: &ExperimentConfig,
) -> Result<CltReport> {
    let sched = sched.normalized(sys.c_present(), sys.h_present());
    let single = ExperimentConfig {
        eps_list: vec![eps],
        ..cfg.clone()
    };
    single.validate(&sched)?;
    let grid = cfg.grid(&sched, eps)?;
    let cps = [grid.n_steps];
    let pool = thread_pool()?;
    let (rows, frac) = pool.install(|| {
        run_replicas(&single, eps, |r| {
            let key = replica_key(cfg.master_seed, 0, r as u64);
            deviation_pair(sys, &sched, dev, avg, limit, eps, &grid, &cps, key)
        })
    })?;
    let d2 = sys.d2;
    let mut out = Vec::new();
    let mut push = |statistic: String, component: usize, a: (f64, f64), b: (f64, f64)| {
        let se = a.1.hypot(b.1);
        out.push(CltRow {
            statistic,
            component,
            eps_value: a.0,
            eps_stderr: a.1,
            limit_value: b.0,
            limit_stderr: b.1,
            z_score: if se > 0.0 { (a.0 - b.0) / se } else { 0.0 },
        });
    };
    for i in 0..d2 {
        let ze: Vec<f64> = rows.iter().map(|(z, _)| z[i]).collect();
        let zl: Vec<f64> = rows.iter().map(|(_, z)| z[i]).collect();
        push("mean".into(), i, mean_se(&ze), mean_se(&zl));
        push("variance".into(), i, var_se(&ze), var_se(&zl));
        for &u in cf_nodes {
            let re = |v: &[f64]| mean_se(&v.iter().map(|x| (u * x).cos()).collect::<Vec<_>>());
            let im = |v: &[f64]| mean_se(&v.iter().map(|x| (u * x).sin()).collect::<Vec<_>>());
            push(format!("cf_re({u})"), i, re(&ze), re(&zl));
            push(format!("cf_im({u})"), i, im(&ze), im(&zl));
        }
    }
    let (z_eps, z_limit) = rows.into_iter().unzip();
    Ok(CltReport {
        eps,
        tag: dev.tag.to_string(),
        rows: out,
        z_eps,
        z_limit,
        exploded_fraction: frac,
    })
}

/// `E|int_0^T f(s, X_s, Y_s) ds|^q` by the trapezoid rule on the fine grid.
/// `f` must be centered under the frozen measure at `y0`.
pub fn fluctuation_scaling(
    sys: &MultiscaleSystem,
    sched: &ScaleSchedule,
    f: &CoefficientField,
    sampler: &SamplerParams,
    cfg: &ExperimentConfig,
) -> Result<ErrorCurve> {
    let sched = sched.normalized(sys.c_present(), sys.h_present());
    cfg.validate(&sched)?;
    let measure = sample_invariant(sys, &sys.y0, sampler)?;
    check_centered(f, &measure, 0.0, &sys.y0, "f")?;
    let predicted = cfg.q * predicted_fluctuation_rate(&sched, &rate_model(cfg)?);
    let k = f.len();
    let pool = thread_pool()?;
    let mut points = Vec::new();
    let mut profile = Vec::new();
    for (level, &eps) in cfg.eps_list.iter().enumerate() {
        let grid = cfg.grid(&sched, eps)?;
        let (rows, frac) = pool.install(|| {
            run_replicas(cfg, eps, |r| {
                let noise = generate_noise(
                    grid,
                    sys.d1,
                    sys.d2,
                    replica_key(cfg.master_seed, level as u64, r as u64),
                );
                let mut acc = vec![0.0; k];
                let mut fv = vec![0.0; k];
                let mut err = None;
                let ex = run_multiscale(sys, &sched, eps, &grid, &noise, |n, t, x, y| {
                    if err.is_some() {
                        return;
                    }
                    if let Err(e) = PointFn::eval(f, t, x, y, &mut fv) {
                        err = Some(e);
                        return;
                    }
                    let w = if n == 0 || n == grid.n_steps { 0.5 } else { 1.0 } * grid.dt;
                    for (a, v) in acc.iter_mut().zip(&fv) {
                        *a += w * v;
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                if ex.is_some() {
                    return Ok(None);
                }
                Ok(Some(vec![norm(&acc).powf(cfg.q)]))
            })
        })?;
        let stats = column_stats(&rows);
        push_curve(
            eps,
            &grid,
            &[grid.n_steps],
            &stats,
            frac,
            &mut points,
            &mut profile,
        );
    }
    Ok(ErrorCurve {
        kind: "fluct".into(),
        regime: classify_averaging_regime(&sched, sys.h_present()).to_string(),
        q: cfg.q,
        functionals: vec![f.name.clone()],
        points,
        profile,
        predicted_slope: Some(predicted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::TestFunctional;
    use crate::homogenize::CellParams;
    use crate::model::{classify_deviation_regime, SystemSpec};
    use crate::sde::ConstField;

    fn small(eps: Vec<f64>, n_mc: usize) -> ExperimentConfig {
        ExperimentConfig {
            eps_list: eps,
            n_mc,
            master_seed: 5,
            ..ExperimentConfig::desk(1)
        }
    }

    fn exact_avg(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> AveragedModel {
        AveragedModel {
            k: 1,
            fbar: Arc::new(crate::sde::FnField::new(
                1,
                move |_, y: &[f64], out: &mut [f64]| out[0] = f(y[0]),
            )),
        }
    }

    #[test]
    fn x_independent_slow_drift_gives_zero_strong_error() {
        let sys = SystemSpec::scalar("-x1", "1.4142135623730951", "-y1", "1")
            .build()
            .unwrap();
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let avg = exact_avg(|y| -y);
        let c = strong_error(&sys, &sched, &avg, &small(vec![0.25, 0.125], 8)).unwrap();
        for p in &c.points {
            assert!(p.error < 1e-24, "{p:?}");
        }
        assert_eq!(c.profile.len(), 2 * 17);
    }

    #[test]
    fn strong_error_decreases_on_ou_bench() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        // the Euler chain has stationary variance 1/(1 - h/2) with h = 1/20
        let m2 = 1.0 / (1.0 - 0.025);
        let avg = exact_avg(move |y| m2 + y);
        let c = strong_error(&sys, &sched, &avg, &small(vec![0.25, 0.125, 0.0625], 40)).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].error < w[0].error + 2.0 * w[0].stderr, "{:?}", c.points);
        }
        assert_eq!(c.predicted_slope, Some(2.0));
        assert_eq!(c.regime, "NoHomogenization");
    }

    #[test]
    fn runs_are_deterministic_and_thread_independent() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let avg = exact_avg(|y| 1.0 + y);
        let cfg = small(vec![0.25, 0.125], 6);
        let a = strong_error(&sys, &sched, &avg, &cfg).unwrap();
        let b = strong_error(&sys, &sched, &avg, &cfg).unwrap();
        assert_eq!(a, b);
    }

    fn ou_limit() -> (DeviationRegime, LimitSdeSpec) {
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let dev = classify_deviation_regime(&sched, RegimeClass::NoHomogenization).unwrap();
        let spec = LimitSdeSpec::from_parts(
            dev.tag,
            1,
            Arc::new(ConstField(vec![1.0])),
            vec![],
            None,
            Some(Arc::new(ConstField(vec![2f64.sqrt()]))),
        );
        (dev, spec)
    }

    #[test]
    fn constant_functional_has_no_weak_error() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let (dev, spec) = ou_limit();
        let mut cfg = small(vec![0.25, 0.125], 8);
        cfg.functionals = vec![TestFunctional::parse("one", "1").unwrap()];
        let c = weak_error(&sys, &sched, &dev, &exact_avg(|y| 1.0 + y), &spec, &cfg).unwrap();
        for p in &c.points {
            assert!(p.error <= 2.0 * p.stderr + 1e-15, "{p:?}");
        }
        assert_eq!(c.regime, "R0_2");
    }

    #[test]
    fn clt_rows_are_populated() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let (dev, spec) = ou_limit();
        let cfg = small(vec![0.125], 50);
        let r = clt_compare(
            &sys,
            &sched,
            &dev,
            &exact_avg(|y| 1.0 + y),
            &spec,
            0.125,
            &[1.0],
            &cfg,
        )
        .unwrap();
        let names: Vec<&str> = r.rows.iter().map(|r| r.statistic.as_str()).collect();
        assert_eq!(names, ["mean", "variance", "cf_re(1)", "cf_im(1)"]);
        assert!(r.rows.iter().all(|r| r.z_score.is_finite()));
        assert_eq!(r.z_eps.len(), 50);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(
            text.starts_with("statistic,component,eps_value,eps_stderr,limit_value,limit_stderr,z_score\n")
        );
        assert_eq!(text.lines().count(), 5);
        let mut buf = Vec::new();
        r.write_samples_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("source,z0\n"));
        assert_eq!(text.lines().count(), 101);
    }

    #[test]
    fn fluctuation_controls() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let sampler = SamplerParams {
            n: 20_000,
            seed: 1,
            ..Default::default()
        };
        let cfg = small(vec![0.25, 0.125], 8);
        let zero = CoefficientField::parse("f", 1, 1, &["0"], crate::dsl::ArgSignature::TXY).unwrap();
        let c = fluctuation_scaling(&sys, &sched, &zero, &sampler, &cfg).unwrap();
        assert!(c.points.iter().all(|p| p.error == 0.0));
        assert_eq!(c.predicted_slope, Some(2.0));
        let sq = CoefficientField::parse("f", 1, 1, &["x1^2"], crate::dsl::ArgSignature::TXY).unwrap();
        assert!(matches!(
            fluctuation_scaling(&sys, &sched, &sq, &sampler, &cfg),
            Err(Error::CenteringViolation { .. })
        ));
    }

    #[test]
    fn explosion_cap_is_enforced() {
        let sys = SystemSpec::scalar("-x1", "1", "y1^3", "1")
            .with_initial(&[0.0], &[3.0])
            .build()
            .unwrap();
        let sched = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let avg = exact_avg(|y| y * y * y);
        let r = strong_error(&sys, &sched, &avg, &small(vec![0.25], 4));
        assert!(matches!(r, Err(Error::ExplosionCap { .. })), "{r:?}");
    }

    #[test]
    fn averaged_model_from_estimates() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let lat = LatticeSpec::uniform(1.0, 1, &[(-1.0, 1.0)], 3).unwrap();
        let p = HomogenizeParams {
            sampler: SamplerParams {
                n: 2000,
                ..Default::default()
            },
            cell: CellParams::default(),
            grad_h: 0.05,
        };
        let m = AveragedModel::estimate(&sys, 1, &lat, &p).unwrap();
        let v = m.fbar.eval_vec(0.0, &[0.5]).unwrap()[0];
        assert!((v - 1.5).abs() < 0.1);
        assert_eq!(AveragedModel::index_for(RegimeClass::Regime2), 2);
    }
}
