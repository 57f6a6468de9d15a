//! Numerical audit of the standing assumptions. Advisory only: nothing here
//! gates other operations.

use super::system::MultiscaleSystem;
use crate::dsl::CoefficientField;
use crate::ergodics::{ergodic_average, sample_invariant, SamplerParams};
use crate::error::{Error, Result};
use crate::rng::{derive_key, stream, NormalStream};
use crate::sde::{csv_err, fmt17};
use nalgebra::DMatrix;
use std::io::Write;

/// Where and how densely to probe the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditParams {
    pub radii: Vec<f64>,
    /// Random directions per radius.
    pub n_dirs: usize,
    /// Slow states at which everything is probed.
    pub y_points: Vec<Vec<f64>>,
    pub t_points: Vec<f64>,
    pub sampler: SamplerParams,
    pub seed: u64,
}

impl AuditParams {
    /// Radii `1, 2, 4, .., 64`, 32 directions, probing at `y0` only.
    pub fn around(sys: &MultiscaleSystem) -> Self {
        AuditParams {
            radii: (0..7).map(|k| f64::from(1 << k)).collect(),
            n_dirs: 32,
            y_points: vec![sys.y0.clone()],
            t_points: vec![0.0],
            sampler: SamplerParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Smallest `lambda` with `1/lambda <= eig(sigma sigma^T / 2) <= lambda`
    /// over all probed points.
    pub lambda_est: f64,
    /// `(r, sup <x, b(x, y)>)` over `|x| = r`.
    pub recurrence_trend: Vec<(f64, f64)>,
    /// Set when the drift stops pulling inward at the largest radii.
    pub recurrence_flag: bool,
    /// `(t, y, max_i |avg H_i|)`; empty when H is absent.
    pub centering_residuals: Vec<(f64, Vec<f64>, f64)>,
    /// Log-log slope of the largest coefficient entry against `|x|`, over
    /// the upper half of the radii.
    pub growth_exponent_est: f64,
}

fn check_finite(name: &str, v: &[f64], x: &[f64], y: &[f64]) -> Result<()> {
    let bad = v.iter().filter(|a| !a.is_finite()).count();
    if bad > 0 {
        return Err(Error::NonFinite {
            what: format!("{name} at x = {x:?}, y = {y:?}"),
            count: bad,
        });
    }
    Ok(())
}

fn probe_points(sys: &MultiscaleSystem, p: &AuditParams) -> Vec<(f64, Vec<f64>)> {
    let mut noise = NormalStream::new(derive_key(&[p.seed, 0xa0d1]), stream::FROZEN, sys.d1);
    let mut dir = vec![0.0; sys.d1];
    let mut out = Vec::new();
    for &r in &p.radii {
        for _ in 0..p.n_dirs.max(1) {
            noise.fill(&mut dir);
            let n = dir
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            out.push((r, dir.iter().map(|v| r * v / n).collect()));
        }
    }
    out
}

fn max_abs_entry(field: &CoefficientField, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let v = field.eval(&crate::dsl::EvalArgs::new(t, x, y))?;
    check_finite(&field.name, &v, x, y)?;
    Ok(v.iter().fold(0.0f64, |a, b| a.max(b.abs())))
}

/// Least-squares slope of `ys` on `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

pub fn verify_assumptions(sys: &MultiscaleSystem, p: &AuditParams) -> Result<AssumptionReport> {
    if p.radii.is_empty() || p.y_points.is_empty() || p.t_points.is_empty() {
        return Err(Error::Validation(
            "the audit needs at least one radius, one y point and one t point".into(),
        ));
    }
    for y in &p.y_points {
        if y.len() != sys.d2 {
            return Err(Error::Validation(format!(
                "audit y point {y:?} is not in R^{}",
                sys.d2
            )));
        }
    }
    let d1 = sys.d1;
    let points = probe_points(sys, p);
    let mut b = vec![0.0; d1];
    let mut sig = vec![0.0; d1 * d1];
    let mut lambda: f64 = 1.0;
    let mut sup_by_r: Vec<(f64, f64)> = p.radii.iter().map(|&r| (r, f64::NEG_INFINITY)).collect();
    let mut growth_by_r = vec![0.0f64; p.radii.len()];
    let mut fields: Vec<&CoefficientField> = vec![&sys.b, &sys.sigma, &sys.f];
    fields.extend(sys.c.iter());
    fields.extend(sys.h.iter());

    for y in &p.y_points {
        for (i, (r, x)) in points.iter().enumerate() {
            let ri = i / p.n_dirs.max(1);
            sys.eval_b(x, y, &mut b)?;
            check_finite("b", &b, x, y)?;
            sys.eval_sigma(x, y, &mut sig)?;
            check_finite("sigma", &sig, x, y)?;
            let s = DMatrix::from_row_slice(d1, d1, &sig);
            let a = (&s * s.transpose()) * 0.5;
            let eig = a.symmetric_eigen().eigenvalues;
            let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| {
                (l.min(e), h.max(e))
            });
            lambda = lambda
                .max(hi)
                .max(if lo > 0.0 { 1.0 / lo } else { f64::INFINITY });
            let xb: f64 = x.iter().zip(&b).map(|(u, v)| u * v).sum();
            sup_by_r[ri].1 = sup_by_r[ri].1.max(xb);
            debug_assert_eq!(sup_by_r[ri].0, *r);
            for &t in &p.t_points {
                for f in &fields {
                    growth_by_r[ri] = growth_by_r[ri].max(max_abs_entry(f, t, x, y)?);
                }
            }
        }
    }

    let n = sup_by_r.len();
    let last = sup_by_r[n - 1].1;
    let rising = n >= 2 && sup_by_r[n - 1].1 > sup_by_r[n - 2].1;
    let recurrence_flag = last >= 0.0 || rising;

    // upper half of the radii, where the leading power dominates
    let mut by_r: Vec<(f64, f64)> = p
        .radii
        .iter()
        .copied()
        .zip(growth_by_r)
        .filter(|(r, _)| *r > 0.0)
        .collect();
    by_r.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lx, ly): (Vec<f64>, Vec<f64>) = by_r[by_r.len() / 2..]
        .iter()
        .map(|(r, g)| (r.ln(), (1.0 + g).ln()))
        .unzip();
    let growth_exponent_est = if lx.len() >= 2 { slope(&lx, &ly) } else { f64::NAN };

    let mut centering_residuals = Vec::new();
    if let Some(h) = sys.h.as_ref() {
        for y in &p.y_points {
            let m = sample_invariant(sys, y, &p.sampler)?;
            for &t in &p.t_points {
                let e = ergodic_average(h, &m, t, y)?;
                centering_residuals.push((t, y.clone(), e.max_abs()));
            }
        }
    }

    Ok(AssumptionReport {
        lambda_est: lambda,
        recurrence_trend: sup_by_r,
        recurrence_flag,
        centering_residuals,
        growth_exponent_est,
    })
}

impl AssumptionReport {
    /// Long format `quantity,t,radius,value,y0..`; fields that do not apply are NaN.
    pub fn write_csv<W: Write>(&self, w: W, d2: usize) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["quantity", "t", "radius", "value"].map(String::from).to_vec();
        header.extend((0..d2).map(|j| format!("y{j}")));
        wr.write_record(&header).map_err(csv_err)?;
        let nan = || "NaN".to_string();
        let mut row = |q: &str, t: Option<f64>, r: Option<f64>, v: f64, y: Option<&[f64]>| {
            let mut rec = vec![
                q.to_string(),
                t.map_or_else(nan, fmt17),
                r.map_or_else(nan, fmt17),
                fmt17(v),
            ];
            match y {
                Some(y) => rec.extend(y.iter().map(|v| fmt17(*v))),
                None => rec.extend((0..d2).map(|_| nan())),
            }
            wr.write_record(&rec).map_err(csv_err)
        };
        row("lambda_est", None, None, self.lambda_est, None)?;
        for &(r, v) in &self.recurrence_trend {
            row("recurrence_sup", None, Some(r), v, None)?;
        }
        row(
            "recurrence_flag",
            None,
            None,
            if self.recurrence_flag { 1.0 } else { 0.0 },
            None,
        )?;
        for (t, y, v) in &self.centering_residuals {
            row("centering_residual", Some(*t), None, *v, Some(y))?;
        }
        row("growth_exponent_est", None, None, self.growth_exponent_est, None)?;
        wr.flush()?;
        Ok(())
    }
}
