use super::func::{PointFn, SharedPointFn, Shifted};
use crate::error::{Error, Result};
use crate::model::MultiscaleSystem;
use crate::rng::{derive_key, stream, NormalStream};
use crate::sde::{fmt17, run_frozen};
use std::io::Write;
use std::sync::Arc;

/// How samples of the frozen invariant measure are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerParams {
    pub burn_in: f64,
    pub thinning: f64,
    pub n: usize,
    /// Euler step of the frozen process.
    pub dt: f64,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            burn_in: 10.0,
            thinning: 1.0,
            n: 5000,
            dt: 0.01,
            seed: 0,
        }
    }
}

/// Samples of (an approximation of) the frozen invariant measure at `y_anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub y_anchor: Vec<f64>,
    pub d1: usize,
    /// `n x d1`, row-major.
    pub samples: Vec<f64>,
    pub params: SamplerParams,
}

/// Mean with a standard error per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Estimate {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.value.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Mean and standard error of the rows of an `n x k` table.
pub(crate) fn mean_stderr(rows: &[f64], k: usize) -> Estimate {
    let n = rows.len() / k.max(1);
    let mut mean = vec![0.0; k];
    for r in rows.chunks(k) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var = vec![0.0; k];
    for r in rows.chunks(k) {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let stderr = var
        .iter()
        .map(|s| {
            if n > 1 {
                (s / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Estimate { value: mean, stderr }
}

/// Runs the frozen process from `x_init` and keeps a state every `thinning`
/// time units after `burn_in`.
pub fn sample_invariant_from(
    sys: &MultiscaleSystem,
    y: &[f64],
    x_init: &[f64],
    params: &SamplerParams,
) -> Result<EmpiricalMeasure> {
    let p = params;
    if !(p.burn_in > 0.0 && p.thinning > 0.0 && p.dt > 0.0) || p.n == 0 {
        return Err(Error::Validation(format!(
            "sampler needs burn_in, thinning, dt > 0 and n >= 1 (got {p:?})"
        )));
    }
    let burn = (p.burn_in / p.dt).round().max(1.0) as usize;
    let thin = (p.thinning / p.dt).round().max(1.0) as usize;
    let total = burn + thin * (p.n - 1);
    let mut noise = NormalStream::new(derive_key(&[p.seed, 0x5a4d]), stream::FROZEN, sys.d1);
    let mut samples = Vec::with_capacity(p.n * sys.d1);
    let ex = run_frozen(sys, y, x_init, p.dt, total, &mut noise, |n, x| {
        if n >= burn && (n - burn).is_multiple_of(thin) {
            samples.extend_from_slice(x);
        }
    })?;
    if let Some(step) = ex {
        return Err(Error::Explosion {
            step,
            context: format!(
                "invariant sampling at y = {y:?}, dt = {}, after {} samples",
                p.dt,
                samples.len() / sys.d1
            ),
        });
    }
    Ok(EmpiricalMeasure {
        y_anchor: y.to_vec(),
        d1: sys.d1,
        samples,
        params: *p,
    })
}

/// Samples started from the system's `x0`.
pub fn sample_invariant(
    sys: &MultiscaleSystem,
    y: &[f64],
    params: &SamplerParams,
) -> Result<EmpiricalMeasure> {
    sample_invariant_from(sys, y, &sys.x0, params)
}

impl EmpiricalMeasure {
    pub fn len(&self) -> usize {
        self.samples.len() / self.d1
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.d1..(i + 1) * self.d1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks(self.d1)
    }

    /// The first `n` samples.
    pub fn truncated(&self, n: usize) -> EmpiricalMeasure {
        let n = n.min(self.len());
        EmpiricalMeasure {
            samples: self.samples[..n * self.d1].to_vec(),
            params: SamplerParams { n, ..self.params },
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let header: Vec<String> = (0..self.d1).map(|i| format!("x{i}")).collect();
        wr.write_record(&header).map_err(crate::sde::csv_err)?;
        for s in self.iter() {
            wr.write_record(s.iter().map(|v| fmt17(*v)))
                .map_err(crate::sde::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Sample mean of `g(t, x_i, y)` over the measure's samples.
pub fn ergodic_average(g: &dyn PointFn, measure: &EmpiricalMeasure, t: f64, y: &[f64]) -> Result<Estimate> {
    let k = g.dim();
    let mut rows = vec![0.0; measure.len() * k];
    for (row, x) in rows.chunks_mut(k).zip(measure.iter()) {
        g.eval(t, x, y, row)?;
    }
    let bad = rows.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(Error::NonFinite {
            what: format!("the averaged function at y = {y:?}"),
            count: bad,
        });
    }
    Ok(mean_stderr(&rows, k))
}

/// `g` minus its ergodic average, plus the subtracted constant.
pub struct Centered {
    pub f: Shifted,
    pub residual: Estimate,
}

pub fn center(g: SharedPointFn, measure: &EmpiricalMeasure, t: f64, y: &[f64]) -> Result<Centered> {
    let residual = ergodic_average(g.as_ref(), measure, t, y)?;
    Ok(Centered {
        f: Shifted {
            inner: g,
            shift: residual.value.clone(),
        },
        residual,
    })
}

/// Tolerance for accepting `|mean f| ` as zero.
pub fn centering_tolerance(stderr: f64) -> f64 {
    0.05f64.max(3.0 * stderr)
}

/// Fails with a centering violation if `f` is not centered at `(t, y)`.
pub fn check_centered(
    f: &dyn PointFn,
    measure: &EmpiricalMeasure,
    t: f64,
    y: &[f64],
    level: &str,
) -> Result<Estimate> {
    let est = ergodic_average(f, measure, t, y)?;
    for (v, se) in est.value.iter().zip(&est.stderr) {
        let tol = centering_tolerance(*se);
        if v.abs() > tol {
            return Err(Error::CenteringViolation {
                level: level.to_string(),
                residual: *v,
                tol,
            });
        }
    }
    Ok(est)
}

pub(crate) fn shared<F: PointFn + 'static>(f: F) -> SharedPointFn {
    Arc::new(f)
}
