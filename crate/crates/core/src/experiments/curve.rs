use crate::error::{Error, Result};
use crate::sde::{csv_err, fmt17};
use std::io::Write;

/// One `eps` level of an error curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub eps: f64,
    pub error: f64,
    pub stderr: f64,
    pub exploded_fraction: f64,
}

/// Error at one checkpoint time for one `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub eps: f64,
    pub t: f64,
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    /// `strong`, `weak` or `fluct`.
    pub kind: String,
    /// Averaging class or deviation tag the curve was produced under.
    pub regime: String,
    pub q: f64,
    pub functionals: Vec<String>,
    pub points: Vec<CurvePoint>,
    /// Full checkpoint profile behind each maximum.
    pub profile: Vec<ProfilePoint>,
    /// Exponent the error is expected to decay with, if known.
    pub predicted_slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub predicted_slope: Option<f64>,
}

/// Ordinary least squares of `log2 error` on `log2 eps`, unit weights.
pub fn fit_rate(curve: &ErrorCurve) -> Result<FitResult> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { found: pts.len() });
    }
    for (i, p) in pts.iter().enumerate() {
        if !(p.error > 0.0) || !(p.eps > 0.0) {
            return Err(Error::NonPositiveError {
                index: i,
                value: p.error,
            });
        }
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.eps.log2()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.error.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Validation("all eps values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        predicted_slope: curve.predicted_slope,
    })
}

impl ErrorCurve {
    /// `eps,error,stderr,exploded_fraction`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["eps", "error", "stderr", "exploded_fraction"])
            .map_err(csv_err)?;
        for p in &self.points {
            wr.write_record([
                fmt17(p.eps),
                fmt17(p.error),
                fmt17(p.stderr),
                fmt17(p.exploded_fraction),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// `eps,t,error,stderr`
    pub fn write_profile_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["eps", "t", "error", "stderr"])
            .map_err(csv_err)?;
        for p in &self.profile {
            wr.write_record([fmt17(p.eps), fmt17(p.t), fmt17(p.error), fmt17(p.stderr)])
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

impl FitResult {
    /// `slope,intercept,r2,slope_stderr,predicted_slope`; the last is NaN when unknown.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["slope", "intercept", "r2", "slope_stderr", "predicted_slope"])
            .map_err(csv_err)?;
        wr.write_record([
            fmt17(self.slope),
            fmt17(self.intercept),
            fmt17(self.r_squared),
            fmt17(self.slope_stderr),
            fmt17(self.predicted_slope.unwrap_or(f64::NAN)),
        ])
        .map_err(csv_err)?;
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn synthetic(eps: &[f64], err: impl Fn(f64) -> f64) -> ErrorCurve {
    ErrorCurve {
        kind: "synthetic".into(),
        regime: String::new(),
        q: 1.0,
        functionals: vec![],
        points: eps
            .iter()
            .map(|&e| CurvePoint {
                eps: e,
                error: err(e),
                stderr: 0.0,
                exploded_fraction: 0.0,
            })
            .collect(),
        profile: vec![],
        predicted_slope: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (4..=8).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn exact_power_law() {
        let f = fit_rate(&synthetic(&grid(), |e| e * e)).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-10);
    }

    #[test]
    fn constant_error() {
        let f = fit_rate(&synthetic(&grid(), |_| 0.3)).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let noise = [0.01, -0.008, 0.004, -0.01, 0.006];
        let eps = grid();
        let mut c = synthetic(&eps, |e| e.powf(1.5));
        for (p, n) in c.points.iter_mut().zip(noise) {
            p.error *= 1.0 + n;
        }
        let f = fit_rate(&c).unwrap();
        assert!((1.4..=1.6).contains(&f.slope), "{f:?}");
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            fit_rate(&synthetic(&[0.1], |e| e)),
            Err(Error::InsufficientPoints { found: 1 })
        ));
        let e = fit_rate(&synthetic(&grid(), |e| if e < 0.01 { 0.0 } else { e })).unwrap_err();
        assert!(matches!(e, Error::NonPositiveError { index: 3, .. }));
    }

    #[test]
    fn csv_headers() {
        let c = synthetic(&grid(), |e| e);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("eps,error,stderr,exploded_fraction\n"));
        let mut buf = Vec::new();
        fit_rate(&c).unwrap().write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("slope,intercept,r2,slope_stderr,predicted_slope\n"));
        assert!(s.trim_end().ends_with("NaN"));
    }
}
