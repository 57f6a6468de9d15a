//! Feynman-Kac solution of the cell problem `L0 u = -f`:
//! `u(x) = int_0^inf E f(X_t^y(x)) dt`, truncated at `t_trunc`.

use super::func::SharedPointFn;
use super::measure::{check_centered, mean_stderr, EmpiricalMeasure, Estimate};
use crate::error::{Error, Result};
use crate::model::MultiscaleSystem;
use crate::rng::{derive_key, stream, NormalStream};
use crate::sde::run_frozen;
use rayon::prelude::*;

/// Minimum truncation horizon accepted by the solver.
pub const MIN_T_TRUNC: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkParams {
    pub t_trunc: f64,
    pub dt: f64,
    /// Paths per query point; run as `n_paths / 2` antithetic pairs.
    pub n_paths: usize,
    pub seed: u64,
    /// Evaluate the rhs only every `rhs_stride` steps (for expensive rhs).
    pub rhs_stride: usize,
}

impl Default for FkParams {
    fn default() -> Self {
        FkParams {
            t_trunc: 10.0,
            dt: 0.005,
            n_paths: 10_000,
            seed: 0,
            rhs_stride: 1,
        }
    }
}

impl FkParams {
    fn validate(&self) -> Result<()> {
        if !(self.t_trunc >= MIN_T_TRUNC) {
            return Err(Error::Validation(format!(
                "t_trunc must be >= {MIN_T_TRUNC}, got {}",
                self.t_trunc
            )));
        }
        if !(self.dt > 0.0) || self.n_paths == 0 || self.rhs_stride == 0 {
            return Err(Error::Validation(format!(
                "invalid Feynman-Kac parameters {self:?}"
            )));
        }
        Ok(())
    }

    pub fn pairs(&self) -> usize {
        self.n_paths.div_ceil(2)
    }

    fn n_steps(&self) -> usize {
        let s = self.rhs_stride;
        let n = (self.t_trunc / self.dt).round().max(1.0) as usize;
        n.div_ceil(s) * s
    }
}

/// Cell problem at a fixed `(t, y)`.
#[derive(Clone)]
pub struct PoissonProblem<'a> {
    pub system: &'a MultiscaleSystem,
    pub rhs: SharedPointFn,
    pub t: f64,
    pub y: Vec<f64>,
    /// Ergodic average of the rhs, when it was checked.
    pub residual: Option<Estimate>,
}

impl<'a> PoissonProblem<'a> {
    /// Checks the centering condition under `measure` first.
    pub fn new(
        system: &'a MultiscaleSystem,
        rhs: SharedPointFn,
        t: f64,
        y: &[f64],
        measure: &EmpiricalMeasure,
        level: &str,
    ) -> Result<Self> {
        let residual = check_centered(rhs.as_ref(), measure, t, y, level)?;
        Ok(PoissonProblem {
            system,
            rhs,
            t,
            y: y.to_vec(),
            residual: Some(residual),
        })
    }

    /// For right-hand sides that are centered by construction.
    pub fn assume_centered(system: &'a MultiscaleSystem, rhs: SharedPointFn, t: f64, y: &[f64]) -> Self {
        PoissonProblem {
            system,
            rhs,
            t,
            y: y.to_vec(),
            residual: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.rhs.dim()
    }

    /// Trapezoid integral of the rhs along one frozen path from `x0`, added into `acc`.
    fn integrate_path(
        &self,
        x0: &[f64],
        p: &FkParams,
        noise: &mut NormalStream,
        acc: &mut [f64],
    ) -> Result<()> {
        let k = self.dim();
        let n_steps = p.n_steps();
        let s = p.rhs_stride;
        let h = p.dt * s as f64;
        let mut fv = vec![0.0; k];
        let mut err = None;
        let ex = run_frozen(self.system, &self.y, x0, p.dt, n_steps, noise, |n, x| {
            if err.is_some() || n % s != 0 {
                return;
            }
            if let Err(e) = self.rhs.eval(self.t, x, &self.y, &mut fv) {
                err = Some(e);
                return;
            }
            let w = if n == 0 || n == n_steps { 0.5 * h } else { h };
            for (a, v) in acc.iter_mut().zip(&fv) {
                *a += w * v;
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        if let Some(step) = ex {
            return Err(Error::Explosion {
                step,
                context: format!("Feynman-Kac path from x = {x0:?} at y = {:?}", self.y),
            });
        }
        Ok(())
    }

    /// Mean of the integrals over antithetic pair `pair`.
    fn pair_integral(&self, x0: &[f64], p: &FkParams, pair: usize) -> Result<Vec<f64>> {
        let key = derive_key(&[p.seed, pair as u64]);
        let mut acc = vec![0.0; self.dim()];
        for flip in [false, true] {
            let mut noise = NormalStream::new(key, stream::FROZEN, self.system.d1).antithetic(flip);
            self.integrate_path(x0, p, &mut noise, &mut acc)?;
        }
        for a in acc.iter_mut() {
            *a *= 0.5;
        }
        Ok(acc)
    }
}

/// `u(x)` with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub t_trunc: f64,
    pub n_paths: usize,
}

/// `grad_x u(x)`, row-major `k x d1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonGradient {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub stderr: Vec<f64>,
    pub h: f64,
}

fn collect_pairs<F>(pairs: usize, parallel: bool, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let rows: Vec<Vec<f64>> = if parallel {
        (0..pairs).into_par_iter().map(&f).collect::<Result<_>>()?
    } else {
        (0..pairs).map(&f).collect::<Result<_>>()?
    };
    Ok(rows.concat())
}

pub fn solve_poisson_fk(
    problem: &PoissonProblem<'_>,
    x_query: &[f64],
    params: &FkParams,
) -> Result<PoissonSolution> {
    params.validate()?;
    let k = problem.dim();
    let rows = collect_pairs(params.pairs(), true, |p| {
        problem.pair_integral(x_query, params, p)
    })?;
    let est = mean_stderr(&rows, k);
    Ok(PoissonSolution {
        x: x_query.to_vec(),
        value: est.value,
        stderr: est.stderr,
        t_trunc: params.t_trunc,
        n_paths: 2 * params.pairs(),
    })
}

/// Default finite-difference step `1e-3 (1 + |x|)`.
pub fn default_gradient_step(x: &[f64]) -> f64 {
    1e-3 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn gradient_rows(
    problem: &PoissonProblem<'_>,
    x_query: &[f64],
    params: &FkParams,
    h: f64,
    parallel: bool,
) -> Result<Vec<f64>> {
    let d1 = problem.system.d1;
    let k = problem.dim();
    collect_pairs(params.pairs(), parallel, |p| {
        let mut row = vec![0.0; k * d1];
        let mut xp = x_query.to_vec();
        for j in 0..d1 {
            xp[j] = x_query[j] + h;
            let up = problem.pair_integral(&xp, params, p)?;
            xp[j] = x_query[j] - h;
            let um = problem.pair_integral(&xp, params, p)?;
            xp[j] = x_query[j];
            for i in 0..k {
                row[i * d1 + j] = (up[i] - um[i]) / (2.0 * h);
            }
        }
        Ok(row)
    })
}

/// Central differences of the Feynman-Kac estimate; the `+h` and `-h`
/// evaluations of each pair share their noise.
pub fn poisson_gradient(
    problem: &PoissonProblem<'_>,
    x_query: &[f64],
    h: Option<f64>,
    params: &FkParams,
) -> Result<PoissonGradient> {
    params.validate()?;
    let h = h.unwrap_or_else(|| default_gradient_step(x_query));
    let rows = gradient_rows(problem, x_query, params, h, true)?;
    let est = mean_stderr(&rows, problem.dim() * problem.system.d1);
    Ok(PoissonGradient {
        x: x_query.to_vec(),
        grad: est.value,
        stderr: est.stderr,
        h,
    })
}

/// Single-threaded gradient mean, for use inside already parallel loops.
pub(crate) fn poisson_gradient_serial(
    problem: &PoissonProblem<'_>,
    x_query: &[f64],
    params: &FkParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    let h = default_gradient_step(x_query);
    let rows = gradient_rows(problem, x_query, params, h, false)?;
    Ok(mean_stderr(&rows, problem.dim() * problem.system.d1).value)
}

/// Single-threaded value mean, for use inside already parallel loops.
pub(crate) fn solve_poisson_fk_serial(
    problem: &PoissonProblem<'_>,
    x_query: &[f64],
    params: &FkParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    let rows = collect_pairs(params.pairs(), false, |p| {
        problem.pair_integral(x_query, params, p)
    })?;
    Ok(mean_stderr(&rows, problem.dim()).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{ArgSignature, CoefficientField};
    use crate::ergodics::{shared, Zero};
    use crate::model::SystemSpec;

    fn expr(s: &str) -> SharedPointFn {
        shared(CoefficientField::parse("f", 1, 1, &[s], ArgSignature::TXY).unwrap())
    }

    fn params(n: usize) -> FkParams {
        FkParams {
            n_paths: n,
            seed: 21,
            ..Default::default()
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let pb = PoissonProblem::assume_centered(&sys, shared(Zero(1)), 0.0, &[0.0]);
        let u = solve_poisson_fk(&pb, &[1.3], &params(20)).unwrap();
        assert_eq!(u.value, vec![0.0]);
        let g = poisson_gradient(&pb, &[1.3], None, &params(20)).unwrap();
        assert_eq!(g.grad, vec![0.0]);
    }

    #[test]
    fn linear_rhs() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let pb = PoissonProblem::assume_centered(&sys, expr("x1"), 0.0, &[0.0]);
        let u = solve_poisson_fk(&pb, &[1.0], &params(200)).unwrap();
        assert!((u.value[0] - 1.0).abs() < 0.05, "{:?}", u);
        let g = poisson_gradient(&pb, &[0.0], None, &params(200)).unwrap();
        assert!((g.grad[0] - 1.0).abs() < 0.05, "{:?}", g);
    }

    #[test]
    fn quadratic_rhs() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let pb = PoissonProblem::assume_centered(&sys, expr("x1^2 - 1"), 0.0, &[0.0]);
        let u = solve_poisson_fk(&pb, &[2.0], &params(20_000)).unwrap();
        assert!((u.value[0] - 1.5).abs() < 0.1, "{:?}", u);
        let g = poisson_gradient(&pb, &[1.0], None, &params(4000)).unwrap();
        assert!((g.grad[0] - 1.0).abs() < 0.1, "{:?}", g);
    }

    #[test]
    fn short_truncation_is_rejected() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let pb = PoissonProblem::assume_centered(&sys, expr("x1"), 0.0, &[0.0]);
        let p = FkParams {
            t_trunc: 4.0,
            ..params(10)
        };
        assert!(solve_poisson_fk(&pb, &[0.0], &p).is_err());
    }
}
