//! Point estimators of averaged drifts, the effective diffusion and the
//! cross averages at a single `(t, y)`.
//!
//! Averages involving a cell-problem solution are nested Monte Carlo: for
//! each of `n_outer` invariant samples `x_j` a few Feynman-Kac pairs estimate
//! `u(x_j)` or `grad u(x_j)`. The estimator is unbiased in the inner noise, so
//! the outer standard error accounts for both levels.

use super::psd::{psd_sqrt, ClampReport};
use crate::ergodics::{
    ergodic_average, poisson_gradient_serial, shared, solve_poisson_fk_serial, EmpiricalMeasure, Estimate,
    FkParams, PointClosure, PointFn, PoissonProblem, SharedPointFn, Shifted,
};
use crate::error::{Error, Result};
use crate::model::MultiscaleSystem;
use crate::rng::derive_key;
use rayon::prelude::*;
use std::sync::Arc;

/// Monte Carlo sizes for the nested estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    /// Feynman-Kac parameters per outer sample (usually a handful of paths).
    pub fk: FkParams,
    /// Number of invariant samples used as outer points.
    pub n_outer: usize,
    /// Outer samples for the nested average (each costs a full inner solve
    /// per rhs evaluation).
    pub psi_outer: usize,
    /// Inner solver for the gradient inside the nested cell problem.
    pub nested: FkParams,
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            fk: FkParams {
                n_paths: 4,
                ..FkParams::default()
            },
            n_outer: 4000,
            psi_outer: 200,
            nested: FkParams {
                t_trunc: 5.0,
                dt: 0.02,
                n_paths: 8,
                seed: 0x6e,
                rhs_stride: 10,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossKind {
    /// average of c . grad_x Upsilon, where L0 Upsilon = -(F - Fbar1)
    CUpsilon,
    /// average of c . grad_x Phi, where L0 Phi = -H
    CPhi,
    /// average of H Phi^T
    HPhi,
    /// average of c . grad_x Psi, where L0 Psi = -(c . grad Phi - its average)
    CPsi,
}

impl CrossKind {
    pub fn name(self) -> &'static str {
        match self {
            CrossKind::CUpsilon => "c_upsilon",
            CrossKind::CPhi => "c_phi",
            CrossKind::HPhi => "h_phi",
            CrossKind::CPsi => "c_psi",
        }
    }
}

/// Everything needed to evaluate cell averages at one `(t, y)`.
#[derive(Clone, Copy)]
pub struct CellContext<'a> {
    pub system: &'a MultiscaleSystem,
    /// Samples of the frozen invariant measure at the `y` being queried.
    pub measure: &'a EmpiricalMeasure,
    pub params: CellParams,
}

/// `M = avg(Ftilde Upsilon^T)` and `zeta = sqrt(sym M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaEstimate {
    pub m: Estimate,
    pub zeta: Vec<f64>,
    pub report: ClampReport,
}

fn missing(what: &str) -> Error {
    Error::MissingComponent {
        tag: "cell average".into(),
        what: what.into(),
    }
}

/// `sum_l c_l G[i, l]` for `G` row-major `k x d1`.
fn contract(c: &[f64], grad: &[f64], k: usize) -> Vec<f64> {
    let d1 = c.len();
    (0..k)
        .map(|i| (0..d1).map(|l| c[l] * grad[i * d1 + l]).sum())
        .collect()
}

impl<'a> CellContext<'a> {
    pub fn new(system: &'a MultiscaleSystem, measure: &'a EmpiricalMeasure, params: CellParams) -> Self {
        CellContext {
            system,
            measure,
            params,
        }
    }

    fn outer_indices(&self) -> Vec<usize> {
        let n = self.measure.len();
        let m = self.params.n_outer.clamp(1, n);
        (0..m).map(|j| j * n / m).collect()
    }

    fn sample_fk(&self, j: usize) -> FkParams {
        FkParams {
            seed: derive_key(&[self.params.fk.seed, j as u64]),
            ..self.params.fk
        }
    }

    /// Parallel average over outer samples, reduced in index order.
    fn outer_average<F>(&self, k: usize, f: F) -> Result<Estimate>
    where
        F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync + Send,
    {
        let idx = self.outer_indices();
        let rows: Vec<Vec<f64>> = idx
            .par_iter()
            .enumerate()
            .map(|(j, &i)| f(j, self.measure.sample(i)))
            .collect::<Result<_>>()?;
        let flat = rows.concat();
        if let Some(bad) = flat.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("a cell average (first at outer sample {})", bad / k),
                count: flat.iter().filter(|v| !v.is_finite()).count(),
            });
        }
        Ok(crate::ergodics::mean_stderr(&flat, k))
    }

    fn f_field(&self) -> SharedPointFn {
        shared(self.system.f.clone())
    }

    fn h_field(&self) -> Result<SharedPointFn> {
        self.system
            .h
            .clone()
            .map(|h| shared(h))
            .ok_or_else(|| missing("H is absent"))
    }

    pub fn fbar1(&self, t: f64, y: &[f64]) -> Result<Estimate> {
        ergodic_average(&self.system.f, self.measure, t, y)
    }

    /// `F - Fbar1(t, y)`, centered by construction.
    fn f_tilde(&self, t: f64, y: &[f64]) -> Result<Shifted> {
        let fbar = self.fbar1(t, y)?;
        Ok(Shifted {
            inner: self.f_field(),
            shift: fbar.value,
        })
    }

    /// Cell problem with rhs H; checks that H is centered.
    fn phi_problem(&self, t: f64, y: &[f64]) -> Result<PoissonProblem<'a>> {
        PoissonProblem::new(self.system, self.h_field()?, t, y, self.measure, "H")
    }

    fn c_at(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let c = self.system.c.as_ref().ok_or_else(|| missing("c is absent"))?;
        let mut out = vec![0.0; self.system.d1];
        PointFn::eval(c, 0.0, x, y, &mut out)?;
        Ok(out)
    }

    /// `avg(c . grad u)` for the cell problem `pb`.
    fn c_grad_average(&self, pb: &PoissonProblem<'_>, y: &[f64]) -> Result<Estimate> {
        let k = pb.dim();
        self.outer_average(k, |j, x| {
            let g = poisson_gradient_serial(pb, x, &self.sample_fk(j))?;
            Ok(contract(&self.c_at(x, y)?, &g, k))
        })
    }

    /// `avg(g u^T)` for the cell problem `pb`.
    fn outer_product_average(
        &self,
        g: &dyn PointFn,
        pb: &PoissonProblem<'_>,
        t: f64,
        y: &[f64],
    ) -> Result<Estimate> {
        let k = pb.dim();
        self.outer_average(k * k, |j, x| {
            let u = solve_poisson_fk_serial(pb, x, &self.sample_fk(j))?;
            let mut gv = vec![0.0; k];
            g.eval(t, x, y, &mut gv)?;
            let mut row = vec![0.0; k * k];
            for a in 0..k {
                for b in 0..k {
                    row[a * k + b] = gv[a] * u[b];
                }
            }
            Ok(row)
        })
    }

    /// `c . grad Phi` as a deterministic function of x (fixed nested seed).
    fn c_grad_phi_fn(&self, t: f64, y: &[f64]) -> Result<SharedPointFn> {
        let sys = Arc::new(self.system.clone());
        let h = self.h_field()?;
        let c = self.system.c.clone().ok_or_else(|| missing("c is absent"))?;
        let nested = FkParams {
            rhs_stride: 1,
            ..self.params.nested
        };
        let (d1, d2) = (sys.d1, sys.d2);
        let yv = y.to_vec();
        Ok(shared(PointClosure::new(d2, move |_t, x, _y, out| {
            let pb = PoissonProblem::assume_centered(&sys, h.clone(), t, &yv);
            let g = poisson_gradient_serial(&pb, x, &nested)?;
            let mut cv = vec![0.0; d1];
            PointFn::eval(&c, 0.0, x, &yv, &mut cv)?;
            out.copy_from_slice(&contract(&cv, &g, d2));
            Ok(())
        })))
    }
}

/// `k = 1`: average of F. `k = 2`: that plus `avg(c . grad Phi)`.
pub fn averaged_drift(ctx: &CellContext<'_>, k: u8, t: f64, y: &[f64]) -> Result<Estimate> {
    let f1 = ctx.fbar1(t, y)?;
    match k {
        1 => Ok(f1),
        2 => {
            let cphi = cross_average(ctx, CrossKind::CPhi, t, y)?;
            Ok(Estimate {
                value: f1.value.iter().zip(&cphi.value).map(|(a, b)| a + b).collect(),
                stderr: f1
                    .stderr
                    .iter()
                    .zip(&cphi.stderr)
                    .map(|(a, b)| a.hypot(*b))
                    .collect(),
            })
        }
        _ => Err(Error::Validation(format!(
            "averaged drift index must be 1 or 2, got {k}"
        ))),
    }
}

/// Average of `Ftilde Upsilon^T` and its symmetrized, clamped square root.
pub fn effective_zeta(ctx: &CellContext<'_>, t: f64, y: &[f64]) -> Result<ZetaEstimate> {
    let ft = ctx.f_tilde(t, y)?;
    let pb = PoissonProblem::assume_centered(ctx.system, shared(ft.clone()), t, y);
    let m = ctx.outer_product_average(&ft, &pb, t, y)?;
    let d2 = ctx.system.d2;
    let (zeta, report) = psd_sqrt(&m.value, d2, 3.0 * m.max_stderr())?;
    Ok(ZetaEstimate { m, zeta, report })
}

pub fn cross_average(ctx: &CellContext<'_>, kind: CrossKind, t: f64, y: &[f64]) -> Result<Estimate> {
    match kind {
        CrossKind::CUpsilon => {
            let ft = ctx.f_tilde(t, y)?;
            let pb = PoissonProblem::assume_centered(ctx.system, shared(ft), t, y);
            ctx.c_grad_average(&pb, y)
        }
        CrossKind::CPhi => {
            let pb = ctx.phi_problem(t, y)?;
            ctx.c_grad_average(&pb, y)
        }
        CrossKind::HPhi => {
            let pb = ctx.phi_problem(t, y)?;
            let h = ctx.h_field()?;
            ctx.outer_product_average(h.as_ref(), &pb, t, y)
        }
        CrossKind::CPsi => {
            ctx.phi_problem(t, y)?;
            let g = ctx.c_grad_phi_fn(t, y)?;
            let strided = CellContext {
                params: CellParams {
                    fk: FkParams {
                        rhs_stride: ctx.params.nested.rhs_stride,
                        ..ctx.params.fk
                    },
                    n_outer: ctx.params.psi_outer,
                    ..ctx.params
                },
                ..*ctx
            };
            let gbar = strided.outer_average(ctx.system.d2, |_, x| {
                let mut v = vec![0.0; ctx.system.d2];
                g.eval(t, x, y, &mut v)?;
                Ok(v)
            })?;
            let rhs = Shifted {
                inner: g,
                shift: gbar.value,
            };
            let mut pb = PoissonProblem::assume_centered(ctx.system, shared(rhs), t, y);
            pb.residual = Some(Estimate {
                value: vec![0.0; ctx.system.d2],
                stderr: gbar.stderr,
            });
            strided.c_grad_average(&pb, y)
        }
    }
}

/// Central-difference y-Jacobian (`k x d2`, row-major) of a field whose
/// estimator uses the same seeds at every y, so noise cancels to first order.
pub fn grad_y_effective<F>(field: F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let d2 = y.len();
    let mut yp = y.to_vec();
    let mut cols = Vec::with_capacity(d2);
    for j in 0..d2 {
        yp[j] = y[j] + h;
        let up = field(t, &yp)?;
        yp[j] = y[j] - h;
        let um = field(t, &yp)?;
        yp[j] = y[j];
        cols.push(
            up.iter()
                .zip(&um)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let k = cols.first().map_or(0, Vec::len);
    let mut out = vec![0.0; k * d2];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..k {
            out[i * d2 + j] = col[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodics::{sample_invariant, SamplerParams};
    use crate::model::SystemSpec;

    fn measure(sys: &MultiscaleSystem, n: usize) -> EmpiricalMeasure {
        let p = SamplerParams {
            n,
            seed: 9,
            ..Default::default()
        };
        sample_invariant(sys, &[0.5], &p).unwrap()
    }

    fn small() -> CellParams {
        CellParams {
            n_outer: 600,
            ..Default::default()
        }
    }

    #[test]
    fn fbar_and_linear_cross_terms() {
        let sys = SystemSpec::ou_bench()
            .with_c(&["cos(x1)"])
            .with_h(&["x1"])
            .build()
            .unwrap();
        let m = measure(&sys, 20_000);
        let ctx = CellContext::new(&sys, &m, small());
        let f1 = averaged_drift(&ctx, 1, 0.0, &[0.5]).unwrap();
        assert!((f1.scalar() - 1.5).abs() < 0.05, "{f1:?}");
        let cphi = cross_average(&ctx, CrossKind::CPhi, 0.0, &[0.5]).unwrap();
        assert!((cphi.scalar() - (-0.5f64).exp()).abs() < 0.05, "{cphi:?}");
        let hphi = cross_average(&ctx, CrossKind::HPhi, 0.0, &[0.5]).unwrap();
        assert!((hphi.scalar() - 1.0).abs() < 0.15, "{hphi:?}");
        let f2 = averaged_drift(&ctx, 2, 0.0, &[0.5]).unwrap();
        assert!((f2.scalar() - f1.scalar() - cphi.scalar()).abs() < 1e-12);
    }

    #[test]
    fn zeta_of_x_independent_f_is_zero() {
        let sys = SystemSpec::scalar("-x1", "1.4142135623730951", "1 + y1", "1")
            .build()
            .unwrap();
        let m = measure(&sys, 500);
        let ctx = CellContext::new(&sys, &m, small());
        let z = effective_zeta(&ctx, 0.0, &[0.5]).unwrap();
        assert_eq!(z.zeta, vec![0.0]);
    }

    #[test]
    fn missing_h_is_reported() {
        let sys = SystemSpec::ou_bench().with_c(&["cos(x1)"]).build().unwrap();
        let m = measure(&sys, 100);
        let ctx = CellContext::new(&sys, &m, small());
        assert!(matches!(
            cross_average(&ctx, CrossKind::HPhi, 0.0, &[0.5]),
            Err(Error::MissingComponent { .. })
        ));
    }

    #[test]
    fn uncentered_h_is_rejected() {
        let sys = SystemSpec::ou_bench().with_h(&["x1^2"]).build().unwrap();
        let m = measure(&sys, 2000);
        let ctx = CellContext::new(&sys, &m, small());
        assert!(matches!(
            cross_average(&ctx, CrossKind::HPhi, 0.0, &[0.5]),
            Err(Error::CenteringViolation { .. })
        ));
    }

    #[test]
    fn nested_average_quadratic() {
        // Phi = Psi = (x^2 - 1)/2 so c . grad Psi = x^2
        let sys = SystemSpec::ou_bench()
            .with_c(&["x1"])
            .with_h(&["x1^2 - 1"])
            .build()
            .unwrap();
        let m = measure(&sys, 20_000);
        let mut p = small();
        p.psi_outer = 60;
        p.nested.n_paths = 4;
        p.nested.rhs_stride = 20;
        let ctx = CellContext::new(&sys, &m, p);
        let e = cross_average(&ctx, CrossKind::CPsi, 0.0, &[0.5]).unwrap();
        assert!((e.scalar() - 1.0).abs() < 0.3 + 3.0 * e.stderr[0], "{e:?}");
    }

    #[test]
    fn y_gradients() {
        let g = grad_y_effective(|_, y| Ok(vec![1.0 + y[0]]), 0.0, &[0.3], 1e-2).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9);
        let g = grad_y_effective(|_, _| Ok(vec![4.0]), 0.0, &[0.3], 1e-2).unwrap();
        assert_eq!(g, vec![0.0]);
        let g = grad_y_effective(|_, y| Ok(vec![1.0 + y[0] * y[0]]), 0.0, &[1.0], 1e-2).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9);
    }
}
