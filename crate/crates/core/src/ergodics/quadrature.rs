//! Deterministic 1-D cell-problem solver used as an oracle for the
//! Feynman-Kac estimator.
//!
//! With `a = sigma^2 / 2`, `phi(x) = int_0^x b/a` and speed density
//! `m = exp(phi) / a`, the equation `a u'' + b u' = -f` has zero-flux
//! solution `exp(phi(x)) u'(x) = -int_{-R}^x f m`. The result is shifted to
//! have mean zero under `m`.

use super::poisson::PoissonProblem;
use crate::error::{Error, Result};

fn interp(grid: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = grid.len();
    let h = grid[1] - grid[0];
    let s = ((x - grid[0]) / h).clamp(0.0, (n - 2) as f64);
    let i = s.floor() as usize;
    let i = i.min(n - 2);
    let w = (x - grid[i]) / h;
    vals[i] * (1.0 - w) + vals[i + 1] * w
}

/// Solves on `[-r, r]` with `m` intervals and interpolates at each query point.
pub fn solve_poisson_quadrature_1d(
    problem: &PoissonProblem<'_>,
    x_query: &[f64],
    r: f64,
    m: usize,
) -> Result<Vec<f64>> {
    let sys = problem.system;
    if sys.d1 != 1 {
        return Err(Error::Validation(format!(
            "the quadrature solver needs d1 = 1, got d1 = {}",
            sys.d1
        )));
    }
    if problem.dim() != 1 {
        return Err(Error::Validation(
            "the quadrature solver needs a scalar rhs".into(),
        ));
    }
    if !(r > 0.0) || m < 4 {
        return Err(Error::Validation(format!(
            "invalid domain R = {r} or mesh m = {m}"
        )));
    }
    let y = &problem.y;
    let h = 2.0 * r / m as f64;
    let xs: Vec<f64> = (0..=m).map(|i| -r + i as f64 * h).collect();
    let n = xs.len();
    let mut a = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut buf = [0.0];
    for i in 0..n {
        let x = [xs[i]];
        sys.eval_sigma(&x, y, &mut buf)?;
        a[i] = 0.5 * buf[0] * buf[0];
        if !(a[i] > 0.0) {
            return Err(Error::Validation(format!(
                "degenerate diffusion at x = {}: sigma^2/2 = {}",
                xs[i], a[i]
            )));
        }
        sys.eval_b(&x, y, &mut buf)?;
        drift[i] = buf[0];
        problem.rhs.eval(problem.t, &x, y, &mut buf)?;
        f[i] = buf[0];
    }

    // phi by cumulative trapezoid; only differences matter
    let mut phi = vec![0.0; n];
    for i in 1..n {
        phi[i] = phi[i - 1] + 0.5 * h * (drift[i - 1] / a[i - 1] + drift[i] / a[i]);
    }
    let (top, phi_max) =
        phi.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        );
    let dens: Vec<f64> = (0..n).map(|i| (phi[i] - phi_max).exp() / a[i]).collect();
    let wts: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect();
    let mass: f64 = dens.iter().zip(&wts).map(|(d, w)| d * w).sum();
    let mean_f: f64 = (0..n).map(|i| wts[i] * dens[i] * f[i]).sum::<f64>() / mass;
    for v in f.iter_mut() {
        *v -= mean_f;
    }

    // u' = -I on the left of the density peak, +J on the right; both
    // recurrences only ever multiply by exp(negative).
    let mut du = vec![0.0; n];
    let g = |i: usize| f[i] / a[i];
    let mut acc = 0.0;
    for i in 1..=top {
        let decay = (phi[i - 1] - phi[i]).exp();
        acc = acc * decay + 0.5 * h * (g(i - 1) * decay + g(i));
        du[i] = -acc;
    }
    let mut acc = 0.0;
    for i in (top..n - 1).rev() {
        let decay = (phi[i + 1] - phi[i]).exp();
        acc = acc * decay + 0.5 * h * (g(i + 1) * decay + g(i));
        if i > top {
            du[i] = acc;
        } else {
            // average the two one-sided values at the peak
            du[i] = 0.5 * (du[i] + acc);
        }
    }

    let mut u = vec![0.0; n];
    for i in 1..n {
        u[i] = u[i - 1] + 0.5 * h * (du[i - 1] + du[i]);
    }
    let mean_u: f64 = (0..n).map(|i| wts[i] * dens[i] * u[i]).sum::<f64>() / mass;
    for v in u.iter_mut() {
        *v -= mean_u;
    }
    Ok(x_query.iter().map(|&x| interp(&xs, &u, x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{ArgSignature, CoefficientField};
    use crate::ergodics::{shared, SharedPointFn, Zero};
    use crate::model::SystemSpec;

    fn expr(s: &str) -> SharedPointFn {
        shared(CoefficientField::parse("f", 1, 1, &[s], ArgSignature::TXY).unwrap())
    }

    #[test]
    fn closed_forms() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let q = [-1.0, 0.0, 1.0, 2.0];
        let pb = PoissonProblem::assume_centered(&sys, expr("x1"), 0.0, &[0.0]);
        let u = solve_poisson_quadrature_1d(&pb, &q, 8.0, 4000).unwrap();
        for (x, v) in q.iter().zip(&u) {
            assert!((v - x).abs() < 1e-4, "u({x}) = {v}");
        }
        let pb = PoissonProblem::assume_centered(&sys, expr("x1^2 - 1"), 0.0, &[0.0]);
        let u = solve_poisson_quadrature_1d(&pb, &q, 8.0, 4000).unwrap();
        for (x, v) in q.iter().zip(&u) {
            assert!((v - (x * x - 1.0) / 2.0).abs() < 1e-4, "u({x}) = {v}");
        }
        let pb = PoissonProblem::assume_centered(&sys, shared(Zero(1)), 0.0, &[0.0]);
        let u = solve_poisson_quadrature_1d(&pb, &q, 8.0, 4000).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn non_gaussian_density() {
        // b = -x^3, sigma = sqrt(2): f = x gives u' = exp(x^4/4) int_x^inf z exp(-z^4/4) dz
        let sys = SystemSpec::scalar("-x1^3", "1.4142135623730951", "0", "1")
            .build()
            .unwrap();
        let pb = PoissonProblem::assume_centered(&sys, expr("x1"), 0.0, &[0.0]);
        let u = solve_poisson_quadrature_1d(&pb, &[-0.5, 0.5], 6.0, 6000).unwrap();
        assert!((u[0] + u[1]).abs() < 1e-6, "odd symmetry {u:?}");
        // L0 u = -f checked by finite differences at x = 0.5
        let h = 1e-2;
        let v = solve_poisson_quadrature_1d(&pb, &[0.5 - h, 0.5, 0.5 + h], 6.0, 6000).unwrap();
        let (d1, d2) = ((v[2] - v[0]) / (2.0 * h), (v[2] - 2.0 * v[1] + v[0]) / (h * h));
        let lhs = d2 - 0.125 * d1;
        assert!((lhs + 0.5).abs() < 1e-2, "{lhs}");
    }

    #[test]
    fn rejects_multidimensional() {
        let spec = crate::model::SystemSpec {
            d1: 2,
            d2: 1,
            b: vec!["-x1".into(), "-x2".into()],
            sigma: vec!["1".into(), "0".into(), "0".into(), "1".into()],
            f: vec!["0".into()],
            g: vec!["1".into()],
            x0: vec![0.0, 0.0],
            y0: vec![0.0],
            ..Default::default()
        };
        let sys = spec.build().unwrap();
        let f = shared(CoefficientField::parse("f", 1, 1, &["x1"], ArgSignature::TXY).unwrap());
        let pb = PoissonProblem::assume_centered(&sys, f, 0.0, &[0.0]);
        assert!(solve_poisson_quadrature_1d(&pb, &[0.0], 8.0, 100).is_err());
    }
}
