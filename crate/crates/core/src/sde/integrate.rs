//! Euler-Maruyama integrators. Each has a streaming form taking an observer
//! `(step, t, state...)` and a convenience form returning full paths.

use super::field::TyField;
use super::noise::NoiseBundle;
use super::path::{Path, TimeGrid};
use crate::error::{Error, Result};
use crate::homogenize::LimitSdeSpec;
use crate::model::{MultiscaleSystem, ScaleSchedule};
use crate::rng::{stream, NormalStream};

/// States with a component at or beyond this magnitude count as exploded.
pub const EXPLOSION_BOUND: f64 = 1e6;

/// The fast step must satisfy `dt <= alpha^2 * STIFFNESS_FRACTION`.
pub const STIFFNESS_FRACTION: f64 = 1.0 / 20.0;

#[inline]
pub(crate) fn exploded(v: &[f64]) -> bool {
    v.iter().any(|x| !(x.abs() < EXPLOSION_BOUND))
}

pub fn check_stiffness(dt: f64, alpha: f64) -> Result<()> {
    let limit = alpha * alpha * STIFFNESS_FRACTION;
    if dt > limit * (1.0 + 1e-9) {
        return Err(Error::Stiffness { dt, limit });
    }
    Ok(())
}

#[inline]
fn matvec_add(m: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * n..(i + 1) * n];
        let mut s = 0.0;
        for (a, b) in row.iter().zip(v) {
            s += a * b;
        }
        *o += scale * s;
    }
}

/// Streams the coupled system. Returns the explosion step, if any; the
/// observer sees step 0 and every step up to the explosion (exclusive).
pub fn run_multiscale<O>(
    sys: &MultiscaleSystem,
    sched: &ScaleSchedule,
    eps: f64,
    grid: &TimeGrid,
    noise: &NoiseBundle,
    mut obs: O,
) -> Result<Option<usize>>
where
    O: FnMut(usize, f64, &[f64], &[f64]),
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Validation(format!("eps must lie in (0,1), got {eps}")));
    }
    let alpha = sched.alpha(eps);
    check_stiffness(grid.dt, alpha)?;
    let inv_a2 = 1.0 / (alpha * alpha);
    let inv_a = 1.0 / alpha;
    let inv_b = 1.0 / sched.beta(eps);
    let inv_g = 1.0 / sched.gamma(eps);
    let (has_c, has_h) = (sys.c.is_some(), sys.h.is_some());
    let dt = grid.dt;

    let mut s = sys.scratch();
    let mut x = sys.x0.clone();
    let mut y = sys.y0.clone();
    let mut xn = x.clone();
    let mut yn = y.clone();
    let mut dw1 = vec![0.0; sys.d1];
    let mut dw2 = vec![0.0; sys.d2];
    let mut w1 = noise.stream(stream::W1);
    let mut w2 = noise.stream(stream::W2);

    obs(0, grid.time(0), &x, &y);
    for n in 0..grid.n_steps {
        let t = grid.time(n);
        sys.eval_b(&x, &y, &mut s.b)?;
        sys.eval_sigma(&x, &y, &mut s.sigma)?;
        sys.eval_f(t, &x, &y, &mut s.f)?;
        sys.eval_g(t, &y, &mut s.g)?;
        w1.next_into(&mut dw1);
        w2.next_into(&mut dw2);
        if has_c {
            sys.eval_c(&x, &y, &mut s.c)?;
        }
        if has_h {
            sys.eval_h(&x, &y, &mut s.h)?;
        }
        for i in 0..sys.d1 {
            let mut drift = s.b[i] * inv_a2;
            if has_c {
                drift += s.c[i] * inv_b;
            }
            xn[i] = x[i] + drift * dt;
        }
        matvec_add(&s.sigma, &dw1, inv_a, &mut xn);
        for i in 0..sys.d2 {
            let mut drift = s.f[i];
            if has_h {
                drift += s.h[i] * inv_g;
            }
            yn[i] = y[i] + drift * dt;
        }
        matvec_add(&s.g, &dw2, 1.0, &mut yn);
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut y, &mut yn);
        if exploded(&x) || exploded(&y) {
            return Ok(Some(n + 1));
        }
        obs(n + 1, grid.time(n + 1), &x, &y);
    }
    Ok(None)
}

pub fn simulate_multiscale(
    sys: &MultiscaleSystem,
    sched: &ScaleSchedule,
    eps: f64,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<(Path, Path)> {
    let mut px = Path::with_capacity(*grid, sys.d1);
    let mut py = Path::with_capacity(*grid, sys.d2);
    let ex = run_multiscale(sys, sched, eps, grid, noise, |_, _, x, y| {
        px.push(x);
        py.push(y);
    })?;
    px.finish(ex);
    py.finish(ex);
    Ok((px, py))
}

/// Streams the frozen fast process `dX = b(X,y) dt + sigma(X,y) dW` with `y` fixed.
/// `noise` must yield unscaled standard normals of dimension d1.
pub fn run_frozen<O>(
    sys: &MultiscaleSystem,
    y: &[f64],
    x_init: &[f64],
    dt: f64,
    n_steps: usize,
    noise: &mut NormalStream,
    mut obs: O,
) -> Result<Option<usize>>
where
    O: FnMut(usize, &[f64]),
{
    let d1 = sys.d1;
    let sq = dt.sqrt();
    let mut b = vec![0.0; d1];
    let mut sig = vec![0.0; d1 * d1];
    let mut xi = vec![0.0; d1];
    let mut x = x_init.to_vec();
    let mut xn = x.clone();
    obs(0, &x);
    for n in 0..n_steps {
        sys.eval_b(&x, y, &mut b)?;
        sys.eval_sigma(&x, y, &mut sig)?;
        noise.fill(&mut xi);
        for i in 0..d1 {
            xn[i] = x[i] + b[i] * dt;
        }
        matvec_add(&sig, &xi, sq, &mut xn);
        std::mem::swap(&mut x, &mut xn);
        if exploded(&x) {
            return Ok(Some(n + 1));
        }
        obs(n + 1, &x);
    }
    Ok(None)
}

pub fn simulate_frozen(
    sys: &MultiscaleSystem,
    y: &[f64],
    x_init: &[f64],
    grid: &TimeGrid,
    noise: &mut NormalStream,
) -> Result<Path> {
    let mut p = Path::with_capacity(*grid, sys.d1);
    let ex = run_frozen(sys, y, x_init, grid.dt, grid.n_steps, noise, |_, x| p.push(x))?;
    p.finish(ex);
    Ok(p)
}

/// Streams `dYbar = fbar(t, Ybar) dt + G(t, Ybar) dW2` on the W2 stream of `noise`.
pub fn run_averaged<O>(
    fbar: &dyn TyField,
    g: &dyn TyField,
    y0: &[f64],
    grid: &TimeGrid,
    noise: &NoiseBundle,
    mut obs: O,
) -> Result<Option<usize>>
where
    O: FnMut(usize, f64, &[f64]),
{
    let d2 = y0.len();
    let mut fb = vec![0.0; d2];
    let mut gm = vec![0.0; d2 * d2];
    let mut dw = vec![0.0; d2];
    let mut y = y0.to_vec();
    let mut yn = y.clone();
    let mut w2 = noise.stream(stream::W2);
    obs(0, grid.time(0), &y);
    for n in 0..grid.n_steps {
        let t = grid.time(n);
        fbar.eval(t, &y, &mut fb)?;
        g.eval(t, &y, &mut gm)?;
        w2.next_into(&mut dw);
        for i in 0..d2 {
            yn[i] = y[i] + fb[i] * grid.dt;
        }
        matvec_add(&gm, &dw, 1.0, &mut yn);
        std::mem::swap(&mut y, &mut yn);
        if exploded(&y) {
            return Ok(Some(n + 1));
        }
        obs(n + 1, grid.time(n + 1), &y);
    }
    Ok(None)
}

pub fn simulate_averaged(
    fbar: &dyn TyField,
    g: &dyn TyField,
    y0: &[f64],
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Path> {
    let mut p = Path::with_capacity(*grid, y0.len());
    let ex = run_averaged(fbar, g, y0, grid, noise, |_, _, y| p.push(y))?;
    p.finish(ex);
    Ok(p)
}

/// Work buffers for one limit-deviation step.
struct LimitStepper<'a> {
    spec: &'a LimitSdeSpec,
    a: Vec<f64>,
    gm: Vec<f64>,
    drift: Vec<f64>,
    sig: Vec<f64>,
    dwt: Vec<f64>,
    zn: Vec<f64>,
}

impl<'a> LimitStepper<'a> {
    fn new(spec: &'a LimitSdeSpec) -> Self {
        let d2 = spec.d2;
        LimitStepper {
            spec,
            a: vec![0.0; d2 * d2],
            gm: vec![0.0; d2 * d2],
            drift: vec![0.0; d2],
            sig: vec![0.0; d2 * d2],
            dwt: vec![0.0; d2],
            zn: vec![0.0; d2],
        }
    }

    /// Advances `z` in place given Ybar at the step start and the W2 increment.
    fn step(
        &mut self,
        t: f64,
        ybar: &[f64],
        z: &mut [f64],
        dw2: &[f64],
        wt: &mut super::noise::IncrementStream,
        dt: f64,
    ) -> Result<()> {
        let spec = self.spec;
        self.zn.copy_from_slice(z);
        spec.grad_fbar.eval(t, ybar, &mut self.a)?;
        matvec_add(&self.a, z, dt, &mut self.zn);
        for (m, gfield) in spec.grad_g.iter().enumerate() {
            if z[m] == 0.0 {
                continue;
            }
            gfield.eval(t, ybar, &mut self.gm)?;
            matvec_add(&self.gm, dw2, z[m], &mut self.zn);
        }
        if let Some(d) = &spec.drift_extra {
            d.eval(t, ybar, &mut self.drift)?;
            for (o, v) in self.zn.iter_mut().zip(&self.drift) {
                *o += v * dt;
            }
        }
        wt.next_into(&mut self.dwt);
        if let Some(s) = &spec.sigma_extra {
            s.eval(t, ybar, &mut self.sig)?;
            matvec_add(&self.sig, &self.dwt, 1.0, &mut self.zn);
        }
        z.copy_from_slice(&self.zn);
        Ok(())
    }
}

/// Streams Ybar and the limit deviation process together, sharing W2 with
/// the averaged equation and drawing the extra noise from WTILDE.
pub fn run_averaged_with_limit<O>(
    fbar: &dyn TyField,
    g: &dyn TyField,
    spec: &LimitSdeSpec,
    y0: &[f64],
    grid: &TimeGrid,
    noise: &NoiseBundle,
    mut obs: O,
) -> Result<Option<usize>>
where
    O: FnMut(usize, f64, &[f64], &[f64]),
{
    let d2 = y0.len();
    let mut fb = vec![0.0; d2];
    let mut gm = vec![0.0; d2 * d2];
    let mut dw = vec![0.0; d2];
    let mut y = y0.to_vec();
    let mut yn = y.clone();
    let mut z = vec![0.0; d2];
    let mut w2 = noise.stream(stream::W2);
    let mut wt = noise.stream(stream::WTILDE);
    let mut stepper = LimitStepper::new(spec);
    obs(0, grid.time(0), &y, &z);
    for n in 0..grid.n_steps {
        let t = grid.time(n);
        fbar.eval(t, &y, &mut fb)?;
        g.eval(t, &y, &mut gm)?;
        w2.next_into(&mut dw);
        for i in 0..d2 {
            yn[i] = y[i] + fb[i] * grid.dt;
        }
        matvec_add(&gm, &dw, 1.0, &mut yn);
        stepper.step(t, &y, &mut z, &dw, &mut wt, grid.dt)?;
        std::mem::swap(&mut y, &mut yn);
        if exploded(&y) || exploded(&z) {
            return Ok(Some(n + 1));
        }
        obs(n + 1, grid.time(n + 1), &y, &z);
    }
    Ok(None)
}

/// Integrates the limit deviation equation along a given Ybar path.
pub fn simulate_limit_deviation(spec: &LimitSdeSpec, ybar: &Path, noise: &NoiseBundle) -> Result<Path> {
    let grid = ybar.grid;
    if ybar.dim != spec.d2 || noise.grid != grid {
        return Err(Error::GridMismatch(
            "Ybar path, noise bundle and limit spec must share grid and dimension".into(),
        ));
    }
    let d2 = spec.d2;
    let mut p = Path::with_capacity(grid, d2);
    let mut z = vec![0.0; d2];
    let mut dw = vec![0.0; d2];
    let mut w2 = noise.stream(stream::W2);
    let mut wt = noise.stream(stream::WTILDE);
    let mut stepper = LimitStepper::new(spec);
    p.push(&z);
    let last = ybar.exploded_at.map_or(grid.n_steps, |e| e.saturating_sub(1));
    let mut ex = ybar.exploded_at;
    for n in 0..last {
        w2.next_into(&mut dw);
        stepper.step(grid.time(n), ybar.state(n), &mut z, &dw, &mut wt, grid.dt)?;
        if exploded(&z) {
            ex = Some(n + 1);
            break;
        }
        p.push(&z);
    }
    p.finish(ex);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemSpec;
    use crate::sde::{generate_noise, ConstField, FnField};
    use std::sync::Arc;

    fn zero_spec(d2: usize) -> LimitSdeSpec {
        LimitSdeSpec::from_parts(
            crate::model::DevTag::R0_3,
            d2,
            Arc::new(ConstField(vec![0.0; d2 * d2])),
            vec![],
            Some(Arc::new(ConstField(vec![0.0; d2]))),
            Some(Arc::new(ConstField(vec![0.0; d2 * d2]))),
        )
    }

    #[test]
    fn zero_coefficients_give_constant_paths() {
        let sys = SystemSpec::scalar("0", "0", "0", "0")
            .with_initial(&[0.3], &[-1.2])
            .build()
            .unwrap();
        let sch = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let eps = 0.25;
        let grid = TimeGrid::covering(1.0, eps * eps / 20.0).unwrap();
        let (px, py) = simulate_multiscale(&sys, &sch, eps, &grid, &generate_noise(grid, 1, 1, 3)).unwrap();
        assert!(px.states.iter().all(|&v| v == 0.3));
        assert!(py.states.iter().all(|&v| v == -1.2));
    }

    #[test]
    fn stiffness_is_enforced() {
        let sys = SystemSpec::ou_bench().build().unwrap();
        let sch = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 10).unwrap();
        let err = simulate_multiscale(&sys, &sch, 0.25, &grid, &generate_noise(grid, 1, 1, 0)).unwrap_err();
        assert!(matches!(err, Error::Stiffness { .. }));
    }

    #[test]
    fn explosion_is_flagged() {
        let sys = SystemSpec::scalar("x1", "0", "0", "0")
            .with_initial(&[1.0], &[0.0])
            .build()
            .unwrap();
        let mut ns = NormalStream::new(1, stream::FROZEN, 1);
        let grid = TimeGrid::new(0.0, 0.1, 2000).unwrap();
        let p = simulate_frozen(&sys, &[0.0], &[1.0], &grid, &mut ns).unwrap();
        let e = p.exploded_at.unwrap();
        assert!(p.state(e - 1)[0].abs() < EXPLOSION_BOUND);
        assert!(p.state(e)[0].is_nan());
        assert!(p.last()[0].is_nan());
    }

    #[test]
    fn deterministic_contraction() {
        let sys = SystemSpec::scalar("-x1", "0", "0", "0").build().unwrap();
        let mut ns = NormalStream::new(1, stream::FROZEN, 1);
        let grid = TimeGrid::new(0.0, 1e-3, 1000).unwrap();
        let p = simulate_frozen(&sys, &[0.0], &[2.0], &grid, &mut ns).unwrap();
        assert!((p.last()[0] - 2.0 * (-1.0f64).exp()).abs() < 2.0 * 1e-3);
    }

    #[test]
    fn pure_brownian_averaged() {
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let nb = generate_noise(grid, 1, 1, 77);
        let p =
            simulate_averaged(&ConstField(vec![0.0]), &ConstField(vec![1.0]), &[0.5], &grid, &nb).unwrap();
        let sum: f64 = nb.materialize().w2.iter().sum();
        assert!((p.last()[0] - 0.5 - sum).abs() < 1e-12);
        let z = simulate_averaged(
            &ConstField(vec![1.0]),
            &ConstField(vec![1.0]),
            &[0.5],
            &grid,
            &NoiseBundle::zero(grid, 1, 1),
        )
        .unwrap();
        for n in 0..=100 {
            assert!((z.state(n)[0] - 0.5 - grid.time(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_slow_path_matches_averaged() {
        let sys = SystemSpec::scalar("-x1", "1.4142135623730951", "1 + y1", "1")
            .build()
            .unwrap();
        let sch = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let eps = 0.25;
        let grid = TimeGrid::covering(1.0, eps * eps / 20.0).unwrap();
        let nb = generate_noise(grid, 1, 1, 11);
        let (_, py) = simulate_multiscale(&sys, &sch, eps, &grid, &nb).unwrap();
        let fbar = FnField::new(1, |_, y: &[f64], o: &mut [f64]| o[0] = 1.0 + y[0]);
        let yb = simulate_averaged(&fbar, &ConstField(vec![1.0]), &[0.0], &grid, &nb).unwrap();
        assert_eq!(py.states, yb.states);
    }

    #[test]
    fn limit_zero_and_constant_drift() {
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let nb = generate_noise(grid, 1, 1, 5);
        let yb =
            simulate_averaged(&ConstField(vec![0.0]), &ConstField(vec![1.0]), &[0.0], &grid, &nb).unwrap();
        let z = simulate_limit_deviation(&zero_spec(1), &yb, &nb).unwrap();
        assert!(z.states.iter().all(|&v| v == 0.0));
        let mut spec = zero_spec(1);
        spec.drift_extra = Some(Arc::new(ConstField(vec![0.7])));
        let z = simulate_limit_deviation(&spec, &yb, &nb).unwrap();
        for n in 0..=100 {
            assert!((z.state(n)[0] - 0.7 * grid.time(n)).abs() < 1e-12);
        }
    }
}
