use crate::dsl::{CoefficientField, EvalArgs};
use crate::error::Result;
use std::sync::Arc;

/// A map `(t, x, y) -> R^k`.
pub trait PointFn: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()>;
}

pub type SharedPointFn = Arc<dyn PointFn>;

impl PointFn for CoefficientField {
    fn dim(&self) -> usize {
        self.len()
    }

    fn eval(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        Ok(self.eval_into(&EvalArgs::new(t, x, y), out)?)
    }
}

/// Closure-backed point function.
pub struct PointClosure<F> {
    dim: usize,
    f: F,
}

impl<F> PointClosure<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        PointClosure { dim, f }
    }
}

impl<F> PointFn for PointClosure<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(t, x, y, out)
    }
}

/// `g - shift`, the result of centering `g` under an empirical measure.
#[derive(Clone)]
pub struct Shifted {
    pub inner: SharedPointFn,
    pub shift: Vec<f64>,
}

impl PointFn for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner.eval(t, x, y, out)?;
        for (o, s) in out.iter_mut().zip(&self.shift) {
            *o -= s;
        }
        Ok(())
    }
}

/// The zero map.
pub struct Zero(pub usize);

impl PointFn for Zero {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, _t: f64, _x: &[f64], _y: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }
}
