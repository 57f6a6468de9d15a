use crate::dsl::{CoefficientField, EvalArgs};
use crate::error::Result;
use std::sync::Arc;

/// A deterministic map `(t, y) -> R^k`, matrices flattened row-major.
pub trait TyField: Send + Sync {
    fn out_dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;

    fn eval_vec(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.out_dim()];
        self.eval(t, y, &mut out)?;
        Ok(out)
    }
}

pub type SharedField = Arc<dyn TyField>;

impl TyField for CoefficientField {
    fn out_dim(&self) -> usize {
        self.len()
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        Ok(self.eval_into(&EvalArgs::new(t, &[], y), out)?)
    }
}

/// Constant field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstField(pub Vec<f64>);

impl TyField for ConstField {
    fn out_dim(&self) -> usize {
        self.0.len()
    }

    fn eval(&self, _t: f64, _y: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.0);
        Ok(())
    }
}

/// Field backed by a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F> TyField for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    fn out_dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(t, y, out);
        Ok(())
    }
}
