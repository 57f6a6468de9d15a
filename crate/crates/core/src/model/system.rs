use crate::dsl::{ArgSignature, CoefficientField, EvalArgs, Var};
use crate::error::{Error, Result};

/// The coefficient sextuple of a three-scale fast-slow system.
///
/// ```text
/// dX = (b/alpha^2 + c/beta) dt + (sigma/alpha) dW1
/// dY = (F + H/gamma) dt + G dW2
/// ```
#[derive(Debug, Clone)]
pub struct MultiscaleSystem {
    pub d1: usize,
    pub d2: usize,
    pub b: CoefficientField,
    pub c: Option<CoefficientField>,
    pub sigma: CoefficientField,
    pub f: CoefficientField,
    pub h: Option<CoefficientField>,
    pub g: CoefficientField,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

/// Expression strings for building a system; matrices are row-major.
#[derive(Debug, Clone, Default)]
pub struct SystemSpec {
    pub d1: usize,
    pub d2: usize,
    pub b: Vec<String>,
    pub c: Option<Vec<String>>,
    pub sigma: Vec<String>,
    pub f: Vec<String>,
    pub h: Option<Vec<String>>,
    pub g: Vec<String>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl SystemSpec {
    /// One-dimensional system from scalar expressions.
    pub fn scalar(b: &str, sigma: &str, f: &str, g: &str) -> Self {
        SystemSpec {
            d1: 1,
            d2: 1,
            b: strings(&[b]),
            c: None,
            sigma: strings(&[sigma]),
            f: strings(&[f]),
            h: None,
            g: strings(&[g]),
            x0: vec![0.0],
            y0: vec![0.0],
        }
    }

    pub fn with_c(mut self, c: &[&str]) -> Self {
        self.c = Some(strings(c));
        self
    }

    pub fn with_h(mut self, h: &[&str]) -> Self {
        self.h = Some(strings(h));
        self
    }

    pub fn with_initial(mut self, x0: &[f64], y0: &[f64]) -> Self {
        self.x0 = x0.to_vec();
        self.y0 = y0.to_vec();
        self
    }

    /// `b = -x, sigma = sqrt(2), F = x^2 + y, G = 1`, invariant measure N(0,1).
    pub fn ou_bench() -> Self {
        Self::scalar("-x1", "1.4142135623730951", "x1^2 + y1", "1")
    }

    pub fn build(&self) -> Result<MultiscaleSystem> {
        let (d1, d2) = (self.d1, self.d2);
        if d1 == 0 || d2 == 0 {
            return Err(Error::Validation(format!(
                "dimensions must be positive, got d1={d1}, d2={d2}"
            )));
        }
        let field = |name: &str, rows: usize, cols: usize, t: &[String], sig: ArgSignature| {
            let f = CoefficientField::parse(name, rows, cols, t, sig)?;
            f.validate(d1, d2)?;
            Ok::<_, Error>(f)
        };
        let b = field("b", d1, 1, &self.b, ArgSignature::XY)?;
        let c = match &self.c {
            Some(t) => Some(field("c", d1, 1, t, ArgSignature::XY)?),
            None => None,
        };
        let sigma = field("sigma", d1, d1, &self.sigma, ArgSignature::XY)?;
        let f = field("F", d2, 1, &self.f, ArgSignature::TXY)?;
        let h = match &self.h {
            Some(t) => Some(field("H", d2, 1, t, ArgSignature::XY)?),
            None => None,
        };
        let g = field("G", d2, d2, &self.g, ArgSignature::TY)?;
        if self.x0.len() != d1 || self.y0.len() != d2 {
            return Err(Error::Validation(format!(
                "initial point has dimensions ({}, {}), expected ({d1}, {d2})",
                self.x0.len(),
                self.y0.len()
            )));
        }
        if self.x0.iter().chain(&self.y0).any(|v| !v.is_finite()) {
            return Err(Error::Validation("initial point must be finite".into()));
        }
        Ok(MultiscaleSystem {
            d1,
            d2,
            b,
            c,
            sigma,
            f,
            h,
            g,
            x0: self.x0.clone(),
            y0: self.y0.clone(),
        })
    }
}

impl MultiscaleSystem {
    pub fn c_present(&self) -> bool {
        self.c.as_ref().is_some_and(|c| !c.is_zero())
    }

    pub fn h_present(&self) -> bool {
        self.h.as_ref().is_some_and(|h| !h.is_zero())
    }

    /// True when b and sigma ignore y, so the frozen law is the same for all y.
    pub fn fast_law_independent_of_y(&self) -> bool {
        !self.b.depends_on_y() && !self.sigma.depends_on_y()
    }

    /// d_{y_m} G as d2 fields, one per m.
    pub fn grad_y_g(&self) -> Vec<CoefficientField> {
        (0..self.d2).map(|m| self.g.differentiate(Var::Y(m))).collect()
    }

    /// Fresh scratch buffers sized for this system.
    pub fn scratch(&self) -> Scratch {
        Scratch {
            b: vec![0.0; self.d1],
            c: vec![0.0; self.d1],
            sigma: vec![0.0; self.d1 * self.d1],
            f: vec![0.0; self.d2],
            h: vec![0.0; self.d2],
            g: vec![0.0; self.d2 * self.d2],
        }
    }

    pub fn eval_b(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        Ok(self.b.eval_into(&EvalArgs::new(0.0, x, y), out)?)
    }

    pub fn eval_sigma(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        Ok(self.sigma.eval_into(&EvalArgs::new(0.0, x, y), out)?)
    }

    pub fn eval_f(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        Ok(self.f.eval_into(&EvalArgs::new(t, x, y), out)?)
    }

    pub fn eval_g(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        Ok(self.g.eval_into(&EvalArgs::new(t, &[], y), out)?)
    }

    /// Writes c(x,y), or zeros if c is absent.
    pub fn eval_c(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.c {
            Some(c) => Ok(c.eval_into(&EvalArgs::new(0.0, x, y), out)?),
            None => {
                out.fill(0.0);
                Ok(())
            }
        }
    }

    /// Writes H(x,y), or zeros if H is absent.
    pub fn eval_h(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.h {
            Some(h) => Ok(h.eval_into(&EvalArgs::new(0.0, x, y), out)?),
            None => {
                out.fill(0.0);
                Ok(())
            }
        }
    }
}

/// Per-thread evaluation buffers.
#[derive(Debug, Clone)]
pub struct Scratch {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma: Vec<f64>,
    pub f: Vec<f64>,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
}
