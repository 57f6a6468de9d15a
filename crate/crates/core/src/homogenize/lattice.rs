use crate::error::{Error, Result};
use crate::sde::TyField;

/// Node coordinates of a tensor lattice over `(t, y_1, ..., y_d2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub t_nodes: Vec<f64>,
    pub y_axes: Vec<Vec<f64>>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn check_axis(name: &str, a: &[f64]) -> Result<()> {
    if a.is_empty() || a.windows(2).any(|w| !(w[1] > w[0])) || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "lattice axis {name} must be non-empty, finite and strictly increasing"
        )));
    }
    Ok(())
}

impl LatticeSpec {
    /// `nt` time nodes on `[0, t_max]` and `ny` nodes per y axis on `[lo_j, hi_j]`.
    pub fn uniform(t_max: f64, nt: usize, bounds: &[(f64, f64)], ny: usize) -> Result<Self> {
        let t_nodes = if nt <= 1 {
            vec![0.0]
        } else {
            linspace(0.0, t_max, nt)
        };
        let y_axes = bounds.iter().map(|&(lo, hi)| linspace(lo, hi, ny)).collect();
        let s = LatticeSpec { t_nodes, y_axes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("t", &self.t_nodes)?;
        for (j, a) in self.y_axes.iter().enumerate() {
            check_axis(&format!("y{}", j + 1), a)?;
        }
        Ok(())
    }

    pub fn d2(&self) -> usize {
        self.y_axes.len()
    }

    pub fn n_y(&self) -> usize {
        self.y_axes.iter().map(Vec::len).product()
    }

    pub fn n_nodes(&self) -> usize {
        self.t_nodes.len() * self.n_y()
    }

    /// `(t, y)` of node `idx`; y axes vary fastest, last axis fastest of all.
    pub fn node(&self, idx: usize) -> (f64, Vec<f64>) {
        let ny = self.n_y();
        let t = self.t_nodes[idx / ny];
        let mut rem = idx % ny;
        let mut y = vec![0.0; self.d2()];
        for j in (0..self.d2()).rev() {
            let n = self.y_axes[j].len();
            y[j] = self.y_axes[j][rem % n];
            rem /= n;
        }
        (t, y)
    }
}

/// Values on a lattice, multilinearly interpolated inside and linearly
/// extrapolated outside.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub spec: LatticeSpec,
    pub k: usize,
    /// `n_nodes x k`, node order as in `LatticeSpec::node`.
    pub values: Vec<f64>,
}

/// Cell index and (possibly out-of-range) weight along one axis.
#[inline]
fn locate(nodes: &[f64], v: f64) -> (usize, f64) {
    let n = nodes.len();
    if n == 1 {
        return (0, 0.0);
    }
    let i = match nodes.partition_point(|&x| x <= v) {
        0 => 0,
        p => (p - 1).min(n - 2),
    };
    (i, (v - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

impl LatticeField {
    pub fn new(spec: LatticeSpec, k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_nodes() * k {
            return Err(Error::GridMismatch(format!(
                "lattice has {} nodes x {k} values, got {}",
                spec.n_nodes(),
                values.len()
            )));
        }
        Ok(LatticeField { spec, k, values })
    }

    /// Tabulates `f` at every node.
    pub fn tabulate(
        spec: LatticeSpec,
        k: usize,
        mut f: impl FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(spec.n_nodes() * k);
        for idx in 0..spec.n_nodes() {
            let (t, y) = spec.node(idx);
            let v = f(t, &y)?;
            values.extend_from_slice(&v);
        }
        LatticeField::new(spec, k, values)
    }

    pub fn node_value(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.k..(idx + 1) * self.k]
    }

    /// Entry-wise combination of two fields on the same lattice.
    pub fn zip_with(&self, other: &LatticeField, f: impl Fn(f64, f64) -> f64) -> Result<LatticeField> {
        if self.spec != other.spec || self.k != other.k {
            return Err(Error::GridMismatch("lattice fields differ in shape".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        LatticeField::new(self.spec.clone(), self.k, values)
    }

    pub fn map(&self, k: usize, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<LatticeField> {
        let mut values = Vec::with_capacity(self.spec.n_nodes() * k);
        for idx in 0..self.spec.n_nodes() {
            values.extend(f(self.node_value(idx))?);
        }
        LatticeField::new(self.spec.clone(), k, values)
    }
}

impl TyField for LatticeField {
    fn out_dim(&self) -> usize {
        self.k
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let s = &self.spec;
        let d2 = s.d2();
        let mut cells = Vec::with_capacity(d2 + 1);
        cells.push(locate(&s.t_nodes, t));
        for (j, axis) in s.y_axes.iter().enumerate() {
            cells.push(locate(axis, y[j]));
        }
        let mut strides = vec![0usize; d2 + 1];
        let mut stride = 1;
        for j in (0..d2).rev() {
            strides[j + 1] = stride;
            stride *= s.y_axes[j].len();
        }
        strides[0] = stride;
        let sizes: Vec<usize> = std::iter::once(s.t_nodes.len())
            .chain(s.y_axes.iter().map(Vec::len))
            .collect();
        out.fill(0.0);
        for corner in 0..(1usize << (d2 + 1)) {
            let mut w = 1.0;
            let mut idx = 0;
            let mut skip = false;
            for (a, &(i, frac)) in cells.iter().enumerate() {
                let hi = (corner >> a) & 1 == 1;
                if sizes[a] == 1 {
                    if hi {
                        skip = true;
                        break;
                    }
                    idx += i * strides[a];
                    continue;
                }
                w *= if hi { frac } else { 1.0 - frac };
                idx += (i + hi as usize) * strides[a];
            }
            if skip || w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.node_value(idx)) {
                *o += w * v;
            }
        }
        Ok(())
    }
}
