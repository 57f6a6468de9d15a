use crate::error::{Error, Result};
use std::io::Write;

/// Uniform time grid `t0, t0 + dt, ..., t0 + n_steps*dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || n_steps == 0 || !t0.is_finite() {
            return Err(Error::Validation(format!(
                "invalid time grid: t0={t0}, dt={dt}, n_steps={n_steps}"
            )));
        }
        Ok(TimeGrid { t0, dt, n_steps })
    }

    /// Smallest grid on [0, horizon] whose step does not exceed `max_dt`.
    pub fn covering(horizon: f64, max_dt: f64) -> Result<Self> {
        if !(horizon > 0.0 && max_dt > 0.0) {
            return Err(Error::Validation(format!(
                "invalid horizon {horizon} or step bound {max_dt}"
            )));
        }
        let n = (horizon / max_dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        TimeGrid::new(0.0, horizon / n as f64, n)
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// `k + 1` evenly spaced grid indices from 0 to n_steps.
    pub fn checkpoints(&self, k: usize) -> Vec<usize> {
        let k = k.max(1);
        let mut out: Vec<usize> = (0..=k)
            .map(|i| ((i as f64 / k as f64) * self.n_steps as f64).round() as usize)
            .collect();
        out.dedup();
        out
    }
}

/// States on a grid, row-major `(n_steps + 1) x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub grid: TimeGrid,
    pub dim: usize,
    pub states: Vec<f64>,
    /// First step at which the state left the explosion bound; later rows are NaN.
    pub exploded_at: Option<usize>,
}

impl Path {
    pub(crate) fn with_capacity(grid: TimeGrid, dim: usize) -> Self {
        Path {
            grid,
            dim,
            states: Vec::with_capacity((grid.n_steps + 1) * dim),
            exploded_at: None,
        }
    }

    pub(crate) fn push(&mut self, state: &[f64]) {
        self.states.extend_from_slice(state);
    }

    /// Fills the rows after an explosion with NaN.
    pub(crate) fn finish(&mut self, exploded_at: Option<usize>) {
        self.exploded_at = exploded_at;
        self.states.resize((self.grid.n_steps + 1) * self.dim, f64::NAN);
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_steps + 1
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.grid.n_steps)
    }

    /// One component over all grid points.
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.n_points()).map(|n| self.state(n)[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim).map(|i| format!("dim{i}")));
        wr.write_record(&header).map_err(csv_err)?;
        for n in 0..self.n_points() {
            let mut row = vec![fmt17(self.grid.time(n))];
            row.extend(self.state(n).iter().map(|&v| fmt17(v)));
            wr.write_record(&row).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `(y_eps - ybar) / eta` pointwise.
pub fn deviation_path(y_eps: &Path, ybar: &Path, eta: f64) -> Result<Path> {
    if !(eta > 0.0) {
        return Err(Error::Validation(format!("eta must be positive, got {eta}")));
    }
    if y_eps.grid != ybar.grid || y_eps.dim != ybar.dim {
        return Err(Error::GridMismatch(format!(
            "paths differ in grid or dimension ({:?} x {} vs {:?} x {})",
            y_eps.grid, y_eps.dim, ybar.grid, ybar.dim
        )));
    }
    let states = y_eps
        .states
        .iter()
        .zip(&ybar.states)
        .map(|(a, b)| (a - b) / eta)
        .collect();
    let exploded_at = match (y_eps.exploded_at, ybar.exploded_at) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Ok(Path {
        grid: y_eps.grid,
        dim: y_eps.dim,
        states,
        exploded_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(vals: &[f64]) -> Path {
        let grid = TimeGrid::new(0.0, 0.5, vals.len() - 1).unwrap();
        Path {
            grid,
            dim: 1,
            states: vals.to_vec(),
            exploded_at: None,
        }
    }

    #[test]
    fn deviation_identities() {
        let a = path(&[0.0, 1.0, 3.0]);
        let z = deviation_path(&a, &a, 0.1).unwrap();
        assert!(z.states.iter().all(|&v| v == 0.0));
        let b = path(&[0.25, 1.25, 3.25]);
        let z = deviation_path(&b, &a, 0.25).unwrap();
        assert_eq!(z.states, vec![1.0, 1.0, 1.0]);
        let c = path(&[0.3, -1.7, 2.2]);
        let z1 = deviation_path(&c, &a, 0.2).unwrap();
        let z2 = deviation_path(&c, &a, 0.1).unwrap();
        for (u, v) in z1.states.iter().zip(&z2.states) {
            assert_eq!(2.0 * u, *v);
        }
    }

    #[test]
    fn grid_mismatch() {
        let a = path(&[0.0, 1.0, 3.0]);
        let b = path(&[0.0, 1.0]);
        assert!(matches!(deviation_path(&a, &b, 1.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn csv_round_trips() {
        let a = path(&[0.1, 1.0 / 3.0, -2.5e-300]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,dim0"));
        let vals: Vec<f64> = lines
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(vals, a.states);
    }

    #[test]
    fn covering_and_checkpoints() {
        let g = TimeGrid::covering(1.0, 1.0 / 5120.0).unwrap();
        assert_eq!(g.n_steps, 5120);
        let g = TimeGrid::covering(1.0, 0.3).unwrap();
        assert_eq!(g.n_steps, 4);
        let c = TimeGrid::new(0.0, 0.1, 160).unwrap().checkpoints(16);
        assert_eq!(c.len(), 17);
        assert_eq!((c[0], c[1], c[16]), (0, 10, 160));
    }
}
