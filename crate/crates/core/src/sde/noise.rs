use super::path::TimeGrid;
use crate::rng::{stream, NormalStream};

/// Brownian increments for one replica, generated on demand.
///
/// Nothing is stored: increments are recomputed from `(key, stream, step)`,
/// so two consumers that ask for the same stream see identical noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBundle {
    pub key: u64,
    pub grid: TimeGrid,
    pub d1: usize,
    pub d2: usize,
    /// +1 normal, -1 antithetic, 0 noiseless.
    pub sign: f64,
}

/// Materialized increments, each `n_steps x dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseArrays {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub wtilde: Vec<f64>,
}

/// Sequential reader of one stream's increments (already scaled by sqrt(dt)).
pub struct IncrementStream {
    inner: NormalStream,
    scale: f64,
    zero: bool,
}

impl IncrementStream {
    pub fn next_into(&mut self, out: &mut [f64]) {
        if self.zero {
            out.fill(0.0);
        } else {
            self.inner.fill_scaled(self.scale, out);
        }
    }

    pub fn seek(&mut self, step: usize) {
        self.inner.seek(step as u64);
    }
}

pub fn generate_noise(grid: TimeGrid, d1: usize, d2: usize, seed: u64) -> NoiseBundle {
    NoiseBundle {
        key: seed,
        grid,
        d1,
        d2,
        sign: 1.0,
    }
}

impl NoiseBundle {
    pub fn zero(grid: TimeGrid, d1: usize, d2: usize) -> Self {
        NoiseBundle {
            sign: 0.0,
            ..generate_noise(grid, d1, d2, 0)
        }
    }

    pub fn antithetic(self) -> Self {
        NoiseBundle {
            sign: -self.sign,
            ..self
        }
    }

    fn dim_of(&self, id: u64) -> usize {
        if id == stream::W1 {
            self.d1
        } else {
            self.d2
        }
    }

    /// Reader positioned at step 0 of the given stream.
    pub fn stream(&self, id: u64) -> IncrementStream {
        IncrementStream {
            inner: NormalStream::new(self.key, id, self.dim_of(id)).antithetic(self.sign < 0.0),
            scale: self.grid.dt.sqrt(),
            zero: self.sign == 0.0,
        }
    }

    /// Increment of stream `id` over step `step`.
    pub fn increment(&self, id: u64, step: usize, out: &mut [f64]) {
        let mut s = self.stream(id);
        s.seek(step);
        s.next_into(out);
    }

    pub fn materialize(&self) -> NoiseArrays {
        let read = |id: u64| {
            let dim = self.dim_of(id);
            let mut s = self.stream(id);
            let mut out = vec![0.0; self.grid.n_steps * dim];
            for row in out.chunks_mut(dim) {
                s.next_into(row);
            }
            out
        };
        NoiseArrays {
            w1: read(stream::W1),
            w2: read(stream::W2),
            wtilde: read(stream::WTILDE),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_have_variance_dt() {
        let grid = TimeGrid::new(0.0, 0.01, 100_000).unwrap();
        let n = generate_noise(grid, 1, 1, 42).materialize();
        let m = n.w1.len() as f64;
        let mean = n.w1.iter().sum::<f64>() / m;
        let var = n.w1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        assert!(mean.abs() <= 4.0 * (0.01f64 / m).sqrt());
        assert!((0.98..=1.02).contains(&(var / 0.01)), "{}", var / 0.01);
    }

    #[test]
    fn same_seed_same_bundle() {
        let grid = TimeGrid::new(0.0, 0.1, 50).unwrap();
        let a = generate_noise(grid, 2, 3, 9).materialize();
        let b = generate_noise(grid, 2, 3, 9).materialize();
        assert_eq!(a, b);
        assert_ne!(a.w2, a.wtilde);
    }

    #[test]
    fn addressable_steps() {
        let grid = TimeGrid::new(0.0, 0.1, 50).unwrap();
        let nb = generate_noise(grid, 1, 2, 5);
        let all = nb.materialize();
        let mut v = [0.0; 2];
        nb.increment(stream::W2, 37, &mut v);
        assert_eq!(&v[..], &all.w2[74..76]);
    }
}
