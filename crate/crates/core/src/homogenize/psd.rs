use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// What symmetrizing and clamping did to a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClampReport {
    /// Sum of the magnitudes of clamped (negative) eigenvalues.
    pub clamped: f64,
    /// Sum of all eigenvalue magnitudes.
    pub total: f64,
    /// Frobenius norm of the antisymmetric part that was discarded.
    pub antisymmetric: f64,
}

/// Fraction of eigenvalue mass that may be clamped before failing.
pub const CLAMP_FRACTION: f64 = 0.1;

/// Principal square root of the symmetric part of `m` (row-major `d x d`),
/// with negative eigenvalues set to zero.
///
/// Fails only when the clamped mass exceeds both `CLAMP_FRACTION` of the
/// total and `abs_tol`, so pure Monte Carlo noise around zero is accepted.
pub fn psd_sqrt(m: &[f64], d: usize, abs_tol: f64) -> Result<(Vec<f64>, ClampReport)> {
    assert_eq!(m.len(), d * d);
    let a = DMatrix::from_row_slice(d, d, m);
    let sym = (&a + a.transpose()) * 0.5;
    let anti = (&a - a.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let mut rep = ClampReport {
        antisymmetric: anti.norm(),
        ..Default::default()
    };
    let mut roots = eig.eigenvalues.clone();
    for l in roots.iter_mut() {
        rep.total += l.abs();
        if *l < 0.0 {
            rep.clamped += -*l;
            *l = 0.0;
        }
        *l = l.sqrt();
    }
    if rep.clamped > CLAMP_FRACTION * rep.total && rep.clamped > abs_tol {
        return Err(Error::NotPsd {
            clamped: rep.clamped,
            total: rep.total,
        });
    }
    let q = &eig.eigenvectors;
    let root = q * DMatrix::from_diagonal(&roots) * q.transpose();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = root[(i, j)];
        }
    }
    Ok((out, rep))
}
