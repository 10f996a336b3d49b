use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::CVector;

/// Relative residual below which a vector is treated as inside the span.
const RESIDUAL_TOL: f64 = 1e-10;

/// Orthonormal basis B of beamformers already locked onto other RAAs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeflationBasis {
    columns: Vec<CVector>,
}

impl DeflationBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[CVector] {
        &self.columns
    }

    /// Adds `v` after orthogonalizing it against the current columns.
    /// Returns false if `v` is already (numerically) in the span.
    pub fn push(&mut self, v: &CVector) -> Result<bool> {
        if let Some(first) = self.columns.first() {
            if first.len() != v.len() {
                return Err(Error::LengthMismatch { expected: first.len(), got: v.len() });
            }
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(false);
        }
        // Two Gram-Schmidt passes keep the basis orthonormal to rounding.
        let r = self.project(&self.project(v));
        let rn = r.norm();
        if rn <= RESIDUAL_TOL * norm {
            return Ok(false);
        }
        self.columns.push(r / Complex64::new(rn, 0.0));
        Ok(true)
    }

    /// (I − BBᴴ)·v
    pub fn project(&self, v: &CVector) -> CVector {
        let mut out = v.clone();
        for b in &self.columns {
            let c = b.dotc(&out);
            out.axpy(-c, b, Complex64::new(1.0, 0.0));
        }
        out
    }

    /// ‖Bᴴx‖ / ‖x‖: how much of `x` still points into the span.
    pub fn leakage(&self, x: &CVector) -> f64 {
        let n = x.norm();
        if n == 0.0 || self.columns.is_empty() {
            return 0.0;
        }
        self.columns.iter().map(|b| b.dotc(x).norm_sqr()).sum::<f64>().sqrt() / n
    }
}

/// Normalized update x = y*/‖y‖.
pub fn step_update(y: &CVector) -> Result<CVector> {
    let n = y.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NoReceivedSignal);
    }
    Ok(y.map(|e| e.conj() / n))
}

/// Deflated update x = (I − BBᴴ)y* / ‖(I − BBᴴ)y*‖. Reduces to
/// [`step_update`] when the basis is empty.
pub fn deflate(y: &CVector, basis: &DeflationBasis) -> Result<CVector> {
    if basis.is_empty() {
        return step_update(y);
    }
    let n = y.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NoReceivedSignal);
    }
    let p = basis.project(&y.map(|e| e.conj()));
    let pn = p.norm();
    if pn <= RESIDUAL_TOL * n {
        return Err(Error::NoResidualSignal);
    }
    Ok(p / Complex64::new(pn, 0.0))
}
