use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::CVector;
use crate::raa::PnSequence;

/// Matched-filter output u = x̄ᴴ·y* for a frozen beamformer x̄.
pub fn demodulate(beamformer: &CVector, y: &CVector) -> Result<Complex64> {
    if beamformer.len() != y.len() {
        return Err(Error::LengthMismatch { expected: beamformer.len(), got: y.len() });
    }
    Ok(beamformer.iter().zip(y.iter()).map(|(x, v)| x.conj() * v.conj()).sum())
}

/// Carrier phase of a BPSK burst, estimated from the squared symbols so the
/// data modulation drops out. Ambiguous by π.
pub fn phase_reference(symbols: &[Complex64]) -> f64 {
    let acc: Complex64 = symbols.iter().map(|u| u * u).sum();
    0.5 * acc.arg()
}

/// Hard BPSK decisions (±1) after removing `reference`.
pub fn hard_decisions(symbols: &[Complex64], reference: f64) -> Vec<f64> {
    let rot = Complex64::from_polar(1.0, -reference);
    symbols.iter().map(|u| if (u * rot).re < 0.0 { -1.0 } else { 1.0 }).collect()
}

/// Best codebook match for a demodulated burst.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdMatch {
    /// Index into the codebook.
    pub index: usize,
    /// Cyclic shift: `symbols[k]` aligns with `code[(k + lag) mod K]`.
    pub lag: usize,
    /// Normalized correlation in [−1, 1]; the sign carries the π ambiguity.
    pub score: f64,
}

/// Correlates hard decisions of `symbols` against every cyclic shift of each
/// codeword and returns the largest |score|. Earlier entries and smaller lags
/// win ties.
pub fn correlate_id(symbols: &[Complex64], codebook: &[PnSequence]) -> Result<IdMatch> {
    if codebook.is_empty() {
        return Err(Error::EmptyInput("codebook"));
    }
    if symbols.is_empty() {
        return Err(Error::EmptyInput("symbols"));
    }
    let decisions = hard_decisions(symbols, phase_reference(symbols));
    let mut best: Option<IdMatch> = None;
    for (index, code) in codebook.iter().enumerate() {
        let k = code.len();
        if symbols.len() < k {
            return Err(Error::LengthMismatch { expected: k, got: symbols.len() });
        }
        let chips = code.bipolar();
        for lag in 0..k {
            let sum: f64 = decisions.iter().enumerate().map(|(j, d)| d * chips[(j + lag) % k]).sum();
            let score = sum / decisions.len() as f64;
            if best.is_none_or(|b| score.abs() > b.score.abs() + 1e-12) {
                best = Some(IdMatch { index, lag, score });
            }
        }
    }
    Ok(best.expect("codebook is non-empty"))
}
