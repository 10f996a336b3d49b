//! Closed-form SNR evolution of the iterative beamforming loop, link budget
//! and the speed limit for reusing the previous beamformer.
//!
//! The recursion ignores noise reflected by the RAA and treats the receiver
//! noise as the only impairment.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::geometry::{CVector, RfParams};

/// Per-direction maximum SNR λ_j²/σ_w² of the round-trip operator, sorted in
/// non-increasing order and zero-padded to the TRX element count N.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSpectrum {
    maxima: Vec<f64>,
}

impl SnrSpectrum {
    /// `maxima` lists the non-zero directions (any order); the remaining
    /// `n - maxima.len()` directions carry no signal.
    pub fn new(maxima: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return domain("N must be at least 1");
        }
        if maxima.len() > n {
            return domain(format!("{} directions exceed N = {n}", maxima.len()));
        }
        if let Some(bad) = maxima.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return domain(format!("per-direction SNR must be finite and non-negative, got {bad}"));
        }
        let mut maxima = maxima;
        maxima.sort_by(|a, b| b.total_cmp(a));
        maxima.resize(n, 0.0);
        Ok(Self { maxima })
    }

    pub fn from_db(maxima_db: &[f64], n: usize) -> Result<Self> {
        Self::new(maxima_db.iter().map(|d| db_to_linear(*d)).collect(), n)
    }

    pub fn n(&self) -> usize {
        self.maxima.len()
    }

    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    /// SNR_max/N, the expected SNR after one exchange from a random start.
    pub fn bootstrap(&self) -> f64 {
        self.maxima[0] / self.n() as f64
    }
}

/// Per-direction SNR trace produced by [`snr_recursion`].
#[derive(Debug, Clone, PartialEq)]
pub struct SnrTrace {
    /// `per_direction[k-1][j]` = SNR_j[k].
    pub per_direction: Vec<Vec<f64>>,
    /// SNR at the output of the matched filter, SNR_dec[k].
    pub decoded: Vec<f64>,
}

impl SnrTrace {
    pub fn iterations(&self) -> usize {
        self.per_direction.len()
    }

    /// SNR_j over k = 1..k_max for one direction.
    pub fn direction(&self, j: usize) -> Vec<f64> {
        self.per_direction.iter().map(|row| row[j]).collect()
    }

    /// Power fractions |x_j[k]|² of the beamformer formed after exchange k.
    pub fn fractions(&self, k: usize) -> Vec<f64> {
        let row = &self.per_direction[k - 1];
        let total: f64 = row.iter().map(|s| s + 1.0).sum();
        row.iter().map(|s| (s + 1.0) / total).collect()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Iterates SNR_j[k] = S_j (SNR_j[k−1] + 1) / (N + Σ_i SNR_i[k−1]) from
/// SNR_j[1] = S_j |x_j[0]|².
pub fn snr_recursion(spectrum: &SnrSpectrum, initial_fractions: &[f64], k_max: usize) -> Result<SnrTrace> {
    let n = spectrum.n();
    if initial_fractions.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: initial_fractions.len() });
    }
    if initial_fractions.iter().any(|f| !(*f >= 0.0)) {
        return domain("power fractions must be non-negative");
    }
    let sum: f64 = initial_fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return domain(format!("power fractions sum to {sum}, expected 1"));
    }
    if k_max == 0 {
        return domain("k_max must be at least 1");
    }
    let s = spectrum.maxima();
    let mut rows = Vec::with_capacity(k_max);
    rows.push(s.iter().zip(initial_fractions).map(|(s, f)| s * f).collect::<Vec<_>>());
    for _ in 1..k_max {
        let prev = rows.last().expect("non-empty");
        let denom = n as f64 + prev.iter().sum::<f64>();
        let next = s.iter().zip(prev).map(|(sj, p)| sj * (p + 1.0) / denom).collect();
        rows.push(next);
    }
    let decoded = rows.iter().map(|row| decoded_snr(s, row)).collect();
    Ok(SnrTrace { per_direction: rows, decoded })
}

/// (Σ_j SNR_j/√S_j)² over directions with S_j > 0.
fn decoded_snr(maxima: &[f64], snr: &[f64]) -> f64 {
    let acc: f64 = maxima.iter().zip(snr).filter(|(s, _)| **s > 0.0).map(|(s, x)| x / s.sqrt()).sum();
    acc * acc
}

/// Positive fixed point of x = S(x+1)/(x+N).
pub fn equilibrium_snr(s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return domain(format!("S must be positive, got {s}"));
    }
    if n == 0 {
        return domain("N must be at least 1");
    }
    let nf = n as f64;
    let b = s - nf;
    let disc = (b * b + 4.0 * s).sqrt();
    // The two forms are algebraically equal; pick the one without
    // cancellation.
    Ok(if b >= 0.0 { 0.5 * (b + disc) } else { 2.0 * s / (disc - b) })
}

/// Paraxial LOS maximum SNR and the bootstrap SNR SNR_max/N, with σ_w²
/// taken from the TRX noise figure.
pub fn max_and_bootstrap_snr(rf: &RfParams, n: usize, m: usize, distance: f64) -> Result<(f64, f64)> {
    rf.validate()?;
    if n == 0 || m == 0 {
        return domain("array sizes must be at least 1");
    }
    if !(distance > 0.0) {
        return domain(format!("distance must be positive, got {distance}"));
    }
    let noise = crate::channel::noise_variances(rf).trx;
    let (nf, mf) = (n as f64, m as f64);
    let num = rf.tx_power
        * rf.raa_gain.powi(2)
        * nf.powi(2)
        * mf.powi(2)
        * rf.element_gain_trx.powi(2)
        * rf.element_gain_raa.powi(2)
        * rf.wavelength.powi(4);
    let max = num / (noise * (4.0 * PI * distance).powi(4));
    Ok((max, max / nf))
}

/// |⟨v1, v2⟩| for unit-norm beamformers.
pub fn correlation_coefficient(v1: &CVector, v2: &CVector) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::LengthMismatch { expected: v1.len(), got: v2.len() });
    }
    if v1.is_empty() {
        return Err(Error::EmptyInput("beamformer"));
    }
    Ok(v1.dotc(v2).norm().min(1.0))
}

/// Exact half-wavelength ULA correlation between broadside and a direction
/// with sine `sin_angle`: (1/N)|Σ_n e^{−jπ n sin φ}|.
pub fn ula_correlation(sin_angle: f64, n: usize) -> f64 {
    let acc: Complex64 = (0..n).map(|k| Complex64::from_polar(1.0, -PI * k as f64 * sin_angle)).sum();
    acc.norm() / n as f64
}

/// Correlation after a transverse displacement v·τ at range d, using
/// sin φ ≈ tan φ = vτ/d.
pub fn transverse_correlation(speed: f64, tau: f64, distance: f64, n: usize) -> Result<f64> {
    if !(distance > 0.0) || !(tau > 0.0) || speed < 0.0 || n == 0 {
        return domain("speed, tau, distance and N must be positive");
    }
    Ok(ula_correlation((speed * tau / distance).min(1.0), n))
}

/// Reusing the previous beamformer beats a random start iff ρ > 1/N.
pub fn tracking_benefit(rho: f64, n: usize) -> Result<bool> {
    if !(0.0..=1.0).contains(&rho) {
        return domain(format!("rho must lie in [0, 1], got {rho}"));
    }
    if n == 0 {
        return domain("N must be at least 1");
    }
    Ok(rho > 1.0 / n as f64)
}

/// Largest transverse speed for which reusing the previous beamformer still
/// pays off: 2d√(6(N−1)) / (πτN√N).
pub fn max_tracking_speed(distance: f64, n: usize, tau: f64) -> Result<f64> {
    if !(distance > 0.0) || !(tau > 0.0) || n == 0 {
        return domain("distance, N and tau must be positive");
    }
    let nf = n as f64;
    Ok(2.0 * distance * (6.0 * (nf - 1.0)).sqrt() / (PI * tau * nf * nf.sqrt()))
}

/// sin(πx)/(πx).
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}
