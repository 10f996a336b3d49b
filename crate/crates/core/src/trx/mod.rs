//! Transceiver side of the exchange: iterative beamforming by repeated
//! round trips, change-point detection, AoA estimation, ID demodulation
//! and deflation for multiple RAAs.

mod aoa;
mod deflation;
mod demod;
mod link;

pub use aoa::{estimate_aoa, estimate_aoa_sine};
pub use deflation::{deflate, step_update, DeflationBasis};
pub use demod::{correlate_id, demodulate, hard_decisions, phase_reference, IdMatch};
pub use link::{BackscatterLink, IdModulation, MatrixLink, RaaLink, RaaTarget};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::CVector;
use crate::raa::PnSequence;

/// How the first transmit vector of an interrogation is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// Isotropic random unit vector.
    Random,
    /// Reuse a beamformer, typically the one frozen by the previous
    /// interrogation of the same RAA.
    Previous(CVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrxConfig {
    /// Absolute SNR threshold η₁ (linear).
    pub eta1: f64,
    /// Ratio threshold η₂ (> 1): detection once γ[k]/γ[k−1] drops below it.
    pub eta2: f64,
    pub max_iterations: usize,
    pub init: InitStrategy,
    /// DFT zero-padding factor for the AoA grid (1..=16).
    pub aoa_oversampling: usize,
}

impl Default for TrxConfig {
    fn default() -> Self {
        Self { eta1: 10.0, eta2: 1.2, max_iterations: 30, init: InitStrategy::Random, aoa_oversampling: 16 }
    }
}

impl TrxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta1 > 0.0) {
            return Err(Error::InvalidConfig(format!("eta1 must be positive, got {}", self.eta1)));
        }
        if !(self.eta2 > 1.0) || !self.eta2.is_finite() {
            return Err(Error::InvalidConfig(format!("eta2 must exceed 1, got {}", self.eta2)));
        }
        if self.max_iterations < 2 {
            return Err(Error::InvalidConfig("max_iterations must be at least 2".into()));
        }
        if !(1..=16).contains(&self.aoa_oversampling) {
            return Err(Error::InvalidConfig(format!(
                "aoa_oversampling must be in 1..=16, got {}",
                self.aoa_oversampling
            )));
        }
        Ok(())
    }
}

/// Outcome of one interrogation of (at most) one RAA.
#[derive(Debug, Clone, PartialEq)]
pub struct InterrogationResult {
    pub detected: bool,
    /// Iteration k̄ at which the detector fired.
    pub detect_iteration: Option<usize>,
    /// Frozen beamformer x̄ when detected, otherwise the last iterate.
    pub beamformer: CVector,
    /// Estimated sin φ̂ in the array frame.
    pub aoa_sine: Option<f64>,
    /// γ[k] for every exchange, including the ID phase.
    pub snr_trace: Vec<f64>,
    /// Matched-filter outputs of the ID phase.
    pub demod_symbols: Vec<Complex64>,
    pub matched_id: Option<IdMatch>,
    /// Global symbol index of the first ID symbol.
    pub id_start_symbol: Option<u64>,
    /// Largest ‖Bᴴx‖/‖x‖ over all transmitted beamformers.
    pub max_basis_leakage: f64,
}

impl InterrogationResult {
    pub fn aoa(&self) -> Option<f64> {
        self.aoa_sine.map(|s| s.clamp(-1.0, 1.0).asin())
    }

    /// Number of beamforming exchanges before detection or timeout.
    pub fn iterations(&self) -> usize {
        self.detect_iteration.unwrap_or(self.snr_trace.len() - self.demod_symbols.len())
    }
}

/// Unit-norm starting vector.
pub fn init_beamformer<R: Rng + ?Sized>(strategy: &InitStrategy, n: usize, rng: &mut R) -> Result<CVector> {
    if n == 0 {
        return Err(Error::EmptyInput("beamformer"));
    }
    match strategy {
        InitStrategy::Random => loop {
            let v = CVector::from_fn(n, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            });
            let norm = v.norm();
            if norm > 0.0 {
                return Ok(v / Complex64::new(norm, 0.0));
            }
        },
        InitStrategy::Previous(v) => {
            if v.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: v.len() });
            }
            let norm = v.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Domain("previous beamformer has no usable norm".into()));
            }
            Ok(v / Complex64::new(norm, 0.0))
        }
    }
}

/// Change-point test: γ[k] > η₁ and γ[k]/γ[k−1] < η₂.
pub fn detect(gamma: f64, previous: f64, cfg: &TrxConfig) -> bool {
    gamma > cfg.eta1 && gamma < cfg.eta2 * previous
}

/// Runs the iterative beamforming loop on `link` and, once the detector
/// fires, a full ID burst (length of the longest codeword) with the frozen
/// beamformer.
///
/// `noise_variance` normalizes γ[k] = ‖y[k]‖²/σ_w²; pass 1 for noiseless
/// links. A non-empty `basis` confines the search to its orthogonal
/// complement.
pub fn run_interrogation<L, R>(
    link: &mut L,
    cfg: &TrxConfig,
    noise_variance: f64,
    rng: &mut R,
    codebook: &[PnSequence],
    basis: &DeflationBasis,
) -> Result<InterrogationResult>
where
    L: BackscatterLink,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance must be positive, got {noise_variance}")));
    }
    let n = link.trx_elements();
    let mut x = init_beamformer(&cfg.init, n, rng)?;
    if !basis.is_empty() {
        x = deflate(&x.map(|e| e.conj()), basis)?;
    }
    let mut leakage = basis.leakage(&x);
    let mut trace = Vec::with_capacity(cfg.max_iterations);
    let mut detect_iteration = None;

    for k in 1..=cfg.max_iterations {
        let y = link.exchange(&x, rng);
        let gamma = y.norm_squared() / noise_variance;
        trace.push(gamma);
        let next = deflate(&y, basis)?;
        leakage = leakage.max(basis.leakage(&next));
        x = next;
        if k >= 2 && detect(gamma, trace[k - 2], cfg) {
            detect_iteration = Some(k);
            break;
        }
    }

    let mut result = InterrogationResult {
        detected: detect_iteration.is_some(),
        detect_iteration,
        beamformer: x,
        aoa_sine: None,
        snr_trace: trace,
        demod_symbols: Vec::new(),
        matched_id: None,
        id_start_symbol: None,
        max_basis_leakage: leakage,
    };
    if !result.detected {
        return Ok(result);
    }

    // x̄ is the (projected) y* normalized, so its conjugate carries the same
    // spatial spectrum as the received vector.
    let probe = result.beamformer.map(|e| e.conj());
    result.aoa_sine = Some(estimate_aoa_sine(&probe, link.geometry(), link.wavelength(), cfg.aoa_oversampling)?);

    let burst = codebook.iter().map(PnSequence::len).max().unwrap_or(0);
    if burst > 0 {
        result.id_start_symbol = Some(link.symbol_index());
        for _ in 0..burst {
            let y = link.exchange(&result.beamformer, rng);
            result.snr_trace.push(y.norm_squared() / noise_variance);
            result.demod_symbols.push(demodulate(&result.beamformer, &y)?);
        }
        result.matched_id = Some(correlate_id(&result.demod_symbols, codebook)?);
    }
    Ok(result)
}

/// Sequential search with deflation: every detected RAA's beamformer is
/// added to the basis before the next search. Stops at the first miss, when
/// no residual signal remains, or after `max_targets` detections.
pub fn run_multi_interrogation<L, R>(
    link: &mut L,
    cfg: &TrxConfig,
    noise_variance: f64,
    rng: &mut R,
    codebook: &[PnSequence],
    max_targets: usize,
) -> Result<(Vec<InterrogationResult>, DeflationBasis)>
where
    L: BackscatterLink,
    R: Rng + ?Sized,
{
    let mut basis = DeflationBasis::new();
    let mut found = Vec::new();
    while found.len() < max_targets && basis.len() < link.trx_elements() {
        let result = match run_interrogation(link, cfg, noise_variance, rng, codebook, &basis) {
            Ok(r) => r,
            Err(Error::NoResidualSignal | Error::NoReceivedSignal) => break,
            Err(e) => return Err(e),
        };
        if !result.detected {
            break;
        }
        basis.push(&result.beamformer)?;
        found.push(result);
    }
    Ok((found, basis))
}
