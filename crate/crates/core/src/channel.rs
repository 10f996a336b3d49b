//! Forward channel synthesis, the modified round-trip operator and thermal noise.
//!
//! A channel is kept in factored form, `H = Σ_p a_p ũ_p ṽ_pᵀ`, where `ũ_p`
//! and `ṽ_p` are the un-normalized array manifolds at the retro-directive
//! array (M elements) and at the transceiver (N elements). The dense M×N
//! matrix is materialized on demand.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::geometry::{ArrayGeometry, CMatrix, CVector, RfParams};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Reference noise temperature, K.
pub const REFERENCE_TEMPERATURE: f64 = 290.0;

/// One propagation path of a flat-fading channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    /// Complex amplitude, including element gains and spreading loss.
    pub gain: Complex64,
    /// Departure angle at the transceiver, rad from its boresight.
    pub departure: f64,
    /// Arrival angle at the retro-directive array, rad from its boresight.
    pub arrival: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<PathComponent>,
    pub los: bool,
    /// Rician K-factor, linear.
    pub k_factor: f64,
}

impl PathSet {
    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::EmptyInput("path set"));
        }
        if !(self.k_factor >= 0.0) {
            return domain(format!("K-factor must be non-negative, got {}", self.k_factor));
        }
        if self.paths.iter().any(|p| !(p.gain.re.is_finite() && p.gain.im.is_finite())) {
            return domain("path gains must be finite");
        }
        Ok(())
    }

    /// Sum of per-path powers |a_p|².
    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

/// Parameters of the clustered Rician surrogate used in place of tabulated
/// clustered-delay-line profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultipathParams {
    /// Number of NLOS clusters.
    pub clusters: usize,
    /// Rician K-factor (LOS power over total NLOS power), linear.
    pub k_factor: f64,
    /// Cluster angles are drawn uniformly in `±angle_spread`, rad.
    pub angle_spread: f64,
}

impl Default for MultipathParams {
    fn default() -> Self {
        Self {
            clusters: 4,
            k_factor: 10f64.powf(1.3),
            angle_spread: 60f64.to_radians(),
        }
    }
}

/// A rank-one term `amplitude · raa · trxᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneTerm {
    pub amplitude: Complex64,
    /// ũ(ψ), length M, entries of unit modulus.
    pub raa: CVector,
    /// ṽ(φ), length N, entries of unit modulus.
    pub trx: CVector,
}

/// Forward channel H (M×N) between a transceiver and a retro-directive array.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    terms: Vec<RankOneTerm>,
    raa_elements: usize,
    trx_elements: usize,
    /// m.
    pub distance: f64,
    /// Departure angle φ at the transceiver, rad.
    pub aod: f64,
    /// Arrival angle ψ at the retro-directive array, rad.
    pub aoa: f64,
}

impl ChannelMatrix {
    pub fn terms(&self) -> &[RankOneTerm] {
        &self.terms
    }

    /// (M, N).
    pub fn shape(&self) -> (usize, usize) {
        (self.raa_elements, self.trx_elements)
    }

    pub fn dense(&self) -> CMatrix {
        let mut h = CMatrix::zeros(self.raa_elements, self.trx_elements);
        for t in &self.terms {
            h += (&t.raa * t.trx.transpose()) * t.amplitude;
        }
        h
    }
}

/// Un-normalized manifold: conjugate of the unit steering vector scaled by √n,
/// i.e. entries `exp(−j(2π/λ)·n·Δ·sin θ)`.
fn manifold(geometry: &ArrayGeometry, wavelength: f64, angle: f64) -> Result<CVector> {
    let scale = (geometry.element_count() as f64).sqrt();
    Ok(geometry.response(wavelength, angle)?.map(|e| e.conj() * scale))
}

/// Free-space amplitude √(G_A·G_RAA)·λ/(4πd).
pub fn free_space_amplitude(rf: &RfParams, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return domain(format!("distance must be positive, got {distance}"));
    }
    Ok((rf.element_gain_trx * rf.element_gain_raa).sqrt() * rf.wavelength / (4.0 * PI * distance))
}

/// Pure line-of-sight channel H = √(NM·G_A·G_RAA)·λ/(4πd)·u(ψ)vᴴ(φ).
///
/// Both arrays are assumed to be in each other's far field.
pub fn los_channel(
    rf: &RfParams,
    trx: &ArrayGeometry,
    raa: &ArrayGeometry,
    distance: f64,
    aod: f64,
    aoa: f64,
) -> Result<ChannelMatrix> {
    let amplitude = free_space_amplitude(rf, distance)?;
    Ok(ChannelMatrix {
        terms: vec![RankOneTerm {
            amplitude: Complex64::new(amplitude, 0.0),
            raa: manifold(raa, rf.wavelength, aoa)?,
            trx: manifold(trx, rf.wavelength, aod)?,
        }],
        raa_elements: raa.element_count(),
        trx_elements: trx.element_count(),
        distance,
        aod,
        aoa,
    })
}

/// Flat-fading multipath channel H = Σ_p a_p·ũ(ψ_p)·ṽᵀ(φ_p).
///
/// Distance and nominal angles are taken from the first path; `distance` is
/// recorded as metadata only.
pub fn multipath_channel(
    rf: &RfParams,
    trx: &ArrayGeometry,
    raa: &ArrayGeometry,
    paths: &PathSet,
    distance: f64,
) -> Result<ChannelMatrix> {
    paths.validate()?;
    let terms = paths
        .paths
        .iter()
        .map(|p| {
            Ok(RankOneTerm {
                amplitude: p.gain,
                raa: manifold(raa, rf.wavelength, p.arrival)?,
                trx: manifold(trx, rf.wavelength, p.departure)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelMatrix {
        terms,
        raa_elements: raa.element_count(),
        trx_elements: trx.element_count(),
        distance,
        aod: paths.paths[0].departure,
        aoa: paths.paths[0].arrival,
    })
}

/// Draws a clustered Rician path set around a LOS path of free-space
/// amplitude. The LOS path carries K/(K+1) of the power; the rest is split
/// evenly over the clusters, each with a uniform random phase and angles
/// drawn uniformly in `±angle_spread` at both ends.
pub fn clustered_paths<R: Rng + ?Sized>(
    rf: &RfParams,
    distance: f64,
    aod: f64,
    aoa: f64,
    params: &MultipathParams,
    rng: &mut R,
) -> Result<PathSet> {
    if !(params.k_factor >= 0.0) {
        return domain("K-factor must be non-negative");
    }
    let amplitude = free_space_amplitude(rf, distance)?;
    let k = params.k_factor;
    let mut paths = Vec::with_capacity(params.clusters + 1);
    let los_power = if params.clusters == 0 || k.is_infinite() { 1.0 } else { k / (k + 1.0) };
    paths.push(PathComponent {
        gain: Complex64::new(amplitude * los_power.sqrt(), 0.0),
        departure: aod,
        arrival: aoa,
    });
    if params.clusters > 0 && los_power < 1.0 {
        let cluster_amp = amplitude * ((1.0 - los_power) / params.clusters as f64).sqrt();
        for _ in 0..params.clusters {
            let phase = rng.random::<f64>() * 2.0 * PI;
            let departure = (2.0 * rng.random::<f64>() - 1.0) * params.angle_spread;
            let arrival = (2.0 * rng.random::<f64>() - 1.0) * params.angle_spread;
            paths.push(PathComponent {
                gain: Complex64::from_polar(cluster_amp, phase),
                departure,
                arrival,
            });
        }
    }
    Ok(PathSet { paths, los: true, k_factor: k })
}

/// Modified round-trip operator A = √P_T·g·HᴴH (N×N, Hermitian PSD).
pub fn round_trip_operator(h: &ChannelMatrix, tx_power: f64, gain: f64) -> CMatrix {
    let dense = h.dense();
    dense.adjoint() * &dense * Complex64::new(tx_power.sqrt() * gain, 0.0)
}

/// Receiver noise variances, W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// σ_w² at the transceiver.
    pub trx: f64,
    /// σ_η² at the retro-directive array.
    pub raa: f64,
}

impl NoiseModel {
    pub const NOISELESS: NoiseModel = NoiseModel { trx: 0.0, raa: 0.0 };
}

/// κ·T₀·F·W for both receivers.
pub fn noise_variances(rf: &RfParams) -> NoiseModel {
    let kt = BOLTZMANN * REFERENCE_TEMPERATURE * rf.bandwidth;
    NoiseModel {
        trx: kt * rf.noise_figure_trx,
        raa: kt * rf.noise_figure_raa,
    }
}

/// `n` i.i.d. CN(0, variance) samples.
pub fn sample_cn<R: Rng + ?Sized>(variance: f64, n: usize, rng: &mut R) -> Result<CVector> {
    if !(variance >= 0.0) {
        return domain(format!("variance must be non-negative, got {variance}"));
    }
    let mut out = CVector::zeros(n);
    if variance > 0.0 {
        fill_cn(out.as_mut_slice(), variance, rng);
    }
    Ok(out)
}

pub(crate) fn fill_cn<R: Rng + ?Sized>(out: &mut [Complex64], variance: f64, rng: &mut R) {
    let s = (variance / 2.0).sqrt();
    for e in out {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *e = Complex64::new(re * s, im * s);
    }
}

/// Gram matrix `Γ_qp = ũ_qᵀ·conj(ũ_p)` of the retro-directive manifolds.
pub(crate) fn raa_gram(h: &ChannelMatrix) -> DMatrix<Complex64> {
    let p = h.terms.len();
    DMatrix::from_fn(p, p, |q, t| {
        h.terms[q]
            .raa
            .iter()
            .zip(h.terms[t].raa.iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    })
}
