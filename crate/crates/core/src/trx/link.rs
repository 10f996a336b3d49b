//! Per-symbol access to the round trip TRX → RAA → TRX.
//!
//! [`MatrixLink`] applies an arbitrary modified round-trip operator A
//! directly; [`RaaLink`] propagates through the forward channels, the RAA
//! receiver noise and the conjugating reflection of every node in view.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{fill_cn, raa_gram, ChannelMatrix, NoiseModel};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, CMatrix, CVector};
use crate::raa::{id_phase, PnSequence};

/// A round-trip link driven one symbol interval at a time.
pub trait BackscatterLink {
    /// Transceiver array geometry (defines N and the AoA grid).
    fn geometry(&self) -> &ArrayGeometry;

    fn wavelength(&self) -> f64;

    /// Global index of the next symbol interval.
    fn symbol_index(&self) -> u64;

    /// Transmits `x` during the current interval and returns the received
    /// vector y at its end; advances the symbol index.
    fn exchange<R: Rng + ?Sized>(&mut self, x: &CVector, rng: &mut R) -> CVector;

    fn trx_elements(&self) -> usize {
        self.geometry().element_count()
    }
}

/// Cyclic ID modulation of one reflector: phase at symbol `s` is
/// `sequence[(s + cycle_offset) mod K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdModulation {
    pub sequence: PnSequence,
    pub cycle_offset: u64,
}

impl IdModulation {
    pub fn phase(&self, symbol: u64) -> f64 {
        id_phase(&self.sequence, symbol.wrapping_add(self.cycle_offset))
    }

    /// Lag reported by ID correlation for a packet starting at `first_symbol`.
    pub fn expected_lag(&self, first_symbol: u64) -> usize {
        (first_symbol.wrapping_add(self.cycle_offset) % self.sequence.len() as u64) as usize
    }
}

/// y[k] = Σ_p e^{jφ_p[k]}·A_p*·x*[k−1] + w[k], with w ~ CN(0, σ²I).
#[derive(Debug, Clone)]
pub struct MatrixLink {
    geometry: ArrayGeometry,
    wavelength: f64,
    operators: Vec<(CMatrix, Option<IdModulation>)>,
    noise_variance: f64,
    symbol: u64,
}

impl MatrixLink {
    /// Unmodulated single operator on a half-wavelength ULA (λ = 1).
    pub fn new(a: CMatrix, noise_variance: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidConfig("round-trip operator must be square and non-empty".into()));
        }
        let geometry = ArrayGeometry::linear(a.nrows(), 0.5)?;
        Ok(Self {
            geometry,
            wavelength: 1.0,
            operators: vec![(a, None)],
            noise_variance,
            symbol: 0,
        })
    }

    /// Sets the ID modulation of the most recently added operator.
    pub fn modulated(mut self, modulation: IdModulation) -> Self {
        if let Some(last) = self.operators.last_mut() {
            last.1 = Some(modulation);
        }
        self
    }

    pub fn with_operator(mut self, a: CMatrix, modulation: Option<IdModulation>) -> Result<Self> {
        if a.shape() != self.operators[0].0.shape() {
            return Err(Error::LengthMismatch { expected: self.operators[0].0.nrows(), got: a.nrows() });
        }
        self.operators.push((a, modulation));
        Ok(self)
    }

    pub fn with_geometry(mut self, geometry: ArrayGeometry, wavelength: f64) -> Result<Self> {
        if geometry.element_count() != self.operators[0].0.nrows() {
            return Err(Error::LengthMismatch {
                expected: self.operators[0].0.nrows(),
                got: geometry.element_count(),
            });
        }
        self.geometry = geometry;
        self.wavelength = wavelength;
        Ok(self)
    }
}

impl BackscatterLink for MatrixLink {
    fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    fn wavelength(&self) -> f64 {
        self.wavelength
    }

    fn symbol_index(&self) -> u64 {
        self.symbol
    }

    fn exchange<R: Rng + ?Sized>(&mut self, x: &CVector, rng: &mut R) -> CVector {
        let mut y = CVector::zeros(x.len());
        for (a, modulation) in &self.operators {
            let phase = modulation.as_ref().map_or(0.0, |m| m.phase(self.symbol));
            let rot = Complex64::from_polar(1.0, phase);
            y += (a * x).map(|e| rot * e.conj());
        }
        if self.noise_variance > 0.0 {
            let mut w = CVector::zeros(x.len());
            fill_cn(w.as_mut_slice(), self.noise_variance, rng);
            y += w;
        }
        self.symbol += 1;
        y
    }
}

/// A retro-directive node as seen by one transceiver.
#[derive(Debug, Clone)]
pub struct RaaTarget {
    pub channel: ChannelMatrix,
    /// Amplitude gain g.
    pub gain: f64,
    pub modulation: IdModulation,
}

#[derive(Debug, Clone)]
struct PreparedTarget {
    target: RaaTarget,
    /// Γ_qp = ũ_qᵀ·conj(ũ_p).
    gram: CMatrix,
    /// F with F·Fᴴ = Γ; maps white noise onto the projections ũ_qᵀη*.
    noise_factor: CMatrix,
}

/// Physical round trip through forward channels H_p:
/// z = √P_T·H_p·x + η, r = g·e^{jφ}·z*, y = Σ_p H_pᵀ·r_p + w.
///
/// Only the projections of the RAA noise onto the path manifolds reach the
/// transceiver, so they are drawn directly with the exact covariance
/// σ_η²·Γ instead of sampling all M elements.
#[derive(Debug, Clone)]
pub struct RaaLink {
    geometry: ArrayGeometry,
    wavelength: f64,
    tx_power: f64,
    noise: NoiseModel,
    targets: Vec<PreparedTarget>,
    symbol: u64,
}

impl RaaLink {
    pub fn new(
        geometry: ArrayGeometry,
        wavelength: f64,
        tx_power: f64,
        noise: NoiseModel,
        targets: Vec<RaaTarget>,
    ) -> Result<Self> {
        let n = geometry.element_count();
        let targets = targets
            .into_iter()
            .map(|target| {
                let (_, cols) = target.channel.shape();
                if cols != n {
                    return Err(Error::LengthMismatch { expected: n, got: cols });
                }
                let gram = raa_gram(&target.channel);
                let noise_factor = psd_factor(&gram);
                Ok(PreparedTarget { target, gram, noise_factor })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { geometry, wavelength, tx_power, noise, targets, symbol: 0 })
    }

    pub fn targets(&self) -> impl Iterator<Item = &RaaTarget> {
        self.targets.iter().map(|p| &p.target)
    }

    /// Starts the symbol counter at `symbol`.
    pub fn starting_at(mut self, symbol: u64) -> Self {
        self.symbol = symbol;
        self
    }
}

fn psd_factor(gram: &CMatrix) -> CMatrix {
    let p = gram.nrows();
    if p == 1 {
        return CMatrix::from_element(1, 1, Complex64::new(gram[(0, 0)].re.max(0.0).sqrt(), 0.0));
    }
    let eig = SymmetricEigen::new(gram.clone());
    let mut f = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = Complex64::new(l.max(0.0).sqrt(), 0.0);
        for i in 0..p {
            f[(i, j)] *= s;
        }
    }
    f
}

impl BackscatterLink for RaaLink {
    fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    fn wavelength(&self) -> f64 {
        self.wavelength
    }

    fn symbol_index(&self) -> u64 {
        self.symbol
    }

    fn exchange<R: Rng + ?Sized>(&mut self, x: &CVector, rng: &mut R) -> CVector {
        let n = x.len();
        let sqrt_p = self.tx_power.sqrt();
        let mut y = CVector::zeros(n);
        for prepared in &self.targets {
            let terms = prepared.target.channel.terms();
            let p = terms.len();
            // conj(a_t · ṽ_tᵀ x): the conjugated forward projections.
            let proj: Vec<Complex64> = terms
                .iter()
                .map(|t| (t.amplitude * t.trx.iter().zip(x.iter()).map(|(v, xe)| v * xe).sum::<Complex64>()).conj())
                .collect();
            let mut zeta = vec![Complex64::new(0.0, 0.0); p];
            if self.noise.raa > 0.0 {
                let mut xi = vec![Complex64::new(0.0, 0.0); p];
                fill_cn(&mut xi, self.noise.raa, rng);
                for (q, z) in zeta.iter_mut().enumerate() {
                    *z = (0..p).map(|j| prepared.noise_factor[(q, j)] * xi[j]).sum();
                }
            }
            let rot = Complex64::from_polar(prepared.target.gain, prepared.target.modulation.phase(self.symbol));
            for (q, term) in terms.iter().enumerate() {
                // ũ_qᵀ z* = √P Σ_t Γ_qt conj(a_t ṽ_tᵀ x) + ũ_qᵀ η*
                let c: Complex64 =
                    (0..p).map(|t| prepared.gram[(q, t)] * proj[t]).sum::<Complex64>() * sqrt_p + zeta[q];
                let w = rot * term.amplitude * c;
                y.axpy(w, &term.trx, Complex64::new(1.0, 0.0));
            }
        }
        if self.noise.trx > 0.0 {
            let mut w = CVector::zeros(n);
            fill_cn(w.as_mut_slice(), self.noise.trx, rng);
            y += w;
        }
        self.symbol += 1;
        y
    }
}
