//! The retro-directive node: conjugating backscatter, cyclic ID phase
//! modulation and the maximal-length sequences used as IDs.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::geometry::{ArrayGeometry, CVector, Point2};

/// Binary chip sequence mapped to the antipodal phase alphabet {0, π}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PnSequence {
    chips: Vec<u8>,
}

impl PnSequence {
    pub fn new(chips: Vec<u8>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::EmptyInput("PN sequence"));
        }
        if chips.iter().any(|&c| c > 1) {
            return domain("chips must be 0 or 1");
        }
        Ok(Self { chips })
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn chips(&self) -> &[u8] {
        &self.chips
    }

    /// Phase of chip `k`: 0 or π.
    pub fn phase(&self, k: usize) -> f64 {
        PI * self.chips[k] as f64
    }

    /// ±1 alphabet: chip 0 → +1, chip 1 → −1.
    pub fn bipolar(&self) -> Vec<f64> {
        self.chips.iter().map(|&c| 1.0 - 2.0 * c as f64).collect()
    }

    /// First `len` chips of the periodic extension.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyInput("truncated PN sequence"));
        }
        Self::new((0..len).map(|k| self.chips[k % self.chips.len()]).collect())
    }
}

/// One primitive polynomial per register length 5..=13, including the x^L
/// term (bit L).
const PRIMITIVE_TABLE: [(u32, u32); 9] = [
    (5, 0x25),
    (6, 0x43),
    (7, 0x89),
    (8, 0x11D),
    (9, 0x211),
    (10, 0x409),
    (11, 0x805),
    (12, 0x1053),
    (13, 0x201B),
];

pub fn default_primitive_polynomial(register_len: u32) -> Option<u32> {
    PRIMITIVE_TABLE.iter().find(|(l, _)| *l == register_len).map(|(_, p)| *p)
}

/// Galois-form LFSR stepping `state ← x·state mod p(x)`; the output is the
/// top bit of the state.
fn lfsr_chips(register_len: u32, poly: u32, seed: u32, count: usize) -> Vec<u8> {
    let top = 1u32 << register_len;
    let mut state = seed;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(((state >> (register_len - 1)) & 1) as u8);
        state <<= 1;
        if state & top != 0 {
            state ^= poly;
        }
    }
    out
}

fn lfsr_period(register_len: u32, poly: u32) -> usize {
    let top = 1u32 << register_len;
    let mut state = 1u32;
    let limit = (top - 1) as usize;
    for period in 1..=limit {
        state <<= 1;
        if state & top != 0 {
            state ^= poly;
        }
        if state == 1 {
            return period;
        }
    }
    0
}

fn check_register_len(register_len: u32) -> Result<()> {
    if !(2..=24).contains(&register_len) {
        return domain(format!("register length {register_len} outside 2..=24"));
    }
    Ok(())
}

/// Maximal-length sequence of period 2^L − 1 from the polynomial `poly`
/// (bit L set) and a non-zero `seed_state`.
pub fn generate_msequence(register_len: u32, poly: u32, seed_state: u32) -> Result<PnSequence> {
    check_register_len(register_len)?;
    let mask = (1u32 << register_len) - 1;
    if poly >> register_len != 1 || poly & 1 == 0 {
        return Err(Error::NotPrimitive { register_len, taps: poly });
    }
    let seed = seed_state & mask;
    if seed == 0 {
        return domain("LFSR seed state must be non-zero");
    }
    let period = mask as usize;
    if lfsr_period(register_len, poly) != period {
        return Err(Error::NotPrimitive { register_len, taps: poly });
    }
    PnSequence::new(lfsr_chips(register_len, poly, seed, period))
}

/// All primitive polynomials of degree `register_len`, ascending, found by
/// the period test.
pub fn primitive_polynomials(register_len: u32) -> Result<Vec<u32>> {
    check_register_len(register_len)?;
    let top = 1u32 << register_len;
    let period = (top - 1) as usize;
    Ok((0..top / 2)
        .map(|low| top | (low << 1) | 1)
        .filter(|&p| lfsr_period(register_len, p) == period)
        .collect())
}

/// Number of distinct m-sequences of register length L: φ(2^L − 1) / L.
pub fn msequence_family_size(register_len: u32) -> Result<usize> {
    check_register_len(register_len)?;
    let period = (1u64 << register_len) - 1;
    Ok((euler_totient(period) / register_len as u64) as usize)
}

fn euler_totient(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            while n.is_multiple_of(p) {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// ID assignment: register length, index into the sorted primitive
/// polynomials of that length, and the packet length K (defaults to the
/// full period 2^L − 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdAssignment {
    pub register_len: u32,
    pub taps_index: usize,
    pub packet_len: Option<usize>,
}

impl IdAssignment {
    pub fn period(&self) -> usize {
        (1usize << self.register_len) - 1
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len.unwrap_or_else(|| self.period())
    }

    pub fn sequence(&self) -> Result<PnSequence> {
        let polys = primitive_polynomials(self.register_len)?;
        let poly = *polys.get(self.taps_index).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "taps index {} out of range: {} primitive polynomials of degree {}",
                self.taps_index,
                polys.len(),
                self.register_len
            ))
        })?;
        let full = generate_msequence(self.register_len, poly, 1)?;
        match self.packet_len {
            Some(k) if k != full.len() => full.truncated(k),
            _ => Ok(full),
        }
    }
}

/// Piecewise-linear trajectory through timestamped waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<(f64, Point2)>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<(f64, Point2)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::EmptyInput("trajectory"));
        }
        if waypoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return domain("waypoint times must be strictly increasing");
        }
        Ok(Self { waypoints })
    }

    pub fn stationary(position: Point2) -> Self {
        Self { waypoints: vec![(0.0, position)] }
    }

    pub fn waypoints(&self) -> &[(f64, Point2)] {
        &self.waypoints
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].0
    }

    pub fn duration(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].0 - self.waypoints[0].0
    }

    /// Position at time `t`, clamped to the end points.
    pub fn position_at(&self, t: f64) -> Point2 {
        let w = &self.waypoints;
        if t <= w[0].0 {
            return w[0].1;
        }
        for pair in w.windows(2) {
            let ((t0, p0), (t1, p1)) = (pair[0], pair[1]);
            if t <= t1 {
                let a = (t - t0) / (t1 - t0);
                return Point2::new(p0.x + a * (p1.x - p0.x), p0.z + a * (p1.z - p0.z));
            }
        }
        w[w.len() - 1].1
    }
}

/// A retro-directive node.
#[derive(Debug, Clone, PartialEq)]
pub struct RaaNode {
    pub name: String,
    pub geometry: ArrayGeometry,
    /// Amplitude gain g, linear.
    pub gain: f64,
    pub id: IdAssignment,
    /// Cyclic ID, one phase per symbol interval.
    pub id_sequence: PnSequence,
    pub trajectory: Trajectory,
}

impl RaaNode {
    pub fn new(
        name: impl Into<String>,
        geometry: ArrayGeometry,
        gain: f64,
        id: IdAssignment,
        trajectory: Trajectory,
    ) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidConfig(format!("RAA gain must be positive, got {gain}")));
        }
        geometry.validate()?;
        Ok(Self {
            name: name.into(),
            geometry,
            gain,
            id,
            id_sequence: id.sequence()?,
            trajectory,
        })
    }
}

/// Retro-directive reflection r = g·e^{jφ}·z*.
pub fn backscatter(z: &CVector, gain: f64, phase: f64) -> CVector {
    let w = Complex64::from_polar(gain, phase);
    z.map(|e| w * e.conj())
}

/// Phase of the cyclic ID at global symbol index `k`.
pub fn id_phase(sequence: &PnSequence, k: u64) -> f64 {
    sequence.phase((k % sequence.len() as u64) as usize)
}
