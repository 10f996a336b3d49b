//! Array layouts, steering vectors, poses and bearings in the x–z plane.
//!
//! Angles are measured from an array's boresight, positive toward +x for an
//! array facing +z. A pose orientation is the boresight direction measured
//! the same way from the global +z axis, so the global direction of a local
//! angle `phi` is `orientation + phi`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Radio parameters shared by every link of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfParams {
    /// Hz.
    pub carrier_frequency: f64,
    /// m, always `SPEED_OF_LIGHT / carrier_frequency`.
    pub wavelength: f64,
    /// Signal bandwidth W, Hz.
    pub bandwidth: f64,
    /// Symbol time T, s.
    pub symbol_time: f64,
    /// Transmit power P_T, W.
    pub tx_power: f64,
    /// Per-element gain at the transceiver, linear.
    pub element_gain_trx: f64,
    /// Per-element gain at the retro-directive array, linear.
    pub element_gain_raa: f64,
    /// Transceiver noise figure, linear.
    pub noise_figure_trx: f64,
    /// Retro-directive array noise figure, linear.
    pub noise_figure_raa: f64,
    /// Retro-directive amplitude gain g, linear.
    pub raa_gain: f64,
}

impl RfParams {
    /// Parameters at `carrier_frequency` with a 10 MHz / 100 ns narrowband
    /// link, 1 mW transmit power and unity gains and noise figures.
    pub fn new(carrier_frequency: f64) -> Result<Self> {
        let rf = Self {
            carrier_frequency,
            wavelength: SPEED_OF_LIGHT / carrier_frequency,
            bandwidth: 10e6,
            symbol_time: 100e-9,
            tx_power: 1e-3,
            element_gain_trx: 1.0,
            element_gain_raa: 1.0,
            noise_figure_trx: 1.0,
            noise_figure_raa: 1.0,
            raa_gain: 1.0,
        };
        rf.validate()?;
        Ok(rf)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("carrier_frequency", self.carrier_frequency),
            ("wavelength", self.wavelength),
            ("bandwidth", self.bandwidth),
            ("symbol_time", self.symbol_time),
            ("tx_power", self.tx_power),
            ("element_gain_trx", self.element_gain_trx),
            ("element_gain_raa", self.element_gain_raa),
            ("noise_figure_trx", self.noise_figure_trx),
            ("noise_figure_raa", self.noise_figure_raa),
            ("raa_gain", self.raa_gain),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        let expected = SPEED_OF_LIGHT / self.carrier_frequency;
        if ((self.wavelength - expected) / expected).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "wavelength {} inconsistent with carrier frequency {}",
                self.wavelength, self.carrier_frequency
            )));
        }
        Ok(())
    }
}

/// A point in the global x–z plane, m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn distance_to(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }
}

/// Position plus boresight orientation (rad from +z toward +x).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Point2,
    pub orientation: f64,
}

impl Pose {
    pub const fn new(position: Point2, orientation: f64) -> Self {
        Self { position, orientation }
    }

    /// Unit vector along the array axis (boresight rotated by +90°).
    pub fn axis(&self) -> (f64, f64) {
        (self.orientation.cos(), -self.orientation.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayLayout {
    Linear { elements: usize },
    /// `nx` elements along the in-plane axis, `ny` along the orthogonal one.
    Planar { nx: usize, ny: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub layout: ArrayLayout,
    /// Inter-element spacing Δ, m.
    pub spacing: f64,
    pub pose: Pose,
}

impl ArrayGeometry {
    pub fn linear(elements: usize, spacing: f64) -> Result<Self> {
        Self::new(ArrayLayout::Linear { elements }, spacing)
    }

    pub fn planar(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        Self::new(ArrayLayout::Planar { nx, ny }, spacing)
    }

    pub fn new(layout: ArrayLayout, spacing: f64) -> Result<Self> {
        let geometry = Self { layout, spacing, pose: Pose::default() };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.element_count() == 0 {
            return Err(Error::InvalidConfig("array needs at least one element".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidConfig(format!("spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        match self.layout {
            ArrayLayout::Linear { elements } => elements,
            ArrayLayout::Planar { nx, ny } => nx * ny,
        }
    }

    /// Number of elements along the axis that resolves in-plane angles.
    pub fn in_plane_count(&self) -> usize {
        match self.layout {
            ArrayLayout::Linear { elements } => elements,
            ArrayLayout::Planar { nx, .. } => nx,
        }
    }

    /// Unit-norm response toward `angle`, dispatching on the layout.
    pub fn response(&self, wavelength: f64, angle: f64) -> Result<CVector> {
        match self.layout {
            ArrayLayout::Linear { .. } => steering_vector(self, wavelength, angle),
            ArrayLayout::Planar { .. } => planar_steering_vector(self, wavelength, angle),
        }
    }
}

fn check_angle(angle: f64) -> Result<()> {
    if !(angle.abs() <= FRAC_PI_2) {
        return domain(format!("angle {angle} outside [-pi/2, pi/2]"));
    }
    Ok(())
}

fn ula(elements: usize, spacing: f64, wavelength: f64, sin_angle: f64) -> CVector {
    let step = 2.0 * PI / wavelength * spacing * sin_angle;
    let scale = 1.0 / (elements as f64).sqrt();
    CVector::from_iterator(
        elements,
        (0..elements).map(|n| Complex64::from_polar(scale, step * n as f64)),
    )
}

/// Unit-norm ULA steering vector v(φ); element n carries phase
/// `+(2π/λ)·n·Δ·sin φ`.
pub fn steering_vector(geometry: &ArrayGeometry, wavelength: f64, angle: f64) -> Result<CVector> {
    check_angle(angle)?;
    match geometry.layout {
        ArrayLayout::Linear { elements } => Ok(ula(elements, geometry.spacing, wavelength, angle.sin())),
        ArrayLayout::Planar { .. } => domain("steering_vector needs a linear layout; use planar_steering_vector"),
    }
}

/// Unit-norm planar steering vector: Kronecker product of the in-plane ULA
/// response at `azimuth` and the orthogonal ULA response at broadside.
/// Element `(ix, iy)` sits at index `ix * ny + iy`.
pub fn planar_steering_vector(geometry: &ArrayGeometry, wavelength: f64, azimuth: f64) -> Result<CVector> {
    check_angle(azimuth)?;
    let (nx, ny) = match geometry.layout {
        ArrayLayout::Planar { nx, ny } => (nx, ny),
        ArrayLayout::Linear { elements } => (elements, 1),
    };
    let row = ula(nx, geometry.spacing, wavelength, azimuth.sin());
    let col = ula(ny, geometry.spacing, wavelength, 0.0);
    Ok(row.kronecker(&col))
}

/// Free-space link loss L(d) = (4πd/λ)².
pub fn path_loss(distance: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return domain(format!("distance must be positive, got {distance}"));
    }
    Ok((4.0 * PI * distance / wavelength).powi(2))
}

/// Angle of `point` seen from `pose`, relative to boresight, in (−π/2, π/2].
pub fn bearing(pose: &Pose, point: &Point2) -> Result<f64> {
    let dx = point.x - pose.position.x;
    let dz = point.z - pose.position.z;
    if dx == 0.0 && dz == 0.0 {
        return domain("point coincides with the anchor position");
    }
    let angle = wrap_angle(dx.atan2(dz) - pose.orientation);
    if angle <= -FRAC_PI_2 || angle > FRAC_PI_2 {
        return Err(Error::OutOfFieldOfView { angle });
    }
    Ok(angle)
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Sine of the angle between the array normal and the direction toward
/// `point`; valid on either face of the array.
pub fn axis_sine(pose: &Pose, point: &Point2) -> f64 {
    let dx = point.x - pose.position.x;
    let dz = point.z - pose.position.z;
    let norm = dx.hypot(dz);
    let (ax, az) = pose.axis();
    ((dx * ax + dz * az) / norm).clamp(-1.0, 1.0)
}
