use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ArrayLayout, CVector};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Signed frequency index for bin `i` of an `n`-point DFT, in
/// [−⌊n/2⌋, ⌈n/2⌉).
fn centered_index(i: usize, n: usize) -> i64 {
    if 2 * i < n {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// In-plane aperture of `y*`: the ULA vector itself, or for a planar array
/// the sum over the out-of-plane axis (element index `ix·ny + iy`).
fn in_plane_aperture(y: &CVector, geometry: &ArrayGeometry) -> Vec<Complex64> {
    match geometry.layout {
        ArrayLayout::Linear { .. } => y.iter().map(|e| e.conj()).collect(),
        ArrayLayout::Planar { nx, ny } => (0..nx)
            .map(|ix| (0..ny).map(|iy| y[ix * ny + iy].conj()).sum())
            .collect(),
    }
}

/// Estimates sin φ̂ from a received vector by locating the peak of the
/// zero-padded DFT of `y*` over `oversampling·N` bins.
///
/// Bins mapping to |sin| > 1 are ignored; among equal peaks the one with the
/// smallest |index| wins.
pub fn estimate_aoa_sine(y: &CVector, geometry: &ArrayGeometry, wavelength: f64, oversampling: usize) -> Result<f64> {
    let n = geometry.element_count();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if oversampling == 0 {
        return Err(Error::InvalidConfig("oversampling must be at least 1".into()));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength must be positive, got {wavelength}")));
    }
    if y.iter().all(|e| e.norm_sqr() == 0.0) {
        return Err(Error::NoReceivedSignal);
    }
    let mut buf = in_plane_aperture(y, geometry);
    let n_inplane = buf.len();
    let len = n_inplane * oversampling;
    buf.resize(len, Complex64::new(0.0, 0.0));
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len).process(&mut buf));

    let scale = wavelength / (len as f64 * geometry.spacing);
    let mut best: Option<(f64, i64)> = None;
    for (i, v) in buf.iter().enumerate() {
        let idx = centered_index(i, len);
        if (idx as f64 * scale).abs() > 1.0 {
            continue;
        }
        let mag = v.norm_sqr();
        best = match best {
            None => Some((mag, idx)),
            Some((bm, bi)) => {
                let tol = 1e-12 * bm.max(mag);
                let better = mag > bm + tol
                    || ((mag - bm).abs() <= tol && (idx.abs(), idx) < (bi.abs(), bi));
                if better {
                    Some((mag, idx))
                } else {
                    Some((bm, bi))
                }
            }
        };
    }
    let (_, idx) = best.ok_or(Error::InvalidConfig("no DFT bin lies in the visible region".into()))?;
    Ok(idx as f64 * scale)
}

/// Angle form of [`estimate_aoa_sine`], in radians.
pub fn estimate_aoa(y: &CVector, geometry: &ArrayGeometry, wavelength: f64, oversampling: usize) -> Result<f64> {
    estimate_aoa_sine(y, geometry, wavelength, oversampling).map(|s| s.clamp(-1.0, 1.0).asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn conj_steering(geometry: &ArrayGeometry, angle: f64) -> CVector {
        geometry.response(1.0, angle).unwrap().map(|e| e.conj())
    }

    #[test]
    fn on_grid_angle_is_exact() {
        // sin φ = 0.25 is bin 4 of 32 points for N = 8, Δ = λ/2, oversampling 4.
        let g = ArrayGeometry::linear(8, 0.5).unwrap();
        let y = conj_steering(&g, 0.25f64.asin());
        let s = estimate_aoa_sine(&y, &g, 1.0, 4).unwrap();
        assert!((s - 0.25).abs() < 1e-12);
    }

    #[test]
    fn broadside() {
        let g = ArrayGeometry::planar(5, 3, 0.5).unwrap();
        let y = conj_steering(&g, 0.0);
        assert_eq!(estimate_aoa_sine(&y, &g, 1.0, 16).unwrap(), 0.0);
    }

    #[test]
    fn odd_length_grid_is_symmetric() {
        assert_eq!(centered_index(0, 5), 0);
        assert_eq!(centered_index(2, 5), 2);
        assert_eq!(centered_index(3, 5), -2);
        assert_eq!(centered_index(2, 4), -2);
        assert_eq!(centered_index(1, 4), 1);
    }

    #[test]
    fn zero_vector_rejected() {
        let g = ArrayGeometry::linear(4, 0.5).unwrap();
        assert_eq!(estimate_aoa_sine(&CVector::zeros(4), &g, 1.0, 2), Err(Error::NoReceivedSignal));
        assert!(estimate_aoa_sine(&CVector::zeros(3), &g, 1.0, 2).is_err());
    }

    #[test]
    fn matches_brute_force_scan() {
        // Oracle: direct evaluation of Σ_n y*_n e^{-j2π n i/N'} on every bin.
        let g = ArrayGeometry::linear(7, 0.5).unwrap();
        let y = CVector::from_fn(7, |i, _| Complex64::new((i as f64 * 1.3).sin(), (i as f64 * 0.7).cos()));
        let os = 3;
        let len = 21;
        let mut best = (f64::MIN, 0i64);
        for i in 0..len {
            let idx = centered_index(i, len);
            let v: Complex64 = (0..7)
                .map(|n| {
                    y[n].conj()
                        * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (n * i) as f64 / len as f64)
                })
                .sum();
            let sin = idx as f64 / (len as f64 * 0.5);
            if sin.abs() <= 1.0 && v.norm_sqr() > best.0 {
                best = (v.norm_sqr(), idx);
            }
        }
        let s = estimate_aoa_sine(&y, &g, 1.0, os).unwrap();
        assert!((s - best.1 as f64 / 10.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn error_bounded_by_half_bin(sin in -0.95f64..0.95, nx in 4usize..12, ny in 1usize..4, os in 4usize..17) {
            let g = ArrayGeometry::planar(nx, ny, 0.5).unwrap();
            let y = conj_steering(&g, sin.asin());
            let s = estimate_aoa_sine(&y, &g, 1.0, os).unwrap();
            // The Dirichlet main lobe is symmetric, so the peak bin is the
            // nearest grid point.
            let step = 1.0 / (0.5 * (nx * os) as f64);
            prop_assert!((s - sin).abs() <= 0.5 * step + 1e-9, "{} vs {} step {}", s, sin, step);
        }

        #[test]
        fn invariant_to_common_phase_and_scale(sin in -0.9f64..0.9, phase in -3.0f64..3.0, scale in 1e-6f64..1e6) {
            let g = ArrayGeometry::linear(10, 0.5).unwrap();
            let y = conj_steering(&g, sin.asin());
            let y2 = &y * Complex64::from_polar(scale, phase);
            prop_assert_eq!(estimate_aoa_sine(&y, &g, 1.0, 8).unwrap(), estimate_aoa_sine(&y2, &g, 1.0, 8).unwrap());
        }
    }
}
