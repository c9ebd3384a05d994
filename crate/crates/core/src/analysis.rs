//! Resolution measurements, ellipse parameters and checks of the
//! Fraunhofer asymptotics.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::emcore::{
    acoustic_green, dyadic_green, paraxial_phase, projector, relative, CMat3, Point3, Wavenumber, TINY,
};
use crate::error::{Error, Result};
use crate::imaging::point_spread_fraunhofer;
use crate::scene::{ArrayGeometry, ArrayShape, ImagingGrid};

/// Sampling line `origin + i·step`, `i = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub origin: Point3,
    pub step: Point3,
    pub n: usize,
}

/// `(position, magnitude)` pairs along `line`, sampled at the nearest grid
/// point. Positions are distances from `line.origin`.
pub fn profile(grid: &ImagingGrid, magnitudes: &[f64], line: &Line) -> Result<Vec<(f64, f64)>> {
    if line.n == 0 {
        return Err(Error::InvalidInput("empty profile line".into()));
    }
    if magnitudes.len() != grid.len() {
        return Err(Error::DataMismatch(format!(
            "{} magnitudes for {} grid points",
            magnitudes.len(),
            grid.len()
        )));
    }
    let h = (line.step.iter().map(|s| s * s).sum::<f64>()).sqrt();
    Ok((0..line.n)
        .map(|i| {
            let t = i as f64;
            let p = [
                line.origin[0] + t * line.step[0],
                line.origin[1] + t * line.step[1],
                line.origin[2] + t * line.step[2],
            ];
            (t * h, magnitudes[grid.nearest(&p)])
        })
        .collect())
}

/// Index of the largest magnitude (first on ties).
pub fn peak_index(profile: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(_, v)) in profile.iter().enumerate() {
        if best.is_none_or(|b| v > profile[b].1) {
            best = Some(i);
        }
    }
    best
}

/// Half the distance between the first local minima on either side of the
/// peak. A side without a sampled minimum falls back to the 10%-of-peak
/// crossing (linearly interpolated).
pub fn focal_width(profile: &[(f64, f64)], peak: Option<usize>) -> Result<f64> {
    let peak = match peak {
        Some(p) => p,
        None => peak_index(profile).ok_or(Error::InvalidInput("empty profile".into()))?,
    };
    if peak == 0 || peak + 1 >= profile.len() {
        return Err(Error::InvalidInput("profile peak lies on the boundary".into()));
    }
    let left = edge(profile, peak, -1)?;
    let right = edge(profile, peak, 1)?;
    Ok((right - left) / 2.0)
}

fn edge(profile: &[(f64, f64)], peak: usize, dir: isize) -> Result<f64> {
    let at = |i: isize| profile[i as usize];
    let last = if dir < 0 { 0 } else { profile.len() as isize - 1 };
    let mut i = peak as isize;
    while i != last {
        let next = i + dir;
        if at(next).1 > at(i).1 {
            return Ok(at(i).0);
        }
        if next == last && at(next).1 < at(i).1 {
            break;
        }
        i = next;
    }
    // no interior minimum: 10% crossing
    let level = 0.1 * at(peak as isize).1;
    let mut i = peak as isize;
    while i != last {
        let next = i + dir;
        let (x0, v0) = at(i);
        let (x1, v1) = at(next);
        if v1 <= level {
            let t = if v0 > v1 { (v0 - level) / (v0 - v1) } else { 1.0 };
            return Ok(x0 + t * (x1 - x0));
        }
        i = next;
    }
    Err(Error::InvalidInput(
        "profile never drops to a minimum or 10% of its peak".into(),
    ))
}

/// `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Σ aᵢbᵢ / √(Σaᵢ² Σbᵢ²)`.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    dot / (na * nb).sqrt().max(TINY)
}

/// Measured focal widths against the Rayleigh and bandwidth predictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub cross_range_width: f64,
    pub range_width: f64,
    /// `λL/a`.
    pub predicted_cross: f64,
    /// `2πc/B` passive, `πc/B` active.
    pub predicted_range: f64,
    pub cross_ratio: f64,
    pub range_ratio: f64,
}

impl ResolutionReport {
    /// `bandwidth` is the angular bandwidth `B` in rad/s.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cross_profile: &[(f64, f64)],
        range_profile: &[(f64, f64)],
        wavelength: f64,
        range: f64,
        aperture: f64,
        c: f64,
        bandwidth: f64,
        active: bool,
    ) -> Result<Self> {
        let cross_range_width = focal_width(cross_profile, None)?;
        let range_width = focal_width(range_profile, None)?;
        let predicted_cross = wavelength * range / aperture;
        let predicted_range = if active {
            PI * c / bandwidth
        } else {
            2.0 * PI * c / bandwidth
        };
        Ok(Self {
            cross_range_width,
            range_width,
            predicted_cross,
            predicted_range,
            cross_ratio: cross_range_width / predicted_cross,
            range_ratio: range_width / predicted_range,
        })
    }
}

/// Principal axes of a real symmetric 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    /// `|e₁| ≥ |e₂|`.
    pub semi_axes: [f64; 2],
    /// Signed eigenvalues matching `semi_axes`.
    pub eigenvalues: [f64; 2],
    /// Direction of the major axis, in `(−π/2, π/2]`.
    pub angle: f64,
}

impl EllipseParams {
    /// `R(θ) diag(e₁, e₂) R(θ)ᵀ`.
    pub fn reconstruct(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        let [e1, e2] = self.eigenvalues;
        [
            [e1 * c * c + e2 * s * s, (e1 - e2) * c * s],
            [(e1 - e2) * c * s, e1 * s * s + e2 * c * c],
        ]
    }

    /// Direction of the eigenvector of the algebraically largest
    /// eigenvalue, in `(−π/2, π/2]`. Unlike `angle` it stays well defined
    /// when the two eigenvalues have equal magnitude and opposite sign.
    pub fn angle_of_largest_eigenvalue(&self) -> f64 {
        if self.eigenvalues[0] >= self.eigenvalues[1] {
            self.angle
        } else {
            wrap_half_turn(self.angle + FRAC_PI_2)
        }
    }
}

/// Maps an axis direction into `(−π/2, π/2]`.
pub fn wrap_half_turn(mut theta: f64) -> f64 {
    while theta <= -FRAC_PI_2 {
        theta += PI;
    }
    while theta > FRAC_PI_2 {
        theta -= PI;
    }
    theta
}

/// Angle between two axis directions, in `[0, π/2]`.
pub fn axis_angle_difference(a: f64, b: f64) -> f64 {
    wrap_half_turn(a - b).abs()
}

/// Eigen-decomposition of a symmetric 2×2 matrix. The zero matrix maps to
/// axes `(0, 0)` with angle 0.
pub fn ellipse_of(m: &[[f64; 2]; 2]) -> Result<EllipseParams> {
    let scale = m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if !m.iter().flatten().all(|v| v.is_finite()) || (m[0][1] - m[1][0]).abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::InvalidInput(format!("matrix {m:?} is not symmetric")));
    }
    let (a, d) = (m[0][0], m[1][1]);
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + d);
    let h = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (hi, lo) = (mean + h, mean - h);
    let theta_hi = 0.5 * (2.0 * b).atan2(a - d);
    let (eigenvalues, angle) = if hi.abs() >= lo.abs() {
        ([hi, lo], theta_hi)
    } else {
        ([lo, hi], theta_hi + FRAC_PI_2)
    };
    Ok(EllipseParams {
        semi_axes: [eigenvalues[0].abs(), eigenvalues[1].abs()],
        eigenvalues,
        angle: wrap_half_turn(angle),
    })
}

/// Deviation of the normalized Fraunhofer point-spread matrix of a disk
/// array from `diag(1, 1, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskPsfReport {
    /// `‖(16πL²/a²) ℍ̃(y*, y*) − diag(1, 1, 0)‖_F`.
    pub discrepancy: f64,
    pub a_over_l: f64,
    /// Cross-range offset of `y*` over `L`.
    pub b_over_l: f64,
    /// `a²/L² + b/L`.
    pub error_scale: f64,
}

/// Checks the disk-array point-spread asymptotic at `y_star`.
pub fn validate_disk_psf(array: &ArrayGeometry, y_star: &Point3, k: Wavenumber, range: f64) -> Result<DiskPsfReport> {
    let radius = match array.shape() {
        ArrayShape::Disk { radius, .. } => *radius,
        _ => return Err(Error::InvalidArray("disk point-spread check needs a disk array".into())),
    };
    let h = point_spread_fraunhofer(y_star, y_star, k, array, range)?;
    let normalized = h * (16.0 * PI * range * range / (radius * radius));
    let target = CMat3::from_real([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
    let a_over_l = radius / range;
    let b_over_l = (y_star[0] * y_star[0] + y_star[1] * y_star[1]).sqrt() / range;
    Ok(DiskPsfReport {
        discrepancy: (normalized - target).frobenius(),
        a_over_l,
        b_over_l,
        error_scale: a_over_l * a_over_l + b_over_l,
    })
}

/// Worst-case errors of the Fraunhofer expansions over an array and a
/// window of imaging points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FraunhoferReport {
    /// `max |k‖x_r − y‖ − paraxial phase|` (rad).
    pub max_phase_error: f64,
    /// `max |L/‖x_r − y‖ − 1|`, the amplitude ratio `|G|/|G̃| − 1`.
    pub max_amplitude_error: f64,
    /// `max ‖𝔾 − G ℙ‖_F / ‖𝔾‖_F`.
    pub max_dyadic_error: f64,
    /// `k a²/L`.
    pub theta_a: f64,
    /// `k b²/L` with `b` the largest cross-range offset in the window.
    pub theta_b: f64,
    /// `a²/L²`.
    pub amplitude_scale: f64,
}

pub fn validate_fraunhofer(
    array: &ArrayGeometry,
    window: &[Point3],
    k: Wavenumber,
    range: f64,
) -> Result<FraunhoferReport> {
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::InvalidRange(range));
    }
    let kv = k.get();
    let mut report = FraunhoferReport {
        max_phase_error: 0.0,
        max_amplitude_error: 0.0,
        max_dyadic_error: 0.0,
        theta_a: 0.0,
        theta_b: 0.0,
        amplitude_scale: 0.0,
    };
    let mut b: f64 = 0.0;
    for y in window {
        b = b.max((y[0] * y[0] + y[1] * y[1]).sqrt());
        for (i, e) in array.elements().iter().enumerate() {
            let x = array.position(i);
            let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + y[2] * y[2]).sqrt();
            let phase = (kv * dist - paraxial_phase(e, y, kv, range)).abs();
            report.max_phase_error = report.max_phase_error.max(phase);
            report.max_amplitude_error = report.max_amplitude_error.max((range / dist - 1.0).abs());
            let g = dyadic_green(&x, y, kv)?;
            let gp = projector(&x, y)? * acoustic_green(&x, y, kv)?;
            report.max_dyadic_error = report
                .max_dyadic_error
                .max(relative((gp - g).frobenius(), g.frobenius()));
        }
    }
    let a = array.aperture();
    report.theta_a = kv * a * a / range;
    report.theta_b = kv * b * b / range;
    report.amplitude_scale = a * a / (range * range);
    Ok(report)
}
