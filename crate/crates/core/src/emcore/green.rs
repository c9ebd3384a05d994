//! Scalar and dyadic Green functions of the homogeneous time-harmonic
//! Maxwell problem, with their paraxial (Fraunhofer) approximations.
//!
//! The dyadic Green function is
//!
//! ```text
//! 𝔾(x, y; k) = G(x, y; k) [ (1 + m(kr)) 𝕀 − (1 + 3 m(kr)) r rᵀ / r² ],
//! m(s) = (i s − 1) / s²,   G(x, y; k) = exp(i k r) / (4π r),   r = x − y.
//! ```
//!
//! It is symmetric and normal, with eigenvalue `λ₁ = −2 m G` along `r` and
//! the doubly degenerate `λ₂ = (1 + m) G` on the plane orthogonal to `r`.

use std::f64::consts::PI;

use super::linalg::{norm3, sub3, CMat3, Point2, Point3, C64, ZERO};
use crate::error::{Error, Result};

/// Evaluations closer than this many wavelengths are rejected.
pub const SINGULARITY_GUARD_WAVELENGTHS: f64 = 1e-9;

fn check_separation(r: f64, k: f64) -> Result<()> {
    let guard = if k > 0.0 {
        SINGULARITY_GUARD_WAVELENGTHS * 2.0 * PI / k
    } else {
        0.0
    };
    if !(r > guard) {
        return Err(Error::SingularEvaluation { distance: r, guard });
    }
    Ok(())
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWavenumber(k))
    }
}

/// `m(kr) = (i kr − 1) / (kr)²`.
#[inline]
pub fn m_factor(kr: f64) -> C64 {
    C64::new(-1.0, kr) / (kr * kr)
}

#[inline]
fn scalar_green(k: f64, r: f64) -> C64 {
    let (s, c) = (k * r).sin_cos();
    C64::new(c, s) / (4.0 * PI * r)
}

/// Acoustic Green function `exp(ik‖x−y‖)/(4π‖x−y‖)`. `k = 0` is allowed
/// (static limit); `k` must otherwise be finite and non-negative.
pub fn acoustic_green(x: &Point3, y: &Point3, k: f64) -> Result<C64> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidWavenumber(k));
    }
    let r = norm3(&sub3(x, y));
    check_separation(r, k)?;
    Ok(scalar_green(k, r))
}

/// Dyadic Green function for a displacement `r = x − y` already known to be
/// non-degenerate. Hot-loop variant of [`dyadic_green`].
#[inline]
pub fn dyadic_green_displacement(d: &Point3, k: f64) -> CMat3 {
    let (a, b) = dyadic_green_parts(d, k);
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = b * (d[i] * d[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
        out[i][i] += a;
    }
    CMat3(out)
}

/// Scalars `(a, b)` with `𝔾 = a 𝕀 + b d dᵀ` for the displacement `d`.
#[inline]
pub fn dyadic_green_parts(d: &Point3, k: f64) -> (C64, C64) {
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let r = r2.sqrt();
    let g = scalar_green(k, r);
    let m = m_factor(k * r);
    ((m + 1.0) * g, -(m * 3.0 + 1.0) * g / r2)
}

/// Dyadic Green function 𝔾(x, y; k).
pub fn dyadic_green(x: &Point3, y: &Point3, k: f64) -> Result<CMat3> {
    check_k(k)?;
    let d = sub3(x, y);
    check_separation(norm3(&d), k)?;
    Ok(dyadic_green_displacement(&d, k))
}

/// Eigenvalues `(λ₁, λ₂)` of 𝔾 at separation `r`: `λ₁` belongs to the
/// direction `x − y`, `λ₂` (double) to its orthogonal complement.
pub fn dyadic_green_eigen(k: f64, r: f64) -> Result<(C64, C64)> {
    check_k(k)?;
    check_separation(r, k)?;
    let g = scalar_green(k, r);
    let m = m_factor(k * r);
    Ok((-2.0 * m * g, (m + 1.0) * g))
}

/// `cond(𝔾) = |(m(kr) + 1) / (2 m(kr))|`, which grows like `kr/2`.
pub fn green_condition_number(k: f64, r: f64) -> f64 {
    let m = m_factor(k * r);
    ((m + 1.0) / (2.0 * m)).norm()
}

/// Real orthogonal projector onto the plane orthogonal to `x − y`, for a
/// displacement already known to be non-zero.
#[inline]
pub fn projector_displacement(d: &Point3) -> [[f64; 3]; 3] {
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = -d[i] * d[j] / r2;
        }
        p[i][i] += 1.0;
    }
    p
}

/// `ℙ(x, y) = 𝕀 − (x−y)(x−y)ᵀ / ‖x−y‖²`.
pub fn projector(x: &Point3, y: &Point3) -> Result<CMat3> {
    let d = sub3(x, y);
    let r = norm3(&d);
    if !(r > 0.0) {
        return Err(Error::SingularEvaluation {
            distance: r,
            guard: 0.0,
        });
    }
    Ok(CMat3::from_real(projector_displacement(&d)))
}

/// Phase of the paraxial Green function,
/// `kL + k‖x_r‖²/(2L) − k x_r·y_cr/L + kη` for `y = (y_cr, L + η)`.
///
/// This is the first-order expansion of `k‖(x_r, 0) − y‖`; the cross term
/// carries a minus sign since `‖x_r − y_cr‖² = ‖x_r‖² − 2 x_r·y_cr + ‖y_cr‖²`.
#[inline]
pub fn paraxial_phase(x_r: &Point2, y: &Point3, k: f64, range: f64) -> f64 {
    let eta = y[2] - range;
    let xr2 = x_r[0] * x_r[0] + x_r[1] * x_r[1];
    let cross = x_r[0] * y[0] + x_r[1] * y[1];
    k * range + k * xr2 / (2.0 * range) - k * cross / range + k * eta
}

/// Fraunhofer approximation `G̃(x_r, y; k)` of the acoustic Green function
/// about the reference range `L`.
pub fn paraxial_green(x_r: &Point2, y: &Point3, k: f64, range: f64) -> Result<C64> {
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::InvalidRange(range));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidWavenumber(k));
    }
    let (s, c) = paraxial_phase(x_r, y, k, range).sin_cos();
    Ok(C64::new(c, s) / (4.0 * PI * range))
}
