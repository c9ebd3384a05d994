//! Kirchhoff migration images, point-spread matrices and cross-range
//! recovery of polarization vectors and polarizability tensors.
//!
//! Passive imaging back-propagates the recorded field,
//! `𝓘(y; k) = (μω²)⁻¹ Σ_r w_r conj(𝔾(x_r, y; k)) Π(x_r; k)`, which for
//! synthetic data equals `Σⱼ ℍ(y, yⱼ; k) pⱼ` with the point-spread matrix
//! `ℍ(y, y'; k) = Σ_r w_r conj(𝔾(x_r, y; k)) 𝔾(x_r, y'; k)`.
//!
//! Active imaging applies the conjugate Green function on both sides of
//! the response matrix, `𝕀(y; k) = Σ_{r,s} w_r w_s conj(𝔾_r) Π_rs conj(𝔾_s)`,
//! which for Born data equals `Σₙ ℍ(y, yₙ) αₙ ℍ(y, yₙ)ᵀ`.
//!
//! The range components are not recoverable: ℍ(y, y) has a small (3,3)
//! entry, so only the cross-range 2×2 blocks are inverted. Recovered values
//! carry an oscillating phase in range that is removed by rotating a pivot
//! entry onto the positive real axis.
//!
//! Every grid point is evaluated independently with a fixed reduction
//! order, and grid points are processed in fixed-size chunks, so results
//! are bitwise independent of the thread count.

use matrixmultiply::{zgemm, CGemmOption};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emcore::{
    dyadic_green_parts, paraxial_green, projector_displacement, CMat2, CMat3, CVec2, CVec3, MediumParams, Point2,
    Point3, Wavenumber, C64,
};
use crate::error::{Error, Result};
use crate::forward::{ActiveData, PassiveData};
use crate::scene::{ArrayGeometry, FrequencyBand, ImagingGrid, Scatterer};

/// Linear systems with a larger 2-norm condition number are refused.
pub const MAX_COND: f64 = 1e12;

/// Grid points per work unit.
const CHUNK: usize = 64;

const CZERO: C64 = C64::new(0.0, 0.0);

/// `𝔾(x_r, y) = a 𝕀 + b d dᵀ` with `d = (x_r, 0) − y`.
#[derive(Clone, Copy)]
struct Parts {
    a: C64,
    b: C64,
    d: Point3,
}

impl Parts {
    #[inline]
    fn new(x_r: &Point2, y: &Point3, k: f64) -> Self {
        let d = [x_r[0] - y[0], x_r[1] - y[1], -y[2]];
        let (a, b) = dyadic_green_parts(&d, k);
        Self { a, b, d }
    }

    fn for_array(array: &ArrayGeometry, y: &Point3, k: f64) -> Vec<Self> {
        array.elements().iter().map(|e| Self::new(e, y, k)).collect()
    }

    /// `w conj(𝔾) v`.
    #[inline]
    fn conj_apply(&self, v: &CVec3, w: f64) -> CVec3 {
        let d = &self.d;
        let dv = v.0[0] * d[0] + v.0[1] * d[1] + v.0[2] * d[2];
        let a = self.a.conj() * w;
        let s = self.b.conj() * dv * w;
        CVec3([a * v.0[0] + s * d[0], a * v.0[1] + s * d[1], a * v.0[2] + s * d[2]])
    }

    /// `w conj(𝔾) 𝔾`, which is real: `|a|² 𝕀 + (2 Re(ā b) + |b|² r²) d dᵀ`.
    #[inline]
    fn gram(&self, w: f64, acc: &mut [[f64; 3]; 3]) {
        let d = &self.d;
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let diag = self.a.norm_sqr() * w;
        let c = (2.0 * (self.a.conj() * self.b).re + self.b.norm_sqr() * r2) * w;
        for i in 0..3 {
            for j in 0..3 {
                acc[i][j] += c * d[i] * d[j];
            }
            acc[i][i] += diag;
        }
    }

    /// `w conj(𝔾_self) 𝔾_other`.
    #[inline]
    fn conj_mul(&self, o: &Parts, w: f64, acc: &mut CMat3) {
        let (d, e) = (&self.d, &o.d);
        let ac = self.a.conj() * w;
        let bc = self.b.conj() * w;
        let s0 = ac * o.a;
        let s1 = ac * o.b;
        let s2 = bc * o.a;
        let s3 = bc * o.b * (d[0] * e[0] + d[1] * e[1] + d[2] * e[2]);
        for i in 0..3 {
            for j in 0..3 {
                acc.0[i][j] += s1 * (e[i] * e[j]) + s2 * (d[i] * d[j]) + s3 * (d[i] * e[j]);
            }
            acc.0[i][i] += s0;
        }
    }

    /// Dense `conj(𝔾)` (symmetric).
    #[inline]
    fn conj_matrix(&self) -> [[C64; 3]; 3] {
        let (a, b, d) = (self.a.conj(), self.b.conj(), &self.d);
        let mut m = [[CZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = b * (d[i] * d[j]);
            }
            m[i][i] += a;
        }
        m
    }
}

fn check_point(p: &Point3) -> Result<()> {
    if p[2] > 0.0 && p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::OnArrayPlane { point: *p })
    }
}

/// Runs `f` on fixed-size chunks of grid points in parallel and
/// concatenates the per-point results in grid order.
fn map_chunks<T, F>(points: &[Point3], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[Point3]) -> Vec<T> + Sync,
{
    points
        .par_chunks(CHUNK)
        .map(&f)
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Vector-valued image on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorImage {
    pub grid: ImagingGrid,
    pub values: Vec<CVec3>,
    /// Frequencies integrated into the image (a single sample for a
    /// single-frequency image).
    pub band: FrequencyBand,
}

/// Matrix-valued image on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorImage {
    pub grid: ImagingGrid,
    pub values: Vec<CMat3>,
    pub band: FrequencyBand,
}

impl VectorImage {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(CVec3::norm).collect()
    }
}

impl TensorImage {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(CMat3::frobenius).collect()
    }
}

/// Point-spread matrix `ℍ(y, y₂; k)` by array quadrature.
pub fn point_spread(y: &Point3, y2: &Point3, k: Wavenumber, array: &ArrayGeometry) -> Result<CMat3> {
    check_point(y)?;
    check_point(y2)?;
    let k = k.get();
    let mut h = CMat3::zero();
    for (e, &w) in array.elements().iter().zip(array.weights()) {
        Parts::new(e, y, k).conj_mul(&Parts::new(e, y2, k), w, &mut h);
    }
    Ok(h)
}

/// Fraunhofer point-spread matrix about the reference range `range`:
/// `Σ_r w_r conj(G̃(x_r, y)) G̃(x_r, y₂) ℙ(x_r, y) ℙ(x_r, y₂)`.
pub fn point_spread_fraunhofer(
    y: &Point3,
    y2: &Point3,
    k: Wavenumber,
    array: &ArrayGeometry,
    range: f64,
) -> Result<CMat3> {
    check_point(y)?;
    check_point(y2)?;
    let k = k.get();
    let mut h = CMat3::zero();
    for (e, &w) in array.elements().iter().zip(array.weights()) {
        let phase = paraxial_green(e, y, k, range)?.conj() * paraxial_green(e, y2, k, range)? * w;
        let p1 = projector_displacement(&[e[0] - y[0], e[1] - y[1], -y[2]]);
        let p2 = projector_displacement(&[e[0] - y2[0], e[1] - y2[1], -y2[2]]);
        for i in 0..3 {
            for j in 0..3 {
                let pp = p1[i][0] * p2[0][j] + p1[i][1] * p2[1][j] + p1[i][2] * p2[2][j];
                h.0[i][j] += phase * pp;
            }
        }
    }
    Ok(h)
}

/// `ℍ(y, y; k)` at every grid point.
pub fn psf_diagonal(grid: &ImagingGrid, k: Wavenumber, array: &ArrayGeometry) -> Result<Vec<CMat3>> {
    grid.check_off_array_plane()?;
    let k = k.get();
    Ok(map_chunks(grid.points(), |pts| {
        pts.iter()
            .map(|y| {
                let mut acc = [[0.0; 3]; 3];
                for (e, &w) in array.elements().iter().zip(array.weights()) {
                    Parts::new(e, y, k).gram(w, &mut acc);
                }
                CMat3::from_real(acc)
            })
            .collect()
    }))
}

/// Band-integrated `Σ_f w_f ℍ(y, y; k_f)` at every grid point.
pub fn psf_diagonal_band(
    grid: &ImagingGrid,
    band: &FrequencyBand,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<Vec<CMat3>> {
    let mut total = vec![CMat3::zero(); grid.len()];
    for (&omega, &wf) in band.samples().iter().zip(band.weights()) {
        let h = psf_diagonal(grid, medium.wavenumber(omega)?, array)?;
        for (t, v) in total.iter_mut().zip(h) {
            *t += v * wf;
        }
    }
    Ok(total)
}

/// Passive image and `ℍ(y, y)` accumulated over the listed frequencies
/// with the given weights.
fn passive_core(
    data: &PassiveData,
    grid: &ImagingGrid,
    array: &ArrayGeometry,
    medium: &MediumParams,
    freqs: &[(usize, f64)],
) -> Result<(Vec<CVec3>, Vec<CMat3>)> {
    medium.validate()?;
    data.check_against(array)?;
    grid.check_off_array_plane()?;
    let setup: Vec<(f64, f64, &[CVec3])> = freqs
        .iter()
        .map(|&(f, wf)| {
            let omega = data.band.samples()[f];
            let k = medium.wavenumber(omega)?.get();
            Ok((k, wf / medium.source_factor(omega), data.fields[f].as_slice()))
        })
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = freqs.iter().map(|&(_, wf)| wf).collect();
    let pairs = map_chunks(grid.points(), |pts| {
        pts.iter()
            .map(|y| {
                let mut img = CVec3::zero();
                let mut psf = [[0.0; 3]; 3];
                for (&(k, scale, field), &wf) in setup.iter().zip(&weights) {
                    let mut acc = CVec3::zero();
                    let mut h = [[0.0; 3]; 3];
                    for ((e, &w), v) in array.elements().iter().zip(array.weights()).zip(field) {
                        let p = Parts::new(e, y, k);
                        acc += p.conj_apply(v, w);
                        p.gram(w, &mut h);
                    }
                    img += acc * scale;
                    for i in 0..3 {
                        for j in 0..3 {
                            psf[i][j] += wf * h[i][j];
                        }
                    }
                }
                (img, CMat3::from_real(psf))
            })
            .collect()
    });
    Ok(pairs.into_iter().unzip())
}

/// Single-frequency passive image at frequency sample `freq` of the data.
pub fn passive_image(
    data: &PassiveData,
    freq: usize,
    grid: &ImagingGrid,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<VectorImage> {
    if freq >= data.band.len() {
        return Err(Error::DataMismatch(format!("frequency index {freq} out of range")));
    }
    let (values, _) = passive_core(data, grid, array, medium, &[(freq, 1.0)])?;
    Ok(VectorImage {
        grid: grid.clone(),
        values,
        band: FrequencyBand::single(data.band.samples()[freq])?,
    })
}

/// Band-integrated passive image together with the band-integrated
/// `ℍ(y, y)` needed by [`recover_polarization_crossrange`].
pub fn passive_image_band_with_psf(
    data: &PassiveData,
    grid: &ImagingGrid,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<(VectorImage, Vec<CMat3>)> {
    let freqs: Vec<(usize, f64)> = data.band.weights().iter().copied().enumerate().collect();
    let (values, psf) = passive_core(data, grid, array, medium, &freqs)?;
    Ok((
        VectorImage {
            grid: grid.clone(),
            values,
            band: data.band.clone(),
        },
        psf,
    ))
}

/// Trapezoid-rule band integral of the single-frequency passive images.
/// A degenerate band returns the single-frequency image unscaled.
pub fn passive_image_band(
    data: &PassiveData,
    grid: &ImagingGrid,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<VectorImage> {
    Ok(passive_image_band_with_psf(data, grid, array, medium)?.0)
}

/// Single-frequency active image from a dense response matrix.
///
/// Per chunk of grid points, `A` stacks the `3N × 3` blocks
/// `w_r conj(𝔾(x_r, y))`; the image is `Aᵀ Π A`, with `Π A` computed as
/// one complex matrix product.
pub fn active_image(
    data: &ActiveData,
    freq: usize,
    grid: &ImagingGrid,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<TensorImage> {
    medium.validate()?;
    data.check_against(array)?;
    grid.check_off_array_plane()?;
    if freq >= data.band.len() {
        return Err(Error::DataMismatch(format!("frequency index {freq} out of range")));
    }
    let omega = data.band.samples()[freq];
    let k = medium.wavenumber(omega)?.get();
    let n3 = data.dim();
    let pi = &data.responses[freq];
    let values = map_chunks(grid.points(), |pts| {
        let cols = 3 * pts.len();
        let mut a = vec![CZERO; n3 * cols];
        for (p, y) in pts.iter().enumerate() {
            for (r, (e, &w)) in array.elements().iter().zip(array.weights()).enumerate() {
                let g = Parts::new(e, y, k).conj_matrix();
                for (ai, row) in g.iter().enumerate() {
                    let base = (3 * r + ai) * cols + 3 * p;
                    for (i, v) in row.iter().enumerate() {
                        a[base + i] = v * w;
                    }
                }
            }
        }
        let mut t = vec![CZERO; n3 * cols];
        // C64 is repr(C) {re, im}, layout-compatible with [f64; 2].
        unsafe {
            zgemm(
                CGemmOption::Standard,
                CGemmOption::Standard,
                n3,
                n3,
                cols,
                [1.0, 0.0],
                pi.as_ptr() as *const [f64; 2],
                n3 as isize,
                1,
                a.as_ptr() as *const [f64; 2],
                cols as isize,
                1,
                [0.0, 0.0],
                t.as_mut_ptr() as *mut [f64; 2],
                cols as isize,
                1,
            );
        }
        (0..pts.len())
            .map(|p| {
                let mut m = CMat3::zero();
                for q in 0..n3 {
                    let arow = &a[q * cols + 3 * p..q * cols + 3 * p + 3];
                    let trow = &t[q * cols + 3 * p..q * cols + 3 * p + 3];
                    for i in 0..3 {
                        for j in 0..3 {
                            m.0[i][j] += arow[i] * trow[j];
                        }
                    }
                }
                m
            })
            .collect()
    });
    Ok(TensorImage {
        grid: grid.clone(),
        values,
        band: FrequencyBand::single(omega)?,
    })
}

/// Single-frequency active images for every frequency sample of the data.
pub fn active_images(
    data: &ActiveData,
    grid: &ImagingGrid,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<Vec<TensorImage>> {
    (0..data.band.len())
        .map(|f| active_image(data, f, grid, array, medium))
        .collect()
}

/// Noise-free active images computed from the scene through
/// `𝕀(y; k) = Σₙ ℍ(y, yₙ; k) αₙ ℍ(y, yₙ; k)ᵀ`, one per frequency sample.
///
/// Equal to [`active_images`] applied to [`crate::forward::synthesize_active`]
/// data, without storing the `(3N)²` response matrix. Green functions to
/// the scatterers are generated on the fly, so the memory cost does not
/// grow with the number of scatterers.
pub fn active_image_scene(
    scatterers: &[Scatterer],
    grid: &ImagingGrid,
    band: &FrequencyBand,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<Vec<TensorImage>> {
    medium.validate()?;
    grid.check_off_array_plane()?;
    for s in scatterers {
        s.validate()?;
        check_point(&s.position)?;
    }
    let weights = array.weights();
    band.samples()
        .iter()
        .map(|&omega| {
            let k = medium.wavenumber(omega)?.get();
            let values = map_chunks(grid.points(), |pts| {
                let at_points: Vec<Vec<Parts>> = pts.iter().map(|y| Parts::for_array(array, y, k)).collect();
                let mut out = vec![CMat3::zero(); pts.len()];
                for s in scatterers {
                    let at_s = Parts::for_array(array, &s.position, k);
                    for (img, gp) in out.iter_mut().zip(&at_points) {
                        let mut h = CMat3::zero();
                        for ((p, q), &w) in gp.iter().zip(&at_s).zip(weights) {
                            p.conj_mul(q, w, &mut h);
                        }
                        *img += h * s.polarizability * h.transpose();
                    }
                }
                out
            });
            Ok(TensorImage {
                grid: grid.clone(),
                values,
                band: FrequencyBand::single(omega)?,
            })
        })
        .collect()
}

/// Trapezoid-rule band integral of per-frequency tensor images.
pub fn integrate_band(images: &[TensorImage], band: &FrequencyBand) -> Result<TensorImage> {
    let first = images
        .first()
        .ok_or(Error::InvalidBand("no images to integrate".into()))?;
    if images.len() != band.len() || images.iter().any(|im| im.values.len() != first.values.len()) {
        return Err(Error::DataMismatch("one image per frequency sample is required".into()));
    }
    let mut values = vec![CMat3::zero(); first.values.len()];
    for (im, &wf) in images.iter().zip(band.weights()) {
        for (t, v) in values.iter_mut().zip(&im.values) {
            *t += *v * wf;
        }
    }
    Ok(TensorImage {
        grid: first.grid.clone(),
        values,
        band: band.clone(),
    })
}

/// Band-integrated active image from dense data.
pub fn active_image_band(
    data: &ActiveData,
    grid: &ImagingGrid,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<TensorImage> {
    integrate_band(&active_images(data, grid, array, medium)?, &data.band)
}

/// Solves the full 3×3 system `ℍ p = 𝓘` through an SVD. Returns the
/// solution and the condition number of `ℍ`; refuses `cond > MAX_COND`.
///
/// In the Fraunhofer regime `ℍ(y, y)` is nearly rank two, so this is the
/// ill-conditioned baseline that the cross-range solves avoid.
pub fn recover_polarization_full(image_value: &CVec3, h: &CMat3) -> Result<(CVec3, f64)> {
    h.svd_solve(image_value, MAX_COND)
}

/// Threshold `δ` of the phase correction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DeltaRule {
    Absolute(f64),
    /// Fraction of the largest pivot magnitude in the image.
    RelativeToMax(f64),
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::RelativeToMax(1e-6)
    }
}

impl DeltaRule {
    pub fn resolve(&self, max_pivot: f64) -> Result<f64> {
        let (v, d) = match *self {
            DeltaRule::Absolute(d) => (d, d),
            DeltaRule::RelativeToMax(f) => (f, f * max_pivot),
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "phase-correction threshold {v} must be >= 0"
            )));
        }
        Ok(d)
    }
}

fn phase_factor(primary: C64, fallback: C64, delta: f64) -> C64 {
    let pivot = if primary.norm() <= delta && fallback.norm() > primary.norm() {
        fallback
    } else {
        primary
    };
    let m = pivot.norm();
    if m == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        pivot.conj() / (m + delta)
    }
}

/// Factor `conj(p_x)/(|p_x| + δ)`, pivoting on `p_y` when `|p_x| ≤ δ` and
/// `|p_y| > |p_x|`. A zero vector gets factor 1.
pub fn vector_phase_factor(p: &CVec2, delta: f64) -> C64 {
    phase_factor(p.0[0], p.0[1], delta)
}

/// Rotates `p` so that its pivot entry is real and non-negative.
pub fn phase_correct_vector(p: &CVec2, delta: f64) -> CVec2 {
    p.scale(vector_phase_factor(p, delta))
}

/// Factor `conj(α₁₁)/(|α₁₁| + δ)`, pivoting on `α₂₂` when `|α₁₁| ≤ δ` and
/// `|α₂₂| > |α₁₁|`.
pub fn tensor_phase_factor(alpha: &CMat2, delta: f64) -> C64 {
    phase_factor(alpha.0[0][0], alpha.0[1][1], delta)
}

/// Rotates `alpha` so that its pivot entry is real and non-negative.
pub fn phase_correct_tensor(alpha: &CMat2, delta: f64) -> CMat2 {
    alpha.scale(tensor_phase_factor(alpha, delta))
}

/// Per-point cross-range recovery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossRangeRecovery<T> {
    pub grid: ImagingGrid,
    /// Phase-corrected values.
    pub values: Vec<T>,
    /// Values before phase correction.
    pub uncorrected: Vec<T>,
    /// Condition number of the solved 2×2 block (worst over frequencies
    /// for tensor recovery); `inf` for singular points.
    pub cond: Vec<f64>,
    /// Phase-correction factors applied.
    pub factors: Vec<C64>,
    /// Points whose block was singular; their values are zero.
    pub singular: Vec<bool>,
    /// Resolved threshold `δ`.
    pub delta: f64,
}

impl<T> CrossRangeRecovery<T> {
    pub fn singular_fraction(&self) -> f64 {
        self.singular.iter().filter(|&&s| s).count() as f64 / self.singular.len().max(1) as f64
    }
}

impl CrossRangeRecovery<CVec2> {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(CVec2::norm).collect()
    }
}

impl CrossRangeRecovery<CMat2> {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(CMat2::frobenius).collect()
    }
}

fn invert_block(h: &CMat2) -> Option<(CMat2, f64)> {
    let cond = h.cond();
    if !(cond <= MAX_COND) {
        return None;
    }
    h.inverse().map(|inv| (inv, cond))
}

/// Cross-range polarization at every grid point from a (band-integrated)
/// passive image and the matching integrated `ℍ(y, y)`:
/// `[∫ℍ_{1:2,1:2}] p = ∫𝓘_{1:2}`, followed by phase correction.
pub fn recover_polarization_crossrange(
    image: &VectorImage,
    psf: &[CMat3],
    delta: DeltaRule,
) -> Result<CrossRangeRecovery<CVec2>> {
    if psf.len() != image.values.len() {
        return Err(Error::DataMismatch(format!(
            "{} point-spread matrices for {} image points",
            psf.len(),
            image.values.len()
        )));
    }
    let n = psf.len();
    let mut uncorrected = vec![CVec2::default(); n];
    let mut cond = vec![f64::INFINITY; n];
    let mut singular = vec![true; n];
    for i in 0..n {
        if let Some((inv, c)) = invert_block(&psf[i].block2()) {
            uncorrected[i] = inv.mul_vec(&image.values[i].cross_range());
            cond[i] = c;
            singular[i] = false;
        }
    }
    let max_pivot = uncorrected.iter().map(|p| p.0[0].norm()).fold(0.0, f64::max);
    let delta = delta.resolve(max_pivot)?;
    let factors: Vec<C64> = uncorrected.iter().map(|p| vector_phase_factor(p, delta)).collect();
    let values = uncorrected.iter().zip(&factors).map(|(p, f)| p.scale(*f)).collect();
    Ok(CrossRangeRecovery {
        grid: image.grid.clone(),
        values,
        uncorrected,
        cond,
        factors,
        singular,
        delta,
    })
}

/// Cross-range polarizability at every grid point from single-frequency
/// active images and the matching `ℍ(y, y; k_f)`:
/// `α = B⁻¹ ∫ ℍ₂⁻¹ 𝕀₂ ℍ₂⁻ᵀ dω` (trapezoid rule), followed by phase
/// correction. A degenerate band uses the single estimate.
pub fn recover_polarizability_crossrange(
    images: &[TensorImage],
    psfs: &[Vec<CMat3>],
    band: &FrequencyBand,
    delta: DeltaRule,
) -> Result<CrossRangeRecovery<CMat2>> {
    if images.len() != band.len() || psfs.len() != band.len() {
        return Err(Error::DataMismatch(
            "one image and one PSF set per frequency are required".into(),
        ));
    }
    let n = images[0].values.len();
    if images.iter().any(|im| im.values.len() != n) || psfs.iter().any(|p| p.len() != n) {
        return Err(Error::DataMismatch("images and PSFs must share the grid".into()));
    }
    let avg = band.averaging_factor();
    let mut uncorrected = vec![CMat2::zero(); n];
    let mut cond = vec![0.0f64; n];
    let mut singular = vec![false; n];
    for i in 0..n {
        let mut acc = CMat2::zero();
        for ((im, psf), &wf) in images.iter().zip(psfs).zip(band.weights()) {
            match invert_block(&psf[i].block2()) {
                Some((inv, c)) => {
                    acc = acc + inv * im.values[i].block2() * inv.transpose() * wf;
                    cond[i] = cond[i].max(c);
                }
                None => {
                    singular[i] = true;
                    break;
                }
            }
        }
        if singular[i] {
            cond[i] = f64::INFINITY;
        } else {
            uncorrected[i] = acc * avg;
        }
    }
    let max_pivot = uncorrected.iter().map(|a| a.0[0][0].norm()).fold(0.0, f64::max);
    let delta = delta.resolve(max_pivot)?;
    let factors: Vec<C64> = uncorrected.iter().map(|a| tensor_phase_factor(a, delta)).collect();
    let values = uncorrected.iter().zip(&factors).map(|(a, f)| a.scale(*f)).collect();
    Ok(CrossRangeRecovery {
        grid: images[0].grid.clone(),
        values,
        uncorrected,
        cond,
        factors,
        singular,
        delta,
    })
}

/// Per-frequency `ℍ(y, y; k_f)` for every sample of `band`.
pub fn psf_diagonal_per_frequency(
    grid: &ImagingGrid,
    band: &FrequencyBand,
    array: &ArrayGeometry,
    medium: &MediumParams,
) -> Result<Vec<Vec<CMat3>>> {
    band.samples()
        .iter()
        .map(|&omega| psf_diagonal(grid, medium.wavenumber(omega)?, array))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emcore::dyadic_green;
    use crate::forward::{synthesize_active, synthesize_passive};
    use crate::scene::{make_band, make_square_array, Dipole};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn k(v: f64) -> Wavenumber {
        Wavenumber::new(v).unwrap()
    }

    fn setup() -> (ArrayGeometry, FrequencyBand, MediumParams) {
        (
            make_square_array(0.6, 4).unwrap(),
            make_band(2.4e9, 1.2e9, 3).unwrap(),
            MediumParams::default(),
        )
    }

    #[test]
    fn point_spread_matches_dense_products() {
        let (array, _, _) = setup();
        let (y, y2) = ([0.02, -0.01, 1.0], [0.1, 0.05, 1.2]);
        let h = point_spread(&y, &y2, k(40.0), &array).unwrap();
        let mut expected = CMat3::zero();
        for i in 0..array.len() {
            let x = array.position(i);
            let g1 = dyadic_green(&x, &y, 40.0).unwrap();
            let g2 = dyadic_green(&x, &y2, 40.0).unwrap();
            expected += g1.conj() * g2 * array.weights()[i];
        }
        assert!(h.rel_diff(&expected) < 1e-13);
        let diag = point_spread(&y, &y, k(40.0), &array).unwrap();
        assert!(diag.is_symmetric(1e-10));
        assert!(
            diag.rel_diff(&psf_diagonal(&ImagingGrid::from_points(vec![y]).unwrap(), k(40.0), &array).unwrap()[0])
                < 1e-13
        );
        assert!(point_spread(&[0.0, 0.0, 0.0], &y, k(1.0), &array).is_err());
    }

    #[test]
    fn fraunhofer_psf_phase_and_k_independence() {
        let (array, _, _) = setup();
        let range = 1.0;
        let y = [0.01, 0.02, range];
        let kv = 30.0;
        let h1 = point_spread_fraunhofer(&y, &y, k(kv), &array, range).unwrap();
        let h2 = point_spread_fraunhofer(&y, &y, k(2.0 * kv), &array, range).unwrap();
        assert!(h1.rel_diff(&h2) < 1e-14);
        // shifting y₂ in range by π/k flips the common phase
        let y2 = [y[0], y[1], y[2] + std::f64::consts::PI / kv];
        let shifted = [y[0], y[1], y[2] + 2.0 * std::f64::consts::PI / kv];
        let a = point_spread_fraunhofer(&y, &y2, k(kv), &array, range).unwrap();
        let b = point_spread_fraunhofer(&y, &shifted, k(kv), &array, range).unwrap();
        // projectors change slightly with the range shift; the phase dominates
        assert!((a + b).frobenius() < 0.05 * a.frobenius());
    }

    #[test]
    fn passive_image_equals_psf_times_polarization() {
        let (array, band, medium) = setup();
        let p = CVec3::new(c(1.0, 2.0), c(1.0, -1.0), c(1.0, 1.0));
        let ystar = [0.0, 0.0, 1.0];
        let data = synthesize_passive(&[Dipole::new(ystar, p).unwrap()], &array, &band, &medium).unwrap();
        let grid = ImagingGrid::from_points(vec![ystar, [0.05, -0.02, 1.1]]).unwrap();
        let img = passive_image(&data, 1, &grid, &array, &medium).unwrap();
        let kv = medium.wavenumber(band.samples()[1]).unwrap();
        for (y, v) in grid.points().iter().zip(&img.values) {
            let expected = point_spread(y, &ystar, kv, &array).unwrap().mul_vec(&p);
            assert!((*v - expected).norm() <= 1e-12 * expected.norm());
        }
        let zero = synthesize_passive(&[], &array, &band, &medium).unwrap();
        let zimg = passive_image_band(&zero, &grid, &array, &medium).unwrap();
        assert!(zimg.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn band_image_is_weighted_sum() {
        let (array, band, medium) = setup();
        let d = Dipole::new([0.01, 0.0, 1.0], CVec3::from_real([1.0, -1.0, 0.5])).unwrap();
        let data = synthesize_passive(&[d], &array, &band, &medium).unwrap();
        let grid = ImagingGrid::line([0.0, 0.0, 0.95], [0.0, 0.0, 0.05], 3).unwrap();
        let (total, psf) = passive_image_band_with_psf(&data, &grid, &array, &medium).unwrap();
        let psf_ref = psf_diagonal_band(&grid, &band, &array, &medium).unwrap();
        for i in 0..grid.len() {
            let mut expected = CVec3::zero();
            for f in 0..band.len() {
                expected += passive_image(&data, f, &grid, &array, &medium).unwrap().values[i] * band.weights()[f];
            }
            assert!((total.values[i] - expected).norm() <= 1e-12 * expected.norm());
            assert!(psf[i].rel_diff(&psf_ref[i]) < 1e-13);
        }
    }

    #[test]
    fn active_dense_and_scene_images_agree() {
        let (array, band, medium) = setup();
        let alpha = CMat3([
            [c(2.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(1.0, 0.0), c(2.0, 2.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.5)],
        ]);
        let scat = vec![
            Scatterer::new([0.0, 0.0, 1.0], alpha).unwrap(),
            Scatterer::new([0.1, -0.05, 1.1], CMat3::identity()).unwrap(),
        ];
        let data = synthesize_active(&scat, &array, &band, &medium).unwrap();
        let pts: Vec<Point3> = (0..70)
            .map(|i| [0.002 * i as f64, 0.0, 1.0 + 0.001 * i as f64])
            .collect();
        let grid = ImagingGrid::from_points(pts).unwrap();
        let dense = active_images(&data, &grid, &array, &medium).unwrap();
        let scene = active_image_scene(&scat, &grid, &band, &array, &medium).unwrap();
        for (a, b) in dense.iter().zip(&scene) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(x.rel_diff(y) < 1e-11, "{}", x.rel_diff(y));
            }
        }
        // single scatterer identity 𝕀 = ℍ α ℍᵀ
        let one = &scat[..1];
        let img = active_image_scene(one, &grid, &band, &array, &medium).unwrap();
        let kv = medium.wavenumber(band.samples()[0]).unwrap();
        let y = grid.points()[5];
        let h = point_spread(&y, &one[0].position, kv, &array).unwrap();
        assert!(img[0].values[5].rel_diff(&(h * alpha * h.transpose())) < 1e-12);
    }

    #[test]
    fn phase_correction_examples() {
        let p = CVec2([c(0.0, -2.0), c(1.0, 1.0)]);
        let q = phase_correct_vector(&p, 0.0);
        assert!((q.0[0] - c(2.0, 0.0)).norm() < 1e-15 && (q.0[1] - c(-1.0, 1.0)).norm() < 1e-15);
        let r = CVec2([c(3.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(phase_correct_vector(&r, 0.0), r);
        let delta = 0.5;
        let s = phase_correct_vector(&p, delta);
        assert!((s.norm() - p.norm() * 2.0 / 2.5).abs() < 1e-14);
        // pivot fallback to p_y
        let t = phase_correct_vector(&CVec2([c(0.0, 1e-9), c(0.0, 3.0)]), 1e-6);
        assert!(t.0[1].im.abs() < 1e-15 && t.0[1].re > 0.0);

        let alpha = CMat2([[c(0.0, 2.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]]);
        let out = phase_correct_tensor(&alpha, 0.0);
        let expected = CMat2([[c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
        assert!((out - expected).frobenius() < 1e-15);
        assert!((out.frobenius() - alpha.frobenius()).abs() < 1e-15);
    }

    #[test]
    fn full_recovery_on_consistent_data() {
        let h = CMat3([
            [c(2.0, 0.1), c(0.3, 0.0), c(0.0, 0.2)],
            [c(0.3, 0.0), c(1.5, 0.0), c(0.1, 0.0)],
            [c(0.0, 0.2), c(0.1, 0.0), c(1.0, -0.3)],
        ]);
        let p = CVec3::new(c(1.0, 2.0), c(1.0, -1.0), c(1.0, 1.0));
        let (x, cond) = recover_polarization_full(&h.mul_vec(&p), &h).unwrap();
        assert!((x - p).norm() < 1e-10 && cond >= 1.0);
        let singular = CMat3::diag([c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            recover_polarization_full(&p, &singular),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn crossrange_recovery_flags_singular_points() {
        let grid = ImagingGrid::from_points(vec![[0.0, 0.0, 1.0], [0.0, 0.0, 2.0]]).unwrap();
        let image = VectorImage {
            grid: grid.clone(),
            values: vec![CVec3::new(c(2.0, 0.0), c(0.0, 4.0), c(9.0, 0.0)); 2],
            band: FrequencyBand::single(1.0).unwrap(),
        };
        let psf = vec![CMat3::diag([c(2.0, 0.0), c(2.0, 0.0), c(1e-9, 0.0)]), CMat3::zero()];
        let rec = recover_polarization_crossrange(&image, &psf, DeltaRule::Absolute(0.0)).unwrap();
        assert!(!rec.singular[0] && rec.singular[1]);
        assert!((rec.uncorrected[0] - CVec2([c(1.0, 0.0), c(0.0, 2.0)])).norm() < 1e-15);
        assert!((rec.cond[0] - 1.0).abs() < 1e-15 && rec.cond[1].is_infinite());
        assert_eq!(rec.singular_fraction(), 0.5);
    }
}
