//! Arrays, sources, scatterers, frequency bands and imaging grids.
//!
//! Array integrals are midpoint quadratures whose nodes are the physical
//! array elements; band integrals use the trapezoid rule over the frequency
//! samples.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::emcore::{CMat3, CVec3, MediumParams, Point2, Point3, Wavenumber};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArrayShape {
    /// Square of side `side` centered at the origin with `n × n` elements.
    Square { side: f64, n: usize },
    /// Disk of radius `radius` on a polar midpoint grid.
    Disk { radius: f64, n_r: usize, n_theta: usize },
    /// Arbitrary element list (test fixtures, toy arrays).
    Custom,
}

/// Planar array in the `z = 0` plane together with its quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    shape: ArrayShape,
    elements: Vec<Point2>,
    weights: Vec<f64>,
}

/// Square array of side `side` with `n × n` cell-centered elements, each
/// weighted by its cell area `(side/n)²`. Elements are ordered row-major
/// (x fastest).
pub fn make_square_array(side: f64, n: usize) -> Result<ArrayGeometry> {
    if !(side.is_finite() && side > 0.0) {
        return Err(Error::InvalidArray(format!("side {side} must be > 0")));
    }
    if n < 2 {
        return Err(Error::InvalidArray(format!("need n >= 2 elements per side, got {n}")));
    }
    let h = side / n as f64;
    let mut elements = Vec::with_capacity(n * n);
    for j in 0..n {
        let y = -side / 2.0 + (j as f64 + 0.5) * h;
        for i in 0..n {
            let x = -side / 2.0 + (i as f64 + 0.5) * h;
            elements.push([x, y]);
        }
    }
    Ok(ArrayGeometry {
        shape: ArrayShape::Square { side, n },
        weights: vec![h * h; n * n],
        elements,
    })
}

/// Disk array of radius `radius` on a polar midpoint grid with `n_r` rings
/// and `n_theta` angular sectors. Cell `(i, j)` sits at
/// `r_i = (i + ½)Δr`, `θ_j = (j + ½)Δθ` with weight `r_i Δr Δθ`; the weights
/// sum to `πa²` exactly because the midpoint rule integrates `r dr` exactly.
pub fn make_disk_array(radius: f64, n_r: usize, n_theta: usize) -> Result<ArrayGeometry> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArray(format!("radius {radius} must be > 0")));
    }
    if n_r < 2 || n_theta < 4 {
        return Err(Error::InvalidArray(format!(
            "disk needs n_r >= 2 and n_theta >= 4, got {n_r} x {n_theta}"
        )));
    }
    let dr = radius / n_r as f64;
    let dtheta = 2.0 * PI / n_theta as f64;
    let mut elements = Vec::with_capacity(n_r * n_theta);
    let mut weights = Vec::with_capacity(n_r * n_theta);
    for i in 0..n_r {
        let r = (i as f64 + 0.5) * dr;
        for j in 0..n_theta {
            let (s, c) = ((j as f64 + 0.5) * dtheta).sin_cos();
            elements.push([r * c, r * s]);
            weights.push(r * dr * dtheta);
        }
    }
    Ok(ArrayGeometry {
        shape: ArrayShape::Disk { radius, n_r, n_theta },
        elements,
        weights,
    })
}

impl ArrayGeometry {
    /// Array from an explicit element list and weights.
    pub fn custom(elements: Vec<Point2>, weights: Vec<f64>) -> Result<Self> {
        if elements.is_empty() || elements.len() != weights.len() {
            return Err(Error::InvalidArray(format!(
                "{} elements but {} weights",
                elements.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArray("weights must be finite and > 0".into()));
        }
        Ok(Self {
            shape: ArrayShape::Custom,
            elements,
            weights,
        })
    }

    pub fn shape(&self) -> &ArrayShape {
        &self.shape
    }

    pub fn elements(&self) -> &[Point2] {
        &self.elements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element position lifted to the `z = 0` plane.
    #[inline]
    pub fn position(&self, i: usize) -> Point3 {
        let e = self.elements[i];
        [e[0], e[1], 0.0]
    }

    /// Nominal aperture: side for squares, radius for disks, largest
    /// element distance from the origin otherwise.
    pub fn aperture(&self) -> f64 {
        match self.shape {
            ArrayShape::Square { side, .. } => side,
            ArrayShape::Disk { radius, .. } => radius,
            ArrayShape::Custom => self
                .elements
                .iter()
                .map(|e| (e[0] * e[0] + e[1] * e[1]).sqrt())
                .fold(0.0, f64::max),
        }
    }

    /// Σ weights, the array area for squares and disks.
    pub fn area(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// Midpoint quadrature `Σ w_r f(x_r)` in element order.
    pub fn integrate<F: FnMut(&Point2) -> f64>(&self, mut f: F) -> f64 {
        self.elements.iter().zip(&self.weights).map(|(e, w)| w * f(e)).sum()
    }
}

/// Radiating point dipole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    pub position: Point3,
    pub polarization: CVec3,
}

impl Dipole {
    pub fn new(position: Point3, polarization: CVec3) -> Result<Self> {
        let d = Self { position, polarization };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.polarization.norm() > 0.0) || !self.polarization.is_finite() {
            return Err(Error::InvalidScene(
                "dipole polarization must be non-zero and finite".into(),
            ));
        }
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScene("dipole position must be finite".into()));
        }
        Ok(())
    }
}

/// Relative tolerance for the reciprocity symmetry `αᵀ = α`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Point-like scatterer with a symmetric polarizability tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Point3,
    pub polarizability: CMat3,
}

impl Scatterer {
    pub fn new(position: Point3, polarizability: CMat3) -> Result<Self> {
        let s = Self {
            position,
            polarizability,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.polarizability.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidScene("polarizability tensor must be symmetric".into()));
        }
        if !self.polarizability.is_finite() || self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScene("scatterer must be finite".into()));
        }
        Ok(())
    }
}

/// Equally spaced angular frequencies over `[ω₀ − B/2, ω₀ + B/2]` with
/// trapezoid weights. A degenerate band (`B = 0`, one sample) carries the
/// weight `1` so band operations reduce to the single-frequency result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    omega0: f64,
    bandwidth: f64,
    samples: Vec<f64>,
    weights: Vec<f64>,
}

/// Default number of frequency samples.
pub const DEFAULT_N_FREQ: usize = 25;

/// Band centred at `f0` Hz with bandwidth `b_hz` Hz and `n_freq` samples.
pub fn make_band(f0: f64, b_hz: f64, n_freq: usize) -> Result<FrequencyBand> {
    if !(f0.is_finite() && f0 > 0.0) {
        return Err(Error::InvalidBand(format!("f0 = {f0} must be > 0")));
    }
    if !(b_hz.is_finite() && b_hz >= 0.0) {
        return Err(Error::InvalidBand(format!("bandwidth {b_hz} must be >= 0")));
    }
    if b_hz >= 2.0 * f0 {
        return Err(Error::InvalidBand(format!(
            "bandwidth {b_hz} Hz >= 2 f0 reaches non-positive frequencies"
        )));
    }
    if n_freq == 0 {
        return Err(Error::InvalidBand("n_freq must be >= 1".into()));
    }
    if (n_freq == 1) != (b_hz == 0.0) {
        return Err(Error::InvalidBand(format!(
            "a single sample requires zero bandwidth and vice versa (n_freq = {n_freq}, B = {b_hz} Hz)"
        )));
    }
    let omega0 = 2.0 * PI * f0;
    let bandwidth = 2.0 * PI * b_hz;
    if n_freq == 1 {
        return Ok(FrequencyBand {
            omega0,
            bandwidth,
            samples: vec![omega0],
            weights: vec![1.0],
        });
    }
    let step = bandwidth / (n_freq - 1) as f64;
    let lo = omega0 - bandwidth / 2.0;
    // Sample i and its mirror n-1-i are computed from opposite ends so the
    // list is symmetric about ω₀ to rounding.
    let samples = (0..n_freq)
        .map(|i| {
            if 2 * i < n_freq - 1 {
                lo + i as f64 * step
            } else if 2 * i == n_freq - 1 {
                omega0
            } else {
                omega0 + bandwidth / 2.0 - (n_freq - 1 - i) as f64 * step
            }
        })
        .collect();
    let mut weights = vec![step; n_freq];
    weights[0] = step / 2.0;
    weights[n_freq - 1] = step / 2.0;
    Ok(FrequencyBand {
        omega0,
        bandwidth,
        samples,
        weights,
    })
}

impl FrequencyBand {
    /// Single-frequency band at angular frequency `omega`.
    pub fn single(omega: f64) -> Result<Self> {
        make_band(omega / (2.0 * PI), 0.0, 1)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Bandwidth in rad/s.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Trapezoid weights (rad/s), summing to `B` (or `1` when degenerate).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.samples.len() == 1
    }

    /// `1/B`, or `1` for the degenerate band, so that
    /// `norm · Σ weights = 1`.
    pub fn averaging_factor(&self) -> f64 {
        1.0 / self.weights.iter().sum::<f64>()
    }

    pub fn wavenumbers(&self, medium: &MediumParams) -> Result<Vec<Wavenumber>> {
        self.samples.iter().map(|&w| medium.wavenumber(w)).collect()
    }
}

/// One axis of a structured grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    /// Increment between consecutive points along this axis (m).
    pub step: Point3,
    pub count: usize,
}

/// Imaging points, enumerated row-major: the first axis varies slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagingGrid {
    origin: Point3,
    axes: Vec<GridAxis>,
    points: Vec<Point3>,
}

impl ImagingGrid {
    /// Structured grid `origin + Σ i_a step_a`.
    pub fn new(origin: Point3, axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::InvalidGrid(format!("need 1 to 3 axes, got {}", axes.len())));
        }
        if axes.iter().any(|a| a.count == 0) {
            return Err(Error::InvalidGrid("axis with zero points".into()));
        }
        if origin
            .iter()
            .chain(axes.iter().flat_map(|a| a.step.iter()))
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidGrid("non-finite origin or step".into()));
        }
        let total: usize = axes.iter().map(|a| a.count).product();
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            let mut p = origin;
            for (a, &i) in axes.iter().zip(&idx) {
                for c in 0..3 {
                    p[c] += i as f64 * a.step[c];
                }
            }
            points.push(p);
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].count {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self { origin, axes, points })
    }

    /// Unstructured point list (one axis of length `points.len()`).
    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("empty point list".into()));
        }
        Ok(Self {
            origin: points[0],
            axes: vec![GridAxis {
                step: [0.0; 3],
                count: points.len(),
            }],
            points,
        })
    }

    /// `n` points from `start` in increments of `step`.
    pub fn line(start: Point3, step: Point3, n: usize) -> Result<Self> {
        Self::new(start, vec![GridAxis { step, count: n }])
    }

    /// Axis-aligned plane centred at `center`. `normal` is 0, 1 or 2 (the
    /// constant coordinate); the two in-plane axes, in increasing coordinate
    /// order, get `n` points each with spacing `(h_first, h_second)` and the
    /// centre on the sample of index `n/2`.
    pub fn plane(center: Point3, normal: usize, n: [usize; 2], h: [f64; 2]) -> Result<Self> {
        if normal > 2 {
            return Err(Error::InvalidGrid(format!("normal axis {normal} out of range")));
        }
        let in_plane: Vec<usize> = (0..3).filter(|&c| c != normal).collect();
        let mut origin = center;
        let mut axes = Vec::with_capacity(2);
        // slow axis = second in-plane coordinate, so rows run along the first
        for slot in [1usize, 0] {
            let c = in_plane[slot];
            let mut step = [0.0; 3];
            step[c] = h[slot];
            origin[c] -= (n[slot] / 2) as f64 * h[slot];
            axes.push(GridAxis { step, count: n[slot] });
        }
        Self::new(origin, axes)
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point closest to `p` (first one on ties).
    pub fn nearest(&self, p: &Point3) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.points.iter().enumerate() {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Rejects grids touching the array plane.
    pub fn check_off_array_plane(&self) -> Result<()> {
        match self.points.iter().find(|p| !(p[2] > 0.0)) {
            Some(p) => Err(Error::OnArrayPlane { point: *p }),
            None => Ok(()),
        }
    }
}
