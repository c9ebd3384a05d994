//! Fixed-size complex vectors and matrices (3 and 2 dimensional).
//!
//! Everything here is `Copy` and stack allocated; the imaging loops evaluate
//! millions of 3×3 products and must not touch the heap.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A point in R³ (meters).
pub type Point3 = [f64; 3];

/// A point in the array plane (meters).
pub type Point2 = [f64; 2];

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Denominator floor used by relative comparisons.
pub const TINY: f64 = 1e-300;

/// Relative difference `|a - b| / max(|b|, TINY)` of two norms already computed.
#[inline]
pub fn relative(diff_norm: f64, reference_norm: f64) -> f64 {
    diff_norm / reference_norm.max(TINY)
}

#[inline]
pub fn sub3(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn norm3(a: &Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CVec3(pub [C64; 3]);

impl CVec3 {
    pub const fn new(x: C64, y: C64, z: C64) -> Self {
        Self([x, y, z])
    }

    pub const fn zero() -> Self {
        Self([ZERO; 3])
    }

    pub fn from_real(v: [f64; 3]) -> Self {
        Self([v[0].into(), v[1].into(), v[2].into()])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Euclidean norm of the component moduli.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|c| c.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|c| c * s))
    }

    /// Hermitian inner product `Σ conj(self_i) other_i`.
    pub fn dot_conj(&self, other: &Self) -> C64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1] + self.0[2].conj() * other.0[2]
    }

    /// First two (cross-range) components.
    pub fn cross_range(&self) -> CVec2 {
        CVec2([self.0[0], self.0[1]])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Index<usize> for CVec3 {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVec3 {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for CVec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for CVec3 {
    fn add_assign(&mut self, o: Self) {
        for i in 0..3 {
            self.0[i] += o.0[i];
        }
    }
}

impl Sub for CVec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for CVec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|c| -c))
    }
}

impl Mul<C64> for CVec3 {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        self.scale(s)
    }
}

impl Mul<f64> for CVec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self(self.0.map(|c| c * s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CMat3(pub [[C64; 3]; 3]);

impl CMat3 {
    pub const fn zero() -> Self {
        Self([[ZERO; 3]; 3])
    }

    pub const fn identity() -> Self {
        Self([[ONE, ZERO, ZERO], [ZERO, ONE, ZERO], [ZERO, ZERO, ONE]])
    }

    pub fn from_real(m: [[f64; 3]; 3]) -> Self {
        Self(m.map(|row| row.map(C64::from)))
    }

    pub fn diag(d: [C64; 3]) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let a = &self.0;
        Self([
            [a[0][0], a[1][0], a[2][0]],
            [a[0][1], a[1][1], a[2][1]],
            [a[0][2], a[1][2], a[2][2]],
        ])
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|row| row.map(|c| c.conj())))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|row| row.map(|c| c * s)))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.map(|row| row.map(|c| c * s)))
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sqr().sqrt()
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// `‖self - other‖_F / ‖other‖_F`.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        relative((*self - *other).frobenius(), other.frobenius())
    }

    /// `Mᵀ = M` entrywise, relative to the Frobenius norm.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        (*self - self.transpose()).frobenius() <= rel_tol * self.frobenius().max(TINY)
    }

    /// `conj(self) * other` without materializing the conjugate.
    #[inline]
    pub fn conj_mul(&self, o: &Self) -> Self {
        let a = &self.0;
        let b = &o.0;
        let mut out = [[ZERO; 3]; 3];
        for i in 0..3 {
            let (a0, a1, a2) = (a[i][0].conj(), a[i][1].conj(), a[i][2].conj());
            for j in 0..3 {
                out[i][j] = a0 * b[0][j] + a1 * b[1][j] + a2 * b[2][j];
            }
        }
        Self(out)
    }

    #[inline]
    pub fn mul_vec(&self, v: &CVec3) -> CVec3 {
        let a = &self.0;
        let v = &v.0;
        CVec3([
            a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
            a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
            a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
        ])
    }

    /// Upper-left (cross-range) 2×2 block.
    pub fn block2(&self) -> CMat2 {
        CMat2([[self.0[0][0], self.0[0][1]], [self.0[1][0], self.0[1][1]]])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn to_nalgebra(self) -> Matrix3<C64> {
        Matrix3::from_fn(|i, j| self.0[i][j])
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> [f64; 3] {
        let sv = self.to_nalgebra().singular_values();
        let mut s = [sv[0], sv[1], sv[2]];
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// 2-norm condition number (`inf` for a singular matrix).
    pub fn cond(&self) -> f64 {
        let s = self.singular_values();
        if s[2] <= 0.0 {
            f64::INFINITY
        } else {
            s[0] / s[2]
        }
    }

    /// Solves `self · x = b` through an SVD, refusing systems whose
    /// condition number exceeds `max_cond`. Returns `(x, cond)`.
    pub fn svd_solve(&self, b: &CVec3, max_cond: f64) -> Result<(CVec3, f64)> {
        let svd = self.to_nalgebra().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= max_cond) {
            return Err(Error::SingularSystem { cond });
        }
        let rhs = Vector3::new(b.0[0], b.0[1], b.0[2]);
        let x = svd.solve(&rhs, 0.0).map_err(|_| Error::SingularSystem { cond })?;
        Ok((CVec3([x[0], x[1], x[2]]), cond))
    }
}

impl Index<(usize, usize)> for CMat3 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for CMat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for CMat3 {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl AddAssign for CMat3 {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

impl Sub for CMat3 {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self -= o;
        self
    }
}

impl SubAssign for CMat3 {
    fn sub_assign(&mut self, o: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] -= o.0[i][j];
            }
        }
    }
}

impl Mul for CMat3 {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let a = &self.0;
        let b = &o.0;
        let mut out = [[ZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Self(out)
    }
}

impl Mul<CVec3> for CMat3 {
    type Output = CVec3;
    fn mul(self, v: CVec3) -> CVec3 {
        self.mul_vec(&v)
    }
}

impl Mul<C64> for CMat3 {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        self.scale(s)
    }
}

impl Mul<f64> for CMat3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale_real(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CVec2(pub [C64; 2]);

impl CVec2 {
    pub fn norm(&self) -> f64 {
        (self.0[0].norm_sqr() + self.0[1].norm_sqr()).sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self([self.0[0] * s, self.0[1] * s])
    }

    pub fn re(&self) -> [f64; 2] {
        [self.0[0].re, self.0[1].re]
    }

    pub fn im(&self) -> [f64; 2] {
        [self.0[0].im, self.0[1].im]
    }
}

impl Sub for CVec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CMat2(pub [[C64; 2]; 2]);

impl CMat2 {
    pub const fn zero() -> Self {
        Self([[ZERO; 2]; 2])
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Self {
        Self([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|row| row.map(|c| c * s)))
    }

    pub fn re(&self) -> [[f64; 2]; 2] {
        self.0.map(|row| row.map(|c| c.re))
    }

    pub fn im(&self) -> [[f64; 2]; 2] {
        self.0.map(|row| row.map(|c| c.im))
    }

    /// Singular values `(σ_max, σ_min)` in closed form.
    pub fn singular_values(&self) -> (f64, f64) {
        let f2 = self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>();
        let d = self.det().norm();
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
        let s_max = ((f2 + disc) / 2.0).sqrt();
        // σ_max σ_min = |det| is better conditioned than the subtraction.
        let s_min = if s_max > 0.0 { d / s_max } else { 0.0 };
        (s_max, s_min)
    }

    pub fn cond(&self) -> f64 {
        let (s_max, s_min) = self.singular_values();
        if s_min > 0.0 {
            s_max / s_min
        } else {
            f64::INFINITY
        }
    }

    /// Direct inverse, `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 || !d.re.is_finite() || !d.im.is_finite() {
            return None;
        }
        let inv = ONE / d;
        let a = &self.0;
        Some(Self([[a[1][1] * inv, -a[0][1] * inv], [-a[1][0] * inv, a[0][0] * inv]]))
    }

    pub fn mul_vec(&self, v: &CVec2) -> CVec2 {
        CVec2([
            self.0[0][0] * v.0[0] + self.0[0][1] * v.0[1],
            self.0[1][0] * v.0[0] + self.0[1][1] * v.0[1],
        ])
    }
}

impl Add for CMat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += o.0[i][j];
            }
        }
        out
    }
}

impl Sub for CMat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] -= o.0[i][j];
            }
        }
        out
    }
}

impl Mul for CMat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.0;
        let b = &o.0;
        Self([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Mul<f64> for CMat2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self(self.0.map(|row| row.map(|c| c * s)))
    }
}
