//! Complex small-dimension linear algebra and the electromagnetic Green
//! kernels.

pub mod green;
pub mod linalg;

pub use green::{
    acoustic_green, dyadic_green, dyadic_green_displacement, dyadic_green_eigen, dyadic_green_parts,
    green_condition_number, m_factor, paraxial_green, paraxial_phase, projector, projector_displacement,
};
pub use linalg::{norm3, relative, sub3, CMat2, CMat3, CVec2, CVec3, Point2, Point3, C64, TINY};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum used as the default medium (m/s).
pub const VACUUM_SPEED: f64 = 3.0e8;

/// Wavenumber `k = ω / c` in 1/m, always finite and positive.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Wavenumber(f64);

impl Wavenumber {
    pub fn new(k: f64) -> Result<Self> {
        if k.is_finite() && k > 0.0 {
            Ok(Self(k))
        } else {
            Err(Error::InvalidWavenumber(k))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn wavelength(self) -> f64 {
        2.0 * std::f64::consts::PI / self.0
    }
}

/// Homogeneous background medium. `mu` is carried for completeness; every
/// imaging formula divides out the `μω²` source factor, so the default
/// normalized value `1` changes no image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// Wave speed (m/s).
    pub c: f64,
    /// Magnetic permeability.
    pub mu: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        Self {
            c: VACUUM_SPEED,
            mu: 1.0,
        }
    }
}

impl MediumParams {
    pub fn new(c: f64, mu: f64) -> Result<Self> {
        let m = Self { c, mu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidMedium(format!("wave speed c = {} must be > 0", self.c)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidMedium(format!(
                "permeability mu = {} must be > 0",
                self.mu
            )));
        }
        Ok(())
    }

    /// Permittivity from `c = (εμ)^(-1/2)`.
    pub fn epsilon(&self) -> f64 {
        1.0 / (self.c * self.c * self.mu)
    }

    pub fn wavenumber(&self, omega: f64) -> Result<Wavenumber> {
        Wavenumber::new(omega / self.c)
    }

    /// The `μω²` factor multiplying every radiated field.
    pub fn source_factor(&self, omega: f64) -> f64 {
        self.mu * omega * omega
    }
}
