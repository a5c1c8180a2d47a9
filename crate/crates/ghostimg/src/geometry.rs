//! Imaging-arm geometry.

use crate::error::{Error, Result};

/// Relative tolerance on the thin-lens equation. Configs are exact by
/// construction; this catches typos, not physics.
pub const THIN_LENS_REL_TOL: f64 = 1e-9;

/// One imaging arm: a thin lens with a hard aperture at `d_object` from the
/// object plane (or sigma plane) and `d_image` from its detector. The
/// distances must satisfy the Gaussian thin-lens equation
/// `1/d_object + 1/d_image = 1/focal_length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmGeometry {
    d_object: f64,
    d_image: f64,
    focal_length: f64,
    aperture: f64,
}

impl ArmGeometry {
    pub fn new(d_object: f64, d_image: f64, focal_length: f64, aperture: f64) -> Result<Self> {
        for (name, v) in [
            ("d_object", d_object),
            ("d_image", d_image),
            ("focal_length", focal_length),
            ("aperture", aperture),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("arm {name} must be positive, got {v}")));
            }
        }
        let lhs = 1.0 / d_object + 1.0 / d_image;
        let rhs = 1.0 / focal_length;
        if (lhs - rhs).abs() > THIN_LENS_REL_TOL * rhs {
            return Err(Error::invalid(format!(
                "thin-lens equation violated: 1/{d_object} + 1/{d_image} != 1/{focal_length} \
                 (relative error {:.3e})",
                ((lhs - rhs) / rhs).abs()
            )));
        }
        Ok(ArmGeometry { d_object, d_image, focal_length, aperture })
    }

    /// Symmetric 2f-2f arm with unit magnification.
    pub fn two_f(focal_length: f64, aperture: f64) -> Result<Self> {
        ArmGeometry::new(2.0 * focal_length, 2.0 * focal_length, focal_length, aperture)
    }

    pub fn d_object(&self) -> f64 {
        self.d_object
    }

    pub fn d_image(&self) -> f64 {
        self.d_image
    }

    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    /// Magnification `M = d_image / d_object`.
    pub fn magnification(&self) -> f64 {
        self.d_image / self.d_object
    }
}
