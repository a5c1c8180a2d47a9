//! Full two-arm system description.

use crate::error::{Error, Result};
use crate::geometry::ArmGeometry;
use crate::grid::Grid;
use crate::objects::TransmissionFunction;
use crate::optics::fresnel;
use crate::speckle::SourceSpec;

/// Everything needed to simulate one two-arm ghost-imaging run. Immutable
/// after construction and safe to share across workers.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    /// Source wavelength in meters.
    pub wavelength: f64,
    /// Distance from the source to the object plane, and equally to the
    /// sigma plane of the reference arm.
    pub d_source_to_object: f64,
    pub test_arm: ArmGeometry,
    pub reference_arm: ArmGeometry,
    pub source: SourceSpec,
    pub object: TransmissionFunction,
    /// Common transverse grid for the source, object and detector planes.
    pub grid: Grid,
    /// Number of Monte-Carlo frames.
    pub ensemble_size: u64,
    pub seed: u64,
}

impl SystemConfig {
    /// Validate physics and sampling constraints; returns one diagnostic
    /// per violation.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.wavelength > 0.0) {
            out.push(format!("wavelength: must be positive, got {}", self.wavelength));
        }
        if !(self.d_source_to_object > 0.0) {
            out.push(format!(
                "d_source_to_object: must be positive, got {}",
                self.d_source_to_object
            ));
        }
        if self.ensemble_size < 1 {
            out.push("ensemble_size: must be >= 1".into());
        }
        if let Err(e) = self.source.validate(&self.grid) {
            out.push(format!("source: {e}"));
        }
        if self.object.grid() != &self.grid {
            out.push("object: sampled on a different grid than the simulation grid".into());
        }
        let d_min = fresnel::min_valid_distance(&self.grid, self.wavelength);
        for (name, d) in [
            ("d_source_to_object", self.d_source_to_object),
            ("test_arm.d_object", self.test_arm.d_object()),
            ("test_arm.d_image", self.test_arm.d_image()),
            ("reference_arm.d_object", self.reference_arm.d_object()),
            ("reference_arm.d_image", self.reference_arm.d_image()),
        ] {
            if d < d_min {
                out.push(format!(
                    "{name}: distance {d} m is below the sampling bound {d_min:.4} m for this grid"
                ));
            }
        }
        for (name, arm) in [("test_arm", &self.test_arm), ("reference_arm", &self.reference_arm)] {
            if arm.aperture() > self.grid.span() {
                out.push(format!(
                    "{name}.aperture: {} exceeds the grid span {}",
                    arm.aperture(),
                    self.grid.span()
                ));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(diags.join("; ")))
        }
    }
}
