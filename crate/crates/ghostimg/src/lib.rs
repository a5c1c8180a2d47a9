//! Desk-scale wave-optics simulator for two-arm thermal-light ghost
//! imaging: Monte-Carlo speckle propagation through both arms,
//! fluctuation-correlation reconstruction, and closed-form kernel analytics
//! with FWHM and resolvability metrics.

pub mod analysis;
pub mod correlate;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod math;
pub mod objects;
pub mod optics;
pub mod pgm;
pub mod runner;
pub mod speckle;
pub mod system;
pub mod twodim;
pub mod units;

pub use error::{Error, Result};
pub use field::ComplexField;
pub use geometry::ArmGeometry;
pub use grid::{make_grid, Grid};
pub use system::SystemConfig;
