//! Sampled complex scalar fields.

use crate::error::{Error, Result};
use crate::grid::Grid;
use num_complex::Complex64;

/// A complex scalar amplitude sampled on a uniform 1-D grid. Intensity is
/// `|E|^2` per sample. Immutable in practice: operations return new fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    wavelength: f64,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, wavelength: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::invalid(format!("wavelength must be positive, got {wavelength}")));
        }
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values on a {}-sample grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("field contains non-finite values"));
        }
        Ok(ComplexField { grid, wavelength, values })
    }

    pub fn zeros(grid: Grid, wavelength: f64) -> Result<Self> {
        let n = grid.len();
        ComplexField::new(grid, wavelength, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn uniform(grid: Grid, wavelength: f64, amplitude: Complex64) -> Result<Self> {
        let n = grid.len();
        ComplexField::new(grid, wavelength, vec![amplitude; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Per-sample intensity `|E|^2`.
    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Total intensity `sum |E|^2 * dx`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }
}
