//! Uniform 1-D sampling grids.
//!
//! Sample convention: sample `i` sits at `x_center + (i - floor(n/2)) * dx`,
//! so for any `n >= 2` one sample lies exactly at `x_center`. This keeps a
//! sample on the optical axis for even-symmetric fields and is used by every
//! module that converts between indices and physical coordinates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    dx: f64,
    x_center: f64,
}

impl Grid {
    pub fn new(n: usize, dx: f64, x_center: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid needs >= 2 samples, got {n}")));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::invalid(format!("grid spacing must be positive, got {dx}")));
        }
        if !x_center.is_finite() {
            return Err(Error::invalid("grid center must be finite"));
        }
        Ok(Grid { n, dx, x_center })
    }

    /// Grid of `n` samples covering `span` meters centered at the origin,
    /// with `dx = span / n`.
    pub fn from_span(span: f64, n: usize) -> Result<Self> {
        if !(span > 0.0) || !span.is_finite() {
            return Err(Error::invalid(format!("grid span must be positive, got {span}")));
        }
        Grid::new(n, span / n as f64, 0.0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_center(&self) -> f64 {
        self.x_center
    }

    /// Physical span `n * dx`.
    pub fn span(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Index of the sample that sits exactly at `x_center`.
    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    /// Coordinate of sample `i`.
    pub fn coord(&self, i: usize) -> f64 {
        self.x_center + (i as f64 - self.center_index() as f64) * self.dx
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.coord(i))
    }

    pub fn coords_vec(&self) -> Vec<f64> {
        self.coords().collect()
    }

    /// Index of the sample nearest to `x`, or an error if `x` falls outside
    /// the grid by more than half a sample.
    pub fn nearest(&self, x: f64) -> Result<usize> {
        let fi = (x - self.x_center) / self.dx + self.center_index() as f64;
        let i = fi.round();
        if i < -0.5 || i > self.n as f64 - 0.5 {
            return Err(Error::invalid(format!(
                "coordinate {x} lies outside the grid (span {})",
                self.span()
            )));
        }
        Ok((i.max(0.0) as usize).min(self.n - 1))
    }
}

/// `make_grid`: span-and-count constructor used by configs.
pub fn make_grid(span: f64, n_samples: usize) -> Result<Grid> {
    Grid::from_span(span, n_samples)
}
