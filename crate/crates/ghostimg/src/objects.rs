//! Object transmission functions.
//!
//! Transmittance is an *amplitude* convention: `t(x)` multiplies the field,
//! so a grayscale mask is interpreted as an amplitude map. A measured
//! intensity transparency would need a square root before use here.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pgm;
use num_complex::Complex64;
use std::path::Path;

/// Exact analytic description of an object, kept alongside the sampled
/// array so quadrature oracles can integrate the true edges.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticObject {
    /// Fully transmitting intervals `(lo, hi)`, opaque elsewhere.
    Slits(Vec<(f64, f64)>),
    /// Single-sample unit transmittance at this coordinate.
    Point(f64),
}

/// Sampled complex transmittance with `|t| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionFunction {
    grid: Grid,
    values: Vec<Complex64>,
    analytic: Option<AnalyticObject>,
}

impl TransmissionFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>, analytic: Option<AnalyticObject>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} transmittance values on a {}-sample grid",
                values.len(),
                grid.len()
            )));
        }
        for v in &values {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::invalid("transmittance contains non-finite values"));
            }
            if v.norm() > 1.0 + 1e-12 {
                return Err(Error::invalid(format!("|t| = {} exceeds 1", v.norm())));
            }
        }
        Ok(TransmissionFunction { grid, values, analytic })
    }

    /// Fully transparent object.
    pub fn unity(grid: Grid) -> Self {
        let n = grid.len();
        TransmissionFunction {
            grid,
            values: vec![Complex64::new(1.0, 0.0); n],
            analytic: None,
        }
    }

    /// Fully opaque object.
    pub fn opaque(grid: Grid) -> Self {
        let n = grid.len();
        TransmissionFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            analytic: None,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn analytic(&self) -> Option<&AnalyticObject> {
        self.analytic.as_ref()
    }

    /// Smallest interval containing all non-opaque samples, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = None;
        let mut hi = None;
        for (i, v) in self.values.iter().enumerate() {
            if v.norm() > 0.0 {
                let x = self.grid.coord(i);
                lo = Some(lo.map_or(x, |l: f64| l.min(x)));
                hi = Some(hi.map_or(x, |h: f64| h.max(x)));
            }
        }
        Some((lo?, hi?))
    }
}

/// Two fully transmitting slits of width `slit_width`, centered at
/// `+- separation / 2`.
pub fn double_slit(slit_width: f64, separation: f64, grid: &Grid) -> Result<TransmissionFunction> {
    if !(slit_width > 0.0) || !(separation > 0.0) {
        return Err(Error::invalid("slit width and separation must be positive"));
    }
    if separation < slit_width {
        return Err(Error::invalid(format!(
            "slits overlap: separation {separation} < slit width {slit_width}"
        )));
    }
    let samples_per_slit = slit_width / grid.dx();
    if samples_per_slit < 8.0 {
        return Err(Error::invalid(format!(
            "slit width {slit_width} covers only {samples_per_slit:.1} samples; need >= 8"
        )));
    }
    let intervals = vec![
        (-0.5 * separation - 0.5 * slit_width, -0.5 * separation + 0.5 * slit_width),
        (0.5 * separation - 0.5 * slit_width, 0.5 * separation + 0.5 * slit_width),
    ];
    let values = grid
        .coords()
        .map(|x| {
            let open = intervals.iter().any(|&(lo, hi)| x >= lo && x <= hi);
            Complex64::new(if open { 1.0 } else { 0.0 }, 0.0)
        })
        .collect();
    TransmissionFunction::new(grid.clone(), values, Some(AnalyticObject::Slits(intervals)))
}

/// A single-sample unit transmittance at the grid sample nearest `position`.
pub fn pinhole(position: f64, grid: &Grid) -> Result<TransmissionFunction> {
    let i = grid.nearest(position)?;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    values[i] = Complex64::new(1.0, 0.0);
    let snapped = grid.coord(i);
    TransmissionFunction::new(grid.clone(), values, Some(AnalyticObject::Point(snapped)))
}

/// 2-D amplitude transmittance loaded from an 8-bit grayscale PGM, used by
/// the separable mask pipeline. Row-major, `values[row * width + col]`.
#[derive(Debug, Clone)]
pub struct Transmission2d {
    pub width: usize,
    pub height: usize,
    pub pixel_pitch: f64,
    pub values: Vec<f64>,
}

/// Load a P5 PGM as amplitude transmittance `pixel / 255`, optionally
/// binarized at `threshold` (0 disables binarization).
pub fn mask_from_image(path: &Path, pixel_pitch: f64, threshold: f64) -> Result<Transmission2d> {
    if !(pixel_pitch > 0.0) {
        return Err(Error::invalid("pixel_pitch must be positive"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("threshold must lie in 0..1"));
    }
    let img = pgm::read_pgm8(path)?;
    let values = img
        .pixels
        .iter()
        .map(|&p| {
            let t = p as f64 / 255.0;
            if threshold > 0.0 {
                if t >= threshold {
                    1.0
                } else {
                    0.0
                }
            } else {
                t
            }
        })
        .collect();
    Ok(Transmission2d {
        width: img.width,
        height: img.height,
        pixel_pitch,
        values,
    })
}

impl Transmission2d {
    /// Resample onto simulation grids by nearest neighbor, centered. Pixels
    /// outside the image are opaque. Nearest neighbor keeps binary masks
    /// binary.
    pub fn sample(&self, gx: &Grid, gy: &Grid) -> Vec<f64> {
        let w = self.width as isize;
        let h = self.height as isize;
        let mut out = vec![0.0; gx.len() * gy.len()];
        for (iy, y) in gy.coords().enumerate() {
            let py = (y / self.pixel_pitch + 0.5 * h as f64).floor() as isize;
            for (ix, x) in gx.coords().enumerate() {
                let px = (x / self.pixel_pitch + 0.5 * w as f64).floor() as isize;
                if px >= 0 && px < w && py >= 0 && py < h {
                    out[iy * gx.len() + ix] = self.values[py as usize * self.width + px as usize];
                }
            }
        }
        out
    }
}
