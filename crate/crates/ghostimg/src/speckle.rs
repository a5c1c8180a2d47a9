//! Pseudo-thermal source realizations.
//!
//! Each realization is a circular complex Gaussian field: independent
//! zero-mean real and imaginary parts with variance `I(x)/2` per sample, so
//! the per-sample intensity is exponentially distributed with mean `I(x)`
//! (thermal statistics). A coherence length larger than the grid spacing is
//! realized by filtering white noise with a Gaussian kernel chosen so the
//! field autocorrelation is `exp(-d^2 / (2 lc^2))` at lag `d`.
//!
//! Realizations are counter-based: `(seed, index)` fully determines the
//! field regardless of generation order or worker count. The seed selects a
//! ChaCha8 stream family and the realization index selects the stream.

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Transverse intensity profile of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IntensityProfile {
    Uniform,
    Gaussian {
        /// 1/e^2 intensity half-width in meters.
        width: f64,
    },
}

/// Statistical description of the pseudo-thermal source plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    /// Transverse source size in meters; `None` means the source covers the
    /// whole grid.
    pub extent: Option<f64>,
    /// Transverse field correlation length at the source plane; `None`
    /// defaults to the grid spacing (fully incoherent at grid resolution).
    pub coherence_length: Option<f64>,
    pub intensity_profile: IntensityProfile,
    /// Mean intensity I0 (dimensionless field units squared).
    pub mean_intensity: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            extent: None,
            coherence_length: None,
            intensity_profile: IntensityProfile::Uniform,
            mean_intensity: 1.0,
        }
    }
}

impl SourceSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.mean_intensity > 0.0) {
            return Err(Error::invalid("source mean_intensity must be positive"));
        }
        if let Some(lc) = self.coherence_length {
            if lc < grid.dx() {
                return Err(Error::invalid(format!(
                    "coherence_length {lc} is below the grid spacing {}; it cannot be resolved",
                    grid.dx()
                )));
            }
        }
        if let Some(e) = self.extent {
            if !(e > 0.0) {
                return Err(Error::invalid("source extent must be positive"));
            }
        }
        if let IntensityProfile::Gaussian { width } = self.intensity_profile {
            if !(width > 0.0) {
                return Err(Error::invalid("gaussian profile width must be positive"));
            }
        }
        Ok(())
    }

    /// Mean intensity at coordinate `x`.
    pub fn intensity_at(&self, x: f64) -> f64 {
        let inside = match self.extent {
            Some(e) => x.abs() <= 0.5 * e,
            None => true,
        };
        if !inside {
            return 0.0;
        }
        match self.intensity_profile {
            IntensityProfile::Uniform => self.mean_intensity,
            IntensityProfile::Gaussian { width } => {
                self.mean_intensity * (-2.0 * (x / width) * (x / width)).exp()
            }
        }
    }
}

/// One sample of the thermal ensemble.
#[derive(Debug, Clone)]
pub struct SpeckleRealization {
    pub field: ComplexField,
    pub realization_index: u64,
    pub seed_used: u64,
}

fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Normalized field autocorrelation of a realization at lag `d`:
/// 1 for white noise (lag 0 only), `exp(-d^2/(2 lc^2))` for filtered noise.
pub fn autocorrelation_at_lag(spec: &SourceSpec, grid: &Grid, lag: f64) -> f64 {
    let lc = spec.coherence_length.unwrap_or(grid.dx());
    if lc <= grid.dx() {
        if lag.abs() < 0.5 * grid.dx() {
            1.0
        } else {
            0.0
        }
    } else {
        (-lag * lag / (2.0 * lc * lc)).exp()
    }
}

/// Draw realization `index` of the source ensemble. Pure in
/// `(spec, grid, seed, index)`: the same arguments always produce the
/// bit-identical field.
pub fn generate_realization(
    spec: &SourceSpec,
    grid: &Grid,
    wavelength: f64,
    seed: u64,
    index: u64,
) -> Result<SpeckleRealization> {
    spec.validate(grid)?;
    let n = grid.len();
    let mut rng = realization_rng(seed, index);

    // unit-variance circular complex white noise
    let mut white: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();

    let lc = spec.coherence_length.unwrap_or(grid.dx());
    if lc > grid.dx() {
        // Gaussian smoothing kernel with sigma = lc / sqrt(2); after
        // filtering, the field autocorrelation is exp(-d^2 / (2 lc^2)).
        // The kernel is L2-normalized so the per-sample variance is kept.
        let sigma = lc / std::f64::consts::SQRT_2;
        let half = ((4.0 * sigma / grid.dx()).ceil() as usize).min(n / 2);
        let taps: Vec<f64> = (-(half as isize)..=half as isize)
            .map(|k| {
                let u = k as f64 * grid.dx();
                (-u * u / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
        let filtered: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, t) in taps.iter().enumerate() {
                    let k = j as isize - half as isize;
                    // periodic wrap; the source statistics are translation
                    // invariant so wrapping introduces no bias
                    let idx = (i as isize + k).rem_euclid(n as isize) as usize;
                    acc += white[idx] * *t;
                }
                acc / norm
            })
            .collect();
        white = filtered;
    }

    let values: Vec<Complex64> = white
        .into_iter()
        .enumerate()
        .map(|(i, w)| w * spec.intensity_at(grid.coord(i)).sqrt())
        .collect();

    Ok(SpeckleRealization {
        field: ComplexField::new(grid.clone(), wavelength, values)?,
        realization_index: index,
        seed_used: seed,
    })
}

/// Ensemble estimate of the first-order correlation `<E*(x') E(x)>`.
pub fn empirical_g1(realizations: &[SpeckleRealization], x: f64, x_prime: f64) -> Result<Complex64> {
    if realizations.len() < 2 {
        return Err(Error::Estimator(
            "empirical_g1 needs at least 2 realizations".into(),
        ));
    }
    let grid = realizations[0].field.grid().clone();
    for r in realizations {
        if r.field.grid() != &grid {
            return Err(Error::GridMismatch(
                "realizations lie on different grids".into(),
            ));
        }
    }
    let i = grid.nearest(x)?;
    let j = grid.nearest(x_prime)?;
    let sum: Complex64 = realizations
        .iter()
        .map(|r| r.field.values()[j].conj() * r.field.values()[i])
        .sum();
    Ok(sum / realizations.len() as f64)
}
