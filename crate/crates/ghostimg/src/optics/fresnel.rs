//! Free-space Fresnel propagation by direct convolution with the sampled
//! impulse response.
//!
//! Kernel: `K(u) = exp(jkd) / sqrt(j lambda d) * exp(j pi u^2 / (lambda d))`.
//! The `1/sqrt(j lambda d)` prefactor is the 1-D unitary normalization; it
//! makes a unit-amplitude plane wave map to `exp(jkd)` and preserves total
//! intensity, while keeping the kernel proportional to the standard Fresnel
//! chirp at every sample.
//!
//! Sampling validity (impulse-response method): the chirp's local frequency
//! at offset `u` is `u / (lambda d)`; keeping it below Nyquist across the
//! grid requires `d >= n * dx^2 / lambda`. Shorter distances are rejected
//! with a diagnostic. The kernel is additionally truncated at the offset
//! where the chirp would alias, so marginal configurations degrade into a
//! smaller effective aperture rather than wraparound artifacts. Linear
//! convolution is realized by FFT with zero padding to at least `2n`.

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Minimum propagation distance for which the sampled chirp is alias-free
/// across the whole grid.
pub fn min_valid_distance(grid: &Grid, wavelength: f64) -> f64 {
    grid.len() as f64 * grid.dx() * grid.dx() / wavelength
}

/// A prepared free-space propagator for one (grid, wavelength, distance)
/// triple. The kernel spectrum is precomputed so the propagator can be
/// applied to many fields cheaply; it is immutable and shareable across
/// threads.
pub struct Propagator {
    n: usize,
    padded: usize,
    kernel_spectrum: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    grid: Grid,
    wavelength: f64,
    distance: f64,
}

impl Propagator {
    pub fn new(grid: &Grid, wavelength: f64, distance: f64) -> Result<Self> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::invalid(format!("propagation distance must be positive, got {distance}")));
        }
        if !(wavelength > 0.0) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        let d_min = min_valid_distance(grid, wavelength);
        if distance < d_min {
            return Err(Error::Sampling(format!(
                "distance {distance} m is below the impulse-response sampling bound for this \
                 grid; the minimum safe distance is {d_min:.4} m (n*dx^2/lambda with n = {}, \
                 dx = {:.3e} m). Use a coarser or smaller grid for shorter distances.",
                grid.len(),
                grid.dx()
            )));
        }

        let n = grid.len();
        let dx = grid.dx();
        let padded = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(padded);
        let ifft = planner.plan_fft_inverse(padded);

        // exp(jkd) / sqrt(j lambda d); sqrt(j) = exp(j pi/4)
        let k = 2.0 * PI / wavelength;
        let phase = Complex64::from_polar(1.0, k * distance - PI / 4.0);
        let prefactor = phase / (wavelength * distance).sqrt();

        // chirp alias radius; >= n*dx/2 whenever the distance bound holds
        let u_max = wavelength * distance / (2.0 * dx);

        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        for m in -(n as isize - 1)..=(n as isize - 1) {
            let u = m as f64 * dx;
            if u.abs() > u_max {
                continue;
            }
            let chirp = Complex64::from_polar(1.0, PI * u * u / (wavelength * distance));
            kernel[m.rem_euclid(padded as isize) as usize] = prefactor * chirp * dx;
        }
        fft.process(&mut kernel);

        Ok(Propagator {
            n,
            padded,
            kernel_spectrum: kernel,
            fft,
            ifft,
            grid: grid.clone(),
            wavelength,
            distance,
        })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Propagate raw sample values (length must equal the grid size).
    pub fn apply_values(&self, values: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.n);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.padded];
        buf[..self.n].copy_from_slice(values);
        self.fft.process(&mut buf);
        let scale = 1.0 / self.padded as f64;
        for (b, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *b *= k * scale;
        }
        self.ifft.process(&mut buf);
        buf.truncate(self.n);
        buf
    }

    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch("field grid differs from propagator grid".into()));
        }
        if field.wavelength() != self.wavelength {
            return Err(Error::GridMismatch("field wavelength differs from propagator".into()));
        }
        ComplexField::new(
            self.grid.clone(),
            self.wavelength,
            self.apply_values(field.values()),
        )
    }
}

/// One-shot Fresnel propagation over `distance` meters.
pub fn fresnel_propagate(field: &ComplexField, distance: f64) -> Result<ComplexField> {
    Propagator::new(field.grid(), field.wavelength(), distance)?.apply(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    const LAMBDA: f64 = 532e-9;

    #[test]
    fn zero_field_stays_zero() {
        let grid = make_grid(2e-2, 1024).unwrap();
        let f = ComplexField::zeros(grid, LAMBDA).unwrap();
        let out = fresnel_propagate(&f, 1.0).unwrap();
        assert!(out.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn plane_wave_gains_global_phase_only() {
        // unit plane wave -> A * exp(jkd) on interior samples within 1%
        let n = 16384;
        let grid = make_grid(8.192e-2, n).unwrap(); // dx = 5 um
        let d = 1.0;
        assert!(d >= min_valid_distance(&grid, LAMBDA));
        let a = Complex64::new(0.7, 0.4);
        let f = ComplexField::uniform(grid, LAMBDA, a).unwrap();
        let out = fresnel_propagate(&f, d).unwrap();
        let k = 2.0 * PI / LAMBDA;
        let expected = a * Complex64::from_polar(1.0, k * d);
        for i in (n / 2 - n / 16)..(n / 2 + n / 16) {
            let err = (out.values()[i] - expected).norm() / a.norm();
            assert!(err < 0.01, "sample {i}: relative error {err}");
        }
    }

    #[test]
    fn impulse_reproduces_fresnel_chirp() {
        // a single-sample impulse maps to the sampled kernel itself
        let n = 2048;
        let grid = make_grid(2.048e-2, n).unwrap();
        let d = 1.0;
        let mut f = ComplexField::zeros(grid.clone(), LAMBDA).unwrap();
        let i0 = 900; // off-center source sample
        f.values_mut()[i0] = Complex64::new(1.0, 0.0);
        let out = fresnel_propagate(&f, d).unwrap();

        let x0 = grid.coord(i0);
        let prefactor =
            Complex64::from_polar(1.0, 2.0 * PI / LAMBDA * d - PI / 4.0) / (LAMBDA * d).sqrt();
        for i in (0..n).step_by(61) {
            let u = grid.coord(i) - x0;
            let expected =
                prefactor * Complex64::from_polar(1.0, PI * u * u / (LAMBDA * d)) * grid.dx();
            let err = (out.values()[i] - expected).norm() / expected.norm();
            assert!(err < 1e-9, "sample {i}: relative error {err}");
        }
    }

    #[test]
    fn energy_is_conserved_for_compact_fields() {
        let n = 4096;
        let grid = make_grid(4.096e-2, n).unwrap();
        let mut f = ComplexField::zeros(grid.clone(), LAMBDA).unwrap();
        // Gaussian envelope well inside the grid
        for i in 0..n {
            let x = grid.coord(i);
            f.values_mut()[i] = Complex64::new((-x * x / (2.0 * 1e-3_f64.powi(2))).exp(), 0.0);
        }
        let e_in = f.energy();
        let out = fresnel_propagate(&f, 2.0).unwrap();
        let e_out = out.energy();
        assert!((e_out / e_in - 1.0).abs() < 0.01, "energy ratio {}", e_out / e_in);
    }

    #[test]
    fn short_distance_is_rejected_with_bound() {
        let grid = make_grid(2e-2, 2048).unwrap();
        let d_min = min_valid_distance(&grid, LAMBDA);
        let err = fresnel_propagate(
            &ComplexField::zeros(grid, LAMBDA).unwrap(),
            0.5 * d_min,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("minimum safe distance"), "{msg}");
    }

    #[test]
    fn linearity() {
        let grid = make_grid(2.048e-2, 2048).unwrap();
        let d = 1.0;
        let spec = crate::speckle::SourceSpec::default();
        let f = crate::speckle::generate_realization(&spec, &grid, LAMBDA, 1, 0)
            .unwrap()
            .field;
        let g = crate::speckle::generate_realization(&spec, &grid, LAMBDA, 1, 1)
            .unwrap()
            .field;
        let a = Complex64::new(0.3, -1.1);
        let b = Complex64::new(-0.6, 0.2);
        let combo_vals: Vec<Complex64> = f
            .values()
            .iter()
            .zip(g.values())
            .map(|(x, y)| a * x + b * y)
            .collect();
        let combo = ComplexField::new(grid.clone(), LAMBDA, combo_vals).unwrap();

        let pf = fresnel_propagate(&f, d).unwrap();
        let pg = fresnel_propagate(&g, d).unwrap();
        let pc = fresnel_propagate(&combo, d).unwrap();
        let scale: f64 = pc.values().iter().map(|v| v.norm()).sum();
        for i in 0..grid.len() {
            let lin = a * pf.values()[i] + b * pg.values()[i];
            assert!((pc.values()[i] - lin).norm() / scale < 1e-12);
        }
    }
}
