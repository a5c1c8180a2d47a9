//! Paraxial scalar propagation: Fresnel free space, thin lenses with hard
//! apertures, composed arm responses, and the closed-form sinc point spread
//! function of an aperture-limited lens.

pub mod fresnel;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::geometry::ArmGeometry;
use crate::grid::Grid;
use crate::math::sinc;
use crate::objects::TransmissionFunction;
use fresnel::Propagator;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Multiply by the thin-lens phase `exp(-j pi x^2 / (lambda f))` inside the
/// hard aperture `|x| <= aperture / 2`, zero outside.
pub fn apply_thin_lens(field: &ComplexField, focal_length: f64, aperture: f64) -> Result<ComplexField> {
    let grid = field.grid().clone();
    let multiplier = lens_multiplier(&grid, field.wavelength(), focal_length, aperture)?;
    let values = field
        .values()
        .iter()
        .zip(&multiplier)
        .map(|(v, m)| v * m)
        .collect();
    ComplexField::new(grid, field.wavelength(), values)
}

fn lens_multiplier(grid: &Grid, wavelength: f64, focal_length: f64, aperture: f64) -> Result<Vec<Complex64>> {
    if !(focal_length > 0.0) || !(aperture > 0.0) {
        return Err(Error::invalid("focal length and aperture must be positive"));
    }
    if aperture > grid.span() {
        return Err(Error::invalid(format!(
            "lens aperture {aperture} exceeds the grid span {}; the lens would be \
             artificially clipped",
            grid.span()
        )));
    }
    Ok(grid
        .coords()
        .map(|x| {
            if x.abs() <= 0.5 * aperture {
                Complex64::from_polar(1.0, -PI * x * x / (wavelength * focal_length))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect())
}

/// One stage of an arm.
#[derive(Debug, Clone)]
pub enum Stage {
    FreeSpace { distance: f64 },
    ThinLens { focal_length: f64, aperture: f64 },
    Mask(TransmissionFunction),
}

/// An ordered sequence of propagation stages.
#[derive(Debug, Clone, Default)]
pub struct PropagationPlan {
    pub stages: Vec<Stage>,
}

impl PropagationPlan {
    pub fn new(stages: Vec<Stage>) -> Self {
        PropagationPlan { stages }
    }

    /// Test arm of the two-arm system: source-to-object free space, the
    /// object mask, then the imaging lens between its conjugate planes.
    pub fn test_arm(d_source_to_object: f64, object: TransmissionFunction, arm: &ArmGeometry) -> Self {
        PropagationPlan::new(vec![
            Stage::FreeSpace { distance: d_source_to_object },
            Stage::Mask(object),
            Stage::FreeSpace { distance: arm.d_object() },
            Stage::ThinLens { focal_length: arm.focal_length(), aperture: arm.aperture() },
            Stage::FreeSpace { distance: arm.d_image() },
        ])
    }

    /// Reference arm: same structure with no mask (the sigma plane is free).
    pub fn reference_arm(d_source_to_sigma: f64, arm: &ArmGeometry) -> Self {
        PropagationPlan::new(vec![
            Stage::FreeSpace { distance: d_source_to_sigma },
            Stage::FreeSpace { distance: arm.d_object() },
            Stage::ThinLens { focal_length: arm.focal_length(), aperture: arm.aperture() },
            Stage::FreeSpace { distance: arm.d_image() },
        ])
    }

    /// Precompute propagator kernels and multipliers for repeated use.
    pub fn prepare(&self, grid: &Grid, wavelength: f64) -> Result<PreparedPlan> {
        let stages = self
            .stages
            .iter()
            .map(|stage| {
                Ok(match stage {
                    Stage::FreeSpace { distance } => {
                        PreparedStage::FreeSpace(Propagator::new(grid, wavelength, *distance)?)
                    }
                    Stage::ThinLens { focal_length, aperture } => PreparedStage::Multiply(
                        lens_multiplier(grid, wavelength, *focal_length, *aperture)?,
                    ),
                    Stage::Mask(t) => {
                        if t.grid() != grid {
                            return Err(Error::GridMismatch(
                                "mask grid differs from propagation grid".into(),
                            ));
                        }
                        PreparedStage::Multiply(t.values().to_vec())
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedPlan {
            grid: grid.clone(),
            wavelength,
            stages,
        })
    }
}

enum PreparedStage {
    FreeSpace(Propagator),
    Multiply(Vec<Complex64>),
}

/// A plan bound to a grid and wavelength, with kernels precomputed.
/// Immutable and shareable across worker threads.
pub struct PreparedPlan {
    grid: Grid,
    wavelength: f64,
    stages: Vec<PreparedStage>,
}

impl PreparedPlan {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Run the plan over raw sample values.
    pub fn apply_values(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut current = values.to_vec();
        for stage in &self.stages {
            match stage {
                PreparedStage::FreeSpace(p) => current = p.apply_values(&current),
                PreparedStage::Multiply(m) => {
                    for (c, m) in current.iter_mut().zip(m) {
                        *c *= m;
                    }
                }
            }
        }
        current
    }

    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        if field.grid() != &self.grid || field.wavelength() != self.wavelength {
            return Err(Error::GridMismatch("field does not match prepared plan".into()));
        }
        ComplexField::new(
            self.grid.clone(),
            self.wavelength,
            self.apply_values(field.values()),
        )
    }
}

/// Sequentially apply all stages of `plan` to `field`.
pub fn run_plan(field: &ComplexField, plan: &PropagationPlan) -> Result<ComplexField> {
    plan.prepare(field.grid(), field.wavelength())?.apply(field)
}

/// Closed-form amplitude point spread function of one aperture-limited lens:
/// `sinc{(x_object/d_object + x_image/d_image) * aperture / wavelength}`.
/// Equals 1 at the conjugate point `x_image = -M x_object`.
pub fn apsf_closed_form(arm: &ArmGeometry, x_object: f64, x_image: f64, wavelength: f64) -> f64 {
    sinc((x_object / arm.d_object() + x_image / arm.d_image()) * arm.aperture() / wavelength)
}

/// Direct quadrature of the lens aperture integral: modulus of
/// `int_{-L/2}^{L/2} dx_f chirp(d_object) * lens phase * chirp(d_image)`
/// sampled over `image_grid` for a fixed object point.
///
/// The integrand's linear phase completes `aperture * |u| / wavelength`
/// cycles across the aperture (u being the sinc argument scale), so the
/// composite-Simpson point count must resolve the fastest oscillation;
/// fewer than ~12 points per cycle is rejected.
pub fn apsf_numeric(
    arm: &ArmGeometry,
    x_object: f64,
    image_grid: &Grid,
    wavelength: f64,
    quadrature_points: usize,
) -> Result<Vec<f64>> {
    let l = arm.aperture();
    let max_u = image_grid
        .coords()
        .map(|xt| (x_object / arm.d_object() + xt / arm.d_image()).abs())
        .fold(0.0, f64::max);
    let cycles = l * max_u / wavelength;
    let min_points = ((12.0 * cycles).ceil() as usize).max(33) | 1;
    if quadrature_points < min_points {
        return Err(Error::Sampling(format!(
            "{quadrature_points} quadrature points cannot resolve {cycles:.1} aperture \
             oscillations; need at least {min_points}"
        )));
    }
    let q = quadrature_points | 1; // Simpson needs an odd count
    let h = l / (q - 1) as f64;
    let k = 2.0 * PI / wavelength;
    let d1 = arm.d_object();
    let d2 = arm.d_image();
    let prefactor = (Complex64::from_polar(1.0, k * d1) / Complex64::new(0.0, wavelength * d1))
        * (Complex64::from_polar(1.0, k * d2) / Complex64::new(0.0, wavelength * d2));

    let profile = image_grid
        .coords()
        .map(|xt| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..q {
                let xf = -0.5 * l + j as f64 * h;
                let w = if j == 0 || j == q - 1 {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let phase = PI / wavelength
                    * ((x_object - xf) * (x_object - xf) / d1
                        - xf * xf / arm.focal_length()
                        + (xt - xf) * (xt - xf) / d2);
                acc += Complex64::from_polar(w, phase);
            }
            (prefactor * acc * (h / 3.0)).norm()
        })
        .collect();
    Ok(profile)
}
