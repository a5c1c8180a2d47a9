//! Separable 2-D extension of the 1-D engine.
//!
//! Fields live on a rectangular grid (independent x and y axes, row-major
//! storage). Free-space propagation applies the 1-D Fresnel convolution
//! along rows and then along columns; because each 1-D pass carries the
//! unitary `exp(jkd)/sqrt(j lambda d)` prefactor, the composed 2-D kernel is
//! `exp(2jkd)/(j lambda d)` -- the standard 2-D Fresnel kernel times a
//! global phase `exp(jkd)` that cancels in every intensity. Lenses are thin
//! with square hard apertures (the x and y multipliers factorize). The
//! correlation accumulator reuses the 1-D block layout so results are
//! independent of worker count.

use crate::error::{Error, Result};
use crate::geometry::ArmGeometry;
use crate::grid::Grid;
use crate::objects::Transmission2d;
use crate::optics::fresnel::Propagator;
use crate::speckle::SourceSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Rectangular simulation grid: `gx` spans columns, `gy` spans rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub gx: Grid,
    pub gy: Grid,
}

impl Grid2 {
    pub fn len(&self) -> usize {
        self.gx.len() * self.gy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draw 2-D realization `index`: circular complex Gaussian per sample with
/// mean intensity `I(x) I(y) / I0` (separable profile), optionally smoothed
/// to the requested coherence length along both axes. Pure in
/// `(spec, grid, seed, index)` like the 1-D generator.
pub fn generate_realization_2d(
    spec: &SourceSpec,
    grid: &Grid2,
    seed: u64,
    index: u64,
) -> Result<Vec<Complex64>> {
    spec.validate(&grid.gx)?;
    spec.validate(&grid.gy)?;
    let (nx, ny) = (grid.gx.len(), grid.gy.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);

    let mut values: Vec<Complex64> = (0..nx * ny)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();

    let lc = spec.coherence_length.unwrap_or(grid.gx.dx());
    if lc > grid.gx.dx() || lc > grid.gy.dx() {
        filter_axis(&mut values, nx, ny, grid.gx.dx(), lc, true);
        filter_axis(&mut values, nx, ny, grid.gy.dx(), lc, false);
    }

    let i0 = spec.mean_intensity;
    for iy in 0..ny {
        let ay = (spec.intensity_at(grid.gy.coord(iy)) / i0).sqrt();
        for ix in 0..nx {
            let a = (spec.intensity_at(grid.gx.coord(ix))).sqrt() * ay;
            values[iy * nx + ix] *= a;
        }
    }
    Ok(values)
}

/// In-place Gaussian smoothing along one axis with L2-normalized taps and
/// periodic wrap (same construction as the 1-D generator).
fn filter_axis(values: &mut [Complex64], nx: usize, ny: usize, dx: f64, lc: f64, along_x: bool) {
    if lc <= dx {
        return;
    }
    let sigma = lc / std::f64::consts::SQRT_2;
    let len = if along_x { nx } else { ny };
    let half = ((4.0 * sigma / dx).ceil() as usize).min(len / 2);
    let taps: Vec<f64> = (-(half as isize)..=half as isize)
        .map(|k| {
            let u = k as f64 * dx;
            (-u * u / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();

    let mut line = vec![Complex64::new(0.0, 0.0); len];
    let lines = if along_x { ny } else { nx };
    for l in 0..lines {
        for (i, slot) in line.iter_mut().enumerate() {
            *slot = if along_x { values[l * nx + i] } else { values[i * nx + l] };
        }
        for i in 0..len {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, t) in taps.iter().enumerate() {
                let k = j as isize - half as isize;
                let idx = (i as isize + k).rem_euclid(len as isize) as usize;
                acc += line[idx] * *t;
            }
            let out = acc / norm;
            if along_x {
                values[l * nx + i] = out;
            } else {
                values[i * nx + l] = out;
            }
        }
    }
}

/// Free-space propagator over a rectangular grid: 1-D convolution along x,
/// then along y.
pub struct Propagator2 {
    px: Propagator,
    py: Propagator,
    nx: usize,
    ny: usize,
}

impl Propagator2 {
    pub fn new(grid: &Grid2, wavelength: f64, distance: f64) -> Result<Self> {
        Ok(Propagator2 {
            px: Propagator::new(&grid.gx, wavelength, distance)?,
            py: Propagator::new(&grid.gy, wavelength, distance)?,
            nx: grid.gx.len(),
            ny: grid.gy.len(),
        })
    }

    pub fn apply(&self, values: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.nx * self.ny);
        let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
        for iy in 0..self.ny {
            let row = self.px.apply_values(&values[iy * self.nx..(iy + 1) * self.nx]);
            out[iy * self.nx..(iy + 1) * self.nx].copy_from_slice(&row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.ny];
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                col[iy] = out[iy * self.nx + ix];
            }
            let col_out = self.py.apply_values(&col);
            for iy in 0..self.ny {
                out[iy * self.nx + ix] = col_out[iy];
            }
        }
        out
    }
}

/// Thin lens with a square hard aperture, as separable x and y multipliers.
fn lens_multipliers(
    grid: &Grid2,
    wavelength: f64,
    focal_length: f64,
    aperture: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let axis = |g: &Grid| -> Result<Vec<Complex64>> {
        if aperture > g.span() {
            return Err(Error::invalid(format!(
                "lens aperture {aperture} exceeds the grid span {}",
                g.span()
            )));
        }
        Ok(g.coords()
            .map(|x| {
                if x.abs() <= 0.5 * aperture {
                    Complex64::from_polar(
                        1.0,
                        -std::f64::consts::PI * x * x / (wavelength * focal_length),
                    )
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect())
    };
    Ok((axis(&grid.gx)?, axis(&grid.gy)?))
}

/// Two-arm 2-D system description.
#[derive(Debug, Clone)]
pub struct System2Config {
    pub wavelength: f64,
    pub d_source_to_object: f64,
    pub test_arm: ArmGeometry,
    pub reference_arm: ArmGeometry,
    pub source: SourceSpec,
    pub object: Transmission2d,
    pub grid: Grid2,
    pub ensemble_size: u64,
    pub seed: u64,
}

/// Precomputed per-frame machinery shared by all workers.
struct PreparedArms2 {
    common: Propagator2,
    mask: Vec<f64>,
    t_d1: Propagator2,
    t_lens: (Vec<Complex64>, Vec<Complex64>),
    t_d2: Propagator2,
    r_d1: Propagator2,
    r_lens: (Vec<Complex64>, Vec<Complex64>),
    r_d2: Propagator2,
}

impl PreparedArms2 {
    fn build(cfg: &System2Config) -> Result<Self> {
        let g = &cfg.grid;
        let lam = cfg.wavelength;
        Ok(PreparedArms2 {
            common: Propagator2::new(g, lam, cfg.d_source_to_object)?,
            mask: cfg.object.sample(&g.gx, &g.gy),
            t_d1: Propagator2::new(g, lam, cfg.test_arm.d_object())?,
            t_lens: lens_multipliers(g, lam, cfg.test_arm.focal_length(), cfg.test_arm.aperture())?,
            t_d2: Propagator2::new(g, lam, cfg.test_arm.d_image())?,
            r_d1: Propagator2::new(g, lam, cfg.reference_arm.d_object())?,
            r_lens: lens_multipliers(g, lam, cfg.reference_arm.focal_length(), cfg.reference_arm.aperture())?,
            r_d2: Propagator2::new(g, lam, cfg.reference_arm.d_image())?,
        })
    }
}

fn apply_separable(values: &mut [Complex64], nx: usize, mx: &[Complex64], my: &[Complex64]) {
    for (iy, m_y) in my.iter().enumerate() {
        for (ix, m_x) in mx.iter().enumerate() {
            values[iy * nx + ix] *= m_x * m_y;
        }
    }
}

/// Detector intensities of frame `index`: the source realization propagates
/// to the object plane once, then continues through each arm.
fn simulate_frame_2d(cfg: &System2Config, arms: &PreparedArms2, index: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let nx = cfg.grid.gx.len();
    let source = generate_realization_2d(&cfg.source, &cfg.grid, cfg.seed, index)?;
    let at_object = arms.common.apply(&source);

    let mut t = at_object.clone();
    for (v, m) in t.iter_mut().zip(&arms.mask) {
        *v *= *m;
    }
    let mut t = arms.t_d1.apply(&t);
    apply_separable(&mut t, nx, &arms.t_lens.0, &arms.t_lens.1);
    let t = arms.t_d2.apply(&t);

    let mut r = arms.r_d1.apply(&at_object);
    apply_separable(&mut r, nx, &arms.r_lens.0, &arms.r_lens.1);
    let r = arms.r_d2.apply(&r);

    Ok((
        t.iter().map(|v| v.norm_sqr()).collect(),
        r.iter().map(|v| v.norm_sqr()).collect(),
    ))
}

const BLOCK_FRAMES: u64 = crate::correlate::BLOCK_SIZE as u64;

#[derive(Clone)]
struct Block2 {
    sum_t: Vec<f64>,
    sum_r: Vec<f64>,
    sum_cross: Vec<f64>,
    count: u64,
}

/// Correlation-estimate images of a 2-D run.
pub struct Ghost2 {
    pub grid: Grid2,
    /// Fluctuation correlation `<I_t I_r> - <I_t><I_r>` per test pixel, with
    /// the reference pixel taken on the matched diagonal.
    pub ghost: Vec<f64>,
    /// Mean test-arm intensity (the direct image).
    pub direct: Vec<f64>,
    pub frames_used: u64,
}

/// Nearest-sample matched index for the diagonal `x_r = ratio * x_t`; exact
/// to within 1e-6 of a sample or the configuration is rejected.
fn match_map(axis: &Grid, ratio: f64) -> Result<Vec<usize>> {
    let mut map = Vec::with_capacity(axis.len());
    for x in axis.coords() {
        let target = ratio * x;
        let j = axis.nearest(target)?;
        if (axis.coord(j) - target).abs() > 1e-6 * axis.dx() {
            return Err(Error::Estimator(format!(
                "matched reference coordinate {target:.3e} falls between grid samples; \
                 the magnification ratio must map samples onto samples"
            )));
        }
        map.push(j);
    }
    Ok(map)
}

/// Run the 2-D ensemble. Frames are grouped in fixed blocks; blocks may be
/// computed on any worker but are reduced in index order, so the result is a
/// deterministic function of the configuration alone.
pub fn run_ensemble_2d(cfg: &System2Config) -> Result<Ghost2> {
    if cfg.ensemble_size < 2 {
        return Err(Error::Estimator(
            "a fluctuation correlation needs at least 2 frames".into(),
        ));
    }
    let arms = PreparedArms2::build(cfg)?;
    let ratio = cfg.reference_arm.magnification() / cfg.test_arm.magnification();
    let map_x = match_map(&cfg.grid.gx, ratio)?;
    let map_y = match_map(&cfg.grid.gy, ratio)?;
    let (nx, npix) = (cfg.grid.gx.len(), cfg.grid.len());

    let n_blocks = cfg.ensemble_size.div_ceil(BLOCK_FRAMES);
    let blocks: Vec<Result<Block2>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK_FRAMES;
            let hi = (lo + BLOCK_FRAMES).min(cfg.ensemble_size);
            let mut block = Block2 {
                sum_t: vec![0.0; npix],
                sum_r: vec![0.0; npix],
                sum_cross: vec![0.0; npix],
                count: 0,
            };
            for index in lo..hi {
                let (it, ir) = simulate_frame_2d(cfg, &arms, index)?;
                for p in 0..npix {
                    let matched = map_y[p / nx] * nx + map_x[p % nx];
                    let r = ir[matched];
                    block.sum_t[p] += it[p];
                    block.sum_r[p] += r;
                    block.sum_cross[p] += it[p] * r;
                }
                block.count += 1;
            }
            Ok(block)
        })
        .collect();

    let mut sum_t = vec![0.0; npix];
    let mut sum_r = vec![0.0; npix];
    let mut sum_cross = vec![0.0; npix];
    let mut count = 0u64;
    for block in blocks {
        let block = block?;
        for p in 0..npix {
            sum_t[p] += block.sum_t[p];
            sum_r[p] += block.sum_r[p];
            sum_cross[p] += block.sum_cross[p];
        }
        count += block.count;
    }

    let n = count as f64;
    let ghost = (0..npix)
        .map(|p| sum_cross[p] / n - (sum_t[p] / n) * (sum_r[p] / n))
        .collect();
    let direct = sum_t.iter().map(|s| s / n).collect();
    Ok(Ghost2 {
        grid: cfg.grid.clone(),
        ghost,
        direct,
        frames_used: count,
    })
}

impl Ghost2 {
    /// One horizontal cut of the ghost image.
    pub fn ghost_row(&self, iy: usize) -> &[f64] {
        let nx = self.grid.gx.len();
        &self.ghost[iy * nx..(iy + 1) * nx]
    }

    pub fn direct_row(&self, iy: usize) -> &[f64] {
        let nx = self.grid.gx.len();
        &self.direct[iy * nx..(iy + 1) * nx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    const LAMBDA: f64 = 532e-9;

    fn small_grid2() -> Grid2 {
        Grid2 {
            gx: make_grid(4e-3, 128).unwrap(),
            gy: make_grid(2e-3, 64).unwrap(),
        }
    }

    #[test]
    fn realization_is_deterministic_and_thermal() {
        let grid = small_grid2();
        let spec = SourceSpec::default();
        let a = generate_realization_2d(&spec, &grid, 5, 9).unwrap();
        let b = generate_realization_2d(&spec, &grid, 5, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_realization_2d(&spec, &grid, 5, 10).unwrap();
        assert_ne!(a, c);

        // mean intensity ~ I0 across the frame
        let mean: f64 = a.iter().map(|v| v.norm_sqr()).sum::<f64>() / a.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean intensity {mean}");
    }

    #[test]
    fn separable_propagation_matches_1d_on_a_plane_wave_row() {
        // A field uniform along y factorizes: the 2-D result on the center
        // row equals the 1-D x-propagation times the scalar y-propagation of
        // a constant line (checked against the center sample of a 1-D run).
        let grid = Grid2 {
            gx: make_grid(2.048e-2, 2048).unwrap(),
            gy: make_grid(2.56e-3, 256).unwrap(),
        };
        let d = 1.0;
        let prop = Propagator2::new(&grid, LAMBDA, d).unwrap();

        // separable input: gaussian(x) * 1(y)
        let fx: Vec<Complex64> = grid
            .gx
            .coords()
            .map(|x| Complex64::new((-x * x / (2.0 * (1e-3f64).powi(2))).exp(), 0.0))
            .collect();
        let nx = grid.gx.len();
        let ny = grid.gy.len();
        let mut field = vec![Complex64::new(0.0, 0.0); nx * ny];
        for iy in 0..ny {
            field[iy * nx..(iy + 1) * nx].copy_from_slice(&fx);
        }
        let out2 = prop.apply(&field);

        let px = Propagator::new(&grid.gx, LAMBDA, d).unwrap();
        let fx_out = px.apply_values(&fx);
        let py = Propagator::new(&grid.gy, LAMBDA, d).unwrap();
        let ones_out = py.apply_values(&vec![Complex64::new(1.0, 0.0); ny]);
        let y_scalar = ones_out[ny / 2];

        let iy = ny / 2;
        let scale: f64 = fx_out.iter().map(|v| v.norm()).sum::<f64>() / nx as f64;
        for ix in (nx / 2 - 100)..(nx / 2 + 100) {
            let expected = fx_out[ix] * y_scalar;
            let got = out2[iy * nx + ix];
            assert!(
                (got - expected).norm() / scale < 1e-9,
                "pixel {ix}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn ensemble_is_deterministic() {
        let cfg = tiny_system();
        let a = run_ensemble_2d(&cfg).unwrap();
        let b = run_ensemble_2d(&cfg).unwrap();
        assert_eq!(a.ghost, b.ghost);
        assert_eq!(a.direct, b.direct);
    }

    fn tiny_system() -> System2Config {
        // opaque screen with a 2x2-pixel opening
        let object = Transmission2d {
            width: 8,
            height: 8,
            pixel_pitch: 31.25e-6,
            values: {
                let mut v = vec![0.0; 64];
                for y in 3..5 {
                    for x in 3..5 {
                        v[y * 8 + x] = 1.0;
                    }
                }
                v
            },
        };
        System2Config {
            wavelength: LAMBDA,
            d_source_to_object: 0.8,
            test_arm: ArmGeometry::two_f(0.4, 1.5e-3).unwrap(),
            reference_arm: ArmGeometry::two_f(0.4, 1.5e-3).unwrap(),
            source: SourceSpec::default(),
            object,
            grid: small_grid2(),
            ensemble_size: 64,
            seed: 77,
        }
    }

    #[test]
    fn ghost_energy_concentrates_at_the_object_image() {
        // with identical arms the ghost image peaks where the opening's
        // (inverted) image lies -- at the center here
        let mut cfg = tiny_system();
        cfg.ensemble_size = 512;
        let out = run_ensemble_2d(&cfg).unwrap();
        let nx = cfg.grid.gx.len();
        let ny = cfg.grid.gy.len();
        let peak_idx = out
            .ghost
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let (py, px) = (peak_idx / nx, peak_idx % nx);
        assert!(
            (px as isize - (nx / 2) as isize).abs() <= 3
                && (py as isize - (ny / 2) as isize).abs() <= 3,
            "ghost peak at ({px}, {py}), expected near ({}, {})",
            nx / 2,
            ny / 2
        );
    }
}
