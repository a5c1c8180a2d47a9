//! Monte-Carlo ghost-imaging engine.
//!
//! Every frame draws one source realization, sends identical copies through
//! both arm plans (ideal lossless beam splitter) and records the two
//! intensity patterns. The fluctuation correlation
//! `G = <I_t I_r> - <I_t> <I_r>` is estimated with the plain
//! product-of-means form, restricted to the matched diagonal
//! `x_r = (M_r / M_t) x_t`.
//!
//! Determinism: frames are pure functions of `(seed, index)`, and the
//! parallel engine reduces fixed-size blocks of consecutive frames in index
//! order. Accumulators keep per-block partial sums until finalization, and
//! merging concatenates block lists, so merged and sequential accumulation
//! produce bit-identical results for any worker count.

use crate::analysis;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::math::sinc;
use crate::objects::{AnalyticObject, TransmissionFunction};
use crate::optics::{PreparedPlan, PropagationPlan};
use crate::speckle::generate_realization;
use crate::system::SystemConfig;
use rayon::prelude::*;

/// Frames per reduction block. Fixed so the reduction tree is independent
/// of thread count.
pub const BLOCK_SIZE: usize = 256;

/// Intensities recorded by the two detectors for one source realization.
#[derive(Debug, Clone)]
pub struct FramePair {
    pub intensity_test: Vec<f64>,
    pub intensity_ref: Vec<f64>,
    pub realization_index: u64,
}

/// Both arm plans prepared on the simulation grid.
pub struct PreparedArms {
    pub test: PreparedPlan,
    pub reference: PreparedPlan,
}

impl PreparedArms {
    pub fn build(config: &SystemConfig) -> Result<Self> {
        let test = PropagationPlan::test_arm(
            config.d_source_to_object,
            config.object.clone(),
            &config.test_arm,
        )
        .prepare(&config.grid, config.wavelength)?;
        let reference = PropagationPlan::reference_arm(config.d_source_to_object, &config.reference_arm)
            .prepare(&config.grid, config.wavelength)?;
        Ok(PreparedArms { test, reference })
    }
}

/// Simulate frame `index` with prepared arm plans.
pub fn simulate_frame_prepared(
    config: &SystemConfig,
    arms: &PreparedArms,
    index: u64,
) -> Result<FramePair> {
    let source = generate_realization(
        &config.source,
        &config.grid,
        config.wavelength,
        config.seed,
        index,
    )?;
    let e = source.field.values();
    let t_out = arms.test.apply_values(e);
    let r_out = arms.reference.apply_values(e);
    Ok(FramePair {
        intensity_test: t_out.iter().map(|v| v.norm_sqr()).collect(),
        intensity_ref: r_out.iter().map(|v| v.norm_sqr()).collect(),
        realization_index: index,
    })
}

/// Simulate frame `index` from scratch. Deterministic in
/// `(config.seed, index)`.
pub fn simulate_frame(config: &SystemConfig, index: u64) -> Result<FramePair> {
    simulate_frame_prepared(config, &PreparedArms::build(config)?, index)
}

#[derive(Debug, Clone)]
struct SumBlock {
    sum_t: Vec<f64>,
    sum_r: Vec<f64>,
    sum_cross: Vec<f64>,
    matrix: Option<Vec<f64>>,
    count: usize,
}

impl SumBlock {
    fn new(n: usize, with_matrix: bool) -> Self {
        SumBlock {
            sum_t: vec![0.0; n],
            sum_r: vec![0.0; n],
            sum_cross: vec![0.0; n],
            matrix: with_matrix.then(|| vec![0.0; n * n]),
            count: 0,
        }
    }

    fn add_into(&self, t: &mut SumBlock) {
        for (a, b) in t.sum_t.iter_mut().zip(&self.sum_t) {
            *a += b;
        }
        for (a, b) in t.sum_r.iter_mut().zip(&self.sum_r) {
            *a += b;
        }
        for (a, b) in t.sum_cross.iter_mut().zip(&self.sum_cross) {
            *a += b;
        }
        if let (Some(tm), Some(sm)) = (t.matrix.as_mut(), self.matrix.as_ref()) {
            for (a, b) in tm.iter_mut().zip(sm) {
                *a += b;
            }
        }
        t.count += self.count;
    }
}

/// Mergeable running sums of the correlation estimator on the matched
/// diagonal grid (plus the optional full cross matrix).
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    grid: Grid,
    /// Test-detector sample `i` is paired with reference sample
    /// `match_map[i]` at `x_r = (M_r / M_t) x_t`.
    match_map: Vec<usize>,
    with_matrix: bool,
    blocks: Vec<SumBlock>,
    open: SumBlock,
}

impl CorrelationAccumulator {
    /// Accumulator on the test-detector grid, pairing each test sample with
    /// the nearest reference sample on the correlation diagonal. The
    /// matching must be exact (choose grids with an integer magnification
    /// ratio); off-sample diagonals are rejected.
    pub fn new(grid: &Grid, magnification_ratio: f64, with_matrix: bool) -> Result<Self> {
        let mut match_map = Vec::with_capacity(grid.len());
        for x_t in grid.coords() {
            let x_r = magnification_ratio * x_t;
            let j = grid.nearest(x_r).unwrap_or(if x_r < 0.0 { 0 } else { grid.len() - 1 });
            if (grid.coord(j) - x_r).abs() > 1e-6 * grid.dx() && x_r.abs() < 0.5 * grid.span() {
                return Err(Error::GridMismatch(format!(
                    "diagonal point x_r = {x_r} falls between reference samples; choose \
                     detector grids with an exact magnification ratio"
                )));
            }
            match_map.push(j);
        }
        let n = grid.len();
        Ok(CorrelationAccumulator {
            grid: grid.clone(),
            match_map,
            with_matrix,
            blocks: Vec::new(),
            open: SumBlock::new(n, with_matrix),
        })
    }

    pub fn for_config(config: &SystemConfig, with_matrix: bool) -> Result<Self> {
        let ratio = config.reference_arm.magnification() / config.test_arm.magnification();
        CorrelationAccumulator::new(&config.grid, ratio, with_matrix)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.blocks.iter().map(|b| b.count).sum::<usize>() + self.open.count
    }

    /// Add one frame. Frames must arrive in the canonical index order for
    /// the merge law to be exact.
    pub fn accumulate(&mut self, frame: &FramePair) -> Result<()> {
        let n = self.grid.len();
        if frame.intensity_test.len() != n || frame.intensity_ref.len() != n {
            return Err(Error::GridMismatch(format!(
                "frame has {}/{} samples, accumulator grid has {n}",
                frame.intensity_test.len(),
                frame.intensity_ref.len()
            )));
        }
        for i in 0..n {
            let it = frame.intensity_test[i];
            let ir = frame.intensity_ref[self.match_map[i]];
            self.open.sum_t[i] += it;
            self.open.sum_r[i] += ir;
            self.open.sum_cross[i] += it * ir;
        }
        if let Some(m) = self.open.matrix.as_mut() {
            for i in 0..n {
                let it = frame.intensity_test[i];
                let row = &mut m[i * n..(i + 1) * n];
                for (cell, ir) in row.iter_mut().zip(&frame.intensity_ref) {
                    *cell += it * ir;
                }
            }
        }
        self.open.count += 1;
        if self.open.count == BLOCK_SIZE {
            let full = std::mem::replace(&mut self.open, SumBlock::new(n, self.with_matrix));
            self.blocks.push(full);
        }
        Ok(())
    }

    /// Merge `other` after `self` in canonical order. `self` must end on a
    /// block boundary (the engine's chunking guarantees this); the merged
    /// accumulator is then bit-identical to sequential accumulation of the
    /// concatenated frame streams.
    pub fn merge(mut self, other: CorrelationAccumulator) -> Result<CorrelationAccumulator> {
        if self.grid != other.grid || self.match_map != other.match_map {
            return Err(Error::GridMismatch("accumulators describe different systems".into()));
        }
        if self.open.count != 0 {
            return Err(Error::Estimator(format!(
                "left accumulator ends mid-block ({} of {BLOCK_SIZE} frames); merge only at \
                 block boundaries",
                self.open.count
            )));
        }
        self.blocks.extend(other.blocks);
        self.open = other.open;
        Ok(self)
    }

    /// Left fold of all block sums in index order.
    fn totals(&self) -> SumBlock {
        let mut total = SumBlock::new(self.grid.len(), self.with_matrix);
        for b in &self.blocks {
            b.add_into(&mut total);
        }
        self.open.add_into(&mut total);
        total
    }

    /// Mean test-arm intensity `<I_t>` (the conventional direct image).
    pub fn direct_image(&self) -> Result<Vec<f64>> {
        let total = self.totals();
        if total.count == 0 {
            return Err(Error::Estimator("direct image needs at least 1 frame".into()));
        }
        let n = total.count as f64;
        Ok(total.sum_t.iter().map(|s| s / n).collect())
    }

    /// Fluctuation-correlation ghost image on the matched diagonal,
    /// `G(x_t) = <I_t I_r> - <I_t> <I_r>`, together with the direct image.
    pub fn ghost_image(&self) -> Result<GhostImage> {
        let total = self.totals();
        if total.count < 2 {
            return Err(Error::Estimator(format!(
                "fluctuation estimator needs >= 2 frames, have {}",
                total.count
            )));
        }
        let n = total.count as f64;
        let values: Vec<f64> = (0..self.grid.len())
            .map(|i| total.sum_cross[i] / n - (total.sum_t[i] / n) * (total.sum_r[i] / n))
            .collect();
        let direct: Vec<f64> = total.sum_t.iter().map(|s| s / n).collect();
        Ok(GhostImage {
            grid: self.grid.clone(),
            values,
            direct,
            frames_used: total.count,
        })
    }

    /// Full correlation matrix `G(x_t, x_r)`, if it was accumulated.
    pub fn correlation_matrix(&self) -> Result<Vec<f64>> {
        let total = self.totals();
        let m = total
            .matrix
            .ok_or_else(|| Error::Estimator("matrix accumulation was not requested".into()))?;
        if total.count < 2 {
            return Err(Error::Estimator("fluctuation estimator needs >= 2 frames".into()));
        }
        let n = total.count as f64;
        let size = self.grid.len();
        let mut out = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                out[i * size + j] =
                    m[i * size + j] / n - (total.sum_t[i] / n) * (total.sum_r[j] / n);
            }
        }
        Ok(out)
    }
}

/// Ghost image on the test-detector grid. Raw estimator values: finite-N
/// fluctuations may be slightly negative and are preserved.
#[derive(Debug, Clone)]
pub struct GhostImage {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// The conventional direct image `<I_t>` from the same frames.
    pub direct: Vec<f64>,
    pub frames_used: usize,
}

/// A profile re-parameterized to object-plane coordinates so direct, ghost
/// and analytic curves overlay directly.
#[derive(Debug, Clone)]
pub struct Profile {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Map a detector-plane profile to object coordinates `x0 = -x / M`
/// (arm images are inverted), returned in ascending x order.
pub fn to_object_coords(grid: &Grid, values: &[f64], magnification: f64) -> Profile {
    let mut pairs: Vec<(f64, f64)> = grid
        .coords()
        .zip(values)
        .map(|(x, &v)| (-x / magnification, v))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Profile {
        xs: pairs.iter().map(|p| p.0).collect(),
        ys: pairs.iter().map(|p| p.1).collect(),
    }
}

impl GhostImage {
    pub fn object_plane(&self, magnification: f64) -> Profile {
        to_object_coords(&self.grid, &self.values, magnification)
    }

    pub fn direct_object_plane(&self, magnification: f64) -> Profile {
        to_object_coords(&self.grid, &self.direct, magnification)
    }
}

/// Run the whole ensemble in parallel. Blocks of `BLOCK_SIZE` consecutive
/// frames are simulated independently and merged in index order, so the
/// result is byte-identical for any worker count.
pub fn run_ensemble(config: &SystemConfig, with_matrix: bool) -> Result<CorrelationAccumulator> {
    config.validate()?;
    let arms = PreparedArms::build(config)?;
    let n_frames = config.ensemble_size;
    let n_blocks = n_frames.div_ceil(BLOCK_SIZE as u64);

    let partials: Vec<Result<CorrelationAccumulator>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = CorrelationAccumulator::for_config(config, with_matrix)?;
            let start = b * BLOCK_SIZE as u64;
            let end = (start + BLOCK_SIZE as u64).min(n_frames);
            for index in start..end {
                let frame = simulate_frame_prepared(config, &arms, index)?;
                acc.accumulate(&frame)?;
            }
            Ok(acc)
        })
        .collect();

    let mut merged: Option<CorrelationAccumulator> = None;
    for p in partials {
        let acc = p?;
        merged = Some(match merged {
            None => acc,
            Some(m) => m.merge(acc)?,
        });
    }
    merged.ok_or_else(|| Error::Estimator("ensemble_size is zero".into()))
}

fn quadrature_over_object<F>(object: &TransmissionFunction, mut integrand: F) -> f64
where
    F: FnMut(f64, f64) -> f64,
{
    match object.analytic() {
        Some(AnalyticObject::Slits(intervals)) => {
            // composite Simpson per interval; the integrand oscillates on
            // the sinc scale which 2001 points vastly oversample
            let mut total = 0.0;
            for &(lo, hi) in intervals {
                let q = 2001usize;
                let h = (hi - lo) / (q - 1) as f64;
                let mut acc = 0.0;
                for j in 0..q {
                    let x = lo + j as f64 * h;
                    let w = if j == 0 || j == q - 1 {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += w * integrand(x, 1.0);
                }
                total += acc * h / 3.0;
            }
            total
        }
        Some(AnalyticObject::Point(x0)) => integrand(*x0, 1.0),
        None => {
            // trapezoid over the sampled transmittance
            let grid = object.grid();
            let mut acc = 0.0;
            for (i, x) in grid.coords().enumerate() {
                let t = object.values()[i].norm();
                let w = if i == 0 || i == grid.len() - 1 { 0.5 } else { 1.0 };
                acc += w * integrand(x, t);
            }
            acc * grid.dx()
        }
    }
}

/// Quadrature oracle for the diagonal ghost image: peak-normalized
/// `|int dx0 t(x0) sinc((x0 - xi) L_t / (lambda d1)) sinc((x0 - xi) L_r / (lambda d3))|^2`
/// evaluated at object-plane coordinates `xs`.
pub fn analytic_ghost_image_at(
    object: &TransmissionFunction,
    config: &SystemConfig,
    xs: &[f64],
) -> Result<Vec<f64>> {
    let st = config.test_arm.aperture() / (config.wavelength * config.test_arm.d_object());
    let sr = config.reference_arm.aperture() / (config.wavelength * config.reference_arm.d_object());
    let values: Vec<f64> = xs
        .iter()
        .map(|&xi| {
            let amp = quadrature_over_object(object, |x0, t| {
                t * sinc((x0 - xi) * st) * sinc((x0 - xi) * sr)
            });
            amp * amp
        })
        .collect();
    analysis::normalize_profile(&values)
}

/// Same oracle on a grid of object-plane offsets.
pub fn analytic_ghost_image(
    object: &TransmissionFunction,
    config: &SystemConfig,
    output_grid: &Grid,
) -> Result<Vec<f64>> {
    analytic_ghost_image_at(object, config, &output_grid.coords_vec())
}

/// Quadrature oracle for the conventional incoherent image:
/// peak-normalized `int dx0 |t(x0)|^2 sinc^2((x0 - xi) L_t / (lambda d1))`.
pub fn analytic_direct_image_at(
    object: &TransmissionFunction,
    config: &SystemConfig,
    xs: &[f64],
) -> Result<Vec<f64>> {
    let st = config.test_arm.aperture() / (config.wavelength * config.test_arm.d_object());
    let values: Vec<f64> = xs
        .iter()
        .map(|&xi| {
            quadrature_over_object(object, |x0, t| {
                let s = sinc((x0 - xi) * st);
                t * t * s * s
            })
        })
        .collect();
    analysis::normalize_profile(&values)
}
