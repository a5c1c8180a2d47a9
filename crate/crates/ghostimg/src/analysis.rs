//! Resolution analysis: the two-arm correlation kernel, FWHM measurement,
//! and the dip-depth resolvability metric.
//!
//! FWHM is measured on whatever curve is handed in. Kernel comparisons use
//! amplitude curves (the point-spread functions themselves); image
//! comparisons use intensity profiles. Mixing the two silently changes the
//! headline width ratio, so callers pick the mode explicitly by choosing
//! the curve.

use crate::error::{Error, Result};
use crate::geometry::ArmGeometry;
use crate::grid::Grid;
use crate::math::sinc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Single-lens amplitude point spread function |sinc|.
    SingleArmApsf,
    /// Product of the two arms' APSFs (the correlation-imaging kernel).
    TwoArmKernel,
}

/// A peak-normalized kernel curve over object-plane offsets.
#[derive(Debug, Clone)]
pub struct KernelCurve {
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: KernelKind,
}

/// Two-arm correlation kernel over object-plane offset `u`:
/// `sinc(u L_t / (lambda d1)) * sinc(u L_r / (lambda d3))`.
pub fn kernel_hg(
    test_arm: &ArmGeometry,
    ref_arm: &ArmGeometry,
    wavelength: f64,
    offset_grid: &Grid,
) -> KernelCurve {
    let st = test_arm.aperture() / (wavelength * test_arm.d_object());
    let sr = ref_arm.aperture() / (wavelength * ref_arm.d_object());
    KernelCurve {
        offsets: offset_grid.coords_vec(),
        values: offset_grid.coords().map(|u| sinc(u * st) * sinc(u * sr)).collect(),
        kind: KernelKind::TwoArmKernel,
    }
}

/// Single-arm amplitude kernel `|sinc(u L / (lambda d_object))|`.
pub fn single_arm_apsf(arm: &ArmGeometry, wavelength: f64, offset_grid: &Grid) -> KernelCurve {
    let s = arm.aperture() / (wavelength * arm.d_object());
    KernelCurve {
        offsets: offset_grid.coords_vec(),
        values: offset_grid.coords().map(|u| sinc(u * s).abs()).collect(),
        kind: KernelKind::SingleArmApsf,
    }
}

/// Full width at half maximum of a single-peaked curve, with linear
/// interpolation between the bracketing samples on each side.
pub fn fwhm(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Analysis("fwhm needs matched x/y arrays with >= 3 points".into()));
    }
    let (i_max, &peak) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if !(peak > 0.0) {
        return Err(Error::Analysis("profile has no positive peak".into()));
    }
    let half = 0.5 * peak;

    let cross = |from: usize, step: isize| -> Option<f64> {
        let mut i = from as isize;
        loop {
            let j = i + step;
            if j < 0 || j as usize >= ys.len() {
                return None;
            }
            if ys[j as usize] < half {
                let (x1, y1) = (xs[i as usize], ys[i as usize]);
                let (x2, y2) = (xs[j as usize], ys[j as usize]);
                return Some(x1 + (x2 - x1) * (half - y1) / (y2 - y1));
            }
            i = j;
        }
    };

    let left = cross(i_max, -1)
        .ok_or_else(|| Error::Analysis("no half-maximum crossing left of the peak".into()))?;
    let right = cross(i_max, 1)
        .ok_or_else(|| Error::Analysis("no half-maximum crossing right of the peak".into()))?;
    Ok((right - left).abs())
}

impl KernelCurve {
    pub fn fwhm(&self) -> Result<f64> {
        // measured on |values| so the two-arm kernel's negative side lobes
        // do not fake crossings
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        fwhm(&self.offsets, &abs)
    }
}

fn fig3_offset_grid(test_arm: &ArmGeometry, wavelength: f64) -> Grid {
    // span +-2 first-zero widths of the single-arm sinc, finely sampled
    let first_zero = wavelength * test_arm.d_object() / test_arm.aperture();
    Grid::from_span(4.0 * first_zero, 8192).expect("static grid parameters")
}

/// Ratio of the two-arm kernel FWHM to the single-arm APSF FWHM, both on
/// amplitude curves.
pub fn fwhm_ratio_fig3(test_arm: &ArmGeometry, ref_arm: &ArmGeometry, wavelength: f64) -> Result<f64> {
    let grid = fig3_offset_grid(test_arm, wavelength);
    let two = kernel_hg(test_arm, ref_arm, wavelength, &grid).fwhm()?;
    let one = single_arm_apsf(test_arm, wavelength, &grid).fwhm()?;
    Ok(two / one)
}

/// Indices of local maxima above `floor` (strictly above both neighbors,
/// with plateau handling on the right side).
fn local_maxima(ys: &[f64], floor: f64) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = ys.len();
    let mut i = 1;
    while i + 1 < n {
        if ys[i] > ys[i - 1] && ys[i] >= floor {
            // walk any flat top
            let mut j = i;
            while j + 1 < n && ys[j + 1] == ys[i] {
                j += 1;
            }
            if j + 1 < n && ys[j + 1] < ys[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Resolvability of a two-peak profile: after subtracting the curve minimum
/// as baseline, `1 - valley / min(peak1, peak2)`. 0 means unresolved, 1
/// means the valley reaches the baseline.
pub fn dip_depth(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || ys.len() < 5 {
        return Err(Error::Analysis("dip_depth needs matched x/y arrays with >= 5 points".into()));
    }
    let peak = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let peaks = local_maxima(ys, 0.1 * peak);
    if peaks.len() != 2 {
        return Err(Error::Analysis(format!(
            "dip_depth expects exactly 2 peaks above 10% of maximum, found {}",
            peaks.len()
        )));
    }
    Ok(pair_dip(ys, peaks[0], peaks[1]))
}

fn pair_dip(ys: &[f64], p1: usize, p2: usize) -> f64 {
    let baseline = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let valley = ys[p1..=p2].iter().cloned().fold(f64::INFINITY, f64::min);
    let lower_peak = ys[p1].min(ys[p2]) - baseline;
    if lower_peak <= 0.0 {
        return 0.0;
    }
    (1.0 - (valley - baseline) / lower_peak).clamp(0.0, 1.0)
}

/// Multi-peak generalization used for row-wise mask image scoring: the
/// median of the dips between adjacent peak pairs. Errors when fewer than
/// two peaks rise above 10% of the row maximum.
pub fn multi_peak_dip(ys: &[f64]) -> Result<f64> {
    let peak = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Analysis("row has no positive values".into()));
    }
    let peaks = local_maxima(ys, 0.1 * peak);
    if peaks.len() < 2 {
        return Err(Error::Analysis("row has fewer than 2 peaks".into()));
    }
    let mut dips: Vec<f64> = peaks.windows(2).map(|w| pair_dip(ys, w[0], w[1])).collect();
    dips.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(dips[dips.len() / 2])
}

/// Scale a profile to peak 1. The baseline is NOT subtracted; small
/// negative excursions of the correlation estimator are preserved.
pub fn normalize_profile(ys: &[f64]) -> Result<Vec<f64>> {
    let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Analysis("cannot normalize a profile with non-positive maximum".into()));
    }
    Ok(ys.iter().map(|y| y / max).collect())
}

/// Aggregated resolution metrics for one profile.
#[derive(Debug, Clone)]
pub struct ResolutionReport {
    pub fwhm: Option<f64>,
    pub rayleigh_limit: f64,
    pub dip_depth: Option<f64>,
    pub resolvable: bool,
}

/// Dip-depth threshold above which a two-peak profile counts as resolved.
/// At the Rayleigh condition for a sinc^2 spot the dip is ~0.26, so this
/// sits just below it.
pub const RESOLVABLE_DIP: f64 = 0.2;

impl ResolutionReport {
    pub fn for_profile(xs: &[f64], ys: &[f64], rayleigh: f64) -> Self {
        let fwhm = fwhm(xs, ys).ok();
        let dip = dip_depth(xs, ys).ok();
        ResolutionReport {
            fwhm,
            rayleigh_limit: rayleigh,
            dip_depth: dip,
            resolvable: dip.map(|d| d > RESOLVABLE_DIP).unwrap_or(false),
        }
    }
}
