//! End-to-end acceptance checks, one per headline property. Each test
//! prints a single `criterion N (...): PASS/FAIL` line (visible with
//! `--nocapture`) and fails the build on FAIL.

use ghostimg::analysis::{self, KernelKind};
use ghostimg::correlate::{
    analytic_direct_image_at, analytic_ghost_image_at, run_ensemble, GhostImage,
};
use ghostimg::geometry::ArmGeometry;
use ghostimg::grid::make_grid;
use ghostimg::math::{rayleigh_limit, sinc};
use ghostimg::objects::{double_slit, mask_from_image};
use ghostimg::optics::{apsf_closed_form, apsf_numeric};
use ghostimg::speckle::{generate_realization, SourceSpec};
use ghostimg::system::SystemConfig;
use ghostimg::twodim::{run_ensemble_2d, Grid2, System2Config};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

const LAMBDA: f64 = 532e-9;
const SPAN: f64 = 28e-3;
const SAMPLES: usize = 4096;

fn report(n: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {n} ({name}): {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn test_arm() -> ArmGeometry {
    ArmGeometry::two_f(0.4, 3e-3).unwrap()
}

fn bench_config(reference_arm: ArmGeometry, frames: u64) -> SystemConfig {
    let grid = make_grid(SPAN, SAMPLES).unwrap();
    let object = double_slit(90e-6, 180e-6, &grid).unwrap();
    SystemConfig {
        wavelength: LAMBDA,
        d_source_to_object: 0.8,
        test_arm: test_arm(),
        reference_arm,
        source: SourceSpec::default(),
        object,
        grid,
        ensemble_size: frames,
        seed: 20_240_824,
    }
}

/// Normalized profile over the central window and the matching oracle xs.
fn central_window(image: &GhostImage, config: &SystemConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = config.test_arm.magnification();
    let ghost = image.object_plane(m);
    let direct = image.direct_object_plane(m);
    let idx: Vec<usize> = ghost
        .xs
        .iter()
        .enumerate()
        .filter(|(_, &x)| x.abs() <= 450e-6)
        .map(|(i, _)| i)
        .collect();
    let xs: Vec<f64> = idx.iter().map(|&i| ghost.xs[i]).collect();
    let gys = analysis::normalize_profile(&idx.iter().map(|&i| ghost.ys[i]).collect::<Vec<_>>()).unwrap();
    let dys =
        analysis::normalize_profile(&idx.iter().map(|&i| direct.ys[i]).collect::<Vec<_>>()).unwrap();
    (xs, gys, dys)
}

fn normalized_rms(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
}

/// The N = 10^4 equal-aperture run is shared between criteria 4 and 5.
fn fig4b_run() -> &'static (SystemConfig, GhostImage) {
    static RUN: OnceLock<(SystemConfig, GhostImage)> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = bench_config(ArmGeometry::two_f(0.4, 3e-3).unwrap(), 10_000);
        let image = run_ensemble(&config, false).unwrap().ghost_image().unwrap();
        (config, image)
    })
}

/// Root of `f` on `[lo, hi]` by bisection; the acceptance oracle for the
/// half-maximum constants of the kernel curves.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    assert!(f(lo) * f(hi) < 0.0, "bisection bracket does not straddle a root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_1_rayleigh_limit() {
    let limit = rayleigh_limit(0.532e-6, 0.8, 3e-3).unwrap();
    let ok = (limit - 173.1e-6).abs() < 0.5e-6;
    report(
        1,
        "rayleigh limit",
        ok,
        &format!("1.22 lambda d / L = {:.2} um, expected 173.1 +- 0.5 um", limit * 1e6),
    );
}

#[test]
fn criterion_2_kernel_fwhm_ratio() {
    let arm = test_arm();
    let ratio = analysis::fwhm_ratio_fig3(&arm, &arm, LAMBDA).unwrap();

    // oracle: half-maximum abscissae of sinc^2(v) and sinc(v), by bisection
    let v_pair = bisect(0.3, 0.6, |v| sinc(v) * sinc(v) - 0.5);
    let v_single = bisect(0.4, 0.8, |v| sinc(v) - 0.5);
    let expected_ratio = v_pair / v_single;
    let ok_band = (ratio - 0.734).abs() < 0.005;
    let ok_oracle = (ratio - expected_ratio).abs() < 1e-3;

    // doubled reference aperture: FWHM = 2 v_c * lambda d1 / L_t with
    // sinc(v_c) sinc(2 v_c) = 1/2
    let doubled = ArmGeometry::two_f(0.4, 6e-3).unwrap();
    let scale = LAMBDA * arm.d_object() / arm.aperture();
    let grid = make_grid(4.0 * scale, 8192).unwrap();
    let curve = analysis::kernel_hg(&arm, &doubled, LAMBDA, &grid);
    assert_eq!(curve.kind, KernelKind::TwoArmKernel);
    let fwhm_c = curve.fwhm().unwrap();
    let v_c = bisect(0.1, 0.4, |v| sinc(v) * sinc(2.0 * v) - 0.5);
    let expected_c = 2.0 * v_c * scale;
    let ok_c = (fwhm_c / expected_c - 1.0).abs() < 0.02 && fwhm_c < 2.0 * v_pair * scale;

    let ok = ok_band && ok_oracle && ok_c;
    report(
        2,
        "kernel fwhm ratio",
        ok,
        &format!(
            "ratio {ratio:.4} (oracle {expected_ratio:.4}, band 0.734 +- 0.005); \
             doubled-aperture fwhm {:.3} um vs oracle {:.3} um (2 x {v_c:.4} scale)",
            fwhm_c * 1e6,
            expected_c * 1e6
        ),
    );
}

#[test]
fn criterion_3_apsf_oracle_equivalence() {
    let arm = test_arm();
    // main lobe: first zero at lambda d2 / L = 141.9 um around the conjugate point
    let first_zero = LAMBDA * arm.d_image() / arm.aperture();
    let image_grid = make_grid(1.9 * first_zero, 801).unwrap();
    let numeric_raw = apsf_numeric(&arm, 0.0, &image_grid, LAMBDA, 8001).unwrap();
    let numeric = analysis::normalize_profile(&numeric_raw).unwrap();

    let mut max_err: f64 = 0.0;
    for (i, x) in image_grid.coords().enumerate() {
        let closed = apsf_closed_form(&arm, 0.0, x, LAMBDA).abs();
        if closed > 0.05 {
            max_err = max_err.max((numeric[i] - closed).abs() / closed);
        }
    }
    let ok = max_err < 0.01;
    report(
        3,
        "apsf quadrature vs closed form",
        ok,
        &format!("max relative error over the main lobe: {:.3}%", max_err * 100.0),
    );
}

#[test]
fn criterion_4_monte_carlo_convergence() {
    let mut errors = Vec::new();
    for frames in [100u64, 1000] {
        let config = bench_config(ArmGeometry::two_f(0.4, 3e-3).unwrap(), frames);
        let image = run_ensemble(&config, false).unwrap().ghost_image().unwrap();
        let (xs, gys, _) = central_window(&image, &config);
        let oracle = analytic_ghost_image_at(&config.object, &config, &xs).unwrap();
        errors.push(normalized_rms(&gys, &oracle));
    }
    let (config, image) = fig4b_run();
    let (xs, gys, _) = central_window(image, config);
    let oracle = analytic_ghost_image_at(&config.object, config, &xs).unwrap();
    errors.push(normalized_rms(&gys, &oracle));

    let ok = errors[2] < 0.05 && errors[0] > errors[1] && errors[1] > errors[2];
    report(
        4,
        "monte carlo convergence",
        ok,
        &format!(
            "normalized rms vs quadrature oracle at N = 10^2/10^3/10^4: \
             {:.4} / {:.4} / {:.4} (final bound 0.05, decreasing)",
            errors[0], errors[1], errors[2]
        ),
    );
}

#[test]
fn criterion_5_resolution_ordering() {
    let variants = [
        ("ghost_lr6_f400", ArmGeometry::two_f(0.4, 6e-3).unwrap()),
        ("ghost_lr3_f250", ArmGeometry::two_f(0.25, 3e-3).unwrap()),
    ];

    // equal-aperture run shared with criterion 4
    let (config_b, image_b) = fig4b_run();
    let (xs, ghost_b, direct) = central_window(image_b, config_b);

    let mc_direct = analysis::dip_depth(&xs, &direct).unwrap();
    let mc_b = analysis::dip_depth(&xs, &ghost_b).unwrap();
    let mut mc = vec![mc_direct, mc_b];
    let mut oracle = vec![
        analysis::dip_depth(&xs, &analytic_direct_image_at(&config_b.object, config_b, &xs).unwrap())
            .unwrap(),
        analysis::dip_depth(&xs, &analytic_ghost_image_at(&config_b.object, config_b, &xs).unwrap())
            .unwrap(),
    ];

    for (_, arm) in &variants {
        let config = bench_config(*arm, 10_000);
        let image = run_ensemble(&config, false).unwrap().ghost_image().unwrap();
        let (xs_v, ghost, _) = central_window(&image, &config);
        mc.push(analysis::dip_depth(&xs_v, &ghost).unwrap());
        oracle.push(
            analysis::dip_depth(&xs_v, &analytic_ghost_image_at(&config.object, &config, &xs_v).unwrap())
                .unwrap(),
        );
    }

    // [direct, ghost L_r=3 f=400, ghost L_r=6 f=400, ghost L_r=3 f=250]
    let ordered = |d: &[f64]| d[0] < d[1] && d[1] < d[2] && d[3] > d[1];
    let ok = ordered(&mc) && ordered(&oracle);
    report(
        5,
        "resolution ordering",
        ok,
        &format!(
            "dips [direct, lr3, lr6, f250] mc {:.3?} oracle {:.3?}; \
             require direct < lr3 < lr6 and f250 > lr3",
            mc, oracle
        ),
    );
}

#[test]
fn criterion_6_speckle_statistics() {
    let grid = make_grid(4e-3, 128).unwrap();
    let lc = 4.0 * grid.dx();
    let spec = SourceSpec {
        coherence_length: Some(lc),
        ..SourceSpec::default()
    };
    let n = 10_000u64;
    let realizations: Vec<_> = (0..n)
        .map(|k| generate_realization(&spec, &grid, LAMBDA, 61, k).unwrap())
        .collect();

    // per-sample contrast Var(I)/<I>^2, averaged across the grid; the
    // per-sample estimator itself has sigma ~ sqrt(8/N) ~ 0.028, so single
    // samples are only sanity-bounded while the mean carries the 5% check
    let step = 5;
    let mut contrasts = Vec::new();
    for i in (0..grid.len()).step_by(step) {
        let is: Vec<f64> = realizations.iter().map(|r| r.field.values()[i].norm_sqr()).collect();
        let m = is.iter().sum::<f64>() / is.len() as f64;
        let v = is.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / is.len() as f64;
        contrasts.push(v / (m * m));
    }
    let mean_contrast = contrasts.iter().sum::<f64>() / contrasts.len() as f64;
    let worst = contrasts
        .iter()
        .map(|c| (c - 1.0).abs())
        .fold(0.0, f64::max);
    let ok_contrast = (mean_contrast - 1.0).abs() < 0.05 && worst < 4.0 * (8.0f64 / n as f64).sqrt();

    // field correlation beyond 3 coherence lengths
    let mut far = 0.0f64;
    for lag_mult in [3.5, 4.0, 5.0, 8.0] {
        let g1 = ghostimg::speckle::empirical_g1(&realizations, lag_mult * lc, 0.0)
            .unwrap()
            .norm();
        far = far.max(g1);
    }
    let ok_g1 = far < 0.05;

    let ok = ok_contrast && ok_g1;
    report(
        6,
        "speckle statistics",
        ok,
        &format!(
            "mean contrast {mean_contrast:.4} (band 1 +- 0.05, worst sample dev {worst:.3}); \
             max |g1| beyond 3 lc: {far:.4} (bound 0.05 I0)"
        ),
    );
}

#[test]
fn criterion_7_thread_count_determinism() {
    let exe = env!("CARGO_BIN_EXE_ghostimg");
    let config = repo_path("configs/fig4b.toml");
    let base = tempfile::tempdir().unwrap();

    let mut outputs = Vec::new();
    for (sub, threads) in [("t1", "1"), ("t8", "8")] {
        let out = base.path().join(sub);
        let status = std::process::Command::new(exe)
            .args(["run", "--config"])
            .arg(&config)
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "run with --threads {threads} failed");

        let mut files: Vec<PathBuf> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        outputs.push(
            files
                .into_iter()
                .map(|p| {
                    let name = p.file_name().unwrap().to_string_lossy().into_owned();
                    let bytes = std::fs::read(&p).unwrap();
                    (name, bytes)
                })
                .collect::<Vec<_>>(),
        );
    }

    let mut mismatches = Vec::new();
    assert_eq!(outputs[0].len(), outputs[1].len(), "different file sets");
    for ((name_a, bytes_a), (name_b, bytes_b)) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(name_a, name_b, "different file sets");
        if name_a == "manifest.toml" {
            // wall-clock is the single nondeterministic line, by contract
            let strip = |b: &[u8]| {
                String::from_utf8_lossy(b)
                    .lines()
                    .filter(|l| !l.starts_with("wall_clock_seconds"))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            if strip(bytes_a) != strip(bytes_b) {
                mismatches.push(name_a.clone());
            }
        } else if bytes_a != bytes_b {
            mismatches.push(name_a.clone());
        }
    }
    let ok = mismatches.is_empty();
    report(
        7,
        "thread-count determinism",
        ok,
        &format!(
            "{} files from --threads 1 vs --threads 8; mismatches: {:?}",
            outputs[0].len(),
            mismatches
        ),
    );
}

#[test]
fn criterion_8_letter_mask_2d() {
    let object = mask_from_image(&repo_path("assets/siom.pgm"), 15e-6, 0.5).unwrap();
    let grid = Grid2 {
        gx: make_grid(8e-3, 320).unwrap(),
        gy: make_grid(6.4e-3, 256).unwrap(),
    };
    let cfg = System2Config {
        wavelength: LAMBDA,
        d_source_to_object: 0.8,
        test_arm: ArmGeometry::two_f(0.4, 3e-3).unwrap(),
        reference_arm: ArmGeometry::two_f(0.4, 6e-3).unwrap(),
        source: SourceSpec::default(),
        object: object.clone(),
        grid: grid.clone(),
        ensemble_size: 1024,
        seed: 424_242,
    };
    let out = run_ensemble_2d(&cfg).unwrap();

    // rows whose mask cut contains at least two strokes
    let mask = object.sample(&grid.gx, &grid.gy);
    let nx = grid.gx.len();
    let letter_rows: Vec<usize> = (0..grid.gy.len())
        .filter(|&iy| {
            let row = &mask[iy * nx..(iy + 1) * nx];
            row.windows(2).filter(|w| w[0] <= 0.5 && w[1] > 0.5).count() >= 2
        })
        .collect();
    assert!(letter_rows.len() >= 10, "mask asset looks wrong: {} rows", letter_rows.len());

    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let mut ghost_dips = Vec::new();
    let mut direct_dips = Vec::new();
    for &iy in &letter_rows {
        // images are inverted; |M| = 1 maps mask row iy to image row n-1-iy
        let giy = grid.gy.len() - 1 - iy;
        if let Ok(d) = analysis::multi_peak_dip(out.ghost_row(giy)) {
            ghost_dips.push(d);
        }
        if let Ok(d) = analysis::multi_peak_dip(out.direct_row(giy)) {
            direct_dips.push(d);
        }
    }
    let g = median(ghost_dips);
    let d = median(direct_dips);
    let ok = g > d;
    report(
        8,
        "2-d letter mask",
        ok,
        &format!(
            "per-row dip medians over {} letter rows: ghost (L_r = 6 mm) {g:.3} vs direct \
             (L_t = 3 mm) {d:.3}",
            letter_rows.len()
        ),
    );
}
