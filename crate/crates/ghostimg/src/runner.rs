//! Configuration-driven experiment runner.
//!
//! A run is described by a TOML file with explicit unit suffixes on every
//! length. The runner executes one of six modes and writes all artifacts
//! into the output directory:
//!
//! - `direct` / `ghost` / `both`: Monte-Carlo ensemble, object-plane
//!   profiles as CSV (`x_meters,value`). With a 2-D `mask` object, `both`
//!   produces 16-bit PGM images instead of profiles.
//! - `apsf`: closed-form and quadrature point-spread curves.
//! - `fig3`: the three kernel curves (single-arm APSF, equal apertures,
//!   doubled reference aperture) and an FWHM table.
//! - `sweep`: the direct image plus one ghost profile per reference-arm
//!   variant, with a dip-depth ordering report.
//!
//! Every run ends with `manifest.toml`: the effective configuration, frame
//! count, image scaling, and a SHA-256 digest of every other file in the
//! output directory. All output bytes are a pure function of
//! (configuration, seed); the wall-clock entry in the manifest is the only
//! exception and sits on its own line so tooling can strip it.

use crate::analysis;
use crate::correlate::{self, Profile};
use crate::error::{Error, Result};
use crate::geometry::ArmGeometry;
use crate::grid::Grid;
use crate::math::rayleigh_limit;
use crate::objects::{self, Transmission2d};
use crate::optics::{apsf_closed_form, apsf_numeric, fresnel};
use crate::pgm;
use crate::speckle::{IntensityProfile, SourceSpec};
use crate::system::SystemConfig;
use crate::twodim::{self, Grid2, System2Config};
use crate::units::Length;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Direct,
    Ghost,
    Both,
    Apsf,
    Fig3,
    Sweep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub span: Length,
    pub samples: usize,
    /// Vertical axis for 2-D mask runs; defaults to the x axis settings.
    pub span_y: Option<Length>,
    pub samples_y: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    pub d_object: Length,
    pub d_image: Length,
    pub focal_length: Length,
    pub aperture: Length,
}

impl ArmSection {
    fn build(&self) -> Result<ArmGeometry> {
        ArmGeometry::new(
            self.d_object.meters(),
            self.d_image.meters(),
            self.focal_length.meters(),
            self.aperture.meters(),
        )
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub extent: Option<Length>,
    pub coherence_length: Option<Length>,
    /// `1/e^2` half-width of a Gaussian mean-intensity profile; uniform
    /// when absent.
    pub gaussian_width: Option<Length>,
    pub mean_intensity: Option<f64>,
}

impl SourceSection {
    fn build(&self) -> SourceSpec {
        SourceSpec {
            extent: self.extent.map(Length::meters),
            coherence_length: self.coherence_length.map(Length::meters),
            intensity_profile: match self.gaussian_width {
                Some(w) => IntensityProfile::Gaussian { width: w.meters() },
                None => IntensityProfile::Uniform,
            },
            mean_intensity: self.mean_intensity.unwrap_or(1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectSection {
    DoubleSlit { slit_width: Length, separation: Length },
    Pinhole { position: Length },
    Mask { path: String, pixel_pitch: Length, threshold: Option<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepVariant {
    pub label: String,
    pub focal_length: Length,
    pub aperture: Length,
    /// Conjugate distances; default to the symmetric 2f-2f arm.
    pub d_object: Option<Length>,
    pub d_image: Option<Length>,
}

impl SweepVariant {
    fn build(&self) -> Result<ArmGeometry> {
        let f = self.focal_length.meters();
        ArmGeometry::new(
            self.d_object.map(Length::meters).unwrap_or(2.0 * f),
            self.d_image.map(Length::meters).unwrap_or(2.0 * f),
            f,
            self.aperture.meters(),
        )
    }
}

fn default_frames() -> u64 {
    1000
}

fn default_out() -> String {
    "out".into()
}

/// The on-disk run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub wavelength: Length,
    pub d_source_to_object: Length,
    #[serde(default = "default_frames")]
    pub ensemble_size: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub emit_matrix: bool,
    #[serde(default = "default_out")]
    pub output_dir: String,
    pub grid: GridSection,
    #[serde(default)]
    pub source: SourceSection,
    pub test_arm: ArmSection,
    pub reference_arm: ArmSection,
    pub object: Option<ObjectSection>,
    pub sweep: Option<Vec<SweepVariant>>,
}

/// Command-line knobs that override file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub frames: Option<u64>,
    pub out: Option<PathBuf>,
    /// Dotted-path `key=value` assignments applied to the raw document.
    pub set: Vec<String>,
}

/// Parse a config file, apply `--set` overrides to the raw document, and
/// deserialize. Returns the config together with the effective document
/// (echoed into the manifest).
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<(RunConfig, toml::Value)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let mut doc: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(path.display().to_string(), e.to_string()))?;

    for assignment in &overrides.set {
        apply_set(&mut doc, assignment).map_err(|e| Error::config(path.display().to_string(), e))?;
    }

    let mut config: RunConfig = doc
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(path.display().to_string(), e.to_string()))?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(frames) = overrides.frames {
        config.ensemble_size = frames;
    }
    if let Some(out) = &overrides.out {
        config.output_dir = out.to_string_lossy().into_owned();
    }
    // re-echo the effective values into the document
    let effective = toml::Value::try_from(&config)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    Ok((config, effective))
}

/// Apply one `a.b.c=value` assignment; the value is parsed as a TOML
/// literal, falling back to a plain string.
fn apply_set(doc: &mut toml::Value, assignment: &str) -> std::result::Result<(), String> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| format!("--set `{assignment}` is not of the form key=value"))?;
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Value>() {
        Ok(toml::Value::Table(t)) => t["v"].clone(),
        _ => toml::Value::String(value.trim().to_string()),
    };
    let mut node = doc;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| format!("--set `{key}`: `{part}` is not a table"))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    unreachable!()
}

struct BuiltSystem {
    grid: Grid,
    system: SystemConfig,
}

fn build_1d(config: &RunConfig, config_dir: &Path) -> Result<BuiltSystem> {
    let grid = Grid::from_span(config.grid.span.meters(), config.grid.samples)?;
    let object = match &config.object {
        Some(ObjectSection::DoubleSlit { slit_width, separation }) => {
            objects::double_slit(slit_width.meters(), separation.meters(), &grid)?
        }
        Some(ObjectSection::Pinhole { position }) => objects::pinhole(position.meters(), &grid)?,
        Some(ObjectSection::Mask { .. }) => {
            return Err(Error::invalid(
                "mask objects run through the 2-D pipeline; this mode needs a 1-D object",
            ))
        }
        None => {
            return Err(Error::invalid(format!(
                "mode {:?} needs an [object] section",
                config.mode
            )))
        }
    };
    let system = SystemConfig {
        wavelength: config.wavelength.meters(),
        d_source_to_object: config.d_source_to_object.meters(),
        test_arm: config.test_arm.build()?,
        reference_arm: config.reference_arm.build()?,
        source: config.source.build(),
        object,
        grid: grid.clone(),
        ensemble_size: config.ensemble_size,
        seed: config.seed,
    };
    let _ = config_dir;
    Ok(BuiltSystem { grid, system })
}

fn build_2d(config: &RunConfig, config_dir: &Path) -> Result<(System2Config, Transmission2d)> {
    let Some(ObjectSection::Mask { path, pixel_pitch, threshold }) = &config.object else {
        return Err(Error::invalid("2-D runs need an [object] of kind = \"mask\""));
    };
    let mask_path = config_dir.join(path);
    let object = objects::mask_from_image(&mask_path, pixel_pitch.meters(), threshold.unwrap_or(0.0))?;
    let gx = Grid::from_span(config.grid.span.meters(), config.grid.samples)?;
    let gy = Grid::from_span(
        config.grid.span_y.unwrap_or(config.grid.span).meters(),
        config.grid.samples_y.unwrap_or(config.grid.samples),
    )?;
    Ok((
        System2Config {
            wavelength: config.wavelength.meters(),
            d_source_to_object: config.d_source_to_object.meters(),
            test_arm: config.test_arm.build()?,
            reference_arm: config.reference_arm.build()?,
            source: config.source.build(),
            object: object.clone(),
            grid: Grid2 { gx, gy },
            ensemble_size: config.ensemble_size,
            seed: config.seed,
        },
        object,
    ))
}

/// Schema plus physics validation without running; one line per problem.
pub fn validate(config_path: &Path, overrides: &Overrides) -> Result<Vec<String>> {
    let (config, _) = load_config(config_path, overrides)?;
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let mut diags = Vec::new();

    for (name, arm) in [("test_arm", &config.test_arm), ("reference_arm", &config.reference_arm)] {
        if let Err(e) = arm.build() {
            diags.push(format!("{name}: {e}"));
        }
    }
    if config.mode == Mode::Sweep {
        match &config.sweep {
            None => diags.push("sweep: mode = \"sweep\" needs a nonempty [[sweep]] list".into()),
            Some(v) if v.is_empty() => diags.push("sweep: the [[sweep]] list is empty".into()),
            Some(variants) => {
                for v in variants {
                    if let Err(e) = v.build() {
                        diags.push(format!("sweep `{}`: {e}", v.label));
                    }
                }
            }
        }
    }
    if !diags.is_empty() {
        return Ok(diags); // arm geometry is a prerequisite for the rest
    }

    if matches!(config.object, Some(ObjectSection::Mask { .. })) {
        match build_2d(&config, config_dir) {
            Err(e) => diags.push(e.to_string()),
            Ok((cfg2, _)) => {
                let d_min_x = fresnel::min_valid_distance(&cfg2.grid.gx, cfg2.wavelength);
                let d_min_y = fresnel::min_valid_distance(&cfg2.grid.gy, cfg2.wavelength);
                let d_min = d_min_x.max(d_min_y);
                for (name, d) in [
                    ("d_source_to_object", cfg2.d_source_to_object),
                    ("test_arm distances", cfg2.test_arm.d_object().min(cfg2.test_arm.d_image())),
                    (
                        "reference_arm distances",
                        cfg2.reference_arm.d_object().min(cfg2.reference_arm.d_image()),
                    ),
                ] {
                    if d < d_min {
                        diags.push(format!(
                            "{name}: {d} m is below the sampling bound {d_min:.4} m"
                        ));
                    }
                }
                for (name, arm) in
                    [("test_arm", &cfg2.test_arm), ("reference_arm", &cfg2.reference_arm)]
                {
                    if arm.aperture() > cfg2.grid.gx.span() || arm.aperture() > cfg2.grid.gy.span() {
                        diags.push(format!("{name}.aperture: exceeds a grid axis span"));
                    }
                }
            }
        }
    } else if matches!(config.mode, Mode::Direct | Mode::Ghost | Mode::Both | Mode::Sweep) {
        match build_1d(&config, config_dir) {
            Err(e) => diags.push(e.to_string()),
            Ok(built) => diags.extend(built.system.diagnostics()),
        }
    }
    Ok(diags)
}

#[derive(Debug, Serialize)]
struct ManifestRun {
    mode: Mode,
    seed: u64,
    frames: u64,
    wall_clock_seconds: f64,
}

#[derive(Debug, Serialize)]
struct ImageScale {
    lo: f64,
    hi: f64,
}

/// Run summary written as `manifest.toml`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    run: ManifestRun,
    config: toml::Value,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    images: BTreeMap<String, ImageScale>,
    /// `file name -> sha256:<hex>` for every other file in the output dir.
    files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn file_count(&self) -> usize {
        self.files.len()
    }
}

fn write_csv(dir: &Path, name: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(32 * xs.len());
    out.push_str("x_meters,value\n");
    for (x, y) in xs.iter().zip(ys) {
        writeln!(out, "{x:.12e},{y:.12e}").expect("string write");
    }
    std::fs::write(dir.join(name), out)?;
    Ok(())
}

fn profile_report(label: &str, profile: &Profile, rayleigh: f64) -> String {
    let normalized = analysis::normalize_profile(&profile.ys);
    let mut s = format!("[{label}]\n");
    match normalized {
        Ok(ys) => {
            match analysis::fwhm(&profile.xs, &ys) {
                Ok(w) => writeln!(s, "fwhm_meters = {w:.6e}").unwrap(),
                Err(_) => s.push_str("fwhm_meters = n/a\n"),
            }
            match analysis::dip_depth(&profile.xs, &ys) {
                Ok(d) => {
                    writeln!(s, "dip_depth = {d:.4}").unwrap();
                    writeln!(s, "resolvable = {}", d > analysis::RESOLVABLE_DIP).unwrap();
                }
                Err(_) => s.push_str("dip_depth = n/a\n"),
            }
        }
        Err(e) => writeln!(s, "error = {e}").unwrap(),
    }
    writeln!(s, "rayleigh_limit_meters = {rayleigh:.6e}").unwrap();
    s
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("sha256:{:x}", hasher.finalize()))
}

/// Execute the run described by `config_path` and write all artifacts.
pub fn run(config_path: &Path, overrides: &Overrides) -> Result<RunManifest> {
    let started = std::time::Instant::now();
    let (config, mut effective) = load_config(config_path, overrides)?;
    // the manifest lives inside the output directory; echoing the
    // directory's own path would make otherwise-identical runs differ
    if let Some(table) = effective.as_table_mut() {
        table.remove("output_dir");
    }
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let out_dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out_dir)?;

    let mut images = BTreeMap::new();
    match (&config.mode, &config.object) {
        (Mode::Both, Some(ObjectSection::Mask { .. })) => {
            let (cfg2, _) = build_2d(&config, config_dir)?;
            let out = twodim::run_ensemble_2d(&cfg2)?;
            let (nx, ny) = (cfg2.grid.gx.len(), cfg2.grid.gy.len());
            let (lo, hi) = pgm::write_pgm16_scaled(&out_dir.join("ghost.pgm"), nx, ny, &out.ghost)?;
            images.insert("ghost".into(), ImageScale { lo, hi });
            let (lo, hi) =
                pgm::write_pgm16_scaled(&out_dir.join("direct.pgm"), nx, ny, &out.direct)?;
            images.insert("direct".into(), ImageScale { lo, hi });
            let report = format!(
                "[ghost_2d]\nframes = {}\nrows = {ny}\ncols = {nx}\n",
                out.frames_used
            );
            std::fs::write(out_dir.join("report.txt"), report)?;
        }
        (Mode::Direct | Mode::Ghost | Mode::Both, _) => {
            let built = build_1d(&config, config_dir)?;
            let acc = correlate::run_ensemble(&built.system, config.emit_matrix)?;
            let image = acc.ghost_image()?;
            let m = built.system.test_arm.magnification();
            let rayleigh = rayleigh_limit(
                built.system.wavelength,
                built.system.test_arm.d_object(),
                built.system.test_arm.aperture(),
            )?;
            let mut report = String::new();
            if matches!(config.mode, Mode::Direct | Mode::Both) {
                let direct = image.direct_object_plane(m);
                write_csv(&out_dir, "direct.csv", &direct.xs, &direct.ys)?;
                report.push_str(&profile_report("direct", &direct, rayleigh));
            }
            if matches!(config.mode, Mode::Ghost | Mode::Both) {
                let ghost = image.object_plane(m);
                write_csv(&out_dir, "ghost.csv", &ghost.xs, &ghost.ys)?;
                report.push_str(&profile_report("ghost", &ghost, rayleigh));
            }
            if config.emit_matrix {
                let matrix = acc.correlation_matrix()?;
                let n = built.grid.len();
                let (lo, hi) =
                    pgm::write_pgm16_scaled(&out_dir.join("matrix.pgm"), n, n, &matrix)?;
                images.insert("matrix".into(), ImageScale { lo, hi });
            }
            std::fs::write(out_dir.join("report.txt"), report)?;
        }
        (Mode::Apsf, _) => {
            let arm = config.test_arm.build()?;
            let lam = config.wavelength.meters();
            let image_grid = Grid::from_span(config.grid.span.meters(), config.grid.samples | 1)?;
            let xs = image_grid.coords_vec();
            let closed: Vec<f64> =
                xs.iter().map(|&x| apsf_closed_form(&arm, 0.0, x, lam).abs()).collect();
            let cycles = arm.aperture() * xs.last().unwrap().abs()
                / (arm.d_image() * lam);
            let q = ((14.0 * cycles).ceil() as usize).max(4001) | 1;
            let numeric_raw = apsf_numeric(&arm, 0.0, &image_grid, lam, q)?;
            let numeric = analysis::normalize_profile(&numeric_raw)?;
            write_csv(&out_dir, "apsf_closed.csv", &xs, &closed)?;
            write_csv(&out_dir, "apsf_numeric.csv", &xs, &numeric)?;
            let report = format!(
                "[apsf]\nfwhm_closed_meters = {:.6e}\nfwhm_numeric_meters = {:.6e}\n",
                analysis::fwhm(&xs, &closed)?,
                analysis::fwhm(&xs, &numeric)?,
            );
            std::fs::write(out_dir.join("report.txt"), report)?;
        }
        (Mode::Fig3, _) => {
            let test_arm = config.test_arm.build()?;
            let ref_arm = config.reference_arm.build()?;
            let lam = config.wavelength.meters();
            let doubled = ArmGeometry::new(
                ref_arm.d_object(),
                ref_arm.d_image(),
                ref_arm.focal_length(),
                2.0 * test_arm.aperture(),
            )?;
            let first_zero = lam * test_arm.d_object() / test_arm.aperture();
            let grid = Grid::from_span(4.0 * first_zero, 8192)?;
            let a = analysis::single_arm_apsf(&test_arm, lam, &grid);
            let b = analysis::kernel_hg(&test_arm, &ref_arm, lam, &grid);
            let c = analysis::kernel_hg(&test_arm, &doubled, lam, &grid);
            let mut table = String::from("curve,fwhm_meters\n");
            for (name, curve) in [("a_single_arm", &a), ("b_equal_apertures", &b), ("c_doubled_reference", &c)] {
                write_csv(&out_dir, &format!("kernel_{}.csv", &name[..1]), &curve.offsets, &curve.values)?;
                writeln!(table, "{name},{:.6e}", curve.fwhm()?).unwrap();
            }
            writeln!(
                table,
                "ratio_b_over_a,{:.6}",
                analysis::fwhm_ratio_fig3(&test_arm, &ref_arm, lam)?
            )
            .unwrap();
            std::fs::write(out_dir.join("fwhm_table.txt"), table)?;
        }
        (Mode::Sweep, _) => {
            let variants = config
                .sweep
                .as_ref()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| Error::invalid("mode = \"sweep\" needs a nonempty [[sweep]] list"))?;
            let built = build_1d(&config, config_dir)?;
            let m = built.system.test_arm.magnification();
            let rayleigh = rayleigh_limit(
                built.system.wavelength,
                built.system.test_arm.d_object(),
                built.system.test_arm.aperture(),
            )?;
            let mut report = String::new();
            let mut dips: Vec<(String, f64)> = Vec::new();

            let score = |profile: &Profile| -> Option<f64> {
                let ys = analysis::normalize_profile(&profile.ys).ok()?;
                analysis::dip_depth(&profile.xs, &ys).ok()
            };

            let base = correlate::run_ensemble(&built.system, false)?.ghost_image()?;
            let direct = base.direct_object_plane(m);
            write_csv(&out_dir, "direct.csv", &direct.xs, &direct.ys)?;
            report.push_str(&profile_report("direct", &direct, rayleigh));
            if let Some(d) = score(&direct) {
                dips.push(("direct".into(), d));
            }

            for variant in variants {
                let mut system = built.system.clone();
                system.reference_arm = variant.build()?;
                system.validate()?;
                let ghost = correlate::run_ensemble(&system, false)?
                    .ghost_image()?
                    .object_plane(m);
                write_csv(&out_dir, &format!("ghost_{}.csv", variant.label), &ghost.xs, &ghost.ys)?;
                report.push_str(&profile_report(&format!("ghost_{}", variant.label), &ghost, rayleigh));
                if let Some(d) = score(&ghost) {
                    dips.push((format!("ghost_{}", variant.label), d));
                }
            }

            dips.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            report.push_str("[ordering]\n# dip depth, worst resolved first\n");
            for (label, dip) in &dips {
                writeln!(report, "{label} = {dip:.4}").unwrap();
            }
            std::fs::write(out_dir.join("ordering.txt"), report)?;
        }
    }

    // manifest: digest everything currently in the output directory
    let mut files = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&out_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != "manifest.toml"))
        .collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, sha256_file(&path)?);
    }

    let manifest = RunManifest {
        run: ManifestRun {
            mode: config.mode,
            seed: config.seed,
            frames: config.ensemble_size,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
        config: effective,
        images,
        files,
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::invalid(format!("manifest serialization: {e}")))?;
    std::fs::write(out_dir.join("manifest.toml"), text)?;
    Ok(manifest)
}
