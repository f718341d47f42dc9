//! Batch command-line front end.
//!
//! Every subcommand reads its settings from flags and, optionally, from the
//! `[<subcommand>]` table of a TOML file given with `--config`. Flags win over
//! file values. Each written file gets a `<file>.manifest.json` sidecar that
//! records how it was produced.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    coincidence_probability_analytic, coincidence_probability_mc, depth_correction, find_identical_pairs, WindowConvention,
};
use crate::ensemble::{build_histogram, sample_emitters, synthesize_ple_scan, EnsembleConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fitting::{default_threshold, extract_resonances, fit_peaks_with_limit, InitialGuess, LmOptions, Peak, PeakFit, PeakModel};
use crate::io::{self, FitReport, Output, OutputFormat, WidthUnit};
use crate::levels::{pl_spectrum, transition_frequencies, LevelStructure, LineKind, PlOptions, Transition};
use crate::spectrum::{uniform_grid, HistogramData, Spectrum};
use crate::units::{AtomicMass, ForceConstantUnit, BOHR, HARTREE};
use crate::vibmodel::{
    check_reported_mode_energies, isotope_shift, unit_mass_shift_curve, vibration_energy, zero_point_sum, ElectronicState,
    IsotopeTable, Mode, VibrationalModel,
};

/// Environment variable consulted when no seed is given by flag or config.
pub const SEED_ENV: &str = "GROUPIV_SPECTRA_SEED";
pub const BUILTIN_MODEL: &str = "builtin:snv-table1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "groupiv-spectra", version, about = "Spectroscopy toolkit for group-IV color centers in diamond")]
struct Cli {
    /// TOML file; keys are read from the table named after the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run data-parallel stages on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate an emitter ensemble, its PLE scan and the resonance histogram.
    Simulate(SimulateArgs),
    /// Fit Lorentzian (or Gaussian) lines to a PLE scan.
    FitPle(FitPleArgs),
    /// Fit Gaussian groups to a resonance histogram.
    FitHist(FitHistArgs),
    /// List the resonances of a PLE scan.
    Extract(ExtractArgs),
    /// Isotope shift of the zero-phonon line between two isotopes.
    IsotopeShift(IsotopeShiftArgs),
    /// Local vibration mode energies of a force-constant model.
    Vibfreq(VibfreqArgs),
    /// Shift per unit mass change across elements, from one calibration point.
    ShiftCurve(ShiftCurveArgs),
    /// Probability that two emitters fall within a spectral window.
    OverlapProb(OverlapProbArgs),
    /// Pairs of resonances with nearly identical frequencies.
    Pairs(PairsArgs),
    /// Refractive-index correction of a confocal depth measurement.
    Depth(DepthArgs),
    /// Four-line zero-phonon PL spectrum at a given temperature.
    PlSpectrum(PlSpectrumArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate(_) => "simulate",
            Self::FitPle(_) => "fit-ple",
            Self::FitHist(_) => "fit-hist",
            Self::Extract(_) => "extract",
            Self::IsotopeShift(_) => "isotope-shift",
            Self::Vibfreq(_) => "vibfreq",
            Self::ShiftCurve(_) => "shift-curve",
            Self::OverlapProb(_) => "overlap-prob",
            Self::Pairs(_) => "pairs",
            Self::Depth(_) => "depth",
            Self::PlSpectrum(_) => "pl-spectrum",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    emitters: Option<usize>,
    /// CSV with mass_number,atomic_mass_u,abundance (default: tin).
    #[arg(long)]
    isotope_table: Option<PathBuf>,
    /// Mass numbers kept from the table.
    #[arg(long, value_delimiter = ',')]
    isotopes: Option<Vec<u32>>,
    /// Mass number of the implanted species.
    #[arg(long)]
    selected: Option<u32>,
    /// Fraction of emitters forced to the selected species.
    #[arg(long)]
    selectivity: Option<f64>,
    /// Group centres as MASS=GHz pairs.
    #[arg(long, value_delimiter = ',')]
    group_offsets: Option<Vec<String>>,
    /// Inhomogeneous FWHM per group as MASS=GHz pairs.
    #[arg(long, value_delimiter = ',')]
    inhom_fwhm: Option<Vec<String>>,
    /// Homogeneous linewidth in MHz.
    #[arg(long)]
    homogeneous_fwhm: Option<f64>,
    /// Peak counts per sample of one emitter on resonance.
    #[arg(long)]
    brightness: Option<f64>,
    #[arg(long)]
    reference_thz: Option<f64>,
    /// Scan window centre in GHz.
    #[arg(long, allow_negative_numbers = true)]
    scan_center: Option<f64>,
    /// Full scan width in GHz.
    #[arg(long)]
    scan_range: Option<f64>,
    /// Scan step in MHz.
    #[arg(long)]
    scan_step: Option<f64>,
    /// Mean background counts per sample.
    #[arg(long)]
    background: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    shot_noise: Option<bool>,
    /// Histogram bin width in GHz.
    #[arg(long)]
    bin_width: Option<f64>,
    /// Box size in µm for random emitter positions, as X,Y,Z.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    position_box: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FitPleArgs {
    /// Scan CSV (frequency_offset_ghz,counts).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fit report (.json).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Data and fitted curve (.svg).
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    peaks: Option<usize>,
    #[arg(long, value_enum)]
    model: Option<LineKind>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    baseline: Option<bool>,
    /// Detection threshold above baseline for auto-initialization.
    #[arg(long)]
    threshold: Option<f64>,
    /// Explicit initial centres in GHz instead of auto-detection.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    init_centers: Option<Vec<f64>>,
    /// Initial FWHM in MHz used with --init-centers.
    #[arg(long)]
    init_fwhm: Option<f64>,    /// Solver iteration cap.
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FitHistArgs {
    /// Histogram CSV (bin_start_ghz,bin_end_ghz,count).
    #[arg(long, conflicts_with = "resonances")]
    input: Option<PathBuf>,
    /// Resonance list CSV, binned with --bin-width.
    #[arg(long)]
    resonances: Option<PathBuf>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    peaks: Option<usize>,
    #[arg(long, value_enum)]
    model: Option<LineKind>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    baseline: Option<bool>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Explicit initial centres in GHz.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    init_centers: Option<Vec<f64>>,
    /// Initial FWHM in GHz used with --init-centers.
    #[arg(long)]
    init_fwhm: Option<f64>,    /// Solver iteration cap.
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ExtractArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Resonance list (.csv or .json).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Fit exactly this many lines globally.
    #[arg(long)]
    peaks: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct IsotopeShiftArgs {
    /// `builtin:snv-table1` or a CSV with mode,state,k_hartree_per_bohr2.
    #[arg(long)]
    model: Option<String>,
    /// Mass number of the isotope the model's force constants belong to.
    #[arg(long)]
    reference_mass: Option<u32>,
    #[arg(long)]
    isotope_table: Option<PathBuf>,
    #[arg(long)]
    from: Option<u32>,
    #[arg(long)]
    to: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct VibfreqArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    reference_mass: Option<u32>,
    #[arg(long)]
    isotope_table: Option<PathBuf>,
    /// Mass number at which the modes are evaluated.
    #[arg(long)]
    mass: Option<u32>,
    /// Mode table (.json).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ShiftCurveArgs {
    /// Mass numbers to evaluate.
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<u32>>,
    /// Calibration point as MASS=GHz.
    #[arg(long)]
    calibration: Option<String>,
    /// Curve table (.csv).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct OverlapProbArgs {
    /// Inhomogeneous FWHM in GHz.
    #[arg(long)]
    fwhm: Option<f64>,
    /// Coincidence window in MHz.
    #[arg(long)]
    window: Option<f64>,
    /// Treat the window as ±window/2 instead of ±window.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    half_window: Option<bool>,
    /// Monte Carlo trials; omitted means analytic only.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct PairsArgs {
    /// Resonance list CSV (center_ghz,fwhm_mhz,amplitude).
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON Lines report; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Largest detuning in MHz still counted as a pair.
    #[arg(long)]
    max_detuning: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct DepthArgs {
    #[arg(long)]
    na: Option<f64>,
    #[arg(long)]
    n_outside: Option<f64>,
    #[arg(long)]
    n_inside: Option<f64>,
    /// Observed depth in µm.
    #[arg(long)]
    observed: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct PlSpectrumArgs {
    #[arg(long)]
    zpl_thz: Option<f64>,
    /// Ground-state splitting in GHz.
    #[arg(long)]
    gs_splitting: Option<f64>,
    /// Excited-state splitting in GHz.
    #[arg(long)]
    es_splitting: Option<f64>,
    /// Excited-state lifetime in ns.
    #[arg(long)]
    lifetime: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Per-line FWHM in GHz.
    #[arg(long)]
    fwhm: Option<f64>,
    /// Grid step in GHz.
    #[arg(long)]
    step: Option<f64>,
    /// Fraction of emission ending on the lower ground level.
    #[arg(long)]
    branching: Option<f64>,
    /// Spectrum (.csv or .svg).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub config_file: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp_unix_s: u64,
}

/// Path of the manifest sidecar for `output`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

enum Outcome {
    Done,
    NotConverged,
}

struct Run {
    name: &'static str,
    config_file: Option<PathBuf>,
    exec: Execution,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
}

impl Run {
    fn input(&mut self, path: Option<&PathBuf>, flag: &str) -> Result<PathBuf> {
        let p = path.cloned().ok_or_else(|| Error::Config(format!("missing --{flag}")))?;
        self.inputs.push(p.clone());
        Ok(p)
    }

    fn write(&mut self, output: &Output<'_>, path: &Path) -> Result<()> {
        let fmt = OutputFormat::from_path(path)
            .ok_or_else(|| Error::Config(format!("{}: extension must be csv, json, jsonl or svg", path.display())))?;
        io::write_outputs(output, fmt, path)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn write_text(&mut self, path: &Path, text: &str) -> Result<()> {
        io::write_text(path, text)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn finish(&self, config: &impl Serialize) -> Result<()> {
        let manifest = RunManifest {
            subcommand: self.name.to_string(),
            config: serde_json::to_value(config)?,
            config_file: self.config_file.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        for out in &self.outputs {
            io::write_text(&manifest_path(out), &text)?;
        }
        Ok(())
    }
}

/// Runs the toolkit on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USER_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::NotConverged) => EXIT_NOT_CONVERGED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USER_ERROR
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => Some(read_config(path)?),
        None => None,
    };
    let name = cli.command.name();
    let section = file.as_ref().and_then(|t| t.get(name));
    let mut run = Run {
        name,
        config_file: cli.config.clone(),
        exec: if cli.sequential { Execution::Sequential } else { Execution::default() },
        inputs: Vec::new(),
        outputs: Vec::new(),
        seed: None,
    };
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Simulate(a) => simulate(&mut run, merge(&a, section)?),
        Command::FitPle(a) => fit_ple(&mut run, merge(&a, section)?, &mut out),
        Command::FitHist(a) => fit_hist(&mut run, merge(&a, section)?, &mut out),
        Command::Extract(a) => extract(&mut run, merge(&a, section)?, &mut out),
        Command::IsotopeShift(a) => shift(merge(&a, section)?, &mut out),
        Command::Vibfreq(a) => vibfreq(&mut run, merge(&a, section)?, &mut out),
        Command::ShiftCurve(a) => shift_curve(&mut run, merge(&a, section)?, &mut out),
        Command::OverlapProb(a) => overlap(&run, merge(&a, section)?, &mut out),
        Command::Pairs(a) => pairs(&mut run, merge(&a, section)?, &mut out),
        Command::Depth(a) => depth(merge(&a, section)?, &mut out),
        Command::PlSpectrum(a) => pl(&mut run, merge(&a, section)?, &mut out),
    }
}

fn read_config(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Overlays the flags that were given on the config-file table.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, section: Option<&toml::Value>) -> Result<T> {
    let mut merged = match section {
        Some(v @ toml::Value::Table(_)) => serde_json::to_value(v)?,
        Some(_) => return Err(Error::Config("subcommand entry in the config file must be a table".into())),
        None => Value::Object(Default::default()),
    };
    if let (Value::Object(base), Value::Object(given)) = (&mut merged, serde_json::to_value(flags)?) {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))
}

fn resolve_seed(slot: &mut Option<u64>) -> Result<u64> {
    if let Some(s) = *slot {
        return Ok(s);
    }
    let seed = match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
        Err(_) => 0,
    };
    *slot = Some(seed);
    Ok(seed)
}

fn parse_pairs(items: &[String], what: &str) -> Result<BTreeMap<u32, f64>> {
    items
        .iter()
        .map(|s| {
            let bad = || Error::Config(format!("{what}: expected MASS=VALUE, got {s:?}"));
            let (a, v) = s.split_once('=').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn simulate(run: &mut Run, mut a: SimulateArgs) -> Result<Outcome> {
    let mut cfg = EnsembleConfig::snv_default();
    let out_dir = a.out_dir.get_or_insert_with(|| PathBuf::from("simulate-out")).clone();
    if let Some(path) = &a.isotope_table {
        run.inputs.push(path.clone());
        cfg.isotope_table = IsotopeTable::from_csv(path, "table")?;
    } else {
        cfg.isotope_table = IsotopeTable::tin();
    }
    let kept = a.isotopes.get_or_insert_with(|| vec![118, 119, 120]).clone();
    cfg.isotope_table = cfg.isotope_table.restricted_to(&kept);
    cfg.emitter_count = *a.emitters.get_or_insert(cfg.emitter_count);
    cfg.selected_mass_number = *a.selected.get_or_insert(cfg.selected_mass_number);
    cfg.selectivity = *a.selectivity.get_or_insert(cfg.selectivity);
    if let Some(v) = &a.group_offsets {
        cfg.group_offsets_ghz = parse_pairs(v, "group-offsets")?;
    }
    if let Some(v) = &a.inhom_fwhm {
        cfg.group_inhom_fwhm_ghz = parse_pairs(v, "inhom-fwhm")?;
    }
    cfg.homogeneous_fwhm_mhz = *a.homogeneous_fwhm.get_or_insert(cfg.homogeneous_fwhm_mhz);
    cfg.brightness = *a.brightness.get_or_insert(cfg.brightness);
    cfg.reference_thz = *a.reference_thz.get_or_insert(cfg.reference_thz);
    cfg.scan.center_ghz = *a.scan_center.get_or_insert(cfg.scan.center_ghz);
    cfg.scan.range_ghz = *a.scan_range.get_or_insert(cfg.scan.range_ghz);
    cfg.scan.step_mhz = *a.scan_step.get_or_insert(cfg.scan.step_mhz);
    cfg.scan.background = *a.background.get_or_insert(cfg.scan.background);
    cfg.shot_noise = *a.shot_noise.get_or_insert(cfg.shot_noise);
    cfg.histogram_bin_ghz = *a.bin_width.get_or_insert(cfg.histogram_bin_ghz);
    cfg.position_box_um = match &a.position_box {
        Some(b) if b.len() == 3 => Some([b[0], b[1], b[2]]),
        Some(_) => return Err(Error::Config("position-box needs three values".into())),
        None => None,
    };
    cfg.rng_seed = resolve_seed(&mut a.seed)?;
    run.seed = Some(cfg.rng_seed);
    cfg.validate()?;

    let emitters = sample_emitters(&cfg)?;
    let centers: Vec<f64> = emitters.iter().map(|e| e.center_offset_ghz).collect();
    let half = 0.5 * cfg.scan.range_ghz;
    let histogram = build_histogram(&centers, cfg.histogram_bin_ghz, (cfg.scan.center_ghz - half, cfg.scan.center_ghz + half))?;
    let scan = synthesize_ple_scan(&emitters, cfg.reference_thz, &cfg.scan, cfg.shot_noise, cfg.rng_seed, run.exec)?;

    run.write(&Output::Emitters(&emitters), &out_dir.join("emitters.csv"))?;
    let hist_title = format!("Resonances of {} emitters", emitters.len());
    for ext in ["csv", "svg"] {
        run.write(
            &Output::Histogram {
                histogram: &histogram,
                overlay: None,
                title: &hist_title,
            },
            &out_dir.join(format!("histogram.{ext}")),
        )?;
        run.write(
            &Output::Spectrum {
                spectrum: &scan,
                overlay: None,
                title: "Simulated PLE scan",
            },
            &out_dir.join(format!("scan.{ext}")),
        )?;
    }
    run.finish(&cfg)?;
    Ok(Outcome::Done)
}

fn explicit_model(x: &[f64], y: &[f64], kind: LineKind, centers: &[f64], fwhm: f64, baseline: bool) -> PeakModel {
    let floor = if baseline { y.iter().copied().fold(f64::INFINITY, f64::min) } else { 0.0 };
    let height_at = |c: f64| {
        let i = x.partition_point(|&v| v < c).min(x.len().saturating_sub(1));
        (y[i] - floor).max(0.0)
    };
    PeakModel {
        kind,
        peaks: centers
            .iter()
            .map(|&c| Peak {
                center: c,
                fwhm,
                amplitude: height_at(c),
            })
            .collect(),
        baseline: baseline.then_some(floor),
    }
}

fn initial_guess(
    s: &Spectrum,
    kind: LineKind,
    baseline: bool,
    threshold: Option<f64>,
    centers: &Option<Vec<f64>>,
    fwhm_axis: f64,
) -> Result<InitialGuess> {
    match centers {
        Some(c) if !c.is_empty() => Ok(InitialGuess::Explicit(explicit_model(
            &s.frequency_offset_ghz,
            &s.counts,
            kind,
            c,
            fwhm_axis,
            baseline,
        ))),
        _ => {
            let threshold = threshold.unwrap_or_else(|| default_threshold(s));
            Ok(InitialGuess::Auto { threshold })
        }
    }
}

fn print_fit(out: &mut impl std::io::Write, fit: &PeakFit, report: &FitReport, width_unit: WidthUnit) -> Result<()> {
    let unit = match width_unit {
        WidthUnit::Mhz => "MHz",
        WidthUnit::Ghz => "GHz",
    };
    for (p, e) in report.parameters.iter().zip(&report.standard_errors) {
        let (w, we) = match width_unit {
            WidthUnit::Mhz => (p.fwhm_mhz.unwrap_or(0.0), e.fwhm_mhz.unwrap_or(0.0)),
            WidthUnit::Ghz => (p.fwhm_ghz.unwrap_or(0.0), e.fwhm_ghz.unwrap_or(0.0)),
        };
        writeln!(
            out,
            "center {:+.4} ± {:.4} GHz  fwhm {:.3} ± {:.3} {unit}  amplitude {:.3} ± {:.3}",
            p.center_ghz, e.center_ghz, w, we, p.amplitude_counts, e.amplitude_counts
        )
        .map_err(io_err)?;
    }
    if let (Some(b), Some(be)) = (report.baseline_counts, report.baseline_standard_error) {
        writeln!(out, "baseline {b:.3} ± {be:.3}").map_err(io_err)?;
    }
    writeln!(
        out,
        "residual norm {:.6}, {} iterations, converged: {}",
        fit.result.residual_norm, fit.result.iterations, fit.result.converged
    )
    .map_err(io_err)?;
    Ok(())
}

fn finish_fit(
    run: &mut Run,
    fit: &PeakFit,
    width_unit: WidthUnit,
    output: &Path,
    out: &mut impl std::io::Write,
) -> Result<Outcome> {
    let report = FitReport::from_fit(fit, width_unit);
    run.write(&Output::Fit(&report), output)?;
    print_fit(out, fit, &report, width_unit)?;
    if fit.result.converged {
        Ok(Outcome::Done)
    } else {
        eprintln!(
            "warning: fit did not converge ({}); best parameters written",
            fit.result.diagnostic.as_deref().unwrap_or("no diagnostic")
        );
        Ok(Outcome::NotConverged)
    }
}

fn fit_ple(run: &mut Run, mut a: FitPleArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let input = run.input(a.input.as_ref(), "input")?;
    let output = a.output.get_or_insert_with(|| PathBuf::from("fit-ple.json")).clone();
    let kind = *a.model.get_or_insert(LineKind::Lorentzian);
    let peaks = *a.peaks.get_or_insert(1);
    let baseline = *a.baseline.get_or_insert(true);
    let init_fwhm = *a.init_fwhm.get_or_insert(30.0);
    let spectrum = io::parse_scan_csv(&input)?;
    let init = initial_guess(&spectrum, kind, baseline, a.threshold, &a.init_centers, init_fwhm * 1e-3)?;
    let cap = *a.max_iterations.get_or_insert(LmOptions::default().max_iterations);
    let fit = fit_peaks_with_limit(&spectrum, kind, peaks, baseline, &init, cap)?;
    let outcome = finish_fit(run, &fit, WidthUnit::Mhz, &output, out)?;
    if let Some(plot) = &a.plot {
        let title = format!("{peaks}-line fit");
        run.write(
            &Output::Spectrum {
                spectrum: &spectrum,
                overlay: Some(&fit.model),
                title: &title,
            },
            plot,
        )?;
    }
    run.finish(&a)?;
    Ok(outcome)
}

fn fit_hist(run: &mut Run, mut a: FitHistArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let histogram: HistogramData = match (&a.input, &a.resonances) {
        (Some(_), None) => {
            let p = run.input(a.input.as_ref(), "input")?;
            io::parse_histogram_csv(&p)?
        }
        (None, Some(_)) => {
            let p = run.input(a.resonances.as_ref(), "resonances")?;
            let centers: Vec<f64> = io::parse_resonances_csv(&p)?.iter().map(|r| r.center_ghz).collect();
            let bin = *a.bin_width.get_or_insert(0.5);
            let lo = centers.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if centers.is_empty() {
                return Err(Error::InsufficientData("resonance list is empty".into()));
            }
            build_histogram(&centers, bin, ((lo / bin).floor() * bin - 5.0 * bin, (hi / bin).ceil() * bin + 5.0 * bin))?
        }
        _ => return Err(Error::Config("give exactly one of --input or --resonances".into())),
    };
    let output = a.output.get_or_insert_with(|| PathBuf::from("fit-hist.json")).clone();
    let kind = *a.model.get_or_insert(LineKind::Gaussian);
    let peaks = *a.peaks.get_or_insert(3);
    let baseline = *a.baseline.get_or_insert(false);
    let init_fwhm = *a.init_fwhm.get_or_insert(4.0);
    let spectrum = histogram.to_spectrum();
    let init = initial_guess(&spectrum, kind, baseline, a.threshold, &a.init_centers, init_fwhm)?;
    let cap = *a.max_iterations.get_or_insert(LmOptions::default().max_iterations);
    let fit = fit_peaks_with_limit(&spectrum, kind, peaks, baseline, &init, cap)?;
    let outcome = finish_fit(run, &fit, WidthUnit::Ghz, &output, out)?;
    let centers: Vec<f64> = fit.model.peaks.iter().map(|p| p.center).collect();
    for (i, c) in centers.iter().enumerate().skip(1) {
        writeln!(out, "P{} - P1 = {:.3} GHz", i + 1, c - centers[0]).map_err(io_err)?;
    }
    if let Some(plot) = &a.plot {
        let title = format!("{peaks}-group fit");
        run.write(
            &Output::Histogram {
                histogram: &histogram,
                overlay: Some(&fit.model),
                title: &title,
            },
            plot,
        )?;
    }
    run.finish(&a)?;
    Ok(outcome)
}

fn extract(run: &mut Run, mut a: ExtractArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let input = run.input(a.input.as_ref(), "input")?;
    let spectrum = io::parse_scan_csv(&input)?;
    let threshold = *a.threshold.get_or_insert_with(|| default_threshold(&spectrum));
    let list = extract_resonances(&spectrum, threshold, a.peaks)?;
    for r in &list {
        writeln!(out, "{:+.4} GHz  {:.2} MHz  {:.2}", r.center_ghz, r.fwhm_mhz, r.amplitude).map_err(io_err)?;
    }
    if let Some(path) = &a.output {
        run.write(&Output::Resonances(&list), path)?;
    }
    run.finish(&a)?;
    Ok(Outcome::Done)
}

fn load_model(
    spec: &str,
    reference_mass: Option<u32>,
    table: &IsotopeTable,
) -> Result<(VibrationalModel, bool)> {
    if spec == BUILTIN_MODEL {
        return Ok((VibrationalModel::snv_table1(), true));
    }
    if let Some(rest) = spec.strip_prefix("builtin:") {
        return Err(Error::Config(format!("unknown built-in model {rest:?}; available: {BUILTIN_MODEL}")));
    }
    let reference = table.mass(reference_mass.unwrap_or(119))?;
    Ok((VibrationalModel::from_csv(Path::new(spec), reference)?, false))
}

fn load_table(path: &Option<PathBuf>) -> Result<IsotopeTable> {
    match path {
        Some(p) => IsotopeTable::from_csv(p, "table"),
        None => Ok(IsotopeTable::tin()),
    }
}

fn shift(mut a: IsotopeShiftArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let table = load_table(&a.isotope_table)?;
    let spec = a.model.get_or_insert_with(|| BUILTIN_MODEL.to_string()).clone();
    let (model, _) = load_model(&spec, a.reference_mass, &table)?;
    let from = a.from.ok_or_else(|| Error::Config("missing --from".into()))?;
    let to = a.to.ok_or_else(|| Error::Config("missing --to".into()))?;
    let ghz = isotope_shift(&model, table.mass(from)?, table.mass(to)?)?;
    writeln!(out, "E({from}) - E({to}) = {ghz:+.4} GHz").map_err(io_err)?;
    let higher = if ghz >= 0.0 { from } else { to };
    writeln!(out, "mass {higher} has the higher zero-phonon energy").map_err(io_err)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct ModeRow {
    mode: Mode,
    state: ElectronicState,
    k_hartree_per_bohr2: f64,
    energy_mev: f64,
    reported_mev: Option<f64>,
    relative_deviation: Option<f64>,
    flagged: bool,
}

fn vibfreq(run: &mut Run, mut a: VibfreqArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let table = load_table(&a.isotope_table)?;
    let spec = a.model.get_or_insert_with(|| BUILTIN_MODEL.to_string()).clone();
    let (model, builtin) = load_model(&spec, a.reference_mass, &table)?;
    let m = table.mass(*a.mass.get_or_insert(119))?;
    let checks = if builtin { check_reported_mode_energies(&model, m)? } else { Vec::new() };
    let mut rows = Vec::new();
    for state in [ElectronicState::Ground, ElectronicState::Excited] {
        for mode in [Mode::A2u, Mode::Eu] {
            let k = model.force_constant(mode, state);
            let k_au = match k.unit {
                ForceConstantUnit::HartreePerBohrSquared => k.value,
                ForceConstantUnit::NewtonPerMetre => k.value * BOHR * BOHR / HARTREE,
            };
            let check = checks.iter().find(|c| c.mode == mode && c.state == state);
            rows.push(ModeRow {
                mode,
                state,
                k_hartree_per_bohr2: k_au,
                energy_mev: vibration_energy(k, m)?,
                reported_mev: check.map(|c| c.reported_mev),
                relative_deviation: check.map(|c| c.relative_deviation),
                flagged: check.is_some_and(|c| c.is_flagged()),
            });
        }
    }
    writeln!(out, "mode  state     k (Ha/bohr^2)  energy (meV)  reported (meV)  deviation").map_err(io_err)?;
    for r in &rows {
        let reported = r.reported_mev.map_or("-".to_string(), |v| format!("{v:.1}"));
        let dev = r.relative_deviation.map_or("-".to_string(), |v| format!("{:+.2}%", 100.0 * v));
        writeln!(
            out,
            "{:<5} {:<9} {:<14.6} {:<13.3} {:<15} {}{}",
            format!("{:?}", r.mode).to_lowercase(),
            format!("{:?}", r.state).to_lowercase(),
            r.k_hartree_per_bohr2,
            r.energy_mev,
            reported,
            dev,
            if r.flagged { "  [differs by more than 2%]" } else { "" }
        )
        .map_err(io_err)?;
    }
    for state in [ElectronicState::Ground, ElectronicState::Excited] {
        writeln!(
            out,
            "zero-point sum ({}): {:.3} meV",
            format!("{state:?}").to_lowercase(),
            zero_point_sum(&model, m, state)?
        )
        .map_err(io_err)?;
    }
    if let Some(path) = a.output.clone() {
        run.write_text(&path, &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    }
    run.finish(&a)?;
    Ok(Outcome::Done)
}

fn shift_curve(run: &mut Run, mut a: ShiftCurveArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let masses = a.masses.get_or_insert_with(|| vec![28, 73, 119]).clone();
    let cal = a.calibration.get_or_insert_with(|| "28=87".to_string()).clone();
    let cal = parse_pairs(std::slice::from_ref(&cal), "calibration")?;
    let (&cal_a, &cal_ghz) = cal.iter().next().expect("one pair parsed");
    let mut sorted = masses.clone();
    sorted.sort_unstable();
    let list: Vec<AtomicMass> = sorted.iter().map(|&m| AtomicMass::nominal(m)).collect();
    let curve = unit_mass_shift_curve(&list, (AtomicMass::nominal(cal_a), cal_ghz))?;
    let mut csv = String::from("mass_number,shift_ghz\n");
    for (m, s) in &curve {
        writeln!(out, "m = {:>3}: {s:.3} GHz per unit mass", m.mass_number).map_err(io_err)?;
        csv.push_str(&format!("{},{s}\n", m.mass_number));
    }
    if let Some(path) = a.output.clone() {
        run.write_text(&path, &csv)?;
    }
    run.finish(&a)?;
    Ok(Outcome::Done)
}

fn overlap(run: &Run, mut a: OverlapProbArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let fwhm = *a.fwhm.get_or_insert(3.9);
    let window = *a.window.get_or_insert(30.0);
    let convention = if *a.half_window.get_or_insert(false) { WindowConvention::Half } else { WindowConvention::Full };
    let p = coincidence_probability_analytic(fwhm, window, convention)?;
    writeln!(out, "analytic: {:.4} %", 100.0 * p).map_err(io_err)?;
    if let Some(trials) = a.trials {
        let seed = resolve_seed(&mut a.seed)?;
        let mc = coincidence_probability_mc(fwhm, window, trials, seed, convention, run.exec)?;
        writeln!(
            out,
            "monte carlo: {:.4} % ± {:.4} % ({} of {} trials, seed {seed})",
            100.0 * mc.probability,
            100.0 * mc.standard_error,
            mc.hits,
            mc.trials
        )
        .map_err(io_err)?;
    }
    Ok(Outcome::Done)
}

fn pairs(run: &mut Run, mut a: PairsArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let input = run.input(a.input.as_ref(), "input")?;
    let max = *a.max_detuning.get_or_insert(10.0);
    let list: Vec<(f64, f64)> = io::parse_resonances_csv(&input)?.iter().map(|r| (r.center_ghz, r.fwhm_mhz)).collect();
    let found = find_identical_pairs(&list, max)?;
    match a.output.clone() {
        Some(path) => {
            run.write(&Output::Pairs(&found), &path)?;
            writeln!(out, "{} pair(s) within {max} MHz", found.len()).map_err(io_err)?;
        }
        None => out.write_all(io::pairs_to_jsonl(&found)?.as_bytes()).map_err(io_err)?,
    }
    run.finish(&a)?;
    Ok(Outcome::Done)
}

fn depth(a: DepthArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let na = a.na.ok_or_else(|| Error::Config("missing --na".into()))?;
    let observed = a.observed.ok_or_else(|| Error::Config("missing --observed".into()))?;
    let d = depth_correction(na, a.n_outside.unwrap_or(1.0), a.n_inside.unwrap_or(2.4), observed)?;
    writeln!(out, "correction factor D/d: {:.3}", d.factor).map_err(io_err)?;
    writeln!(out, "actual depth: {:.3} µm", d.actual_depth_um).map_err(io_err)?;
    Ok(Outcome::Done)
}

fn pl(run: &mut Run, mut a: PlSpectrumArgs, out: &mut impl std::io::Write) -> Result<Outcome> {
    let d = LevelStructure::snv_default();
    let ls = LevelStructure::new(
        *a.zpl_thz.get_or_insert(d.zpl_center_thz),
        *a.gs_splitting.get_or_insert(d.gs_splitting_ghz),
        *a.es_splitting.get_or_insert(d.es_splitting_ghz),
        *a.lifetime.get_or_insert(d.lifetime_ns),
    )?;
    let temperature = *a.temperature.get_or_insert(6.0);
    let fwhm = *a.fwhm.get_or_insert(20.0);
    let step = *a.step.get_or_insert(1.0);
    let opts = PlOptions {
        lower_ground_branching: *a.branching.get_or_insert(PlOptions::default().lower_ground_branching),
        ..PlOptions::default()
    };
    let t = transition_frequencies(&ls);
    let lo = t.offset_ghz(Transition::D) - 10.0 * fwhm;
    let hi = t.offset_ghz(Transition::A) + 10.0 * fwhm;
    let axis = uniform_grid((lo / step).floor() * step, (hi / step).ceil() * step, step)?;
    let pl = pl_spectrum(&ls, temperature, fwhm, &axis, opts)?;
    writeln!(out, "line  offset from C (GHz)  frequency (THz)  peak height").map_err(io_err)?;
    for l in &pl.lines {
        writeln!(
            out,
            "{:<5} {:<20.3} {:<16.6} {:.6e}",
            format!("{:?}", l.transition),
            l.offset_ghz,
            t.frequency_thz(l.transition),
            l.amplitude
        )
        .map_err(io_err)?;
    }
    let title = format!("Zero-phonon PL at {temperature} K");
    for path in [a.output.clone(), a.plot.clone()].into_iter().flatten() {
        run.write(
            &Output::Spectrum {
                spectrum: &pl.spectrum,
                overlay: None,
                title: &title,
            },
            &path,
        )?;
    }
    run.finish(&a)?;
    Ok(Outcome::Done)
}
