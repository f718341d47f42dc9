//! File formats: CSV spectra, histograms, emitter and resonance lists, JSON
//! fit reports and JSON-lines pair reports.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so a write/parse cycle reproduces every value bit for bit.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::PairReport;
use crate::ensemble::Emitter;
use crate::error::{Error, Result};
use crate::fitting::{PeakFit, PeakModel, Resonance};
use crate::levels::LineKind;
use crate::spectrum::{HistogramData, Spectrum};
use crate::svg::{self, PlotSeries};
use crate::units::AtomicMass;
use crate::vibmodel::{csv_error, IsotopeTable};

pub const SPECTRUM_HEADER: &str = "frequency_offset_ghz,counts";
pub const HISTOGRAM_HEADER: &str = "bin_start_ghz,bin_end_ghz,count";
pub const EMITTER_HEADER: &str = "isotope,center_offset_ghz,fwhm_mhz,brightness,x_um,y_um,z_um";
pub const RESONANCE_HEADER: &str = "center_ghz,fwhm_mhz,amplitude";
const REFERENCE_KEY: &str = "reference_thz";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn spectrum_to_csv(s: &Spectrum) -> String {
    let mut out = String::new();
    if let Some(r) = s.reference_thz {
        let _ = writeln!(out, "# {REFERENCE_KEY}={r}");
    }
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for (x, y) in s.frequency_offset_ghz.iter().zip(&s.counts) {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

/// Parses a scan CSV held in memory; `origin` is only used in error messages.
pub fn parse_scan_str(text: &str, origin: &Path) -> Result<Spectrum> {
    let mut reference = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == REFERENCE_KEY {
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(origin, i as u64 + 1, format!("bad {REFERENCE_KEY} value")))?;
                    reference = Some(v);
                }
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(origin, e))?.clone();
    let header_line = reader.position().line().saturating_sub(1).max(1);
    if header.is_empty() || header.iter().ne(SPECTRUM_HEADER.split(',')) {
        return Err(parse_err(origin, header_line, format!("missing header `{SPECTRUM_HEADER}`")));
    }
    let mut axis = Vec::new();
    let mut counts = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(origin, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| -> Result<f64> {
            let raw = record.get(i).ok_or_else(|| parse_err(origin, line, "missing column"))?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(origin, line, format!("non-numeric cell `{raw}`")))
        };
        let x = cell(0)?;
        let y = cell(1)?;
        if let Some(&prev) = axis.last() {
            if !(x > prev) {
                return Err(parse_err(origin, line, "frequency axis is not strictly ascending"));
            }
        }
        axis.push(x);
        counts.push(y);
    }
    Spectrum::new(reference, axis, counts)
}

/// Reads a `frequency_offset_ghz,counts` scan with an optional
/// `# reference_thz=<value>` comment line.
pub fn parse_scan_csv(path: &Path) -> Result<Spectrum> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_scan_str(&text, path)
}

pub fn histogram_to_csv(h: &HistogramData) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (w, c) in h.bin_edges.windows(2).zip(&h.counts) {
        let _ = writeln!(out, "{},{},{c}", w[0], w[1]);
    }
    out
}

pub fn parse_histogram_csv(path: &Path) -> Result<HistogramData> {
    #[derive(Deserialize)]
    struct Row {
        bin_start_ghz: f64,
        bin_end_ghz: f64,
        count: u64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    crate::vibmodel::check_header(path, &mut reader, &HISTOGRAM_HEADER.split(',').collect::<Vec<_>>())?;
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        if let Some(&last) = edges.last() {
            if row.bin_start_ghz != last {
                return Err(parse_err(path, i as u64 + 2, "bins are not contiguous"));
            }
        } else {
            edges.push(row.bin_start_ghz);
        }
        edges.push(row.bin_end_ghz);
        counts.push(row.count);
    }
    HistogramData::new(edges, counts)
}

pub fn emitters_to_csv(emitters: &[Emitter]) -> String {
    let mut out = String::from(EMITTER_HEADER);
    out.push('\n');
    for e in emitters {
        let [x, y, z] = e.position_um;
        let _ = writeln!(
            out,
            "{},{},{},{},{x},{y},{z}",
            e.isotope.mass_number, e.center_offset_ghz, e.homogeneous_fwhm_mhz, e.brightness
        );
    }
    out
}

/// Reads an emitter list; isotope mass numbers are resolved through `table`
/// (unknown ones fall back to the nominal mass).
pub fn parse_emitters_csv(path: &Path, table: &IsotopeTable) -> Result<Vec<Emitter>> {
    #[derive(Deserialize)]
    struct Row {
        isotope: u32,
        center_offset_ghz: f64,
        fwhm_mhz: f64,
        brightness: f64,
        x_um: f64,
        y_um: f64,
        z_um: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    crate::vibmodel::check_header(path, &mut reader, &EMITTER_HEADER.split(',').collect::<Vec<_>>())?;
    reader
        .deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| csv_error(path, e))?;
            Ok(Emitter {
                isotope: table.mass(row.isotope).unwrap_or_else(|_| AtomicMass::nominal(row.isotope)),
                center_offset_ghz: row.center_offset_ghz,
                homogeneous_fwhm_mhz: row.fwhm_mhz,
                brightness: row.brightness,
                position_um: [row.x_um, row.y_um, row.z_um],
            })
        })
        .collect()
}

pub fn resonances_to_csv(list: &[Resonance]) -> String {
    let mut out = String::from(RESONANCE_HEADER);
    out.push('\n');
    for r in list {
        let _ = writeln!(out, "{},{},{}", r.center_ghz, r.fwhm_mhz, r.amplitude);
    }
    out
}

pub fn parse_resonances_csv(path: &Path) -> Result<Vec<Resonance>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    crate::vibmodel::check_header(path, &mut reader, &RESONANCE_HEADER.split(',').collect::<Vec<_>>())?;
    reader
        .deserialize::<Resonance>()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

/// Per-peak values in a fit report. Exactly one of the width fields is set,
/// depending on whether the fit was to a PLE scan or a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParameters {
    pub center_ghz: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fwhm_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fwhm_ghz: Option<f64>,
    pub amplitude_counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthUnit {
    Mhz,
    Ghz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: LineKind,
    pub parameters: Vec<PeakParameters>,
    pub standard_errors: Vec<PeakParameters>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline_counts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline_standard_error: Option<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

impl FitReport {
    /// Builds a report from a fit whose axis is in GHz.
    pub fn from_fit(fit: &PeakFit, width_unit: WidthUnit) -> Self {
        let params = &fit.result.parameters;
        let errs = &fit.result.standard_errors;
        let k = fit.model.peaks.len();
        let pack = |v: &[f64], i: usize| {
            let w = v[3 * i + 1];
            PeakParameters {
                center_ghz: v[3 * i],
                fwhm_mhz: (width_unit == WidthUnit::Mhz).then_some(w * 1e3),
                fwhm_ghz: (width_unit == WidthUnit::Ghz).then_some(w),
                amplitude_counts: v[3 * i + 2],
            }
        };
        let has_base = fit.model.baseline.is_some();
        Self {
            model: fit.model.kind,
            parameters: (0..k).map(|i| pack(params, i)).collect(),
            standard_errors: (0..k).map(|i| pack(errs, i)).collect(),
            baseline_counts: has_base.then(|| params[3 * k]),
            baseline_standard_error: has_base.then(|| errs[3 * k]),
            residual_norm: fit.result.residual_norm,
            converged: fit.result.converged,
            iterations: fit.result.iterations,
            diagnostic: fit.result.diagnostic.clone(),
        }
    }
}

pub fn pairs_to_jsonl(pairs: &[PairReport]) -> Result<String> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl OutputFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "json" | "jsonl" => Some(Self::Json),
            "svg" => Some(Self::Svg),
            _ => None,
        }
    }
}

/// Anything the CLI can write to disk.
pub enum Output<'a> {
    Spectrum {
        spectrum: &'a Spectrum,
        overlay: Option<&'a PeakModel>,
        title: &'a str,
    },
    Histogram {
        histogram: &'a HistogramData,
        overlay: Option<&'a PeakModel>,
        title: &'a str,
    },
    Fit(&'a FitReport),
    Pairs(&'a [PairReport]),
    Emitters(&'a [Emitter]),
    Resonances(&'a [Resonance]),
}

fn overlay_series(model: &PeakModel, lo: f64, hi: f64) -> PlotSeries {
    let n = 1000;
    let points = (0..=n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            (x, model.evaluate(x))
        })
        .collect();
    PlotSeries::line("fit", points)
}

fn render(output: &Output<'_>, format: OutputFormat) -> Result<String> {
    let unsupported = || Error::InvalidInput(format!("{format:?} output is not available for this result"));
    match (output, format) {
        (Output::Spectrum { spectrum, .. }, OutputFormat::Csv) => Ok(spectrum_to_csv(spectrum)),
        (Output::Spectrum { spectrum, overlay, title }, OutputFormat::Svg) => {
            let mut series = vec![PlotSeries::line(
                "data",
                spectrum.frequency_offset_ghz.iter().copied().zip(spectrum.counts.iter().copied()).collect(),
            )];
            if let (Some(m), Some(&lo), Some(&hi)) = (overlay, spectrum.frequency_offset_ghz.first(), spectrum.frequency_offset_ghz.last()) {
                series.push(overlay_series(m, lo, hi));
            }
            let x_label = match spectrum.reference_thz {
                Some(r) => format!("Frequency offset from {r} THz (GHz)"),
                None => "Frequency offset (GHz)".to_string(),
            };
            Ok(svg::line_plot(title, &x_label, "Counts", &series))
        }
        (Output::Histogram { histogram, .. }, OutputFormat::Csv) => Ok(histogram_to_csv(histogram)),
        (Output::Histogram { histogram, overlay, title }, OutputFormat::Svg) => {
            let extra: Vec<PlotSeries> = overlay
                .map(|m| vec![overlay_series(m, histogram.bin_edges[0], *histogram.bin_edges.last().unwrap())])
                .unwrap_or_default();
            Ok(svg::histogram_plot(title, "Frequency offset (GHz)", "Emitters per bin", histogram, &extra))
        }
        (Output::Fit(report), OutputFormat::Json) => Ok(serde_json::to_string_pretty(report)? + "\n"),
        (Output::Pairs(pairs), OutputFormat::Json) => pairs_to_jsonl(pairs),
        (Output::Emitters(list), OutputFormat::Csv) => Ok(emitters_to_csv(list)),
        (Output::Resonances(list), OutputFormat::Csv) => Ok(resonances_to_csv(list)),
        (Output::Resonances(list), OutputFormat::Json) => Ok(serde_json::to_string_pretty(list)? + "\n"),
        _ => Err(unsupported()),
    }
}

/// Writes `output` in `format` to `path`, creating parent directories.
pub fn write_outputs(output: &Output<'_>, format: OutputFormat, path: &Path) -> Result<PathBuf> {
    let text = render(output, format)?;
    write_text(path, &text)?;
    Ok(path.to_path_buf())
}
