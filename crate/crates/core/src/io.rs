//! On-disk formats: the JSON configuration, dataset directories (manifest
//! plus one CSV per record) and SVG plots.
//!
//! Everything is plain UTF-8 text with `\n` line endings. Trace files hold
//! fixed-point decimals with nine fractional digits; the generator already
//! quantises amplitudes to that resolution, so datasets round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::AnalysisConfig;
use crate::dsp::{DspConfig, SignalTrace};
use crate::error::{Error, Result};
use crate::mechanics::Direction;
use crate::phantom::{DamageKind, PhantomConfig, OVAL_AREA_FACTOR};
use crate::solver::SolverConfig;
use crate::synthlab::{
    Dataset, ExperimentRecord, SpecimenInfo, SynthConfig, MAX_CYCLES, MAX_FORCE,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Fractional digits written for times and amplitudes.
pub const DECIMALS: usize = 9;

/// Rounds to the resolution of the trace files.
pub fn quantize(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// The whole JSON configuration, one block per module. Missing blocks and
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub phantom: PhantomConfig,
    pub solver: SolverConfig,
    pub synth: SynthConfig,
    pub dsp: DspConfig,
    pub analysis: AnalysisConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Config =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Config::from_json(&read_text(path)?).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.geometry()?;
        self.phantom.calibration()?;
        self.solver.validate()?;
        self.synth.validate()?;
        self.dsp.validate(self.synth.sample_rate_hz)?;
        if let Some(rx) = self.analysis.feature_receiver {
            if rx >= self.solver.receiver_angles_deg.len() {
                return Err(Error::config(format!(
                    "feature receiver {rx} does not exist"
                )));
            }
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Index entry of one record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    /// Relative to the dataset directory, `/`-separated.
    pub path: String,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
    pub specimen_id: String,
    pub condition: DamageKind,
    pub cycle: usize,
    pub step: usize,
    pub direction: Direction,
    pub force_n: f64,
    pub deformation_mm: f64,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub channels: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub specimens: Vec<SpecimenInfo>,
    pub records: Vec<RecordEntry>,
}

/// Area of an oval specimen as tabulated, rounded to four decimals.
fn tabulated_area(x_mm: f64, y_mm: f64) -> f64 {
    (OVAL_AREA_FACTOR * x_mm * y_mm * 1e4).round() / 1e4
}

impl DatasetManifest {
    /// Checks the protocol bounds and internal consistency. File presence
    /// and checksums are checked when reading.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let mut expected = 0;
        for s in &self.specimens {
            if (s.area_mm2 * 1e4).round() / 1e4 != tabulated_area(s.x_mm, s.y_mm) {
                return Err(Error::Manifest(format!(
                    "specimen {}: area {} does not match 0.785 × {} × {}",
                    s.id, s.area_mm2, s.x_mm, s.y_mm
                )));
            }
            if s.cycles > MAX_CYCLES {
                return Err(Error::Manifest(format!(
                    "specimen {}: {} cycles exceed the protocol limit of {MAX_CYCLES}",
                    s.id, s.cycles
                )));
            }
            expected += s.cycles * s.steps_per_cycle;
        }
        if expected != self.records.len() {
            return Err(Error::Manifest(format!(
                "specimen table implies {expected} records, index lists {}",
                self.records.len()
            )));
        }
        for r in &self.records {
            let specimen = self
                .specimens
                .iter()
                .find(|s| s.id == r.specimen_id)
                .ok_or_else(|| {
                    Error::Manifest(format!("{}: unknown specimen {}", r.path, r.specimen_id))
                })?;
            if !(r.force_n >= 0.0 && r.force_n <= MAX_FORCE) {
                return Err(Error::Manifest(format!(
                    "{}: force {} N outside [0, {MAX_FORCE}]",
                    r.path, r.force_n
                )));
            }
            if r.cycle >= specimen.cycles || r.step >= specimen.steps_per_cycle {
                return Err(Error::Manifest(format!(
                    "{}: cycle or step out of range",
                    r.path
                )));
            }
            if r.condition != specimen.condition {
                return Err(Error::Manifest(format!(
                    "{}: condition differs from specimen table",
                    r.path
                )));
            }
        }
        Ok(())
    }
}

/// Relative path of a record file.
pub fn record_path(specimen_id: &str, cycle: usize, step: usize) -> String {
    format!("{specimen_id}/cycle_{cycle}/step_{step:02}.csv")
}

/// CSV body of one record: `time_s,ch1..chN`.
pub fn trace_csv(traces: &[SignalTrace]) -> Result<String> {
    let first = traces
        .first()
        .ok_or_else(|| Error::domain("record has no traces"))?;
    if traces
        .iter()
        .any(|t| t.len() != first.len() || t.sample_rate != first.sample_rate || t.t0 != first.t0)
    {
        return Err(Error::domain(
            "record traces must share length, sample rate and start time",
        ));
    }
    let mut out = String::with_capacity(first.len() * traces.len() * 14);
    out.push_str("time_s");
    for k in 1..=traces.len() {
        let _ = write!(out, ",ch{k}");
    }
    out.push('\n');
    for i in 0..first.len() {
        let _ = write!(out, "{:.*}", DECIMALS, first.time(i));
        for t in traces {
            let _ = write!(out, ",{:.*}", DECIMALS, t.samples[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

fn parse_trace_csv(text: &str, entry: &RecordEntry, path: &Path) -> Result<Vec<SignalTrace>> {
    let bad = |msg: String| Error::Manifest(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() != entry.channels + 1 || &header[0] != "time_s" {
        return Err(bad(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut channels = vec![Vec::with_capacity(entry.samples); entry.channels];
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        for (ch, field) in channels.iter_mut().zip(row.iter().skip(1)) {
            ch.push(
                field
                    .parse::<f64>()
                    .map_err(|e| bad(format!("{field:?}: {e}")))?,
            );
        }
    }
    if channels.iter().any(|c| c.len() != entry.samples) {
        return Err(bad(format!(
            "expected {} samples per channel",
            entry.samples
        )));
    }
    channels
        .into_iter()
        .map(|samples| SignalTrace::new(samples, entry.sample_rate_hz, entry.t0_s))
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn entry_for(record: &ExperimentRecord, path: String, sha256: String) -> RecordEntry {
    let first = record.traces.first();
    RecordEntry {
        path,
        sha256,
        specimen_id: record.specimen_id.clone(),
        condition: record.condition,
        cycle: record.cycle,
        step: record.step,
        direction: record.direction,
        force_n: record.force,
        deformation_mm: record.deformation,
        sample_rate_hz: first.map_or(0.0, |t| t.sample_rate),
        t0_s: first.map_or(0.0, |t| t.t0),
        channels: record.traces.len(),
        samples: first.map_or(0, |t| t.len()),
    }
}

/// Writes `dataset` under `dir` (created if needed) and returns the
/// manifest that was stored alongside.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let records = dataset
        .records
        .par_iter()
        .map(|r| {
            let rel = record_path(&r.specimen_id, r.cycle, r.step);
            let body = trace_csv(&r.traces).map_err(|e| e.context(rel.clone()))?;
            let file = dir.join(&rel);
            if let Some(parent) = file.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&file, body.as_bytes())?;
            Ok(entry_for(r, rel, sha256_hex(body.as_bytes())))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        master_seed: dataset.master_seed,
        config: dataset.config.clone(),
        specimens: dataset.specimens.clone(),
        records,
    };
    manifest.validate()?;
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

/// Reads and validates the manifest of a dataset directory.
pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let value: serde_json::Value = serde_json::from_str(&read_text(&path)?)?;
    // Check the version before the layout, so old files fail clearly.
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0);
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let manifest: DatasetManifest = serde_json::from_value(value)?;
    manifest.validate()?;
    Ok(manifest)
}

/// Reads a dataset written by [`write_dataset`], verifying every file.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let records = manifest
        .records
        .par_iter()
        .map(|entry| {
            let path: PathBuf = dir.join(&entry.path);
            let bytes = fs::read(&path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
                _ => Error::Io(e),
            })?;
            if sha256_hex(&bytes) != entry.sha256 {
                return Err(Error::Checksum(path));
            }
            let text = String::from_utf8(bytes)
                .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
            let traces = if entry.channels == 0 {
                Vec::new()
            } else {
                parse_trace_csv(&text, entry, &path)?
            };
            Ok(ExperimentRecord {
                specimen_id: entry.specimen_id.clone(),
                condition: entry.condition,
                cycle: entry.cycle,
                step: entry.step,
                direction: entry.direction,
                deformation: entry.deformation_mm,
                force: entry.force_n,
                traces,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        master_seed: manifest.master_seed,
        config: manifest.config,
        specimens: manifest.specimens,
        records,
    })
}

/// Writes a CSV file from a header and rows of already formatted cells.
pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path.as_ref())?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Manifest(format!("{other:?}")),
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        csv_error(e)
    }
}

/// One line of a curve plot, optionally with a shaded `(x, low, high)` band.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub band: Option<Vec<(f64, f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotSpec {
    /// Rows top to bottom, columns left to right; colours span the data range.
    HeatMap {
        title: String,
        x_label: String,
        y_label: String,
        values: Vec<Vec<f64>>,
    },
    Curves {
        title: String,
        x_label: String,
        y_label: String,
        series: Vec<PlotSeries>,
    },
    Bars {
        title: String,
        y_label: String,
        bars: Vec<(String, f64)>,
    },
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];
/// Sequential colour ramp, dark to light.
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let k = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - k as f64;
    let (a, b) = (RAMP[k], RAMP[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        // Flat data still needs a drawable range.
        (lo - 0.5, hi + 0.5)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, ticks: bool) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="black"/>"#
    );
    if ticks {
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
            let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                frame.px(xv),
                y0 + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                frame.py(yv) + 4.0,
                tick(yv)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3e}");
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        s
    }
}

/// Renders a plot as a standalone SVG document. Output depends only on
/// the input, so identical data gives identical bytes.
pub fn emit_svg(spec: &PlotSpec) -> Result<String> {
    let mut out = String::new();
    match spec {
        PlotSpec::HeatMap {
            title,
            x_label,
            y_label,
            values,
        } => {
            let cols = values.first().map_or(0, Vec::len);
            if cols == 0 || values.iter().any(|r| r.len() != cols) {
                return Err(Error::domain(
                    "heat-map needs a non-empty rectangular matrix",
                ));
            }
            let bad: Vec<String> = values
                .iter()
                .enumerate()
                .filter(|(_, r)| r.iter().any(|v| !v.is_finite()))
                .map(|(k, _)| format!("row {k}"))
                .collect();
            if !bad.is_empty() {
                return Err(Error::Render(bad));
            }
            let (lo, hi) = span(values.iter().flatten().copied());
            let frame = Frame {
                x: (0.0, cols as f64),
                y: (0.0, values.len() as f64),
            };
            header(&mut out, title);
            let w = frame.px(1.0) - frame.px(0.0);
            let h = frame.py(0.0) - frame.py(1.0);
            for (r, row) in values.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        frame.px(c as f64),
                        frame.py((values.len() - r) as f64),
                        w,
                        h,
                        ramp((v - lo) / (hi - lo))
                    );
                }
            }
            axes(&mut out, &frame, x_label, y_label, false);
        }
        PlotSpec::Curves {
            title,
            x_label,
            y_label,
            series,
        } => {
            if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
                return Err(Error::domain(
                    "curve plot needs at least one non-empty series",
                ));
            }
            let bad: Vec<String> = series
                .iter()
                .filter(|s| {
                    s.points
                        .iter()
                        .any(|p| !(p.0.is_finite() && p.1.is_finite()))
                        || s.band
                            .iter()
                            .flatten()
                            .any(|b| !(b.0.is_finite() && b.1.is_finite() && b.2.is_finite()))
                })
                .map(|s| s.name.clone())
                .collect();
            if !bad.is_empty() {
                return Err(Error::Render(bad));
            }
            let xs = series.iter().flat_map(|s| {
                s.points
                    .iter()
                    .map(|p| p.0)
                    .chain(s.band.iter().flatten().map(|b| b.0))
            });
            let ys = series.iter().flat_map(|s| {
                s.points
                    .iter()
                    .map(|p| p.1)
                    .chain(s.band.iter().flatten().flat_map(|b| [b.1, b.2]))
            });
            let frame = Frame {
                x: span(xs),
                y: span(ys),
            };
            header(&mut out, title);
            for (k, s) in series.iter().enumerate() {
                let colour = PALETTE[k % PALETTE.len()];
                if let Some(band) = &s.band {
                    let mut pts: Vec<String> = band
                        .iter()
                        .map(|b| format!("{:.2},{:.2}", frame.px(b.0), frame.py(b.2)))
                        .collect();
                    pts.extend(
                        band.iter()
                            .rev()
                            .map(|b| format!("{:.2},{:.2}", frame.px(b.0), frame.py(b.1))),
                    );
                    let _ = writeln!(
                        out,
                        r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
                        pts.join(" ")
                    );
                }
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|p| format!("{:.2},{:.2}", frame.px(p.0), frame.py(p.1)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                    pts.join(" ")
                );
                let _ = writeln!(
                    out,
                    r#"<text x="{:.1}" y="{:.1}" fill="{colour}">{}</text>"#,
                    LEFT + 10.0,
                    TOP + 14.0 * (k + 1) as f64,
                    escape(&s.name)
                );
            }
            axes(&mut out, &frame, x_label, y_label, true);
        }
        PlotSpec::Bars {
            title,
            y_label,
            bars,
        } => {
            if bars.is_empty() {
                return Err(Error::domain("bar chart needs at least one bar"));
            }
            let bad: Vec<String> = bars
                .iter()
                .filter(|b| !b.1.is_finite())
                .map(|b| b.0.clone())
                .collect();
            if !bad.is_empty() {
                return Err(Error::Render(bad));
            }
            let (lo, hi) = span(bars.iter().map(|b| b.1).chain([0.0]));
            let frame = Frame {
                x: (0.0, bars.len() as f64),
                y: (lo, hi),
            };
            header(&mut out, title);
            let slot = frame.px(1.0) - frame.px(0.0);
            for (k, (label, v)) in bars.iter().enumerate() {
                let (top, bottom) = (frame.py(v.max(0.0)), frame.py(v.min(0.0)));
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    frame.px(k as f64) + 0.15 * slot,
                    top,
                    0.7 * slot,
                    bottom - top,
                    PALETTE[0]
                );
                let _ = writeln!(
                    out,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    frame.px(k as f64 + 0.5),
                    HEIGHT - BOTTOM + 16.0,
                    escape(label)
                );
            }
            axes(&mut out, &frame, "", y_label, false);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
