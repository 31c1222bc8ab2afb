//! CSV and JSON-lines artifacts. Every CSV starts with a
//! `# <kind> schema_version=<v>` comment line; JSON objects carry a
//! `schema_version` field.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{FrequencyEvaluator, SampledSignal, StateSpace};
use crate::plant::ExperimentRecord;
use crate::strategy::IterationSnapshot;

pub const EXPORT_SCHEMA_VERSION: u32 = 1;

/// Relative timestamp deviation tolerated by [`read_signal_csv`].
pub const SAMPLING_TOL: f64 = 1e-9;

fn io_context(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::from(e).context(path.display().to_string())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let ctx = path.display().to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::from(io).context(ctx),
        other => Error::Parse(format!("{other:?}")).context(ctx),
    }
}

/// Opens `path` as a CSV writer whose first line names `kind` and the schema.
fn csv_writer(path: &Path, kind: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path).map_err(io_context(path))?);
    writeln!(out, "# {kind} schema_version={EXPORT_SCHEMA_VERSION}").map_err(io_context(path))?;
    Ok(csv::Writer::from_writer(out))
}

fn finish_csv(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::from(e.into_error()).context(path.display().to_string()))?;
    inner.flush().map_err(io_context(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_context(path))
}

/// Sidecar describing one run CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub omega_rad_s: f64,
    pub frequency_hz: f64,
    pub amplitude: f64,
    pub fs_hz: f64,
    pub chunk_cycles: usize,
    pub gamma: f64,
    pub x1: f64,
    pub x2: f64,
    pub gamma_hat: f64,
    /// First sample of the block that passed the steady-state test.
    pub detected_at: usize,
    pub response_re: f64,
    pub response_im: f64,
    pub samples: usize,
}

impl RunMetadata {
    pub fn of(record: &ExperimentRecord) -> Self {
        Self {
            schema_version: EXPORT_SCHEMA_VERSION,
            omega_rad_s: record.omega,
            frequency_hz: record.omega / (2.0 * PI),
            amplitude: record.config.amplitude,
            fs_hz: record.config.fs,
            chunk_cycles: record.config.chunk_cycles,
            gamma: record.config.gamma,
            x1: record.x1,
            x2: record.x2,
            gamma_hat: record.gamma_hat,
            detected_at: record.detected_at,
            response_re: record.response.value.re,
            response_im: record.response.value.im,
            samples: record.u_transient.len() + record.u_steady.len(),
        }
    }
}

/// Writes `t,u,y` for the whole run (transient then steady block) to
/// `<stem>.csv` and its [`RunMetadata`] to `<stem>.json`.
pub fn write_run(dir: &Path, stem: &str, record: &ExperimentRecord) -> Result<()> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv_writer(&csv_path, "baryid-run")?;
    w.write_record(["t", "u", "y"])
        .map_err(|e| csv_error(&csv_path, e))?;
    let fs = record.config.fs;
    let u = record
        .u_transient
        .as_slice()
        .iter()
        .chain(record.u_steady.as_slice());
    let y = record
        .y_transient
        .as_slice()
        .iter()
        .chain(record.y_steady.as_slice());
    for (i, (u, y)) in u.zip(y).enumerate() {
        let t = i as f64 / fs;
        w.write_record([t.to_string(), u.to_string(), y.to_string()])
            .map_err(|e| csv_error(&csv_path, e))?;
    }
    finish_csv(&csv_path, w)?;
    write_json(&dir.join(format!("{stem}.json")), &RunMetadata::of(record))
}

/// Reads a `t,u,y` CSV. The sample rate is taken from the time column,
/// which must be uniform to within [`SAMPLING_TOL`] relative.
pub fn read_signal_csv(path: &Path) -> Result<(SampledSignal, SampledSignal)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column {name:?}", path.display())))
    };
    let (ct, cu, cy) = (col("t")?, col("u")?, col("y")?);
    let (mut t, mut u, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Parse(format!("{}: bad number in row {}", path.display(), row + 1))
                })
        };
        t.push(field(ct)?);
        u.push(field(cu)?);
        y.push(field(cy)?);
    }
    if t.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: need at least two samples",
            path.display()
        )));
    }
    let fs = uniform_rate(&t)?;
    Ok((SampledSignal::new(fs, u)?, SampledSignal::new(fs, y)?))
}

/// Sample rate of a uniform time column; `NonuniformSampling` names the
/// first (1-based) data row off the grid.
pub fn uniform_rate(t: &[f64]) -> Result<f64> {
    let n = t.len();
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonuniformSampling { row: 2 });
    }
    let scale = t[0].abs().max(t[n - 1].abs()).max(dt);
    for (i, &ti) in t.iter().enumerate() {
        if (ti - (t[0] + i as f64 * dt)).abs() > SAMPLING_TOL * scale {
            return Err(Error::NonuniformSampling { row: i + 1 });
        }
    }
    Ok(1.0 / dt)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    schema_version: u32,
    #[serde(flatten)]
    snapshot: &'a IterationSnapshot,
}

/// One JSON object per line.
pub fn trace_to_string(trace: &[IterationSnapshot]) -> Result<String> {
    let mut out = String::new();
    for snapshot in trace {
        let line = TraceLine {
            schema_version: EXPORT_SCHEMA_VERSION,
            snapshot,
        };
        out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Parse(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_trace(text: &str) -> Result<Vec<IterationSnapshot>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Parse(format!("trace line: {e}"))))
        .collect()
}

pub fn write_trace(path: &Path, trace: &[IterationSnapshot]) -> Result<()> {
    std::fs::write(path, trace_to_string(trace)?).map_err(io_context(path))
}

/// One Bode row; phases in radians, NaN where a system has a pole on the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodeRow {
    pub omega: f64,
    pub mag_g: f64,
    pub phase_g: f64,
    pub mag_r: f64,
    pub phase_r: f64,
    pub mag_err: f64,
}

/// `n` log-spaced points across `band` (rad/s).
pub fn bode(
    plant: &StateSpace,
    model: &StateSpace,
    band: (f64, f64),
    n: usize,
) -> Result<Vec<BodeRow>> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::Validation(format!(
            "Bode grid needs 0 < lo < hi and at least 2 points, got [{lo}, {hi}], {n}"
        )));
    }
    let g = FrequencyEvaluator::new(plant)?;
    let r = FrequencyEvaluator::new(model)?;
    let value = |e: &FrequencyEvaluator, w: f64| match e.eval(w) {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingularAtFrequency { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let polar =
        |v: Option<num_complex::Complex64>| v.map_or((f64::NAN, f64::NAN), |v| (v.norm(), v.arg()));
    (0..n)
        .map(|i| {
            let omega = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
            let (gv, rv) = (value(&g, omega)?, value(&r, omega)?);
            let (mag_g, phase_g) = polar(gv);
            let (mag_r, phase_r) = polar(rv);
            let mag_err = match (gv, rv) {
                (Some(g), Some(r)) => (r - g).norm(),
                _ => f64::NAN,
            };
            Ok(BodeRow {
                omega,
                mag_g,
                phase_g,
                mag_r,
                phase_r,
                mag_err,
            })
        })
        .collect()
}

pub fn write_bode(path: &Path, rows: &[BodeRow]) -> Result<()> {
    let mut w = csv_writer(path, "baryid-bode")?;
    w.write_record([
        "omega_rad_s",
        "frequency_hz",
        "mag_g",
        "phase_g_rad",
        "mag_r",
        "phase_r_rad",
        "mag_r_minus_g",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in rows {
        let v = [
            r.omega,
            r.omega / (2.0 * PI),
            r.mag_g,
            r.phase_g,
            r.mag_r,
            r.phase_r,
            r.mag_err,
        ];
        w.write_record(v.iter().map(f64::to_string))
            .map_err(|e| csv_error(path, e))?;
    }
    finish_csv(path, w)
}

/// Writes a table with `header` columns; NaN cells are written as `NaN`.
pub fn write_table(path: &Path, kind: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path, kind)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    finish_csv(path, w)
}

/// Reads back a table written by [`write_table`] or [`write_bode`].
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let rows = rdr
        .records()
        .map(|r| {
            r.map(|r| r.iter().map(String::from).collect())
                .map_err(|e| csv_error(path, e))
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
