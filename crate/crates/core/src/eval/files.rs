//! Text files for state-space systems and interpolant models.
//!
//! Every number is a hex float, so a save/load round trip is bit-exact.
//! Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! baryid-state-space 1
//! dims 2 1 1            # n p q
//! A
//! -0x1p-1 0x1p+1
//! -0x1p+1 -0x1p-1
//! B
//! ...
//! ```
//!
//! An interpolant file stores the data and weights, then the realization:
//!
//! ```text
//! baryid-interpolant 1
//! feedthrough 0x0p+0
//! dc_gain 0x1p+0
//! points 1
//! 0x1p+1 0x1p+0 -0x1p+0   # ω (rad/s), Re G, Im G
//! weights 3
//! 0x1p+0 0x1p-1 0x0p+0
//! system
//! dims 3 1 1
//! ...
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::hexfloat;
use crate::barycentric::{
    assemble_model, build_bases, FrequencySample, InterpolantModel, InterpolationData, WeightRow,
};
use crate::error::{Error, Result, ResultExt};
use crate::lti::StateSpace;

pub const FILE_SCHEMA_VERSION: u32 = 1;
const STATE_SPACE_TAG: &str = "baryid-state-space";
const INTERPOLANT_TAG: &str = "baryid-interpolant";

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let row: Vec<String> = values.into_iter().map(hexfloat::format).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

fn push_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    out.push_str(name);
    out.push('\n');
    // a row with no columns would be a blank line; such matrices have no rows in the file
    if m.ncols() == 0 {
        return;
    }
    for r in 0..m.nrows() {
        push_row(out, m.row(r).iter().copied());
    }
}

fn push_system(out: &mut String, sys: &StateSpace) {
    out.push_str(&format!(
        "dims {} {} {}\n",
        sys.n_states(),
        sys.n_inputs(),
        sys.n_outputs()
    ));
    push_matrix(out, "A", sys.a());
    push_matrix(out, "B", sys.b());
    push_matrix(out, "C", sys.c());
    push_matrix(out, "D", sys.d());
}

pub fn state_space_to_string(sys: &StateSpace) -> String {
    let mut out = format!("{STATE_SPACE_TAG} {FILE_SCHEMA_VERSION}\n");
    push_system(&mut out, sys);
    out
}

pub fn model_to_string(model: &InterpolantModel) -> String {
    let data = model.data();
    let mut out = format!("{INTERPOLANT_TAG} {FILE_SCHEMA_VERSION}\n");
    out.push_str(&format!(
        "feedthrough {}\n",
        hexfloat::format(data.feedthrough())
    ));
    out.push_str(&format!("dc_gain {}\n", hexfloat::format(data.dc_gain())));
    out.push_str(&format!("points {}\n", data.len()));
    for p in data.points() {
        push_row(&mut out, [p.omega, p.value.re, p.value.im]);
    }
    out.push_str(&format!("weights {}\n", model.weights().len()));
    push_row(&mut out, model.weights().as_slice().iter().copied());
    out.push_str("system\n");
    push_system(&mut out, model.system());
    out
}

/// Line cursor over the significant lines of a file.
struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(line)
    }

    fn keyword(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (no, line) = self.next(key)?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Parse(format!(
                "line {no}: expected {key:?}, found {line:?}"
            )));
        }
        Ok(parts.collect())
    }

    fn values(&mut self, what: &str, count: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next(what)?;
        let v = line
            .split_whitespace()
            .map(hexfloat::parse)
            .collect::<Result<Vec<f64>>>()
            .context(|| format!("line {no}"))?;
        if v.len() != count {
            return Err(Error::Parse(format!(
                "line {no}: {what} needs {count} values, found {}",
                v.len()
            )));
        }
        Ok(v)
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        self.keyword(name)?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..if cols == 0 { 0 } else { rows } {
            data.extend(self.values(name, cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            Some((no, l)) => Err(Error::Parse(format!("line {no}: trailing content {l:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_usize(s: Option<&&str>, what: &str) -> Result<usize> {
    s.and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("missing or invalid {what}")))
}

fn header<'a>(lines: &mut Lines<'a>) -> Result<&'a str> {
    let (no, line) = lines.next("file header")?;
    let mut parts = line.split_whitespace();
    let tag = parts.next().unwrap_or("");
    if tag != STATE_SPACE_TAG && tag != INTERPOLANT_TAG {
        return Err(Error::Parse(format!(
            "line {no}: unknown file type {tag:?}"
        )));
    }
    let version = parse_usize(parts.next().as_ref(), "schema version")?;
    if version != FILE_SCHEMA_VERSION as usize {
        return Err(Error::Parse(format!(
            "{tag} schema version {version} is not supported (expected {FILE_SCHEMA_VERSION})"
        )));
    }
    Ok(tag)
}

fn parse_system(lines: &mut Lines) -> Result<StateSpace> {
    let dims = lines.keyword("dims")?;
    let n = parse_usize(dims.first(), "state count")?;
    let p = parse_usize(dims.get(1), "input count")?;
    let q = parse_usize(dims.get(2), "output count")?;
    let a = lines.matrix("A", n, n)?;
    let b = lines.matrix("B", n, p)?;
    let c = lines.matrix("C", q, n)?;
    let d = lines.matrix("D", q, p)?;
    StateSpace::new(a, b, c, d)
}

fn scalar(lines: &mut Lines, key: &str) -> Result<f64> {
    let v = lines.keyword(key)?;
    match v.as_slice() {
        [x] => hexfloat::parse(x),
        _ => Err(Error::Parse(format!("{key} needs one value"))),
    }
}

fn parse_model_body(lines: &mut Lines) -> Result<InterpolantModel> {
    let d = scalar(lines, "feedthrough")?;
    let k = scalar(lines, "dc_gain")?;
    let count = parse_usize(lines.keyword("points")?.first(), "point count")?;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let v = lines.values("point", 3)?;
        points.push(FrequencySample::new(v[0], Complex64::new(v[1], v[2])));
    }
    let width = parse_usize(lines.keyword("weights")?.first(), "weight count")?;
    let w = lines.values("weights", width)?;
    lines.keyword("system")?;
    let stored = parse_system(lines)?;
    let data = InterpolationData::new(d, k, points)?;
    let model = assemble_model(&build_bases(&data)?, &data, &WeightRow::new(w))?;
    if model.system() != &stored {
        return Err(Error::Parse(
            "stored realization does not match the one assembled from data and weights".into(),
        ));
    }
    Ok(model)
}

pub fn parse_state_space(text: &str) -> Result<StateSpace> {
    let mut lines = Lines::new(text);
    let sys = match header(&mut lines)? {
        STATE_SPACE_TAG => parse_system(&mut lines)?,
        _ => parse_model_body(&mut lines)?.system().clone(),
    };
    lines.finish()?;
    Ok(sys)
}

pub fn parse_model(text: &str) -> Result<InterpolantModel> {
    let mut lines = Lines::new(text);
    if header(&mut lines)? != INTERPOLANT_TAG {
        return Err(Error::Parse("expected an interpolant model file".into()));
    }
    let model = parse_model_body(&mut lines)?;
    lines.finish()?;
    Ok(model)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))
}

pub fn write_state_space(path: &Path, sys: &StateSpace) -> Result<()> {
    fs::write(path, state_space_to_string(sys))
        .map_err(|e| Error::from(e).context(path.display().to_string()))
}

pub fn write_model(path: &Path, model: &InterpolantModel) -> Result<()> {
    fs::write(path, model_to_string(model))
        .map_err(|e| Error::from(e).context(path.display().to_string()))
}

/// Loads a system from either file type; for a model file, its realization.
pub fn read_state_space(path: &Path) -> Result<StateSpace> {
    parse_state_space(&read(path)?).context(|| path.display().to_string())
}

pub fn read_model(path: &Path) -> Result<InterpolantModel> {
    parse_model(&read(path)?).context(|| path.display().to_string())
}
