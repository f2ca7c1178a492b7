//! Decimal text formats: columnar trajectory files, CSV and JSON.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::msflow::{TrajectoryKind, TrajectorySample};
use crate::spectral::{EnergyRecord, SpectralBasis, SpectralField};

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header-tagged trajectory data as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub meta: Vec<(String, String)>,
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Rebuild fields on `basis`; the column count must match.
    pub fn into_trajectory(self, basis: &Arc<SpectralBasis>) -> Result<TrajectorySample<SpectralField>> {
        let states = self
            .rows
            .into_iter()
            .map(|r| SpectralField::new(basis.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        TrajectorySample::new(self.times, states, self.kind)
    }
}

fn kind_name(kind: TrajectoryKind) -> &'static str {
    match kind {
        TrajectoryKind::ForwardOnly => "forward_only",
        TrajectoryKind::TwoSided => "two_sided",
    }
}

pub fn format_trajectory(traj: &TrajectorySample<SpectralField>, meta: &[(&str, String)]) -> String {
    let m = traj.first_state().coeffs().len();
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = writeln!(out, "kind={}", kind_name(traj.kind()));
    let _ = writeln!(out, "modes={m}");
    let _ = writeln!(out, "rows={}", traj.len());
    out.push_str("columns=t");
    for j in 1..=m {
        let _ = write!(out, ",a_{j}");
    }
    out.push('\n');
    for (t, s) in traj.times().iter().zip(traj.states()) {
        out.push_str(&fmt_f64(*t));
        for a in s.coeffs() {
            out.push(',');
            out.push_str(&fmt_f64(*a));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(
    path: &Path,
    traj: &TrajectorySample<SpectralField>,
    meta: &[(&str, String)],
) -> Result<()> {
    fs::write(path, format_trajectory(traj, meta))?;
    Ok(())
}

pub fn parse_trajectory(text: &str) -> Result<TrajectoryTable> {
    let mut meta = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut columns = None;
    for (no, line) in lines.by_ref() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value header", no + 1)))?;
        if k == "columns" {
            columns = Some(v.split(',').count());
            break;
        }
        meta.push((k.to_string(), v.to_string()));
    }
    let width = columns.ok_or_else(|| Error::Parse("missing columns= header".into()))?;
    let kind = match meta.iter().find(|(k, _)| k == "kind").map(|(_, v)| v.as_str()) {
        Some("two_sided") => TrajectoryKind::TwoSided,
        Some("forward_only") | None => TrajectoryKind::ForwardOnly,
        Some(other) => return Err(Error::Parse(format!("unknown trajectory kind `{other}`"))),
    };
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        if vals.len() != width {
            return Err(Error::Parse(format!(
                "line {}: {} columns, header declares {width}",
                no + 1,
                vals.len()
            )));
        }
        times.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok(TrajectoryTable { meta, kind, times, rows })
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryTable> {
    parse_trajectory(&fs::read_to_string(path)?)
}

pub const ENERGY_COLUMNS: &str = "t,E,h1_sq,potential,forcing,dissipation";

pub fn format_energy_csv(series: &[EnergyRecord]) -> String {
    let mut out = String::from(ENERGY_COLUMNS);
    out.push('\n');
    for r in series {
        let row = [r.t, r.energy, r.h1_sq, r.potential, r.forcing, r.dissipation];
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_energy_csv(path: &Path, series: &[EnergyRecord]) -> Result<()> {
    fs::write(path, format_energy_csv(series))?;
    Ok(())
}

/// Generic CSV with a header row, every value at 17 significant digits.
pub fn format_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Pretty JSON printer that writes every float as `fmt_f64` does.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Indented JSON with floats at 17 significant digits; non-finite floats
/// become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}
