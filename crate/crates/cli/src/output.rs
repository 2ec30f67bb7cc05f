//! Files the CLI writes: CSV tables, gnuplot scripts and the run manifest.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pllforge::engine::LockRangePoint;
use pllforge::{PllConfig, SimTrace};
use serde::Serialize;

use crate::CliError;

pub const TRACE_HEADER: [&str; 8] = [
    "t_s",
    "v_ctrl_v",
    "i_cp_a",
    "up",
    "dn",
    "f_vco_hz",
    "phase_err_rad",
    "div_level",
];

/// Shortest decimal that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_table<R>(path: &Path, header: &[&str], rows: R) -> Result<usize, CliError>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let wrap = |e: csv::Error| io_err(path)(e.into());
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    let mut count = 0;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
        count += 1;
    }
    w.flush().map_err(io_err(path))?;
    Ok(count)
}

/// Writes the sampled rows of `trace` and returns how many were written.
///
/// Floats use the shortest round-trip representation and flags are 0/1, so the file
/// is byte-stable across runs and re-reads to the exact values.
pub fn write_trace_csv(trace: &SimTrace, path: &Path) -> Result<usize, CliError> {
    let rows = trace.rows.iter().map(|r| {
        vec![
            num(r.t_s),
            num(r.v_ctrl_v),
            num(r.i_cp_a),
            bit(r.up).into(),
            bit(r.dn).into(),
            num(r.f_vco_hz),
            num(r.phase_err_rad),
            bit(r.div_level).into(),
        ]
    });
    write_table(path, &TRACE_HEADER, rows)
}

pub fn write_vco_sweep_csv(rows: &[(f64, f64)], path: &Path) -> Result<usize, CliError> {
    write_table(
        path,
        &["v_ctrl_v", "f_vco_hz"],
        rows.iter().map(|&(v, f)| vec![num(v), num(f)]),
    )
}

pub fn write_lock_range_csv(points: &[LockRangePoint], path: &Path) -> Result<usize, CliError> {
    let rows = points.iter().map(|p| {
        vec![
            num(p.f_ref_hz),
            bit(p.locked).into(),
            p.lock_time_s.map(num).unwrap_or_default(),
            num(p.f_out_steady_hz),
            p.reason.clone().unwrap_or_default(),
        ]
    });
    write_table(
        path,
        &[
            "f_ref_hz",
            "locked",
            "lock_time_s",
            "f_out_steady_hz",
            "reason",
        ],
        rows,
    )
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Acquisition,
    TuningCurve,
    LockRange,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [Self::Acquisition, Self::TuningCurve, Self::LockRange];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Acquisition => "acquisition",
            Self::TuningCurve => "tuning_curve",
            Self::LockRange => "lock_range",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CliError::UnknownPlotKind(s.to_string()))
    }
}

/// Double-quoted gnuplot string literal.
fn quoted(path: &Path) -> String {
    let s = path.display().to_string();
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Writes a gnuplot script that renders `csv_path` as a PNG next to `path`.
pub fn emit_plot_script(csv_path: &Path, kind: &str, path: &Path) -> Result<(), CliError> {
    let kind: PlotKind = kind.parse()?;
    let csv = quoted(csv_path);
    let png = quoted(&path.with_extension("png"));
    let body = match kind {
        PlotKind::Acquisition => format!(
            "set multiplot layout 2,1\n\
             set xlabel \"Time (s)\"\n\
             set ylabel \"Vctrl (V)\"\n\
             plot {csv} using \"t_s\":\"v_ctrl_v\" with lines title \"v_ctrl\"\n\
             set ylabel \"Frequency (Hz)\"\n\
             plot {csv} using \"t_s\":\"f_vco_hz\" with lines title \"f_vco\"\n\
             unset multiplot\n"
        ),
        PlotKind::TuningCurve => format!(
            "set xlabel \"Vctrl (V)\"\n\
             set ylabel \"Frequency (Hz)\"\n\
             plot {csv} using \"v_ctrl_v\":\"f_vco_hz\" with linespoints title \"f_vco\"\n"
        ),
        PlotKind::LockRange => format!(
            "set multiplot layout 2,1\n\
             set xlabel \"Reference frequency (Hz)\"\n\
             set ylabel \"Locked\"\n\
             set yrange [-0.1:1.1]\n\
             plot {csv} using \"f_ref_hz\":\"locked\" with steps title \"locked\"\n\
             set autoscale y\n\
             set ylabel \"Output frequency (Hz)\"\n\
             plot {csv} using \"f_ref_hz\":\"f_out_steady_hz\" with points title \"f_out\"\n\
             unset multiplot\n"
        ),
    };
    let script = format!(
        "# {kind} plot generated by pllforge; run with `gnuplot {}`\n\
         set datafile separator \",\"\n\
         set key autotitle columnhead\n\
         set terminal png size 1000,700\n\
         set output {png}\n\
         set grid\n\
         {body}",
        path.display()
    );
    fs::write(path, script).map_err(io_err(path))
}

/// Record of one CLI invocation, written after every other output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: PllConfig,
    /// Every file the run created, the manifest itself last.
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub wall_clock_s: f64,
}
