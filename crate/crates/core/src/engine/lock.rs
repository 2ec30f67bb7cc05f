use std::f64::consts::TAU;

use serde::Serialize;

use super::SimTrace;
use crate::config::PllConfig;

/// Control voltages within this distance of a rail count as railed (V).
const RAIL_MARGIN_V: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockReport {
    pub locked: bool,
    /// Start of the final sustained run of in-lock reference periods.
    pub lock_time_s: Option<f64>,
    pub f_out_steady_hz: f64,
    pub v_ctrl_steady_v: f64,
    pub residual_phase_err_rad: f64,
    pub reason: Option<String>,
}

/// Per-reference-period lock measurements.
struct Period {
    start: f64,
    freq_ok: bool,
    phase_err: f64,
}

fn measure_periods(trace: &SimTrace) -> Vec<(Period, f64)> {
    let refs = &trace.ref_edges;
    let divs = &trace.div_edges;
    let mut out = Vec::with_capacity(refs.len().saturating_sub(1));
    for w in refs.windows(2) {
        let (start, end) = (w[0], w[1]);
        let f_ref = 1.0 / (end - start);
        // most recent divider interval completed by the end of this period
        let q = divs.partition_point(|&d| d <= end);
        let f_div = if q >= 2 {
            1.0 / (divs[q - 1] - divs[q - 2])
        } else {
            0.0
        };
        // divider edge nearest to the reference edge opening the period
        let idx = divs.partition_point(|&d| d < start);
        let nearest = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter_map(|i| divs.get(i).copied())
            .min_by(|a, b| (a - start).abs().total_cmp(&(b - start).abs()));
        let phase_err = match nearest {
            Some(d) => TAU * f_ref * (d - start),
            None => f64::INFINITY,
        };
        out.push((
            Period {
                start,
                freq_ok: false,
                phase_err,
            },
            f_div / f_ref - 1.0,
        ));
    }
    out
}

/// Judges lock from the full-resolution edge lists.
///
/// A reference period is in lock when the divided frequency is within
/// `lock_freq_tol` of the reference and the edge phase error is within
/// `lock_phase_tol_rad`. The loop is locked when the run ends with at least
/// `lock_hold_cycles` such periods in a row; lock time is the start of that run.
pub fn detect_lock(trace: &SimTrace, cfg: &PllConfig) -> LockReport {
    let n = cfg.divide_ratio as f64;
    let hold = cfg.lock_hold_cycles.max(1) as usize;
    let mut periods = measure_periods(trace);
    for (p, freq_err) in periods.iter_mut() {
        p.freq_ok = freq_err.abs() <= cfg.lock_freq_tol;
    }
    let in_lock = |p: &Period| p.freq_ok && p.phase_err.abs() <= cfg.lock_phase_tol_rad;
    let run = periods.iter().rev().take_while(|(p, _)| in_lock(p)).count();

    let refs = &trace.ref_edges;
    let divs = &trace.div_edges;
    let window = hold.min(periods.len());
    let window_start = if window > 0 {
        refs[refs.len() - 1 - window]
    } else {
        f64::NEG_INFINITY
    };

    // steady-state output frequency from the last `window` divider intervals
    let last_ref = refs.last().copied().unwrap_or(f64::INFINITY);
    let q = divs.partition_point(|&d| d <= last_ref);
    let span = window.min(q.saturating_sub(1));
    let f_out_steady_hz = if span > 0 {
        n * span as f64 / (divs[q - 1] - divs[q - 1 - span])
    } else {
        trace.rows.last().map_or(0.0, |r| r.f_vco_hz)
    };

    let steady_rows: Vec<f64> = trace
        .rows
        .iter()
        .filter(|r| r.t_s >= window_start)
        .map(|r| r.v_ctrl_v)
        .collect();
    let v_ctrl_steady_v = if steady_rows.is_empty() {
        trace.rows.last().map_or(cfg.v_ctrl_init_v, |r| r.v_ctrl_v)
    } else {
        steady_rows.iter().sum::<f64>() / steady_rows.len() as f64
    };
    let residual_phase_err_rad = periods[periods.len() - window..]
        .iter()
        .map(|(p, _)| p.phase_err.abs())
        .fold(0.0, f64::max);

    let f_ref_last = if refs.len() >= 2 {
        1.0 / (refs[refs.len() - 1] - refs[refs.len() - 2])
    } else {
        cfg.ref_freq_hz
    };
    let steady_ok = (f_out_steady_hz / (n * f_ref_last) - 1.0).abs() <= cfg.lock_freq_tol;

    let mut report = LockReport {
        locked: false,
        lock_time_s: None,
        f_out_steady_hz,
        v_ctrl_steady_v,
        residual_phase_err_rad,
        reason: None,
    };
    if periods.is_empty() {
        report.reason = Some("too few reference edges to measure lock".into());
        return report;
    }
    if run >= hold && steady_ok {
        report.locked = true;
        report.lock_time_s = Some(periods[periods.len() - run].0.start);
        return report;
    }

    let v_end = trace.rows.last().map_or(cfg.v_ctrl_init_v, |r| r.v_ctrl_v);
    report.reason = Some(if v_end >= cfg.vdd_v - RAIL_MARGIN_V {
        format!("control voltage railed at vdd ({} V)", cfg.vdd_v)
    } else if v_end <= RAIL_MARGIN_V {
        "control voltage railed at ground (0 V)".to_string()
    } else if run > 0 {
        format!("lock criteria held for only {run} of {hold} final reference periods")
    } else {
        let (last, freq_err) = &periods[periods.len() - 1];
        format!(
            "not in lock at end of run: divided-frequency error {:.3e}, phase error {:.3e} rad",
            freq_err, last.phase_err
        )
    });
    report
}
