use rayon::prelude::*;
use serde::Serialize;

use super::{simulate, EngineError};
use crate::config::PllConfig;
use crate::vco::{vco_freq, VcoTuningCurve};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockRangePoint {
    pub f_ref_hz: f64,
    pub locked: bool,
    pub lock_time_s: Option<f64>,
    pub f_out_steady_hz: f64,
    pub reason: Option<String>,
}

/// `n` points from `lo` to `hi` inclusive.
fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 / (n - 1) as f64))
        .collect()
}

fn check_grid(lo: f64, hi: f64, n: usize) -> Result<(), EngineError> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(EngineError::InvalidSweep(format!(
            "need lo < hi, got [{lo}, {hi}]"
        )));
    }
    if n < 2 {
        return Err(EngineError::InvalidSweep(format!(
            "need at least 2 points, got {n}"
        )));
    }
    Ok(())
}

/// Lock verdict for each reference frequency on a uniform grid, on all cores.
pub fn sweep_lock_range(
    cfg: &PllConfig,
    f_lo: f64,
    f_hi: f64,
    n_points: usize,
) -> Result<Vec<LockRangePoint>, EngineError> {
    sweep_lock_range_with(cfg, &uniform_grid_checked(f_lo, f_hi, n_points)?, None)
}

fn uniform_grid_checked(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, EngineError> {
    check_grid(lo, hi, n)?;
    Ok(uniform_grid(lo, hi, n))
}

/// Runs an independent cold-start simulation per reference frequency.
///
/// `threads` caps the worker count (`None` uses every core). Results follow the
/// order of `freqs`. Points whose config fails validation come back unlocked.
pub fn sweep_lock_range_with(
    cfg: &PllConfig,
    freqs: &[f64],
    threads: Option<usize>,
) -> Result<Vec<LockRangePoint>, EngineError> {
    let run_point = |&f_ref: &f64| {
        let point_cfg = PllConfig {
            ref_freq_hz: f_ref,
            ..cfg.clone()
        };
        match simulate(&point_cfg) {
            Ok((_, report)) => LockRangePoint {
                f_ref_hz: f_ref,
                locked: report.locked,
                lock_time_s: report.lock_time_s,
                f_out_steady_hz: report.f_out_steady_hz,
                reason: report.reason,
            },
            Err(e) => LockRangePoint {
                f_ref_hz: f_ref,
                locked: false,
                lock_time_s: None,
                f_out_steady_hz: f64::NAN,
                reason: Some(e.to_string()),
            },
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| EngineError::InvalidSweep(format!("thread pool: {e}")))?;
    Ok(pool.install(|| freqs.par_iter().map(run_point).collect()))
}

/// Tabulates the tuning curve on a uniform voltage grid.
pub fn sweep_vco(
    curve: &VcoTuningCurve,
    v_lo: f64,
    v_hi: f64,
    n_points: usize,
) -> Result<Vec<(f64, f64)>, EngineError> {
    Ok(uniform_grid_checked(v_lo, v_hi, n_points)?
        .into_iter()
        .map(|v| (v, vco_freq(curve, v)))
        .collect())
}
