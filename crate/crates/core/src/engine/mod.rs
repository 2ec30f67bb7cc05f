//! Fixed-step transient simulation of the closed loop.
//!
//! Each step holds the VCO frequency at the value set by the control voltage at the
//! start of the step, places VCO and divider edges exactly inside the step, and then
//! walks the step event by event (reference edges, divider edges, PFD reset) so that
//! the pump current is exactly piecewise constant for the filter update.

mod lock;
mod sweep;

pub use lock::{detect_lock, LockReport};
pub use sweep::{sweep_lock_range, sweep_lock_range_with, sweep_vco, LockRangePoint};

use std::f64::consts::TAU;

use thiserror::Error;

use crate::config::{validate_config, PllConfig, Violation};
use crate::cpf::{cp_current, lf_step_unchecked, ChargePumpParams, LoopFilterState};
use crate::divider::{div_step, DividerState};
use crate::pfd::PfdState;
use crate::vco::{vco_freq, VcoState};

pub const DEFAULT_DECIMATION: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<Violation>),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("trace decimation must be >= 1")]
    ZeroDecimation,
}

/// Step change of the reference frequency during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefStep {
    pub at_s: f64,
    pub delta_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Keep every `decimation`-th step as a trace row.
    pub decimation: usize,
    pub ref_step: Option<RefStep>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            decimation: DEFAULT_DECIMATION,
            ref_step: None,
        }
    }
}

/// Reference oscillator phase in turns.
///
/// Starts at `-1/N` turn so that its first edge coincides with the divider's first
/// output edge when the VCO already runs at `N·f_ref`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceClock {
    freq_hz: f64,
    offset_turns: f64,
    step: Option<RefStep>,
}

impl ReferenceClock {
    pub fn new(freq_hz: f64, divide_ratio: u32, step: Option<RefStep>) -> Self {
        Self {
            freq_hz,
            offset_turns: 1.0 / divide_ratio as f64,
            step,
        }
    }

    pub fn turns(&self, t: f64) -> f64 {
        let mut x = self.freq_hz * t - self.offset_turns;
        if let Some(s) = self.step {
            if t > s.at_s {
                x += s.delta_hz * (t - s.at_s);
            }
        }
        x
    }

    /// Time of the `k`-th rising edge (k = 0, 1, …).
    pub fn edge_time(&self, k: u64) -> f64 {
        let target = k as f64 + self.offset_turns;
        match self.step {
            Some(s) if target > self.freq_hz * s.at_s => {
                s.at_s + (target - self.freq_hz * s.at_s) / (self.freq_hz + s.delta_hz)
            }
            _ => target / self.freq_hz,
        }
    }
}

/// One sampled row of a simulation trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t_s: f64,
    pub v_ctrl_v: f64,
    pub i_cp_a: f64,
    pub up: bool,
    pub dn: bool,
    pub f_vco_hz: f64,
    /// Reference minus divided feedback phase, wrapped to (-π, π].
    pub phase_err_rad: f64,
    pub div_level: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    /// Every reference rising edge, full resolution.
    pub ref_edges: Vec<f64>,
    /// Every divider output rising edge, full resolution.
    pub div_edges: Vec<f64>,
}

impl SimTrace {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Wraps a phase in turns to (-0.5, 0.5] and converts to radians.
fn wrap_turns_to_rad(turns: f64) -> f64 {
    let mut w = turns - turns.round();
    if w <= -0.5 {
        w += 1.0;
    }
    TAU * w
}

/// Runs the loop from cold start with default options and evaluates lock.
pub fn simulate(cfg: &PllConfig) -> Result<(SimTrace, LockReport), EngineError> {
    simulate_with(cfg, &SimOptions::default())
}

pub fn simulate_with(
    cfg: &PllConfig,
    opts: &SimOptions,
) -> Result<(SimTrace, LockReport), EngineError> {
    let trace = run_transient(cfg, opts)?;
    let report = detect_lock(&trace, cfg);
    Ok((trace, report))
}

/// Integrates the loop and returns the trace without judging lock.
pub fn run_transient(cfg: &PllConfig, opts: &SimOptions) -> Result<SimTrace, EngineError> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(EngineError::InvalidConfig(violations));
    }
    if opts.decimation == 0 {
        return Err(EngineError::ZeroDecimation);
    }

    let n = cfg.divide_ratio;
    let (r, c1, c2) = (cfg.r_ohm, cfg.c1_f, cfg.c2_f);
    let pump = ChargePumpParams {
        i_pump_a: cfg.i_pump_a,
        leakage_a: cfg.leakage_a,
    };
    let clock = ReferenceClock::new(cfg.ref_freq_hz, n, opts.ref_step);
    let dt = cfg.dt_s;
    let steps = (cfg.t_end_s / dt - 1e-9).ceil().max(1.0) as u64;

    let mut filter = LoopFilterState::at_rest(cfg.v_ctrl_init_v);
    let mut vco = VcoState::new();
    let mut divider = DividerState::new();
    let mut pfd = PfdState::neutral();

    let mut next_ref_k = 0u64;
    let mut next_ref_t = clock.edge_time(0);

    let mut trace = SimTrace {
        rows: Vec::with_capacity((steps as usize) / opts.decimation + 1),
        ..SimTrace::default()
    };
    let mut vco_edges: Vec<f64> = Vec::new();
    let mut div_edges: Vec<f64> = Vec::new();

    for step in 0..steps {
        let t0 = step as f64 * dt;
        let t1 = (step + 1) as f64 * dt;

        let f_vco = vco_freq(&cfg.vco_curve, filter.v_out);
        vco_edges.clear();
        vco.advance(f_vco, t1 - t0, &mut vco_edges);
        div_edges.clear();
        for &offset in &vco_edges {
            let (next, rose) = div_step(divider, true, n);
            divider = next;
            if rose {
                div_edges.push((t0 + offset).min(t1));
            }
        }

        let mut t = t0;
        let mut di = 0;
        loop {
            let mut te = t1;
            let mut has_event = false;
            if next_ref_t <= te {
                te = next_ref_t;
                has_event = true;
            }
            if di < div_edges.len() && div_edges[di] <= te {
                te = div_edges[di];
                has_event = true;
            }
            if let Some(remaining) = pfd.time_to_reset() {
                if t + remaining <= te {
                    te = t + remaining;
                    has_event = true;
                }
            }
            let te = te.max(t);
            if te > t {
                let i = cp_current(pfd.up_active, pfd.down_active, &pump);
                filter = lf_step_unchecked(filter, i, te - t, r, c1, c2);
            }
            pfd.advance(te - t);
            t = te;
            if !has_event {
                break;
            }
            let ref_edge = next_ref_t <= te;
            if ref_edge {
                trace.ref_edges.push(next_ref_t);
                next_ref_k += 1;
                next_ref_t = clock.edge_time(next_ref_k);
            }
            let div_edge = di < div_edges.len() && div_edges[di] <= te;
            if div_edge {
                trace.div_edges.push(div_edges[di]);
                di += 1;
            }
            if ref_edge || div_edge {
                pfd.apply_edges(ref_edge, div_edge, cfg.pfd_reset_delay_s);
            }
        }
        filter = filter.clamped(cfg.vdd_v);

        if (step + 1) % opts.decimation as u64 == 0 {
            let fb_turns = (vco.turns() - 1.0) / n as f64;
            trace.rows.push(TraceRow {
                t_s: t1,
                v_ctrl_v: filter.v_out,
                i_cp_a: cp_current(pfd.up_active, pfd.down_active, &pump),
                up: pfd.up_active,
                dn: pfd.down_active,
                f_vco_hz: vco_freq(&cfg.vco_curve, filter.v_out),
                phase_err_rad: wrap_turns_to_rad(clock.turns(t1) - fb_turns),
                div_level: divider.level,
            });
        }
    }
    Ok(trace)
}

/// Unwrapped reference-minus-feedback phase (rad) at every trace row, reconstructed
/// by removing 2π jumps between consecutive rows.
pub fn unwrapped_phase_error(trace: &SimTrace) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.rows.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for row in &trace.rows {
        if let Some(p) = prev {
            let jump = row.phase_err_rad - p;
            offset -= TAU * (jump / TAU).round();
        }
        prev = Some(row.phase_err_rad);
        out.push(row.phase_err_rad + offset);
    }
    out
}
