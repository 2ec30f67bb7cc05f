//! Three-state phase-frequency detector.
//!
//! Two rising-edge flip-flops (UP on the reference, DOWN on the divided feedback)
//! share an AND-gate reset. The reset path has a finite delay, so whenever both
//! flags are raised they stay raised together for exactly `reset_delay` before
//! clearing. That overlap keeps a nonzero pulse near zero phase error.

use std::f64::consts::TAU;

use thiserror::Error;

/// Remaining reset times at or below this are treated as expired (seconds).
const RESET_EPSILON_S: f64 = 1e-18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfdError {
    #[error("phase difference {0} rad is outside the single-cycle linear range (-2π, 2π)")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PfdState {
    pub up_active: bool,
    pub down_active: bool,
    /// Time left before the reset clears both flags; only meaningful while both are set.
    pub reset_timer: f64,
}

impl PfdState {
    pub fn neutral() -> Self {
        Self::default()
    }

    pub fn in_reset(&self) -> bool {
        self.up_active && self.down_active
    }

    /// Latches rising edges. Edges arriving while the reset is already pending are lost.
    pub fn apply_edges(&mut self, ref_edge: bool, div_edge: bool, reset_delay: f64) {
        if self.in_reset() {
            return;
        }
        self.up_active |= ref_edge;
        self.down_active |= div_edge;
        if self.in_reset() {
            self.reset_timer = reset_delay;
            if self.reset_timer <= RESET_EPSILON_S {
                self.clear();
            }
        }
    }

    /// Lets `dt` seconds pass; completes a pending reset when its delay has elapsed.
    pub fn advance(&mut self, dt: f64) {
        if self.in_reset() {
            self.reset_timer -= dt;
            if self.reset_timer <= RESET_EPSILON_S {
                self.clear();
            }
        }
    }

    /// Time until the pending reset fires, if any.
    pub fn time_to_reset(&self) -> Option<f64> {
        self.in_reset().then_some(self.reset_timer)
    }

    fn clear(&mut self) {
        self.up_active = false;
        self.down_active = false;
        self.reset_timer = 0.0;
    }
}

/// One detector step: edges are latched at the start of the step, then `dt` elapses.
///
/// Returns the post-step state together with its `(up, down)` outputs.
pub fn pfd_step(
    state: PfdState,
    ref_edge: bool,
    div_edge: bool,
    dt: f64,
    reset_delay: f64,
) -> (PfdState, bool, bool) {
    let mut next = state;
    next.apply_edges(ref_edge, div_edge, reset_delay);
    next.advance(dt);
    (next, next.up_active, next.down_active)
}

/// Ideal per-period average of `UP - DOWN` for a phase lead `delta_phi` of the reference.
pub fn pfd_average_duty(delta_phi: f64) -> Result<f64, PfdError> {
    if delta_phi.is_nan() || delta_phi.abs() >= TAU {
        return Err(PfdError::OutOfRange(delta_phi));
    }
    Ok(delta_phi / TAU)
}
