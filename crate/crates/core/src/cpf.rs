//! Charge pump and second-order passive loop filter.
//!
//! Filter topology: a series R-C1 branch in parallel with a shunt C2, both to ground.
//! The pump current is injected at the shared output node, whose voltage drives the
//! VCO. For piecewise-constant current the two-state system has a closed-form
//! solution, so [`lf_step`] is exact for any step length.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("non-finite filter input: {0}")]
    NonFinite(&'static str),
    #[error("invalid filter parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("angular frequency must be > 0, got {0}")]
    NonPositiveFrequency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargePumpParams {
    pub i_pump_a: f64,
    /// Drawn continuously from the output node.
    pub leakage_a: f64,
}

impl ChargePumpParams {
    /// Leakage above 1% of the pump current distorts the lock point noticeably.
    pub fn leakage_is_excessive(&self) -> bool {
        self.leakage_a > self.i_pump_a / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopFilterComponents {
    pub r_ohm: f64,
    pub c1_f: f64,
    pub c2_f: f64,
}

/// Voltages of the two capacitor nodes; the whole analog state of the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFilterState {
    /// Across the series capacitor C1.
    pub v_c1: f64,
    /// Output node across C2; the VCO control voltage.
    pub v_out: f64,
}

impl LoopFilterState {
    pub fn at_rest(v: f64) -> Self {
        Self { v_c1: v, v_out: v }
    }

    /// Stored charge `c1·v_c1 + c2·v_out`.
    pub fn charge(&self, c1: f64, c2: f64) -> f64 {
        c1 * self.v_c1 + c2 * self.v_out
    }

    /// Pins the output node to `[0, vdd]`; the rail absorbs the excess charge on C2
    /// and C1 keeps its own.
    pub fn clamped(self, vdd: f64) -> Self {
        Self {
            v_c1: self.v_c1,
            v_out: self.v_out.clamp(0.0, vdd),
        }
    }
}

/// Pump output current: `+i_pump` for UP alone, `-i_pump` for DOWN alone, zero for
/// neither or both; leakage is always drawn.
pub fn cp_current(up: bool, down: bool, params: &ChargePumpParams) -> f64 {
    let pump = match (up, down) {
        (true, false) => params.i_pump_a,
        (false, true) => -params.i_pump_a,
        _ => 0.0,
    };
    pump - params.leakage_a
}

/// Advances the filter by `dt` under constant input current `i_in`.
///
/// Total charge `q = c1·v_c1 + c2·v_out` integrates the current directly, while the
/// branch voltage `d = v_out - v_c1` relaxes with time constant
/// `τ = r·c1·c2/(c1 + c2)` toward `i_in·r·c1/(c1 + c2)`. Both have exact solutions.
pub fn lf_step(
    state: LoopFilterState,
    i_in: f64,
    dt: f64,
    r: f64,
    c1: f64,
    c2: f64,
) -> Result<LoopFilterState, FilterError> {
    if !state.v_c1.is_finite() || !state.v_out.is_finite() {
        return Err(FilterError::NonFinite("state"));
    }
    if !i_in.is_finite() {
        return Err(FilterError::NonFinite("i_in"));
    }
    if !dt.is_finite() || dt < 0.0 {
        return Err(FilterError::InvalidParameter {
            name: "dt",
            value: dt,
        });
    }
    if !r.is_finite() || r < 0.0 {
        return Err(FilterError::InvalidParameter {
            name: "r",
            value: r,
        });
    }
    if !c1.is_finite() || c1 <= 0.0 {
        return Err(FilterError::InvalidParameter {
            name: "c1",
            value: c1,
        });
    }
    if !c2.is_finite() || c2 < 0.0 {
        return Err(FilterError::InvalidParameter {
            name: "c2",
            value: c2,
        });
    }
    Ok(lf_step_unchecked(state, i_in, dt, r, c1, c2))
}

/// [`lf_step`] without argument checks, for the inner simulation loop.
#[inline]
pub fn lf_step_unchecked(
    state: LoopFilterState,
    i_in: f64,
    dt: f64,
    r: f64,
    c1: f64,
    c2: f64,
) -> LoopFilterState {
    let c_total = c1 + c2;
    let dq = i_in * dt;
    let d0 = state.v_out - state.v_c1;
    let d_inf = i_in * r * c1 / c_total;
    let tau = r * c1 * c2 / c_total;
    let dd = if tau > 0.0 {
        // (d_inf - d0)·(1 - e^{-dt/τ})
        -(d_inf - d0) * (-dt / tau).exp_m1()
    } else {
        d_inf - d0
    };
    LoopFilterState {
        v_c1: state.v_c1 + (dq - c2 * dd) / c_total,
        v_out: state.v_out + (dq + c1 * dd) / c_total,
    }
}

/// Transimpedance `Z(jω)` from pump current to output voltage.
pub fn lf_impedance(omega: f64, r: f64, c1: f64, c2: f64) -> Result<Complex64, FilterError> {
    if !omega.is_finite() || omega <= 0.0 {
        return Err(FilterError::NonPositiveFrequency(omega));
    }
    let jw = Complex64::new(0.0, omega);
    let c_total = c1 + c2;
    let tau_p = r * c1 * c2 / c_total;
    Ok((1.0 + jw * r * c1) / (jw * c_total * (1.0 + jw * tau_p)))
}
