//! Continuous-time linear model of the charge-pump loop.
//!
//! Open-loop gain: `G(s) = k_pd · Z(s) · k_v / (N·s)`, with `Z` the loop-filter
//! transimpedance. The loop is type II (integrators in the VCO and in C1) and third
//! order once the shunt capacitor C2 is included.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::PllConfig;
use crate::cpf::{lf_impedance, LoopFilterComponents};
use crate::vco::{vco_gain_local, vco_voltage_for, VcoError};

/// Longest simulated horizon for settling, in units of `1/ωn`.
const MAX_SETTLE_HORIZON: f64 = 1e6;
/// Samples per natural period when scanning a response for settling.
const SETTLE_SAMPLES_PER_PERIOD: f64 = 400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid loop parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("no unity-gain crossover in [{lo:.6e}, {hi:.6e}] rad/s")]
    NoCrossover { lo: f64, hi: f64 },
    #[error("time grid must be nonnegative and increasing (index {0})")]
    InvalidGrid(usize),
    #[error("response did not settle within {horizon_s:.3e} s")]
    NoSettle { horizon_s: f64 },
    #[error("operating point: {0}")]
    OperatingPoint(#[from] VcoError),
}

fn require_positive(name: &'static str, value: f64) -> Result<(), AnalysisError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

/// Small-signal gains and filter components of the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearLoopParams {
    /// Detector/pump gain, A/rad.
    pub k_pd: f64,
    /// VCO gain, rad/s/V.
    pub k_v: f64,
    pub n: u32,
    pub r_ohm: f64,
    pub c1_f: f64,
    pub c2_f: f64,
}

impl LinearLoopParams {
    pub fn new(
        k_pd: f64,
        k_v: f64,
        n: u32,
        r_ohm: f64,
        c1_f: f64,
        c2_f: f64,
    ) -> Result<Self, AnalysisError> {
        require_positive("k_pd", k_pd)?;
        require_positive("k_v", k_v)?;
        require_positive("n", n as f64)?;
        require_positive("r", r_ohm)?;
        require_positive("c1", c1_f)?;
        require_positive("c2", c2_f)?;
        if c2_f >= c1_f {
            return Err(AnalysisError::InvalidParameter {
                name: "c2",
                value: c2_f,
                reason: "must be smaller than c1",
            });
        }
        Ok(Self {
            k_pd,
            k_v,
            n,
            r_ohm,
            c1_f,
            c2_f,
        })
    }

    /// Linearizes a configuration around its locked operating point `N·f_ref`, using
    /// the local slope of the tuning curve there.
    pub fn from_config(cfg: &PllConfig) -> Result<Self, AnalysisError> {
        let f_out = cfg.divide_ratio as f64 * cfg.ref_freq_hz;
        let v_op = vco_voltage_for(&cfg.vco_curve, f_out)?;
        let kvco = vco_gain_local(&cfg.vco_curve, v_op)?;
        Self::new(
            cfg.i_pump_a / TAU,
            TAU * kvco,
            cfg.divide_ratio,
            cfg.r_ohm,
            cfg.c1_f,
            cfg.c2_f,
        )
    }

    /// `ωn = sqrt(k_pd·k_v / (N·c1))`, ignoring C2.
    pub fn natural_freq(&self) -> f64 {
        (self.k_pd * self.k_v / (self.n as f64 * self.c1_f)).sqrt()
    }

    /// `ζ = r·c1·ωn / 2`, ignoring C2.
    pub fn damping(&self) -> f64 {
        self.r_ohm * self.c1_f * self.natural_freq() / 2.0
    }

    pub fn open_loop_gain(&self, omega: f64) -> Complex64 {
        let z = lf_impedance(omega, self.r_ohm, self.c1_f, self.c2_f)
            .expect("omega checked positive by callers");
        self.k_pd * z * self.k_v / (self.n as f64 * Complex64::new(0.0, omega))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// rad/s
    pub natural_freq: f64,
    pub damping: f64,
    /// Unity-gain crossover, rad/s.
    pub crossover_freq: f64,
    /// Degrees.
    pub phase_margin: f64,
    pub stable: bool,
}

/// Direct inversion of the two-pole design equations for `(r, c1, c2)`.
///
/// `kvco_local` is in Hz/V and `f_n` in Hz. `c2 = c1 / ripple_ratio`.
pub fn synthesize_loop(
    i_pump: f64,
    kvco_local: f64,
    n: u32,
    f_n: f64,
    zeta: f64,
    ripple_ratio: f64,
) -> Result<LoopFilterComponents, AnalysisError> {
    require_positive("i_pump", i_pump)?;
    require_positive("kvco_local", kvco_local)?;
    require_positive("n", n as f64)?;
    require_positive("f_n", f_n)?;
    require_positive("zeta", zeta)?;
    if !ripple_ratio.is_finite() || ripple_ratio < 5.0 {
        return Err(AnalysisError::InvalidParameter {
            name: "ripple_ratio",
            value: ripple_ratio,
            reason: "must be >= 5",
        });
    }
    let k_pd = i_pump / TAU;
    let k_v = TAU * kvco_local;
    let wn = TAU * f_n;
    let c1 = k_pd * k_v / (n as f64 * wn * wn);
    let r = 2.0 * zeta / (wn * c1);
    Ok(LoopFilterComponents {
        r_ohm: r,
        c1_f: c1,
        c2_f: c1 / ripple_ratio,
    })
}

/// Natural frequency, damping, crossover and phase margin of the open loop.
pub fn stability_report(p: &LinearLoopParams) -> Result<StabilityReport, AnalysisError> {
    let wn = p.natural_freq();
    let (lo, hi) = (wn / 100.0, wn * 100.0);
    let excess = |w: f64| p.open_loop_gain(w).norm() - 1.0;
    if !(excess(lo) > 0.0 && excess(hi) < 0.0) {
        return Err(AnalysisError::NoCrossover { lo, hi });
    }
    // |G| falls monotonically across the bracket; bisect in log frequency
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if excess(mid.exp()) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let wc = (0.5 * (a + b)).exp();
    let phase_margin = 180.0 + p.open_loop_gain(wc).arg().to_degrees();
    Ok(StabilityReport {
        natural_freq: wn,
        damping: p.damping(),
        crossover_freq: wc,
        phase_margin,
        stable: phase_margin > 0.0,
    })
}

/// Phase-error dynamics `E(s) = Δω (1 + sτ3) / (τ3 s³ + s² + Aτ2 s + A)` in time
/// scaled by `ωn`, as a controllable canonical state-space system.
struct ErrorDynamics {
    wn: f64,
    a: Matrix3<f64>,
    c: Vector3<f64>,
}

impl ErrorDynamics {
    fn new(p: &LinearLoopParams) -> Self {
        let wn = p.natural_freq();
        let c_total = p.c1_f + p.c2_f;
        let gain = p.k_pd * p.k_v / (p.n as f64 * c_total);
        let tau2 = p.r_ohm * p.c1_f;
        let tau3 = p.r_ohm * p.c1_f * p.c2_f / c_total;
        // denominator in p = s/ωn: d3 p³ + p² + d1 p + d0
        let d3 = tau3 * wn;
        let d1 = gain * tau2 / wn;
        let d0 = gain / (wn * wn);
        #[rustfmt::skip]
        let a = Matrix3::new(
            0.0, 1.0, 0.0,
            0.0, 0.0, 1.0,
            -d0 / d3, -d1 / d3, -1.0 / d3,
        );
        Self {
            wn,
            a,
            c: Vector3::new(1.0 / d3, 1.0, 0.0),
        }
    }

    /// Impulse-response state at scaled time `t_scaled`.
    fn state_at(&self, t_scaled: f64) -> Vector3<f64> {
        (self.a * t_scaled).exp() * Vector3::new(0.0, 0.0, 1.0)
    }

    fn slowest_decay(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|l| -l.re)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Closed-loop phase error (rad) after a reference frequency step of `delta_f` Hz
/// applied at `t = 0`, evaluated at each time in `t_grid`.
pub fn linear_step_response(
    p: &LinearLoopParams,
    delta_f: f64,
    t_grid: &[f64],
) -> Result<Vec<f64>, AnalysisError> {
    for (i, &t) in t_grid.iter().enumerate() {
        let ordered = i == 0 || t > t_grid[i - 1];
        if t.is_nan() || t < 0.0 || !ordered {
            return Err(AnalysisError::InvalidGrid(i));
        }
    }
    let dynamics = ErrorDynamics::new(p);
    let scale = TAU * delta_f / dynamics.wn;
    Ok(t_grid
        .iter()
        .map(|&t| scale * dynamics.c.dot(&dynamics.state_at(t * dynamics.wn)))
        .collect())
}

/// First time after which the phase error following a `delta_f` step never again
/// exceeds `tol` radians.
pub fn estimate_lock_time(
    p: &LinearLoopParams,
    delta_f: f64,
    tol: f64,
) -> Result<f64, AnalysisError> {
    if tol.is_infinite() && tol > 0.0 {
        return Ok(0.0);
    }
    require_positive("tol", tol)?;
    let dynamics = ErrorDynamics::new(p);
    let wn = dynamics.wn;
    let horizon_s = MAX_SETTLE_HORIZON / wn;
    let sigma = dynamics.slowest_decay();
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(AnalysisError::NoSettle { horizon_s });
    }
    let scale = TAU * delta_f.abs() / wn;
    let h = TAU / SETTLE_SAMPLES_PER_PERIOD;
    let step = (dynamics.a * h).exp();
    // the tail is considered quiet once this long has passed with |e| far below tol
    let quiet_span = (10.0 / sigma).max(TAU);

    let mut x = Vector3::new(0.0, 0.0, 1.0);
    let mut prev = 0.0;
    let mut last_exceed: Option<(f64, f64, f64)> = None; // (t, |e|, |e| at next sample)
    let mut quiet_since = 0.0;
    let mut k: u64 = 0;
    loop {
        k += 1;
        let t = k as f64 * h;
        if t > MAX_SETTLE_HORIZON {
            return Err(AnalysisError::NoSettle { horizon_s });
        }
        x = step * x;
        let e = (scale * dynamics.c.dot(&x)).abs();
        if prev > tol {
            last_exceed = Some((t - h, prev, e));
        }
        if e > tol * 1e-3 {
            quiet_since = t;
        }
        if t - quiet_since > quiet_span && e <= tol {
            break;
        }
        prev = e;
    }
    Ok(match last_exceed {
        None => 0.0,
        Some((t0, e0, e1)) => {
            // linear interpolation of the final downward crossing
            let frac = if e0 > e1 { (e0 - tol) / (e0 - e1) } else { 1.0 };
            (t0 + frac.clamp(0.0, 1.0) * h) / wn
        }
    })
}
