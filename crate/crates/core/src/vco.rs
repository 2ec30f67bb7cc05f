//! Current-starved VCO modeled as a phase accumulator over a measured tuning curve.
//!
//! The oscillator output is an ideal square wave represented only by its rising-edge
//! times. Within one step the control voltage is held constant, so the frequency is
//! constant and edge times can be placed exactly inside the step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VcoError {
    #[error("tuning curve needs at least 2 anchors, got {0}")]
    TooFewAnchors(usize),
    #[error("anchor {index} is not finite: ({v_ctrl_v}, {freq_hz})")]
    NonFinite {
        index: usize,
        v_ctrl_v: f64,
        freq_hz: f64,
    },
    #[error("anchor {index} frequency {freq_hz} Hz must be > 0")]
    NonPositiveFrequency { index: usize, freq_hz: f64 },
    #[error("anchors must be strictly increasing in voltage and frequency (anchor {index})")]
    NotMonotone { index: usize },
    #[error("local gain is undefined at {v_ctrl_v} V (outside the open span ({v_min}, {v_max}))")]
    OutsideSpan {
        v_ctrl_v: f64,
        v_min: f64,
        v_max: f64,
    },
    #[error("frequency {freq_hz} Hz is outside the tuning range [{f_min}, {f_max}] Hz")]
    FrequencyOutOfRange {
        freq_hz: f64,
        f_min: f64,
        f_max: f64,
    },
}

/// Monotone piecewise-linear map from control voltage to oscillation frequency.
///
/// Voltages outside the anchor span are clamped to the endpoint frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct VcoTuningCurve {
    anchors: Vec<(f64, f64)>,
}

impl VcoTuningCurve {
    /// Builds a curve from `(v_ctrl [V], freq [Hz])` anchors.
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self, VcoError> {
        if anchors.len() < 2 {
            return Err(VcoError::TooFewAnchors(anchors.len()));
        }
        for (index, &(v, f)) in anchors.iter().enumerate() {
            if !v.is_finite() || !f.is_finite() {
                return Err(VcoError::NonFinite {
                    index,
                    v_ctrl_v: v,
                    freq_hz: f,
                });
            }
            if f <= 0.0 {
                return Err(VcoError::NonPositiveFrequency { index, freq_hz: f });
            }
        }
        for (i, w) in anchors.windows(2).enumerate() {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(VcoError::NotMonotone { index: i + 1 });
            }
        }
        Ok(Self { anchors })
    }

    /// The three measured points of the 3-stage CSVCO: both ends of the tuning range
    /// and the center frequency.
    pub fn csvco_180nm() -> Self {
        Self::new(vec![(0.4, 1.066e9), (0.9, 3.208e9), (1.8, 3.731e9)])
            .expect("built-in anchors are monotone")
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn v_min(&self) -> f64 {
        self.anchors[0].0
    }

    pub fn v_max(&self) -> f64 {
        self.anchors[self.anchors.len() - 1].0
    }

    pub fn f_min(&self) -> f64 {
        self.anchors[0].1
    }

    pub fn f_max(&self) -> f64 {
        self.anchors[self.anchors.len() - 1].1
    }

    /// Index of the segment `[anchors[i], anchors[i + 1]]` containing `v`.
    /// Interior anchors belong to the segment on their right.
    fn segment(&self, v: f64) -> usize {
        let last_seg = self.anchors.len() - 2;
        // first anchor with voltage > v, minus one
        let upper = self.anchors.partition_point(|&(av, _)| av <= v);
        upper.saturating_sub(1).min(last_seg)
    }
}

impl TryFrom<Vec<[f64; 2]>> for VcoTuningCurve {
    type Error = VcoError;

    fn try_from(raw: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Self::new(raw.into_iter().map(|[v, f]| (v, f)).collect())
    }
}

impl From<VcoTuningCurve> for Vec<[f64; 2]> {
    fn from(curve: VcoTuningCurve) -> Self {
        curve.anchors.into_iter().map(|(v, f)| [v, f]).collect()
    }
}

/// Oscillation frequency at control voltage `v`.
///
/// Anchor voltages return the anchor frequency bit-exactly.
pub fn vco_freq(curve: &VcoTuningCurve, v: f64) -> f64 {
    if v <= curve.v_min() {
        return curve.f_min();
    }
    if v >= curve.v_max() {
        return curve.f_max();
    }
    let i = curve.segment(v);
    let (v0, f0) = curve.anchors[i];
    let (v1, f1) = curve.anchors[i + 1];
    if v == v0 {
        return f0;
    }
    f0 + (f1 - f0) * ((v - v0) / (v1 - v0))
}

/// Control voltage producing `freq_hz`; inverse of [`vco_freq`] on the anchor span.
pub fn vco_voltage_for(curve: &VcoTuningCurve, freq_hz: f64) -> Result<f64, VcoError> {
    if !(freq_hz >= curve.f_min() && freq_hz <= curve.f_max()) {
        return Err(VcoError::FrequencyOutOfRange {
            freq_hz,
            f_min: curve.f_min(),
            f_max: curve.f_max(),
        });
    }
    let a = &curve.anchors;
    let upper = a.partition_point(|&(_, af)| af <= freq_hz);
    let i = upper.saturating_sub(1).min(a.len() - 2);
    let (v0, f0) = a[i];
    let (v1, f1) = a[i + 1];
    if freq_hz == f0 {
        return Ok(v0);
    }
    Ok(v0 + (v1 - v0) * ((freq_hz - f0) / (f1 - f0)))
}

/// Slope (Hz/V) of the linear segment containing `v`.
pub fn vco_gain_local(curve: &VcoTuningCurve, v: f64) -> Result<f64, VcoError> {
    if !(v > curve.v_min() && v < curve.v_max()) {
        return Err(VcoError::OutsideSpan {
            v_ctrl_v: v,
            v_min: curve.v_min(),
            v_max: curve.v_max(),
        });
    }
    let i = curve.segment(v);
    let (v0, f0) = curve.anchors[i];
    let (v1, f1) = curve.anchors[i + 1];
    Ok((f1 - f0) / (v1 - v0))
}

/// Endpoint-to-endpoint gain `(f_max - f_min) / (v_max - v_min)` in Hz/V.
pub fn vco_gain_global(curve: &VcoTuningCurve) -> f64 {
    (curve.f_max() - curve.f_min()) / (curve.v_max() - curve.v_min())
}

/// Accumulated oscillator phase.
///
/// Phase is kept in turns, split into whole cycles and a fraction in `[0, 1)`, which
/// keeps sub-cycle resolution constant over arbitrarily long runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VcoState {
    cycles: u64,
    frac: f64,
    pub last_freq_hz: f64,
}

impl VcoState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unwrapped phase in radians.
    pub fn phase_rad(&self) -> f64 {
        std::f64::consts::TAU * self.turns()
    }

    /// Unwrapped phase in turns (cycles).
    pub fn turns(&self) -> f64 {
        self.cycles as f64 + self.frac
    }

    /// Number of completed cycles, i.e. rising edges emitted so far.
    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Advances the phase at constant frequency for `dt` seconds, appending the offsets
    /// (seconds from the start of the step, in `(0, dt]`) of every rising edge crossed.
    pub fn advance(&mut self, freq_hz: f64, dt: f64, edges: &mut Vec<f64>) {
        let delta = freq_hz * dt;
        let end = self.frac + delta;
        let crossed = end.floor();
        for k in 1..=(crossed as u64) {
            let offset = ((k as f64 - self.frac) / freq_hz).min(dt);
            edges.push(offset);
        }
        self.cycles += crossed as u64;
        self.frac = end - crossed;
        self.last_freq_hz = freq_hz;
    }
}

/// Advances the oscillator by one zero-order-hold step at control voltage `v`.
///
/// Returns the new state and the edge offsets within the step.
pub fn vco_step(curve: &VcoTuningCurve, state: VcoState, v: f64, dt: f64) -> (VcoState, Vec<f64>) {
    let mut next = state;
    let mut edges = Vec::new();
    next.advance(vco_freq(curve, v), dt, &mut edges);
    (next, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> VcoTuningCurve {
        VcoTuningCurve::csvco_180nm()
    }

    #[test]
    fn anchors_are_exact() {
        let c = curve();
        assert_eq!(vco_freq(&c, 0.4), 1.066e9);
        assert_eq!(vco_freq(&c, 0.9), 3.208e9);
        assert_eq!(vco_freq(&c, 1.8), 3.731e9);
    }

    #[test]
    fn interpolates_and_clamps() {
        let c = curve();
        assert!((vco_freq(&c, 0.65) - 2.137e9).abs() < 1e-3);
        assert_eq!(vco_freq(&c, 0.2), 1.066e9);
        assert_eq!(vco_freq(&c, 2.5), 3.731e9);
    }

    #[test]
    fn local_gain_per_segment() {
        let c = curve();
        let g1 = vco_gain_local(&c, 0.65).unwrap();
        assert!((g1 - 4.284e9).abs() < 1e-3);
        let g2 = vco_gain_local(&c, 1.2).unwrap();
        assert!((g2 - 0.523e9 / 0.9).abs() < 1e-3);
        assert!((g2 - 0.581e9).abs() < 1e6);
        assert_eq!(vco_gain_local(&c, 0.5), vco_gain_local(&c, 0.8));
        assert!(vco_gain_local(&c, 0.4).is_err());
        assert!(vco_gain_local(&c, 1.9).is_err());
    }

    #[test]
    fn global_gain() {
        let g = vco_gain_global(&curve());
        assert!((g - 2.665e9 / 1.4).abs() < 1e-3);
        assert!((g / 1e9 - 1.904).abs() < 1e-3);
        let unit = VcoTuningCurve::new(vec![(0.0, 1e9), (1.0, 2e9)]).unwrap();
        assert_eq!(vco_gain_global(&unit), 1e9);
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(matches!(
            VcoTuningCurve::new(vec![(0.0, 1e9), (1.0, 1e9)]),
            Err(VcoError::NotMonotone { index: 1 })
        ));
        assert!(VcoTuningCurve::new(vec![(0.0, 1e9)]).is_err());
        assert!(VcoTuningCurve::new(vec![(0.0, 0.0), (1.0, 1e9)]).is_err());
        assert!(VcoTuningCurve::new(vec![(1.0, 1e9), (0.5, 2e9)]).is_err());
    }

    #[test]
    fn inverse_curve() {
        let c = curve();
        let v = vco_voltage_for(&c, 2.4e9).unwrap();
        assert!((v - 0.71139).abs() < 1e-5);
        assert!((vco_freq(&c, v) - 2.4e9).abs() < 1e-3);
        assert_eq!(vco_voltage_for(&c, 3.208e9).unwrap(), 0.9);
        assert!(vco_voltage_for(&c, 4.8e9).is_err());
    }

    #[test]
    fn no_edge_far_from_crossing() {
        let mut s = VcoState::new();
        let mut edges = Vec::new();
        s.advance(1e9, 1e-12, &mut edges);
        assert!(edges.is_empty());
        assert!((s.phase_rad() - 0.006283185307179587).abs() < 1e-15);
    }

    #[test]
    fn one_period_one_edge() {
        let mut s = VcoState::new();
        let mut edges = Vec::new();
        s.advance(1e9, 1e-9, &mut edges);
        assert_eq!(edges.len(), 1);

        let mut s = VcoState::new();
        s.advance(1e9, 1e-15, &mut Vec::new());
        let mut edges = Vec::new();
        s.advance(1e9, 1e-9, &mut edges);
        assert_eq!(edges.len(), 1);
    }

    #[test]
    fn long_run_edge_count_and_spacing() {
        let c = VcoTuningCurve::new(vec![(0.0, 0.5e9), (1.0, 1.5e9)]).unwrap();
        let f = vco_freq(&c, 0.5);
        let dt = 1e-12;
        let steps = 1_000_000u64;
        let mut s = VcoState::new();
        let mut times = Vec::new();
        let mut buf = Vec::new();
        for i in 0..steps {
            buf.clear();
            s.advance(f, dt, &mut buf);
            times.extend(buf.iter().map(|o| i as f64 * dt + o));
        }
        let expected = (f * dt * steps as f64).floor() as i64;
        assert!((times.len() as i64 - expected).abs() <= 1);
        let mean = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        assert!((mean * f - 1.0).abs() < 1e-9, "mean spacing {mean}");
    }

    #[test]
    fn vco_step_matches_advance() {
        let c = curve();
        let (s, edges) = vco_step(&c, VcoState::new(), 0.9, 1e-9);
        assert_eq!(edges.len(), 3);
        assert_eq!(s.last_freq_hz, 3.208e9);
        assert_eq!(s.cycles(), 3);
    }
}
