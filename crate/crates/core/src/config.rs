//! Loop configuration, its JSON file format, validation, and the built-in preset
//! for the 150 MHz → 2.4 GHz divide-by-16 synthesizer.
//!
//! All quantities are SI base units and every field name carries its unit suffix.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::synthesize_loop;
use crate::vco::{vco_gain_local, vco_voltage_for, VcoTuningCurve};

/// Minimum number of simulation steps per period of the fastest VCO frequency.
pub const MIN_STEPS_PER_VCO_PERIOD: f64 = 20.0;
/// Minimum simulated span, in reference periods.
pub const MIN_REF_PERIODS: f64 = 100.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One failed invariant: the offending field, its value, and the rule it breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}: {}", self.field, self.value, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PllConfig {
    pub ref_freq_hz: f64,
    pub divide_ratio: u32,
    pub vdd_v: f64,
    pub i_pump_a: f64,
    pub leakage_a: f64,
    pub r_ohm: f64,
    pub c1_f: f64,
    pub c2_f: f64,
    pub vco_curve: VcoTuningCurve,
    pub pfd_reset_delay_s: f64,
    pub dt_s: f64,
    pub t_end_s: f64,
    pub v_ctrl_init_v: f64,
    pub lock_freq_tol: f64,
    pub lock_phase_tol_rad: f64,
    pub lock_hold_cycles: u32,
}

// On-disk layout. Kept separate so the in-memory config stays flat.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    ref_freq_hz: f64,
    divide_ratio: u32,
    vdd_v: f64,
    charge_pump: ChargePumpFile,
    loop_filter: LoopFilterFile,
    vco: VcoFile,
    pfd: PfdFile,
    sim: SimFile,
    lock: LockFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChargePumpFile {
    i_pump_a: f64,
    #[serde(default)]
    leakage_a: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopFilterFile {
    r_ohm: f64,
    c1_f: f64,
    c2_f: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VcoFile {
    anchors: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PfdFile {
    reset_delay_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    dt_s: f64,
    t_end_s: f64,
    v_ctrl_init_v: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LockFile {
    freq_tol_frac: f64,
    phase_tol_rad: f64,
    hold_ref_cycles: u32,
}

impl From<&PllConfig> for ConfigFile {
    fn from(c: &PllConfig) -> Self {
        Self {
            ref_freq_hz: c.ref_freq_hz,
            divide_ratio: c.divide_ratio,
            vdd_v: c.vdd_v,
            charge_pump: ChargePumpFile {
                i_pump_a: c.i_pump_a,
                leakage_a: c.leakage_a,
            },
            loop_filter: LoopFilterFile {
                r_ohm: c.r_ohm,
                c1_f: c.c1_f,
                c2_f: c.c2_f,
            },
            vco: VcoFile {
                anchors: c.vco_curve.clone().into(),
            },
            pfd: PfdFile {
                reset_delay_s: c.pfd_reset_delay_s,
            },
            sim: SimFile {
                dt_s: c.dt_s,
                t_end_s: c.t_end_s,
                v_ctrl_init_v: c.v_ctrl_init_v,
            },
            lock: LockFile {
                freq_tol_frac: c.lock_freq_tol,
                phase_tol_rad: c.lock_phase_tol_rad,
                hold_ref_cycles: c.lock_hold_cycles,
            },
        }
    }
}

impl ConfigFile {
    fn into_config(self) -> Result<PllConfig, Vec<Violation>> {
        let curve = VcoTuningCurve::try_from(self.vco.anchors.clone()).map_err(|e| {
            vec![Violation {
                field: "vco.anchors",
                value: format!("{:?}", self.vco.anchors),
                rule: e.to_string(),
            }]
        })?;
        Ok(PllConfig {
            ref_freq_hz: self.ref_freq_hz,
            divide_ratio: self.divide_ratio,
            vdd_v: self.vdd_v,
            i_pump_a: self.charge_pump.i_pump_a,
            leakage_a: self.charge_pump.leakage_a,
            r_ohm: self.loop_filter.r_ohm,
            c1_f: self.loop_filter.c1_f,
            c2_f: self.loop_filter.c2_f,
            vco_curve: curve,
            pfd_reset_delay_s: self.pfd.reset_delay_s,
            dt_s: self.sim.dt_s,
            t_end_s: self.sim.t_end_s,
            v_ctrl_init_v: self.sim.v_ctrl_init_v,
            lock_freq_tol: self.lock.freq_tol_frac,
            lock_phase_tol_rad: self.lock.phase_tol_rad,
            lock_hold_cycles: self.lock.hold_ref_cycles,
        })
    }
}

impl Serialize for PllConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ConfigFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PllConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        ConfigFile::deserialize(deserializer)?
            .into_config()
            .map_err(|v| serde::de::Error::custom(join_violations(&v)))
    }
}

impl PllConfig {
    /// Parses the JSON format without checking invariants.
    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes to JSON")
    }

    /// Empty when every invariant holds.
    pub fn violations(&self) -> Vec<Violation> {
        validate_config(self)
    }
}

/// Reads, parses and validates a JSON config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<PllConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ConfigFile = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = file.into_config().map_err(ConfigError::Invalid)?;
    let violations = validate_config(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

/// Every broken invariant of `cfg`, in field order.
pub fn validate_config(cfg: &PllConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &'static str, value: String, rule: String| {
        if !ok {
            out.push(Violation { field, value, rule });
        }
    };
    let pos = |x: f64| x > 0.0 && x.is_finite();

    check(
        pos(cfg.ref_freq_hz),
        "ref_freq_hz",
        cfg.ref_freq_hz.to_string(),
        "must be > 0".into(),
    );
    let n = cfg.divide_ratio;
    check(n >= 2, "divide_ratio", n.to_string(), "must be >= 2".into());
    check(
        n.is_multiple_of(2),
        "divide_ratio",
        n.to_string(),
        "must be even".into(),
    );
    check(
        pos(cfg.vdd_v),
        "vdd_v",
        cfg.vdd_v.to_string(),
        "must be > 0".into(),
    );
    check(
        pos(cfg.i_pump_a),
        "charge_pump.i_pump_a",
        cfg.i_pump_a.to_string(),
        "must be > 0".into(),
    );
    check(
        cfg.leakage_a >= 0.0 && cfg.leakage_a.is_finite(),
        "charge_pump.leakage_a",
        cfg.leakage_a.to_string(),
        "must be >= 0".into(),
    );
    check(
        cfg.r_ohm >= 0.0 && cfg.r_ohm.is_finite(),
        "loop_filter.r_ohm",
        cfg.r_ohm.to_string(),
        "must be >= 0".into(),
    );
    check(
        pos(cfg.c1_f),
        "loop_filter.c1_f",
        cfg.c1_f.to_string(),
        "must be > 0".into(),
    );
    check(
        pos(cfg.c2_f),
        "loop_filter.c2_f",
        cfg.c2_f.to_string(),
        "must be > 0".into(),
    );
    check(
        cfg.pfd_reset_delay_s >= 0.0 && cfg.pfd_reset_delay_s.is_finite(),
        "pfd.reset_delay_s",
        cfg.pfd_reset_delay_s.to_string(),
        "must be >= 0".into(),
    );
    let dt_max = 1.0 / (MIN_STEPS_PER_VCO_PERIOD * cfg.vco_curve.f_max());
    check(
        pos(cfg.dt_s) && cfg.dt_s < dt_max,
        "sim.dt_s",
        cfg.dt_s.to_string(),
        format!("must be > 0 and < 1/(20·f_max) = {dt_max:.6e} s"),
    );
    let t_min = MIN_REF_PERIODS / cfg.ref_freq_hz;
    check(
        cfg.t_end_s.is_finite() && cfg.t_end_s >= t_min,
        "sim.t_end_s",
        cfg.t_end_s.to_string(),
        format!("must be >= 100/ref_freq = {t_min:.6e} s"),
    );
    check(
        cfg.v_ctrl_init_v >= 0.0 && cfg.v_ctrl_init_v <= cfg.vdd_v,
        "sim.v_ctrl_init_v",
        cfg.v_ctrl_init_v.to_string(),
        format!("must lie in [0, vdd = {}]", cfg.vdd_v),
    );
    check(
        pos(cfg.lock_freq_tol),
        "lock.freq_tol_frac",
        cfg.lock_freq_tol.to_string(),
        "must be > 0".into(),
    );
    check(
        pos(cfg.lock_phase_tol_rad),
        "lock.phase_tol_rad",
        cfg.lock_phase_tol_rad.to_string(),
        "must be > 0".into(),
    );
    check(
        cfg.lock_hold_cycles >= 1,
        "lock.hold_ref_cycles",
        cfg.lock_hold_cycles.to_string(),
        "must be >= 1".into(),
    );
    out
}

/// Loop-synthesis targets used to dimension the preset's filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisTargets {
    pub i_pump_a: f64,
    /// Natural frequency as a fraction of the reference frequency.
    pub f_n_over_f_ref: f64,
    pub zeta: f64,
    pub ripple_ratio: f64,
}

impl Default for SynthesisTargets {
    fn default() -> Self {
        Self {
            i_pump_a: 100e-6,
            f_n_over_f_ref: 1.0 / 20.0,
            zeta: 1.0,
            ripple_ratio: 10.0,
        }
    }
}

/// Silicon figures reported for the fabricated design. Never used in computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportedFigures {
    pub silicon_power_total_w: f64,
    pub silicon_lock_time_s: f64,
    pub vco_power_w: f64,
    pub vco_center_freq_hz: f64,
    pub vco_reported_gain_hz_per_v: f64,
    pub vco_tuning_range_hz: [f64; 2],
    pub vco_tuning_voltage_v: [f64; 2],
    /// Reference-frequency lock range.
    pub lock_range_input_hz: [f64; 2],
    /// The same lock range expressed at the output.
    pub lock_range_output_hz: [f64; 2],
    /// Lock range as quoted in the results summary; equals the VCO tuning range.
    pub lock_range_summary_hz: [f64; 2],
    pub transistor_count: u32,
    pub supply_v: f64,
}

pub fn reported_figures() -> ReportedFigures {
    ReportedFigures {
        silicon_power_total_w: 5.15e-3,
        silicon_lock_time_s: 260.03e-9,
        vco_power_w: 1.60e-3,
        vco_center_freq_hz: 3.208e9,
        vco_reported_gain_hz_per_v: 1.265e9,
        vco_tuning_range_hz: [1.066e9, 3.731e9],
        vco_tuning_voltage_v: [0.4, 1.8],
        lock_range_input_hz: [70.4e6, 173e6],
        lock_range_output_hz: [1.12e9, 2.78e9],
        lock_range_summary_hz: [1.066e9, 3.731e9],
        transistor_count: 111,
        supply_v: 1.8,
    }
}

/// The 150 MHz reference, divide-by-16 loop with its filter synthesized for the
/// default targets.
pub fn paper_preset() -> PllConfig {
    preset_with(SynthesisTargets::default()).expect("default synthesis targets are valid")
}

/// The preset loop with its filter synthesized for custom targets.
pub fn preset_with(targets: SynthesisTargets) -> Result<PllConfig, crate::analysis::AnalysisError> {
    let ref_freq_hz = 150e6;
    let divide_ratio = 16;
    let vco_curve = VcoTuningCurve::csvco_180nm();
    let v_op = vco_voltage_for(&vco_curve, divide_ratio as f64 * ref_freq_hz)?;
    let kvco = vco_gain_local(&vco_curve, v_op)?;
    let filter = synthesize_loop(
        targets.i_pump_a,
        kvco,
        divide_ratio,
        targets.f_n_over_f_ref * ref_freq_hz,
        targets.zeta,
        targets.ripple_ratio,
    )?;
    Ok(PllConfig {
        ref_freq_hz,
        divide_ratio,
        vdd_v: 1.8,
        i_pump_a: targets.i_pump_a,
        leakage_a: 0.0,
        r_ohm: filter.r_ohm,
        c1_f: filter.c1_f,
        c2_f: filter.c2_f,
        vco_curve,
        pfd_reset_delay_s: 100e-12,
        dt_s: 1e-12,
        t_end_s: 2e-6,
        v_ctrl_init_v: 0.9,
        lock_freq_tol: 1e-3,
        lock_phase_tol_rad: 0.05,
        lock_hold_cycles: 10,
    })
}
