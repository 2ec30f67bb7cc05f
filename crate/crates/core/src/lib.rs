//! Behavioral simulation and design toolkit for charge-pump phase-locked loops.
//!
//! The loop is PFD → charge pump → passive second-order filter → VCO → divide-by-N,
//! with the divider output fed back to the PFD. Blocks are modeled behaviorally:
//!
//! - [`pfd`]: three-state phase-frequency detector with a finite reset delay
//! - [`cpf`]: charge pump and exactly-integrated R-C1 ‖ C2 loop filter
//! - [`vco`]: phase accumulator over a piecewise-linear tuning curve
//! - [`divider`]: rising-edge divide-by-N counter and TSPC power estimate
//! - [`engine`]: fixed-step, event-split transient simulator, lock detection, sweeps
//! - [`analysis`]: linear loop model, filter synthesis, stability and settling
//! - [`config`]: JSON configuration, validation and the built-in preset

pub mod analysis;
pub mod config;
pub mod cpf;
pub mod divider;
pub mod engine;
pub mod pfd;
pub mod vco;

pub use analysis::{
    estimate_lock_time, linear_step_response, stability_report, synthesize_loop, LinearLoopParams,
    StabilityReport,
};
pub use config::{load_config, paper_preset, reported_figures, validate_config, PllConfig};
pub use engine::{detect_lock, simulate, simulate_with, LockReport, SimOptions, SimTrace};
pub use vco::VcoTuningCurve;
