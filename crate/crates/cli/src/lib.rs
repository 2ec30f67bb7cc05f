//! Command-line surface of pllforge.
//!
//! Every subcommand resolves a [`PllConfig`] (the built-in preset or a JSON file),
//! calls straight into the `pllforge` library, writes its files under `--out`, and
//! finishes with a `manifest.json` listing everything it wrote.

pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pllforge::analysis::{AnalysisError, LinearLoopParams};
use pllforge::config::{ConfigError, Violation};
use pllforge::engine::{sweep_lock_range_with, sweep_vco, EngineError};
use pllforge::vco::{vco_gain_local, vco_voltage_for};
use pllforge::{
    estimate_lock_time, load_config, paper_preset, reported_figures, simulate, stability_report,
    synthesize_loop, validate_config, PllConfig,
};
use serde::Serialize;
use thiserror::Error;

pub use output::{emit_plot_script, write_trace_csv, PlotKind, RunManifest};

/// Environment variable capping the worker threads of `lock-range`.
pub const THREADS_ENV: &str = "PLLFORGE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("loop did not lock: {0}")]
    NotLocked(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unknown plot kind {0:?}; valid kinds: acquisition, tuning_curve, lock_range")]
    UnknownPlotKind(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) | Self::Invalid(_) | Self::UnknownPlotKind(_) => 1,
            Self::NotLocked(_) => 2,
            Self::Io { .. } => 3,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        Self::Invalid(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        Self::Invalid(e.to_string())
    }
}

fn violations_error(v: Vec<Violation>) -> CliError {
    CliError::Config(ConfigError::Invalid(v))
}

#[derive(Debug, Parser)]
#[command(
    name = "pllforge",
    version,
    about = "Charge-pump PLL behavioral simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config JSON file, or `preset` for the built-in 150 MHz → 2.4 GHz loop.
    #[arg(long, default_value = "preset")]
    config: String,
    /// Directory for output files; created if missing.
    #[arg(long, default_value = "pllforge-out")]
    out: PathBuf,
    /// Override the simulation time step (s).
    #[arg(long)]
    dt_s: Option<f64>,
    /// Override the simulated span (s).
    #[arg(long)]
    t_end_s: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transient simulation from cold start, with lock report and trace CSV.
    Sim {
        #[command(flatten)]
        common: Common,
        /// Exit with status 2 unless the loop locks.
        #[arg(long)]
        require_lock: bool,
    },
    /// Synthesize loop-filter components for target bandwidth and damping.
    Design {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100e-6)]
        i_pump_a: f64,
        /// Natural frequency target (Hz); defaults to f_ref/20.
        #[arg(long)]
        fn_hz: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        zeta: f64,
        /// c1/c2.
        #[arg(long, default_value_t = 10.0)]
        ripple_ratio: f64,
    },
    /// Tabulate the VCO tuning curve.
    VcoSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 15)]
        points: usize,
        /// Lowest control voltage (V); defaults to 0.
        #[arg(long)]
        from_v: Option<f64>,
        /// Highest control voltage (V); defaults to vdd.
        #[arg(long)]
        to_v: Option<f64>,
    },
    /// Cold-start lock verdict over a grid of reference frequencies.
    LockRange {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 60e6)]
        from_hz: f64,
        #[arg(long, default_value_t = 240e6)]
        to_hz: f64,
        #[arg(long, default_value_t = 19)]
        points: usize,
    },
    /// Linear stability and settling analysis of a config.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Reference frequency step for the settling estimate (Hz); defaults to f_ref/100.
        #[arg(long)]
        step_hz: Option<f64>,
    },
    /// Print the built-in preset and the figures reported for the fabricated chip.
    Preset {
        #[arg(long, default_value = "pllforge-out")]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Output directory plus the list of files written into it so far.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn finish(
        mut self,
        subcommand: &str,
        config: &PllConfig,
        start: Instant,
    ) -> Result<(), CliError> {
        let path = self.file("manifest.json");
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config: config.clone(),
            outputs: self.files,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: start.elapsed().as_secs_f64(),
        };
        output::write_json(&manifest, &path)
    }
}

fn resolve_config(common: &Common) -> Result<PllConfig, CliError> {
    let mut cfg = if common.config == "preset" {
        paper_preset()
    } else {
        load_config(&common.config)?
    };
    if let Some(dt) = common.dt_s {
        cfg.dt_s = dt;
    }
    if let Some(t) = common.t_end_s {
        cfg.t_end_s = t;
    }
    let v = validate_config(&cfg);
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(violations_error(v))
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {s:?}"
            ))),
        },
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let start = Instant::now();
    match command {
        Command::Sim {
            common,
            require_lock,
        } => cmd_sim(&common, require_lock, start),
        Command::Design {
            common,
            i_pump_a,
            fn_hz,
            zeta,
            ripple_ratio,
        } => cmd_design(&common, i_pump_a, fn_hz, zeta, ripple_ratio, start),
        Command::VcoSweep {
            common,
            points,
            from_v,
            to_v,
        } => cmd_vco_sweep(&common, points, from_v, to_v, start),
        Command::LockRange {
            common,
            from_hz,
            to_hz,
            points,
        } => cmd_lock_range(&common, from_hz, to_hz, points, start),
        Command::Analyze { common, step_hz } => cmd_analyze(&common, step_hz, start),
        Command::Preset { out } => cmd_preset(&out, start),
    }
}

fn cmd_sim(common: &Common, require_lock: bool, start: Instant) -> Result<(), CliError> {
    let cfg = resolve_config(common)?;
    let (trace, report) = simulate(&cfg)?;
    let mut out = Outputs::create(&common.out)?;
    let csv = out.file("trace.csv");
    let rows = write_trace_csv(&trace, &csv)?;
    output::write_json(&report, &out.file("lock_report.json"))?;
    emit_plot_script(
        &csv,
        PlotKind::Acquisition.as_str(),
        &out.file("acquisition.gp"),
    )?;

    println!("trace: {rows} rows -> {}", csv.display());
    match report.lock_time_s {
        Some(t) if report.locked => println!("locked: yes, lock time {:.4e} s", t),
        _ => println!(
            "locked: no ({})",
            report.reason.as_deref().unwrap_or("unknown")
        ),
    }
    println!("f_out steady: {:.9e} Hz", report.f_out_steady_hz);
    println!("v_ctrl steady: {:.6} V", report.v_ctrl_steady_v);
    println!(
        "residual phase error: {:.3e} rad",
        report.residual_phase_err_rad
    );
    out.finish("sim", &cfg, start)?;

    if require_lock && !report.locked {
        return Err(CliError::NotLocked(
            report.reason.unwrap_or_else(|| "unknown".into()),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct DesignReport {
    targets: DesignTargets,
    kvco_local_hz_per_v: f64,
    components: pllforge::cpf::LoopFilterComponents,
    stability: pllforge::StabilityReport,
}

#[derive(Serialize)]
struct DesignTargets {
    i_pump_a: f64,
    f_n_hz: f64,
    zeta: f64,
    ripple_ratio: f64,
}

fn cmd_design(
    common: &Common,
    i_pump_a: f64,
    fn_hz: Option<f64>,
    zeta: f64,
    ripple_ratio: f64,
    start: Instant,
) -> Result<(), CliError> {
    let base = resolve_config(common)?;
    let f_n_hz = fn_hz.unwrap_or(base.ref_freq_hz / 20.0);
    let f_out = base.divide_ratio as f64 * base.ref_freq_hz;
    let v_op = vco_voltage_for(&base.vco_curve, f_out).map_err(AnalysisError::from)?;
    let kvco = vco_gain_local(&base.vco_curve, v_op).map_err(AnalysisError::from)?;
    let components = synthesize_loop(
        i_pump_a,
        kvco,
        base.divide_ratio,
        f_n_hz,
        zeta,
        ripple_ratio,
    )?;
    let cfg = PllConfig {
        i_pump_a,
        r_ohm: components.r_ohm,
        c1_f: components.c1_f,
        c2_f: components.c2_f,
        ..base
    };
    let v = validate_config(&cfg);
    if !v.is_empty() {
        return Err(violations_error(v));
    }
    let stability = stability_report(&LinearLoopParams::from_config(&cfg)?)?;

    let mut out = Outputs::create(&common.out)?;
    output::write_json(
        &DesignReport {
            targets: DesignTargets {
                i_pump_a,
                f_n_hz,
                zeta,
                ripple_ratio,
            },
            kvco_local_hz_per_v: kvco,
            components,
            stability,
        },
        &out.file("design.json"),
    )?;
    output::write_json(&cfg, &out.file("designed_config.json"))?;

    println!("local VCO gain: {:.6e} Hz/V at {:.6} V", kvco, v_op);
    println!("R  = {:.6e} ohm", components.r_ohm);
    println!("C1 = {:.6e} F", components.c1_f);
    println!("C2 = {:.6e} F", components.c2_f);
    print_stability(&stability);
    out.finish("design", &cfg, start)
}

fn print_stability(s: &pllforge::StabilityReport) {
    println!("natural frequency: {:.6e} rad/s", s.natural_freq);
    println!("damping: {:.6}", s.damping);
    println!("crossover: {:.6e} rad/s", s.crossover_freq);
    println!("phase margin: {:.3} deg", s.phase_margin);
    println!("stable: {}", if s.stable { "yes" } else { "no" });
}

fn cmd_vco_sweep(
    common: &Common,
    points: usize,
    from_v: Option<f64>,
    to_v: Option<f64>,
    start: Instant,
) -> Result<(), CliError> {
    let cfg = resolve_config(common)?;
    let rows = sweep_vco(
        &cfg.vco_curve,
        from_v.unwrap_or(0.0),
        to_v.unwrap_or(cfg.vdd_v),
        points,
    )?;
    let mut out = Outputs::create(&common.out)?;
    let csv = out.file("vco_sweep.csv");
    output::write_vco_sweep_csv(&rows, &csv)?;
    emit_plot_script(
        &csv,
        PlotKind::TuningCurve.as_str(),
        &out.file("tuning_curve.gp"),
    )?;
    println!("{:>10}  {:>16}", "v_ctrl_v", "f_vco_hz");
    for (v, f) in &rows {
        println!("{v:>10.4}  {f:>16.6e}");
    }
    out.finish("vco-sweep", &cfg, start)
}

fn cmd_lock_range(
    common: &Common,
    from_hz: f64,
    to_hz: f64,
    points: usize,
    start: Instant,
) -> Result<(), CliError> {
    let cfg = resolve_config(common)?;
    if from_hz.is_nan() || to_hz.is_nan() || from_hz >= to_hz || points < 2 {
        return Err(CliError::Usage(format!(
            "need --from-hz < --to-hz and --points >= 2, got [{from_hz}, {to_hz}] with {points}"
        )));
    }
    let freqs: Vec<f64> = (0..points)
        .map(|i| from_hz + (to_hz - from_hz) * (i as f64 / (points - 1) as f64))
        .collect();
    let result = sweep_lock_range_with(&cfg, &freqs, threads_from_env()?)?;
    let mut out = Outputs::create(&common.out)?;
    let csv = out.file("lock_range.csv");
    output::write_lock_range_csv(&result, &csv)?;
    emit_plot_script(
        &csv,
        PlotKind::LockRange.as_str(),
        &out.file("lock_range.gp"),
    )?;

    for p in &result {
        match (p.locked, p.lock_time_s) {
            (true, Some(t)) => println!("{:.6e} Hz  locked  lock time {:.4e} s", p.f_ref_hz, t),
            _ => println!(
                "{:.6e} Hz  unlocked  {}",
                p.f_ref_hz,
                p.reason.as_deref().unwrap_or("")
            ),
        }
    }
    let locked: Vec<f64> = result
        .iter()
        .filter(|p| p.locked)
        .map(|p| p.f_ref_hz)
        .collect();
    match (locked.first(), locked.last()) {
        (Some(lo), Some(hi)) => println!(
            "simulated lock range: {lo:.6e} to {hi:.6e} Hz reference ({:.6e} to {:.6e} Hz output)",
            lo * cfg.divide_ratio as f64,
            hi * cfg.divide_ratio as f64
        ),
        _ => println!("simulated lock range: no grid point locked"),
    }
    let r = reported_figures();
    println!("reported for the fabricated chip, not simulated:");
    println!(
        "  lock-in range {:.4e} to {:.4e} Hz reference ({:.4e} to {:.4e} Hz output)",
        r.lock_range_input_hz[0],
        r.lock_range_input_hz[1],
        r.lock_range_output_hz[0],
        r.lock_range_output_hz[1]
    );
    println!(
        "  summary lock range {:.4e} to {:.4e} Hz",
        r.lock_range_summary_hz[0], r.lock_range_summary_hz[1]
    );
    out.finish("lock-range", &cfg, start)
}

#[derive(Serialize)]
struct AnalysisReport {
    stability: pllforge::StabilityReport,
    step_hz: f64,
    tol_rad: f64,
    linear_lock_time_s: f64,
}

fn cmd_analyze(common: &Common, step_hz: Option<f64>, start: Instant) -> Result<(), CliError> {
    let cfg = resolve_config(common)?;
    let params = LinearLoopParams::from_config(&cfg)?;
    let stability = stability_report(&params)?;
    let step_hz = step_hz.unwrap_or(cfg.ref_freq_hz / 100.0);
    let tol_rad = cfg.lock_phase_tol_rad;
    let t_lock = estimate_lock_time(&params, step_hz, tol_rad)?;

    let mut out = Outputs::create(&common.out)?;
    output::write_json(
        &AnalysisReport {
            stability,
            step_hz,
            tol_rad,
            linear_lock_time_s: t_lock,
        },
        &out.file("analysis.json"),
    )?;
    print_stability(&stability);
    println!("linear settling for a {step_hz:.4e} Hz step to {tol_rad} rad: {t_lock:.4e} s");
    out.finish("analyze", &cfg, start)
}

fn cmd_preset(dir: &Path, start: Instant) -> Result<(), CliError> {
    let cfg = paper_preset();
    let figures = reported_figures();
    let mut out = Outputs::create(dir)?;
    output::write_json(&cfg, &out.file("preset_config.json"))?;
    output::write_json(&figures, &out.file("reported_figures.json"))?;

    println!("preset config:");
    println!("{}", cfg.to_json_string());
    let f = &figures;
    println!("reported for the fabricated chip, not simulated:");
    println!("  total power        {} mW", f.silicon_power_total_w * 1e3);
    println!(
        "  lock time          {} ns at 2.4 GHz",
        f.silicon_lock_time_s * 1e9
    );
    println!("  VCO power          {} mW", f.vco_power_w * 1e3);
    println!("  VCO center         {} GHz", f.vco_center_freq_hz / 1e9);
    println!(
        "  VCO gain (quoted)  {} GHz/V",
        f.vco_reported_gain_hz_per_v / 1e9
    );
    println!(
        "  VCO tuning range   {} to {} GHz over {} to {} V",
        f.vco_tuning_range_hz[0] / 1e9,
        f.vco_tuning_range_hz[1] / 1e9,
        f.vco_tuning_voltage_v[0],
        f.vco_tuning_voltage_v[1]
    );
    println!(
        "  lock-in range      {} to {} MHz reference, {} to {} GHz output",
        f.lock_range_input_hz[0] / 1e6,
        f.lock_range_input_hz[1] / 1e6,
        f.lock_range_output_hz[0] / 1e9,
        f.lock_range_output_hz[1] / 1e9
    );
    println!(
        "  summary lock range {} to {} GHz",
        f.lock_range_summary_hz[0] / 1e9,
        f.lock_range_summary_hz[1] / 1e9
    );
    println!("  transistors        {}", f.transistor_count);
    println!("  supply             {} V", f.supply_v);
    out.finish("preset", &cfg, start)
}
