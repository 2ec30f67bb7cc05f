use pllforge::engine::{
    detect_lock, run_transient, sweep_lock_range, sweep_lock_range_with, EngineError,
};
use pllforge::vco::{vco_freq, vco_voltage_for};
use pllforge::{paper_preset, simulate, PllConfig, SimOptions};

fn locked_start() -> PllConfig {
    let mut cfg = paper_preset();
    cfg.v_ctrl_init_v = vco_voltage_for(&cfg.vco_curve, 2.4e9).unwrap();
    cfg.t_end_s = 0.8e-6;
    cfg
}

#[test]
fn preset_acquires_lock_at_2_4_ghz() {
    let cfg = paper_preset();
    let (trace, report) = simulate(&cfg).unwrap();
    assert!(report.locked, "{report:?}");
    assert!((report.f_out_steady_hz / 2.4e9 - 1.0).abs() <= 1e-3);
    let t_lock = report.lock_time_s.unwrap();
    assert!((50e-9..=1e-6).contains(&t_lock), "lock time {t_lock}");

    let curve = &cfg.vco_curve;
    assert!(trace.rows.windows(2).all(|w| w[1].t_s > w[0].t_s));
    for r in &trace.rows {
        assert!((0.0..=cfg.vdd_v).contains(&r.v_ctrl_v));
        assert!(r.f_vco_hz >= curve.f_min() && r.f_vco_hz <= curve.f_max());
    }
    let f_at_steady = vco_freq(curve, report.v_ctrl_steady_v);
    assert!((f_at_steady / 2.4e9 - 1.0).abs() <= cfg.lock_freq_tol);
}

#[test]
fn no_cycle_slips_once_locked() {
    let cfg = paper_preset();
    let (trace, report) = simulate(&cfg).unwrap();
    let t_lock = report.lock_time_s.unwrap();
    let half = 0.5 / cfg.ref_freq_hz;
    let refs: Vec<f64> = trace
        .ref_edges
        .iter()
        .copied()
        .filter(|&t| t >= t_lock)
        .collect();
    let divs: Vec<f64> = trace
        .div_edges
        .iter()
        .copied()
        .filter(|&t| t >= t_lock - half)
        .collect();
    // each reference period after lock holds exactly one divider edge near its start
    for w in refs.windows(2) {
        let count = divs
            .iter()
            .filter(|&&d| d >= w[0] - half && d < w[1] - half)
            .count();
        assert_eq!(count, 1, "period starting {}", w[0]);
    }
}

#[test]
fn halving_dt_barely_moves_the_result() {
    let cfg = paper_preset();
    let (_, a) = simulate(&cfg).unwrap();
    let fine = PllConfig {
        dt_s: cfg.dt_s / 2.0,
        ..cfg.clone()
    };
    let (_, b) = simulate(&fine).unwrap();
    let dl = (a.lock_time_s.unwrap() - b.lock_time_s.unwrap()).abs();
    assert!(dl <= 2.0 / cfg.ref_freq_hz, "lock time moved {dl}");
    assert!((a.f_out_steady_hz / b.f_out_steady_hz - 1.0).abs() <= 1e-4);
}

#[test]
fn unreachable_output_rails_at_vdd() {
    let cfg = PllConfig {
        ref_freq_hz: 300e6,
        ..paper_preset()
    };
    let (trace, report) = simulate(&cfg).unwrap();
    assert!(!report.locked);
    assert!(report.reason.as_deref().unwrap().contains("railed at vdd"));
    assert_eq!(trace.rows.last().unwrap().v_ctrl_v, cfg.vdd_v);
}

#[test]
fn zero_pump_current_is_rejected() {
    let cfg = PllConfig {
        i_pump_a: 0.0,
        ..paper_preset()
    };
    match simulate(&cfg) {
        Err(EngineError::InvalidConfig(v)) => {
            assert!(v.iter().any(|x| x.field == "charge_pump.i_pump_a"))
        }
        other => panic!("expected validation failure, got {other:?}"),
    }
}

#[test]
fn already_locked_loop_reports_immediate_lock() {
    let cfg = locked_start();
    let (_, report) = simulate(&cfg).unwrap();
    assert!(report.locked);
    let bound = cfg.lock_hold_cycles as f64 / cfg.ref_freq_hz;
    assert!(report.lock_time_s.unwrap() <= bound);
}

#[test]
fn tighter_phase_tolerance_never_locks_earlier() {
    let cfg = paper_preset();
    let trace = run_transient(&cfg, &SimOptions::default()).unwrap();
    let mut prev = 0.0;
    for tol in [0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005] {
        let report = detect_lock(
            &trace,
            &PllConfig {
                lock_phase_tol_rad: tol,
                ..cfg.clone()
            },
        );
        let t = report.lock_time_s.unwrap_or(f64::INFINITY);
        assert!(t >= prev, "tol {tol}: {t} < {prev}");
        prev = t;
    }
}

#[test]
fn lock_range_sweep_brackets_the_tuning_curve() {
    let cfg = paper_preset();
    let points = sweep_lock_range(&cfg, 60e6, 240e6, 19).unwrap();
    let f_lo = cfg.vco_curve.f_min() / 16.0;
    let f_hi = cfg.vco_curve.f_max() / 16.0;
    for p in &points {
        if p.f_ref_hz < f_lo || p.f_ref_hz > f_hi {
            assert!(!p.locked, "{p:?}");
            assert!(p.reason.as_deref().unwrap().contains("railed"));
        }
        if p.locked {
            assert!((p.f_out_steady_hz / (16.0 * p.f_ref_hz) - 1.0).abs() <= cfg.lock_freq_tol);
        }
    }
    assert!(points.iter().any(|p| p.locked && p.f_ref_hz == 150e6));
}

#[test]
fn single_point_sweep_matches_simulate() {
    let cfg = paper_preset();
    let (_, report) = simulate(&cfg).unwrap();
    let points = sweep_lock_range_with(&cfg, &[150e6], Some(1)).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].locked, report.locked);
    assert_eq!(points[0].lock_time_s, report.lock_time_s);
    assert_eq!(points[0].f_out_steady_hz, report.f_out_steady_hz);
}

#[test]
fn identical_configs_give_identical_traces() {
    let cfg = locked_start();
    let a = run_transient(&cfg, &SimOptions::default()).unwrap();
    let b = run_transient(&cfg, &SimOptions::default()).unwrap();
    assert_eq!(a, b);
}
