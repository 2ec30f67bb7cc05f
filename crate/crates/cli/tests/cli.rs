use std::fs;
use std::path::Path;
use std::process::Command;

use pllforge::engine::TraceRow;
use pllforge::{paper_preset, simulate, PllConfig, SimTrace};
use pllforge_cli::{emit_plot_script, run_cli, write_trace_csv};
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pllforge"))
}

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["pllforge"];
    full.extend_from_slice(args);
    run_cli(full)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn row(t: f64, v: f64) -> TraceRow {
    TraceRow {
        t_s: t,
        v_ctrl_v: v,
        i_cp_a: 0.0,
        up: false,
        dn: true,
        f_vco_hz: 2.4e9,
        phase_err_rad: -0.01,
        div_level: true,
    }
}

#[test]
fn sim_preset_requiring_lock_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        run(&["sim", "--config", "preset", "--require-lock", "--out", out]),
        0
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lock_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["locked"], true);
    let f = report["f_out_steady_hz"].as_f64().unwrap();
    assert!((f / 2.4e9 - 1.0).abs() <= 1e-3);
}

#[test]
fn sim_output_is_the_library_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["sim", "--out", out]), 0);
    let (trace, _) = simulate(&paper_preset()).unwrap();
    let (header, rows) = read_csv(&dir.path().join("trace.csv"));
    assert_eq!(
        header.join(","),
        pllforge_cli::output::TRACE_HEADER.join(",")
    );
    assert_eq!(rows.len(), trace.rows.len());
    for (csv_row, r) in rows.iter().zip(&trace.rows) {
        assert_eq!(csv_row[0].parse::<f64>().unwrap(), r.t_s);
        assert_eq!(csv_row[1].parse::<f64>().unwrap(), r.v_ctrl_v);
        assert_eq!(csv_row[5].parse::<f64>().unwrap(), r.f_vco_hz);
    }
}

#[test]
fn unlockable_config_with_require_lock_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PllConfig {
        ref_freq_hz: 300e6,
        t_end_s: 1e-6,
        ..paper_preset()
    };
    let cfg_path = dir.path().join("fast.json");
    fs::write(&cfg_path, cfg.to_json_string()).unwrap();
    let out = dir.path().join("out");
    let args = [
        "sim",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--require-lock",
    ];
    assert_eq!(run(&args), 2);
    // outputs still written for inspection
    assert!(out.join("manifest.json").exists());
    assert_eq!(run(&args[..5]), 0);
}

#[test]
fn missing_config_exits_1_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.json");
    let o = bin()
        .args(["sim", "--config", missing.to_str().unwrap(), "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(missing.to_str().unwrap()), "{err}");
}

#[test]
fn invalid_override_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["sim", "--dt-s", "1e-9", "--out", out]), 1);
    assert_eq!(run(&["sim", "--t-end-s", "1e-8", "--out", out]), 1);
    assert_eq!(run(&["no-such-command"]), 1);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    assert_eq!(run(&["vco-sweep", "--out", out.to_str().unwrap()]), 3);
}

#[test]
fn vco_sweep_hits_the_center_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["vco-sweep", "--points", "15", "--out", out]), 0);
    let (header, rows) = read_csv(&dir.path().join("vco_sweep.csv"));
    assert_eq!(header, ["v_ctrl_v", "f_vco_hz"]);
    assert_eq!(rows.len(), 15);
    let parsed: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    assert!(parsed.contains(&(0.9, 3.208e9)));
    assert!(parsed.contains(&(1.8, 3.731e9)));
}

#[test]
fn manifest_lists_every_created_file() {
    for sub in ["sim", "design", "vco-sweep", "analyze", "preset"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        assert_eq!(run(&[sub, "--out", out.to_str().unwrap()]), 0, "{sub}");
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["subcommand"], sub);
        let mut listed: Vec<String> = manifest["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p.as_str().unwrap().to_string())
            .collect();
        let mut present: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path().to_str().unwrap().to_string())
            .collect();
        listed.sort();
        present.sort();
        assert_eq!(listed, present, "{sub}");
    }
}

#[test]
fn lock_range_respects_thread_cap_and_reports_both_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "lock-range",
            "--from-hz",
            "60e6",
            "--to-hz",
            "240e6",
            "--points",
            "3",
        ])
        .args(["--t-end-s", "1.5e-6", "--out"])
        .arg(dir.path())
        .env("PLLFORGE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("not simulated"));
    assert!(
        text.contains("7.0400e7") && text.contains("1.7300e8"),
        "{text}"
    );
    assert!(
        text.contains("1.0660e9") && text.contains("3.7310e9"),
        "{text}"
    );
    let (_, rows) = read_csv(&dir.path().join("lock_range.csv"));
    let locked: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(locked, ["0", "1", "0"]);

    let bad = bin()
        .args(["lock-range", "--points", "2", "--out"])
        .arg(dir.path())
        .env("PLLFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn preset_labels_reported_figures() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["preset", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("not simulated"));
    assert!(text.contains("260.03"));
    assert!(text.contains("111"));
}

#[test]
fn empty_trace_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    assert_eq!(write_trace_csv(&SimTrace::default(), &p).unwrap(), 0);
    assert_eq!(
        fs::read_to_string(&p).unwrap(),
        "t_s,v_ctrl_v,i_cp_a,up,dn,f_vco_hz,phase_err_rad,div_level\n"
    );
}

#[test]
fn plot_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let gp = dir.path().join("p.gp");

    emit_plot_script(&csv, "tuning_curve", &gp).unwrap();
    let s = fs::read_to_string(&gp).unwrap();
    assert!(s.contains("set xlabel \"Vctrl (V)\""));
    assert!(s.contains("set ylabel \"Frequency (Hz)\""));

    emit_plot_script(&csv, "acquisition", &gp).unwrap();
    let s = fs::read_to_string(&gp).unwrap();
    assert!(s.contains("using \"t_s\":\"v_ctrl_v\""));
    assert!(s.contains("using \"t_s\":\"f_vco_hz\""));

    emit_plot_script(&csv, "lock_range", &gp).unwrap();
    assert!(fs::read_to_string(&gp)
        .unwrap()
        .contains("\"f_out_steady_hz\""));

    let err = emit_plot_script(&csv, "bode", &dir.path().join("b.gp")).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let msg = err.to_string();
    for k in ["acquisition", "tuning_curve", "lock_range"] {
        assert!(msg.contains(k), "{msg}");
    }
    assert!(!dir.path().join("b.gp").exists());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trace_csv_round_trips(vs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..50)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let trace = SimTrace {
            rows: vs.iter().enumerate().map(|(i, &v)| row(i as f64 * 1e-10, v)).collect(),
            ..SimTrace::default()
        };
        prop_assert_eq!(write_trace_csv(&trace, &p).unwrap(), vs.len());
        let (_, rows) = read_csv(&p);
        prop_assert_eq!(rows.len(), vs.len());
        for (r, &v) in rows.iter().zip(&vs) {
            prop_assert_eq!(r[1].parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
