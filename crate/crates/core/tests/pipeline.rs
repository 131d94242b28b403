use memsim_core::config::RunConfig;
use memsim_core::sweep::{all_pass, Pipeline, FIG3_COLUMNS};
use memsim_core::Error;

fn config(durations: &[f64]) -> RunConfig {
    RunConfig { durations: durations.to_vec(), grid_n: 1024, ..RunConfig::default() }
}

#[test]
fn writes_every_table_with_the_parameter_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { emit_envelope: true, emit_green: true, emit_oracle: true, ..config(&[8.0, 12.0]) };
    let pipeline = Pipeline::new(&cfg).unwrap();
    let runs = pipeline.run_all(2).unwrap();
    let written = pipeline.write_outputs(dir.path(), &runs).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for name in [
        "fig3.csv",
        "fig2_8.csv",
        "fig2_12.csv",
        "envelope_8.csv",
        "green_12.csv",
        "oracle_8.csv",
        "report.json",
        "summary.txt",
        "timings.json",
    ] {
        assert!(names.iter().any(|n| n == name), "{name} missing from {names:?}");
    }
    for name in ["fig3.csv", "fig2_8.csv", "envelope_8.csv", "green_12.csv", "oracle_8.csv", "summary.txt"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# cooperativity = 200.0\n"), "{name}");
        assert!(text.contains(&format!("# kappa_rad_s = {:?}\n", pipeline.params.kappa)), "{name}");
    }
    let fig3 = std::fs::read_to_string(dir.path().join("fig3.csv")).unwrap();
    let mut data = fig3.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(data.next().unwrap(), FIG3_COLUMNS.join(","));
    assert_eq!(data.count(), 2);
    let envelope = std::fs::read_to_string(dir.path().join("envelope_8.csv")).unwrap();
    assert!(envelope.contains("\ntau,E0,dE0_dt\n"));
    let fig2 = std::fs::read_to_string(dir.path().join("fig2_8.csv")).unwrap();
    assert!(fig2.contains("\ntau,abs_S,spin_pop,phi_s,re_Omega,im_Omega,abs_Omega\n"));
    assert!(all_pass(&runs));
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let cfg = config(&[4.0, 8.0, 12.0, 16.0, 20.0]);
    let pipeline = Pipeline::new(&cfg).unwrap();
    let a = pipeline.run_all(1).unwrap();
    let b = pipeline.run_all(5).unwrap();
    assert_eq!(pipeline.fig3_csv(&a), pipeline.fig3_csv(&b));
    assert_eq!(pipeline.report_json(&a), pipeline.report_json(&b));
    assert_eq!(pipeline.summary(&a), pipeline.summary(&b));
    let taus: Vec<f64> = a.iter().map(|r| r.tau_total).collect();
    assert_eq!(taus, cfg.durations);
}

#[test]
fn short_pulse_is_flagged_but_the_sweep_continues() {
    let cfg = config(&[4.0, 20.0]);
    let pipeline = Pipeline::new(&cfg).unwrap();
    let runs = pipeline.run_all(2).unwrap();
    let short = runs[0].outcome.as_ref().unwrap();
    assert!(!short.regime.depletion.pass);
    assert!(!short.checks.pass);
    assert!(runs[1].outcome.as_ref().unwrap().checks.pass);
    assert!(!all_pass(&runs));
    let report: serde_json::Value = serde_json::from_str(&pipeline.report_json(&runs)).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(false));
    assert_eq!(report["points"].as_array().unwrap().len(), 2);
}

#[test]
fn failing_duration_is_reported_as_an_error_row() {
    // a cap this tight clips most of the control
    let mut cfg = config(&[8.0]);
    cfg.control.omega_cap_factor = 0.01;
    let pipeline = Pipeline::new(&cfg).unwrap();
    let runs = pipeline.run_all(1).unwrap();
    assert!(runs[0].outcome.as_ref().unwrap_err().contains("exceeds cap"));
    assert!(pipeline.summary(&runs).contains("error:"));
    assert_eq!(pipeline.fig3_csv(&runs).lines().filter(|l| !l.starts_with('#')).count(), 1);
}

#[test]
fn empty_sweep_is_a_configuration_error() {
    let cfg = config(&[]);
    assert!(matches!(Pipeline::new(&cfg), Err(Error::Config { .. })));
}

#[test]
fn report_carries_acceptance_metrics() {
    let cfg = config(&[12.0]);
    let pipeline = Pipeline::new(&cfg).unwrap();
    let runs = pipeline.run_all(1).unwrap();
    let report: serde_json::Value = serde_json::from_str(&pipeline.report_json(&runs)).unwrap();
    let point = &report["points"][0]["result"];
    for key in ["matching_residual", "eta_rel_diff", "liouville_error", "omega_max"] {
        assert!(point[key].is_number(), "{key}");
    }
    for key in ["eta", "eta_green", "sum_rule_d", "sum_rule_s", "g_dminus_sq", "depletion"] {
        assert!(point["budget"][key].is_number(), "{key}");
    }
    assert_eq!(point["checks"]["pass"], serde_json::Value::Bool(true));
}

#[test]
fn shipped_config_matches_the_defaults() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.conf");
    assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
}

#[test]
fn fuzz_seeds_do_not_panic() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for entry in std::fs::read_dir(root.join("config_parse")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let _ = RunConfig::parse(&text).map(|c| c.validate());
    }
    for entry in std::fs::read_dir(root.join("number_list")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let _ = memsim_core::config::parse_number_list(&text);
    }
}
