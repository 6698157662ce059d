use std::fs;

use twostage_mimo::cli::run_cli;
use twostage_mimo::io::{config_echo, parse_config_text, render_results, CSV_HEADER};
use twostage_mimo::scenario::{experiment_se_vs_snr, ScenarioConfig};

#[test]
fn selftest_exits_cleanly() {
    assert_eq!(run_cli(["twostage-sim", "selftest"]), 0);
}

#[test]
fn empty_config_file_gives_defaults() {
    assert_eq!(parse_config_text("", ScenarioConfig::default()).unwrap(), ScenarioConfig::default());
    assert_eq!(parse_config_text("# only a comment\n\n", ScenarioConfig::default()).unwrap(), ScenarioConfig::default());
}

#[test]
fn config_echo_roundtrips() {
    for cfg in [ScenarioConfig::default(), ScenarioConfig::desk(), ScenarioConfig { seed: 99, trials: 7, ..ScenarioConfig::desk() }]
    {
        assert_eq!(parse_config_text(&config_echo(&cfg), ScenarioConfig::default()).unwrap(), cfg);
    }
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "N_t = 64\nnot_a_key = 3\n").unwrap();
    let out = dir.path().to_str().unwrap();
    assert_ne!(run_cli(["twostage-sim", "se-vs-snr", "--config", path.to_str().unwrap(), "--out", out]), 0);
    assert_ne!(run_cli(["twostage-sim", "se-vs-snr", "--set", "N_c=99", "--out", out]), 0);
}

#[test]
fn snr_run_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["twostage-sim", "se-vs-snr", "--preset", "desk", "--trials", "4", "--snr-grid", "-10:10:10", "--seed", "5", "--out", out];
    assert_eq!(run_cli(args), 0);
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 1 + 3 * 3);

    let cfg = ScenarioConfig { trials: 4, seed: 5, ..ScenarioConfig::desk() };
    let lib = experiment_se_vs_snr(&cfg, &[-10.0, 0.0, 10.0]).unwrap();
    assert_eq!(csv, render_results(&lib.records));

    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("# config_source: defaults (desk preset)"));
    assert!(manifest.contains("# seed: 5"));
    let echoed: String = manifest.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let back = parse_config_text(&echoed, ScenarioConfig::default()).unwrap();
    assert_eq!(back.trials, 4);
    assert_eq!(back.num_tx, cfg.num_tx);
}
