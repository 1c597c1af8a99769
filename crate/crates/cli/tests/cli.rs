//! The `ncap` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use ncap_cli::RESULTS_HEADER;

fn ncap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncap")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TINY: &str = r#"
channel = "awgn"
snr_db_list = [0, 10]
estimators = ["mine", { method = "smile", label = "smile_wide", tau = 1.0 }]

[train]
phase0_iters = 50
max_iters = 150
convergence_window = 50
rounds = 2
eval_samples = 2000
critic_hidden = [8]
nit_hidden = [8]
"#;

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let out = dir.path().join("out");
    let o = ncap(&["run", &cfg, "--out-dir", out.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(RESULTS_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][..3], ["awgn", "0", "mine"]);
    assert_eq!(rows[3][..3], ["awgn", "10", "smile_wide"]);
    assert!(rows.iter().all(|r| r[5] == "2"));
    // AWGN references are the closed form; no published bounds
    assert_eq!(rows[2][7], "1.19895");
    assert!(rows[2][8].is_empty() && rows[2][9].is_empty());

    for name in ["awgn_0dB_mine", "awgn_10dB_smile_wide"] {
        let trace = std::fs::read_to_string(out.join("traces").join(format!("{name}.csv"))).unwrap();
        assert!(trace.starts_with("iteration,estimate\n"));
        let hist = std::fs::read_to_string(out.join("histograms").join(format!("{name}.csv"))).unwrap();
        assert!(hist.starts_with("bin_left,bin_right,count,density\n"));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["exit_code"], 0);
    assert_eq!(summary["cells"].as_array().unwrap().len(), 4);
    assert_eq!(summary["cells"][1]["spec"]["tau"], 1.0);
}

#[test]
fn bad_configs_exit_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "channel = \"awgn\"\nsnr_db_list = [2]\nestimators = [\"nwj\"]\n",
    );
    for cmd in ["validate", "run"] {
        let o = ncap(&[cmd, &cfg]);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("line 3") && err.contains("nwj"), "{err}");
    }
    let o = ncap(&["validate", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_lists_applied_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.toml", "channel = \"optical\"\nsnr_db_list = [5]\nestimators = [\"chi_square\"]\n");
    let o = ncap(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("1 cells"), "{text}");
    assert!(text.contains("default noise_variance = 1.0"), "{text}");
}

#[test]
fn reference_reports_closed_form_and_bounds() {
    let o = ncap(&["reference", "awgn", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("closed form       2.30756 nats"), "{text}");

    let o = ncap(&["reference", "optical", "10"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("published bounds  [0.830000, 1.48000] nats"), "{text}");
    assert!(text.contains("blahut-arimoto"), "{text}");

    assert_ne!(ncap(&["reference", "fiber", "10"]).status.code(), Some(0));
}
