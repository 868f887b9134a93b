use std::path::PathBuf;
use std::process::{Command, Output};

fn quasilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasilab")).args(args).output().expect("binary runs")
}

fn temp_file(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("quasilab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const PACK: &[&str] = &[
    "pack", "--preset", "koch", "--gen", "4", "--walks", "20000", "--seed", "3", "--delta", "0.037", "--alpha", "1.26",
    "--eta", "0.5",
];

#[test]
fn pack_output_is_byte_identical_across_runs_and_threads() {
    for format in ["json", "csv"] {
        let args = |threads: &'static str| {
            let mut v = vec!["--threads", threads, "--format", format];
            v.extend_from_slice(PACK);
            v
        };
        let a = quasilab(&args("1"));
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, quasilab(&args("1")).stdout);
        assert_eq!(a.stdout, quasilab(&args("4")).stdout);
    }
}

#[test]
fn json_carries_schema_and_resolved_config() {
    let mut args = vec!["--format", "json"];
    args.extend_from_slice(PACK);
    let out = quasilab(&args);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "pack");
    assert_eq!(v["config"]["seed"], 3);
    // Defaults are echoed too.
    assert_eq!(v["config"]["sign.rotation"], "both");
}

#[test]
fn csv_starts_with_config_header() {
    let mut args = vec!["--format", "csv"];
    args.extend_from_slice(PACK);
    let text = String::from_utf8(quasilab(&args).stdout).unwrap();
    assert!(text.lines().any(|l| l == "# seed = 3"), "{text}");
}

#[test]
fn config_file_values_and_flag_overrides() {
    let cfg = temp_file("pack.toml", "preset = \"koch\"\ngen = 4\nwalks = 20000\nseed = 3\ndelta = 0.037\nalpha = 1.26\neta = 0.1\n");
    let from_file = quasilab(&["--format", "json", "--config", cfg.to_str().unwrap(), "pack", "--eta", "0.5"]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let mut args = vec!["--format", "json"];
    args.extend_from_slice(PACK);
    assert_eq!(from_file.stdout, quasilab(&args).stdout);
}

#[test]
fn unknown_config_key_reports_line() {
    let cfg = temp_file("bogus.toml", "seed = 3\npreset = \"koch\"\nbogus = 1\n");
    let out = quasilab(&["pack", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus.toml:3") && err.contains("bogus"), "{err}");
}

#[test]
fn wrong_type_reports_line() {
    let cfg = temp_file("typed.toml", "seed = 3\n\n[sign]\nmeasure = 4\n");
    let out = quasilab(&["pack", "--preset", "koch", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("typed.toml:4"), "{err}");
}

#[test]
fn missing_seed_is_an_error() {
    let out = quasilab(&["measure", "--preset", "koch", "--gen", "3", "--walks", "100"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn exit_codes_separate_pass_fail() {
    let ok = quasilab(&["verify", "propagation", "--preset", "koch", "--surrogate"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let failed = quasilab(&["atlas-check", "--preset", "spiral:0.2:1.0"]);
    assert_eq!(failed.status.code(), Some(2), "{}", String::from_utf8_lossy(&failed.stderr));
}
