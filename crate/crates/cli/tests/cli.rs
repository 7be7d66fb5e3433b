use std::path::Path;
use std::process::{Command, Output};

fn zzb_mimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zzb-mimo"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "[scenario]\nrx_elements = 6\ntx_elements = 2\nnum_targets = 1\n\
                     [snr_grid]\nstart_db = -10\nstop_db = 10\nstep_db = 10\n\
                     [bounds]\ncrb_samples = 50\n";

#[test]
fn bounds_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out.csv");
    let o = zzb_mimo(&["bounds", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# zzb-mimo-doa v1"));
    assert!(lines.next().unwrap().starts_with("sweep_value,snr_db,zzb,expected_crb,apb,mse,"));
    assert_eq!(lines.count(), 3);
    let table = zzb_core::experiment::read_csv(&out).unwrap();
    assert!(table.rows.iter().all(|r| r.mse.is_none()));
}

#[test]
fn stdout_when_no_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let o = zzb_mimo(&["bounds", "--config", &cfg]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("# zzb-mimo-doa v1\n"));
}

#[test]
fn thread_count_and_seed_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let run = |threads: &str, seed: &str| {
        let o = zzb_mimo(&["bounds", "--config", &cfg, "--threads", threads, "--seed", seed]);
        assert!(o.status.success());
        o.stdout
    };
    assert_eq!(run("1", "7"), run("3", "7"));
    assert_ne!(run("1", "7"), run("1", "8"));
}

#[test]
fn simulate_fills_mse_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.toml",
        &format!("{SMALL}[simulation]\ntrials = 20\ngrid_step_deg = 0.5\n"),
    );
    let o = zzb_mimo(&["simulate", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("sim.csv");
    std::fs::write(&out, &o.stdout).unwrap();
    let table = zzb_core::experiment::read_csv(&out).unwrap();
    assert!(table.rows.iter().all(|r| r.mse.is_some() && r.mse_stderr.is_some()));
}

#[test]
fn invalid_config_exits_2_and_names_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[scenario]\nrx_elements = 4\ntx_elements = 2\nnum_targets = 1\nprior_deg = [-95, 95]\n[snr_grid]\nstep_db = 0\n",
    );
    let o = zzb_mimo(&["bounds", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("snr_grid.step_db") && err.contains("scenario.prior_deg"), "{err}");

    let broken = write(dir.path(), "broken.toml", "[scenario\n");
    assert_eq!(zzb_mimo(&["bounds", "--config", &broken]).status.code(), Some(2));
    assert_eq!(zzb_mimo(&["bounds"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = zzb_mimo(&["bounds", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = write(dir.path(), "small.toml", SMALL);
    let bad_out = dir.path().join("no/such/dir/out.csv");
    let o = zzb_mimo(&["bounds", "--config", &cfg, "--out", bad_out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_reports_every_check() {
    let o = zzb_mimo(&["validate", "--preset", "fig1"]);
    assert!(o.status.success());
    let report = String::from_utf8(o.stdout).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("[PASS]")).count(), 9, "{report}");
    assert!(report.contains("8/8 checks passed"), "{report}");
}

#[test]
fn validate_flags_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "preset = \"fig2\"\n[oracle]\nenabled = true\n");
    let o = zzb_mimo(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] config"));
}

#[test]
fn unknown_preset_is_rejected() {
    let o = zzb_mimo(&["bounds", "--preset", "fig9"]);
    assert_eq!(o.status.code(), Some(2));
}
