//! End-to-end checks of the command-line interface: artifact determinism,
//! exit-code mapping, and the report aggregator's config-hash guard.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qhavg")
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

const SQUARE_CFG: &str = r#"
[spec]
kind = "unit_cube"
n = 2

[run]
z0 = [0.5, 0.5]
s_grid = [1.0]
h_list = [0.0625]
truncation_list = [1]
seed = 1
"#;

#[test]
fn rasterize_artifacts_are_byte_identical_across_reruns() {
    let dir = tmp("cli_determinism");
    let cfg = write_config(&dir, "cfg.toml", SQUARE_CFG);
    let (out1, out2) = (dir.join("out1"), dir.join("out2"));

    for out in [&out1, &out2] {
        let r = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "rasterize",
        ]);
        assert!(
            r.status.success(),
            "rasterize failed: {}",
            String::from_utf8_lossy(&r.stderr)
        );
    }

    let mut names: Vec<String> = fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(
        names.iter().any(|n| n.ends_with(".bin")),
        "expected a raster artifact, got {names:?}"
    );
    assert!(
        names.iter().any(|n| n.ends_with(".manifest.json")),
        "expected a manifest, got {names:?}"
    );
    for name in &names {
        if name.ends_with(".manifest.json") {
            // Manifests carry wall time; everything else must be identical.
            continue;
        }
        let (a, b) = (
            fs::read(out1.join(name)).unwrap(),
            fs::read(out2.join(name)).unwrap(),
        );
        assert_eq!(a, b, "artifact {name} differs between reruns");
    }

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out1.join("rasterize.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["subcommand"], "rasterize");
    assert_eq!(manifest["exit_code"], 0);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    assert!(!manifest["artifacts"].as_array().unwrap().is_empty());
}

#[test]
fn solve_rejects_a_base_point_outside_the_domain() {
    let dir = tmp("cli_outside_base");
    let cfg = write_config(
        &dir,
        "cfg.toml",
        &SQUARE_CFG.replace("z0 = [0.5, 0.5]", "z0 = [1.5, 0.5]"),
    );
    let out = dir.join("out");
    let r = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "solve",
    ]);
    assert_eq!(r.status.code(), Some(1), "outside base point must exit 1");
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("outside"), "stderr should explain: {err}");
}

#[test]
fn refused_certificate_exits_three() {
    let dir = tmp("cli_refused");
    let cfg = write_config(
        &dir,
        "cfg.toml",
        r#"
[spec]
kind = "cusp"
alpha = 3.0
n = 2

[run]
z0 = [0.75, 0.0]
s_grid = [1.0]
h_list = [0.0625]
truncation_list = [1]

[tubes]
family = "cusp"
count = 8
s_list = [1.0]
"#,
    );
    let out = dir.join("out");
    // The cusp tube series converges at s = 1, so no divergence certificate
    // can be issued there.
    let r = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "tubes",
    ]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "convergent series must refuse the certificate: {}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn report_refuses_manifests_from_a_different_config() {
    let dir = tmp("cli_report_hash");
    let cfg = write_config(&dir, "cfg.toml", SQUARE_CFG);
    let out = dir.join("out");

    let r = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "rasterize",
    ]);
    assert!(r.status.success());

    // Same config aggregates fine.
    let r = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "report",
    ]);
    assert!(
        r.status.success(),
        "report with matching hash failed: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(out.join("report.json").exists());

    // A config that means something else must be refused.
    let other = write_config(
        &dir,
        "other.toml",
        &SQUARE_CFG.replace("s_grid = [1.0]", "s_grid = [2.0]"),
    );
    let r = run(&[
        "--config",
        other.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "report",
    ]);
    assert_eq!(r.status.code(), Some(1), "hash mismatch must exit 1");
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(
        err.contains("config hash"),
        "stderr should name the mismatch: {err}"
    );
}
