use std::fs;
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lightgrating"));
    c.env_remove("LIGHTGRATING_OUT_DIR");
    c
}

const QUICK: &str = "[source]\nnodes = 2\n[velocity]\nnodes = 2\n[vertical]\nnodes = 2\n";

#[test]
fn constants_lists_the_catalog() {
    let out = bin().arg("constants").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("C60") && text.contains("C70"));
    assert!(text.contains("1.054571817e-34"));
}

#[test]
fn simulate_honours_the_output_override() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("quick.toml");
    fs::write(&config, QUICK).unwrap();
    let target = dir.path().join("elsewhere");
    let out = bin()
        .arg("simulate")
        .arg(&config)
        .env("LIGHTGRATING_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(target.join("pattern.csv").exists());
    assert!(target.join("summary.json").exists());
    assert!(!dir.path().join("out").exists());

    let out = bin()
        .args(["compare"])
        .arg(target.join("pattern.csv"))
        .arg(target.join("pattern.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("shift_um 0.000000"), "{text}");
    assert!(text.contains("nrmse 0.000000000"), "{text}");
}

#[test]
fn default_output_dir_is_next_to_the_config() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("quick.toml");
    fs::write(&config, format!("{QUICK}[run]\nmode = \"orders\"\n")).unwrap();
    let out = bin().arg("orders").arg(&config).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("out/orders.json").exists());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("absorbed 1 photon(s)"), "{text}");
}

#[test]
fn scan_writes_combined_table() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("quick.toml");
    fs::write(&config, QUICK).unwrap();
    let out = bin()
        .arg("scan")
        .arg(&config)
        .args(["--powers", "0,5"])
        .arg("--out-dir")
        .arg(dir.path().join("scan"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(dir.path().join("scan/scan_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[grating]\npower_w = -1\n").unwrap();
    let out = bin().arg("simulate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("grating.power_w") && err.contains("line 2"),
        "{err}"
    );

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "[grating]\ncolour = \"green\"\n").unwrap();
    assert_eq!(
        bin()
            .arg("simulate")
            .arg(&unknown)
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );

    let missing = dir.path().join("missing.toml");
    assert_eq!(
        bin()
            .arg("simulate")
            .arg(&missing)
            .output()
            .unwrap()
            .status
            .code(),
        Some(4)
    );

    let csv = dir.path().join("a.csv");
    fs::write(&csv, "position_um,intensity\n0,1\n2,0.5\n").unwrap();
    let other = dir.path().join("b.csv");
    fs::write(&other, "position_um,intensity\n0,1\n1,0.5\n").unwrap();
    let out = bin().arg("compare").arg(&csv).arg(&other).output().unwrap();
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(2));

    // single-node quadrature fails a strict convergence study
    let unconverged = dir.path().join("strict.toml");
    fs::write(
        &unconverged,
        "[source]\nnodes = 1\n[velocity]\nnodes = 1\n[vertical]\nnodes = 1\n[run]\nconvergence = \"strict\"\n",
    )
    .unwrap();
    assert_eq!(
        bin()
            .arg("simulate")
            .arg(&unconverged)
            .output()
            .unwrap()
            .status
            .code(),
        Some(3)
    );
}
