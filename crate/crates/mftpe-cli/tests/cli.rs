//! End-to-end runs of the `mftpe` binary.

use std::path::Path;
use std::process::{Command, Output};

use mftpe_core::image::Image;

const KEY: &str = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";
const NONCE: &str = "ffeeddccbbaa99887766554433221100";

fn mftpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mftpe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_test_png(path: &Path) {
    let img = Image::from_fn(32, 32, 3, |c, x, y| {
        ((x * 5) ^ (y * 3) ^ (c as u32 * 77)) as u8
    })
    .unwrap();
    std::fs::write(path, img.to_png_bytes().unwrap()).unwrap();
}

#[test]
fn golden_passes() {
    let out = mftpe(&["golden"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("930"));
    assert!(text.contains("183366"));
    assert!(text.contains("642"));
    assert!(text.contains("golden: PASS"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn encrypt_decrypt_roundtrip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("a.png");
    write_test_png(&png);
    let env1 = dir.path().join("a1.mftpe");
    let env2 = dir.path().join("a2.mftpe");
    let back = dir.path().join("back.png");

    for env in [&env1, &env2] {
        let out = mftpe(&[
            "encrypt",
            "--in",
            png.to_str().unwrap(),
            "--profile",
            "sum-weighted",
            "--block",
            "8",
            "--rounds",
            "2",
            "--key",
            KEY,
            "--nonce",
            NONCE,
            "--out",
            env.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    // Identical invocations give byte-identical envelopes.
    assert_eq!(std::fs::read(&env1).unwrap(), std::fs::read(&env2).unwrap());

    let out = mftpe(&[
        "decrypt",
        "--in",
        env1.to_str().unwrap(),
        "--key",
        KEY,
        "--out",
        back.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // Same encoder both sides, so the files match byte for byte.
    assert_eq!(std::fs::read(&png).unwrap(), std::fs::read(&back).unwrap());
}

#[test]
fn thumbnail_outputs_plain_and_secondary() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("a.png");
    write_test_png(&png);
    let thumb = dir.path().join("t.png");
    let out = mftpe(&[
        "thumbnail",
        "--in",
        png.to_str().unwrap(),
        "--block",
        "8",
        "--profile",
        "sum-range",
        "--out",
        thumb.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["thumbnail"]["width"], 4);
    assert!(thumb.exists());
    assert!(dir.path().join("t.secondary.png").exists());

    let decoded = Image::from_png_bytes(&std::fs::read(&thumb).unwrap()).unwrap();
    assert_eq!((decoded.width(), decoded.height()), (4, 4));
}

#[test]
fn collide_pair_reports_agreement() {
    let out = mftpe(&["collide", "--d", "1", "--n", "2", "--mode", "pair", "--oracle"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["formula"]["psi_power"]["rational"], "3/8");
    assert_eq!(report["oracle"]["rational"], "3/8");
    assert_eq!(report["agreement"]["psi_power"], true);
    assert_eq!(report["agreement"]["permutation_reading"], false);
}

#[test]
fn collide_chain_mode() {
    let out = mftpe(&[
        "collide", "--d", "1", "--n", "1", "--m", "1", "--mode", "chain", "--sums", "0;0;0",
        "--oracle",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["formula"]["normalized"]["rational"], "5/8");
    assert_eq!(report["oracle"]["rational"], "1/1");
}

#[test]
fn analyze_and_noise_flow() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("a.png");
    write_test_png(&png);
    let env = dir.path().join("a.mftpe");
    let noisy = dir.path().join("noisy.mftpe");
    let csv = dir.path().join("hist.csv");

    let out = mftpe(&[
        "encrypt", "--in", png.to_str().unwrap(), "--profile", "sum-only", "--group-size", "3",
        "--block", "8", "--rounds", "1", "--key", KEY, "--nonce", NONCE, "--out",
        env.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = mftpe(&[
        "noise", "--in", env.to_str().unwrap(), "--kind", "salt-pepper", "--density", "0.05",
        "--seed", "7", "--out", noisy.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = mftpe(&[
        "analyze",
        "--in",
        noisy.to_str().unwrap(),
        "--pairs",
        "500",
        "--hist-csv",
        csv.to_str().unwrap(),
        "--compare",
        env.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["width"], 32);
    assert!(report["comparison"]["psnr_db"].is_number());
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("value,channel0,channel1,channel2"));
    assert_eq!(csv_text.lines().count(), 257);
}

#[test]
fn exit_codes() {
    // Usage error: 1.
    let out = mftpe(&["encrypt", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = mftpe(&["collide", "--d", "1", "--n", "1", "--mode", "fixed"]);
    assert_eq!(out.status.code(), Some(1), "fixed mode without sums is a usage error");

    // I/O error: 2.
    let out = mftpe(&[
        "decrypt", "--in", "/nonexistent/x.mftpe", "--key", KEY, "--out", "/tmp/never.png",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Weights rejected outside the weighted profile.
    let out = mftpe(&[
        "encrypt", "--in", "/tmp/whatever.png", "--profile", "sum-range", "--weights", "1,2,3",
        "--key", KEY, "--nonce", NONCE, "--out", "/tmp/never.mftpe",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Help exits 0.
    let out = mftpe(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn key_and_nonce_files_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("a.png");
    write_test_png(&png);
    let keyfile = dir.path().join("key.hex");
    let noncefile = dir.path().join("nonce.hex");
    std::fs::write(&keyfile, format!("{KEY}\n")).unwrap();
    std::fs::write(&noncefile, format!("{NONCE}\n")).unwrap();
    let env = dir.path().join("a.mftpe");

    let out = mftpe(&[
        "encrypt",
        "--in",
        png.to_str().unwrap(),
        "--key-file",
        keyfile.to_str().unwrap(),
        "--nonce-file",
        noncefile.to_str().unwrap(),
        "--block",
        "16",
        "--out",
        env.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Same parameters via flags produce the same envelope.
    let env2 = dir.path().join("b.mftpe");
    let out = mftpe(&[
        "encrypt", "--in", png.to_str().unwrap(), "--key", KEY, "--nonce", NONCE, "--block",
        "16", "--out", env2.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&env).unwrap(), std::fs::read(&env2).unwrap());
}

#[test]
fn weights_roundtrip_through_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("a.png");
    write_test_png(&png);
    let env_path = dir.path().join("a.mftpe");
    let out = mftpe(&[
        "encrypt", "--in", png.to_str().unwrap(), "--profile", "sum-weighted", "--weights",
        "9,1,200", "--block", "8", "--rounds", "1", "--key", KEY, "--nonce", NONCE, "--out",
        env_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let bytes = std::fs::read(&env_path).unwrap();
    let env = mftpe_core::CiphertextEnvelope::from_bytes(&bytes).unwrap();
    assert_eq!(env.profile.weights(), Some([9, 1, 200]));

    let back = dir.path().join("back.png");
    let out = mftpe(&[
        "decrypt", "--in", env_path.to_str().unwrap(), "--key", KEY, "--out",
        back.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&png).unwrap(), std::fs::read(&back).unwrap());
}
