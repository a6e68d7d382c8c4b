use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn contour(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contour")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = contour(&full);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &dest);
        } else {
            std::fs::copy(entry.path(), dest).unwrap();
        }
    }
}

struct Setup {
    dir: tempfile::TempDir,
    genesis: String,
    address: String,
}

impl Setup {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Chain with a funded wallet and release files on disk.
fn setup() -> Setup {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let init = ok_json(&["sim", "init", "--dir", s(&p("chain")), "--seed", "7"]);
    let key = ok_json(&["authority", "keygen", "--out", s(&p("wallet.json")), "--seed", "cli test"]);
    ok_json(&["sim", "fund", "--chain", s(&p("chain")), "--wallet", s(&p("wallet.json"))]);
    ok_json(&["sim", "mine", "--chain", s(&p("chain"))]);

    let mut batch = String::new();
    for (i, name) in ["pool/a_1.0_all.deb", "pool/b_2.0_all.deb", "pool/c_3.0_all.deb"].iter().enumerate() {
        let path = p("published").join(name);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        let bytes = format!("release {i}");
        std::fs::write(&path, &bytes).unwrap();
        let digest = contour::hashmerkle::sha256(bytes.as_bytes());
        batch.push_str(&format!("{} {name}\n", digest.to_hex()));
    }
    std::fs::write(p("batch.txt"), batch).unwrap();
    Setup {
        genesis: init["genesis"].as_str().unwrap().to_string(),
        address: key["address"].as_str().unwrap().to_string(),
        dir,
    }
}

fn commit_and_prove(t: &Setup, chain: &str, wallet: &str, tag: &str) -> PathBuf {
    let batch_out = t.path(&format!("{tag}.batch.json"));
    ok_json(&[
        "authority",
        "commit",
        "--chain",
        chain,
        "--wallet",
        wallet,
        "--from-batch-file",
        s(&t.path("batch.txt")),
        "--batch-out",
        s(&batch_out),
    ]);
    ok_json(&["sim", "mine", "--chain", chain, "--count", "7"]);
    let proof = t.path(&format!("{tag}.proof"));
    ok_json(&["authority", "prove", "--chain", chain, "--batch", s(&batch_out), "--index", "1", "--out", s(&proof)]);
    proof
}

#[test]
fn honest_proof_accepted_fork_proof_rejected() {
    let t = setup();
    copy_dir(&t.path("chain"), &t.path("fork"));
    std::fs::copy(t.path("wallet.json"), t.path("fork-wallet.json")).unwrap();
    // the fork mines at a different cadence so its blocks differ
    ok_json(&["sim", "mine", "--chain", s(&t.path("fork")), "--interval", "601"]);

    let honest = commit_and_prove(&t, s(&t.path("chain")), s(&t.path("wallet.json")), "honest");
    let forked = commit_and_prove(&t, s(&t.path("fork")), s(&t.path("fork-wallet.json")), "fork");

    let store = t.path("headers.bin");
    let checkpoint = format!("{}:0", t.genesis);
    let sync = ok_json(&[
        "auditor", "sync", "--chain", s(&t.path("chain")), "--store", s(&store), "--checkpoint", &checkpoint, "--now", "5000",
    ]);
    assert_eq!(sync["tip_height"], 9);

    let file = t.path("published/pool/b_2.0_all.deb");
    let verify = |proof: &Path, now: &str| {
        contour(&[
            "auditor",
            "verify",
            "--store",
            s(&store),
            "--proof",
            s(proof),
            "--file",
            s(&file),
            "--authority-addr",
            &t.address,
            "--now",
            now,
        ])
    };
    let good = verify(&honest, "5000");
    assert_eq!(good.status.code(), Some(0), "{}", String::from_utf8_lossy(&good.stdout));
    assert!(String::from_utf8_lossy(&good.stdout).starts_with("ACCEPT"));

    let bad = verify(&forked, "5000");
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("not in the verified header set"));

    // accepted, but nothing new for longer than three hours
    assert_eq!(verify(&honest, "20801").status.code(), Some(3));
    assert_eq!(verify(&honest, "15800").status.code(), Some(0));

    let wrong_file = t.path("published/pool/a_1.0_all.deb");
    let out = contour(&[
        "auditor", "verify", "--store", s(&store), "--proof", s(&honest), "--file", s(&wrong_file), "--authority-addr",
        &t.address, "--now", "5000",
    ]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(t.path("garbage.proof"), b"CNTR\x01short").unwrap();
    assert_eq!(verify(&t.path("garbage.proof"), "5000").status.code(), Some(2));
}

#[test]
fn monitor_and_archivist_see_published_batch() {
    let t = setup();
    let chain = t.path("chain");
    commit_and_prove(&t, s(&chain), s(&t.path("wallet.json")), "b");
    let published = t.path("published");

    let scan = |data: &Path| {
        contour(&["monitor", "scan", "--addr", &t.address, "--blocks", s(&chain), "--data-url", s(data)])
    };
    let missing = scan(&published);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stdout).contains("ALERT"));

    let written = ok_json(&["authority", "manifest", "--batch", s(&t.path("b.batch.json")), "--out-dir", s(&published)]);
    assert!(written["written"].is_string());
    let seen = scan(&published);
    assert_eq!(seen.status.code(), Some(0), "{}", String::from_utf8_lossy(&seen.stdout));
    assert!(String::from_utf8_lossy(&seen.stdout).contains(" available"));

    let round = ok_json(&[
        "archivist",
        "serve",
        "--once",
        "--authority-addr",
        &t.address,
        "--data-url",
        s(&published),
        "--root-dir",
        s(&t.path("archive")),
        "--blocks",
        s(&chain),
    ]);
    assert_eq!(round["stored"], 1);
    assert_eq!(round["covered_height"], 9);
}

#[test]
fn delayed_manifest_waits_for_depth() {
    let t = setup();
    let chain = t.path("chain");
    let batch = t.path("d.batch.json");
    ok_json(&[
        "authority",
        "commit",
        "--chain",
        s(&chain),
        "--wallet",
        s(&t.path("wallet.json")),
        "--from-batch-file",
        s(&t.path("batch.txt")),
        "--batch-out",
        s(&batch),
    ]);
    ok_json(&["sim", "mine", "--chain", s(&chain), "--count", "2"]);
    let out_dir = t.path("m");
    let args = ["authority", "manifest", "--batch", s(&batch), "--out-dir", s(&out_dir), "--chain", s(&chain)];
    let mut delayed = args.to_vec();
    delayed.extend(["--delay-until-confirmations", "3"]);
    assert!(ok_json(&delayed)["written"].is_null());
    ok_json(&["sim", "mine", "--chain", s(&chain), "--count", "2"]);
    assert!(ok_json(&delayed)["written"].is_string());
}

#[test]
fn config_file_supplies_defaults() {
    let t = setup();
    let chain = t.path("chain");
    let cfg = t.path("contour.toml");
    std::fs::write(&cfg, format!("[shared]\naddr = \"{}\"\n[monitor]\ndata-url = \"{}\"\n", t.address, s(&t.path("published"))))
        .unwrap();
    let out = contour(&["monitor", "scan", "--config", s(&cfg), "--blocks", s(&chain)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(contour(&["--help"]).status.code(), Some(0));
    assert_eq!(contour(&["auditor", "verify", "--help"]).status.code(), Some(0));
    assert_eq!(contour(&["--version"]).status.code(), Some(0));
    assert_eq!(contour(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(contour(&["auditor", "verify"]).status.code(), Some(1));
    let out = contour(&["auditor", "verify", "--store", "/nonexistent", "--proof", "x", "--digest", &"00".repeat(32), "--authority-addr", "1BoatSLRHtKNngkdXEeobR76b53LETtpyT"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cost_defaults() {
    let v = ok_json(&["cost", "--curve"]);
    assert_eq!(v["split_view"]["rigs"], 3417);
    assert_eq!(v["majority"]["rigs"], 851_346);
    let slope = v["curve"].as_array().unwrap().len();
    assert_eq!(slope, 7);
    let text = contour(&["cost"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("volatile"));
    assert_eq!(contour(&["cost", "--rig-hashrate", "0"]).status.code(), Some(1));
}

#[test]
fn debfeed_batch_file_commits() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/debian");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("batch.txt");
    let v = ok_json(&[
        "debfeed",
        "diff",
        "--prev",
        s(&fixtures.join("Packages.prev")),
        "--cur",
        s(&fixtures.join("Packages.cur")),
        "--out",
        s(&out),
    ]);
    assert_eq!(v["statements"], 49);
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 49);
}

#[test]
fn scenarios_run() {
    let v = ok_json(&["sim", "run", "split-view"]);
    assert_eq!(v["honest_verdict"]["Err"], "UnknownHeader");
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["sim", "run", "withholding", "--work-dir", s(dir.path())]);
    assert_eq!(v["withheld_coverage"], "not_covered");
}
