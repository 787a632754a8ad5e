use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coulomb-lab"));
    c.env_remove("COULOMB_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("coulomb-lab-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_2() {
    let d = scratch("usage");
    let small = write_config(&d, "resolutions = [[4, 17]]\n");
    assert_eq!(run(&["verify", "--config", &small]).status.code(), Some(2));

    let single = write_config(&d, "resolutions = [[8, 17]]\n");
    let out = run(&["converge", "--config", &single]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two resolutions"));

    assert_eq!(run(&["verify", "--suite", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--seed", "minus-one"]).status.code(), Some(2));
    assert_eq!(run(&["transmogrify"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
    let threads = bin().args(["verify", "--suite", "lemma-stokes"]).env("COULOMB_LAB_THREADS", "0").output().unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn flipped_tau_fails_bct_suite() {
    let d = scratch("bct");
    let ok = run(&["verify", "--suite", "lemma-bct", "--out", d.join("ok").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = run(&["verify", "--suite", "lemma-bct", "--flip-tau"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("lemma-bct/order"));

    let report = std::fs::read_to_string(d.join("ok/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["suites"][0]["name"], "lemma-bct");
    assert!(d.join("ok/lemma-bct__bct-residual.csv").exists());
    assert!(d.join("ok/timings.json").exists());
}

#[test]
fn threads_env_does_not_change_report() {
    let d = scratch("threads");
    for n in ["1", "3"] {
        let out = bin()
            .args(["verify", "--suite", "lemma-stokes", "--suite", "cor-kernel", "--seed", "5", "--out"])
            .arg(d.join(n))
            .env("COULOMB_LAB_THREADS", n)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read(d.join("1/report.json")).unwrap();
    let b = std::fs::read(d.join("3/report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decompose_certificate_round_trip_and_corruption() {
    let d = scratch("decompose");
    let out = run(&["decompose", "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = d.join("certificate.bin");
    assert_eq!(run(&["decompose", "--reload", cert.to_str().unwrap()]).status.code(), Some(0));

    let mut bytes = std::fs::read(&cert).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    let bad = d.join("corrupt.bin");
    std::fs::write(&bad, &bytes).unwrap();
    let out = run(&["decompose", "--reload", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrity"));
}
