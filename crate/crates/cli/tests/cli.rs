use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn csf(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csf"))
        .args(args)
        .env("CSF_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "configs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn zero_run_passes_with_zero_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = csf(&["run", "--config", &config("zero.cfg")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let monitor = fs::read_to_string(tmp.path().join("monitor.txt")).unwrap();
    assert!(monitor.starts_with("csf-monitor v1\n"));
    for line in monitor.lines().skip(2) {
        assert!(line.split(' ').skip(1).all(|v| v == "0.0000000000000000e0"), "{line}");
    }
    let manifest = fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    for f in ["monitor.txt", "charge.txt", "energy.txt", "peel.txt", "ratio.txt", "acceptance.txt"] {
        assert!(manifest.contains(&format!("\n{f} ")), "{f} missing from manifest");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "run", "--config", &config("zero.cfg"), "--set", "recipe=charged-gaussian", "--set", "t_final=4"];
    let args: Vec<&str> = args.to_vec();
    assert_eq!(csf(&args, a.path()).status.code(), csf(&args, b.path()).status.code());
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
}

#[test]
fn charged_gaussian_meets_acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = csf(&["--threads", "1", "run", "--config", &config("charged_gaussian.cfg")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let acc = fs::read_to_string(tmp.path().join("acceptance.txt")).unwrap();
    assert!(!acc.contains(" fail\n") && !acc.contains(" skip\n"), "{acc}");
    let peel = fs::read_to_string(tmp.path().join("peel.txt")).unwrap();
    assert!(peel.starts_with("peel-report v1\n") && !peel.contains("fit error"));
    let ratio = fs::read_to_string(tmp.path().join("ratio.txt")).unwrap();
    assert!(ratio.starts_with("ratio-report v1\n"));
}

#[test]
fn invalid_configs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = csf(&["run", "--config", &config("bad.cfg")], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));
    let o = csf(&["run", "--config", &config("zero.cfg"), "--set", "bogus=1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = csf(&["run", "--config", "/nonexistent.cfg"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = csf(&["verify", "nope"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_inequality_suite_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let o = csf(&["verify", "inequalities", "--cases", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("status skipped"));
}

#[test]
fn verify_geometry_and_identities_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let o = csf(&["verify", "geometry", "--samples", "5000"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = csf(&["verify", "identities", "--h", "0.05", "--h2", "0.025"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let id = fs::read_to_string(tmp.path().join("identity-identities.txt")).unwrap();
    assert!(id.starts_with("identity-report v1\n"));
}

#[test]
fn report_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(csf(&["run", "--config", &config("zero.cfg")], tmp.path()).status.code(), Some(0));
    let o = csf(&["report"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("peel.txt hash ok"));
    fs::write(tmp.path().join("peel.txt"), "edited\n").unwrap();
    let o = csf(&["report"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("peel.txt hash mismatch"));
}

#[test]
fn output_flag_overrides_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let flag = flag_dir.path().to_string_lossy().into_owned();
    let o = csf(&["--out", &flag, "verify", "inequalities", "--cases", "0"], env_dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.path().join("verify-inequalities.txt").exists());
    assert!(!env_dir.path().join("verify-inequalities.txt").exists());
}
