//! Pipelines behind the `csf` binary: evolve a configuration, write columnar
//! reports with a hashed manifest, and run the verification suites.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use csf_core::analysis::{
    charge_jump_check, peel_suite, peel_targets, poincare_harness, radial_vanishing_components, PoincareRegion, RatioReport,
};
use csf_core::energy::{audit_maxwell, audit_scalar, energy_breakdown, EnergyField};
use csf_core::evolve::{run, RunConfig, RunOutput, Scheme};
use csf_core::fields::fmt_f64;
use csf_core::report::{charge_report, energy_report, identity_report, peel_report, ratio_report};
use csf_core::tolerances::{CHARGE_DRIFT, CLOSED_FORM};
use csf_core::verify::{run_suite, Suite, VerifyOptions};
use csf_core::Error;
use sha2::{Digest, Sha256};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ACCEPTANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NAN: i32 = 3;

/// Energy growth allowed over the run relative to the `t = 0` value.
pub const ENERGY_GROWTH: f64 = 3.0;

/// Failure of a command with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn stage(stage: &str, e: Error) -> Self {
        let code = match e {
            Error::NanDetected { .. } => EXIT_NAN,
            _ => EXIT_ACCEPTANCE,
        };
        Self { code, message: format!("stage {stage} failed: {e}") }
    }

    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: format!("configuration error: {e}") }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_ACCEPTANCE, message: format!("{}: {e}", path.display()) }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Directory for artifacts: the flag, then `CSF_OUTPUT_DIR`, then `csf-out`.
pub fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("CSF_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("csf-out"))
}

/// Read a config file and apply `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(CliError::config)?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| CliError::config(format!("override '{o}' is not key=value")))?;
        cfg.set(k.trim(), v.trim()).map_err(CliError::config)?;
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

/// One acceptance row: a measured value against its threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `None` when the gate does not apply to this configuration.
    pub pass: Option<bool>,
}

impl Gate {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: Some(value <= threshold) }
    }

    fn skipped(name: &str) -> Self {
        Self { name: name.into(), value: f64::NAN, threshold: f64::NAN, pass: None }
    }
}

fn gate_text(gates: &[Gate]) -> String {
    let mut s = String::from("acceptance-report v1\n# gate value threshold status\n");
    for g in gates {
        let status = match g.pass {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "skip",
        };
        let _ = writeln!(s, "{} {} {} {status}", g.name, fmt_f64(g.value), fmt_f64(g.threshold));
    }
    s
}

/// Artifacts written by a pipeline, in write order.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Artifacts {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: vec![] })
    }

    fn write(&mut self, name: &str, text: String) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        self.files.push((name.to_string(), hex::encode(Sha256::digest(text.as_bytes()))));
        Ok(())
    }

    /// `manifest v1`: the seed and `name sha256` for every artifact.
    fn finish(self, seed: u64) -> CliResult<()> {
        let mut s = format!("manifest v1\nseed {seed}\n");
        for (name, hash) in &self.files {
            let _ = writeln!(s, "{name} {hash}");
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, s).map_err(|e| CliError::io(&path, e))
    }
}

/// Outcome of a pipeline: its gates and the exit code they imply.
pub struct Outcome {
    pub gates: Vec<Gate>,
    pub code: i32,
}

fn outcome(gates: Vec<Gate>) -> Outcome {
    let failed = gates.iter().any(|g| g.pass == Some(false));
    Outcome { gates, code: if failed { EXIT_ACCEPTANCE } else { EXIT_PASS } }
}

/// Evolve, then write monitor, charge, energy, peel, ratio and acceptance
/// reports plus a manifest into `dir`.
pub fn cmd_run(cfg: &RunConfig, seed: u64, dir: &Path) -> CliResult<Outcome> {
    let out = run(cfg).map_err(|e| CliError::stage("evolve", e))?;
    let mut art = Artifacts::new(dir)?;
    art.write("config.txt", cfg.to_text())?;
    art.write("monitor.txt", out.monitor_text())?;
    let q = out.monitors.first().map_or(0.0, |m| m.charge);
    art.write("charge.txt", charge_report(&out.monitors, &out.slices, q, cfg.chi_offset))?;
    if let Some(e) = out.failure.clone() {
        art.finish(seed)?;
        return Err(CliError::stage("evolve", e));
    }
    let gates = match cfg.scheme {
        Scheme::Sph1d => radial_stages(cfg, &out, q, &mut art)?,
        Scheme::Box3d => vec![
            Gate::at_most("gauss_residual_finite", if out.max_gauss.is_finite() { 0.0 } else { 1.0 }, 0.0),
            drift_gate(&out, q),
        ],
    };
    art.write("acceptance.txt", gate_text(&gates))?;
    art.finish(seed)?;
    Ok(outcome(gates))
}

fn drift_gate(out: &RunOutput, q: f64) -> Gate {
    if q.abs() < 1e-12 {
        return Gate::skipped("charge_drift");
    }
    Gate::at_most("charge_drift", out.charge_drift(), CHARGE_DRIFT)
}

fn radial_stages(cfg: &RunConfig, out: &RunOutput, q: f64, art: &mut Artifacts) -> CliResult<Vec<Gate>> {
    let charged = q.abs() >= 1e-12;
    let mut gates = vec![drift_gate(out, q)];

    let wp = cfg.weight_params().map_err(CliError::config)?;
    let window = (0.0, cfg.t_final);
    let stage = |e| CliError::stage("energy", e);
    let em = energy_breakdown(EnergyField::Maxwell, &out.slices, &wp, window, q, cfg.chi_offset).map_err(stage)?;
    let es = energy_breakdown(EnergyField::Scalar, &out.slices, &wp, window, 0.0, 0.0).map_err(stage)?;
    let am = audit_maxwell(&out.slices, &wp, window, q, cfg.chi_offset).map_err(stage)?;
    let asc = audit_scalar(&out.slices, &wp, window).map_err(stage)?;
    art.write("energy.txt", energy_report(&[("maxwell", &em), ("scalar", &es)], &[("maxwell", am), ("scalar", asc)]))?;
    for (name, e) in [("energy_growth_maxwell", &em), ("energy_growth_scalar", &es)] {
        let f0 = e.fixed_time_series.first().map_or(0.0, |x| x.1);
        let sup = e.fixed_time_series.iter().map(|x| x.1).fold(0.0, f64::max);
        gates.push(if f0 > 0.0 { Gate::at_most(name, sup / f0, ENERGY_GROWTH) } else { Gate::skipped(name) });
    }
    let finite = am.ratio.is_finite() && asc.ratio.is_finite();
    gates.push(Gate::at_most("audit_ratios_finite", if finite { 0.0 } else { 1.0 }, 0.0));

    let checks = peel_suite(&out.slices, q, cfg.chi_offset, cfg.s);
    let vanishing = radial_vanishing_components(&out.slices);
    art.write("peel.txt", peel_report(&checks, vanishing))?;
    for (c, (comp, locus, _)) in checks.iter().zip(peel_targets(cfg.s)) {
        let name = format!("peel:{}:{}", comp.label(), locus.label().replace(' ', ":"));
        if charged {
            let value = c.fit.as_ref().map_or(f64::NAN, |f| f.exponent());
            gates.push(Gate { name, value, threshold: c.bound, pass: Some(c.pass) });
        } else {
            gates.push(Gate::skipped(&name));
        }
    }
    gates.push(Gate::at_most("peel:vanishing_components", vanishing, CLOSED_FORM));

    if charged {
        let j = charge_jump_check(&out.slices, q, cfg.chi_offset, cfg.r0).map_err(|e| CliError::stage("peel", e))?;
        gates.push(Gate { pass: Some(j.exterior_ok()), ..Gate::at_most("jump:exterior", j.exterior_rel_err, 0.05) });
        let exp = j.interior_fit.as_ref().map_or(f64::NAN, |f| f.exponent());
        gates.push(Gate { pass: Some(j.interior_ok()), ..Gate::at_most("jump:interior_exponent", exp, -2.3) });
    } else {
        gates.push(Gate::skipped("jump:exterior"));
        gates.push(Gate::skipped("jump:interior_exponent"));
    }

    let stage = |e| CliError::stage("ratios", e);
    let mut ratios: Vec<RatioReport> = Vec::new();
    for (id, region, p, qq) in [
        ("poincare-full", PoincareRegion::Full, 0.0, 0.0),
        ("poincare-exterior", PoincareRegion::Exterior, 0.5, 0.0),
        ("poincare-interior", PoincareRegion::Interior, 0.5, -0.5),
    ] {
        let mut r = poincare_harness(&out.slices, region, p, qq).map_err(stage)?;
        r.id = id.to_string();
        ratios.push(r);
    }
    art.write("ratio.txt", ratio_report(&ratios))?;
    let finite = ratios.iter().all(|r| r.finite());
    gates.push(Gate::at_most("poincare_ratios_finite", if finite { 0.0 } else { 1.0 }, 0.0));
    Ok(gates)
}

/// Run one verification suite and write its reports into `dir`.
pub fn cmd_verify(suite: Suite, opts: &VerifyOptions, dir: &Path) -> CliResult<(String, i32)> {
    let rep = run_suite(suite, opts).map_err(|e| CliError::stage(suite.name(), e))?;
    let mut art = Artifacts::new(dir)?;
    let text = rep.to_text();
    art.write(&format!("verify-{}.txt", suite.name()), text.clone())?;
    if !rep.residuals.is_empty() {
        art.write(&format!("identity-{}.txt", suite.name()), identity_report(&rep.residuals))?;
    }
    if !rep.ratios.is_empty() {
        art.write(&format!("ratio-{}.txt", suite.name()), ratio_report(&rep.ratios))?;
    }
    art.finish(opts.seed)?;
    Ok((text, if rep.pass() { EXIT_PASS } else { EXIT_ACCEPTANCE }))
}

/// Check every manifest hash in `dir` and summarize the status columns of
/// the acceptance and verify reports found there.
pub fn cmd_report(dir: &Path) -> CliResult<(String, i32)> {
    let path = dir.join("manifest.txt");
    let manifest = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let mut s = String::from("summary v1\n");
    let mut code = EXIT_PASS;
    for line in manifest.lines().skip(2) {
        let Some((name, hash)) = line.split_once(' ') else { continue };
        let file = dir.join(name);
        let text = fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
        let ok = hex::encode(Sha256::digest(text.as_bytes())) == hash;
        if !ok {
            code = EXIT_ACCEPTANCE;
        }
        let fails = text.lines().filter(|l| l.ends_with(" fail") || *l == "status fail").count();
        if fails > 0 {
            code = EXIT_ACCEPTANCE;
        }
        let _ = writeln!(s, "{name} hash {} failures {fails}", if ok { "ok" } else { "mismatch" });
    }
    Ok((s, code))
}
