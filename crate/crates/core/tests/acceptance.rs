//! Acceptance criteria. Runs as a plain program so that one status line per
//! criterion is always printed; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use csf_core::analysis::{charge_jump_check, charge_peel_check, peel_suite, radial_vanishing_components};
use csf_core::energy::{audit_maxwell, audit_scalar, energy_breakdown, AuditRatio, EnergyField};
use csf_core::evolve::{run, RunConfig, RunOutput};
use csf_core::tolerances::{CHARGE_DRIFT, CLOSED_FORM};
use csf_core::verify::{
    convergence_suite, geometry_suite, identities_suite, inequalities_suite, morawetz_positivity, Check, VerifyOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, budget: Duration, elapsed: Duration, o: Outcome) -> bool {
    let in_time = elapsed <= budget;
    let pass = o.pass && in_time;
    println!(
        "criterion {id} {name}: {} ({}; {:.1} s of {} s)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn failed_checks(checks: &[Check]) -> String {
    let f: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{}={:e}", c.name, c.value)).collect();
    if f.is_empty() {
        format!("{} checks", checks.len())
    } else {
        format!("failed: {}", f.join(", "))
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

struct Charged {
    cfg: RunConfig,
    coarse: RunOutput,
    fine: RunOutput,
    q: f64,
}

fn charged_runs() -> Charged {
    let cfg = RunConfig::default();
    let coarse = run(&cfg).expect("coarse run");
    let fine = run(&RunConfig { n: 2 * cfg.n, h: cfg.h / 2.0, ..cfg.clone() }).expect("fine run");
    let q = coarse.monitors[0].charge;
    Charged { cfg, coarse, fine, q }
}

fn audits(c: &Charged, out: &RunOutput) -> (AuditRatio, AuditRatio) {
    let wp = c.cfg.weight_params().unwrap();
    let w = (0.0, c.cfg.t_final);
    (audit_maxwell(&out.slices, &wp, w, c.q, c.cfg.chi_offset).unwrap(), audit_scalar(&out.slices, &wp, w).unwrap())
}

fn main() {
    let mut all = true;
    let secs = Duration::from_secs;
    let opts = VerifyOptions::default();

    let (rep, dt) = timed(|| geometry_suite(&opts));
    let checks: Vec<Check> = rep.checks.iter().filter(|c| !c.name.starts_with("morawetz")).cloned().collect();
    let o = Outcome { pass: checks.iter().all(|c| c.pass), detail: format!("{} points, {}", opts.samples, failed_checks(&checks)) };
    all &= report(1, "geometry identity suite", secs(30), dt, o);

    let (checks, dt) = timed(|| morawetz_positivity(opts.seed, 10_000));
    let o = Outcome { pass: checks.iter().all(|c| c.pass), detail: failed_checks(&checks) };
    all &= report(2, "Morawetz positivity", secs(5), dt, o);

    let (c, dt) = timed(charged_runs);
    let (d1, d2) = (c.coarse.charge_drift(), c.fine.charge_drift());
    let o = Outcome {
        pass: d1 <= CHARGE_DRIFT && d1 / d2 >= 4.0,
        detail: format!("drift {d1:.3e} at h, {d2:.3e} at h/2, reduction {:.1}x (need 4x)", d1 / d2),
    };
    all &= report(3, "charge conservation", secs(300), dt, o);

    let (res, dt) = timed(|| (convergence_suite(&opts), identities_suite(&opts)));
    let o = match res {
        (Ok(a), Ok(b)) => {
            let orders = a.residuals.iter().chain(&b.residuals).map(|p| p.order()).fold(f64::INFINITY, f64::min);
            let mut checks = a.checks.clone();
            checks.extend(b.checks.clone());
            Outcome { pass: a.pass() && b.pass(), detail: format!("min order {orders:.3}, {}", failed_checks(&checks)) }
        }
        (a, b) => Outcome { pass: false, detail: format!("suite error: {:?} {:?}", a.err(), b.err()) },
    };
    all &= report(4, "convergence orders", secs(900), dt, o);

    let (j, dt) = timed(|| charge_jump_check(&c.coarse.slices, c.q, c.cfg.chi_offset, c.cfg.r0));
    let o = match j {
        Ok(j) => Outcome {
            pass: j.exterior_ok() && j.interior_ok(),
            detail: format!(
                "exterior rel err {:.2e} over {} samples, interior exponent {:.3}",
                j.exterior_rel_err,
                j.exterior_samples,
                j.interior_fit.as_ref().map_or(f64::NAN, |f| f.exponent())
            ),
        },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    };
    all &= report(5, "charge jump", secs(300), dt, o);

    let ((checks, zero), dt) = timed(|| {
        (peel_suite(&c.coarse.slices, c.q, c.cfg.chi_offset, c.cfg.s), radial_vanishing_components(&c.coarse.slices))
    });
    let fits: Vec<String> = checks
        .iter()
        .map(|k| match &k.fit {
            Ok(f) => format!("{}@{} {:.3}<={:.2}", f.component, f.locus.label(), f.exponent(), k.bound),
            Err(e) => format!("unfitted: {e}"),
        })
        .collect();
    let o = Outcome {
        pass: checks.iter().all(|k| k.pass) && zero <= CLOSED_FORM,
        detail: format!("{}; alpha/alpha_bar/sigma max {zero:.1e}", fits.join(", ")),
    };
    all &= report(6, "peeling fits", secs(300), dt, o);

    let (o, dt) = timed(|| {
        let wp = c.cfg.weight_params().unwrap();
        let w = (0.0, c.cfg.t_final);
        let em = energy_breakdown(EnergyField::Maxwell, &c.coarse.slices, &wp, w, c.q, c.cfg.chi_offset).unwrap();
        let es = energy_breakdown(EnergyField::Scalar, &c.coarse.slices, &wp, w, 0.0, 0.0).unwrap();
        let growth = |e: &csf_core::energy::EnergyBreakdown| {
            let f0 = e.fixed_time_series[0].1;
            e.fixed_time_series.iter().map(|x| x.1).fold(0.0, f64::max) / f0
        };
        let (gm, gs) = (growth(&em), growth(&es));
        let (m1, s1) = audits(&c, &c.coarse);
        let (m2, s2) = audits(&c, &c.fine);
        let dm = (m1.ratio / m2.ratio - 1.0).abs();
        let ds = (s1.ratio / s2.ratio - 1.0).abs();
        let finite = [m1.ratio, s1.ratio, m2.ratio, s2.ratio].iter().all(|r| r.is_finite() && *r > 0.0);
        Outcome {
            pass: gm <= 3.0 && gs <= 3.0 && finite && dm <= 0.2 && ds <= 0.2,
            detail: format!(
                "sup/t0 {gm:.3} (maxwell) {gs:.3} (scalar); audit ratios {:.4}/{:.4}, refinement change {dm:.1e}/{ds:.1e}",
                m1.ratio, s1.ratio
            ),
        }
    });
    all &= report(7, "energy boundedness", secs(300), dt, o);

    let (rep, dt) = timed(|| inequalities_suite(&opts));
    let o = match rep {
        Ok(r) => Outcome { pass: r.pass() && !r.skipped, detail: failed_checks(&r.checks) },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    };
    all &= report(8, "inequality harnesses", secs(120), dt, o);

    let (rep, dt) = timed(|| charge_peel_check(c.q, c.cfg.chi_offset, 10_000, opts.seed));
    let o = match rep {
        Ok(r) => {
            let finite = r.constants.iter().all(|v| v.is_finite());
            let uniform = r.constants.iter().zip(&r.inner_constants).all(|(c, i)| *c <= 2.0 * i + 1e-12);
            Outcome {
                pass: finite && uniform && r.outside_support == 0.0,
                detail: format!(
                    "constants {:?}, inner {:?}, outside support {:e}",
                    r.constants.map(|v| (v * 1e3).round() / 1e3),
                    r.inner_constants.map(|v| (v * 1e3).round() / 1e3),
                    r.outside_support
                ),
            }
        }
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    };
    all &= report(9, "charge two-form peeling bounds", secs(10), dt, o);

    println!("acceptance: {}", if all { "PASS" } else { "FAIL" });
    if !all {
        std::process::exit(1);
    }
}
