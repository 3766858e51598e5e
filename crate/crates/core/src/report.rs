//! Columnar text reports. Every float is written with 17 significant digits
//! so identical inputs give byte-identical files.

use std::fmt::Write;

use crate::analysis::{PeelCheck, RatioReport, ResidualPair};
use crate::charge::charge_rho;
use crate::energy::{AuditRatio, EnergyBreakdown};
use crate::evolve::MonitorRow;
use crate::fields::{fmt_f64, RadialSlice};
use crate::quad::linear_fit;
use crate::tolerances::LOG_FLOOR;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_f64)
}

/// `energy-report v1`: `(t, component, weight-tag, value)` rows for the
/// fixed-time series and per-component sup values, then an audit block.
pub fn energy_report(parts: &[(&str, &EnergyBreakdown)], audits: &[(&str, AuditRatio)]) -> String {
    let mut s = String::from("energy-report v1\n# t component weight value\n");
    for (field, e) in parts {
        let tag = format!("s={},gamma={},eps={}", e.params.s, e.params.gamma, e.params.eps);
        for (t, v) in &e.fixed_time_series {
            let _ = writeln!(s, "{} {field}.total {tag} {}", fmt_f64(*t), fmt_f64(*v));
        }
        for c in &e.components {
            let _ = writeln!(s, "sup {field}.{}.fixed_time {tag} {}", c.name, fmt_f64(c.fixed_time));
            let _ = writeln!(s, "sup {field}.{}.cone {tag} {}", c.name, fmt_f64(c.cone));
            let _ = writeln!(s, "sup {field}.{}.spacetime {tag} {}", c.name, fmt_f64(c.spacetime));
        }
        let _ = writeln!(s, "sup {field}.charge_sq {tag} {}", fmt_f64(e.charge_sq));
        let _ = writeln!(s, "sup {field}.total {tag} {}", fmt_f64(e.total()));
    }
    s.push_str("# audit lhs rhs ratio\n");
    for (name, a) in audits {
        let _ = writeln!(s, "audit {name} {} {} {}", fmt_f64(a.lhs), fmt_f64(a.rhs), fmt_f64(a.ratio));
    }
    s
}

/// `peel-report v1`: one row per fitted target, then the exact-zero record
/// for the components that vanish in spherical symmetry.
pub fn peel_report(checks: &[PeelCheck], vanishing: f64) -> String {
    let mut s = String::from("peel-report v1\n# component locus p_plus p_minus residual samples theory bound status\n");
    for c in checks {
        match &c.fit {
            Ok(f) => {
                let _ = writeln!(
                    s,
                    "{} {} {} {} {} {} {} {} {}",
                    f.component,
                    f.locus.label().replace(' ', ":"),
                    opt(f.p_plus),
                    opt(f.p_minus),
                    fmt_f64(f.residual),
                    f.samples,
                    fmt_f64(c.theory),
                    fmt_f64(c.bound),
                    if c.pass { "pass" } else { "fail" }
                );
            }
            Err(e) => {
                let _ = writeln!(s, "# fit error: {e}");
            }
        }
    }
    let _ = writeln!(s, "zero alpha,alpha_bar,sigma max_abs {}", fmt_f64(vanishing));
    s
}

/// `ratio-report v1`: one row per case; skipped cases print `skip`.
pub fn ratio_report(reports: &[RatioReport]) -> String {
    let mut s = String::from("ratio-report v1\n# id case lhs rhs ratio\n");
    for r in reports {
        for c in &r.cases {
            let ratio = c.ratio.map_or_else(|| "skip".to_string(), fmt_f64);
            let _ = writeln!(
                s,
                "{} {} {} {} {ratio}",
                r.id,
                c.label.replace(' ', ":"),
                fmt_f64(c.lhs),
                fmt_f64(c.rhs)
            );
        }
        let _ = writeln!(s, "summary {} violations {} max_ratio {}", r.id, r.violations, fmt_f64(r.max_ratio));
    }
    s
}

/// `identity-report v1`: residuals at a refinement pair and observed order.
pub fn identity_report(pairs: &[ResidualPair]) -> String {
    let mut s = String::from("identity-report v1\n# label h h2 residual_h residual_h2 order\n");
    for p in pairs {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            p.label.replace(' ', ":"),
            fmt_f64(p.h),
            fmt_f64(p.h2),
            fmt_f64(p.coarse),
            fmt_f64(p.fine),
            fmt_f64(p.order())
        );
    }
    s
}

/// Log-log slope of `|ρ̃|` against `r` over the exterior `r > t + 5` of a
/// slice; NaN when fewer than two positive samples exist.
pub fn tail_slope(s: &RadialSlice, q: f64, offset: f64) -> f64 {
    let last = s.len().saturating_sub(3);
    let (x, y): (Vec<f64>, Vec<f64>) = (0..last)
        .filter_map(|j| {
            let r = s.grid.r(j);
            let v = (s.rho[j] - charge_rho(q, s.t, r, offset)).abs();
            (r > s.t + 5.0 && v > LOG_FLOOR).then(|| (r.ln(), v.ln()))
        })
        .unzip();
    if x.len() < 2 {
        return f64::NAN;
    }
    linear_fit(&x, &y).1
}

/// `charge-report v1`: `(t, q, gauss_residual, tail slope of |F̃|)`, with the
/// slope taken from the slice at the same time when one exists.
pub fn charge_report(monitors: &[MonitorRow], slices: &[RadialSlice], q: f64, offset: f64) -> String {
    let mut s = String::from("charge-report v1\n# t q gauss_residual tail_slope\n");
    for m in monitors {
        let slope = slices
            .iter()
            .find(|sl| (sl.t - m.t).abs() < 1e-9)
            .map_or(f64::NAN, |sl| tail_slope(sl, q, offset));
        let _ = writeln!(s, "{} {} {} {}", fmt_f64(m.t), fmt_f64(m.charge), fmt_f64(m.gauss), fmt_f64(slope));
    }
    s
}
