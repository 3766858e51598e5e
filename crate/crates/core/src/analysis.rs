//! Decay-exponent fits, charge-jump diagnostics, inequality-ratio harnesses
//! and commutator/Lie-component identity checks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::charge::{charge_rho, charge_two_form_gradient, charge_two_form_value, weighted_elliptic_ratio};
use crate::energy::covariant_wave;
use crate::error::{Error, Result};
use crate::fields::{covariant_gradient, Grid1, PotentialSlice3, RadialSlice, ScalarSlice3};
use crate::geometry::{
    deformation_tensor, frame_at, lie_derivative_from_parts, lie_derivative_two_form, mdot, null_decompose,
    weights_tr, LorentzField, NullComponents, SpacetimePoint, TwoFormField, TwoFormValue, Vec4, WeightParams,
    METRIC,
};
use crate::manufactured::{cov_deriv, curvature, AnalyticFields};
use crate::quad::{linear_fit, pairwise_sum, tiled_sum_by};
use crate::tolerances::{order, DECAY_SLACK, LOG_FLOOR};
use crate::C64;

// ---------------------------------------------------------------------------
// Decay fits

/// Where a decay series is sampled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Locus {
    /// Fixed `t`, exterior cells; fits the `τ_−` exponent.
    Slice { t: f64 },
    /// Fixed `u = t − r`; fits the `τ_+` exponent.
    Cone { u: f64 },
    /// Fixed `r`; fits the `τ_+` exponent.
    Worldline { r: f64 },
}

impl Locus {
    pub fn label(&self) -> String {
        match self {
            Locus::Slice { t } => format!("slice t={t}"),
            Locus::Cone { u } => format!("cone u={u}"),
            Locus::Worldline { r } => format!("worldline r={r}"),
        }
    }

    /// True when the fitted weight is `τ_−`.
    pub fn fits_tau_minus(&self) -> bool {
        matches!(self, Locus::Slice { .. })
    }
}

/// How samples enter the log-log regression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    Samples,
    /// Replace each value by the maximum over all later weights, so
    /// oscillations and sharp collapses are fitted by their upper envelope.
    UpperEnvelope,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub component: String,
    pub locus: Locus,
    pub p_plus: Option<f64>,
    pub p_minus: Option<f64>,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub samples: usize,
}

impl DecayFit {
    pub fn exponent(&self) -> f64 {
        self.p_plus.or(self.p_minus).unwrap_or(f64::NAN)
    }
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares slope of `log value` against `log weight`.
pub fn fit_decay(component: &str, locus: Locus, weight: &[f64], value: &[f64], mode: FitMode) -> Result<DecayFit> {
    let n = weight.len().min(value.len());
    if n < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_FIT_SAMPLES, got: n });
    }
    if let Some(i) = value[..n].iter().position(|v| !(v.is_finite() && *v > LOG_FLOOR)) {
        return Err(Error::NonPositiveSamples(i));
    }
    let (lo, hi) = weight[..n].iter().fold((f64::INFINITY, 0.0f64), |(a, b), &w| (a.min(w), b.max(w)));
    let span = hi / lo;
    if !(span >= 10.0) {
        return Err(Error::InsufficientDecade { span });
    }
    let mut order_idx: Vec<usize> = (0..n).collect();
    order_idx.sort_by(|&a, &b| weight[a].total_cmp(&weight[b]));
    let x: Vec<f64> = order_idx.iter().map(|&i| weight[i].ln()).collect();
    let mut y: Vec<f64> = order_idx.iter().map(|&i| value[i]).collect();
    if mode == FitMode::UpperEnvelope {
        for i in (0..n - 1).rev() {
            y[i] = y[i].max(y[i + 1]);
        }
    }
    let y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (_, slope, rms) = linear_fit(&x, &y);
    let (p_plus, p_minus) = if locus.fits_tau_minus() { (None, Some(slope)) } else { (Some(slope), None) };
    Ok(DecayFit { component: component.to_string(), locus, p_plus, p_minus, residual: rms, samples: n })
}

/// Spherically symmetric quantities that can be sampled from a radial slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialComponent {
    Phi,
    DLbarPhi,
    /// `(1/r) D_L(rφ)`.
    DLRPhi,
    /// `ρ − ρ̄` for the run's charge.
    RhoTilde,
    Rho,
}

impl RadialComponent {
    pub fn label(&self) -> &'static str {
        match self {
            RadialComponent::Phi => "phi",
            RadialComponent::DLbarPhi => "dlbar_phi",
            RadialComponent::DLRPhi => "dl_rphi",
            RadialComponent::RhoTilde => "rho_tilde",
            RadialComponent::Rho => "rho",
        }
    }

    fn at(&self, s: &RadialSlice, j: usize, q: f64, offset: f64) -> f64 {
        match self {
            RadialComponent::Phi => s.phi[j].norm(),
            RadialComponent::DLbarPhi => s.d_lbar(j).norm(),
            RadialComponent::DLRPhi => s.d_l_rphi(j).norm(),
            RadialComponent::RhoTilde => (s.rho[j] - charge_rho(q, s.t, s.grid.r(j), offset)).abs(),
            RadialComponent::Rho => s.rho[j].abs(),
        }
    }
}

/// Cells excluded next to the outer boundary when sampling.
pub const OUTER_MARGIN: usize = 2;

/// Linear interpolation of a component at radius `r`; `None` outside the
/// sampled cell centres.
pub fn sample_at(s: &RadialSlice, c: RadialComponent, r: f64, q: f64, offset: f64) -> Option<f64> {
    let g = s.grid;
    let last = s.len().checked_sub(1 + OUTER_MARGIN)?;
    let x = r / g.h - 0.5;
    if x < 0.0 || x > last as f64 {
        return None;
    }
    let j = (x.floor() as usize).min(last.saturating_sub(1));
    let f = x - j as f64;
    Some((1.0 - f) * c.at(s, j, q, offset) + f * c.at(s, j + 1, q, offset))
}

/// `(weight, |component|)` samples along a locus. Worldline samples with
/// `t < t_min` are dropped; slice samples keep exterior cells `r > t + 1`.
pub fn sample_locus(
    slices: &[RadialSlice],
    c: RadialComponent,
    locus: Locus,
    q: f64,
    offset: f64,
    t_min: f64,
) -> (Vec<f64>, Vec<f64>) {
    let wp = WeightParams::new(0.75, 0.5, 0.05).expect("default weights");
    let mut w = Vec::new();
    let mut v = Vec::new();
    match locus {
        Locus::Worldline { r } => {
            for s in slices.iter().filter(|s| s.t >= t_min) {
                if let Some(val) = sample_at(s, c, r, q, offset) {
                    w.push(weights_tr(s.t, r, &wp).tau_plus);
                    v.push(val);
                }
            }
        }
        Locus::Cone { u } => {
            for s in slices.iter().filter(|s| s.t >= t_min) {
                let r = s.t - u;
                if let Some(val) = sample_at(s, c, r, q, offset) {
                    w.push(weights_tr(s.t, r, &wp).tau_plus);
                    v.push(val);
                }
            }
        }
        Locus::Slice { t } => {
            if let Some(s) = slices.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())) {
                let last = s.len().saturating_sub(1 + OUTER_MARGIN);
                for j in 0..last {
                    let r = s.grid.r(j);
                    if r > s.t + 1.0 {
                        w.push(weights_tr(s.t, r, &wp).tau_minus);
                        v.push(c.at(s, j, q, offset));
                    }
                }
            }
        }
    }
    (w, v)
}

/// One peeling target: a component on a locus with its theoretical exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct PeelCheck {
    pub fit: std::result::Result<DecayFit, Error>,
    pub theory: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Theoretical exponents for the spherically symmetric components.
pub fn peel_targets(s: f64) -> Vec<(RadialComponent, Locus, f64)> {
    vec![
        (RadialComponent::Phi, Locus::Worldline { r: 5.0 }, -(0.5 + s)),
        (RadialComponent::Phi, Locus::Cone { u: -5.0 }, -1.0),
        (RadialComponent::DLbarPhi, Locus::Cone { u: -5.0 }, -1.0),
        (RadialComponent::DLRPhi, Locus::Cone { u: -5.0 }, -(s + 1.5)),
        (RadialComponent::RhoTilde, Locus::Cone { u: -5.0 }, -(1.0 + s)),
    ]
}

/// Earliest worldline time used in fits, so `τ_+` spans a decade over `[5, 100]`.
pub const WORLDLINE_T_MIN: f64 = 5.0;

/// Upper-envelope fits of every target; a target passes when its exponent is
/// at most `theory + slack`.
pub fn peel_suite(slices: &[RadialSlice], q: f64, offset: f64, s: f64) -> Vec<PeelCheck> {
    peel_targets(s)
        .into_iter()
        .map(|(c, locus, theory)| {
            let t_min = if matches!(locus, Locus::Worldline { .. }) { WORLDLINE_T_MIN } else { 0.0 };
            let (w, v) = sample_locus(slices, c, locus, q, offset, t_min);
            let fit = fit_decay(c.label(), locus, &w, &v, FitMode::UpperEnvelope);
            let bound = theory + DECAY_SLACK;
            let pass = fit.as_ref().map(|f| f.exponent() <= bound).unwrap_or(false);
            PeelCheck { fit, theory, bound, pass }
        })
        .collect()
}

/// `max(|α|, |ᾱ|, |σ|)` of the radial field over all slices, from the full
/// null decomposition at an off-axis point of each sphere.
pub fn radial_vanishing_components(slices: &[RadialSlice]) -> f64 {
    let dir = [0.48, -0.6, 0.64];
    let mut worst: f64 = 0.0;
    for s in slices {
        for j in (0..s.len()).step_by(7) {
            let r = s.grid.r(j);
            let p = SpacetimePoint::new(s.t, dir.map(|d| d * r));
            let Ok(frame) = frame_at(&p) else { continue };
            let e = frame.omega.map(|w| w * s.rho[j]);
            let n = null_decompose(&TwoFormValue::from_eh(e, [0.0; 3]), &frame);
            worst = worst.max(n.alpha_norm()).max(n.alpha_bar_norm()).max(n.sigma.abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Charge jump

#[derive(Clone, Debug, PartialEq)]
pub struct ChargeJumpReport {
    pub q: f64,
    /// Max of `|ρ − q/(4πr²)| / |q/(4πr²)|` over `r > 2t + 10`.
    pub exterior_rel_err: f64,
    pub exterior_samples: usize,
    /// Max `|ρ̃| / |ρ̄|` over the same set.
    pub tilde_over_bar: f64,
    pub interior_fit: std::result::Result<DecayFit, Error>,
    /// `ρ̄` at `τ_+` of the last slice divided by the interior `|ρ|` there.
    pub jump_ratio: f64,
}

pub const JUMP_EXTERIOR_TOL: f64 = 0.05;
/// Interior `ρ` must decay at least this much faster than `r^{-2}`.
pub const JUMP_INTERIOR_MARGIN: f64 = 0.3;

impl ChargeJumpReport {
    pub fn exterior_ok(&self) -> bool {
        self.exterior_samples > 0 && self.exterior_rel_err < JUMP_EXTERIOR_TOL
    }

    pub fn interior_ok(&self) -> bool {
        self.interior_fit.as_ref().map(|f| f.exponent() <= -2.0 - JUMP_INTERIOR_MARGIN).unwrap_or(false)
    }
}

/// Compares the exterior field with the Coulomb value and fits the interior
/// decay of `ρ` on the worldline `r = r_int`.
pub fn charge_jump_check(slices: &[RadialSlice], q: f64, offset: f64, r_int: f64) -> Result<ChargeJumpReport> {
    if q.abs() < 1e-12 {
        return Err(Error::NoChargedData(q));
    }
    let mut rel: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    let mut count = 0;
    for s in slices {
        let last = s.len().saturating_sub(1 + OUTER_MARGIN);
        for j in 0..last {
            let r = s.grid.r(j);
            if r > 2.0 * s.t + 10.0 {
                let bar = q / (4.0 * PI * r * r);
                let tilde = s.rho[j] - charge_rho(q, s.t, r, offset);
                rel = rel.max((s.rho[j] - bar).abs() / bar.abs());
                ratio = ratio.max(tilde.abs() / bar.abs());
                count += 1;
            }
        }
    }
    let locus = Locus::Worldline { r: r_int };
    let (w, v) = sample_locus(slices, RadialComponent::Rho, locus, q, offset, WORLDLINE_T_MIN);
    let interior_fit = fit_decay("rho", locus, &w, &v, FitMode::UpperEnvelope);
    let jump_ratio = match (slices.last(), v.last()) {
        (Some(s), Some(&inner)) => {
            let r_ext = s.t + r_int;
            (q / (4.0 * PI * r_ext * r_ext)).abs() / inner.max(LOG_FLOOR)
        }
        _ => f64::NAN,
    };
    Ok(ChargeJumpReport {
        q,
        exterior_rel_err: rel,
        exterior_samples: count,
        tilde_over_bar: ratio,
        interior_fit,
        jump_ratio,
    })
}

// ---------------------------------------------------------------------------
// Ratio reports

#[derive(Clone, Debug, PartialEq)]
pub struct RatioCase {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when both sides vanish and the case is skipped.
    pub ratio: Option<f64>,
}

impl RatioCase {
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let ratio = if lhs == 0.0 && rhs == 0.0 { None } else { Some(lhs / rhs) };
        Self { label: label.into(), lhs, rhs, ratio }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub id: String,
    pub cases: Vec<RatioCase>,
    pub violations: usize,
    pub max_ratio: f64,
}

impl RatioReport {
    pub fn new(id: impl Into<String>, cases: Vec<RatioCase>, violations: usize) -> Self {
        let max_ratio = cases.iter().filter_map(|c| c.ratio).fold(0.0, f64::max);
        Self { id: id.into(), cases, violations, max_ratio }
    }

    pub fn skipped(&self) -> usize {
        self.cases.iter().filter(|c| c.ratio.is_none()).count()
    }

    /// Every evaluated ratio is finite.
    pub fn finite(&self) -> bool {
        self.cases.iter().filter_map(|c| c.ratio).all(f64::is_finite)
    }

    /// Largest relative deviation of the evaluated ratios from their mean.
    pub fn spread(&self) -> f64 {
        let r: Vec<f64> = self.cases.iter().filter_map(|c| c.ratio).collect();
        if r.is_empty() {
            return 0.0;
        }
        let mean = pairwise_sum(&r) / r.len() as f64;
        r.iter().map(|v| (v - mean).abs() / mean.abs()).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Kato

/// Pointwise `|∂_μ |φ|| ≤ |D_μ φ| + tol` on the grid interior for every
/// direction; one case per direction with the largest per-point ratio.
pub fn kato_harness(phi: &ScalarSlice3, a: &PotentialSlice3, tol_factor: f64) -> Result<RatioReport> {
    let g = phi.grid;
    let d = covariant_gradient(phi, a)?;
    let modulus: Vec<f64> = phi.phi.iter().map(|z| z.norm()).collect();
    let cells = g.without_halo(1);
    let scale = cells
        .iter()
        .map(|&id| modulus[id] + (0..4).map(|m| d[m][id].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let tol = tol_factor * g.h * g.h * scale;
    let mut cases = Vec::new();
    let mut violations = 0;
    for mu in 0..4 {
        let dm: Vec<f64> = if mu == 0 {
            phi.phi
                .iter()
                .zip(&phi.phi_t)
                .map(|(p, pt)| if p.norm() > 0.0 { (p.conj() * pt).re / p.norm() } else { 0.0 })
                .collect()
        } else {
            crate::fields::diff_axis(&g, &modulus, mu - 1)
        };
        let mut lhs_max: f64 = 0.0;
        let mut rhs_max: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for &id in &cells {
            let l = dm[id].abs();
            let r = d[mu][id].norm();
            lhs_max = lhs_max.max(l);
            rhs_max = rhs_max.max(r);
            if l > r + tol {
                violations += 1;
            }
            if r > 1e-8 * scale {
                worst = worst.max(l / r);
            }
        }
        let ratio = if lhs_max == 0.0 && rhs_max == 0.0 { None } else { Some(worst) };
        cases.push(RatioCase { label: format!("d{mu}"), lhs: lhs_max, rhs: rhs_max, ratio });
    }
    Ok(RatioReport::new("kato", cases, violations))
}

// ---------------------------------------------------------------------------
// Poincare

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoincareRegion {
    Full,
    /// `t < r`.
    Exterior,
    /// `r < t`.
    Interior,
}

pub fn poincare_admissible(region: PoincareRegion, p: f64, q: f64) -> bool {
    p > -1.0
        && match region {
            PoincareRegion::Full => q.abs() < p + 1.0,
            PoincareRegion::Exterior => p + 1.0 + q > 0.0,
            PoincareRegion::Interior => q < p + 1.0,
        }
}

/// `lhs = ∫ τ_−^p τ_+^q |φ|²`, `rhs = ∫ τ_−^{p+2} τ_+^q |(1/r) D_r(rφ)|²`
/// over the region on one radial slice.
pub fn poincare_case(s: &RadialSlice, region: PoincareRegion, p: f64, q: f64) -> Result<RatioCase> {
    if !poincare_admissible(region, p, q) {
        return Err(Error::ExponentOutOfRange(format!("(p, q) = ({p}, {q}) for {region:?}")));
    }
    let wp = WeightParams::new(0.75, 0.5, 0.05).expect("default weights");
    let g = s.grid;
    let inside = |r: f64| match region {
        PoincareRegion::Full => true,
        PoincareRegion::Exterior => r > s.t,
        PoincareRegion::Interior => r < s.t,
    };
    let mut lhs = Vec::with_capacity(s.len());
    let mut rhs = Vec::with_capacity(s.len());
    for j in 0..s.len() {
        let r = g.r(j);
        if !inside(r) {
            continue;
        }
        let w = weights_tr(s.t, r, &wp);
        let vol = 4.0 * PI * r * r * g.h;
        let base = w.tau_minus.powf(p) * w.tau_plus.powf(q) * vol;
        lhs.push(base * s.phi[j].norm_sqr());
        rhs.push(base * w.tau_minus * w.tau_minus * (s.d_r[j] + s.phi[j] / r).norm_sqr());
    }
    let (l, r) = (pairwise_sum(&lhs), pairwise_sum(&rhs));
    if l > 0.0 && r <= 1e-10 * l {
        return Err(Error::OutOfHypothesis(format!(
            "D_r(r phi) vanishes while the weighted norm of phi is {l:e}"
        )));
    }
    Ok(RatioCase::new(format!("{region:?} p={p} q={q} t={}", s.t), l, r))
}

pub fn poincare_harness(slices: &[RadialSlice], region: PoincareRegion, p: f64, q: f64) -> Result<RatioReport> {
    let cases = slices.iter().map(|s| poincare_case(s, region, p, q)).collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::new("poincare", cases, 0))
}

/// Radial slice of `φ(r) = f(r)` with exact `∂_r φ`, zero fields elsewhere.
pub fn radial_profile(t: f64, grid: Grid1, f: impl Fn(f64) -> (f64, f64)) -> RadialSlice {
    let (phi, d_r): (Vec<C64>, Vec<C64>) = (0..grid.n)
        .map(|j| {
            let (v, d) = f(grid.r(j));
            (C64::new(v, 0.0), C64::new(d, 0.0))
        })
        .unzip();
    let z = vec![0.0; grid.n];
    RadialSlice { t, grid, d_t: vec![C64::new(0.0, 0.0); grid.n], phi, d_r, rho: z.clone(), j0: z.clone(), jr: z }
}

/// `(1 − s²)^4` on `|s| < 1` and its derivative.
pub fn bump(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        (0.0, 0.0)
    } else {
        let b = 1.0 - s * s;
        (b.powi(4), -8.0 * s * b.powi(3))
    }
}

/// A radial bump at `λ r0` of width `λ w` on a grid scaled with `λ`, for
/// each `λ` in `scales`.
pub fn poincare_scaling_family(scales: &[f64], p: f64, q: f64) -> Result<RatioReport> {
    let (r0, w) = (1.0, 0.5);
    let cases = scales
        .iter()
        .map(|&lam| {
            let g = Grid1 { n: 4000, h: 2.0 * lam / 4000.0 };
            let s = radial_profile(0.0, g, |r| {
                let (b, db) = bump((r - lam * r0) / (lam * w));
                (b, db / (lam * w))
            });
            poincare_case(&s, PoincareRegion::Full, p, q).map(|mut c| {
                c.label = format!("scale {lam}");
                c
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::new("poincare-scaling", cases, 0))
}

// ---------------------------------------------------------------------------
// Weighted elliptic family

/// `ρ_λ(r) = ρ(r/λ)` on a fixed grid for each `λ`; the ratio of the weighted
/// elliptic estimate should not depend on `λ`.
pub fn elliptic_scaling_family(scales: &[f64], delta: f64, h: f64) -> Result<RatioReport> {
    let profile = |r: f64| bump((r - 2.0) / 1.5).0 - 0.4 * bump((r - 3.0) / 1.0).0;
    let cases = scales
        .iter()
        .map(|&lam| {
            let g = Grid1 { n: ((6.0 * lam) / h).ceil() as usize, h };
            let rho: Vec<f64> = (0..g.n).map(|j| profile(g.r(j) / lam)).collect();
            weighted_elliptic_ratio(&rho, &g, delta).map(|e| RatioCase::new(format!("scale {lam}"), e.lhs, e.rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::new("weighted-elliptic", cases, 0))
}

// ---------------------------------------------------------------------------
// Global Sobolev

/// A scalar test function with its spacetime gradient `[∂_t, ∂_1, ∂_2, ∂_3]`.
pub type TestFunction<'a> = &'a (dyn Fn(f64, [f64; 3]) -> (f64, [f64; 4]) + Sync);

/// Angular quadrature: midpoint in `cos θ`, uniform in azimuth.
fn sphere_nodes(n_mu: usize, n_phi: usize) -> Vec<([f64; 3], f64)> {
    let w = 4.0 * PI / (n_mu * n_phi) as f64;
    let mut out = Vec::with_capacity(n_mu * n_phi);
    for i in 0..n_mu {
        let mu = -1.0 + (i as f64 + 0.5) * 2.0 / n_mu as f64;
        let s = (1.0 - mu * mu).sqrt();
        for k in 0..n_phi {
            let ph = 2.0 * PI * (k as f64 + 0.5) / n_phi as f64;
            out.push(([s * ph.cos(), s * ph.sin(), mu], w));
        }
    }
    out
}

fn rotations(x: &[f64; 3], g: &[f64; 4]) -> [f64; 3] {
    let d = [g[1], g[2], g[3]];
    [x[0] * d[1] - x[1] * d[0], x[0] * d[2] - x[2] * d[0], x[1] * d[2] - x[2] * d[1]]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SobolevKind {
    /// Shell `r_min < r < r_max` at time `t`, integrability `q ∈ [2, 4)`.
    Exterior { t: f64, r_min: f64, r_max: f64, q: f64 },
    /// Ball `r < radius ≤ 3t/4` at time `t ≥ 1`, exponents `p ≤ q`.
    Interior { t: f64, radius: f64, p: f64, q: f64 },
}

pub const SOBOLEV_RADIAL_NODES: usize = 64;
pub const SOBOLEV_ANGULAR_NODES: usize = 48;

/// One Sobolev case: sup-type lhs against the weighted derivative rhs.
pub fn sobolev_case(kind: SobolevKind, f: TestFunction) -> Result<RatioCase> {
    let nodes = sphere_nodes(SOBOLEV_ANGULAR_NODES, 2 * SOBOLEV_ANGULAR_NODES);
    let nr = SOBOLEV_RADIAL_NODES;
    let wp = WeightParams::new(0.75, 0.5, 0.05).expect("default weights");
    match kind {
        SobolevKind::Exterior { t, r_min, r_max, q } => {
            if !(t >= 1.0 && t < 2.0 * r_min && r_min < r_max) {
                return Err(Error::RegionViolation(format!("shell [{r_min}, {r_max}] at t = {t} leaves 1 <= t < 2r")));
            }
            if !(2.0..4.0).contains(&q) {
                return Err(Error::ExponentOutOfRange(format!("q = {q} outside [2, 4)")));
            }
            let dr = (r_max - r_min) / nr as f64;
            let r_mid = 0.5 * (r_min + r_max);
            let wj = weights_tr(t, r_mid, &wp);
            let mut sup: f64 = 0.0;
            let mut l2 = [0.0; 3];
            for i in 0..nr {
                let r = r_min + (i as f64 + 0.5) * dr;
                let tm = weights_tr(t, r, &wp).tau_minus;
                let mut lq = 0.0;
                for (w, wt) in &nodes {
                    let x = w.map(|c| c * r);
                    let (v, g) = f(t, x);
                    let da = r * r * wt;
                    lq += v.abs().powf(q) * da;
                    let d_r = w[0] * g[1] + w[1] * g[2] + w[2] * g[3];
                    l2[0] += v * v * da * dr;
                    l2[1] += (tm * d_r).powi(2) * da * dr;
                    l2[2] += rotations(&x, &g).iter().map(|o| o * o).sum::<f64>() * da * dr;
                }
                sup = sup.max(lq.powf(1.0 / q));
            }
            let norms: f64 = l2.iter().map(|v| v.sqrt()).sum();
            let rhs = wj.tau_plus.powf(-2.0 * (0.5 - 1.0 / q)) * wj.tau_minus.powf(-0.5) * norms;
            Ok(RatioCase::new(format!("exterior t={t} r=[{r_min},{r_max}] q={q}"), sup, rhs))
        }
        SobolevKind::Interior { t, radius, p, q } => {
            if !(t >= 1.0 && radius > 0.0 && radius <= 0.75 * t) {
                return Err(Error::RegionViolation(format!("ball r < {radius} at t = {t} leaves r < 3t/4")));
            }
            if !(p >= 1.0 && q >= p && 1.0 / p - 1.0 / q < 1.0 / 3.0) {
                return Err(Error::ExponentOutOfRange(format!("(p, q) = ({p}, {q})")));
            }
            let dr = radius / nr as f64;
            let mut lq = 0.0;
            let mut lp = [0.0; 5];
            for i in 0..nr {
                let r = (i as f64 + 0.5) * dr;
                for (w, wt) in &nodes {
                    let x = w.map(|c| c * r);
                    let (v, g) = f(t, x);
                    let dv = r * r * wt * dr;
                    lq += v.abs().powf(q) * dv;
                    let s = t * g[0] + x[0] * g[1] + x[1] * g[2] + x[2] * g[3];
                    lp[0] += v.abs().powf(p) * dv;
                    lp[1] += s.abs().powf(p) * dv;
                    for k in 0..3 {
                        lp[2 + k] += (t * g[1 + k] + x[k] * g[0]).abs().powf(p) * dv;
                    }
                }
            }
            let lhs = lq.powf(1.0 / q);
            let rhs = t.powf(-3.0 * (1.0 / p - 1.0 / q)) * lp.iter().map(|v| v.powf(1.0 / p)).sum::<f64>();
            Ok(RatioCase::new(format!("interior t={t} r<{radius} p={p} q={q}"), lhs, rhs))
        }
    }
}

pub fn sobolev_harness(id: &str, cases: &[(SobolevKind, TestFunction)]) -> Result<RatioReport> {
    let out = cases.iter().map(|(k, f)| sobolev_case(*k, *f)).collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::new(id, out, 0))
}

/// Bump in `r` centred at `rc` of half-width `w`, modulated by `1 + a x_3/r`.
pub fn shell_bump(rc: f64, w: f64, a: f64) -> impl Fn(f64, [f64; 3]) -> (f64, [f64; 4]) + Sync {
    move |_t, x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().max(1e-12);
        let (b, db) = bump((r - rc) / w);
        let m = 1.0 + a * x[2] / r;
        let mut g = [0.0; 4];
        for i in 0..3 {
            let dm = a * ((if i == 2 { 1.0 } else { 0.0 }) / r - x[2] * x[i] / (r * r * r));
            g[i + 1] = db / w * x[i] / r * m + b * dm;
        }
        (b * m, g)
    }
}

/// Self-similar profile `F(x/t)` supported in `|x| < t/2`.
pub fn similarity_bump(a: f64) -> impl Fn(f64, [f64; 3]) -> (f64, [f64; 4]) + Sync {
    move |t, x| {
        let y = x.map(|c| c / t);
        let s = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let (b, db) = bump(s / 0.5);
        let m = 1.0 + a * y[2];
        // gradient in y
        let mut gy = [0.0; 3];
        for i in 0..3 {
            let ds = if s > 0.0 { y[i] / s } else { 0.0 };
            gy[i] = db / 0.5 * ds * m + if i == 2 { a * b } else { 0.0 };
        }
        let ydg = y[0] * gy[0] + y[1] * gy[1] + y[2] * gy[2];
        (b * m, [-ydg / t, gy[0] / t, gy[1] / t, gy[2] / t])
    }
}

// ---------------------------------------------------------------------------
// Residual reports

/// A residual measured at steps `h` and `h2 < h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualPair {
    pub label: String,
    pub h: f64,
    pub h2: f64,
    pub coarse: f64,
    pub fine: f64,
}

impl ResidualPair {
    /// Observed order; infinite when both residuals are at round-off.
    pub fn order(&self) -> f64 {
        if self.fine <= 1e-13 && self.coarse <= 1e-11 {
            f64::INFINITY
        } else {
            order(self.coarse, self.fine) / (self.h / self.h2).log2()
        }
    }
}

// ---------------------------------------------------------------------------
// Commutator of the covariant wave operator

/// Checks that `π(X) = c g` with the same `c` at `p` and nearby points.
pub fn conformal_factor(x: &LorentzField, p: &SpacetimePoint) -> Result<f64> {
    let pi0 = deformation_tensor(x, p);
    let c = pi0[1][1];
    for k in 0..5 {
        let q = if k == 0 { *p } else { p.shifted(k - 1, 0.5) };
        let pi = deformation_tensor(x, &q);
        for a in 0..4 {
            for b in 0..4 {
                let target = if a == b { c * METRIC[a] } else { 0.0 };
                if (pi[a][b] - target).abs() > 1e-12 * (1.0 + c.abs()) {
                    return Err(Error::FieldNotConformalKilling(x.label()));
                }
            }
        }
    }
    Ok(c)
}

fn d_x(f: &dyn AnalyticFields, x: &LorentzField, y: &Vec4) -> C64 {
    let v = x.eval(&SpacetimePoint::from_coords(*y));
    let d = cov_deriv(f, y);
    (0..4).fold(C64::new(0.0, 0.0), |acc, m| acc + d[m] * v[m])
}

/// `|□_A(D_X φ) − [D_X □_A φ + π^{αβ} D_α D_β φ − i(2 X^α F_{αβ} D^β φ − ∇^α(X^β F_{αβ}) φ)]|`
/// at `y`, with finite differences of step `h` for the derivatives of
/// `D_X φ` and `□_A φ`; `sign = +1` flips the imaginary group.
fn commutator_residual_signed(f: &dyn AnalyticFields, x: &LorentzField, y: &Vec4, h: f64, sign: f64) -> Result<f64> {
    let p = SpacetimePoint::from_coords(*y);
    let c = conformal_factor(x, &p)?;
    let i = C64::i();
    let a = f.a(y);
    let at = |dir: usize, k: f64| {
        let mut z = *y;
        z[dir] += k * h;
        z
    };
    // □_A of ψ = D_X φ
    let psi0 = d_x(f, x, y);
    let mut lhs = C64::new(0.0, 0.0);
    for al in 0..4 {
        let pp = d_x(f, x, &at(al, 1.0));
        let pm = d_x(f, x, &at(al, -1.0));
        let d1 = (pp - pm) / (2.0 * h);
        let d2 = (pp - 2.0 * psi0 + pm) / (h * h);
        lhs += METRIC[al] * (d2 + 2.0 * i * a[al].v * d1 + i * a[al].d[al] * psi0 - a[al].v * a[al].v * psi0);
    }
    // D_X □_A φ
    let xv = x.eval(&p);
    let w0 = covariant_wave(f, y);
    let mut dxw = C64::new(0.0, 0.0);
    for m in 0..4 {
        let dw = (covariant_wave(f, &at(m, 1.0)) - covariant_wave(f, &at(m, -1.0))) / (2.0 * h);
        dxw += xv[m] * (dw + i * a[m].v * w0);
    }
    // π^{αβ} D_α D_β φ = c □_A φ
    let pi_term = c * w0;
    // imaginary group
    let d = cov_deriv(f, y);
    let phi = f.phi(y).value();
    let fv = curvature(f, y);
    let jac = x.jacobian(&p);
    let mut xfd = C64::new(0.0, 0.0);
    let mut div = 0.0;
    for al in 0..4 {
        for be in 0..4 {
            xfd += xv[al] * fv.get(al, be) * METRIC[be] * d[be];
            // ∂_α(X^β F_{αβ}) with ∂_γ F_{αβ} = ∂_γ∂_α A_β − ∂_γ∂_β A_α
            let df = a[be].dd[al][al] - a[al].dd[al][be];
            div += METRIC[al] * (jac[be][al] * fv.get(al, be) + xv[be] * df);
        }
    }
    let group = 2.0 * xfd - div * phi;
    let rhs = dxw + pi_term + sign * i * group;
    Ok((lhs - rhs).norm())
}

/// Residual of the commutator formula for `□_A` and `D_X` at `y`.
pub fn box_commutator_residual(f: &dyn AnalyticFields, x: &LorentzField, y: &Vec4, h: f64) -> Result<f64> {
    commutator_residual_signed(f, x, y, h, -1.0)
}

/// Max residual over `points` at steps `h` and `h2`.
pub fn box_commutator_check(
    f: &dyn AnalyticFields,
    x: &LorentzField,
    points: &[Vec4],
    h: f64,
    h2: f64,
) -> Result<ResidualPair> {
    let max_at = |h: f64| -> Result<f64> {
        points.iter().try_fold(0.0f64, |m, y| Ok(m.max(box_commutator_residual(f, x, y, h)?)))
    };
    Ok(ResidualPair { label: format!("commutator {}", x.label()), h, h2, coarse: max_at(h)?, fine: max_at(h2)? })
}

// ---------------------------------------------------------------------------
// Lie-derivative component tables

/// Which null component a table row differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullComponent {
    Rho,
    Sigma,
    Alpha(usize),
}

impl NullComponent {
    fn of(&self, n: &NullComponents) -> f64 {
        match *self {
            NullComponent::Rho => n.rho,
            NullComponent::Sigma => n.sigma,
            NullComponent::Alpha(a) => n.alpha[a],
        }
    }

    fn label(&self) -> String {
        match self {
            NullComponent::Rho => "rho".into(),
            NullComponent::Sigma => "sigma".into(),
            NullComponent::Alpha(a) => format!("alpha{}", a + 1),
        }
    }
}

/// Vector field of a table row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableField {
    Radial,
    Rotation(usize, usize),
    Scaling,
    RadialBoost,
}

impl TableField {
    pub fn all() -> Vec<TableField> {
        vec![
            TableField::Radial,
            TableField::Rotation(1, 2),
            TableField::Rotation(1, 3),
            TableField::Rotation(2, 3),
            TableField::Scaling,
            TableField::RadialBoost,
        ]
    }

    fn label(&self) -> String {
        match self {
            TableField::Radial => "d_r".into(),
            TableField::Rotation(i, j) => format!("Omega{i}{j}"),
            TableField::Scaling => "S".into(),
            TableField::RadialBoost => "Omega0r".into(),
        }
    }

    fn vector(&self, p: &SpacetimePoint) -> Vec4 {
        match *self {
            TableField::Radial => {
                let w = p.omega().unwrap_or([0.0; 3]);
                [0.0, w[0], w[1], w[2]]
            }
            TableField::Rotation(i, j) => LorentzField::Omega(i, j).eval(p),
            TableField::Scaling => LorentzField::Scaling.eval(p),
            TableField::RadialBoost => LorentzField::RadialBoost.eval(p),
        }
    }
}

fn component_at(f: &dyn TwoFormField, c: NullComponent, p: &SpacetimePoint, chart: u8) -> Result<f64> {
    let frame = frame_at(p)?;
    if frame.chart != chart {
        return Err(Error::StencilOutOfDomain(format!("frame chart changes near {:?}", p.coords())));
    }
    let v = f.sample(p).ok_or_else(|| Error::StencilOutOfDomain(format!("{:?}", p.coords())))?;
    Ok(c.of(&null_decompose(&v, &frame)))
}

/// `X(c) − [table right-hand side]` at `p` with finite-difference step `h`.
pub fn lie_component_residual(
    f: &dyn TwoFormField,
    x: TableField,
    c: NullComponent,
    p: &SpacetimePoint,
    h: f64,
) -> Result<f64> {
    let frame = frame_at(p)?;
    let xv = x.vector(p);
    // lhs: directional derivative of the scalar component
    let mut lhs = 0.0;
    for m in 0..4 {
        if xv[m] == 0.0 {
            continue;
        }
        let plus = component_at(f, c, &p.shifted(m, h), frame.chart)?;
        let minus = component_at(f, c, &p.shifted(m, -h), frame.chart)?;
        lhs += xv[m] * (plus - minus) / (2.0 * h);
    }
    let lie = |y: &LorentzField| -> Result<NullComponents> {
        Ok(null_decompose(&lie_derivative_two_form(f, y, p, h)?, &frame))
    };
    let sum_over_omega = |mk: &dyn Fn(usize) -> LorentzField| -> Result<f64> {
        let mut s = 0.0;
        for i in 0..3 {
            s += frame.omega[i] * c.of(&lie(&mk(i + 1))?);
        }
        Ok(s)
    };
    let here = f.sample(p).ok_or_else(|| Error::StencilOutOfDomain(format!("{:?}", p.coords())))?;
    let n0 = null_decompose(&here, &frame);
    let rhs = match x {
        TableField::Radial => sum_over_omega(&LorentzField::Partial)?,
        TableField::Rotation(i, j) => {
            let mut v = c.of(&lie(&LorentzField::Omega(i, j))?);
            if let NullComponent::Alpha(a) = c {
                let br = rotation_frame_bracket(i, j, a, p, h)?;
                v += br[0] * n0.alpha[0] + br[1] * n0.alpha[1];
            }
            v
        }
        TableField::Scaling => c.of(&lie(&LorentzField::Scaling)?) - 2.0 * c.of(&n0),
        TableField::RadialBoost => {
            let mut v = sum_over_omega(&|i| LorentzField::Omega(0, i))?;
            if let NullComponent::Alpha(_) = c {
                v += c.of(&n0);
            }
            v
        }
    };
    Ok((lhs - rhs).abs())
}

/// `[Ω_ij, e_A]^B` for `B = 1, 2` by finite differences of the frame.
fn rotation_frame_bracket(i: usize, j: usize, a: usize, p: &SpacetimePoint, h: f64) -> Result<[f64; 2]> {
    let om = LorentzField::Omega(i, j);
    let frame = frame_at(p)?;
    let ov = om.eval(p);
    let jac = om.jacobian(p);
    let ea = frame.e[a];
    let mut br = [0.0; 4];
    for m in 0..4 {
        if ov[m] == 0.0 {
            continue;
        }
        let fp = frame_at(&p.shifted(m, h))?;
        let fm = frame_at(&p.shifted(m, -h))?;
        if fp.chart != frame.chart || fm.chart != frame.chart {
            return Err(Error::StencilOutOfDomain(format!("frame chart changes near {:?}", p.coords())));
        }
        for k in 0..4 {
            br[k] += ov[m] * (fp.e[a][k] - fm.e[a][k]) / (2.0 * h);
        }
    }
    for k in 0..4 {
        for m in 0..4 {
            br[k] -= ea[m] * jac[k][m];
        }
    }
    Ok([mdot(&br, &frame.e[0]), mdot(&br, &frame.e[1])])
}

/// Every table row: all fields against `ρ`, `σ`, `α_1`, `α_2`.
pub fn lie_table_rows() -> Vec<(TableField, NullComponent)> {
    let comps = [NullComponent::Rho, NullComponent::Sigma, NullComponent::Alpha(0), NullComponent::Alpha(1)];
    TableField::all().into_iter().flat_map(|x| comps.iter().map(move |&c| (x, c))).collect()
}

/// Max residual of each row over `points` at steps `h` and `h2`.
pub fn lie_component_check(
    f: &dyn TwoFormField,
    points: &[SpacetimePoint],
    h: f64,
    h2: f64,
) -> Result<Vec<ResidualPair>> {
    lie_table_rows()
        .into_iter()
        .map(|(x, c)| {
            let max_at = |h: f64| -> Result<f64> {
                points.iter().try_fold(0.0f64, |m, p| Ok(m.max(lie_component_residual(f, x, c, p, h)?)))
            };
            Ok(ResidualPair {
                label: format!("{} {}", x.label(), c.label()),
                h,
                h2,
                coarse: max_at(h)?,
                fine: max_at(h2)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Peeling of one Lie derivative of the charge two-form

#[derive(Clone, Debug, PartialEq)]
pub struct ChargePeelReport {
    pub samples: usize,
    /// Smallest constants `C` with `|α| ≤ C |q| τ_0 τ_+^{-2}` and
    /// `|ᾱ|, |ρ|, |σ| ≤ C |q| τ_+^{-2}` over the sample, per component.
    pub constants: [f64; 4],
    /// Same constants restricted to `r < 100`, for comparing scales.
    pub inner_constants: [f64; 4],
    /// Largest component found where `t ≥ r + 1`.
    pub outside_support: f64,
}

pub const PEEL_COMPONENTS: [&str; 4] = ["alpha", "alpha_bar", "rho", "sigma"];

/// Samples `(t, x)` with `r` log-uniform in `(1, 10⁴)`, `t ∈ [0, r + 2]` and
/// random direction, and bounds `𝓛_X F̄` for every generator `X`.
pub fn charge_peel_check(q: f64, offset: f64, samples: usize, seed: u64) -> Result<ChargePeelReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wp = WeightParams::new(0.75, 0.5, 0.05).expect("default weights");
    let points: Vec<SpacetimePoint> = (0..samples)
        .map(|_| {
            let r = 10f64.powf(rng.gen_range(0.0..4.0));
            let t = rng.gen_range(0.0..(r + 2.0));
            let mu: f64 = rng.gen_range(-1.0..1.0);
            let ph: f64 = rng.gen_range(0.0..2.0 * PI);
            let s = (1.0 - mu * mu).sqrt();
            SpacetimePoint::new(t, [r * s * ph.cos(), r * s * ph.sin(), r * mu])
        })
        .collect();
    let basis = LorentzField::basis();
    let mut constants = [0.0f64; 4];
    let mut inner = [0.0f64; 4];
    let mut outside: f64 = 0.0;
    for p in &points {
        let frame = frame_at(p)?;
        let val = charge_two_form_value(q, p, offset);
        let grad = charge_two_form_gradient(q, p, offset);
        let w = weights_tr(p.t, p.r(), &wp);
        let tau0 = w.tau_minus / w.tau_plus;
        let base = q.abs() * w.tau_plus.powi(-2);
        for x in &basis {
            let lie = lie_derivative_from_parts(&val, &grad, &x.eval(p), &x.jacobian(p));
            let n = null_decompose(&lie, &frame);
            let comps = [n.alpha_norm(), n.alpha_bar_norm(), n.rho.abs(), n.sigma.abs()];
            if p.t >= p.r() + 1.0 {
                outside = outside.max(comps.iter().cloned().fold(0.0, f64::max));
                continue;
            }
            let ratios = [comps[0] / (base * tau0), comps[1] / base, comps[2] / base, comps[3] / base];
            for k in 0..4 {
                constants[k] = constants[k].max(ratios[k]);
                if p.r() < 100.0 {
                    inner[k] = inner[k].max(ratios[k]);
                }
            }
        }
    }
    Ok(ChargePeelReport { samples, constants, inner_constants: inner, outside_support: outside })
}

// ---------------------------------------------------------------------------
// Seeded random configurations

/// Random smooth scalar/potential pair built from a seeded `Blob`.
pub fn random_blob(seed: u64) -> crate::manufactured::Blob {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = crate::manufactured::Blob::default();
    b.amp = rng.gen_range(0.2..0.8);
    b.width = rng.gen_range(0.9..1.5);
    b.omega = rng.gen_range(-1.5..1.5);
    for k in b.k.iter_mut() {
        *k = rng.gen_range(-0.8..0.8);
    }
    for c in b.center.iter_mut() {
        *c = rng.gen_range(-0.3..0.3);
    }
    for v in b.b.iter_mut() {
        *v = rng.gen_range(-0.4..0.4);
    }
    b
}

/// Mean of a slice of values, deterministic.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        tiled_sum_by(v.len(), |i| v[i]) / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid3;
    use crate::manufactured::{Blob, RadialBlob};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tp(t: f64, r: f64) -> f64 {
        (1.0 + (t + r) * (t + r)).sqrt()
    }

    fn tm(t: f64, r: f64) -> f64 {
        (1.0 + (t - r) * (t - r)).sqrt()
    }

    #[test]
    fn fit_recovers_cone_power_law() {
        let u = -5.0;
        let (w, v): (Vec<f64>, Vec<f64>) = (0..200)
            .map(|i| {
                let t = i as f64 * 0.5;
                let w = tp(t, t - u);
                (w, w.powf(-2.0))
            })
            .unzip();
        let f = fit_decay("synthetic", Locus::Cone { u }, &w, &v, FitMode::Samples).unwrap();
        assert_abs_diff_eq!(f.p_plus.unwrap(), -2.0, epsilon = 0.01);
        assert!(f.p_minus.is_none());
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn fit_separates_two_weights() {
        let f = |t: f64, r: f64| tp(t, r).powf(-1.0) * tm(t, r).powf(-1.5);
        let u = -3.0;
        let (w, v): (Vec<f64>, Vec<f64>) = (0..100).map(|i| {
            let t = i as f64;
            (tp(t, t - u), f(t, t - u))
        }).unzip();
        let cone = fit_decay("f", Locus::Cone { u }, &w, &v, FitMode::Samples).unwrap();
        assert_abs_diff_eq!(cone.exponent(), -1.0, epsilon = 0.01);
        // fixed t, exterior: τ_+ ≈ τ_− far out; divide the known τ_+ factor
        let t = 2.0;
        let (w, v): (Vec<f64>, Vec<f64>) = (0..400).map(|i| {
            let r = t + 1.0 + i as f64;
            (tm(t, r), f(t, r) * tp(t, r))
        }).unzip();
        let slice = fit_decay("f", Locus::Slice { t }, &w, &v, FitMode::Samples).unwrap();
        assert_abs_diff_eq!(slice.p_minus.unwrap(), -1.5, epsilon = 0.01);
    }

    #[test]
    fn fit_errors() {
        let w: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let mut v: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
        assert!(matches!(
            fit_decay("x", Locus::Worldline { r: 1.0 }, &w[..5], &v[..5], FitMode::Samples),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            fit_decay("x", Locus::Worldline { r: 1.0 }, &w[..9], &v[..9], FitMode::Samples),
            Err(Error::InsufficientDecade { .. })
        ));
        v[3] = 0.0;
        assert_eq!(
            fit_decay("x", Locus::Worldline { r: 1.0 }, &w, &v, FitMode::Samples),
            Err(Error::NonPositiveSamples(3))
        );
    }

    #[test]
    fn envelope_fit_bounds_oscillation() {
        let (w, v): (Vec<f64>, Vec<f64>) =
            (0..300).map(|i| {
                let x = 1.0 + i as f64 * 0.5;
                (x, x.powf(-1.5) * (1.2 + (x * 1.3).sin()))
            }).unzip();
        let f = fit_decay("osc", Locus::Worldline { r: 0.0 }, &w, &v, FitMode::UpperEnvelope).unwrap();
        assert!((f.exponent() + 1.5).abs() < 0.1, "{}", f.exponent());
    }

    fn static_coulomb(q: f64) -> Vec<RadialSlice> {
        let g = Grid1 { n: 2000, h: 0.1 };
        (0..20)
            .map(|k| {
                let mut s = radial_profile(k as f64, g, |_| (0.0, 0.0));
                s.rho = (0..g.n).map(|j| q / (4.0 * PI * g.r(j).powi(2))).collect();
                s
            })
            .collect()
    }

    #[test]
    fn coulomb_exterior_is_exact() {
        let rep = charge_jump_check(&static_coulomb(0.8), 0.8, 2.0, 5.0).unwrap();
        assert!(rep.exterior_samples > 1000);
        assert!(rep.exterior_rel_err < 1e-3);
        assert!(rep.tilde_over_bar < 1e-12);
        // a static field does not decay in the interior
        assert!(!rep.interior_ok());
        assert!(matches!(charge_jump_check(&static_coulomb(0.0), 0.0, 2.0, 5.0), Err(Error::NoChargedData(_))));
    }

    #[test]
    fn kato_equality_for_constant_phase() {
        let g = Grid3::new(20, 4.0);
        let phase = C64::from_polar(1.0, 0.7);
        let phi = ScalarSlice3::from_fn(g, 0.0, |p| {
            let r2 = p.x.iter().map(|v| v * v).sum::<f64>();
            let m = (-r2).exp() * (1.0 + 0.2 * p.x[0]);
            (phase * m, phase * 0.3 * m)
        });
        let a = PotentialSlice3::zero(g, 0.0);
        let rep = kato_harness(&phi, &a, 10.0).unwrap();
        assert_eq!(rep.violations, 0);
        for c in &rep.cases {
            assert_abs_diff_eq!(c.ratio.unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kato_pure_phase_has_small_lhs() {
        let g = Grid3::new(16, 4.0);
        let phi = ScalarSlice3::from_fn(g, 0.0, |p| {
            let z = C64::from_polar(1.0, p.x[0] + 0.5 * p.x[1] - 0.3 * p.x[2]);
            (z, z * C64::i() * 0.4)
        });
        let rep = kato_harness(&phi, &PotentialSlice3::zero(g, 0.0), 10.0).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.cases.iter().all(|c| c.lhs < 1e-12 && c.rhs > 0.1));
    }

    #[test]
    fn kato_random_smooth_fields() {
        let g = Grid3::new(24, 6.0);
        for seed in 0..3 {
            let b = random_blob(seed);
            let phi = ScalarSlice3::from_fn(g, 0.4, |p| {
                let j = b.phi_at(p);
                (j.value(), j.d(0))
            });
            let a = PotentialSlice3::from_fn(g, 0.4, |p| {
                let a = b.a_at(p);
                (a.map(|c| c.v), a.map(|c| c.d[0]))
            });
            let rep = kato_harness(&phi, &a, 10.0).unwrap();
            assert_eq!(rep.violations, 0, "seed {seed}: {:?}", rep);
            assert!(rep.finite());
        }
    }

    #[test]
    fn poincare_rejects_degenerate_and_bad_exponents() {
        let g = Grid1 { n: 400, h: 0.01 };
        let s = radial_profile(0.0, g, |r| (2.0 / r, -2.0 / (r * r)));
        assert!(matches!(poincare_case(&s, PoincareRegion::Full, 0.0, 0.0), Err(Error::OutOfHypothesis(_))));
        assert!(matches!(poincare_case(&s, PoincareRegion::Full, 0.0, 1.5), Err(Error::ExponentOutOfRange(_))));
        assert!(matches!(poincare_case(&s, PoincareRegion::Exterior, -1.5, 2.0), Err(Error::ExponentOutOfRange(_))));
        assert!(poincare_admissible(PoincareRegion::Exterior, 0.0, 0.5));
        assert!(!poincare_admissible(PoincareRegion::Interior, 0.0, 1.0));
    }

    #[test]
    fn poincare_bump_and_scaling() {
        let g = Grid1 { n: 2000, h: 0.005 };
        let s = radial_profile(0.0, g, |r| bump((r - 4.0) / 2.0));
        let s = RadialSlice { d_r: (0..g.n).map(|j| C64::new(bump((g.r(j) - 4.0) / 2.0).1 / 2.0, 0.0)).collect(), ..s };
        let c = poincare_case(&s, PoincareRegion::Full, 0.0, 0.0).unwrap();
        assert!(c.ratio.unwrap().is_finite() && c.ratio.unwrap() > 0.0);
        let fam = poincare_scaling_family(&[10.0, 20.0, 40.0, 80.0], 0.0, 0.0).unwrap();
        assert!(fam.finite());
        assert!(fam.spread() < 0.1, "{:?}", fam);
    }

    #[test]
    fn elliptic_family_is_scale_stable() {
        let rep = elliptic_scaling_family(&[1.0, 2.0, 4.0, 8.0], 1.0, 0.01).unwrap();
        assert!(rep.finite());
        assert!(rep.spread() < 0.1, "{:?}", rep);
    }

    #[test]
    fn sobolev_exterior_and_interior() {
        let f1 = shell_bump(20.0, 2.0, 0.3);
        let f2 = shell_bump(35.0, 2.0, 0.3);
        let ext = sobolev_harness(
            "sobolev-exterior",
            &[
                (SobolevKind::Exterior { t: 10.0, r_min: 18.0, r_max: 22.0, q: 3.0 }, &f1),
                (SobolevKind::Exterior { t: 25.0, r_min: 33.0, r_max: 37.0, q: 3.0 }, &f2),
            ],
        )
        .unwrap();
        assert!(ext.finite() && ext.max_ratio > 0.0);
        assert!(ext.spread() < 0.2, "{:?}", ext);
        let g = similarity_bump(0.3);
        let int = sobolev_harness(
            "sobolev-interior",
            &[
                (SobolevKind::Interior { t: 4.0, radius: 2.0, p: 2.0, q: 4.0 }, &g),
                (SobolevKind::Interior { t: 8.0, radius: 4.0, p: 2.0, q: 4.0 }, &g),
            ],
        )
        .unwrap();
        assert!(int.finite());
        assert!(int.spread() < 0.2, "{:?}", int);
    }

    #[test]
    fn sobolev_zero_and_region_errors() {
        let zero = |_t: f64, _x: [f64; 3]| (0.0, [0.0; 4]);
        let rep = sobolev_harness("z", &[(SobolevKind::Exterior { t: 1.0, r_min: 2.0, r_max: 3.0, q: 2.0 }, &zero)]).unwrap();
        assert_eq!(rep.skipped(), 1);
        assert!(matches!(
            sobolev_case(SobolevKind::Exterior { t: 10.0, r_min: 4.0, r_max: 6.0, q: 2.0 }, &zero),
            Err(Error::RegionViolation(_))
        ));
        assert!(matches!(
            sobolev_case(SobolevKind::Interior { t: 2.0, radius: 1.8, p: 2.0, q: 4.0 }, &zero),
            Err(Error::RegionViolation(_))
        ));
    }

    fn points() -> Vec<Vec4> {
        vec![[0.3, 0.4, -0.2, 0.5], [0.1, -0.6, 0.3, 0.2], [0.5, 0.2, 0.7, -0.4]]
    }

    #[test]
    fn commutator_trivial_cases() {
        let b = Blob { b: [0.0; 4], ..Blob::default() };
        let pair = box_commutator_check(&b, &LorentzField::Partial(0), &points(), 0.01, 0.005).unwrap();
        assert!(pair.order() > 1.9, "{:?}", pair);
        // rotation of a spherically symmetric configuration: both sides vanish
        let rb = RadialBlob::default();
        for y in points() {
            let psi = d_x(&rb, &LorentzField::Omega(1, 2), &y);
            assert!(psi.norm() < 1e-14);
        }
        let pair = box_commutator_check(&rb, &LorentzField::Omega(1, 2), &points(), 0.02, 0.01).unwrap();
        assert!(pair.coarse < 1e-3 && pair.order() > 1.9, "{:?}", pair);
        assert!(matches!(
            box_commutator_residual(&b, &LorentzField::Morawetz, &points()[0], 0.01),
            Err(Error::FieldNotConformalKilling(_))
        ));
    }

    #[test]
    fn commutator_converges_for_generators() {
        let b = Blob::default();
        for x in [LorentzField::Scaling, LorentzField::Omega(1, 2), LorentzField::Omega(0, 3), LorentzField::Partial(2)] {
            let pair = box_commutator_check(&b, &x, &points(), 0.02, 0.01).unwrap();
            assert!(pair.order() >= 1.9, "{:?}", pair);
        }
    }

    #[test]
    fn printed_sign_of_imaginary_group_fails() {
        let b = Blob::default();
        let y = points()[0];
        let good = commutator_residual_signed(&b, &LorentzField::Scaling, &y, 0.01, -1.0).unwrap();
        let bad = commutator_residual_signed(&b, &LorentzField::Scaling, &y, 0.01, 1.0).unwrap();
        assert!(bad > 1e3 * good, "{bad} vs {good}");
    }

    fn coulomb(q: f64) -> impl Fn(&SpacetimePoint) -> Option<TwoFormValue> {
        move |p: &SpacetimePoint| {
            let r = p.r();
            let k = q / (4.0 * PI * r * r * r);
            Some(TwoFormValue::from_eh(p.x.map(|c| k * c), [0.0; 3]))
        }
    }

    fn table_points() -> Vec<SpacetimePoint> {
        vec![SpacetimePoint::new(0.4, [1.2, 0.5, 0.3]), SpacetimePoint::new(1.1, [-0.7, 1.4, -0.5])]
    }

    #[test]
    fn coulomb_scaling_row_is_exact() {
        let f = coulomb(1.5);
        let p = table_points()[0];
        let frame = frame_at(&p).unwrap();
        let lie = null_decompose(&lie_derivative_two_form(&f, &LorentzField::Scaling, &p, 1e-4).unwrap(), &frame);
        assert!(lie.rho.abs() < 1e-7);
        let r = lie_component_residual(&f, TableField::Scaling, NullComponent::Rho, &p, 1e-4).unwrap();
        assert!(r < 1e-7, "{r}");
    }

    #[test]
    fn zero_field_table_is_zero() {
        let f = |_: &SpacetimePoint| Some(TwoFormValue::zero());
        for pair in lie_component_check(&f, &table_points(), 0.01, 0.005).unwrap() {
            assert_eq!((pair.coarse, pair.fine), (0.0, 0.0));
        }
    }

    #[test]
    fn table_rows_converge_for_smooth_field() {
        let b = Blob::default();
        let f = move |p: &SpacetimePoint| Some(curvature(&b, &p.coords()));
        for pair in lie_component_check(&f, &table_points(), 0.02, 0.01).unwrap() {
            assert!(pair.order() >= 1.9, "{:?}", pair);
        }
    }

    #[test]
    fn charge_peel_constants_are_uniform() {
        let rep = charge_peel_check(1.3, 2.0, 2000, 7).unwrap();
        assert_eq!(rep.outside_support, 0.0);
        for k in 0..4 {
            assert!(rep.constants[k].is_finite());
            assert!(rep.constants[k] <= 2.0 * rep.inner_constants[k].max(1e-300) + 1e-12, "{:?}", rep);
        }
    }

    #[test]
    fn radial_fields_have_only_rho() {
        let s = static_coulomb(1.0);
        assert!(radial_vanishing_components(&s) < 1e-15);
    }

    proptest! {
        #[test]
        fn fit_recovers_any_power(p in -3.0..-0.2f64, c in 0.1..10.0f64) {
            let (w, v): (Vec<f64>, Vec<f64>) = (0..50).map(|i| {
                let x = 2.0 * 1.1f64.powi(i);
                (x, c * x.powf(p))
            }).unzip();
            let f = fit_decay("p", Locus::Cone { u: 0.0 }, &w, &v, FitMode::Samples).unwrap();
            prop_assert!((f.exponent() - p).abs() < 1e-9);
        }

        #[test]
        fn ratio_reports_are_deterministic(seed in 0u64..1000) {
            let a = charge_peel_check(0.7, 2.0, 50, seed).unwrap();
            let b = charge_peel_check(0.7, 2.0, 50, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
