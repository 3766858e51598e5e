//! Energy-momentum tensors, multiplier contractions, weighted energy
//! functionals on radial slices, and divergence residuals.

use std::f64::consts::PI;

use crate::fields::RadialSlice;
use crate::geometry::{
    chi_plus, chi_plus_prime, contract2, deformation_tensor, frame_at, metric_matrix, weights_tr,
    LorentzField, Mat4, NullFrameSample, SpacetimePoint, TwoFormValue, Vec4, WeightParams, METRIC,
};
use crate::manufactured::{cov_deriv, curvature, AnalyticFields, CJet};
use crate::quad::{pairwise_sum, trapezoid_xy};
use crate::{charge, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Maxwell,
    Scalar,
    ConformalI,
    ConformalII,
    Total,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EMTensorValue {
    pub q: Mat4,
    pub kind: TensorKind,
}

impl EMTensorValue {
    pub fn eval(&self, x: &Vec4, y: &Vec4) -> f64 {
        contract2(&self.q, x, y)
    }

    pub fn trace(&self) -> f64 {
        crate::geometry::trace(&self.q)
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `Q_{αβ}[F] = F_{αγ} F_β{}^γ − ¼ g_{αβ} F_{γδ} F^{γδ}`.
pub fn em_tensor_f(f: &TwoFormValue) -> EMTensorValue {
    let sq = f.square();
    let mut q = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut s = 0.0;
            for c in 0..4 {
                s += f.get(a, c) * f.get(b, c) * METRIC[c];
            }
            let g = if a == b { METRIC[a] } else { 0.0 };
            q[a][b] = s - 0.25 * g * sq;
        }
    }
    EMTensorValue { q, kind: TensorKind::Maxwell }
}

/// `Q_{αβ}[φ] = Re(D_αφ conj D_βφ) − ½ g_{αβ} D^γφ conj D_γφ`.
pub fn em_tensor_phi(d: &[C64; 4]) -> EMTensorValue {
    let sq: f64 = (0..4).map(|c| METRIC[c] * d[c].norm_sqr()).sum();
    let mut q = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let g = if a == b { METRIC[a] } else { 0.0 };
            q[a][b] = (d[a] * d[b].conj()).re - 0.5 * g * sq;
        }
    }
    EMTensorValue { q, kind: TensorKind::Scalar }
}

pub fn add_tensors(a: &EMTensorValue, b: &EMTensorValue) -> EMTensorValue {
    let mut q = a.q;
    for i in 0..4 {
        for j in 0..4 {
            q[i][j] += b.q[i][j];
        }
    }
    EMTensorValue { q, kind: TensorKind::Total }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConformalKind {
    /// Weight `Ω = r`.
    I,
    /// Weight `Ω = u ū`.
    II,
}

/// Singular-set floor for the conformal weights.
pub const CONFORMAL_FLOOR: f64 = 1e-10;

/// Conformal weight `Ω` and its gradient `∂_μ Ω`.
pub fn conformal_weight(kind: ConformalKind, p: &SpacetimePoint) -> Result<(f64, Vec4)> {
    let r = p.r();
    match kind {
        ConformalKind::I => {
            if r < CONFORMAL_FLOOR {
                return Err(Error::SingularSet(format!("r = {r:e}")));
            }
            let w = p.omega().unwrap();
            Ok((r, [0.0, w[0], w[1], w[2]]))
        }
        ConformalKind::II => {
            let om = p.u() * p.ubar();
            if om.abs() < CONFORMAL_FLOOR {
                return Err(Error::SingularSet(format!("u ubar = {om:e}")));
            }
            Ok((om, [2.0 * p.t, -2.0 * p.x[0], -2.0 * p.x[1], -2.0 * p.x[2]]))
        }
    }
}

/// `D_μ(Ωφ) = (∂_μΩ) φ + Ω D_μφ`.
pub fn weighted_derivative(kind: ConformalKind, phi: C64, d: &[C64; 4], p: &SpacetimePoint) -> Result<[C64; 4]> {
    let (om, dom) = conformal_weight(kind, p)?;
    Ok([0, 1, 2, 3].map(|m| dom[m] * phi + om * d[m]))
}

/// Energy-momentum tensor of `Ωφ` in the conformal metric `Ω^{-2} g`.
/// The conformal factor cancels between `g̃_{αβ}` and `g̃^{γδ}`.
pub fn conformal_tensor(kind: ConformalKind, phi: C64, d: &[C64; 4], p: &SpacetimePoint) -> Result<EMTensorValue> {
    let dw = weighted_derivative(kind, phi, d, p)?;
    let mut t = em_tensor_phi(&dw);
    t.kind = match kind {
        ConformalKind::I => TensorKind::ConformalI,
        ConformalKind::II => TensorKind::ConformalII,
    };
    Ok(t)
}

/// `P_α = Q_{αβ} X^β w`.
pub fn momentum_density(q: &EMTensorValue, x: &Vec4, w: f64) -> Vec4 {
    let mut p = [0.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            p[a] += q.q[a][b] * x[b] * w;
        }
    }
    p
}

/// `½ Q_{αβ} π^{αβ}` for the multiplier `T + K_0^s`.
pub fn morawetz_bulk(q: &EMTensorValue, s: f64, p: &SpacetimePoint) -> f64 {
    let pi = deformation_tensor(&LorentzField::FracMorawetz(s), p);
    let mut acc = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            acc += q.q[a][b] * pi[a][b] * METRIC[a] * METRIC[b];
        }
    }
    0.5 * acc
}

/// Frame components `(D_L φ, D_Lbar φ, D_A φ)` of a covariant gradient.
pub fn scalar_null_components(d: &[C64; 4], frame: &NullFrameSample) -> (C64, C64, [C64; 2]) {
    let along = |v: &Vec4| (0..4).fold(C64::new(0.0, 0.0), |acc, m| acc + d[m] * v[m]);
    (along(&frame.l), along(&frame.lbar), [along(&frame.e[0]), along(&frame.e[1])])
}

// ---------------------------------------------------------------------------
// Divergence identities on analytic fields

/// Exact inhomogeneity `G = D^α D_α φ`.
pub fn covariant_wave(f: &dyn AnalyticFields, x: &Vec4) -> C64 {
    let p = f.phi(x);
    let a = f.a(x);
    let i = C64::i();
    let div_a: f64 = (0..4).map(|m| METRIC[m] * a[m].d[m]).sum();
    let a_grad: C64 = (0..4).map(|m| METRIC[m] * a[m].v * p.d(m)).sum();
    let a_sq: f64 = (0..4).map(|m| METRIC[m] * a[m].v * a[m].v).sum();
    p.wave() + i * div_a * p.value() + 2.0 * i * a_grad - a_sq * p.value()
}

/// Exact `∇^β F_{αβ}` of the analytic potential.
pub fn maxwell_source(f: &dyn AnalyticFields, x: &Vec4) -> Vec4 {
    let a = f.a(x);
    std::array::from_fn(|al| (0..4).map(|b| METRIC[b] * (a[b].dd[b][al] - a[al].dd[b][b])).sum())
}

/// Centered divergence `∇^α T_{αβ}` of a tensor-valued function.
pub fn fd_divergence(t: &dyn Fn(&Vec4) -> Mat4, x: &Vec4, h: f64) -> Vec4 {
    let mut out = [0.0; 4];
    for a in 0..4 {
        let mut xp = *x;
        let mut xm = *x;
        xp[a] += h;
        xm[a] -= h;
        let (tp, tm) = (t(&xp), t(&xm));
        for b in 0..4 {
            out[b] += METRIC[a] * (tp[a][b] - tm[a][b]) / (2.0 * h);
        }
    }
    out
}

fn max_abs4(v: &Vec4) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Residual of `∇^α Q_{αβ}[F] = −F_{βγ} J^γ` with `J = ∇^β F_{·β}`.
pub fn maxwell_divergence_residual(f: &dyn AnalyticFields, x: &Vec4, h: f64) -> f64 {
    let div = fd_divergence(&|y| em_tensor_f(&curvature(f, y)).q, x, h);
    let fv = curvature(f, x);
    let j = maxwell_source(f, x);
    let rhs: Vec4 = std::array::from_fn(|b| -(0..4).map(|c| fv.get(b, c) * METRIC[c] * j[c]).sum::<f64>());
    max_abs4(&std::array::from_fn(|b| div[b] - rhs[b]))
}

/// Residual of `∇^α Q_{αβ}[φ] = Re(G conj D_βφ) + F_{βγ} Im(φ conj D^γφ)`.
pub fn scalar_divergence_residual(f: &dyn AnalyticFields, x: &Vec4, h: f64) -> f64 {
    let div = fd_divergence(&|y| em_tensor_phi(&cov_deriv(f, y)).q, x, h);
    let d = cov_deriv(f, x);
    let phi = f.phi(x).value();
    let g = covariant_wave(f, x);
    let fv = curvature(f, x);
    let rhs: Vec4 = std::array::from_fn(|b| {
        (g * d[b].conj()).re + (0..4).map(|c| fv.get(b, c) * METRIC[c] * (phi * d[c].conj()).im).sum::<f64>()
    });
    max_abs4(&std::array::from_fn(|b| div[b] - rhs[b]))
}

/// Residual of `∇^α (Q[F] + Q[φ])_{αβ} = Re(G conj D_βφ) + F_{βγ}(Im(φ conj D^γφ) − J^γ)`;
/// the right side vanishes for solutions.
pub fn total_divergence_residual(f: &dyn AnalyticFields, x: &Vec4, h: f64) -> f64 {
    let div = fd_divergence(
        &|y| add_tensors(&em_tensor_f(&curvature(f, y)), &em_tensor_phi(&cov_deriv(f, y))).q,
        x,
        h,
    );
    let d = cov_deriv(f, x);
    let phi = f.phi(x).value();
    let g = covariant_wave(f, x);
    let fv = curvature(f, x);
    let j = maxwell_source(f, x);
    let rhs: Vec4 = std::array::from_fn(|b| {
        (g * d[b].conj()).re
            + (0..4).map(|c| fv.get(b, c) * METRIC[c] * ((phi * d[c].conj()).im - j[c])).sum::<f64>()
    });
    max_abs4(&std::array::from_fn(|b| div[b] - rhs[b]))
}

/// Residual of the conformal divergence law for `Q̃^I` or `Q̃^II`.
///
/// For `g̃ = Ω^{-2} g` and a symmetric `T`,
/// `∇̃^α T_{αβ} = Ω² [∇^α T_{αβ} − 2 (∂^λΩ/Ω) T_{λβ} + tr_g(T) ∂_βΩ/Ω]`,
/// which the law equates to `Ω⁴ [Re(G conj(Ω⁻¹ D_β(Ωφ))) + F_{βγ} Im(φ conj(Ω⁻¹ D^γ(Ωφ)))]`.
pub fn conformal_divergence_residual(kind: ConformalKind, f: &dyn AnalyticFields, x: &Vec4, h: f64) -> Result<f64> {
    let p = SpacetimePoint::from_coords(*x);
    let tensor = |y: &Vec4| -> Mat4 {
        let q = SpacetimePoint::from_coords(*y);
        conformal_tensor(kind, f.phi(y).value(), &cov_deriv(f, y), &q)
            .map(|t| t.q)
            .unwrap_or([[f64::NAN; 4]; 4])
    };
    let div = fd_divergence(&tensor, x, h);
    let t = tensor(x);
    let (om, dom) = conformal_weight(kind, &p)?;
    let tr = crate::geometry::trace(&t);
    let lhs: Vec4 = std::array::from_fn(|b| {
        let mut s = div[b] + tr * dom[b] / om;
        for l in 0..4 {
            s -= 2.0 * METRIC[l] * dom[l] / om * t[l][b];
        }
        om * om * s
    });
    let phi = f.phi(x).value();
    let dw = weighted_derivative(kind, phi, &cov_deriv(f, x), &p)?;
    let g = covariant_wave(f, x);
    let fv = curvature(f, x);
    let rhs: Vec4 = std::array::from_fn(|b| {
        let mut s = (g * (dw[b] / om).conj()).re;
        for c in 0..4 {
            s += fv.get(b, c) * METRIC[c] * (phi * (dw[c] / om).conj()).im;
        }
        om.powi(4) * s
    });
    if lhs.iter().chain(&rhs).any(|v| !v.is_finite()) {
        return Err(Error::StencilOutOfDomain("conformal stencil touches the singular set".into()));
    }
    Ok(max_abs4(&std::array::from_fn(|b| lhs[b] - rhs[b])))
}

/// Pointwise `Ωφ` check helper: jets of the weighted field.
pub fn weighted_jet(kind: ConformalKind, f: &dyn AnalyticFields, x: &Vec4) -> CJet {
    let p = f.phi(x);
    let om = match kind {
        ConformalKind::I => {
            let r2 = crate::manufactured::Jet::coord(x, 1) * crate::manufactured::Jet::coord(x, 1)
                + crate::manufactured::Jet::coord(x, 2) * crate::manufactured::Jet::coord(x, 2)
                + crate::manufactured::Jet::coord(x, 3) * crate::manufactured::Jet::coord(x, 3);
            let r = r2.v.sqrt();
            // r as a jet via the chain rule on sqrt
            let mut j = crate::manufactured::Jet::constant(r);
            for a in 0..4 {
                j.d[a] = r2.d[a] / (2.0 * r);
                for b in 0..4 {
                    j.dd[a][b] = r2.dd[a][b] / (2.0 * r) - r2.d[a] * r2.d[b] / (4.0 * r * r * r);
                }
            }
            j
        }
        ConformalKind::II => {
            let t = crate::manufactured::Jet::coord(x, 0);
            let mut s = t * t;
            for i in 1..4 {
                let c = crate::manufactured::Jet::coord(x, i);
                s = s - c * c;
            }
            s
        }
    };
    p.mul_real(om)
}

// ---------------------------------------------------------------------------
// Proof-internal weight w̃_{γ,ε}

/// `w̃_{γ,ε}(u, ū)` and its derivatives `(−∂_ū w̃, −∂_u w̃)`.
pub fn w_tilde(u: f64, ub: f64, gamma: f64, eps: f64) -> (f64, f64, f64) {
    let c = chi_plus(-u);
    let c1 = chi_plus_prime(-u);
    let ext = c > 0.0 || c1 > 0.0;
    let int = c < 1.0;
    let a = if ext { 2.0 - u } else { 0.0 };
    let b = if int { 2.0 + u } else { 0.0 };
    let pw = |x: f64, e: f64, on: bool| if on { x.powf(e) } else { 0.0 };
    let m = (1.0 + ub).powf(-2.0 * eps);
    let w = (1.0 + pw(a, 2.0 * gamma, ext)) * c
        + (1.0 + pw(b, -2.0 * eps, int)) * (1.0 - c)
        + m * (pw(a, 2.0 * gamma + 2.0 * eps, ext) * c + 1.0 - c);
    let d_ub = 2.0 * eps * (1.0 + ub).powf(-2.0 * eps - 1.0) * (pw(a, 2.0 * gamma + 2.0 * eps, ext) * c + 1.0 - c);
    let d_u = (pw(a, 2.0 * gamma, ext) - pw(b, -2.0 * eps, int || c1 > 0.0)) * c1
        + m * (pw(a, 2.0 * gamma + 2.0 * eps, ext) - 1.0) * c1
        + 2.0 * (gamma + eps) * m * pw(a, 2.0 * gamma + 2.0 * eps - 1.0, ext) * c
        + 2.0 * gamma * pw(a, 2.0 * gamma - 1.0, ext) * c
        + 2.0 * eps * pw(b, -2.0 * eps - 1.0, int) * (1.0 - c);
    (w, d_ub, d_u)
}

// ---------------------------------------------------------------------------
// Weighted energies on radial slices

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentEnergy {
    pub name: &'static str,
    /// Sup over slices of the fixed-time integral.
    pub fixed_time: f64,
    /// Sup over sampled cones.
    pub cone: f64,
    pub spacetime: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub params: WeightParams,
    pub window: (f64, f64),
    pub components: Vec<ComponentEnergy>,
    /// `|q|²`, present for the Maxwell energy.
    pub charge_sq: f64,
    /// `(t, Σ_components fixed-time integral)` per slice.
    pub fixed_time_series: Vec<(f64, f64)>,
    /// Sup over slices of the summed fixed-time integral.
    pub fixed_time_total: f64,
    /// Sup over cones of the summed cone integral.
    pub cone_total: f64,
    pub spacetime_total: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.charge_sq + self.fixed_time_total + self.cone_total + self.spacetime_total
    }
}

/// Which energy to build from the slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyField {
    /// Remainder `F̃ = F − F̄` for the given charge.
    Maxwell,
    Scalar,
}

/// Squared component magnitudes at a cell, in the order of [`component_names`].
fn component_values(field: EnergyField, s: &RadialSlice, j: usize, q: f64, offset: f64) -> [f64; 4] {
    match field {
        EnergyField::Maxwell => {
            let r = s.grid.r(j);
            let rt = s.rho[j] - charge::charge_rho(q, s.t, r, offset);
            [0.0, 0.0, rt * rt, 0.0]
        }
        EnergyField::Scalar => [s.d_l_rphi(j).norm_sqr(), s.d_lbar(j).norm_sqr(), 0.0, s.phi_over_r(j).norm_sqr()],
    }
}

pub fn component_names(field: EnergyField) -> [&'static str; 4] {
    match field {
        EnergyField::Maxwell => ["alpha", "alpha_bar", "rho_tilde", "sigma"],
        EnergyField::Scalar => ["dl_rphi", "dlbar_phi", "slash_phi", "phi_over_r"],
    }
}

/// Fixed-time weights per component.
fn fixed_weights(field: EnergyField, t: f64, r: f64, wp: &WeightParams) -> [f64; 4] {
    let w = weights_tr(t, r, wp);
    let (tp, tm) = (w.tau_plus.powf(2.0 * wp.s), w.tau_minus.powf(2.0 * wp.s));
    match field {
        EnergyField::Maxwell => [tp, tm, tp, tp].map(|v| v * w.w_gamma),
        EnergyField::Scalar => [tp, tm, tp, tp].map(|v| v * w.w_gamma),
    }
}

/// Cone weights per component (the scalar `φ/r` term carries `(u/ū)²`).
fn cone_weights(field: EnergyField, t: f64, r: f64, wp: &WeightParams) -> [f64; 4] {
    let w = weights_tr(t, r, wp);
    let (tp, tm) = (w.tau_plus.powf(2.0 * wp.s), w.tau_minus.powf(2.0 * wp.s));
    match field {
        EnergyField::Maxwell => [tp, 0.0, tm, tm].map(|v| v * w.w_gamma),
        EnergyField::Scalar => {
            let ratio = if t + r > 0.0 { ((t - r) / (t + r)).powi(2) } else { 1.0 };
            [tp, 0.0, tm, tp * ratio].map(|v| v * w.w_gamma)
        }
    }
}

/// Space-time weights per component.
fn bulk_weights(t: f64, r: f64, wp: &WeightParams) -> [f64; 4] {
    let w = weights_tr(t, r, wp);
    let (tp, tm) = (w.tau_plus.powf(2.0 * wp.s), w.tau_minus.powf(2.0 * wp.s));
    let z = w.tau_0.powf(1.0 + 2.0 * wp.eps);
    [tp, z * tm, z * tp, z * tp].map(|v| v * w.w_prime)
}

fn check_window(slices: &[RadialSlice], window: (f64, f64)) -> Result<()> {
    let (s0, s1) = match (slices.first(), slices.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => (f64::NAN, f64::NAN),
    };
    let tol = 1e-9 * (1.0 + window.1.abs());
    if !(s0 <= window.0 + tol && s1 >= window.1 - tol && window.0 <= window.1) {
        return Err(Error::WindowNotCovered { t0: window.0, t1: window.1, s0, s1 });
    }
    Ok(())
}

/// Cell volume `4π r_j² h` with the outer two cells excluded.
fn shell_volume(s: &RadialSlice, j: usize) -> f64 {
    if j + 2 >= s.len() {
        0.0
    } else {
        4.0 * PI * s.grid.r(j).powi(2) * s.grid.h
    }
}

/// Linear interpolation in time of a per-cell quantity.
fn interp_in_time(slices: &[RadialSlice], t: f64, j: usize, f: &dyn Fn(&RadialSlice, usize) -> [f64; 4]) -> Option<[f64; 4]> {
    let k = slices.partition_point(|s| s.t <= t);
    if k == 0 {
        return if (slices[0].t - t).abs() < 1e-12 { Some(f(&slices[0], j)) } else { None };
    }
    if k == slices.len() {
        let last = slices.last().unwrap();
        return if (last.t - t).abs() < 1e-9 { Some(f(last, j)) } else { None };
    }
    let (a, b) = (&slices[k - 1], &slices[k]);
    let th = (t - a.t) / (b.t - a.t);
    let (va, vb) = (f(a, j), f(b, j));
    Some(std::array::from_fn(|c| (1.0 - th) * va[c] + th * vb[c]))
}

/// Step between sampled cones.
pub const CONE_SPACING: f64 = 1.0;

/// Weighted energy of the Maxwell remainder or of the scalar over `window`.
pub fn energy_breakdown(
    field: EnergyField,
    slices: &[RadialSlice],
    wp: &WeightParams,
    window: (f64, f64),
    q: f64,
    offset: f64,
) -> Result<EnergyBreakdown> {
    check_window(slices, window)?;
    let inside: Vec<&RadialSlice> =
        slices.iter().filter(|s| s.t >= window.0 - 1e-9 && s.t <= window.1 + 1e-9).collect();
    let names = component_names(field);

    // fixed time
    let mut fixed_sup = [0.0f64; 4];
    let mut series = Vec::with_capacity(inside.len());
    let mut bulk_rows: Vec<[f64; 4]> = Vec::with_capacity(inside.len());
    for s in &inside {
        let mut acc = [vec![], vec![], vec![], vec![]];
        let mut bulk = [vec![], vec![], vec![], vec![]];
        for j in 0..s.len() {
            let dv = shell_volume(s, j);
            if dv == 0.0 {
                continue;
            }
            let r = s.grid.r(j);
            let v = component_values(field, s, j, q, offset);
            let fw = fixed_weights(field, s.t, r, wp);
            let bw = bulk_weights(s.t, r, wp);
            for c in 0..4 {
                acc[c].push(v[c] * fw[c] * dv);
                bulk[c].push(v[c] * bw[c] * dv);
            }
        }
        let vals = acc.map(|a| pairwise_sum(&a));
        for c in 0..4 {
            fixed_sup[c] = fixed_sup[c].max(vals[c]);
        }
        series.push((s.t, vals.iter().sum::<f64>()));
        bulk_rows.push(bulk.map(|a| pairwise_sum(&a)));
    }
    let ts: Vec<f64> = inside.iter().map(|s| s.t).collect();
    let spacetime: [f64; 4] = std::array::from_fn(|c| {
        let ys: Vec<f64> = bulk_rows.iter().map(|r| r[c]).collect();
        trapezoid_xy(&ts, &ys)
    });

    // cones t = u + r
    let g = slices[0].grid;
    let n = slices[0].len();
    let r_max = g.r(n.saturating_sub(3));
    let mut cone_sup = [0.0f64; 4];
    let mut cone_total = 0.0f64;
    let mut u = window.0 - r_max;
    let values = |s: &RadialSlice, j: usize| component_values(field, s, j, q, offset);
    while u <= window.1 {
        let mut acc = [0.0f64; 4];
        for j in 0..n.saturating_sub(2) {
            let r = g.r(j);
            let t = u + r;
            if t < window.0 || t > window.1 {
                continue;
            }
            if let Some(v) = interp_in_time(slices, t, j, &values) {
                let cw = cone_weights(field, t, r, wp);
                let dv = std::f64::consts::SQRT_2 * 4.0 * PI * r * r * g.h;
                for c in 0..4 {
                    acc[c] += v[c] * cw[c] * dv;
                }
            }
        }
        for c in 0..4 {
            cone_sup[c] = cone_sup[c].max(acc[c]);
        }
        cone_total = cone_total.max(acc.iter().sum());
        u += CONE_SPACING;
    }

    let components = (0..4)
        .map(|c| ComponentEnergy { name: names[c], fixed_time: fixed_sup[c], cone: cone_sup[c], spacetime: spacetime[c] })
        .collect();
    Ok(EnergyBreakdown {
        params: *wp,
        window,
        components,
        charge_sq: if field == EnergyField::Maxwell { q * q } else { 0.0 },
        fixed_time_total: series.iter().fold(0.0f64, |m, v| m.max(v.1)),
        fixed_time_series: series,
        cone_total,
        spacetime_total: spacetime.iter().sum(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurrentNorm {
    pub j_l: f64,
    pub j_lbar: f64,
    pub j_slash: f64,
}

impl CurrentNorm {
    pub fn total(&self) -> f64 {
        self.j_l + self.j_lbar + self.j_slash
    }
}

/// Space-time integral of a per-cell density over the slices in `window`.
fn spacetime_integral(slices: &[RadialSlice], window: (f64, f64), dens: &dyn Fn(&RadialSlice, usize) -> f64) -> f64 {
    let inside: Vec<&RadialSlice> =
        slices.iter().filter(|s| s.t >= window.0 - 1e-9 && s.t <= window.1 + 1e-9).collect();
    let ts: Vec<f64> = inside.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = inside
        .iter()
        .map(|s| {
            let terms: Vec<f64> = (0..s.len()).map(|j| dens(s, j) * shell_volume(s, j)).collect();
            pairwise_sum(&terms)
        })
        .collect();
    trapezoid_xy(&ts, &ys)
}

/// Weighted space-time norm of the current's null components.
pub fn current_norm(slices: &[RadialSlice], wp: &WeightParams, window: (f64, f64)) -> Result<CurrentNorm> {
    check_window(slices, window)?;
    let part = |which: usize| {
        spacetime_integral(slices, window, &|s, j| {
            let w = weights_tr(s.t, s.grid.r(j), wp);
            let (tp, tm, tz) = (w.tau_plus, w.tau_minus, w.tau_0);
            match which {
                0 => tp.powf(2.0 * wp.s) * tz.powf(-1.0 - 2.0 * wp.eps) * tm * s.j_l(j).powi(2) * w.w_gamma_eps,
                _ => {
                    tz.powf(2.0 * wp.s - 1.0 - 2.0 * wp.eps) * tm.powf(2.0 * wp.s + 1.0) * s.j_lbar(j).powi(2) * w.w_gamma_eps
                }
            }
        })
    };
    Ok(CurrentNorm { j_l: part(0), j_lbar: part(1), j_slash: 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn ratio(lhs: f64, rhs: f64) -> AuditRatio {
    AuditRatio { lhs, rhs, ratio: if rhs == 0.0 { 0.0 } else { lhs / rhs } }
}

/// Left and right sides of the weighted Maxwell estimate. In spherical
/// symmetry `E^df = H = 0` and the angular current vanishes.
pub fn audit_maxwell(slices: &[RadialSlice], wp: &WeightParams, window: (f64, f64), q: f64, offset: f64) -> Result<AuditRatio> {
    let e = energy_breakdown(EnergyField::Maxwell, slices, wp, window, q, offset)?;
    let bulk = spacetime_integral(slices, window, &|s, j| {
        let w = weights_tr(s.t, s.grid.r(j), wp);
        let (tp, tm) = (w.tau_plus, w.tau_minus);
        let (s2, e2) = (2.0 * wp.s, 2.0 * wp.eps);
        (tp.powf(s2 + 1.0 + e2) * tm.powf(-e2) * s.j_l(j).powi(2)
            + tp.powf(1.0 + e2 - s2) * tm.powf(2.0 * s2 - e2) * s.j_lbar(j).powi(2))
            * w.w_gamma_eps
    });
    let s0 = &slices[0];
    let l65: Vec<f64> = (0..s0.len())
        .map(|j| {
            let r = s0.grid.r(j);
            ((1.0 + r).powf(wp.s + wp.gamma) * s0.j0[j].abs()).powf(1.2) * shell_volume(s0, j)
        })
        .collect();
    let data = pairwise_sum(&l65).powf(5.0 / 3.0);
    Ok(ratio(e.total(), bulk + data))
}

/// Left and right sides of the weighted scalar estimate for solutions
/// (`G = 0`).
pub fn audit_scalar(slices: &[RadialSlice], wp: &WeightParams, window: (f64, f64)) -> Result<AuditRatio> {
    let e = energy_breakdown(EnergyField::Scalar, slices, wp, window, 0.0, 0.0)?;
    let mut f_norm = 0.0f64;
    for s in slices.iter().filter(|s| s.t >= window.0 - 1e-9 && s.t <= window.1 + 1e-9) {
        for j in 0..s.len() {
            let w = weights_tr(s.t, s.grid.r(j), wp);
            let v = w.tau_plus.powf(1.5) * w.tau_minus.sqrt() * w.tau_0.powf(-wp.eps) * s.rho[j].abs()
                * w.w_gamma_eps
                / w.w_gamma;
            f_norm = f_norm.max(v);
        }
    }
    let s0 = &slices[0];
    let data: Vec<f64> = (0..s0.len())
        .map(|j| {
            let r = s0.grid.r(j);
            (1.0 + r * r).powf(wp.s + wp.gamma) * (s0.d_t[j].norm_sqr() + s0.d_r[j].norm_sqr()) * shell_volume(s0, j)
        })
        .collect();
    Ok(ratio(e.total(), f_norm * f_norm * e.total() + pairwise_sum(&data)))
}

/// Total energy `∫ Q_00 dx` of a radial slice: `½(|D_tφ|² + |D_rφ|² + E_r²)`.
pub fn radial_total_energy(s: &RadialSlice) -> f64 {
    let terms: Vec<f64> = (0..s.len())
        .map(|j| 0.5 * (s.d_t[j].norm_sqr() + s.d_r[j].norm_sqr() + s.rho[j] * s.rho[j]) * shell_volume(s, j))
        .collect();
    pairwise_sum(&terms)
}

/// Point-sample helper: null frame and metric used in checks.
pub fn frame_and_metric(p: &SpacetimePoint) -> Result<(NullFrameSample, Mat4)> {
    Ok((frame_at(p)?, metric_matrix()))
}
