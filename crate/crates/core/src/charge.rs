//! Total charge, the analytic charge two-form and its subtraction, the
//! Hodge split of the electric field, constraint-satisfying initial data and
//! the weighted elliptic ratio.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::fields::{diff_axis, divergence, CurvatureGrid3, Grid1, Grid3};
use crate::geometry::{chi_plus, chi_plus_prime, NullComponents, SpacetimePoint, TwoFormValue, Vec4};
use crate::quad::{pairwise_sum, tiled_sum};
use crate::tolerances::CG_RTOL;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargeValue {
    pub q: f64,
    /// Difference between the fine quadrature and the one on every other cell.
    pub quad_err: f64,
}

/// `q = 4π Σ J_0(r_j) r_j² h` on the radial grid.
pub fn total_charge_radial(j0: &[f64], g: &Grid1) -> ChargeValue {
    let terms: Vec<f64> = j0.iter().enumerate().map(|(j, v)| v * g.r(j).powi(2)).collect();
    let q = 4.0 * PI * g.h * pairwise_sum(&terms);
    // coarse rule on pairs of cells
    let coarse: Vec<f64> = j0
        .chunks(2)
        .enumerate()
        .map(|(k, c)| {
            let r = (2 * k + 1) as f64 * g.h;
            let avg = c.iter().sum::<f64>() / c.len() as f64;
            avg * r * r * (c.len() as f64)
        })
        .collect();
    let qc = 4.0 * PI * g.h * pairwise_sum(&coarse);
    ChargeValue { q, quad_err: (q - qc).abs() }
}

/// `q = Σ J_0 h³` on the box.
pub fn total_charge_box(j0: &[f64], g: &Grid3) -> ChargeValue {
    let q = tiled_sum(j0) * g.h.powi(3);
    ChargeValue { q, quad_err: 0.0 }
}

/// Radial profile `q χ⁺(r − t − offset) / (4π r²)` of the charge two-form.
pub fn charge_rho(q: f64, t: f64, r: f64, offset: f64) -> f64 {
    q * chi_plus(r - t - offset) / (4.0 * PI * r * r)
}

pub fn charge_two_form_at(q: f64, p: &SpacetimePoint, offset: f64) -> Result<NullComponents> {
    let r = p.r();
    if r < crate::geometry::R_MIN {
        return Err(Error::DegenerateRadius { r, floor: crate::geometry::R_MIN });
    }
    Ok(NullComponents { rho: charge_rho(q, p.t, r, offset), ..Default::default() })
}

/// Cartesian components of the charge two-form: a radial electric field.
pub fn charge_two_form_value(q: f64, p: &SpacetimePoint, offset: f64) -> TwoFormValue {
    let r = p.r();
    if r == 0.0 {
        return TwoFormValue::zero();
    }
    let f = charge_rho(q, p.t, r, offset) / r;
    TwoFormValue::from_eh([f * p.x[0], f * p.x[1], f * p.x[2]], [0.0; 3])
}

/// Exact gradient `[∂_λ F̄]_λ` of the charge two-form.
pub fn charge_two_form_gradient(q: f64, p: &SpacetimePoint, offset: f64) -> [TwoFormValue; 4] {
    let r = p.r();
    let w = p.omega().unwrap_or([0.0; 3]);
    let x = r - p.t - offset;
    let (c, c1) = (chi_plus(x), chi_plus_prime(x));
    let k = q / (4.0 * PI);
    let f = k * c / (r * r);
    let f_t = -k * c1 / (r * r);
    let f_r = k * (c1 / (r * r) - 2.0 * c / (r * r * r));
    let mut out = [TwoFormValue::zero(); 4];
    out[0] = TwoFormValue::from_eh([f_t * w[0], f_t * w[1], f_t * w[2]], [0.0; 3]);
    for j in 0..3 {
        let mut e = [0.0; 3];
        for (i, ei) in e.iter_mut().enumerate() {
            let d = if i == j { 1.0 } else { 0.0 };
            *ei = f_r * w[j] * w[i] + f * (d - w[i] * w[j]) / r;
        }
        out[j + 1] = TwoFormValue::from_eh(e, [0.0; 3]);
    }
    out
}

/// Current `J̄_α = ∇^β F̄_{αβ}`: `J̄_0 = q χ⁺′/(4πr²)`, `J̄_i = −ω_i J̄_0`.
pub fn charge_current(q: f64, p: &SpacetimePoint, offset: f64) -> Vec4 {
    let r = p.r();
    if r == 0.0 {
        return [0.0; 4];
    }
    let j0 = q * chi_plus_prime(r - p.t - offset) / (4.0 * PI * r * r);
    let w = p.omega().unwrap();
    [j0, -w[0] * j0, -w[1] * j0, -w[2] * j0]
}

/// `F̃ = F − F̄`.
pub fn subtract_charge(f: &CurvatureGrid3, q: f64, offset: f64) -> CurvatureGrid3 {
    shift_charge(f, -q, offset)
}

/// `F = F̃ + F̄`.
pub fn add_charge(f: &CurvatureGrid3, q: f64, offset: f64) -> CurvatureGrid3 {
    shift_charge(f, q, offset)
}

fn shift_charge(f: &CurvatureGrid3, q: f64, offset: f64) -> CurvatureGrid3 {
    let g = f.grid;
    let out = f
        .f
        .par_iter()
        .enumerate()
        .map(|(id, v)| {
            let bar = charge_two_form_value(q, &g.point(id, f.t), offset);
            TwoFormValue { c: std::array::from_fn(|k| v.c[k] + bar.c[k]) }
        })
        .collect();
    CurvatureGrid3 { grid: g, t: f.t, f: out }
}

// ---------------------------------------------------------------------------
// Poisson solve on the box

/// Solution of `Δφ = s` with the far-field condition `φ → −Q/(4π|x|)`.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub grid: Grid3,
    pub phi: Vec<f64>,
    /// Monopole `Q = Σ s h³` used in the boundary values.
    pub monopole: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl PoissonSolution {
    fn boundary(&self, x: [f64; 3]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        -self.monopole / (4.0 * PI * r)
    }

    /// Value at integer cell coordinates, with boundary values outside the grid.
    fn at(&self, c: [isize; 3]) -> f64 {
        let g = &self.grid;
        let n = g.n as isize;
        if c.iter().all(|&v| v >= 0 && v < n) {
            self.phi[g.idx(c[0] as usize, c[1] as usize, c[2] as usize)]
        } else {
            let x = c.map(|v| -0.5 * g.side() + (v as f64 + 0.5) * g.h);
            self.boundary(x)
        }
    }

    /// Centered gradient using boundary values beyond the last cell, so that
    /// its centered divergence is exactly the solved operator.
    pub fn gradient(&self) -> [Vec<f64>; 3] {
        let g = self.grid;
        let inv = 0.5 / g.h;
        [0, 1, 2].map(|axis| {
            (0..g.len())
                .into_par_iter()
                .map(|id| {
                    let c = g.ijk(id).map(|v| v as isize);
                    let mut p = c;
                    let mut m = c;
                    p[axis] += 1;
                    m[axis] -= 1;
                    (self.at(p) - self.at(m)) * inv
                })
                .collect()
        })
    }
}

/// Wide Laplacian `Σ_axes (φ_{i+2} − 2φ_i + φ_{i−2}) / (4h²)`, the centered
/// divergence of the centered gradient. Values outside the grid are zero.
fn wide_laplacian(g: &Grid3, x: &[f64], out: &mut [f64]) {
    let n = g.n;
    let k = 0.25 / (g.h * g.h);
    out.par_iter_mut().enumerate().for_each(|(id, o)| {
        let c = g.ijk(id);
        let mut s = -6.0 * x[id];
        for axis in 0..3 {
            let st = g.stride(axis);
            if c[axis] + 2 < n {
                s += x[id + 2 * st];
            }
            if c[axis] >= 2 {
                s += x[id - 2 * st];
            }
        }
        *o = k * s;
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let v: Vec<f64> = a.par_iter().zip(b).map(|(x, y)| x * y).collect();
    tiled_sum(&v)
}

/// Solve `Δφ = s` with the wide Laplacian by conjugate gradients.
pub fn solve_poisson(g: &Grid3, s: &[f64]) -> Result<PoissonSolution> {
    let monopole = tiled_sum(s) * g.h.powi(3);
    let mut sol = PoissonSolution { grid: *g, phi: vec![0.0; g.len()], monopole, iterations: 0, residual: 0.0 };
    // boundary contribution: wide Laplacian of the boundary values alone
    let k = 0.25 / (g.h * g.h);
    let n = g.n as isize;
    let bc: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|id| {
            let c = g.ijk(id).map(|v| v as isize);
            let mut acc = 0.0;
            for axis in 0..3 {
                for d in [-2isize, 2] {
                    let mut q = c;
                    q[axis] += d;
                    if q[axis] < 0 || q[axis] >= n {
                        acc += sol.at(q);
                    }
                }
            }
            k * acc
        })
        .collect();
    // A = −Δ₀ (SPD), b = −(s − bc)
    let b: Vec<f64> = s.iter().zip(&bc).map(|(s, c)| c - s).collect();
    let bnorm = dot(&b, &b).sqrt();
    if bnorm == 0.0 {
        return Ok(sol);
    }
    let mut x = vec![0.0; g.len()];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; g.len()];
    let mut rr = dot(&r, &r);
    let max_iter = 20 * g.n * g.n + 100;
    let mut it = 0;
    while rr.sqrt() > CG_RTOL * bnorm {
        if it >= max_iter {
            return Err(Error::SolverNonConvergence { residual: rr.sqrt() / bnorm, iterations: it });
        }
        wide_laplacian(g, &p, &mut ap);
        ap.par_iter_mut().for_each(|v| *v = -*v);
        let alpha = rr / dot(&p, &ap);
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        p.par_iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        rr = rr_new;
        it += 1;
    }
    sol.phi = x;
    sol.iterations = it;
    sol.residual = rr.sqrt() / bnorm;
    Ok(sol)
}

#[derive(Clone, Debug)]
pub struct HodgeSplit {
    pub e_df: [Vec<f64>; 3],
    pub e_cf: [Vec<f64>; 3],
    pub potential: PoissonSolution,
}

/// `E = E^df + ∇φ` with `Δφ = div E`.
pub fn hodge_decompose(g: &Grid3, e: &[Vec<f64>; 3]) -> Result<HodgeSplit> {
    let s = divergence(g, e);
    let potential = solve_poisson(g, &s)?;
    let e_cf = potential.gradient();
    let e_df = [0, 1, 2].map(|k| e[k].iter().zip(&e_cf[k]).map(|(a, b)| a - b).collect());
    Ok(HodgeSplit { e_df, e_cf, potential })
}

/// Initial data on the box satisfying the discrete constraints.
#[derive(Clone, Debug)]
pub struct AdmissibleData {
    pub grid: Grid3,
    pub phi0: Vec<C64>,
    pub phi_dot0: Vec<C64>,
    pub e: [Vec<f64>; 3],
    pub h: [Vec<f64>; 3],
    pub charge: f64,
}

/// `E = E^df_seed + ∇Δ⁻¹ Im(φ_0 conj φ̇_0)`, `H` divergence-cleaned.
pub fn make_admissible_data(
    g: &Grid3,
    phi0: Vec<C64>,
    phi_dot0: Vec<C64>,
    e_seed: Option<[Vec<f64>; 3]>,
    h_seed: Option<[Vec<f64>; 3]>,
) -> Result<AdmissibleData> {
    let j0: Vec<f64> = phi0.iter().zip(&phi_dot0).map(|(p, d)| (p * d.conj()).im).collect();
    let zero = || [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    let mut e = e_seed.unwrap_or_else(zero);
    if j0.iter().any(|v| *v != 0.0) {
        let grad = solve_poisson(g, &j0)?.gradient();
        for k in 0..3 {
            e[k].iter_mut().zip(&grad[k]).for_each(|(a, b)| *a += b);
        }
    }
    let h = match h_seed {
        Some(h) => hodge_decompose(g, &h)?.e_df,
        None => zero(),
    };
    Ok(AdmissibleData { grid: *g, phi0, phi_dot0, e, h, charge: tiled_sum(&j0) * g.h.powi(3) })
}

/// `max |div E − J_0|` over the listed cells.
pub fn gauss_residual(g: &Grid3, e: &[Vec<f64>; 3], j0: &[f64], cells: &[usize]) -> f64 {
    let d = divergence(g, e);
    cells.iter().fold(0.0f64, |m, &i| m.max((d[i] - j0[i]).abs()))
}

/// Centered curl of a vector field.
pub fn curl(g: &Grid3, a: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    let d = |comp: usize, axis: usize| diff_axis(g, &a[comp], axis);
    let (d21, d12) = (d(2, 1), d(1, 2));
    let (d02, d20) = (d(0, 2), d(2, 0));
    let (d10, d01) = (d(1, 0), d(0, 1));
    [
        d21.iter().zip(&d12).map(|(a, b)| a - b).collect(),
        d02.iter().zip(&d20).map(|(a, b)| a - b).collect(),
        d10.iter().zip(&d01).map(|(a, b)| a - b).collect(),
    ]
}

// ---------------------------------------------------------------------------
// Weighted elliptic ratio

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// For a radial density on `g`:
/// `lhs = ∫ r^{2δ} |∇(Δ⁻¹ρ + q/(4πr))|² dx`, `rhs = ‖r^δ ρ‖²_{L^{6/5}}`.
///
/// In spherical symmetry the gradient is `(q_enc(r) − q)/(4πr²)`; each cell
/// integrates `r^{2δ−2}` exactly against the midpoint value of `(q_enc − q)²`.
pub fn weighted_elliptic_ratio(rho: &[f64], g: &Grid1, delta: f64) -> Result<EllipticRatio> {
    if !(delta > 0.5 && delta < 1.5) {
        return Err(Error::WeightOutOfRange(format!("delta = {delta} outside (1/2, 3/2)")));
    }
    let n = rho.len().min(g.n);
    // enclosed charge at faces
    let mut q_face = Vec::with_capacity(n + 1);
    q_face.push(0.0);
    let mut acc = 0.0;
    for (j, v) in rho.iter().take(n).enumerate() {
        acc += 4.0 * PI * v * g.r(j).powi(2) * g.h;
        q_face.push(acc);
    }
    let q = acc;
    let p = 2.0 * delta - 1.0;
    let lhs_terms: Vec<f64> = (0..n)
        .map(|j| {
            let (a, b) = (j as f64 * g.h, (j + 1) as f64 * g.h);
            let mid = 0.5 * (q_face[j] + q_face[j + 1]) - q;
            mid * mid * (b.powf(p) - a.powf(p)) / p / (4.0 * PI)
        })
        .collect();
    let rhs_terms: Vec<f64> = (0..n)
        .map(|j| {
            let r = g.r(j);
            (r.powf(delta) * rho[j].abs()).powf(1.2) * 4.0 * PI * r * r * g.h
        })
        .collect();
    let lhs = pairwise_sum(&lhs_terms);
    let rhs = pairwise_sum(&rhs_terms).powf(5.0 / 3.0);
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(EllipticRatio { lhs, rhs, ratio })
}
