//! Time evolution: a spherically symmetric reduction for long runs and a
//! small Lorenz-gauge box for identity and convergence checks.
//!
//! Spherical scheme. Unknowns are `ψ = rφ` and `Π = D_t ψ` at cell centers
//! and the flux variable `W = r² E_r` at faces `r_{j+½}`, in the gauge
//! `A_r = 0`:
//!
//! - `∂_t ψ = Π − i A_t ψ`
//! - `∂_t Π = ∂_r² ψ − i A_t Π`
//! - `∂_t W = Im(ψ ∂_r conj ψ)`
//!
//! `A_t` is recovered from `E_r = −∂_r A_t` with `A_t(R_max) = 0`. The flux
//! discretization is the one whose discrete divergence equals the time
//! derivative of `Im(ψ Π̄)`, so the discrete Gauss law and the total charge
//! are preserved by the semi-discrete system.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::charge::{make_admissible_data, total_charge_box, total_charge_radial};
use crate::fields::{
    curvature_from_potential, current_from_fields, divergence, em_decompose, fmt_f64, magnetic_divergence, components,
    CurvatureGrid3, CurrentGrid3, Grid1, Grid3, GridKind, PotentialSlice3, RadialSlice, ScalarSlice3, Snapshot,
};
use crate::geometry::{WeightParams, CHI_OFFSET, METRIC};
use crate::manufactured::{AnalyticFields, Blob, CJet, Jet, PlaneWave, RadialBlob, RadialManufactured};
use crate::tolerances::CFL_LIMIT;
use crate::{Error, Result, C64};

/// Stable step ratio for the box scheme (RK4 with the 7-point Laplacian).
pub const BOX_CFL_LIMIT: f64 = 0.8;
/// Largest box resolution per axis.
pub const BOX_MAX_N: usize = 96;
/// Outer margin required beyond the data support and light travel.
pub const CAUSAL_MARGIN: f64 = 5.0;

const C1: f64 = 16.0 / 12.0;
const C2: f64 = -1.0 / 12.0;

// ---------------------------------------------------------------------------
// Configuration

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Sph1d,
    Box3d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    Zero,
    /// `φ_0 = a e^{−(r−r_0)²/σ²}`, `D_t φ(0) = i c φ_0`.
    ChargedGaussian,
    /// Real `φ_0` with `D_t φ(0) = 0`.
    RealPulse,
    /// Manufactured solution with source forcing.
    Manufactured,
    /// Free electromagnetic plane wave (box only).
    PlaneWave,
}

impl Recipe {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => Recipe::Zero,
            "charged-gaussian" => Recipe::ChargedGaussian,
            "real-pulse" => Recipe::RealPulse,
            "manufactured" => Recipe::Manufactured,
            "plane-wave" => Recipe::PlaneWave,
            other => return Err(Error::RecipeUnknown(other.to_string())),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Recipe::Zero => "zero",
            Recipe::ChargedGaussian => "charged-gaussian",
            Recipe::RealPulse => "real-pulse",
            Recipe::Manufactured => "manufactured",
            Recipe::PlaneWave => "plane-wave",
        }
    }
}

/// Whether the scalar sources the Maxwell field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    Full,
    /// `A ≡ 0`: the flat wave equation.
    Decoupled,
}

/// Normalization of `A_t` in the spherical scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeNorm {
    /// `A_t(R_max) = 0`.
    Outer,
    /// `A_t = 0` at the innermost cell.
    Origin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub h: f64,
    pub cfl: f64,
    pub t_final: f64,
    pub cadence: f64,
    pub s: f64,
    pub gamma: f64,
    pub eps: f64,
    pub recipe: Recipe,
    pub chi_offset: f64,
    pub amplitude: f64,
    pub r0: f64,
    pub width: f64,
    pub charge_rate: f64,
    pub coupling: Coupling,
    pub gauge: GaugeNorm,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Sph1d,
            n: 3200,
            h: 0.05,
            cfl: 0.5,
            t_final: 100.0,
            cadence: 0.5,
            s: 0.75,
            gamma: 0.5,
            eps: 0.05,
            recipe: Recipe::ChargedGaussian,
            chi_offset: CHI_OFFSET,
            amplitude: 0.05,
            r0: 5.0,
            width: 1.0,
            charge_rate: 1.0,
            coupling: Coupling::Full,
            gauge: GaugeNorm::Outer,
        }
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 17] = [
        "scheme",
        "n",
        "h",
        "cfl",
        "t_final",
        "cadence",
        "s",
        "gamma",
        "eps",
        "recipe",
        "chi_offset",
        "amplitude",
        "r0",
        "width",
        "charge_rate",
        "coupling",
        "gauge",
    ];

    /// Parse `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::ConfigParse { line: k + 1, msg: format!("expected key = value, got '{line}'") })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::ConfigParse { line: k + 1, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value.parse::<f64>().map_err(|_| Error::ConfigInvalid(format!("{key}: '{value}' is not a number")))
        };
        match key {
            "scheme" => {
                self.scheme = match value {
                    "sph1d" => Scheme::Sph1d,
                    "box3d" => Scheme::Box3d,
                    _ => return Err(Error::ConfigInvalid(format!("unknown scheme '{value}'"))),
                }
            }
            "n" => {
                self.n = value.parse().map_err(|_| Error::ConfigInvalid(format!("n: '{value}' is not a count")))?
            }
            "h" => self.h = num()?,
            "cfl" => self.cfl = num()?,
            "t_final" => self.t_final = num()?,
            "cadence" => self.cadence = num()?,
            "s" => self.s = num()?,
            "gamma" => self.gamma = num()?,
            "eps" => self.eps = num()?,
            "recipe" => self.recipe = Recipe::parse(value)?,
            "chi_offset" => self.chi_offset = num()?,
            "amplitude" => self.amplitude = num()?,
            "r0" => self.r0 = num()?,
            "width" => self.width = num()?,
            "charge_rate" => self.charge_rate = num()?,
            "coupling" => {
                self.coupling = match value {
                    "full" => Coupling::Full,
                    "decoupled" => Coupling::Decoupled,
                    _ => return Err(Error::ConfigInvalid(format!("unknown coupling '{value}'"))),
                }
            }
            "gauge" => {
                self.gauge = match value {
                    "outer" => GaugeNorm::Outer,
                    "origin" => GaugeNorm::Origin,
                    _ => return Err(Error::ConfigInvalid(format!("unknown gauge '{value}'"))),
                }
            }
            _ => return Err(Error::ConfigInvalid(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Canonical text form, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let scheme = match self.scheme {
            Scheme::Sph1d => "sph1d",
            Scheme::Box3d => "box3d",
        };
        let coupling = match self.coupling {
            Coupling::Full => "full",
            Coupling::Decoupled => "decoupled",
        };
        let gauge = match self.gauge {
            GaugeNorm::Outer => "outer",
            GaugeNorm::Origin => "origin",
        };
        let _ = writeln!(s, "scheme = {scheme}");
        let _ = writeln!(s, "n = {}", self.n);
        for (k, v) in [("h", self.h), ("cfl", self.cfl), ("t_final", self.t_final), ("cadence", self.cadence)] {
            let _ = writeln!(s, "{k} = {}", fmt_f64(v));
        }
        for (k, v) in [("s", self.s), ("gamma", self.gamma), ("eps", self.eps)] {
            let _ = writeln!(s, "{k} = {}", fmt_f64(v));
        }
        let _ = writeln!(s, "recipe = {}", self.recipe.id());
        for (k, v) in [
            ("chi_offset", self.chi_offset),
            ("amplitude", self.amplitude),
            ("r0", self.r0),
            ("width", self.width),
            ("charge_rate", self.charge_rate),
        ] {
            let _ = writeln!(s, "{k} = {}", fmt_f64(v));
        }
        let _ = writeln!(s, "coupling = {coupling}");
        let _ = writeln!(s, "gauge = {gauge}");
        s
    }

    pub fn weight_params(&self) -> Result<WeightParams> {
        WeightParams::new(self.s, self.gamma, self.eps)
    }

    pub fn cfl_limit(&self) -> f64 {
        match self.scheme {
            Scheme::Sph1d => CFL_LIMIT,
            Scheme::Box3d => BOX_CFL_LIMIT,
        }
    }

    /// Check every invariant of the configuration.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.h > 0.0) {
            return Err(Error::ConfigInvalid("n and h must be positive".into()));
        }
        if !(self.t_final >= 0.0) || !(self.cadence > 0.0) {
            return Err(Error::ConfigInvalid("t_final must be ≥ 0 and cadence > 0".into()));
        }
        if !(self.cfl > 0.0) || self.cfl > self.cfl_limit() {
            return Err(Error::CflViolation { ratio: self.cfl, limit: self.cfl_limit() });
        }
        self.weight_params()?;
        match self.scheme {
            Scheme::Sph1d => {
                if self.recipe == Recipe::PlaneWave {
                    return Err(Error::ConfigInvalid("plane-wave data needs scheme = box3d".into()));
                }
                let support = match self.recipe {
                    Recipe::ChargedGaussian | Recipe::RealPulse => self.r0 + 4.0 * self.width,
                    _ => 0.0,
                };
                let r_max = self.n as f64 * self.h;
                if self.recipe != Recipe::Manufactured && self.t_final + support + CAUSAL_MARGIN > r_max {
                    return Err(Error::ConfigInvalid(format!(
                        "outer boundary not causally disconnected: t_final + support + {CAUSAL_MARGIN} = {} > R_max = {r_max}",
                        self.t_final + support + CAUSAL_MARGIN
                    )));
                }
            }
            Scheme::Box3d => {
                if self.n > BOX_MAX_N {
                    return Err(Error::ConfigInvalid(format!("box resolution {} exceeds {BOX_MAX_N}", self.n)));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Runge-Kutta

trait RkState: Clone {
    /// `self += k · d`.
    fn axpy(&mut self, k: f64, d: &Self);
}

fn rk4<S: RkState>(u: &S, t: f64, dt: f64, f: impl Fn(&S, f64) -> S) -> S {
    let k1 = f(u, t);
    let mut y = u.clone();
    y.axpy(0.5 * dt, &k1);
    let k2 = f(&y, t + 0.5 * dt);
    let mut y = u.clone();
    y.axpy(0.5 * dt, &k2);
    let k3 = f(&y, t + 0.5 * dt);
    let mut y = u.clone();
    y.axpy(dt, &k3);
    let k4 = f(&y, t + dt);
    let mut out = u.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out
}

fn axpy_c(a: &mut [C64], k: f64, d: &[C64]) {
    a.iter_mut().zip(d).for_each(|(x, y)| *x += k * y);
}

fn axpy_r(a: &mut [f64], k: f64, d: &[f64]) {
    a.iter_mut().zip(d).for_each(|(x, y)| *x += k * y);
}

// ---------------------------------------------------------------------------
// Spherical scheme

#[derive(Clone, Debug, PartialEq)]
struct SphVars {
    psi: Vec<C64>,
    pi: Vec<C64>,
    flux: Vec<f64>,
}

impl RkState for SphVars {
    fn axpy(&mut self, k: f64, d: &Self) {
        axpy_c(&mut self.psi, k, &d.psi);
        axpy_c(&mut self.pi, k, &d.pi);
        axpy_r(&mut self.flux, k, &d.flux);
    }
}

/// Spherically symmetric state on `r_j = (j + ½) h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalState1D {
    pub t: f64,
    pub grid: Grid1,
    /// `ψ = r φ`.
    pub psi: Vec<C64>,
    /// `Π = D_t ψ`.
    pub pi: Vec<C64>,
    /// `W_j = r_{j+½}² E_r(r_{j+½})`.
    pub flux: Vec<f64>,
    pub coupling: Coupling,
    pub gauge: GaugeNorm,
    pub forcing: Option<RadialManufactured>,
}

/// `ψ` with odd reflection at the origin and zero beyond the outer edge.
fn psi_ext(psi: &[C64], i: isize) -> C64 {
    if i < 0 {
        -psi[(-1 - i) as usize]
    } else if (i as usize) < psi.len() {
        psi[i as usize]
    } else {
        C64::new(0.0, 0.0)
    }
}

/// Fourth-order `∂_r² ψ`.
fn laplacian4(psi: &[C64], j: usize, h: f64) -> C64 {
    let i = j as isize;
    let c = psi[j];
    (C1 * (psi_ext(psi, i + 1) + psi_ext(psi, i - 1) - 2.0 * c) + C2 * (psi_ext(psi, i + 2) + psi_ext(psi, i - 2) - 2.0 * c))
        / (h * h)
}

/// Fourth-order `∂_r ψ`.
fn gradient4(psi: &[C64], j: usize, h: f64) -> C64 {
    let i = j as isize;
    (8.0 * (psi_ext(psi, i + 1) - psi_ext(psi, i - 1)) - (psi_ext(psi, i + 2) - psi_ext(psi, i - 2))) / (12.0 * h)
}

fn im_prod(a: C64, b: C64) -> f64 {
    (a * b.conj()).im
}

/// Discrete charge flux through face `j + ½`, scaled by `h`.
fn face_flux(psi: &[C64], j: usize) -> f64 {
    let i = j as isize;
    let p = |k: isize| psi_ext(psi, k);
    C1 * im_prod(p(i), p(i + 1)) + C2 * (im_prod(p(i - 1), p(i + 1)) + im_prod(p(i), p(i + 2)))
}

/// `W_j = Σ_{k ≤ j} h Im(ψ_k Π̄_k)`: the exact discrete Gauss integration.
fn gauss_flux(psi: &[C64], pi: &[C64], h: f64) -> Vec<f64> {
    let mut acc = 0.0;
    psi.iter()
        .zip(pi)
        .map(|(p, q)| {
            acc += h * im_prod(*p, *q);
            acc
        })
        .collect()
}

/// `A_t` at cell centers from face values of `E_r`.
fn potential_from_flux(grid: &Grid1, flux: &[f64], gauge: GaugeNorm) -> Vec<f64> {
    let n = flux.len();
    let h = grid.h;
    let mut a = vec![0.0; n];
    if n == 0 {
        return a;
    }
    let e = |j: usize| flux[j] / grid.face(j).powi(2);
    a[n - 1] = 0.5 * h * e(n - 1);
    for j in (0..n - 1).rev() {
        a[j] = a[j + 1] + h * e(j);
    }
    if gauge == GaugeNorm::Origin {
        let a0 = a[0];
        a.iter_mut().for_each(|v| *v -= a0);
    }
    a
}

impl SphericalState1D {
    pub fn zero(grid: Grid1) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.n];
        Self {
            t: 0.0,
            grid,
            psi: z.clone(),
            pi: z,
            flux: vec![0.0; grid.n],
            coupling: Coupling::Full,
            gauge: GaugeNorm::Outer,
            forcing: None,
        }
    }

    /// State from `φ_0` and `D_t φ(0)` with the Gauss law solved exactly.
    pub fn from_data(grid: Grid1, phi0: impl Fn(f64) -> C64, dphi0: impl Fn(f64) -> C64, coupling: Coupling) -> Self {
        let mut s = Self::zero(grid);
        for j in 0..grid.n {
            let r = grid.r(j);
            s.psi[j] = r * phi0(r);
            s.pi[j] = r * dphi0(r);
        }
        s.coupling = coupling;
        if coupling == Coupling::Full {
            s.flux = gauss_flux(&s.psi, &s.pi, grid.h);
        }
        s
    }

    /// Manufactured solution on `[0, m.r_max]` with its source terms.
    pub fn manufactured(n: usize, m: RadialManufactured) -> Self {
        let grid = Grid1 { n, h: m.r_max / n as f64 };
        let mut s = Self::zero(grid);
        for j in 0..n {
            let r = grid.r(j);
            s.psi[j] = m.psi(0.0, r).value();
            s.pi[j] = m.pi(0.0, r).0;
            let f = grid.face(j);
            s.flux[j] = f * f * m.e_r(0.0, f).v;
        }
        s.forcing = Some(m);
        s
    }

    fn vars(&self) -> SphVars {
        SphVars { psi: self.psi.clone(), pi: self.pi.clone(), flux: self.flux.clone() }
    }

    fn rhs(&self, v: &SphVars, t: f64) -> SphVars {
        let g = self.grid;
        let n = g.n;
        let h = g.h;
        let a = match self.coupling {
            Coupling::Full => potential_from_flux(&g, &v.flux, self.gauge),
            Coupling::Decoupled => vec![0.0; n],
        };
        let i = C64::i();
        let mut psi = Vec::with_capacity(n);
        let mut pi = Vec::with_capacity(n);
        let mut flux = Vec::with_capacity(n);
        for j in 0..n {
            psi.push(v.pi[j] - i * a[j] * v.psi[j]);
            let mut dpi = laplacian4(&v.psi, j, h) - i * a[j] * v.pi[j];
            if let Some(m) = &self.forcing {
                dpi += m.forcing_pi(t, g.r(j));
            }
            pi.push(dpi);
            let mut dw = match self.coupling {
                Coupling::Full => face_flux(&v.psi, j) / h,
                Coupling::Decoupled => 0.0,
            };
            if let Some(m) = &self.forcing {
                dw += m.forcing_e(t, g.face(j));
            }
            flux.push(dw);
        }
        SphVars { psi, pi, flux }
    }

    /// One classical RK4 step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let ratio = dt / self.grid.h;
        if ratio > CFL_LIMIT {
            return Err(Error::CflViolation { ratio, limit: CFL_LIMIT });
        }
        let out = rk4(&self.vars(), self.t, dt, |v, t| self.rhs(v, t));
        self.t += dt;
        let finite = out.psi.iter().chain(&out.pi).all(|c| c.re.is_finite() && c.im.is_finite())
            && out.flux.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NanDetected { t: self.t });
        }
        self.psi = out.psi;
        self.pi = out.pi;
        self.flux = out.flux;
        Ok(())
    }

    pub fn e_face(&self, j: usize) -> f64 {
        self.flux[j] / self.grid.face(j).powi(2)
    }

    /// `E_r` at cell centers (mean of the adjacent faces; zero at the origin).
    pub fn e_center(&self) -> Vec<f64> {
        (0..self.grid.n)
            .map(|j| {
                let inner = if j == 0 { 0.0 } else { self.e_face(j - 1) };
                0.5 * (inner + self.e_face(j))
            })
            .collect()
    }

    pub fn a_t(&self) -> Vec<f64> {
        match self.coupling {
            Coupling::Full => potential_from_flux(&self.grid, &self.flux, self.gauge),
            Coupling::Decoupled => vec![0.0; self.grid.n],
        }
    }

    /// Gauge-invariant fields at cell centers.
    pub fn slice(&self) -> RadialSlice {
        let g = self.grid;
        let n = g.n;
        let mut s = RadialSlice {
            t: self.t,
            grid: g,
            phi: Vec::with_capacity(n),
            d_t: Vec::with_capacity(n),
            d_r: Vec::with_capacity(n),
            rho: self.e_center(),
            j0: Vec::with_capacity(n),
            jr: Vec::with_capacity(n),
        };
        for j in 0..n {
            let r = g.r(j);
            let psi_r = gradient4(&self.psi, j, g.h);
            s.phi.push(self.psi[j] / r);
            s.d_t.push(self.pi[j] / r);
            s.d_r.push(psi_r / r - self.psi[j] / (r * r));
            s.j0.push(im_prod(self.psi[j], self.pi[j]) / (r * r));
            s.jr.push(im_prod(self.psi[j], psi_r) / (r * r));
        }
        s
    }

    /// `q = ∫ J_0 dx`.
    pub fn charge(&self) -> f64 {
        let j0: Vec<f64> =
            (0..self.grid.n).map(|j| im_prod(self.psi[j], self.pi[j]) / self.grid.r(j).powi(2)).collect();
        total_charge_radial(&j0, &self.grid).q
    }

    /// `max_j |W_j − W_{j−1} − h Im(ψ_j Π̄_j)| / h`, the discrete form of
    /// `r² (div E − J_0)`.
    pub fn gauss_residual(&self) -> f64 {
        if self.coupling == Coupling::Decoupled {
            return 0.0;
        }
        let h = self.grid.h;
        (0..self.grid.n)
            .map(|j| {
                let prev = if j == 0 { 0.0 } else { self.flux[j - 1] };
                ((self.flux[j] - prev) / h - im_prod(self.psi[j], self.pi[j])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `∫ Q_00 dx` of the combined system.
    pub fn energy(&self) -> f64 {
        crate::energy::radial_total_energy(&self.slice())
    }
}

/// Initial spherical state for a recipe.
pub fn init_sph1d(cfg: &RunConfig) -> Result<SphericalState1D> {
    let grid = Grid1 { n: cfg.n, h: cfg.h };
    let (a, r0, w, c) = (cfg.amplitude, cfg.r0, cfg.width, cfg.charge_rate);
    let gauss = move |r: f64| a * (-(r - r0) * (r - r0) / (w * w)).exp();
    let mut s = match cfg.recipe {
        Recipe::Zero => SphericalState1D::zero(grid),
        Recipe::ChargedGaussian => SphericalState1D::from_data(
            grid,
            |r| C64::new(gauss(r), 0.0),
            |r| C64::new(0.0, c * gauss(r)),
            cfg.coupling,
        ),
        Recipe::RealPulse => {
            SphericalState1D::from_data(grid, |r| C64::new(gauss(r), 0.0), |_| C64::new(0.0, 0.0), cfg.coupling)
        }
        Recipe::Manufactured => {
            let m = RadialManufactured { r_max: grid.r_max(), ..RadialManufactured::default() };
            SphericalState1D::manufactured(cfg.n, m)
        }
        Recipe::PlaneWave => return Err(Error::RecipeUnknown("plane-wave (spherical)".into())),
    };
    s.coupling = cfg.coupling;
    s.gauge = cfg.gauge;
    Ok(s)
}

/// Step the state to `t_end` with steps no longer than `cfl · h`.
pub fn advance_sph1d(s: &mut SphericalState1D, t_end: f64, cfl: f64) -> Result<()> {
    let span = t_end - s.t;
    if span <= 0.0 {
        return Ok(());
    }
    let steps = (span / (cfl * s.grid.h) - 1e-9).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    for _ in 0..steps {
        s.step(dt)?;
    }
    s.t = t_end;
    Ok(())
}

/// Max errors `(ψ, r² E_r)` of the manufactured solution at `t_final`.
pub fn sph1d_mms_error(n: usize, t_final: f64, cfl: f64) -> Result<(f64, f64)> {
    let m = RadialManufactured::default();
    let mut s = SphericalState1D::manufactured(n, m);
    advance_sph1d(&mut s, t_final, cfl)?;
    let g = s.grid;
    let ep = (0..n).map(|j| (s.psi[j] - m.psi(t_final, g.r(j)).value()).norm()).fold(0.0, f64::max);
    let ee = (0..n).map(|j| (s.flux[j] - g.face(j).powi(2) * m.e_r(t_final, g.face(j)).v).abs()).fold(0.0, f64::max);
    Ok((ep, ee))
}

// ---------------------------------------------------------------------------
// Box scheme

/// Analytic configurations used as exact boundary data and sources.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExactSolution {
    Blob(Blob),
    RadialBlob(RadialBlob),
    PlaneWave(PlaneWave),
}

impl AnalyticFields for ExactSolution {
    fn phi(&self, x: &[f64; 4]) -> CJet {
        match self {
            ExactSolution::Blob(b) => b.phi(x),
            ExactSolution::RadialBlob(b) => b.phi(x),
            ExactSolution::PlaneWave(w) => w.phi(x),
        }
    }

    fn a(&self, x: &[f64; 4]) -> [Jet; 4] {
        match self {
            ExactSolution::Blob(b) => b.a(x),
            ExactSolution::RadialBlob(b) => b.a(x),
            ExactSolution::PlaneWave(w) => w.a(x),
        }
    }
}

/// Right-hand sides `(∂_t²φ, ∂_t²A_α)` of the Lorenz-gauge system from
/// pointwise values.
struct PointData {
    phi: C64,
    phi_t: C64,
    grad_phi: [C64; 3],
    lap_phi: C64,
    a: [f64; 4],
    a_t0: f64,
    div_a: f64,
    lap_a: [f64; 4],
}

fn lorenz_rhs(p: &PointData) -> (C64, [f64; 4]) {
    let i = C64::i();
    let a = p.a;
    // ∂^α A_α, A^α ∂_α φ, A^α A_α
    let div = -p.a_t0 + p.div_a;
    let a_dphi = -a[0] * p.phi_t + a[1] * p.grad_phi[0] + a[2] * p.grad_phi[1] + a[3] * p.grad_phi[2];
    let a_sq: f64 = (0..4).map(|m| METRIC[m] * a[m] * a[m]).sum();
    let phi_tt = p.lap_phi + i * div * p.phi + 2.0 * i * a_dphi - a_sq * p.phi;
    let d = [p.phi_t, p.grad_phi[0], p.grad_phi[1], p.grad_phi[2]];
    let a_tt = std::array::from_fn(|m| p.lap_a[m] + (p.phi * (d[m] + i * a[m] * p.phi).conj()).im);
    (phi_tt, a_tt)
}

/// Source terms that make an analytic configuration an exact solution.
fn exact_forcing(f: &dyn AnalyticFields, x: &[f64; 4]) -> (C64, [f64; 4]) {
    let p = f.phi(x);
    let a = f.a(x);
    let data = PointData {
        phi: p.value(),
        phi_t: p.d(0),
        grad_phi: [p.d(1), p.d(2), p.d(3)],
        lap_phi: p.dd(1, 1) + p.dd(2, 2) + p.dd(3, 3),
        a: a.map(|j| j.v),
        a_t0: a[0].d[0],
        div_a: a[1].d[1] + a[2].d[2] + a[3].d[3],
        lap_a: a.map(|j| j.dd[1][1] + j.dd[2][2] + j.dd[3][3]),
    };
    let (phi_tt, a_tt) = lorenz_rhs(&data);
    (p.dd(0, 0) - phi_tt, std::array::from_fn(|m| a[m].dd[0][0] - a_tt[m]))
}

#[derive(Clone, Debug, PartialEq)]
struct BoxVars {
    phi: Vec<C64>,
    phi_t: Vec<C64>,
    a: [Vec<f64>; 4],
    a_t: [Vec<f64>; 4],
}

impl RkState for BoxVars {
    fn axpy(&mut self, k: f64, d: &Self) {
        axpy_c(&mut self.phi, k, &d.phi);
        axpy_c(&mut self.phi_t, k, &d.phi_t);
        for m in 0..4 {
            axpy_r(&mut self.a[m], k, &d.a[m]);
            axpy_r(&mut self.a_t[m], k, &d.a_t[m]);
        }
    }
}

/// Cartesian box state. Ghost values are zero with a damping sponge in the
/// outer tenth of each axis, or the exact solution when one is attached.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxState3D {
    pub t: f64,
    pub grid: Grid3,
    pub phi: Vec<C64>,
    pub phi_t: Vec<C64>,
    pub a: [Vec<f64>; 4],
    pub a_t: [Vec<f64>; 4],
    /// Exact boundary data.
    pub exact: Option<ExactSolution>,
    /// Add the sources that make `exact` a solution.
    pub forced: bool,
    sponge: Vec<f64>,
}

/// Peak damping rate of the sponge.
pub const SPONGE_STRENGTH: f64 = 2.0;

fn sponge_profile(g: &Grid3) -> Vec<f64> {
    let half = 0.5 * g.side();
    let start = 0.8 * half;
    (0..g.len())
        .map(|id| {
            let x = g.x(id);
            let d = x.iter().map(|v| ((v.abs() - start) / (half - start)).max(0.0)).fold(0.0, f64::max);
            SPONGE_STRENGTH * d.min(1.0).powi(4)
        })
        .collect()
}

impl BoxState3D {
    pub fn zero(grid: Grid3) -> Self {
        let z = || vec![0.0; grid.len()];
        let zc = || vec![C64::new(0.0, 0.0); grid.len()];
        Self {
            t: 0.0,
            grid,
            phi: zc(),
            phi_t: zc(),
            a: [z(), z(), z(), z()],
            a_t: [z(), z(), z(), z()],
            exact: None,
            forced: false,
            sponge: sponge_profile(&grid),
        }
    }

    /// State sampled from an analytic configuration at `t`, with exact
    /// boundary data.
    pub fn from_exact(grid: Grid3, t: f64, e: ExactSolution, forced: bool) -> Self {
        let mut s = Self::zero(grid);
        s.t = t;
        let vals: Vec<(CJet, [Jet; 4])> = (0..grid.len())
            .into_par_iter()
            .map(|id| {
                let x = grid.point(id, t).coords();
                (e.phi(&x), e.a(&x))
            })
            .collect();
        for (id, (p, a)) in vals.iter().enumerate() {
            s.phi[id] = p.value();
            s.phi_t[id] = p.d(0);
            for m in 0..4 {
                s.a[m][id] = a[m].v;
                s.a_t[m][id] = a[m].d[0];
            }
        }
        s.exact = Some(e);
        s.forced = forced;
        s.sponge = vec![0.0; grid.len()];
        s
    }

    /// Scalar data with `A = 0` and `∂_t A_i = E_i` chosen so that the Lorenz
    /// condition and its time derivative vanish: `div ∂_t A = J_0`.
    pub fn from_scalar_data(grid: Grid3, phi0: Vec<C64>, phi_t0: Vec<C64>) -> Result<Self> {
        let data = make_admissible_data(&grid, phi0, phi_t0, None, None)?;
        let mut s = Self::zero(grid);
        s.phi = data.phi0;
        s.phi_t = data.phi_dot0;
        for k in 0..3 {
            s.a_t[k + 1] = data.e[k].clone();
        }
        Ok(s)
    }

    fn vars(&self) -> BoxVars {
        BoxVars { phi: self.phi.clone(), phi_t: self.phi_t.clone(), a: self.a.clone(), a_t: self.a_t.clone() }
    }

    fn rhs(&self, v: &BoxVars, t: f64) -> BoxVars {
        let g = self.grid;
        let n = g.n as isize;
        let h = g.h;
        let inv2 = 0.5 / h;
        let invh2 = 1.0 / (h * h);
        let exact = self.exact;
        let ghost = |c: [isize; 3]| -> (C64, [f64; 4]) {
            match &exact {
                Some(e) => {
                    let x = [t, g.coord_i(c[0]), g.coord_i(c[1]), g.coord_i(c[2])];
                    (e.phi(&x).value(), e.a(&x).map(|j| j.v))
                }
                None => (C64::new(0.0, 0.0), [0.0; 4]),
            }
        };
        let out: Vec<(C64, [f64; 4])> = (0..g.len())
            .into_par_iter()
            .map(|id| {
                let c = g.ijk(id).map(|v| v as isize);
                let sample = |off: [isize; 3]| -> (C64, [f64; 4]) {
                    let q = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
                    if q.iter().all(|&v| v >= 0 && v < n) {
                        let k = g.idx(q[0] as usize, q[1] as usize, q[2] as usize);
                        (v.phi[k], [v.a[0][k], v.a[1][k], v.a[2][k], v.a[3][k]])
                    } else {
                        ghost(q)
                    }
                };
                let phi = v.phi[id];
                let a: [f64; 4] = std::array::from_fn(|m| v.a[m][id]);
                let mut lap_phi = -6.0 * phi;
                let mut lap_a = a.map(|x| -6.0 * x);
                let mut grad_phi = [C64::new(0.0, 0.0); 3];
                let mut div_a = 0.0;
                for axis in 0..3 {
                    let mut off = [0isize; 3];
                    off[axis] = 1;
                    let (pp, ap) = sample(off);
                    off[axis] = -1;
                    let (pm, am) = sample(off);
                    lap_phi += pp + pm;
                    for m in 0..4 {
                        lap_a[m] += ap[m] + am[m];
                    }
                    grad_phi[axis] = (pp - pm) * inv2;
                    div_a += (ap[axis + 1] - am[axis + 1]) * inv2;
                }
                let data = PointData {
                    phi,
                    phi_t: v.phi_t[id],
                    grad_phi,
                    lap_phi: lap_phi * invh2,
                    a,
                    a_t0: v.a_t[0][id],
                    div_a,
                    lap_a: lap_a.map(|x| x * invh2),
                };
                let (mut phi_tt, mut a_tt) = lorenz_rhs(&data);
                if self.forced {
                    if let Some(e) = &exact {
                        let x = g.point(id, t).coords();
                        let (fp, fa) = exact_forcing(e, &x);
                        phi_tt += fp;
                        for m in 0..4 {
                            a_tt[m] += fa[m];
                        }
                    }
                }
                let sg = self.sponge[id];
                if sg > 0.0 {
                    phi_tt -= sg * v.phi_t[id];
                    for m in 0..4 {
                        a_tt[m] -= sg * v.a_t[m][id];
                    }
                }
                (phi_tt, a_tt)
            })
            .collect();
        let (phi_tt, a_tt): (Vec<C64>, Vec<[f64; 4]>) = out.into_iter().unzip();
        BoxVars {
            phi: v.phi_t.clone(),
            phi_t: phi_tt,
            a: v.a_t.clone(),
            a_t: [0, 1, 2, 3].map(|m| a_tt.iter().map(|x| x[m]).collect()),
        }
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        let ratio = dt / self.grid.h;
        if ratio > BOX_CFL_LIMIT {
            return Err(Error::CflViolation { ratio, limit: BOX_CFL_LIMIT });
        }
        let out = rk4(&self.vars(), self.t, dt, |v, t| self.rhs(v, t));
        self.t += dt;
        let finite = out.phi.iter().chain(&out.phi_t).all(|c| c.re.is_finite() && c.im.is_finite())
            && out.a.iter().chain(&out.a_t).all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::NanDetected { t: self.t });
        }
        self.phi = out.phi;
        self.phi_t = out.phi_t;
        self.a = out.a;
        self.a_t = out.a_t;
        Ok(())
    }

    pub fn scalar_slice(&self) -> ScalarSlice3 {
        ScalarSlice3 { grid: self.grid, t: self.t, phi: self.phi.clone(), phi_t: self.phi_t.clone() }
    }

    pub fn potential_slice(&self) -> PotentialSlice3 {
        PotentialSlice3 { grid: self.grid, t: self.t, a: self.a.clone(), a_t: Some(self.a_t.clone()) }
    }

    pub fn curvature(&self) -> CurvatureGrid3 {
        curvature_from_potential(&self.potential_slice()).expect("box potential carries its time derivative")
    }

    pub fn current(&self) -> CurrentGrid3 {
        current_from_fields(&self.scalar_slice(), &self.potential_slice()).expect("box grids agree")
    }

    /// Cells used for acceptance: the central 60% of each axis.
    pub fn interior(&self) -> Vec<usize> {
        self.grid.interior(0.6)
    }

    pub fn charge(&self) -> f64 {
        total_charge_box(&self.current().j[0], &self.grid).q
    }

    /// `max |div E − J_0|` over the interior.
    pub fn gauss_residual(&self) -> f64 {
        let (e, _) = em_decompose(&self.curvature());
        let d = divergence(&self.grid, &components(&e));
        let j0 = self.current().j[0].clone();
        self.interior().iter().fold(0.0f64, |m, &i| m.max((d[i] - j0[i]).abs()))
    }

    /// `max |∂^α A_α|` over the interior.
    pub fn lorenz_residual(&self) -> f64 {
        let g = &self.grid;
        let d = divergence(g, &[self.a[1].clone(), self.a[2].clone(), self.a[3].clone()]);
        self.interior().iter().fold(0.0f64, |m, &i| m.max((d[i] - self.a_t[0][i]).abs()))
    }

    /// `max |div H|` over the interior.
    pub fn bianchi_residual(&self) -> f64 {
        let d = magnetic_divergence(&self.curvature());
        self.interior().iter().fold(0.0f64, |m, &i| m.max(d[i].abs()))
    }

    /// `∫ Q_00 dx` over the box.
    pub fn energy(&self) -> f64 {
        let f = self.curvature();
        let dphi = crate::fields::covariant_gradient(&self.scalar_slice(), &self.potential_slice()).expect("grids agree");
        let dens: Vec<f64> = (0..self.grid.len())
            .map(|id| {
                let e = f.f[id].electric();
                let b = f.f[id].magnetic();
                let sq = |v: [f64; 3]| v.iter().map(|x| x * x).sum::<f64>();
                0.5 * ((0..4).map(|m| dphi[m][id].norm_sqr()).sum::<f64>() + sq(e) + sq(b))
            })
            .collect();
        crate::quad::tiled_sum(&dens) * self.grid.h.powi(3)
    }

    /// Max interior errors `(φ, F)` against the attached exact solution.
    pub fn exact_error(&self) -> Option<(f64, f64)> {
        let e = self.exact?;
        let f = self.curvature();
        let cells = self.interior();
        let errs: Vec<(f64, f64)> = cells
            .par_iter()
            .map(|&id| {
                let x = self.grid.point(id, self.t).coords();
                let ep = (self.phi[id] - e.phi(&x).value()).norm();
                let fe = crate::manufactured::curvature(&e, &x);
                let ef = (f.f[id] - fe).max_abs();
                (ep, ef)
            })
            .collect();
        Some(errs.iter().fold((0.0f64, 0.0f64), |m, v| (m.0.max(v.0), m.1.max(v.1))))
    }

    /// Columnar snapshot of the evolved fields.
    pub fn to_snapshot(&self) -> Snapshot {
        let cols = ["x1", "x2", "x3", "phi_re", "phi_im", "a0", "a1", "a2", "a3"];
        let g = self.grid;
        let mut data = vec![Vec::with_capacity(g.len()); cols.len()];
        for id in 0..g.len() {
            let x = g.x(id);
            let row = [x[0], x[1], x[2], self.phi[id].re, self.phi[id].im, self.a[0][id], self.a[1][id], self.a[2][id], self.a[3][id]];
            for (c, v) in data.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Snapshot {
            kind: GridKind::ThreeD,
            dims: vec![g.n, g.n, g.n],
            h: g.h,
            t: self.t,
            columns: cols.iter().map(|s| s.to_string()).collect(),
            data,
        }
    }
}

/// Initial box state for a recipe.
pub fn init_box3d(cfg: &RunConfig) -> Result<BoxState3D> {
    let grid = Grid3::new(cfg.n, cfg.n as f64 * cfg.h);
    let (a, r0, w, c) = (cfg.amplitude, cfg.r0, cfg.width, cfg.charge_rate);
    let gauss = |id: usize| {
        let x = grid.x(id);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        a * (-(r - r0) * (r - r0) / (w * w)).exp()
    };
    match cfg.recipe {
        Recipe::Zero => Ok(BoxState3D::zero(grid)),
        Recipe::ChargedGaussian => {
            let phi: Vec<C64> = (0..grid.len()).map(|id| C64::new(gauss(id), 0.0)).collect();
            let phi_t = phi.iter().map(|p| C64::new(0.0, c) * p).collect();
            BoxState3D::from_scalar_data(grid, phi, phi_t)
        }
        Recipe::RealPulse => {
            let phi: Vec<C64> = (0..grid.len()).map(|id| C64::new(gauss(id), 0.0)).collect();
            BoxState3D::from_scalar_data(grid, phi, vec![C64::new(0.0, 0.0); grid.len()])
        }
        Recipe::Manufactured => Ok(BoxState3D::from_exact(grid, 0.0, ExactSolution::Blob(Blob::default()), true)),
        Recipe::PlaneWave => Ok(BoxState3D::from_exact(
            grid,
            0.0,
            ExactSolution::PlaneWave(PlaneWave { amp: cfg.amplitude, k: 2.0 * PI / (grid.side() / 2.0) }),
            false,
        )),
    }
}

pub fn advance_box3d(s: &mut BoxState3D, t_end: f64, cfl: f64) -> Result<()> {
    let span = t_end - s.t;
    if span <= 0.0 {
        return Ok(());
    }
    let steps = (span / (cfl * s.grid.h) - 1e-9).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    for _ in 0..steps {
        s.step(dt)?;
    }
    s.t = t_end;
    Ok(())
}

/// Max interior errors `(φ, F)` of the forced box run on `[−side/2, side/2]³`.
pub fn box3d_mms_error(n: usize, side: f64, t_final: f64, cfl: f64) -> Result<(f64, f64)> {
    let grid = Grid3::new(n, side);
    let mut s = BoxState3D::from_exact(grid, 0.0, ExactSolution::Blob(Blob::default()), true);
    advance_box3d(&mut s, t_final, cfl)?;
    Ok(s.exact_error().expect("exact solution attached"))
}

// ---------------------------------------------------------------------------
// Runs

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorRow {
    pub t: f64,
    pub charge: f64,
    pub gauss: f64,
    pub gauge: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    /// Spherical slices at the output cadence.
    pub slices: Vec<RadialSlice>,
    /// Box snapshots at the output cadence.
    pub snapshots: Vec<Snapshot>,
    pub monitors: Vec<MonitorRow>,
    /// Largest Gauss residual seen at any step.
    pub max_gauss: f64,
    /// Step error that ended the run early; outputs up to it are kept.
    pub failure: Option<Error>,
}

impl RunOutput {
    pub fn monitor_text(&self) -> String {
        let mut s = String::from("csf-monitor v1\n# t charge gauss_residual gauge_residual energy\n");
        for m in &self.monitors {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                fmt_f64(m.t),
                fmt_f64(m.charge),
                fmt_f64(m.gauss),
                fmt_f64(m.gauge),
                fmt_f64(m.energy)
            );
        }
        s
    }

    /// Relative charge drift `max_t |q(t) − q(0)| / |q(0)|`.
    pub fn charge_drift(&self) -> f64 {
        let q0 = self.monitors.first().map_or(0.0, |m| m.charge);
        let d = self.monitors.iter().map(|m| (m.charge - q0).abs()).fold(0.0, f64::max);
        if q0 == 0.0 {
            d
        } else {
            d / q0.abs()
        }
    }
}

/// Output times `0, c, 2c, …, t_final`.
fn output_times(cfg: &RunConfig) -> Vec<f64> {
    let k = (cfg.t_final / cfg.cadence - 1e-9).ceil().max(0.0) as usize;
    let mut v: Vec<f64> = (0..=k).map(|i| (i as f64 * cfg.cadence).min(cfg.t_final)).collect();
    v.dedup();
    v
}

/// Run a validated configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut out = RunOutput {
        config: cfg.clone(),
        slices: vec![],
        snapshots: vec![],
        monitors: vec![],
        max_gauss: 0.0,
        failure: None,
    };
    let times = output_times(cfg);
    match cfg.scheme {
        Scheme::Sph1d => {
            let mut s = init_sph1d(cfg)?;
            for &t in &times {
                let span = t - s.t;
                if span > 0.0 {
                    let steps = (span / (cfg.cfl * cfg.h) - 1e-9).ceil().max(1.0) as usize;
                    let dt = span / steps as f64;
                    for _ in 0..steps {
                        if let Err(e) = s.step(dt) {
                            out.failure = Some(e);
                            return Ok(out);
                        }
                        out.max_gauss = out.max_gauss.max(s.gauss_residual());
                    }
                    s.t = t;
                }
                let slice = s.slice();
                out.monitors.push(MonitorRow {
                    t,
                    charge: s.charge(),
                    gauss: s.gauss_residual(),
                    gauge: 0.0,
                    energy: crate::energy::radial_total_energy(&slice),
                });
                out.max_gauss = out.max_gauss.max(s.gauss_residual());
                out.slices.push(slice);
            }
        }
        Scheme::Box3d => {
            let mut s = init_box3d(cfg)?;
            for &t in &times {
                if let Err(e) = advance_box3d(&mut s, t, cfg.cfl) {
                    out.failure = Some(e);
                    return Ok(out);
                }
                let gauss = s.gauss_residual();
                out.max_gauss = out.max_gauss.max(gauss);
                out.monitors.push(MonitorRow {
                    t,
                    charge: s.charge(),
                    gauss,
                    gauge: s.lorenz_residual(),
                    energy: s.energy(),
                });
                out.snapshots.push(s.to_snapshot());
            }
        }
    }
    Ok(out)
}

/// Exact d'Alembert solution of the flat radial wave equation for odd data
/// `ψ_0` with `∂_t ψ(0) = 0`.
pub fn dalembert(psi0: impl Fn(f64) -> f64, t: f64, r: f64) -> f64 {
    let odd = |x: f64| if x >= 0.0 { psi0(x) } else { -psi0(-x) };
    0.5 * (odd(r + t) + odd(r - t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn small_cfg(recipe: Recipe) -> RunConfig {
        RunConfig { n: 400, h: 0.05, t_final: 2.0, cadence: 1.0, recipe, r0: 5.0, width: 1.0, ..RunConfig::default() }
    }

    #[test]
    fn config_round_trip_and_errors() {
        let c = RunConfig { n: 123, h: 0.1, recipe: Recipe::RealPulse, gauge: GaugeNorm::Origin, ..RunConfig::default() };
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        let parsed = RunConfig::parse("# comment\nscheme = box3d\nn = 32 # trailing\n").unwrap();
        assert_eq!(parsed.scheme, Scheme::Box3d);
        assert_eq!(parsed.n, 32);
        assert!(matches!(RunConfig::parse("n = 3\nbogus = 1"), Err(Error::ConfigParse { line: 2, .. })));
        assert!(matches!(RunConfig::parse("recipe = nope"), Err(Error::ConfigParse { line: 1, .. })));
        assert_eq!(Recipe::parse("nope"), Err(Error::RecipeUnknown("nope".into())));
        let bad = RunConfig { cfl: 1.2, ..RunConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::CflViolation { .. })));
        let near = RunConfig { n: 2000, ..RunConfig::default() };
        assert!(matches!(near.validate(), Err(Error::ConfigInvalid(_))));
        let big_box = RunConfig { scheme: Scheme::Box3d, n: 128, cfl: 0.5, ..RunConfig::default() };
        assert!(big_box.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_recipe_stays_zero() {
        let out = run(&RunConfig { recipe: Recipe::Zero, ..small_cfg(Recipe::Zero) }).unwrap();
        for s in &out.slices {
            assert!(s.phi.iter().all(|p| p.norm() == 0.0));
            assert!(s.rho.iter().all(|v| *v == 0.0));
        }
        let t0 = run(&RunConfig { t_final: 0.0, ..small_cfg(Recipe::Zero) }).unwrap();
        assert_eq!(t0.slices.len(), 1);
    }

    #[test]
    fn charged_gaussian_charge_matches_quadrature() {
        let cfg = small_cfg(Recipe::ChargedGaussian);
        let s = init_sph1d(&cfg).unwrap();
        // q = −c ∫ φ_0² dx
        let (a, r0, w) = (cfg.amplitude, cfg.r0, cfg.width);
        let exact = -cfg.charge_rate * 4.0 * PI * a * a * {
            let m = 20000;
            let dr = 20.0 / m as f64;
            (0..m)
                .map(|k| {
                    let r = (k as f64 + 0.5) * dr;
                    r * r * (-2.0 * (r - r0) * (r - r0) / (w * w)).exp() * dr
                })
                .sum::<f64>()
        };
        assert!((s.charge() - exact).abs() < 1e-10 * exact.abs());
        assert!(s.gauss_residual() < 1e-15);
        // exterior field is the Coulomb field of the total charge
        let j = 380;
        let r = s.grid.face(j);
        assert_abs_diff_eq!(s.e_face(j), s.charge() / (4.0 * PI * r * r), epsilon = 1e-14);
    }

    #[test]
    fn real_pulse_carries_no_field() {
        let s = init_sph1d(&small_cfg(Recipe::RealPulse)).unwrap();
        assert!(s.flux.iter().all(|v| *v == 0.0));
        assert!(s.a_t().iter().all(|v| *v == 0.0));
        assert!(s.slice().j0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn charge_is_conserved_and_gauss_law_holds() {
        let cfg = RunConfig { n: 800, t_final: 10.0, cadence: 1.0, ..small_cfg(Recipe::ChargedGaussian) };
        let out = run(&cfg).unwrap();
        assert!(out.failure.is_none());
        assert!(out.charge_drift() < 1e-7, "{}", out.charge_drift());
        assert!(out.max_gauss < 1e-8, "{}", out.max_gauss);
        let e0 = out.monitors[0].energy;
        for m in &out.monitors {
            assert!((m.energy - e0).abs() < 1e-4 * e0);
        }
    }

    #[test]
    fn decoupled_matches_dalembert() {
        let prof = |r: f64| r * (-(r - 5.0) * (r - 5.0)).exp();
        let err = |n: usize| {
            let grid = Grid1 { n, h: 20.0 / n as f64 };
            let mut s = SphericalState1D::from_data(
                grid,
                |r| C64::new(prof(r) / r, 0.0),
                |_| C64::new(0.0, 0.0),
                Coupling::Decoupled,
            );
            advance_sph1d(&mut s, 7.0, 0.5).unwrap();
            (0..n).map(|j| (s.psi[j].re - dalembert(prof, 7.0, grid.r(j))).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (err(200), err(400));
        assert!(a < 1e-2 && (a / b).log2() > 1.9, "{a} {b}");
    }

    #[test]
    fn manufactured_radial_converges() {
        let (p1, e1) = sph1d_mms_error(200, 2.0, 0.5).unwrap();
        let (p2, e2) = sph1d_mms_error(400, 2.0, 0.5).unwrap();
        assert!((p1 / p2).log2() > 1.9, "psi {p1} {p2}");
        assert!((e1 / e2).log2() > 1.9, "r^2 E {e1} {e2}");
    }

    #[test]
    fn gauge_normalization_leaves_observables_unchanged() {
        let base = RunConfig { n: 400, t_final: 4.0, cadence: 4.0, ..small_cfg(Recipe::ChargedGaussian) };
        let a = run(&base).unwrap();
        let b = run(&RunConfig { gauge: GaugeNorm::Origin, ..base }).unwrap();
        let (sa, sb) = (a.slices.last().unwrap(), b.slices.last().unwrap());
        // agreement up to the time-discretization error of RK4
        let tol = 1e-7 * sa.phi.iter().map(|p| p.norm()).fold(0.0, f64::max);
        for j in 0..sa.len() {
            assert_abs_diff_eq!(sa.phi[j].norm(), sb.phi[j].norm(), epsilon = tol);
            assert_abs_diff_eq!(sa.rho[j], sb.rho[j], epsilon = tol);
            assert_abs_diff_eq!(sa.j0[j], sb.j0[j], epsilon = tol);
            assert_abs_diff_eq!(sa.jr[j], sb.jr[j], epsilon = tol);
        }
        // the phases do differ
        let k = sa.phi.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())).unwrap().0;
        assert!((sa.phi[k] - sb.phi[k]).norm() > 1e-6);
    }

    #[test]
    fn cfl_violation_refused() {
        let mut s = SphericalState1D::zero(Grid1 { n: 10, h: 0.1 });
        assert!(matches!(s.step(0.2), Err(Error::CflViolation { .. })));
        let mut b = BoxState3D::zero(Grid3::new(4, 1.0));
        assert!(matches!(b.step(0.25), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn nan_is_detected() {
        let mut s = SphericalState1D::zero(Grid1 { n: 10, h: 0.1 });
        s.psi[3] = C64::new(f64::NAN, 0.0);
        assert!(matches!(s.step(0.05), Err(Error::NanDetected { .. })));
    }

    #[test]
    fn box_zero_stays_zero() {
        let mut b = BoxState3D::zero(Grid3::new(8, 4.0));
        advance_box3d(&mut b, 0.5, 0.5).unwrap();
        assert!(b.phi.iter().all(|p| p.norm() == 0.0));
        assert!(b.a.iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn exact_forcing_vanishes_for_solutions() {
        let w = ExactSolution::PlaneWave(PlaneWave { amp: 0.2, k: 1.3 });
        let (fp, fa) = exact_forcing(&w, &[0.3, 0.1, -0.4, 0.2]);
        assert!(fp.norm() < 1e-14 && fa.iter().all(|v| v.abs() < 1e-14));
        let (fp, _) = exact_forcing(&ExactSolution::Blob(Blob::default()), &[0.3, 0.1, -0.4, 0.2]);
        assert!(fp.norm() > 1e-3);
    }

    #[test]
    fn plane_wave_advects_with_clean_constraints() {
        let run = |n: usize| {
            let grid = Grid3::new(n, 4.0);
            let w = ExactSolution::PlaneWave(PlaneWave { amp: 0.2, k: PI });
            let mut s = BoxState3D::from_exact(grid, 0.0, w, false);
            advance_box3d(&mut s, 0.5, 0.5).unwrap();
            (s.exact_error().unwrap().1, s.gauss_residual(), s.bianchi_residual())
        };
        let (f1, g1, b1) = run(16);
        let (f2, g2, b2) = run(32);
        assert!((f1 / f2).log2() > 1.9, "{f1} {f2}");
        // exact boundary values seed O(h²) constraint violations
        assert!((g1 / g2).log2() > 1.9, "{g1} {g2}");
        assert!(b1 < 1e-13 && b2 < 1e-13);
    }

    #[test]
    fn lorenz_initial_data_is_compatible() {
        let cfg = RunConfig {
            scheme: Scheme::Box3d,
            n: 24,
            h: 0.5,
            cfl: 0.5,
            t_final: 1.0,
            cadence: 1.0,
            r0: 2.0,
            width: 1.0,
            amplitude: 0.2,
            ..RunConfig::default()
        };
        let s = init_box3d(&cfg).unwrap();
        assert!(s.lorenz_residual() < 1e-14);
        let out = run(&cfg).unwrap();
        assert!(out.failure.is_none());
        assert!(out.monitors[0].gauss < 1e-9);
        assert!(out.monitors[0].charge.abs() > 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn discrete_gauss_law_is_preserved(seed in 0u64..1000) {
            let mut k = seed as f64;
            let mut next = || { k = (k * 1.618_033_988_7 + 0.31).fract(); k - 0.5 };
            let n = 60;
            let grid = Grid1 { n, h: 0.1 };
            let coef: Vec<(f64, f64)> = (0..6).map(|_| (next(), next())).collect();
            let f = |r: f64, c: &[(f64, f64)]| {
                let e = 0.05 * (-(r - 3.0) * (r - 3.0)).exp();
                C64::new(c[0].0 + c[1].0 * r + c[2].0 * r * r, c[0].1 + c[1].1 * r + c[2].1 * r * r) * e
            };
            let s0 = SphericalState1D::from_data(grid, |r| f(r, &coef[..3]), |r| f(r, &coef[3..]), Coupling::Full);
            // the semi-discrete system preserves the constraint; RK4 leaves an O(dt⁴) defect
            let defect = |steps: usize| {
                let mut s = s0.clone();
                for _ in 0..steps { s.step(1.0 / steps as f64).unwrap(); }
                (s.gauss_residual(), (s.charge() - s0.charge()).abs())
            };
            let (g1, q1) = defect(20);
            let (g2, q2) = defect(40);
            prop_assert!(g1 < 1e-13 || g1 / g2 > 8.0, "{} {}", g1, g2);
            prop_assert!(q1 < 1e-13 || q1 / q2 > 8.0, "{} {}", q1, q2);
        }
    }
}
