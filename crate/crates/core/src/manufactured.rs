//! Smooth analytic fields with exact first and second derivatives, used as
//! manufactured solutions and as inputs to identity checks.

use std::ops::{Add, Mul, Neg, Sub};

use crate::geometry::{SpacetimePoint, Vec4};
use crate::C64;

/// Second-order jet in the four coordinates: value, gradient and Hessian.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 4],
    pub dd: [[f64; 4]; 4],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self { v, ..Default::default() }
    }

    /// The coordinate function `x^μ` at a point.
    pub fn coord(x: &Vec4, mu: usize) -> Self {
        let mut j = Self::constant(x[mu]);
        j.d[mu] = 1.0;
        j
    }

    fn chain(&self, f: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f);
        for a in 0..4 {
            out.d[a] = f1 * self.d[a];
            for b in 0..4 {
                out.dd[a][b] = f1 * self.dd[a][b] + f2 * self.d[a] * self.d[b];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    /// Flat wave operator `□ = −∂_t² + Δ`.
    pub fn wave(&self) -> f64 {
        -self.dd[0][0] + self.dd[1][1] + self.dd[2][2] + self.dd[3][3]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        for a in 0..4 {
            self.d[a] += o.d[a];
            for b in 0..4 {
                self.dd[a][b] += o.dd[a][b];
            }
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, k: f64) -> Jet {
        self.v *= k;
        for a in 0..4 {
            self.d[a] *= k;
            for b in 0..4 {
                self.dd[a][b] *= k;
            }
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for a in 0..4 {
            out.d[a] = self.d[a] * o.v + self.v * o.d[a];
            for b in 0..4 {
                out.dd[a][b] = self.dd[a][b] * o.v
                    + self.d[a] * o.d[b]
                    + self.d[b] * o.d[a]
                    + self.v * o.dd[a][b];
            }
        }
        out
    }
}

/// Complex-valued jet.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CJet {
    pub re: Jet,
    pub im: Jet,
}

impl CJet {
    pub fn new(re: Jet, im: Jet) -> Self {
        Self { re, im }
    }

    pub fn real(re: Jet) -> Self {
        Self { re, im: Jet::default() }
    }

    /// `m · e^{iθ}`.
    pub fn polar(m: Jet, theta: Jet) -> Self {
        Self { re: m * theta.cos(), im: m * theta.sin() }
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.v, self.im.v)
    }

    pub fn d(&self, mu: usize) -> C64 {
        C64::new(self.re.d[mu], self.im.d[mu])
    }

    pub fn dd(&self, mu: usize, nu: usize) -> C64 {
        C64::new(self.re.dd[mu][nu], self.im.dd[mu][nu])
    }

    pub fn wave(&self) -> C64 {
        C64::new(self.re.wave(), self.im.wave())
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    pub fn times_i(&self) -> Self {
        Self { re: -self.im, im: self.re }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { re: self.re * k, im: self.im * k }
    }

    pub fn mul_real(&self, k: Jet) -> Self {
        Self { re: self.re * k, im: self.im * k }
    }
}

impl Add for CJet {
    type Output = CJet;
    fn add(self, o: CJet) -> CJet {
        CJet { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for CJet {
    type Output = CJet;
    fn sub(self, o: CJet) -> CJet {
        CJet { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for CJet {
    type Output = CJet;
    fn mul(self, o: CJet) -> CJet {
        CJet { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

/// Analytic `(φ, A_μ)` on spacetime.
pub trait AnalyticFields: Sync {
    fn phi(&self, x: &Vec4) -> CJet;
    fn a(&self, x: &Vec4) -> [Jet; 4];

    fn phi_at(&self, p: &SpacetimePoint) -> CJet {
        self.phi(&p.coords())
    }

    fn a_at(&self, p: &SpacetimePoint) -> [Jet; 4] {
        self.a(&p.coords())
    }
}

/// Exact `D_μ φ = ∂_μ φ + i A_μ φ`.
pub fn cov_deriv(f: &dyn AnalyticFields, x: &Vec4) -> [C64; 4] {
    let p = f.phi(x);
    let a = f.a(x);
    [0, 1, 2, 3].map(|mu| p.d(mu) + C64::i() * a[mu].v * p.value())
}

/// Exact `F_{μν} = ∂_μ A_ν − ∂_ν A_μ`.
pub fn curvature(f: &dyn AnalyticFields, x: &Vec4) -> crate::geometry::TwoFormValue {
    let a = f.a(x);
    crate::geometry::TwoFormValue::from_fn(|mu, nu| a[nu].d[mu] - a[mu].d[nu])
}

/// Generic smooth, non-symmetric test configuration: a modulated Gaussian
/// scalar with a travelling phase, and Gaussian potentials with distinct
/// oscillations in each component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blob {
    pub amp: f64,
    pub width: f64,
    pub omega: f64,
    pub k: [f64; 3],
    pub center: [f64; 3],
    pub b: [f64; 4],
    pub a_width: f64,
}

impl Default for Blob {
    fn default() -> Self {
        Self {
            amp: 0.5,
            width: 1.2,
            omega: 1.1,
            k: [0.6, -0.3, 0.4],
            center: [0.2, -0.1, 0.15],
            b: [0.3, -0.2, 0.25, 0.15],
            a_width: 1.4,
        }
    }
}

impl Blob {
    fn gaussian(x: &Vec4, c: &[f64; 3], w: f64) -> Jet {
        let mut s = Jet::constant(0.0);
        for i in 0..3 {
            let y = Jet::coord(x, i + 1) + (-c[i]);
            s = s + y * y;
        }
        (s * (-1.0 / (w * w))).exp()
    }
}

impl AnalyticFields for Blob {
    fn phi(&self, x: &Vec4) -> CJet {
        let t = Jet::coord(x, 0);
        let g = Self::gaussian(x, &self.center, self.width);
        let m = g * ((t * 0.7).sin() * 0.3 + 1.0) * self.amp;
        let mut theta = t * self.omega;
        for i in 0..3 {
            theta = theta + Jet::coord(x, i + 1) * self.k[i];
        }
        CJet::polar(m, theta)
    }

    fn a(&self, x: &Vec4) -> [Jet; 4] {
        let g = Self::gaussian(x, &[0.0; 3], self.a_width);
        let t = Jet::coord(x, 0);
        [0, 1, 2, 3].map(|mu| {
            let phase = t * (0.8 + 0.1 * mu as f64) + Jet::coord(x, 1 + mu % 3) * 0.35 + 0.7 * mu as f64;
            g * phase.cos() * self.b[mu]
        })
    }
}

/// Spherically symmetric version: `φ = m(t, r) e^{iωt}`, `A = (a_0(t, r), 0, 0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBlob {
    pub amp: f64,
    pub width: f64,
    pub omega: f64,
    pub a0: f64,
}

impl Default for RadialBlob {
    fn default() -> Self {
        Self { amp: 0.5, width: 1.3, omega: 0.9, a0: 0.4 }
    }
}

impl AnalyticFields for RadialBlob {
    fn phi(&self, x: &Vec4) -> CJet {
        let g = Blob::gaussian(x, &[0.0; 3], self.width);
        let t = Jet::coord(x, 0);
        CJet::polar(g * ((t * 0.5).cos() * 0.2 + 1.0) * self.amp, t * self.omega)
    }

    fn a(&self, x: &Vec4) -> [Jet; 4] {
        let g = Blob::gaussian(x, &[0.0; 3], 1.5);
        let t = Jet::coord(x, 0);
        [g * ((t * 0.6).sin() * 0.5 + 1.0) * self.a0, Jet::default(), Jet::default(), Jet::default()]
    }
}

/// Plane electromagnetic wave with no scalar field: `A_2 = a cos(k(x1 − t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub amp: f64,
    pub k: f64,
}

impl AnalyticFields for PlaneWave {
    fn phi(&self, _x: &Vec4) -> CJet {
        CJet::default()
    }

    fn a(&self, x: &Vec4) -> [Jet; 4] {
        let ph = (Jet::coord(x, 1) - Jet::coord(x, 0)) * self.k;
        [Jet::default(), Jet::default(), ph.cos() * self.amp, Jet::default()]
    }
}

/// Manufactured solution for the radial reduction, in terms of `ψ = rφ`:
/// `ψ = a r e^{−r²/w²} (cos ωt + ½ i sin(ωt + r²/10))` and
/// `E_r = e r e^{−r²/4} (1 + 0.3 sin t)`.
///
/// Jets are in `(t, r)` stored in slots 0 and 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialManufactured {
    pub a: f64,
    pub w: f64,
    pub omega: f64,
    pub e: f64,
    pub r_max: f64,
}

impl Default for RadialManufactured {
    fn default() -> Self {
        Self { a: 0.5, w: 2.0, omega: 1.3, e: 0.2, r_max: 20.0 }
    }
}

impl RadialManufactured {
    fn tr(t: f64, r: f64) -> (Jet, Jet) {
        let x = [t, r, 0.0, 0.0];
        (Jet::coord(&x, 0), Jet::coord(&x, 1))
    }

    pub fn psi(&self, t: f64, r: f64) -> CJet {
        let (tj, rj) = Self::tr(t, r);
        let env = rj * (rj * rj * (-1.0 / (self.w * self.w))).exp() * self.a;
        let re = env * (tj * self.omega).cos();
        let im = env * (tj * self.omega + rj * rj * 0.1).sin() * 0.5;
        CJet::new(re, im)
    }

    fn time_factor(t: &Jet) -> Jet {
        t.sin() * 0.3 + 1.0
    }

    pub fn e_r(&self, t: f64, r: f64) -> Jet {
        let (tj, rj) = Self::tr(t, r);
        rj * (rj * rj * -0.25).exp() * Self::time_factor(&tj) * self.e
    }

    /// `A_t(r) = ∫_r^{R} E_r ds`, vanishing at `r_max`.
    pub fn a_t(&self, t: f64, r: f64) -> Jet {
        let (tj, rj) = Self::tr(t, r);
        let tail = (-0.25 * self.r_max * self.r_max).exp();
        ((rj * rj * -0.25).exp() + (-tail)) * Self::time_factor(&tj) * (2.0 * self.e)
    }

    /// `Π = ∂_t ψ + i A_t ψ`, with its `t` derivative.
    pub fn pi(&self, t: f64, r: f64) -> (C64, C64) {
        let psi = self.psi(t, r);
        let a = self.a_t(t, r);
        let ia = C64::i() * a.v;
        let pi = psi.d(0) + ia * psi.value();
        let pi_t = psi.dd(0, 0) + C64::i() * a.d[0] * psi.value() + ia * psi.d(0);
        (pi, pi_t)
    }

    /// Residual forcing for `∂_t Π = ∂_r²ψ − i A_t Π`.
    pub fn forcing_pi(&self, t: f64, r: f64) -> C64 {
        let psi = self.psi(t, r);
        let (pi, pi_t) = self.pi(t, r);
        pi_t - psi.dd(1, 1) + C64::i() * self.a_t(t, r).v * pi
    }

    /// Residual forcing for `∂_t (r² E_r) = Im(ψ ∂_r conj ψ)`.
    pub fn forcing_e(&self, t: f64, r: f64) -> f64 {
        let psi = self.psi(t, r);
        let e = self.e_r(t, r);
        r * r * e.d[0] - (psi.value() * psi.d(1).conj()).im
    }
}
