//! Minkowski geometry: optical functions, the spherical null frame, the
//! weight functions, null decomposition of two-forms, and the vector fields
//! of the inhomogeneous Lorentz algebra together with their deformation
//! tensors.

use crate::{Error, Result};

pub type Vec4 = [f64; 4];
/// 4×4 array indexed `[row][col]`.
pub type Mat4 = [[f64; 4]; 4];

/// Diagonal of the Minkowski metric.
pub const METRIC: Vec4 = [-1.0, 1.0, 1.0, 1.0];

/// Default floor on `r` below which no angular frame is produced.
pub const R_MIN: f64 = 1e-10;

/// Default offset of the charge shell, `χ⁺(r − t − offset)`.
pub const CHI_OFFSET: f64 = 2.0;

pub fn mdot(a: &Vec4, b: &Vec4) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub fn lower(v: &Vec4) -> Vec4 {
    [-v[0], v[1], v[2], v[3]]
}

pub fn metric_matrix() -> Mat4 {
    let mut g = [[0.0; 4]; 4];
    for (mu, row) in g.iter_mut().enumerate() {
        row[mu] = METRIC[mu];
    }
    g
}

/// `T(X, Y) = T_{μν} X^μ Y^ν` for a covariant 2-tensor.
pub fn contract2(t: &Mat4, x: &Vec4, y: &Vec4) -> f64 {
    let mut s = 0.0;
    for mu in 0..4 {
        for nu in 0..4 {
            s += t[mu][nu] * x[mu] * y[nu];
        }
    }
    s
}

/// `g^{μν} T_{μν}`.
pub fn trace(t: &Mat4) -> f64 {
    (0..4).map(|mu| METRIC[mu] * t[mu][mu]).sum()
}

fn norm3(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn spatial(v: [f64; 3]) -> Vec4 {
    [0.0, v[0], v[1], v[2]]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: [f64; 3],
}

impl SpacetimePoint {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        Self { t, x }
    }

    pub fn from_coords(c: Vec4) -> Self {
        Self { t: c[0], x: [c[1], c[2], c[3]] }
    }

    /// Point at time `t` on the positive `x1` axis at radius `r`.
    pub fn on_axis(t: f64, r: f64) -> Self {
        Self { t, x: [r, 0.0, 0.0] }
    }

    pub fn coords(&self) -> Vec4 {
        [self.t, self.x[0], self.x[1], self.x[2]]
    }

    pub fn r(&self) -> f64 {
        norm3(&self.x)
    }

    pub fn omega(&self) -> Option<[f64; 3]> {
        let r = self.r();
        if r > 0.0 {
            Some([self.x[0] / r, self.x[1] / r, self.x[2] / r])
        } else {
            None
        }
    }

    pub fn u(&self) -> f64 {
        self.t - self.r()
    }

    pub fn ubar(&self) -> f64 {
        self.t + self.r()
    }

    pub fn shifted(&self, mu: usize, d: f64) -> Self {
        let mut c = self.coords();
        c[mu] += d;
        Self::from_coords(c)
    }
}

/// Null frame at a point with `r > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullFrameSample {
    pub l: Vec4,
    pub lbar: Vec4,
    pub e: [Vec4; 2],
    pub omega: [f64; 3],
    /// `omega_a[A][i] = ω_i^A`, the Cartesian components of `e_A`.
    pub omega_a: [[f64; 3]; 2],
    /// 1 away from the `x3` axis, 2 near it.
    pub chart: u8,
}

/// Oriented orthonormal pair tangent to the sphere, with `ω · (e1 × e2) = 1`.
///
/// Chart 1 is built from the `x3` axis and used when `|ω_3| ≤ 0.9`; chart 2
/// uses the `x1` axis and covers the poles.
pub fn angular_pair(omega: &[f64; 3]) -> ([f64; 3], [f64; 3], u8) {
    let (axis, chart) = if omega[2].abs() <= 0.9 {
        ([0.0, 0.0, 1.0], 1)
    } else {
        ([1.0, 0.0, 0.0], 2)
    };
    let a = cross(&axis, omega);
    let na = norm3(&a);
    let e2 = [a[0] / na, a[1] / na, a[2] / na];
    let e1 = cross(&e2, omega);
    (e1, e2, chart)
}

pub fn frame_at(p: &SpacetimePoint) -> Result<NullFrameSample> {
    frame_at_floor(p, R_MIN)
}

pub fn frame_at_floor(p: &SpacetimePoint, r_min: f64) -> Result<NullFrameSample> {
    let r = p.r();
    if r < r_min {
        return Err(Error::DegenerateRadius { r, floor: r_min });
    }
    let w = [p.x[0] / r, p.x[1] / r, p.x[2] / r];
    let (e1, e2, chart) = angular_pair(&w);
    Ok(NullFrameSample {
        l: [1.0, w[0], w[1], w[2]],
        lbar: [1.0, -w[0], -w[1], -w[2]],
        e: [spatial(e1), spatial(e2)],
        omega: w,
        omega_a: [e1, e2],
        chart,
    })
}

impl NullFrameSample {
    /// Expansion `X = X^L L + X^Lbar Lbar + X^A e_A`, returned as
    /// `(X^L, X^Lbar, [X^1, X^2])`.
    pub fn expand(&self, x: &Vec4) -> (f64, f64, [f64; 2]) {
        (
            -0.5 * mdot(x, &self.lbar),
            -0.5 * mdot(x, &self.l),
            [mdot(x, &self.e[0]), mdot(x, &self.e[1])],
        )
    }
}

// ---------------------------------------------------------------------------
// Weights

/// Smooth step: 0 on `(-∞, 0]`, 1 on `[1, ∞)`,
/// `exp(-1/x) / (exp(-1/x) + exp(-1/(1-x)))` in between.
pub fn chi_plus(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        // same ratio, divided through by exp(-1/x)
        let z = 1.0 / x - 1.0 / (1.0 - x);
        1.0 / (1.0 + z.exp())
    }
}

pub fn chi_plus_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let c = chi_plus(x);
        c * (1.0 - c) * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightParams {
    pub s: f64,
    pub gamma: f64,
    pub eps: f64,
    /// Use the sharp exterior weight `τ_-^{2γ} χ_{t<r}` instead of the smooth one.
    pub sharp: bool,
}

impl WeightParams {
    pub fn new(s: f64, gamma: f64, eps: f64) -> Result<Self> {
        let ok = |c: bool, msg: &str| {
            if c {
                Ok(())
            } else {
                Err(Error::WeightOutOfRange(format!("{msg} (s={s}, gamma={gamma}, eps={eps})")))
            }
        };
        ok(s > 0.5 && s <= 1.0, "s must lie in (1/2, 1]")?;
        ok(gamma > 0.0, "gamma must be positive")?;
        ok(eps > 0.0, "eps must be positive")?;
        ok(eps <= s - 0.5, "eps must not exceed s - 1/2")?;
        ok(s + gamma < 1.5, "s + gamma must be below 3/2")?;
        Ok(Self { s, gamma, eps, sharp: false })
    }

    /// As [`WeightParams::new`] with the stronger requirement `4ε ≤ s − 1/2`.
    pub fn strict(s: f64, gamma: f64, eps: f64) -> Result<Self> {
        let wp = Self::new(s, gamma, eps)?;
        if 4.0 * eps > s - 0.5 {
            return Err(Error::WeightOutOfRange(format!(
                "strict mode needs 4 eps <= s - 1/2 (eps={eps}, s={s})"
            )));
        }
        Ok(wp)
    }

    pub fn with_sharp(mut self, sharp: bool) -> Self {
        self.sharp = sharp;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightValues {
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub tau_0: f64,
    pub w_gamma: f64,
    pub w_gamma_eps: f64,
    pub w_prime: f64,
}

pub fn weights_at(p: &SpacetimePoint, wp: &WeightParams) -> WeightValues {
    weights_tr(p.t, p.r(), wp)
}

pub fn weights_tr(t: f64, r: f64, wp: &WeightParams) -> WeightValues {
    let tau_plus = (1.0 + (t + r) * (t + r)).sqrt();
    let tau_minus = (1.0 + (t - r) * (t - r)).sqrt();
    let chi = chi_plus(r - t);
    let ext = tau_minus.powf(2.0 * wp.gamma);
    let w_gamma = if wp.sharp {
        if t < r {
            ext
        } else {
            0.0
        }
    } else {
        chi * ext + (1.0 - chi)
    };
    WeightValues {
        tau_plus,
        tau_minus,
        tau_0: tau_minus / tau_plus,
        w_gamma,
        w_gamma_eps: chi * ext + (1.0 - chi) * tau_minus.powf(2.0 * wp.eps),
        w_prime: chi * tau_minus.powf(2.0 * wp.gamma - 1.0)
            + (1.0 - chi) * tau_minus.powf(-2.0 * wp.eps - 1.0),
    }
}

// ---------------------------------------------------------------------------
// Two-forms

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn pair_index(mu: usize, nu: usize) -> Option<(usize, f64)> {
    let (a, b, sign) = if mu < nu { (mu, nu, 1.0) } else { (nu, mu, -1.0) };
    PAIRS.iter().position(|&p| p == (a, b)).map(|k| (k, sign))
}

/// Antisymmetric `F_{μν}` stored as the six components with `μ < ν`, in the
/// order `01, 02, 03, 12, 13, 23`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TwoFormValue {
    pub c: [f64; 6],
}

impl TwoFormValue {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        match pair_index(mu, nu) {
            Some((k, s)) => s * self.c[k],
            None => 0.0,
        }
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        let mut c = [0.0; 6];
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            c[k] = f(a, b);
        }
        Self { c }
    }

    /// Antisymmetric part of a matrix, `½(M_{μν} − M_{νμ})`.
    pub fn from_matrix(m: &Mat4) -> Self {
        Self::from_fn(|a, b| 0.5 * (m[a][b] - m[b][a]))
    }

    pub fn to_matrix(&self) -> Mat4 {
        let mut m = [[0.0; 4]; 4];
        for (mu, row) in m.iter_mut().enumerate() {
            for (nu, v) in row.iter_mut().enumerate() {
                *v = self.get(mu, nu);
            }
        }
        m
    }

    /// `F_{0i} = E_i`, `F_{jk} = ε_{jkl} H_l`.
    pub fn from_eh(e: [f64; 3], h: [f64; 3]) -> Self {
        Self { c: [e[0], e[1], e[2], h[2], -h[1], h[0]] }
    }

    pub fn electric(&self) -> [f64; 3] {
        [self.c[0], self.c[1], self.c[2]]
    }

    /// `H_i = ½ ε_{ijk} F_{jk}`.
    pub fn magnetic(&self) -> [f64; 3] {
        [self.c[5], -self.c[4], self.c[3]]
    }

    /// `F(X, Y) = F_{μν} X^μ Y^ν`.
    pub fn eval(&self, x: &Vec4, y: &Vec4) -> f64 {
        let mut s = 0.0;
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            s += self.c[k] * (x[a] * y[b] - x[b] * y[a]);
        }
        s
    }

    /// `F_{μν} F^{μν}`.
    pub fn square(&self) -> f64 {
        PAIRS
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| 2.0 * METRIC[a] * METRIC[b] * self.c[k] * self.c[k])
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Add for TwoFormValue {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(o.c) {
            *a += b;
        }
        Self { c }
    }
}

impl std::ops::Sub for TwoFormValue {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o * -1.0
    }
}

impl std::ops::Mul<f64> for TwoFormValue {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self { c: self.c.map(|v| v * k) }
    }
}

impl std::ops::Neg for TwoFormValue {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// Sign of the permutation `(a, b, c, d)` of `(0, 1, 2, 3)`, zero on repeats.
pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut v = idx;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if v[i] == v[j] {
                return 0.0;
            }
        }
    }
    let mut sign = 1.0;
    for i in 0..4 {
        while v[i] != i {
            let k = v[i];
            v.swap(i, k);
            sign = -sign;
        }
    }
    sign
}

/// `(*F)_{μν} = ½ ε_{μν}{}^{γδ} F_{γδ}` with `ε_{0123} = 1`.
pub fn hodge_dual(f: &TwoFormValue) -> TwoFormValue {
    TwoFormValue::from_fn(|mu, nu| {
        let mut s = 0.0;
        for g in 0..4 {
            for d in 0..4 {
                let e = levi_civita([mu, nu, g, d]);
                if e != 0.0 {
                    s += 0.5 * e * METRIC[g] * METRIC[d] * f.get(g, d);
                }
            }
        }
        s
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NullComponents {
    pub alpha: [f64; 2],
    pub alpha_bar: [f64; 2],
    pub rho: f64,
    pub sigma: f64,
}

impl NullComponents {
    pub fn alpha_norm(&self) -> f64 {
        self.alpha[0].hypot(self.alpha[1])
    }

    pub fn alpha_bar_norm(&self) -> f64 {
        self.alpha_bar[0].hypot(self.alpha_bar[1])
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        [
            self.alpha[0] - o.alpha[0],
            self.alpha[1] - o.alpha[1],
            self.alpha_bar[0] - o.alpha_bar[0],
            self.alpha_bar[1] - o.alpha_bar[1],
            self.rho - o.rho,
            self.sigma - o.sigma,
        ]
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `α_A = F(L, e_A)`, `ᾱ_A = F(Lbar, e_A)`, `ρ = ½F(Lbar, L)`, `σ = F(e_1, e_2)`.
pub fn null_decompose(f: &TwoFormValue, frame: &NullFrameSample) -> NullComponents {
    NullComponents {
        alpha: [f.eval(&frame.l, &frame.e[0]), f.eval(&frame.l, &frame.e[1])],
        alpha_bar: [f.eval(&frame.lbar, &frame.e[0]), f.eval(&frame.lbar, &frame.e[1])],
        rho: 0.5 * f.eval(&frame.lbar, &frame.l),
        sigma: f.eval(&frame.e[0], &frame.e[1]),
    }
}

/// Inverse of [`null_decompose`] at a given frame.
pub fn null_compose(n: &NullComponents, frame: &NullFrameSample) -> TwoFormValue {
    // Build from the frame coframe: F = Σ F(X_a, X_b) θ^a ∧ θ^b over the dual basis.
    // Dual covectors: θ^L = -½ g(Lbar, ·), θ^Lbar = -½ g(L, ·), θ^A = g(e_A, ·).
    let th_l = lower(&frame.lbar).map(|v| -0.5 * v);
    let th_lb = lower(&frame.l).map(|v| -0.5 * v);
    let th = [lower(&frame.e[0]), lower(&frame.e[1])];
    let wedge = |a: &Vec4, b: &Vec4| {
        let mut m = [[0.0; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                m[mu][nu] = a[mu] * b[nu] - a[nu] * b[mu];
            }
        }
        m
    };
    let mut m = [[0.0; 4]; 4];
    let mut add = |k: f64, w: Mat4| {
        for mu in 0..4 {
            for nu in 0..4 {
                m[mu][nu] += k * w[mu][nu];
            }
        }
    };
    // F(Lbar, L) = 2ρ, F(L, e_A) = α_A, F(Lbar, e_A) = ᾱ_A, F(e1, e2) = σ.
    add(2.0 * n.rho, wedge(&th_lb, &th_l));
    for a in 0..2 {
        add(n.alpha[a], wedge(&th_l, &th[a]));
        add(n.alpha_bar[a], wedge(&th_lb, &th[a]));
    }
    add(n.sigma, wedge(&th[0], &th[1]));
    TwoFormValue::from_fn(|mu, nu| m[mu][nu])
}

// ---------------------------------------------------------------------------
// Lorentz algebra

/// Vector fields used as commutators and multipliers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LorentzField {
    /// `∂_μ`.
    Partial(usize),
    /// `Ω_{αβ} = x_α ∂_β − x_β ∂_α`, indices lowered with the metric.
    Omega(usize, usize),
    /// `Ω_{0r} = ω^i Ω_{0i} = −r ∂_t − t ∂_r`.
    RadialBoost,
    /// `S = x^α ∂_α`.
    Scaling,
    /// `K_0 = (t² + r²) ∂_t + 2t x^i ∂_i`.
    Morawetz,
    /// `K_0^s = ½ ū^{2s} L + ½ |u|^{2s} Lbar`.
    FracMorawetz(f64),
    /// `T = ∂_t`.
    T,
}

impl LorentzField {
    /// The eleven generators `∂_μ`, `Ω_{12}, Ω_{13}, Ω_{23}`, `Ω_{i0}`, `S`.
    pub fn basis() -> Vec<LorentzField> {
        let mut v: Vec<_> = (0..4).map(LorentzField::Partial).collect();
        v.extend([(1, 2), (1, 3), (2, 3)].map(|(i, j)| LorentzField::Omega(i, j)));
        v.extend((1..4).map(|i| LorentzField::Omega(i, 0)));
        v.push(LorentzField::Scaling);
        v
    }

    pub fn label(&self) -> String {
        match self {
            LorentzField::Partial(m) => format!("d{m}"),
            LorentzField::Omega(a, b) => format!("Omega{a}{b}"),
            LorentzField::RadialBoost => "Omega0r".into(),
            LorentzField::Scaling => "S".into(),
            LorentzField::Morawetz => "K0".into(),
            LorentzField::FracMorawetz(s) => format!("K0^{s}"),
            LorentzField::T => "T".into(),
        }
    }

    /// Affine fields `X^μ = a^μ + B^μ_ν x^ν`; `None` for the others.
    pub fn affine(&self) -> Option<(Vec4, Mat4)> {
        let mut a = [0.0; 4];
        let mut b = [[0.0; 4]; 4];
        match *self {
            LorentzField::Partial(m) if m < 4 => a[m] = 1.0,
            LorentzField::T => a[0] = 1.0,
            LorentzField::Omega(al, be) if al < 4 && be < 4 && al != be => {
                // X^β = g_αα x^α, X^α = −g_ββ x^β
                b[be][al] = METRIC[al];
                b[al][be] = -METRIC[be];
            }
            LorentzField::Scaling => {
                for (m, row) in b.iter_mut().enumerate() {
                    row[m] = 1.0;
                }
            }
            _ => return None,
        }
        Some((a, b))
    }

    pub fn in_algebra(&self) -> bool {
        self.affine().is_some()
    }

    pub fn eval(&self, p: &SpacetimePoint) -> Vec4 {
        if let Some((a, b)) = self.affine() {
            let x = p.coords();
            let mut v = a;
            for mu in 0..4 {
                for nu in 0..4 {
                    v[mu] += b[mu][nu] * x[nu];
                }
            }
            return v;
        }
        let r = p.r();
        let w = p.omega().unwrap_or([0.0; 3]);
        let t = p.t;
        match *self {
            LorentzField::RadialBoost => [-r, -t * w[0], -t * w[1], -t * w[2]],
            LorentzField::Morawetz => {
                [t * t + r * r, 2.0 * t * p.x[0], 2.0 * t * p.x[1], 2.0 * t * p.x[2]]
            }
            LorentzField::FracMorawetz(s) => {
                let k = k0s_profile(s, t, r);
                let a0 = 0.5 * (k.vbar + k.v);
                let br = 0.5 * (k.vbar - k.v);
                [a0, br * w[0], br * w[1], br * w[2]]
            }
            _ => unreachable!("affine fields handled above"),
        }
    }

    /// `J[ν][μ] = ∂_μ X^ν` at `p`.
    pub fn jacobian(&self, p: &SpacetimePoint) -> Mat4 {
        if let Some((_, b)) = self.affine() {
            return b;
        }
        let t = p.t;
        let r = p.r().max(R_MIN);
        let w = p.omega().unwrap_or([1.0, 0.0, 0.0]);
        let mut j = [[0.0; 4]; 4];
        match *self {
            LorentzField::Morawetz => {
                j[0][0] = 2.0 * t;
                for i in 0..3 {
                    j[0][i + 1] = 2.0 * p.x[i];
                    j[i + 1][0] = 2.0 * p.x[i];
                    j[i + 1][i + 1] = 2.0 * t;
                }
            }
            LorentzField::RadialBoost => {
                for i in 0..3 {
                    j[0][i + 1] = -w[i];
                    j[i + 1][0] = -w[i];
                    for k in 0..3 {
                        let d = if i == k { 1.0 } else { 0.0 };
                        j[i + 1][k + 1] = -t * (d - w[i] * w[k]) / r;
                    }
                }
            }
            LorentzField::FracMorawetz(s) => {
                let k = k0s_profile(s, t, r);
                let b = 0.5 * (k.vbar - k.v);
                let sum = 0.5 * (k.dvbar + k.dv);
                let dif = 0.5 * (k.dvbar - k.dv);
                j[0][0] = sum;
                for i in 0..3 {
                    j[0][i + 1] = dif * w[i];
                    j[i + 1][0] = dif * w[i];
                    for m in 0..3 {
                        let d = if i == m { 1.0 } else { 0.0 };
                        j[i + 1][m + 1] = sum * w[i] * w[m] + b * (d - w[i] * w[m]) / r;
                    }
                }
            }
            _ => unreachable!("affine fields handled above"),
        }
        j
    }
}

/// Radial profiles of `K_0^s`: `v̄ = ū^{2s}`, `v = |u|^{2s}` and their
/// derivatives in their own arguments.
#[derive(Clone, Copy, Debug)]
pub struct K0sProfile {
    pub vbar: f64,
    pub v: f64,
    pub dvbar: f64,
    pub dv: f64,
}

pub fn k0s_profile(s: f64, t: f64, r: f64) -> K0sProfile {
    let ub = t + r;
    let u = t - r;
    let p = 2.0 * s;
    let dv = if u == 0.0 { 0.0 } else { p * u.abs().powf(p - 1.0) * u.signum() };
    K0sProfile {
        vbar: ub.abs().powf(p),
        v: u.abs().powf(p),
        dvbar: if ub == 0.0 { 0.0 } else { p * ub.abs().powf(p - 1.0) * ub.signum() },
        dv,
    }
}

/// `(v̄ − v)/r − (v̄' + v̇)`, the coefficient of `dt² − dr²` in the
/// deformation tensor of `K_0^s`.
pub fn morawetz_factor(s: f64, t: f64, r: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&s) {
        return Err(Error::DomainError(format!("morawetz exponent s = {s} outside [1/2, 1]")));
    }
    if r <= 0.0 {
        return Err(Error::DegenerateRadius { r, floor: 0.0 });
    }
    let k = k0s_profile(s, t, r);
    Ok((k.vbar - k.v) / r - (k.dvbar + k.dv))
}

/// Deformation tensor `π_{μν} = ∂_μ X_ν + ∂_ν X_μ` (lower indices).
pub fn deformation_tensor(x: &LorentzField, p: &SpacetimePoint) -> Mat4 {
    let g = metric_matrix();
    let scaled = |k: f64| g.map(|row| row.map(|v| k * v));
    match *x {
        LorentzField::Partial(_) | LorentzField::T => [[0.0; 4]; 4],
        LorentzField::Omega(_, _) => [[0.0; 4]; 4],
        LorentzField::Scaling => scaled(2.0),
        LorentzField::Morawetz => scaled(4.0 * p.t),
        LorentzField::FracMorawetz(s) => k0s_deformation(s, p),
        LorentzField::RadialBoost => deformation_from_jacobian(&x.jacobian(p)),
    }
}

pub fn deformation_from_jacobian(j: &Mat4) -> Mat4 {
    let mut pi = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in 0..4 {
            pi[mu][nu] = METRIC[nu] * j[nu][mu] + METRIC[mu] * j[mu][nu];
        }
    }
    pi
}

/// `π(K_0^s) = (v̄ − v)/r · g + factor · (dt² − dr²)`.
pub fn k0s_deformation(s: f64, p: &SpacetimePoint) -> Mat4 {
    let r = p.r();
    let k = k0s_profile(s, p.t, r);
    let (trace_part, factor, w) = if r < 1e-12 {
        // limit r → 0: (v̄ − v)/r → v̄' + v̇ and the null part vanishes
        (k.dvbar + k.dv, 0.0, [0.0; 3])
    } else {
        let tp = (k.vbar - k.v) / r;
        (tp, tp - (k.dvbar + k.dv), p.omega().unwrap())
    };
    let dr = [0.0, w[0], w[1], w[2]];
    let dt = [1.0, 0.0, 0.0, 0.0];
    let mut pi = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in 0..4 {
            let g = if mu == nu { METRIC[mu] } else { 0.0 };
            pi[mu][nu] = trace_part * g + factor * (dt[mu] * dt[nu] - dr[mu] * dr[nu]);
        }
    }
    pi
}

/// A constant-coefficient combination of generators.
pub type FieldCombination = Vec<(f64, LorentzField)>;

pub fn eval_combination(c: &FieldCombination, p: &SpacetimePoint) -> Vec4 {
    let mut v = [0.0; 4];
    for (k, f) in c {
        let fv = f.eval(p);
        for mu in 0..4 {
            v[mu] += k * fv[mu];
        }
    }
    v
}

/// Commutator `[X, Y]` of two generators, decomposed on [`LorentzField::basis`].
/// Zero coefficients are dropped.
pub fn bracket(x: &LorentzField, y: &LorentzField) -> Result<FieldCombination> {
    let (ax, bx) = x.affine().ok_or_else(|| Error::NotInAlgebra(x.label()))?;
    let (ay, by) = y.affine().ok_or_else(|| Error::NotInAlgebra(y.label()))?;
    // [X, Y]^μ = X^ν ∂_ν Y^μ − Y^ν ∂_ν X^μ
    let mut a = [0.0; 4];
    let mut b = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in 0..4 {
            a[mu] += by[mu][nu] * ax[nu] - bx[mu][nu] * ay[nu];
            for k in 0..4 {
                b[mu][nu] += by[mu][k] * bx[k][nu] - bx[mu][k] * by[k][nu];
            }
        }
    }
    decompose_affine(&a, &b)
}

fn decompose_affine(a: &Vec4, b: &Mat4) -> Result<FieldCombination> {
    let mut out = FieldCombination::new();
    for (mu, &v) in a.iter().enumerate() {
        if v != 0.0 {
            out.push((v, LorentzField::Partial(mu)));
        }
    }
    let lambda = b[0][0];
    let mut rest = *b;
    for (m, row) in rest.iter_mut().enumerate() {
        row[m] -= lambda;
    }
    let mut gens: Vec<(f64, LorentzField)> = Vec::new();
    for (i, j) in [(1, 2), (1, 3), (2, 3)] {
        gens.push((rest[j][i], LorentzField::Omega(i, j)));
    }
    for i in 1..4 {
        gens.push((rest[0][i], LorentzField::Omega(i, 0)));
    }
    for (c, f) in &gens {
        let (_, bf) = f.affine().unwrap();
        for mu in 0..4 {
            for nu in 0..4 {
                rest[mu][nu] -= c * bf[mu][nu];
            }
        }
    }
    let leftover = rest.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if leftover > 1e-12 {
        return Err(Error::NotInAlgebra(format!("bracket leaves residual {leftover:e}")));
    }
    out.extend(gens.into_iter().filter(|(c, _)| *c != 0.0));
    if lambda != 0.0 {
        out.push((lambda, LorentzField::Scaling));
    }
    Ok(out)
}

/// Frame components of the covariant derivative of `X`:
/// `max_A |(2/r) ∇^{Lbar}(r) X^A − ∇^{Lbar}(X^A) + ∇^A(X^{Lbar})|`,
/// where `∇^{Lbar} = −½ ∇_L` and `X^{Lbar} = −½ g(X, L)`.
pub fn special_cancellation(x: &LorentzField, p: &SpacetimePoint) -> Result<f64> {
    let r = p.r();
    if p.t >= 2.0 * r {
        return Err(Error::RegionViolation(format!("t = {} >= 2r = {}", p.t, 2.0 * r)));
    }
    let fr = frame_at(p)?;
    let xv = x.eval(p);
    let j = x.jacobian(p);
    // (∇_Y X)^ν = J[ν][μ] Y^μ
    let nabla = |y: &Vec4| {
        let mut v = [0.0; 4];
        for nu in 0..4 {
            for mu in 0..4 {
                v[nu] += j[nu][mu] * y[mu];
            }
        }
        v
    };
    let nl = nabla(&fr.l);
    let mut worst = 0.0f64;
    for a in 0..2 {
        let xa = mdot(&xv, &fr.e[a]);
        let t1 = -xa / r;
        let t2 = -0.5 * mdot(&nl, &fr.e[a]);
        let t3 = -0.5 * mdot(&nabla(&fr.e[a]), &fr.l);
        worst = worst.max((t1 - t2 + t3).abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Lie derivatives of two-forms

/// A two-form field that can be sampled at spacetime points; `None` marks
/// points outside its domain.
pub trait TwoFormField {
    fn sample(&self, p: &SpacetimePoint) -> Option<TwoFormValue>;
}

impl<F> TwoFormField for F
where
    F: Fn(&SpacetimePoint) -> Option<TwoFormValue>,
{
    fn sample(&self, p: &SpacetimePoint) -> Option<TwoFormValue> {
        self(p)
    }
}

/// Default finite-difference step `1e-3 · max(1, r)`.
pub fn default_step(p: &SpacetimePoint) -> f64 {
    1e-3 * p.r().max(1.0)
}

/// Centered second-order gradient `[∂_λ F]_λ`.
pub fn two_form_gradient(
    f: &dyn TwoFormField,
    p: &SpacetimePoint,
    h: f64,
) -> Result<[TwoFormValue; 4]> {
    let mut d = [TwoFormValue::zero(); 4];
    for (lam, dl) in d.iter_mut().enumerate() {
        let plus = f
            .sample(&p.shifted(lam, h))
            .ok_or_else(|| Error::StencilOutOfDomain(format!("{:?} + h e{lam}", p.coords())))?;
        let minus = f
            .sample(&p.shifted(lam, -h))
            .ok_or_else(|| Error::StencilOutOfDomain(format!("{:?} - h e{lam}", p.coords())))?;
        *dl = (plus - minus) * (0.5 / h);
    }
    Ok(d)
}

/// `(𝓛_X F)_{μν} = X^λ ∂_λ F_{μν} + F_{λν} ∂_μ X^λ + F_{μλ} ∂_ν X^λ`
/// from the value, gradient and Jacobian at a point.
pub fn lie_derivative_from_parts(
    f: &TwoFormValue,
    grad: &[TwoFormValue; 4],
    xv: &Vec4,
    jac: &Mat4,
) -> TwoFormValue {
    TwoFormValue::from_fn(|mu, nu| {
        let mut s = 0.0;
        for lam in 0..4 {
            s += xv[lam] * grad[lam].get(mu, nu);
            s += f.get(lam, nu) * jac[lam][mu] + f.get(mu, lam) * jac[lam][nu];
        }
        s
    })
}

pub fn lie_derivative_two_form(
    f: &dyn TwoFormField,
    x: &LorentzField,
    p: &SpacetimePoint,
    h: f64,
) -> Result<TwoFormValue> {
    let val = f
        .sample(p)
        .ok_or_else(|| Error::StencilOutOfDomain(format!("{:?}", p.coords())))?;
    let grad = two_form_gradient(f, p, h)?;
    Ok(lie_derivative_from_parts(&val, &grad, &x.eval(p), &x.jacobian(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn coulomb(q: f64) -> impl Fn(&SpacetimePoint) -> Option<TwoFormValue> {
        move |p: &SpacetimePoint| {
            let r = p.r();
            if r < 1e-6 {
                return None;
            }
            let k = q / (4.0 * std::f64::consts::PI * r * r * r);
            Some(TwoFormValue::from_eh([k * p.x[0], k * p.x[1], k * p.x[2]], [0.0; 3]))
        }
    }

    #[test]
    fn frame_on_x_axis() {
        let f = frame_at(&SpacetimePoint::new(0.0, [1.0, 0.0, 0.0])).unwrap();
        assert_eq!(f.l, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.lbar, [1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn frame_on_pole_is_orthonormal() {
        let f = frame_at(&SpacetimePoint::new(0.3, [0.0, 0.0, 2.0])).unwrap();
        assert_eq!(f.chart, 2);
        for a in 0..2 {
            for b in 0..2 {
                let d = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(mdot(&f.e[a], &f.e[b]), d, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(mdot(&f.l, &f.e[a]), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn degenerate_radius_refused() {
        let e = frame_at(&SpacetimePoint::new(1.0, [1e-12, 0.0, 0.0])).unwrap_err();
        assert!(matches!(e, Error::DegenerateRadius { .. }));
    }

    #[test]
    fn weights_examples() {
        let wp = WeightParams::new(0.75, 0.5, 0.05).unwrap();
        let w = weights_tr(0.0, 0.0, &wp);
        assert_eq!((w.tau_plus, w.tau_minus), (1.0, 1.0));
        let w = weights_tr(0.0, 3.0, &wp);
        assert_abs_diff_eq!(w.w_gamma, 10f64.sqrt(), epsilon = 1e-14);
        let w = weights_tr(5.0, 1.0, &wp);
        assert_eq!(w.w_gamma, 1.0);
    }

    #[test]
    fn weight_params_validation() {
        assert!(WeightParams::new(0.5, 0.5, 0.01).is_err());
        assert!(WeightParams::new(0.75, 0.8, 0.05).is_err());
        assert!(WeightParams::new(0.75, 0.5, 0.3).is_err());
        assert!(WeightParams::strict(0.75, 0.5, 0.1).is_err());
        assert!(WeightParams::strict(0.75, 0.5, 0.05).is_ok());
    }

    #[test]
    fn chi_plus_shape() {
        assert_eq!(chi_plus(-1.0), 0.0);
        assert_eq!(chi_plus(0.0), 0.0);
        assert_eq!(chi_plus(1.0), 1.0);
        assert_abs_diff_eq!(chi_plus(0.5), 0.5, epsilon = 1e-15);
        // derivative against a centered difference
        for &x in &[0.1, 0.3, 0.5, 0.77, 0.95] {
            let h = 1e-6;
            let fd = (chi_plus(x + h) - chi_plus(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(chi_plus_prime(x), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn coulomb_null_components() {
        let f = coulomb(4.0 * std::f64::consts::PI);
        let p = SpacetimePoint::new(0.0, [0.0, 2.0, 0.0]);
        let n = null_decompose(&f(&p).unwrap(), &frame_at(&p).unwrap());
        assert_abs_diff_eq!(n.rho, 0.25, epsilon = 1e-15);
        assert_eq!(n.alpha_norm() + n.alpha_bar_norm(), 0.0);
        assert_abs_diff_eq!(n.sigma, 0.0, epsilon = 1e-16);
        let d = null_decompose(&hodge_dual(&f(&p).unwrap()), &frame_at(&p).unwrap());
        assert_abs_diff_eq!(d.rho, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(d.sigma, -0.25, epsilon = 1e-15);
    }

    #[test]
    fn magnetic_from_dual() {
        let f = TwoFormValue::from_eh([0.1, -0.2, 0.3], [1.5, -0.5, 0.25]);
        let d = hodge_dual(&f);
        for i in 0..3 {
            assert_abs_diff_eq!(d.get(0, i + 1), f.magnetic()[i], epsilon = 1e-15);
        }
        assert_eq!(f.magnetic(), [1.5, -0.5, 0.25]);
    }

    #[test]
    fn levi_civita_signs() {
        assert_eq!(levi_civita([0, 1, 2, 3]), 1.0);
        assert_eq!(levi_civita([1, 0, 2, 3]), -1.0);
        assert_eq!(levi_civita([1, 2, 3, 0]), -1.0);
        assert_eq!(levi_civita([0, 0, 2, 3]), 0.0);
    }

    #[test]
    fn bracket_table_examples() {
        use LorentzField::*;
        assert_eq!(bracket(&Partial(0), &Scaling).unwrap(), vec![(1.0, Partial(0))]);
        assert!(bracket(&Omega(1, 2), &Scaling).unwrap().is_empty());
        for x in LorentzField::basis() {
            assert!(bracket(&x, &x).unwrap().is_empty());
        }
        assert_eq!(bracket(&Omega(1, 2), &Omega(2, 3)).unwrap(), vec![(1.0, Omega(1, 3))]);
        // [∂_t, Ω_{i0}] = g_{00}... = ∂_i with the Minkowski metric
        assert_eq!(bracket(&Partial(0), &Omega(1, 0)).unwrap(), vec![(1.0, Partial(1))]);
        // [∂_α, Ω_βγ] = g_αβ ∂_γ − g_αγ ∂_β
        assert_eq!(bracket(&Partial(2), &Omega(2, 3)).unwrap(), vec![(1.0, Partial(3))]);
        assert!(bracket(&Morawetz, &Scaling).is_err());
    }

    #[test]
    fn bracket_matches_flow_commutator() {
        // [X, Y]^μ = X(Y^μ) − Y(X^μ) by centered differences
        let p = SpacetimePoint::new(0.7, [0.3, -1.2, 0.8]);
        let h = 1e-4;
        let basis = LorentzField::basis();
        for x in &basis {
            for y in &basis {
                let dir = |f: &LorentzField, v: &Vec4| {
                    let mut out = [0.0; 4];
                    for lam in 0..4 {
                        let a = f.eval(&p.shifted(lam, h));
                        let b = f.eval(&p.shifted(lam, -h));
                        for mu in 0..4 {
                            out[mu] += v[lam] * (a[mu] - b[mu]) / (2.0 * h);
                        }
                    }
                    out
                };
                let xy = dir(y, &x.eval(&p));
                let yx = dir(x, &y.eval(&p));
                let exact = eval_combination(&bracket(x, y).unwrap(), &p);
                for mu in 0..4 {
                    assert_abs_diff_eq!(xy[mu] - yx[mu], exact[mu], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn null_expansions_of_multipliers() {
        let p = SpacetimePoint::new(1.3, [0.4, -2.0, 0.9]);
        let f = frame_at(&p).unwrap();
        let (u, ub) = (p.u(), p.ubar());
        let check = |x: &LorentzField, cl: f64, clb: f64| {
            let (a, b, ang) = f.expand(&x.eval(&p));
            assert_abs_diff_eq!(a, cl, epsilon = 1e-12);
            assert_abs_diff_eq!(b, clb, epsilon = 1e-12);
            (ang[0], ang[1])
        };
        let ang = check(&LorentzField::Scaling, 0.5 * ub, 0.5 * u);
        assert_abs_diff_eq!(ang.0.hypot(ang.1), 0.0, epsilon = 1e-12);
        check(&LorentzField::Morawetz, 0.5 * ub * ub, 0.5 * u * u);
        check(&LorentzField::RadialBoost, -0.5 * ub, 0.5 * u);
        check(&LorentzField::T, 0.5, 0.5);
        let s = 0.8;
        check(&LorentzField::FracMorawetz(s), 0.5 * ub.powf(2.0 * s), 0.5 * u.abs().powf(2.0 * s));
        // Ω_{i0} = ½ ω_i (ū L − u Lbar) + t ω_i^A e_A
        for i in 0..3 {
            let (a0, a1) = check(&LorentzField::Omega(i + 1, 0), 0.5 * f.omega[i] * ub, -0.5 * f.omega[i] * u);
            assert_abs_diff_eq!(a0, p.t * f.omega_a[0][i], epsilon = 1e-12);
            assert_abs_diff_eq!(a1, p.t * f.omega_a[1][i], epsilon = 1e-12);
        }
    }

    #[test]
    fn deformation_examples() {
        let p = SpacetimePoint::new(3.0, [1.0, 2.0, -0.5]);
        assert_eq!(deformation_tensor(&LorentzField::T, &p), [[0.0; 4]; 4]);
        let pi = deformation_tensor(&LorentzField::Morawetz, &p);
        for mu in 0..4 {
            assert_abs_diff_eq!(pi[mu][mu], 12.0 * METRIC[mu], epsilon = 1e-14);
        }
        // Killing generators from their Jacobians
        for x in LorentzField::basis() {
            let pij = deformation_from_jacobian(&x.jacobian(&p));
            let want = deformation_tensor(&x, &p);
            for mu in 0..4 {
                for nu in 0..4 {
                    assert_abs_diff_eq!(pij[mu][nu], want[mu][nu], epsilon = 1e-14);
                }
            }
        }
        // K0 from its Jacobian
        let pij = deformation_from_jacobian(&LorentzField::Morawetz.jacobian(&p));
        for mu in 0..4 {
            for nu in 0..4 {
                assert_abs_diff_eq!(pij[mu][nu], pi[mu][nu], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn k0s_deformation_against_finite_differences() {
        let s = 0.75;
        let x = LorentzField::FracMorawetz(s);
        for p in [
            SpacetimePoint::new(1.0, [1.0, 0.0, 0.0]),
            SpacetimePoint::new(0.4, [0.3, 1.1, -2.0]),
            SpacetimePoint::new(7.0, [-1.0, 0.5, 0.2]),
        ] {
            let h = 1e-5;
            let mut jac = [[0.0; 4]; 4];
            for mu in 0..4 {
                let a = x.eval(&p.shifted(mu, h));
                let b = x.eval(&p.shifted(mu, -h));
                for nu in 0..4 {
                    jac[nu][mu] = (a[nu] - b[nu]) / (2.0 * h);
                }
            }
            let fd = deformation_from_jacobian(&jac);
            let cf = k0s_deformation(s, &p);
            for mu in 0..4 {
                for nu in 0..4 {
                    assert_abs_diff_eq!(fd[mu][nu], cf[mu][nu], epsilon = 1e-6);
                }
            }
        }
        // (t, r) = (1, 1): trace part 2^{3/2}, null coefficient 2^{3/2}/4
        let k = k0s_deformation(0.75, &SpacetimePoint::on_axis(1.0, 1.0));
        let tp = 2f64.powf(1.5);
        assert_abs_diff_eq!(k[2][2], tp, epsilon = 1e-14);
        assert_abs_diff_eq!(k[0][0], -tp + tp / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn morawetz_factor_examples() {
        assert_abs_diff_eq!(morawetz_factor(1.0, 2.0, 3.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(morawetz_factor(0.5, 0.0, 4.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            morawetz_factor(0.75, 1.0, 1.0).unwrap(),
            0.707_106_781_186_547_6,
            epsilon = 1e-12
        );
        assert!(morawetz_factor(1.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn special_cancellation_values() {
        let p = SpacetimePoint::new(1.0, [30.0, 40.0, 10.0]);
        assert_abs_diff_eq!(special_cancellation(&LorentzField::T, &p).unwrap(), 0.0, epsilon = 1e-15);
        assert!(special_cancellation(&LorentzField::Omega(1, 2), &p).unwrap() < 1e-12);
        assert!(special_cancellation(&LorentzField::Scaling, &p).unwrap() < 1e-12);
        // boost case: |u|/r |ω_i^A| bounded by a multiple of τ_0
        let p = SpacetimePoint::on_axis(1.0, 100.0);
        let v = special_cancellation(&LorentzField::Omega(2, 0), &p).unwrap();
        let w = weights_tr(1.0, 100.0, &WeightParams::new(0.75, 0.5, 0.05).unwrap());
        assert_abs_diff_eq!(v, 99.0 / 100.0, epsilon = 1e-12);
        assert!(v <= 2.0 * w.tau_0);
        assert!(special_cancellation(&LorentzField::T, &SpacetimePoint::on_axis(3.0, 1.0)).is_err());
    }

    #[test]
    fn coulomb_scaling_lie_derivative_vanishes() {
        let f = coulomb(1.0);
        let p = SpacetimePoint::new(0.5, [1.0, 2.0, -1.5]);
        let l = lie_derivative_two_form(&f, &LorentzField::Scaling, &p, default_step(&p)).unwrap();
        assert!(l.max_abs() < 1e-6, "{}", l.max_abs());
        let l = lie_derivative_two_form(&f, &LorentzField::T, &p, 1e-3).unwrap();
        assert!(l.max_abs() < 1e-14);
    }

    fn arb_point() -> impl Strategy<Value = SpacetimePoint> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_filter("r > 0.01", |(_, x, y, z)| (x * x + y * y + z * z).sqrt() > 0.01)
            .prop_map(|(t, x, y, z)| SpacetimePoint::new(t, [x, y, z]))
    }

    fn arb_form() -> impl Strategy<Value = TwoFormValue> {
        proptest::array::uniform6(-3.0..3.0f64).prop_map(|c| TwoFormValue { c })
    }

    proptest! {
        #[test]
        fn frame_relations(p in arb_point()) {
            let f = frame_at(&p).unwrap();
            prop_assert!(mdot(&f.l, &f.l).abs() < 1e-12);
            prop_assert!(mdot(&f.lbar, &f.lbar).abs() < 1e-12);
            prop_assert!((mdot(&f.l, &f.lbar) + 2.0).abs() < 1e-12);
            for a in 0..2 {
                prop_assert!(mdot(&f.l, &f.e[a]).abs() < 1e-12);
                prop_assert!(mdot(&f.lbar, &f.e[a]).abs() < 1e-12);
                let wa: f64 = (0..3).map(|i| f.omega[i] * f.omega_a[a][i]).sum();
                prop_assert!(wa.abs() < 1e-12);
                for b in 0..2 {
                    let d = if a == b { 1.0 } else { 0.0 };
                    let ab: f64 = (0..3).map(|i| f.omega_a[a][i] * f.omega_a[b][i]).sum();
                    prop_assert!((ab - d).abs() < 1e-12);
                }
            }
            let c = cross(&f.omega_a[0], &f.omega_a[1]);
            let orient: f64 = (0..3).map(|i| c[i] * f.omega[i]).sum();
            prop_assert!((orient - 1.0).abs() < 1e-12);
        }

        #[test]
        fn decomposition_is_linear(p in arb_point(), f in arb_form(), g in arb_form(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let fr = frame_at(&p).unwrap();
            let lhs = null_decompose(&(f * a + g * b), &fr);
            let nf = null_decompose(&f, &fr);
            let ng = null_decompose(&g, &fr);
            prop_assert!((lhs.rho - (a * nf.rho + b * ng.rho)).abs() < 1e-12);
            prop_assert!((lhs.sigma - (a * nf.sigma + b * ng.sigma)).abs() < 1e-12);
            for k in 0..2 {
                prop_assert!((lhs.alpha[k] - (a * nf.alpha[k] + b * ng.alpha[k])).abs() < 1e-12);
            }
        }

        #[test]
        fn compose_inverts_decompose(p in arb_point(), f in arb_form()) {
            let fr = frame_at(&p).unwrap();
            let back = null_compose(&null_decompose(&f, &fr), &fr);
            prop_assert!((back - f).max_abs() < 1e-12);
        }

        #[test]
        fn double_dual_is_minus_identity(f in arb_form()) {
            prop_assert!((hodge_dual(&hodge_dual(&f)) + f).max_abs() < 1e-12);
        }

        #[test]
        fn duality_table(p in arb_point(), f in arb_form()) {
            let fr = frame_at(&p).unwrap();
            let n = null_decompose(&f, &fr);
            let d = null_decompose(&hodge_dual(&f), &fr);
            // *α_A = −ε_A^B α_B, *ᾱ_A = ε_A^B ᾱ_B, *ρ = σ, *σ = −ρ
            prop_assert!((d.alpha[0] + n.alpha[1]).abs() < 1e-12);
            prop_assert!((d.alpha[1] - n.alpha[0]).abs() < 1e-12);
            prop_assert!((d.alpha_bar[0] - n.alpha_bar[1]).abs() < 1e-12);
            prop_assert!((d.alpha_bar[1] + n.alpha_bar[0]).abs() < 1e-12);
            prop_assert!((d.rho - n.sigma).abs() < 1e-12);
            prop_assert!((d.sigma + n.rho).abs() < 1e-12);
        }

        #[test]
        fn morawetz_factor_nonnegative(s in 0.5..=1.0f64, t in 0.0..50.0f64, r in 1e-6..100.0f64) {
            prop_assert!(morawetz_factor(s, t, r).unwrap() >= -1e-12 * (1.0 + (t + r).powf(2.0 * s)));
        }

        #[test]
        fn weight_invariants(t in 0.0..100.0f64, r in 0.0..100.0f64) {
            let wp = WeightParams::new(0.75, 0.5, 0.05).unwrap();
            let w = weights_tr(t, r, &wp);
            prop_assert!(w.tau_plus >= 1.0 && w.tau_minus >= 1.0);
            prop_assert!(w.tau_0 > 0.0 && w.tau_0 <= 1.0 + 1e-15);
            if r - t >= 1.0 {
                prop_assert!((w.w_gamma - w.tau_minus.powf(1.0)).abs() < 1e-12 * w.w_gamma);
            }
            if r - t <= 0.0 {
                prop_assert_eq!(w.w_gamma, 1.0);
            }
        }
    }
}
