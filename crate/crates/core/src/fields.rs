//! Grid representations of the scalar field, gauge potential, curvature and
//! current, with gauge-covariant differences and the snapshot file format.
//!
//! Grids are cell-centered. Spatial derivatives are centered second order in
//! the interior and one-sided second order on the first and last cells.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;

use crate::geometry::{SpacetimePoint, TwoFormValue};
use crate::{Error, Result, C64};

/// Uniform radial grid `r_j = (j + ½) h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1 {
    pub n: usize,
    pub h: f64,
}

impl Grid1 {
    pub fn r(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h
    }

    /// Outer face radius `r_{j+½} = (j + 1) h`.
    pub fn face(&self, j: usize) -> f64 {
        (j as f64 + 1.0) * self.h
    }

    pub fn r_max(&self) -> f64 {
        self.n as f64 * self.h
    }
}

/// Cubic cell-centered grid of side `n h` centered on the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid3 {
    pub n: usize,
    pub h: f64,
}

impl Grid3 {
    pub fn new(n: usize, side: f64) -> Self {
        Self { n, h: side / n as f64 }
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn side(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.side() + (i as f64 + 0.5) * self.h
    }

    /// Coordinate of a possibly out-of-range cell index (ghost cells).
    pub fn coord_i(&self, i: isize) -> f64 {
        -0.5 * self.side() + (i as f64 + 0.5) * self.h
    }

    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn ijk(&self, id: usize) -> [usize; 3] {
        let n = self.n;
        [id / (n * n), (id / n) % n, id % n]
    }

    pub fn x(&self, id: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(id);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn point(&self, id: usize, t: f64) -> SpacetimePoint {
        SpacetimePoint::new(t, self.x(id))
    }

    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }

    /// Cells whose coordinates all satisfy `|x_i| ≤ frac · side / 2`.
    pub fn interior(&self, frac: f64) -> Vec<usize> {
        let lim = 0.5 * frac * self.side() + 1e-12 * self.h;
        let ok: Vec<bool> = (0..self.n).map(|i| self.coord(i).abs() <= lim).collect();
        (0..self.len())
            .filter(|&id| {
                let [i, j, k] = self.ijk(id);
                ok[i] && ok[j] && ok[k]
            })
            .collect()
    }

    /// Cells at least `halo` cells away from every face.
    pub fn without_halo(&self, halo: usize) -> Vec<usize> {
        let ok = |i: usize| i >= halo && i + halo < self.n;
        (0..self.len())
            .filter(|&id| {
                let [i, j, k] = self.ijk(id);
                ok(i) && ok(j) && ok(k)
            })
            .collect()
    }
}

/// Centered difference along one axis with one-sided second-order ends.
pub fn diff_axis<T>(g: &Grid3, f: &[T], axis: usize) -> Vec<T>
where
    T: Copy + Send + Sync + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let s = g.stride(axis);
    let inv = 0.5 / g.h;
    (0..g.len())
        .into_par_iter()
        .map(|id| {
            let i = g.ijk(id)[axis];
            if i == 0 {
                (f[id + s] * 4.0 - f[id] * 3.0 - f[id + 2 * s]) * inv
            } else if i + 1 == g.n {
                (f[id] * 3.0 - f[id - s] * 4.0 + f[id - 2 * s]) * inv
            } else {
                (f[id + s] - f[id - s]) * inv
            }
        })
        .collect()
}

/// Scalar field and its time derivative on a 3D grid at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSlice3 {
    pub grid: Grid3,
    pub t: f64,
    pub phi: Vec<C64>,
    pub phi_t: Vec<C64>,
}

impl ScalarSlice3 {
    pub fn from_fn(grid: Grid3, t: f64, f: impl Fn(&SpacetimePoint) -> (C64, C64) + Sync) -> Self {
        let (phi, phi_t) = (0..grid.len()).into_par_iter().map(|id| f(&grid.point(id, t))).unzip();
        Self { grid, t, phi, phi_t }
    }
}

/// Potential `A_μ` and, when available, `∂_t A_μ` on a 3D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSlice3 {
    pub grid: Grid3,
    pub t: f64,
    pub a: [Vec<f64>; 4],
    pub a_t: Option<[Vec<f64>; 4]>,
}

impl PotentialSlice3 {
    pub fn zero(grid: Grid3, t: f64) -> Self {
        let z = || vec![0.0; grid.len()];
        Self { grid, t, a: [z(), z(), z(), z()], a_t: Some([z(), z(), z(), z()]) }
    }

    pub fn from_fn(grid: Grid3, t: f64, f: impl Fn(&SpacetimePoint) -> ([f64; 4], [f64; 4]) + Sync) -> Self {
        let vals: Vec<_> = (0..grid.len()).into_par_iter().map(|id| f(&grid.point(id, t))).collect();
        let comp = |k: usize, which: usize| -> Vec<f64> {
            vals.iter().map(|v| if which == 0 { v.0[k] } else { v.1[k] }).collect()
        };
        Self {
            grid,
            t,
            a: [comp(0, 0), comp(1, 0), comp(2, 0), comp(3, 0)],
            a_t: Some([comp(0, 1), comp(1, 1), comp(2, 1), comp(3, 1)]),
        }
    }
}

fn check_grids(a: &Grid3, b: &Grid3) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// `D_μ φ = ∂_μ φ + i A_μ φ`; the time direction uses the stored `∂_t φ`.
pub fn covariant_derivative(phi: &ScalarSlice3, a: &PotentialSlice3, mu: usize) -> Result<Vec<C64>> {
    check_grids(&phi.grid, &a.grid)?;
    let d = if mu == 0 { phi.phi_t.clone() } else { diff_axis(&phi.grid, &phi.phi, mu - 1) };
    Ok(d.into_iter()
        .zip(&phi.phi)
        .zip(&a.a[mu])
        .map(|((d, p), am)| d + C64::i() * am * p)
        .collect())
}

/// All four covariant derivatives.
pub fn covariant_gradient(phi: &ScalarSlice3, a: &PotentialSlice3) -> Result<[Vec<C64>; 4]> {
    Ok([
        covariant_derivative(phi, a, 0)?,
        covariant_derivative(phi, a, 1)?,
        covariant_derivative(phi, a, 2)?,
        covariant_derivative(phi, a, 3)?,
    ])
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureGrid3 {
    pub grid: Grid3,
    pub t: f64,
    pub f: Vec<TwoFormValue>,
}

/// `F_{μν} = ∂_μ A_ν − ∂_ν A_μ` with time derivatives from the stored momenta.
pub fn curvature_from_potential(a: &PotentialSlice3) -> Result<CurvatureGrid3> {
    let a_t = a.a_t.as_ref().ok_or_else(|| Error::MissingTimeLevel("potential has no time derivative".into()))?;
    let g = &a.grid;
    // d[μ][ν] = ∂_μ A_ν
    let mut d: Vec<Vec<Vec<f64>>> = Vec::with_capacity(4);
    d.push(a_t.to_vec());
    for axis in 0..3 {
        d.push((0..4).map(|nu| diff_axis(g, &a.a[nu], axis)).collect());
    }
    let f = (0..g.len())
        .map(|id| TwoFormValue::from_fn(|mu, nu| d[mu][nu][id] - d[nu][mu][id]))
        .collect();
    Ok(CurvatureGrid3 { grid: *g, t: a.t, f })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurrentGrid3 {
    pub grid: Grid3,
    pub t: f64,
    pub j: [Vec<f64>; 4],
}

/// `J_α = Im(φ · conj(D_α φ))`.
pub fn current_from_fields(phi: &ScalarSlice3, a: &PotentialSlice3) -> Result<CurrentGrid3> {
    let dphi = covariant_gradient(phi, a)?;
    let comp = |mu: usize| -> Vec<f64> {
        phi.phi.iter().zip(&dphi[mu]).map(|(p, d)| (p * d.conj()).im).collect()
    };
    Ok(CurrentGrid3 { grid: phi.grid, t: phi.t, j: [comp(0), comp(1), comp(2), comp(3)] })
}

/// Pointwise current from a value and its covariant derivative.
pub fn current_at(phi: C64, dphi: C64) -> f64 {
    (phi * dphi.conj()).im
}

/// `(E_i, H_i) = (F_{0i}, ½ ε_{ijk} F_{jk})`.
pub fn em_decompose(f: &CurvatureGrid3) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    f.f.iter().map(|v| (v.electric(), v.magnetic())).unzip()
}

/// Divergence of a spatial vector field.
pub fn divergence(g: &Grid3, v: &[Vec<f64>; 3]) -> Vec<f64> {
    let dx = diff_axis(g, &v[0], 0);
    let dy = diff_axis(g, &v[1], 1);
    let dz = diff_axis(g, &v[2], 2);
    dx.iter().zip(&dy).zip(&dz).map(|((a, b), c)| a + b + c).collect()
}

/// Split a list of 3-vectors into three component arrays.
pub fn components(v: &[[f64; 3]]) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|k| v.iter().map(|x| x[k]).collect())
}

/// Time component of the Bianchi identity, `∂_i H_i`, which involves no
/// time derivatives.
pub fn magnetic_divergence(f: &CurvatureGrid3) -> Vec<f64> {
    let (_, h) = em_decompose(f);
    divergence(&f.grid, &components(&h))
}

/// Max of `|v|` over the listed cells.
pub fn max_abs_on(v: &[f64], cells: &[usize]) -> f64 {
    cells.iter().fold(0.0f64, |m, &i| m.max(v[i].abs()))
}

/// Discrete L² norm `(Σ |v|² h³)^{1/2}` over the listed cells.
pub fn l2_on(g: &Grid3, v: &[f64], cells: &[usize]) -> f64 {
    let sq: Vec<f64> = cells.iter().map(|&i| v[i] * v[i]).collect();
    (crate::quad::tiled_sum(&sq) * g.h.powi(3)).sqrt()
}

// ---------------------------------------------------------------------------
// Radial slices

/// Spherically symmetric fields at one time, sampled at cell centers.
///
/// `A_r = 0`, so `D_r φ = ∂_r φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSlice {
    pub t: f64,
    pub grid: Grid1,
    pub phi: Vec<C64>,
    /// `D_t φ`.
    pub d_t: Vec<C64>,
    /// `D_r φ`.
    pub d_r: Vec<C64>,
    /// `ρ = E_r`.
    pub rho: Vec<f64>,
    pub j0: Vec<f64>,
    pub jr: Vec<f64>,
}

impl RadialSlice {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// `(1/r) D_L(rφ) = D_L φ + φ/r`.
    pub fn d_l_rphi(&self, j: usize) -> C64 {
        self.d_t[j] + self.d_r[j] + self.phi[j] / self.grid.r(j)
    }

    /// `D_Lbar φ`.
    pub fn d_lbar(&self, j: usize) -> C64 {
        self.d_t[j] - self.d_r[j]
    }

    pub fn phi_over_r(&self, j: usize) -> C64 {
        self.phi[j] / self.grid.r(j)
    }

    /// `J_L = J_0 + J_r`.
    pub fn j_l(&self, j: usize) -> f64 {
        self.j0[j] + self.jr[j]
    }

    /// `J_Lbar = J_0 − J_r`.
    pub fn j_lbar(&self, j: usize) -> f64 {
        self.j0[j] - self.jr[j]
    }

    pub const COLUMNS: [&'static str; 9] =
        ["r", "phi_re", "phi_im", "dt_re", "dt_im", "dr_re", "dr_im", "rho", "j0"];

    pub fn to_snapshot(&self) -> Snapshot {
        let g = &self.grid;
        let n = self.len();
        let mut data = vec![Vec::with_capacity(n); 9];
        for j in 0..n {
            let row = [
                g.r(j),
                self.phi[j].re,
                self.phi[j].im,
                self.d_t[j].re,
                self.d_t[j].im,
                self.d_r[j].re,
                self.d_r[j].im,
                self.rho[j],
                self.j0[j],
            ];
            for (c, v) in data.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Snapshot {
            kind: GridKind::OneD,
            dims: vec![n],
            h: g.h,
            t: self.t,
            columns: Self::COLUMNS.iter().map(|s| s.to_string()).collect(),
            data,
        }
    }
}

// ---------------------------------------------------------------------------
// Snapshots

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    OneD,
    ThreeD,
}

impl GridKind {
    fn tag(&self) -> &'static str {
        match self {
            GridKind::OneD => "1d",
            GridKind::ThreeD => "3d",
        }
    }
}

/// Columnar snapshot: one row per grid cell, an integer index followed by
/// named float columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub kind: GridKind,
    pub dims: Vec<usize>,
    pub h: f64,
    pub t: f64,
    pub columns: Vec<String>,
    /// `data[c][row]`.
    pub data: Vec<Vec<f64>>,
}

/// Shortest exact decimal form with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Snapshot {
    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, |c| c.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|k| self.data[k].as_slice())
    }

    pub fn to_text(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut s = format!(
            "csf-snapshot v1; grid={}; n={}; h={}; t={}\n# index {}\n",
            self.kind.tag(),
            dims.join("x"),
            fmt_f64(self.h),
            fmt_f64(self.t),
            self.columns.join(" ")
        );
        for row in 0..self.rows() {
            let _ = write!(s, "{row}");
            for col in &self.data {
                let _ = write!(s, " {}", fmt_f64(col[row]));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::SnapshotParse(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty snapshot".into()))?;
        let mut parts = header.split(';').map(str::trim);
        if parts.next() != Some("csf-snapshot v1") {
            return Err(bad(format!("unknown header `{header}`")));
        }
        let (mut kind, mut dims, mut h, mut t) = (None, None, None, None);
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| bad(format!("bad header field `{p}`")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
            match k {
                "grid" => {
                    kind = Some(match v {
                        "1d" => GridKind::OneD,
                        "3d" => GridKind::ThreeD,
                        _ => return Err(bad(format!("grid kind `{v}`"))),
                    })
                }
                "n" => {
                    dims = Some(
                        v.split('x')
                            .map(|d| d.parse::<usize>().map_err(|e| bad(format!("n: {e}"))))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "h" => h = Some(num(v)?),
                "t" => t = Some(num(v)?),
                _ => return Err(bad(format!("unknown header key `{k}`"))),
            }
        }
        let mut columns = Vec::new();
        let mut data: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in lines.enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                let mut names = rest.split_whitespace();
                if names.next() == Some("index") {
                    columns = names.map(String::from).collect();
                    data = vec![Vec::new(); columns.len()];
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            it.next();
            let vals: Vec<f64> = it
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", ln + 2))))
                .collect::<Result<_>>()?;
            if vals.len() != columns.len() {
                return Err(bad(format!("line {}: expected {} columns", ln + 2, columns.len())));
            }
            for (c, v) in data.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        Ok(Self {
            kind: kind.ok_or_else(|| bad("missing grid".into()))?,
            dims: dims.ok_or_else(|| bad("missing n".into()))?,
            h: h.ok_or_else(|| bad("missing h".into()))?,
            t: t.ok_or_else(|| bad("missing t".into()))?,
            columns,
            data,
        })
    }
}
