//! Deterministic summation and quadrature helpers.
//!
//! Reductions are pairwise within fixed-size tiles, and tile partials are
//! combined pairwise in index order, so the result depends only on the input
//! and not on the number of worker threads.

use rayon::prelude::*;

pub const TILE: usize = 4096;

pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Parallel reduction with a thread-count independent result.
pub fn tiled_sum(v: &[f64]) -> f64 {
    if v.len() <= TILE {
        return pairwise_sum(v);
    }
    let partials: Vec<f64> = v.par_chunks(TILE).map(pairwise_sum).collect();
    pairwise_sum(&partials)
}

/// `Σ_i f(i)` for `i < n`, evaluated in parallel, reduced deterministically.
pub fn tiled_sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let vals: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    tiled_sum(&vals)
}

/// Deterministic maximum of `f(i)`, ignoring NaN-free assumptions (NaN wins).
pub fn tiled_max_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(f)
        .reduce(|| f64::NEG_INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(y: &[f64], h: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => h * (pairwise_sum(y) - 0.5 * (y[0] + y[n - 1])),
    }
}

/// Trapezoid rule on arbitrary abscissae.
pub fn trapezoid_xy(x: &[f64], y: &[f64]) -> f64 {
    let terms: Vec<f64> = x
        .windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .collect();
    pairwise_sum(&terms)
}

/// Least-squares line `y = a + b x`, returning `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    (a, b, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiled_sum_is_thread_independent() {
        let v: Vec<f64> = (0..100_000).map(|i| ((i as f64) * 0.37).sin() / (1.0 + i as f64)).collect();
        let a = tiled_sum(&v);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| tiled_sum(&v));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let y: Vec<f64> = (0..11).map(|i| 2.0 + 0.1 * i as f64 * 3.0).collect();
        assert!((trapezoid(&y, 0.1) - (2.0 + 1.5)).abs() < 1e-14);
    }

    #[test]
    fn linear_fit_recovers_slope() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v).collect();
        let (a, b, res) = linear_fit(&x, &y);
        assert!((a - 1.0).abs() < 1e-12 && (b + 2.0).abs() < 1e-12 && res < 1e-12);
    }
}
