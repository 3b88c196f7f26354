//! Channel hardening statistics and the Marčenko-Pastur law.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{stack_complex_matrix, ComplexChannel};

/// `J = HᵀH / N` for a real-stacked channel.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub j: DMatrix<f64>,
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardeningReport {
    pub diag_mean: f64,
    pub offdiag_rms: f64,
    pub offdiag_max: f64,
}

/// Forms `HᵀH / N`. The result is symmetrized so it is exactly symmetric.
pub fn gram(h: &DMatrix<f64>, n: usize) -> Result<GramMatrix> {
    if h.nrows() != 2 * n || h.ncols() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "H is {}x{}, expected 2N x 2K with N = {n}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut j = h.tr_mul(h);
    j /= n as f64;
    symmetrize(&mut j);
    Ok(GramMatrix { n, k: h.ncols() / 2, j })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let s = m.nrows();
    for c in 0..s {
        for r in c + 1..s {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

/// Diagonal mean and strictly off-diagonal RMS / max magnitude.
pub fn hardening_report(j: &DMatrix<f64>) -> HardeningReport {
    let s = j.nrows();
    let diag_mean = (0..s).map(|i| j[(i, i)]).sum::<f64>() / s as f64;
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for c in 0..s {
        for r in 0..s {
            if r != c {
                let v = j[(r, c)];
                sq += v * v;
                max = max.max(v.abs());
            }
        }
    }
    let count = (s * s.saturating_sub(1)).max(1) as f64;
    HardeningReport {
        diag_mean,
        offdiag_rms: (sq / count).sqrt(),
        offdiag_max: max,
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "loading factor {alpha} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Support `[a, b]` of the Marčenko-Pastur density.
pub fn mp_support(alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let r = alpha.sqrt();
    Ok(((1.0 - r).powi(2), (1.0 + r).powi(2)))
}

/// Continuous part of the Marčenko-Pastur density. For `alpha <= 1` the point
/// mass `(1 - 1/alpha)^+` at zero vanishes.
pub fn mp_density(x: f64, alpha: f64) -> Result<f64> {
    let (a, b) = mp_support(alpha)?;
    if x <= 0.0 || x <= a || x >= b {
        return Ok(0.0);
    }
    Ok(((x - a) * (b - x)).sqrt() / (2.0 * std::f64::consts::PI * alpha * x))
}

/// Marčenko-Pastur CDF by composite Simpson quadrature.
///
/// Substituting `x = a + (b - a)(1 - cos θ)/2` removes the square-root
/// endpoint behaviour (and the `1/√x` pole at `alpha = 1`), leaving a smooth
/// integrand in `θ ∈ [0, π]`.
pub fn mp_cdf(x: f64, alpha: f64) -> Result<f64> {
    let (a, b) = mp_support(alpha)?;
    if x <= a {
        return Ok(0.0);
    }
    if x >= b {
        return Ok(1.0);
    }
    let half = 0.5 * (b - a);
    let theta_max = (1.0 - (x - a) / half).clamp(-1.0, 1.0).acos();
    let integrand = |t: f64| {
        let xt = a + half * (1.0 - t.cos());
        if xt <= 0.0 {
            // Limit of sin²θ / x as θ -> 0 when a = 0 (alpha = 1).
            return half * half / (2.0 * std::f64::consts::PI * alpha) * (2.0 / half);
        }
        half * half * t.sin().powi(2) / (2.0 * std::f64::consts::PI * alpha * xt)
    };
    Ok(simpson(integrand, 0.0, theta_max, 2048).clamp(0.0, 1.0))
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (hi - lo) / m as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Eigenvalues of `H_cᴴH_c / N` (normalized to unit-variance-over-N entries),
/// ascending. Uses the real stacking, whose spectrum repeats each eigenvalue
/// twice, and keeps every other one.
pub fn normalized_eigenvalues(hc: &ComplexChannel) -> Vec<f64> {
    let n = hc.n() as f64;
    let mut g = hc.entries().adjoint() * hc.entries();
    g /= nalgebra::Complex::new(n, 0.0);
    let mut gr = stack_complex_matrix(&g);
    symmetrize(&mut gr);
    let mut ev: Vec<f64> = SymmetricEigen::new(gr).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev.into_iter().step_by(2).collect()
}

/// Kolmogorov-Smirnov distance between the pooled eigenvalue distribution of
/// the ensemble and the Marčenko-Pastur CDF.
pub fn mp_distance(ensemble: &[ComplexChannel], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut ev: Vec<f64> = ensemble.iter().flat_map(normalized_eigenvalues).collect();
    if ev.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    ev.sort_by(|a, b| a.total_cmp(b));
    ks_statistic(&ev, |x| mp_cdf(x, alpha).unwrap_or(0.0))
}

/// KS statistic of sorted samples against a CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / m).abs()).max(((i + 1) as f64 / m - f).abs());
    }
    Ok(d)
}

/// One histogram bin of an eigenvalue spectrum against the limiting density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumBin {
    pub bin_center: f64,
    pub empirical_density: f64,
    pub mp_density: f64,
}

/// Density-normalized histogram over `[0, b]` with the MP density at bin centers.
pub fn spectrum_histogram(eigenvalues: &[f64], alpha: f64, bins: usize) -> Result<Vec<SpectrumBin>> {
    let (_, b) = mp_support(alpha)?;
    let hi = eigenvalues.iter().copied().fold(b, f64::max) * 1.0001;
    let width = hi / bins as f64;
    let mut counts = vec![0usize; bins];
    for &e in eigenvalues {
        let idx = ((e.max(0.0)) / width) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let total = eigenvalues.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let center = (i as f64 + 0.5) * width;
            Ok(SpectrumBin {
                bin_center: center,
                empirical_density: c as f64 / (total * width),
                mp_density: mp_density(center, alpha)?,
            })
        })
        .collect()
}
