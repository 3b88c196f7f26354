//! EXIT characteristic of the detector: extrinsic mutual information at the
//! detector output as a function of the a priori mutual information.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RealSystemInstance, SnrSpec};
use crate::mpd::{matched_filter, MpdConfig, MpdDetector};
use crate::rng::stream;

/// Mutual information between a ±1 symbol and a consistent Gaussian LLR
/// `L ~ N(σ²/2 · x, σ²)`.
pub fn j_function(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    if sigma > 60.0 {
        return 1.0;
    }
    // 1 - E[log2(1 + e^{-L})] with x = +1, Simpson over ±10 standard deviations.
    let mu = sigma * sigma / 2.0;
    let intervals = 2000;
    let (a, b) = (mu - 10.0 * sigma, mu + 10.0 * sigma);
    let h = (b - a) / intervals as f64;
    let f = |l: f64| {
        let g = (-(l - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        // log2(1 + e^{-l}) without overflow for negative l.
        let s = if l > 0.0 {
            (-l).exp().ln_1p()
        } else {
            -l + l.exp().ln_1p()
        };
        g * s / std::f64::consts::LN_2
    };
    let mut acc = f(a) + f(b);
    for i in 1..intervals {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (1.0 - acc * h / 3.0).clamp(0.0, 1.0)
}

/// Inverse of [`j_function`] by bisection; `i` in `[0, 1)`.
pub fn j_inverse(i: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&i) {
        return Err(Error::InvalidParameter(format!(
            "mutual information {i} outside [0, 1)"
        )));
    }
    if i == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 60.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if j_function(mid) < i {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Histogram estimate of `I(X; L)` for equiprobable `x ∈ {±1}`.
pub fn mutual_information_histogram(llr: &[f64], x: &[f64], bins: usize) -> Result<f64> {
    if llr.len() != x.len() || llr.is_empty() {
        return Err(Error::Dimension("LLR and symbol sample counts".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidParameter("need at least 2 bins".into()));
    }
    let (lo, hi) = llr
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
    if hi - lo < 1e-12 {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let mut pos = vec![0.0; bins];
    let mut neg = vec![0.0; bins];
    for (&l, &s) in llr.iter().zip(x) {
        let b = (((l - lo) / width) as usize).min(bins - 1);
        if s > 0.0 {
            pos[b] += 1.0;
        } else {
            neg[b] += 1.0;
        }
    }
    let np: f64 = pos.iter().sum();
    let nn: f64 = neg.iter().sum();
    if np == 0.0 || nn == 0.0 {
        return Err(Error::InvalidParameter("both symbol values must occur".into()));
    }
    let mut mi = 0.0;
    for b in 0..bins {
        let (pp, pn) = (pos[b] / np, neg[b] / nn);
        let avg = 0.5 * (pp + pn);
        for p in [pp, pn] {
            if p > 0.0 {
                mi += 0.5 * p * (p / avg).log2();
            }
        }
    }
    Ok(mi.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExitConfig {
    pub n: usize,
    pub k: usize,
    pub snr_db: f64,
    pub i_a: Vec<f64>,
    /// LLR samples per point (rounded up to whole channel realizations).
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub mpd: MpdConfig,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitPoint {
    pub i_a: f64,
    pub i_e: f64,
    pub snr_db: f64,
}

/// Runs the detector with Gaussian a priori LLRs of mutual information
/// `I_A` and measures the mutual information of its own (extrinsic) LLRs.
pub fn measure_exit_detector(cfg: &ExitConfig) -> Result<Vec<ExitPoint>> {
    cfg.mpd.validate()?;
    let snr = SnrSpec::new(cfg.snr_db)?;
    let dim = 2 * cfg.k;
    let trials = cfg.samples.div_ceil(dim).max(1);
    cfg.i_a
        .iter()
        .enumerate()
        .map(|(pi, &i_a)| {
            let sigma_a = j_inverse(i_a)?;
            let per: Vec<(Vec<f64>, Vec<f64>)> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream(cfg.seed, pi as u64, t as u64);
                    let inst = RealSystemInstance::random(cfg.n, cfg.k, &snr, &mut rng)?;
                    let prior: Vec<f64> = inst
                        .x
                        .iter()
                        .map(|&x| {
                            let w: f64 = rng.sample(StandardNormal);
                            sigma_a * sigma_a / 2.0 * x + sigma_a * w
                        })
                        .collect();
                    let obs = matched_filter(&inst.h, &inst.y, cfg.n, inst.noise_var)?;
                    let mut det = MpdDetector::new(&obs, &cfg.mpd)?;
                    det.run(Some(&prior));
                    Ok((det.llrs().to_vec(), inst.x.as_slice().to_vec()))
                })
                .collect::<Result<_>>()?;
            let (l, x): (Vec<f64>, Vec<f64>) = per.into_iter().flat_map(|(l, x)| l.into_iter().zip(x)).unzip();
            Ok(ExitPoint {
                i_a,
                i_e: mutual_information_histogram(&l, &x, cfg.bins)?,
                snr_db: cfg.snr_db,
            })
        })
        .collect()
}
