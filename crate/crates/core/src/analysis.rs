//! Convergence diagnostics and LLR error analysis of the estimated-CSI receiver.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{receive_pilots, ChempFrontEnd, GramCorrection};
use crate::hardening::gram;
use crate::model::{generate_channel, modulate, to_real, transmit_with_noise_var, SnrSpec, QPSK_SYMBOL_ENERGY};
use crate::mpd::{matched_filter, GramObservation, MpdConfig, MpdDetector};
use crate::rng::stream;
use nalgebra::DMatrix;

/// Per-row outcome of the two row-wise conditions on `J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// `J_ii - Σ_{j≠i}|J_ij| < Σ_{j≠i}|J_ij|`, evaluated as printed.
    pub stated_condition: Vec<bool>,
    /// Classical strict diagonal dominance `J_ii > Σ_{j≠i}|J_ij|`.
    pub diagonal_dominance: Vec<bool>,
}

impl ConvergenceReport {
    pub fn stated_fraction(&self) -> f64 {
        fraction(&self.stated_condition)
    }

    pub fn dominance_fraction(&self) -> f64 {
        fraction(&self.diagonal_dominance)
    }

    pub fn all_stated(&self) -> bool {
        self.stated_condition.iter().all(|&b| b)
    }

    pub fn all_dominant(&self) -> bool {
        self.diagonal_dominance.iter().all(|&b| b)
    }
}

fn fraction(v: &[bool]) -> f64 {
    v.iter().filter(|&&b| b).count() as f64 / v.len().max(1) as f64
}

/// Evaluates the row sums over all `j ≠ i` of the full `2K x 2K` matrix.
pub fn convergence_condition(j: &DMatrix<f64>) -> Result<ConvergenceReport> {
    if !j.is_square() {
        return Err(Error::Dimension("J must be square".into()));
    }
    let s = j.nrows();
    let (mut stated, mut dominant) = (Vec::with_capacity(s), Vec::with_capacity(s));
    for i in 0..s {
        let off: f64 = (0..s).filter(|&c| c != i).map(|c| j[(i, c)].abs()).sum();
        let d = j[(i, i)];
        stated.push(d - off < off);
        dominant.push(d > off);
    }
    Ok(ConvergenceReport {
        stated_condition: stated,
        diagonal_dominance: dominant,
    })
}

/// `‖p^t - p^{t-1}‖∞` for consecutive entries of a belief history.
pub fn fixed_point_residuals(history: &[Vec<f64>]) -> Vec<f64> {
    history
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect()
}

/// First index whose residual is below `tol` (1-based iteration count).
pub fn iterations_to_converge(residuals: &[f64], tol: f64) -> Option<usize> {
    residuals.iter().position(|&r| r < tol).map(|i| i + 1)
}

/// Upper bound on the LLR mean-square error of the estimated-CSI receiver
/// for pilot amplitude normalized to one:
///
/// `σ_v²/σ_i⁴ · { α(σ_v² + 1/2) + (α(σ_v⁴ + σ_v²/2) + (z_i - μ_i)²)(8σ_v²/N + 2/N) }`.
pub fn llr_mse_bound(sigma_v_sq: f64, alpha: f64, n: usize, z: f64, mu: f64, sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidParameter("sigma_i^2 must be > 0".into()));
    }
    let sv = sigma_v_sq;
    let nf = n as f64;
    let inner = alpha * (sv + 0.5) + (alpha * (sv * sv + sv / 2.0) + (z - mu).powi(2)) * (8.0 * sv / nf + 2.0 / nf);
    Ok(sv / (sigma_sq * sigma_sq) * inner)
}

/// Receiver the estimated-CSI LLRs are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlrReference {
    /// `(J̃, ẑ)` with `J̃ = J + W_pᵀH/(NP)`: the system `ẑ = J̃x + w̃` the
    /// estimated receiver actually observes, so only `Ĵ - J̃` differs.
    #[default]
    Effective,
    /// `(J, z)` from perfect CSI on the same data channel use.
    Perfect,
}

/// Setup of an LLR-MSE measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlrMseConfig {
    pub n: usize,
    pub k: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub correction: GramCorrection,
    #[serde(default)]
    pub reference: LlrReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LlrMsePoint {
    pub snr_db: f64,
    pub mse_empirical: f64,
    pub mse_bound: f64,
}

/// First-iteration LLRs (uniform beliefs) for an observation.
pub fn first_iteration_llrs(obs: &GramObservation) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut det = MpdDetector::new(obs, &MpdConfig::default())?;
    det.compute_llrs();
    let s = det.state();
    Ok((s.llr, s.mu, s.sigma_sq))
}

/// Bound argument for a given SNR with the pilot amplitude normalized to one.
///
/// The bound models `δJ̃_ij` with variance `σ_v⁴/N + σ_v²/(2N)`; with `2N`
/// real rows and real noise entries of variance `σ_n²/P²` the leading term
/// is `σ_n²/(N P²)`, so the matching argument is `2σ_n²/P²`.
pub fn normalized_pilot_noise(noise_var: f64, k: usize) -> f64 {
    2.0 * noise_var / (k as f64 * QPSK_SYMBOL_ENERGY)
}

/// Monte Carlo LLR MSE of the estimated-CSI receiver against `cfg.reference`,
/// both evaluated on the same data observation at the first detector
/// iteration, alongside the mean of the analytic bound over the same samples
/// (`z_i`, `μ_i`, `σ_i²` taken from the reference receiver).
pub fn llr_mse_empirical(cfg: &LlrMseConfig) -> Result<Vec<LlrMsePoint>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let alpha = cfg.k as f64 / cfg.n as f64;
    cfg.snr_db
        .iter()
        .enumerate()
        .map(|(pi, &snr_db)| {
            let snr = SnrSpec::new(snr_db)?;
            let nv = snr.noise_var(cfg.k);
            let per_trial: Vec<(f64, f64)> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream(cfg.seed, pi as u64, t as u64);
                    llr_error_trial(cfg.n, cfg.k, nv, alpha, cfg.correction, cfg.reference, &mut rng)
                })
                .collect::<Result<_>>()?;
            let count = (cfg.trials * 2 * cfg.k) as f64;
            Ok(LlrMsePoint {
                snr_db,
                mse_empirical: per_trial.iter().map(|t| t.0).sum::<f64>() / count,
                mse_bound: per_trial.iter().map(|t| t.1).sum::<f64>() / count,
            })
        })
        .collect()
}

/// Sums of squared LLR errors and of bound values over the symbols of one draw.
fn llr_error_trial<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    noise_var: f64,
    alpha: f64,
    correction: GramCorrection,
    reference: LlrReference,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let hc = generate_channel(n, k, &vec![1.0; k], rng)?;
    let h = to_real(&hc);
    let pilots = receive_pilots(&hc, QPSK_SYMBOL_ENERGY, noise_var, rng)?;
    let p = pilots.p;
    let w_p = &pilots.y_p - &h * p;
    let front = ChempFrontEnd::new(pilots, correction);
    let bits: Vec<u8> = (0..2 * k).map(|_| rng.random_range(0..2u8)).collect();
    let x = modulate(&bits);
    let y = transmit_with_noise_var(&h, &x, noise_var, rng)?;
    let est = front.observe(&y)?;
    let truth = match reference {
        LlrReference::Perfect => matched_filter(&h, &y, n, noise_var)?,
        LlrReference::Effective => {
            // Not symmetric; row i is what node i sees.
            let j_tilde = gram(&h, n)?.j + w_p.tr_mul(&h) / (n as f64 * p);
            GramObservation::new(j_tilde, est.z.clone(), est.sigma_v_sq)?
        }
    };
    let (l_true, mu, sigma_sq) = first_iteration_llrs(&truth)?;
    let (l_est, _, _) = first_iteration_llrs(&est)?;
    let sv = normalized_pilot_noise(noise_var, k);
    let mut err = 0.0;
    let mut bound = 0.0;
    for i in 0..2 * k {
        err += (l_est[i] - l_true[i]).powi(2);
        bound += llr_mse_bound(sv, alpha, n, truth.z[i], mu[i], sigma_sq[i])?;
    }
    Ok((err, bound))
}
