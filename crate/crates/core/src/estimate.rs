//! Pilot-based estimation of the Gram-domain quantities `J` and `z`.
//!
//! During the first `K` channel uses of a frame user `i` alone sends a real
//! pilot of amplitude `P = √(K Es)`, so the stacked pilot block is
//! `Y_p = P H + W_p`. The detector only needs `HᵀH/N` and `Hᵀy/N`, which are
//! estimated directly from `Y_p` without ever forming an estimate of `H`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardening::symmetrize;
use crate::model::{stack_complex_matrix, ComplexChannel};
use crate::mpd::{GramObservation, SIGMA_V_FLOOR};

/// Received pilot block in the real-stacked domain (2N x 2K).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub y_p: DMatrix<f64>,
    /// Pilot amplitude.
    pub p: f64,
    pub sigma_n_sq: f64,
}

impl PilotObservation {
    pub fn new(y_p: DMatrix<f64>, p: f64, sigma_n_sq: f64) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::InvalidParameter("pilot amplitude must be > 0".into()));
        }
        if !(sigma_n_sq >= 0.0) {
            return Err(Error::InvalidParameter("noise variance must be >= 0".into()));
        }
        if y_p.nrows() % 2 != 0 || y_p.ncols() % 2 != 0 {
            return Err(Error::Dimension("pilot block must be real-stacked".into()));
        }
        Ok(Self { y_p, p, sigma_n_sq })
    }

    pub fn n(&self) -> usize {
        self.y_p.nrows() / 2
    }

    pub fn k(&self) -> usize {
        self.y_p.ncols() / 2
    }
}

/// Pilot amplitude `√(K Es)`.
pub fn pilot_amplitude(k: usize, symbol_energy: f64) -> f64 {
    (k as f64 * symbol_energy).sqrt()
}

/// Simulates the `K` pilot channel uses and real-stacks the result.
pub fn receive_pilots<R: Rng + ?Sized>(
    hc: &ComplexChannel,
    symbol_energy: f64,
    noise_var: f64,
    rng: &mut R,
) -> Result<PilotObservation> {
    if !(symbol_energy > 0.0) {
        return Err(Error::InvalidParameter("symbol energy must be > 0".into()));
    }
    let (n, k) = (hc.n(), hc.k());
    let p = pilot_amplitude(k, symbol_energy);
    let s = noise_var.max(0.0).sqrt();
    let mut yc = hc.entries() * Complex::new(p, 0.0);
    if s > 0.0 {
        for use_idx in 0..k {
            for ant in 0..n {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                yc[(ant, use_idx)] += Complex::new(s * re, s * im);
            }
        }
    }
    PilotObservation::new(stack_complex_matrix(&yc), p, noise_var)
}

/// Diagonal correction subtracted from `Y_pᵀY_p / (N P²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramCorrection {
    /// `2σ_n²/P²`: the mean of the `W_pᵀW_p/(N P²)` diagonal, which makes `Ĵ`
    /// unbiased for `J`.
    #[default]
    Unbiased,
    /// `σ_v²/P²` with `σ_v² = σ_n²/(2N)`, taken at face value.
    Literal,
    /// No correction (receiver does not know its noise level).
    None,
}

impl GramCorrection {
    pub fn amount(self, sigma_n_sq: f64, p: f64, n: usize) -> f64 {
        match self {
            Self::Unbiased => 2.0 * sigma_n_sq / (p * p),
            Self::Literal => sigma_n_sq / (2.0 * n as f64) / (p * p),
            Self::None => 0.0,
        }
    }
}

/// `Ĵ = Y_pᵀY_p / (N P²) - c I`.
pub fn estimate_gram(pilots: &PilotObservation, correction: GramCorrection) -> DMatrix<f64> {
    let n = pilots.n();
    let p = pilots.p;
    let mut j = pilots.y_p.tr_mul(&pilots.y_p) / (n as f64 * p * p);
    symmetrize(&mut j);
    let c = correction.amount(pilots.sigma_n_sq, p, n);
    for i in 0..j.nrows() {
        j[(i, i)] -= c;
    }
    j
}

/// `ẑ = Y_pᵀ y / (N P)`.
pub fn estimate_z(pilots: &PilotObservation, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != pilots.y_p.nrows() {
        return Err(Error::Dimension("y length vs pilot block rows".into()));
    }
    Ok(pilots.y_p.tr_mul(y) / (pilots.n() as f64 * pilots.p))
}

/// Noise variance of `ẑ - J̃x`: `σ_n²/N · (1 + 2σ_n²/P²)`.
pub fn estimated_noise_var(pilots: &PilotObservation) -> f64 {
    let sn = pilots.sigma_n_sq;
    (sn / pilots.n() as f64 * (1.0 + 2.0 * sn / (pilots.p * pilots.p))).max(SIGMA_V_FLOOR)
}

/// Gram-domain front end of the estimated-CSI receiver for one frame:
/// `Ĵ` is computed once and shared by all data channel uses.
#[derive(Debug, Clone)]
pub struct ChempFrontEnd {
    pilots: PilotObservation,
    j_hat: DMatrix<f64>,
    sigma_v_sq: f64,
}

impl ChempFrontEnd {
    pub fn new(pilots: PilotObservation, correction: GramCorrection) -> Self {
        let j_hat = estimate_gram(&pilots, correction);
        let sigma_v_sq = estimated_noise_var(&pilots);
        Self {
            pilots,
            j_hat,
            sigma_v_sq,
        }
    }

    pub fn j_hat(&self) -> &DMatrix<f64> {
        &self.j_hat
    }

    pub fn pilots(&self) -> &PilotObservation {
        &self.pilots
    }

    pub fn observe(&self, y: &DVector<f64>) -> Result<GramObservation> {
        let z = estimate_z(&self.pilots, y)?;
        GramObservation::new(self.j_hat.clone(), z, self.sigma_v_sq)
    }
}

/// Per-entry linear estimate `Ĥ = P Y_p / (P² + σ_n²)` (real-stacked).
pub fn mmse_channel_estimate(pilots: &PilotObservation) -> DMatrix<f64> {
    let p = pilots.p;
    &pilots.y_p * (p / (p * p + pilots.sigma_n_sq))
}

/// Error variance of [`mmse_channel_estimate`] per real entry when the real
/// parts of `H` have variance 1/2.
pub fn mmse_channel_error_var(p: f64, sigma_n_sq: f64) -> f64 {
    sigma_n_sq * (p * p + sigma_n_sq / 2.0) / (p * p + sigma_n_sq).powi(2)
}
