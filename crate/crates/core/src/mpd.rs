//! Message passing detection on the matched-filtered system `z = Jx + v`.
//!
//! Every real symbol is a node of a fully connected graph. Node `i` models
//! the interference-plus-noise term of `z_i` as Gaussian with mean
//! `μ_i = Σ_{j≠i} J_ij (2p_j - 1)` and variance
//! `σ_i² = Σ_{j≠i} 4 J_ij² p_j (1 - p_j) + σ_v²`, turns it into the LLR
//! `L_i = 2 J_ii (z_i - μ_i) / σ_i²` and broadcasts `p_i = logistic(L_i)`.
//! Messages are damped, `p^t = (1-Δ) p̃^t + Δ p^{t-1}`, and can additionally
//! be extrapolated with Aitken's delta-squared process: every two damped
//! iterates the window `(q, F(q), F(F(q)))` is replaced by its extrapolation,
//! which then seeds the next window.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// LLR magnitude cap applied before the logistic map.
pub const LLR_CLIP: f64 = 50.0;
/// Denominators smaller than this make the Aitken step pass the newest value through.
pub const AITKEN_EPS: f64 = 1e-12;
/// Lower bound on σ_v² used for noiseless observations.
pub const SIGMA_V_FLOOR: f64 = 1e-12;
/// Aitken extrapolation starts once this many iterates exist.
pub const AITKEN_START: usize = 3;

/// Gram-domain observation consumed by the detector: `J`, `z` and the
/// variance of the matched-filter noise `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramObservation {
    pub j: DMatrix<f64>,
    pub z: DVector<f64>,
    pub sigma_v_sq: f64,
}

impl GramObservation {
    pub fn new(j: DMatrix<f64>, z: DVector<f64>, sigma_v_sq: f64) -> Result<Self> {
        let obs = Self { j, z, sigma_v_sq };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.j.is_square() || self.j.nrows() != self.z.len() {
            return Err(Error::Dimension(format!(
                "J is {}x{} but z has {} entries",
                self.j.nrows(),
                self.j.ncols(),
                self.z.len()
            )));
        }
        if !(self.sigma_v_sq > 0.0) {
            return Err(Error::InvalidParameter("sigma_v_sq must be > 0".into()));
        }
        if self.j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("J"));
        }
        if self.z.iter().any(|v| !v.is_finite()) || !self.sigma_v_sq.is_finite() {
            return Err(Error::NonFinite("z"));
        }
        Ok(())
    }

    /// Number of real symbols (2K).
    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Matched filter: `z = Hᵀy/N`, `J = HᵀH/N`.
///
/// `σ_v²` is the variance of `v = Hᵀw/N`, which is `σ_n² J_ii / N`; with
/// unit-power users `J_ii -> 1`, so `σ_v² = σ_n² / N`.
pub fn matched_filter(h: &DMatrix<f64>, y: &DVector<f64>, n: usize, noise_var: f64) -> Result<GramObservation> {
    if h.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "H has {} rows but y has {} entries",
            h.nrows(),
            y.len()
        )));
    }
    let g = crate::hardening::gram(h, n)?;
    let z = h.tr_mul(y) / n as f64;
    GramObservation::new(g.j, z, effective_noise_var(noise_var, n))
}

/// σ_v² for matched filtering over `n` complex receive antennas.
pub fn effective_noise_var(noise_var: f64, n: usize) -> f64 {
    (noise_var / n as f64).max(SIGMA_V_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpdConfig {
    pub iterations: usize,
    pub damping: f64,
    pub aitken: bool,
    /// Stop early once `‖p^t - p^{t-1}‖∞` falls below this.
    pub convergence_tol: Option<f64>,
    /// Keep every iterate in [`BeliefState::history`].
    pub record_history: bool,
}

impl Default for MpdConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            damping: 0.33,
            aitken: false,
            convergence_tol: None,
            record_history: false,
        }
    }
}

impl MpdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter(format!(
                "damping {} outside [0, 1)",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Detector output. `p[i]` is the probability that symbol `i` is +1.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub p: Vec<f64>,
    /// LLRs of the last iteration (before damping).
    pub llr: Vec<f64>,
    /// Interference means and variances behind `llr`.
    pub mu: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub iteration: usize,
    /// `p^0, p^1, ...` when history recording is on.
    pub history: Option<Vec<Vec<f64>>>,
}

pub fn logistic(l: f64) -> f64 {
    let l = l.clamp(-LLR_CLIP, LLR_CLIP);
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// The LLR of one node, clipped to `±LLR_CLIP`.
pub fn node_llr(j_ii: f64, sigma_sq: f64, z: f64, mu: f64) -> f64 {
    (2.0 * j_ii / sigma_sq * (z - mu)).clamp(-LLR_CLIP, LLR_CLIP)
}

/// Aitken's delta-squared extrapolation of three consecutive iterates,
/// componentwise, clamped to `[0, 1]`.
pub fn aitken_step(p0: &[f64], p1: &[f64], p2: &[f64]) -> Vec<f64> {
    p0.iter()
        .zip(p1)
        .zip(p2)
        .map(|((&a, &b), &c)| aitken_scalar(a, b, c))
        .collect()
}

fn aitken_scalar(a: f64, b: f64, c: f64) -> f64 {
    let den = c - 2.0 * b + a;
    if den.abs() < AITKEN_EPS {
        return c;
    }
    (a - (b - a) * (b - a) / den).clamp(0.0, 1.0)
}

/// `+1` when `p_i >= 0.5`, else `-1`.
pub fn hard_decision(state: &BeliefState) -> Vec<f64> {
    hard_decision_probs(&state.p)
}

pub fn hard_decision_probs(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&v| if v >= 0.5 { 1.0 } else { -1.0 }).collect()
}

/// Runs the detector for `cfg.iterations` iterations from uniform beliefs.
pub fn mpd_detect(obs: &GramObservation, cfg: &MpdConfig) -> Result<BeliefState> {
    let mut det = MpdDetector::new(obs, cfg)?;
    det.run(None);
    Ok(det.into_state())
}

/// Same as [`mpd_detect`] but starting from the given beliefs.
pub fn mpd_detect_from(obs: &GramObservation, cfg: &MpdConfig, start: &[f64]) -> Result<BeliefState> {
    let mut det = MpdDetector::new(obs, cfg)?;
    det.reset_beliefs(start)?;
    det.run(None);
    Ok(det.into_state())
}

/// `J` in the layout the detector iterates over. Shared between the
/// detectors of all channel uses that see the same channel.
#[derive(Debug, Clone)]
pub struct GramKernel {
    dim: usize,
    /// Row-major `J` and elementwise `J²`.
    rows: Vec<f64>,
    rows_sq: Vec<f64>,
    diag: Vec<f64>,
}

impl GramKernel {
    pub fn new(j: &DMatrix<f64>) -> Result<Self> {
        if !j.is_square() {
            return Err(Error::Dimension("J must be square".into()));
        }
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("J"));
        }
        let dim = j.nrows();
        let mut rows = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                rows[r * dim + c] = j[(r, c)];
            }
        }
        Ok(Self {
            dim,
            rows_sq: rows.iter().map(|v| v * v).collect(),
            diag: (0..dim).map(|i| j[(i, i)]).collect(),
            rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Iteration-level access to the detector, used by the joint
/// detector-decoder and the EXIT measurements, which inject a priori LLRs
/// between iterations.
#[derive(Debug, Clone)]
pub struct MpdDetector {
    kernel: Arc<GramKernel>,
    z: Vec<f64>,
    sigma_v_sq: f64,
    cfg: MpdConfig,
    p: Vec<f64>,
    llr: Vec<f64>,
    mu: Vec<f64>,
    sigma_sq: Vec<f64>,
    /// Current Aitken window, oldest first.
    damped: Vec<Vec<f64>>,
    iteration: usize,
    last_residual: f64,
    history: Option<Vec<Vec<f64>>>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl MpdDetector {
    pub fn new(obs: &GramObservation, cfg: &MpdConfig) -> Result<Self> {
        obs.validate()?;
        Self::with_kernel(
            Arc::new(GramKernel::new(&obs.j)?),
            obs.z.as_slice(),
            obs.sigma_v_sq,
            cfg,
        )
    }

    pub fn with_kernel(kernel: Arc<GramKernel>, z: &[f64], sigma_v_sq: f64, cfg: &MpdConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = kernel.dim;
        if z.len() != dim {
            return Err(Error::Dimension("z length vs J".into()));
        }
        if !(sigma_v_sq > 0.0) || !sigma_v_sq.is_finite() {
            return Err(Error::InvalidParameter("sigma_v_sq must be finite and > 0".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("z"));
        }
        let p = vec![0.5; dim];
        Ok(Self {
            kernel,
            z: z.to_vec(),
            sigma_v_sq,
            cfg: *cfg,
            history: cfg.record_history.then(|| vec![p.clone()]),
            p,
            llr: vec![0.0; dim],
            mu: vec![0.0; dim],
            sigma_sq: vec![0.0; dim],
            damped: Vec::with_capacity(AITKEN_START),
            iteration: 0,
            last_residual: f64::INFINITY,
            mean: vec![0.0; dim],
            var: vec![0.0; dim],
        })
    }

    pub fn reset_beliefs(&mut self, start: &[f64]) -> Result<()> {
        if start.len() != self.kernel.dim {
            return Err(Error::Dimension("initial belief length".into()));
        }
        if start.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("beliefs must lie in [0, 1]".into()));
        }
        self.p.copy_from_slice(start);
        self.damped.clear();
        if let Some(h) = self.history.as_mut() {
            *h = vec![start.to_vec()];
        }
        Ok(())
    }

    /// Current messages `p^t`.
    pub fn beliefs(&self) -> &[f64] {
        &self.p
    }

    /// LLRs of the most recent iteration.
    pub fn llrs(&self) -> &[f64] {
        &self.llr
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `‖p^t - p^{t-1}‖∞` of the most recent iteration.
    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    /// Runs until the iteration budget or the convergence tolerance is hit.
    pub fn run(&mut self, prior: Option<&[f64]>) {
        for _ in 0..self.cfg.iterations {
            self.step(prior);
            if let Some(tol) = self.cfg.convergence_tol {
                if self.last_residual < tol {
                    break;
                }
            }
        }
    }

    /// Computes `μ`, `σ²` and the LLRs from the current messages without
    /// updating them.
    pub fn compute_llrs(&mut self) {
        let k = &*self.kernel;
        let dim = k.dim;
        for (j, &pj) in self.p.iter().enumerate() {
            self.mean[j] = 2.0 * pj - 1.0;
            self.var[j] = 4.0 * pj * (1.0 - pj);
        }
        for i in 0..dim {
            let row = &k.rows[i * dim..(i + 1) * dim];
            let row_sq = &k.rows_sq[i * dim..(i + 1) * dim];
            let mu = dot(row, &self.mean) - k.diag[i] * self.mean[i];
            let s = dot(row_sq, &self.var) - k.diag[i] * k.diag[i] * self.var[i];
            // Cancellation can leave a tiny negative residue when beliefs saturate.
            let sigma_sq = s.max(0.0) + self.sigma_v_sq;
            self.mu[i] = mu;
            self.sigma_sq[i] = sigma_sq;
            self.llr[i] = node_llr(k.diag[i], sigma_sq, self.z[i], mu);
        }
    }

    /// One iteration. `prior` holds a priori LLRs per symbol that are added
    /// to the detector LLR when forming the broadcast probability.
    pub fn step(&mut self, prior: Option<&[f64]>) {
        self.compute_llrs();
        let delta = self.cfg.damping;
        let mut next: Vec<f64> = (0..self.kernel.dim)
            .map(|i| {
                let l = self.llr[i] + prior.map_or(0.0, |a| a[i]);
                (1.0 - delta) * logistic(l) + delta * self.p[i]
            })
            .collect();
        if self.cfg.aitken {
            if self.damped.len() == AITKEN_START {
                self.damped.remove(0);
            }
            self.damped.push(next.clone());
            if self.damped.len() == AITKEN_START {
                next = aitken_step(&self.damped[0], &self.damped[1], &self.damped[2]);
                // Restart the window from the extrapolated point.
                self.damped.clear();
                self.damped.push(next.clone());
            }
        }
        self.last_residual = next.iter().zip(&self.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        self.p = next;
        self.iteration += 1;
        if let Some(h) = self.history.as_mut() {
            h.push(self.p.clone());
        }
    }

    pub fn state(&self) -> BeliefState {
        BeliefState {
            p: self.p.clone(),
            llr: self.llr.clone(),
            mu: self.mu.clone(),
            sigma_sq: self.sigma_sq.clone(),
            iteration: self.iteration,
            history: self.history.clone(),
        }
    }

    pub fn into_state(self) -> BeliefState {
        BeliefState {
            p: self.p,
            llr: self.llr,
            mu: self.mu,
            sigma_sq: self.sigma_sq,
            iteration: self.iteration,
            history: self.history,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}
