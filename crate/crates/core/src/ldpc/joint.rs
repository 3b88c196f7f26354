//! Joint detector-decoder on a single graph of observation, coded-bit and
//! check nodes, and the separate detect-then-decode reference.
//!
//! Each user's codeword of `n` bits occupies `n/2` channel uses. In channel
//! use `m'` (1-based) the real part of a user's symbol carries coded bit
//! `2m'` and the imaginary part carries bit `2m' - 1`, so observation node
//! `i` of a channel use only talks to one coded bit of one user.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::bp::{bp_decode, hard_bits, BpDecoder};
use super::code::LdpcCode;
use crate::error::{Error, Result};
use crate::mpd::{hard_decision_probs, GramKernel, GramObservation, MpdConfig, MpdDetector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointGraphConfig {
    /// Detector iterations per outer iteration.
    pub detector_iterations: usize,
    /// Decoder iterations per outer iteration. Zero leaves the detector alone.
    pub decoder_iterations: usize,
    pub outer_iterations: usize,
    /// Code block length.
    pub n: usize,
    pub users: usize,
}

impl Default for JointGraphConfig {
    fn default() -> Self {
        Self {
            detector_iterations: 1,
            decoder_iterations: 2,
            outer_iterations: 20,
            n: 1000,
            users: 1,
        }
    }
}

impl JointGraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.detector_iterations == 0 || self.outer_iterations == 0 {
            return Err(Error::InvalidParameter(
                "detector and outer iterations must be >= 1".into(),
            ));
        }
        if self.n == 0 || self.n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("block length {} must be even", self.n)));
        }
        if self.users == 0 {
            return Err(Error::InvalidParameter("users must be >= 1".into()));
        }
        Ok(())
    }

    pub fn channel_uses(&self) -> usize {
        self.n / 2
    }
}

/// Gram-domain observation of one channel use with a possibly shared `J`.
#[derive(Debug, Clone)]
pub struct ChannelUse {
    pub kernel: Arc<GramKernel>,
    pub z: Vec<f64>,
    pub sigma_v_sq: f64,
}

impl ChannelUse {
    pub fn from_observation(obs: &GramObservation) -> Result<Self> {
        obs.validate()?;
        Ok(Self {
            kernel: Arc::new(GramKernel::new(&obs.j)?),
            z: obs.z.iter().copied().collect(),
            sigma_v_sq: obs.sigma_v_sq,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOutput {
    pub codewords: Vec<Vec<u8>>,
    pub info: Vec<Vec<u8>>,
    /// Whether each user's decision satisfies all of its checks.
    pub valid: Vec<bool>,
    pub outer_iterations: usize,
}

/// Coded-bit index (0-based) carried by real component `i` of channel use `t`
/// (0-based), for `K` users. Real parts carry bit `2t + 1`, imaginary parts `2t`.
pub fn bit_index(i: usize, t: usize, k: usize) -> (usize, usize) {
    if i < k {
        (i, 2 * t + 1)
    } else {
        (i - k, 2 * t)
    }
}

/// Real-stacked symbol vector of channel use `t`.
pub fn symbols_for_use(codewords: &[Vec<u8>], t: usize) -> DVector<f64> {
    let k = codewords.len();
    DVector::from_fn(2 * k, |i, _| {
        let (u, b) = bit_index(i, t, k);
        if codewords[u][b] == 1 {
            1.0
        } else {
            -1.0
        }
    })
}

fn check_frame(uses: &[ChannelUse], codes: &[&LdpcCode], cfg: &JointGraphConfig) -> Result<()> {
    cfg.validate()?;
    if codes.len() != cfg.users {
        return Err(Error::Dimension(format!(
            "{} codes for {} users",
            codes.len(),
            cfg.users
        )));
    }
    if let Some(c) = codes.iter().find(|c| c.n() != cfg.n) {
        return Err(Error::Dimension(format!(
            "code length {} vs block length {}",
            c.n(),
            cfg.n
        )));
    }
    if uses.len() != cfg.channel_uses() {
        return Err(Error::Dimension(format!(
            "{} channel uses for a block of {} bits",
            uses.len(),
            cfg.n
        )));
    }
    if let Some(u) = uses
        .iter()
        .find(|u| u.kernel.dim() != 2 * cfg.users || u.z.len() != 2 * cfg.users)
    {
        return Err(Error::Dimension(format!("channel use of dimension {}", u.z.len())));
    }
    Ok(())
}

/// Convenience wrapper over [`joint_detect_decode_uses`] for plain observations.
pub fn joint_detect_decode(
    observations: &[GramObservation],
    codes: &[&LdpcCode],
    cfg: &JointGraphConfig,
    mpd: &MpdConfig,
) -> Result<JointOutput> {
    let uses = observations
        .iter()
        .map(ChannelUse::from_observation)
        .collect::<Result<Vec<_>>>()?;
    joint_detect_decode_uses(&uses, codes, cfg, mpd)
}

/// Iterates detector and decoder jointly.
///
/// Per outer iteration every channel use runs `detector_iterations`
/// detector iterations with the decoder extrinsic LLRs as symbol priors;
/// the detector LLRs are the observation-to-bit messages, and each user's
/// decoder then runs `decoder_iterations` flooding iterations with its check
/// messages kept from the previous outer iteration. Stops early once every
/// user's posterior decision is a codeword.
pub fn joint_detect_decode_uses(
    uses: &[ChannelUse],
    codes: &[&LdpcCode],
    cfg: &JointGraphConfig,
    mpd: &MpdConfig,
) -> Result<JointOutput> {
    check_frame(uses, codes, cfg)?;
    let k = cfg.users;
    let mut dets = uses
        .iter()
        .map(|u| MpdDetector::with_kernel(u.kernel.clone(), &u.z, u.sigma_v_sq, mpd))
        .collect::<Result<Vec<_>>>()?;
    let mut decs: Vec<BpDecoder> = codes.iter().map(|c| BpDecoder::new(c)).collect();
    let mut channel = vec![vec![0.0; cfg.n]; k];
    let mut priors = vec![vec![0.0; 2 * k]; uses.len()];
    let mut decided: Option<Vec<Vec<u8>>> = None;
    let mut outer = 0;

    while outer < cfg.outer_iterations {
        outer += 1;
        for (t, det) in dets.iter_mut().enumerate() {
            for _ in 0..cfg.detector_iterations {
                det.step(Some(&priors[t]));
            }
            for (i, &l) in det.llrs().iter().enumerate() {
                let (u, b) = bit_index(i, t, k);
                channel[u][b] = l;
            }
        }
        if cfg.decoder_iterations == 0 {
            continue;
        }
        let mut words = Vec::with_capacity(k);
        for (dec, ch) in decs.iter_mut().zip(&channel) {
            for _ in 0..cfg.decoder_iterations {
                dec.iterate(ch);
            }
            words.push(hard_bits(&dec.posterior(ch)));
        }
        for (t, prior) in priors.iter_mut().enumerate() {
            for (i, a) in prior.iter_mut().enumerate() {
                let (u, b) = bit_index(i, t, k);
                *a = decs[u].extrinsic(b);
            }
        }
        let done = words.iter().zip(codes).all(|(w, c)| c.is_codeword(w));
        decided = Some(words);
        if done {
            break;
        }
    }

    // Without decoding the result is the detector's own hard decision.
    let codewords = decided.unwrap_or_else(|| {
        let mut w = vec![vec![0u8; cfg.n]; k];
        for (t, det) in dets.iter().enumerate() {
            for (i, x) in hard_decision_probs(det.beliefs()).into_iter().enumerate() {
                let (u, b) = bit_index(i, t, k);
                w[u][b] = (x > 0.0) as u8;
            }
        }
        w
    });
    Ok(finish(codewords, codes, outer))
}

fn finish(codewords: Vec<Vec<u8>>, codes: &[&LdpcCode], outer: usize) -> JointOutput {
    JointOutput {
        info: codewords.iter().zip(codes).map(|(w, c)| c.extract_info(w)).collect(),
        valid: codewords.iter().zip(codes).map(|(w, c)| c.is_codeword(w)).collect(),
        codewords,
        outer_iterations: outer,
    }
}

/// Detect-then-decode with the same budget: `outer × detector_iterations`
/// detector iterations per channel use, then `outer × decoder_iterations`
/// decoder iterations on the final detector LLRs.
pub fn separate_detect_decode(
    uses: &[ChannelUse],
    codes: &[&LdpcCode],
    cfg: &JointGraphConfig,
    mpd: &MpdConfig,
) -> Result<JointOutput> {
    check_frame(uses, codes, cfg)?;
    let k = cfg.users;
    let det_cfg = MpdConfig {
        iterations: cfg.outer_iterations * cfg.detector_iterations,
        ..*mpd
    };
    let mut channel = vec![vec![0.0; cfg.n]; k];
    for (t, u) in uses.iter().enumerate() {
        let mut det = MpdDetector::with_kernel(u.kernel.clone(), &u.z, u.sigma_v_sq, &det_cfg)?;
        det.run(None);
        for (i, &l) in det.llrs().iter().enumerate() {
            let (user, b) = bit_index(i, t, k);
            channel[user][b] = l;
        }
    }
    let iters = cfg.outer_iterations * cfg.decoder_iterations;
    let codewords = channel
        .iter()
        .zip(codes)
        .map(|(ch, c)| bp_decode(c, ch, iters).map(|o| o.bits))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(codewords, codes, cfg.outer_iterations))
}
