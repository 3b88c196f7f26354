//! Sum-product decoding with a flooding schedule.
//!
//! LLRs follow the crate convention `log P(bit = 1) / P(bit = 0)`, matching
//! the detector since bit 1 is sent as +1. Messages are kept internally in
//! the negated form so the check update is the usual tanh rule.

use super::code::LdpcCode;
use crate::error::{Error, Result};

/// Magnitude cap on variable-to-check messages.
pub const MESSAGE_CLIP: f64 = 40.0;
/// Keeps `atanh` finite when every incoming message is saturated.
const TANH_CAP: f64 = 1.0 - 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput {
    pub bits: Vec<u8>,
    pub success: bool,
    /// Iterations run; 0 when the channel decision was already a codeword.
    pub iterations: usize,
    /// A posteriori LLRs of the returned decision.
    pub posterior: Vec<f64>,
}

/// Decoder state (check-to-variable messages) that can be advanced one
/// iteration at a time and persists across calls.
#[derive(Debug, Clone)]
pub struct BpDecoder<'a> {
    code: &'a LdpcCode,
    /// Check-to-variable messages per edge, negated convention.
    c2v: Vec<f64>,
    v2c: Vec<f64>,
    fwd: Vec<f64>,
}

impl<'a> BpDecoder<'a> {
    pub fn new(code: &'a LdpcCode) -> Self {
        let e = code.edges();
        Self {
            code,
            c2v: vec![0.0; e],
            v2c: vec![0.0; e],
            fwd: Vec::new(),
        }
    }

    pub fn code(&self) -> &LdpcCode {
        self.code
    }

    pub fn reset(&mut self) {
        self.c2v.iter_mut().for_each(|m| *m = 0.0);
    }

    /// One flooding iteration with the given channel LLRs.
    pub fn iterate(&mut self, channel: &[f64]) {
        let code = self.code;
        for (v, edges) in code.var_edges.iter().enumerate() {
            let total: f64 = -channel[v] + edges.iter().map(|&e| self.c2v[e]).sum::<f64>();
            for &e in edges {
                self.v2c[e] = (total - self.c2v[e]).clamp(-MESSAGE_CLIP, MESSAGE_CLIP);
            }
        }
        for c in 0..code.m() {
            let (a, b) = (code.check_offsets[c], code.check_offsets[c + 1]);
            check_update_llr(&self.v2c[a..b], &mut self.c2v[a..b], &mut self.fwd);
        }
    }

    /// Sum of incoming check messages of variable `v`, crate convention.
    pub fn extrinsic(&self, v: usize) -> f64 {
        -self.code.var_edges[v].iter().map(|&e| self.c2v[e]).sum::<f64>()
    }

    pub fn extrinsics(&self) -> Vec<f64> {
        (0..self.code.n()).map(|v| self.extrinsic(v)).collect()
    }

    pub fn posterior(&self, channel: &[f64]) -> Vec<f64> {
        channel
            .iter()
            .enumerate()
            .map(|(v, &l)| l + self.extrinsic(v))
            .collect()
    }
}

/// Bit 1 iff the LLR is nonnegative (ties go to +1, like the detector).
pub fn hard_bits(llr: &[f64]) -> Vec<u8> {
    llr.iter().map(|&l| (l >= 0.0) as u8).collect()
}

/// Decodes `channel_llrs` with at most `max_iters` iterations, stopping as
/// soon as the hard decision satisfies every check.
pub fn bp_decode(code: &LdpcCode, channel_llrs: &[f64], max_iters: usize) -> Result<BpOutput> {
    if channel_llrs.len() != code.n() {
        return Err(Error::Dimension(format!(
            "expected {} LLRs, got {}",
            code.n(),
            channel_llrs.len()
        )));
    }
    if channel_llrs.iter().any(|l| l.is_nan()) {
        return Err(Error::NonFinite("channel LLRs"));
    }
    let mut posterior = channel_llrs.to_vec();
    let mut bits = hard_bits(&posterior);
    let mut success = code.is_codeword(&bits);
    let mut iterations = 0;
    let mut dec = BpDecoder::new(code);
    while !success && iterations < max_iters {
        dec.iterate(channel_llrs);
        iterations += 1;
        posterior = dec.posterior(channel_llrs);
        bits = hard_bits(&posterior);
        success = code.is_codeword(&bits);
    }
    assert!(!success || code.unsatisfied_checks(&bits) == 0);
    Ok(BpOutput {
        bits,
        success,
        iterations,
        posterior,
    })
}

/// Tanh rule on one check, leave-one-out by forward/backward products.
/// Inputs and outputs are `log P(0)/P(1)`.
pub(crate) fn check_update_llr(input: &[f64], out: &mut [f64], fwd: &mut Vec<f64>) {
    let d = input.len();
    fwd.clear();
    let mut acc = 1.0;
    for &m in input {
        fwd.push(acc);
        acc *= (0.5 * m).tanh();
    }
    let mut bwd = 1.0;
    for i in (0..d).rev() {
        let t = (fwd[i] * bwd).clamp(-TANH_CAP, TANH_CAP);
        out[i] = 2.0 * t.atanh();
        bwd *= (0.5 * input[i]).tanh();
    }
}

/// Probability-domain check update: `P(bit = 1)` in, extrinsic `P(bit = 1)` out.
pub fn check_update_prob(p1: &[f64]) -> Vec<f64> {
    (0..p1.len())
        .map(|i| {
            let prod: f64 = p1
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &p)| 1.0 - 2.0 * p)
                .product();
            0.5 * (1.0 - prod)
        })
        .collect()
}
