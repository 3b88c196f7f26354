//! Analytic real-operation counts of the detector and the MMSE baseline.
//!
//! One multiplication or one addition counts as one operation. With
//! `m = 2N` real receive dimensions and `d = 2K` real symbols:
//!
//! * MPD: `J = HᵀH/N` exploiting symmetry, `d(d+1)/2 · 2m`; `z = Hᵀy/N`,
//!   `2md`; per iteration `4d²` for the interference means and variances
//!   plus `MPD_PER_NODE` per symbol (LLR, logistic, damping).
//! * MMSE: the same Gram and matched-filter products, `d` additions for the
//!   regularization, Gauss-Jordan inversion `2d³` and the final
//!   matrix-vector product `2d²`.

use serde::{Deserialize, Serialize};

/// Per-symbol scalar work of one MPD iteration besides the dot products.
pub const MPD_PER_NODE: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpReceiver {
    Mpd,
    Mmse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpTerm {
    pub name: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub receiver: OpReceiver,
    pub n: usize,
    pub k: usize,
    pub iterations: usize,
    pub total: u64,
    pub terms: Vec<OpTerm>,
    pub model: String,
}

pub fn count_operations(receiver: OpReceiver, n: usize, k: usize, iterations: usize) -> OpCount {
    let m = 2 * n as u64;
    let d = 2 * k as u64;
    let gram = d * (d + 1) / 2 * 2 * m;
    let mf = 2 * m * d;
    let mut terms = vec![term("gram", gram), term("matched_filter", mf)];
    let model = match receiver {
        OpReceiver::Mpd => {
            terms.push(term("iterations", iterations as u64 * (4 * d * d + MPD_PER_NODE * d)));
            "J: d(d+1)/2*2m, z: 2md, per iteration: 4d^2 + 10d (m = 2N, d = 2K)"
        }
        OpReceiver::Mmse => {
            terms.push(term("regularization", d));
            terms.push(term("inversion", 2 * d * d * d));
            terms.push(term("solve", 2 * d * d));
            "gram: d(d+1)/2*2m, H^T y: 2md, +sigma^2 I: d, Gauss-Jordan inverse: 2d^3, product: 2d^2 (m = 2N, d = 2K)"
        }
    };
    OpCount {
        receiver,
        n,
        k,
        iterations,
        total: terms.iter().map(|t| t.count).sum(),
        terms,
        model: model.to_string(),
    }
}

fn term(name: &str, count: u64) -> OpTerm {
    OpTerm {
        name: name.to_string(),
        count,
    }
}
