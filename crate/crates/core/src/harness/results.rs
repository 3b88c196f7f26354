//! Per-point records, provenance and CSV/JSON persistence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::SimConfig;
use crate::error::Result;

/// Points with fewer errors than this are flagged unreliable.
pub const RELIABLE_ERRORS: u64 = 10;
const Z_95: f64 = 1.959_963_984_540_054;

/// Half-width of the normal-approximation 95% interval of a binomial proportion.
pub fn binomial_halfwidth(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let p = errors as f64 / trials as f64;
    Z_95 * (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    /// Codewords simulated (frames times users).
    pub blocks: u64,
    pub block_errors: u64,
    pub fer: f64,
}

/// Result of one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
    pub unreliable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameStats>,
}

impl TrialRecord {
    pub fn new(snr_db: f64, bits: u64, errors: u64, trials: u64) -> Self {
        debug_assert!(errors <= bits);
        Self {
            snr_db,
            bits,
            errors,
            ber: if bits == 0 { 0.0 } else { errors as f64 / bits as f64 },
            ci_halfwidth: binomial_halfwidth(errors, bits),
            trials,
            unreliable: errors < RELIABLE_ERRORS,
            frames: None,
        }
    }

    pub fn with_frames(mut self, blocks: u64, block_errors: u64) -> Self {
        self.frames = Some(FrameStats {
            blocks,
            block_errors,
            fer: if blocks == 0 {
                0.0
            } else {
                block_errors as f64 / blocks as f64
            },
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the compact JSON form of the config.
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub config: SimConfig,
}

impl Provenance {
    pub fn new(cfg: &SimConfig) -> Self {
        Self {
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
        }
    }
}

pub fn config_hash(cfg: &SimConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub points: Vec<TrialRecord>,
    pub provenance: Provenance,
}

impl BerCurve {
    pub fn to_csv(&self) -> String {
        let coded = self.points.iter().any(|p| p.frames.is_some());
        let mut out = String::from("snr_db,bits,errors,ber,ci_halfwidth,trials,unreliable");
        if coded {
            out.push_str(",blocks,block_errors,fer");
        }
        out.push('\n');
        for p in &self.points {
            let _ = write!(
                out,
                "{},{},{},{:e},{:e},{},{}",
                p.snr_db, p.bits, p.errors, p.ber, p.ci_halfwidth, p.trials, p.unreliable
            );
            if let Some(f) = p.frames {
                let _ = write!(out, ",{},{},{:e}", f.blocks, f.block_errors, f.fer);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`, creating it.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json())?;
        Ok((csv, json))
    }
}
