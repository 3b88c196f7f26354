//! Simulation configuration, loaded from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::MAP_MAX_DIM;
use crate::error::{Error, Result};
use crate::estimate::GramCorrection;
use crate::ldpc::{build_code, DegreeProfile, LdpcCode};
use crate::model::{SnrSpec, QPSK_SYMBOL_ENERGY};
use crate::mpd::MpdConfig;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    MpdTrueCsi,
    ChempEstimated,
    MmsePerfect,
    MmseEstimated,
    MapOracle,
}

impl Receiver {
    pub fn estimated_csi(self) -> bool {
        matches!(self, Self::ChempEstimated | Self::MmseEstimated)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::MpdTrueCsi => "mpd_true_csi",
            Self::ChempEstimated => "chemp_estimated",
            Self::MmsePerfect => "mmse_perfect",
            Self::MmseEstimated => "mmse_estimated",
            Self::MapOracle => "map_oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Uncoded,
    Coded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizedProfile {
    Alpha1,
    AlphaHalf,
    AlphaEighth,
}

impl OptimizedProfile {
    pub fn profile(self) -> DegreeProfile {
        match self {
            Self::Alpha1 => DegreeProfile::optimized_alpha_1(),
            Self::AlphaHalf => DegreeProfile::optimized_alpha_half(),
            Self::AlphaEighth => DegreeProfile::optimized_alpha_eighth(),
        }
    }
}

/// Which LDPC code every user encodes with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CodeSelection {
    Optimized {
        profile: OptimizedProfile,
        block_length: usize,
        construction_seed: u64,
    },
    Regular {
        dv: usize,
        dc: usize,
        block_length: usize,
        construction_seed: u64,
    },
    /// Parity-check matrix in alist format; relative paths resolve against
    /// the working directory.
    Alist { path: PathBuf },
}

impl CodeSelection {
    pub fn build(&self) -> Result<LdpcCode> {
        match self {
            Self::Optimized {
                profile,
                block_length,
                construction_seed,
            } => build_code(&profile.profile(), *block_length, &mut seeded(*construction_seed)),
            Self::Regular {
                dv,
                dc,
                block_length,
                construction_seed,
            } => build_code(
                &DegreeProfile::regular(*dv, *dc)?,
                *block_length,
                &mut seeded(*construction_seed),
            ),
            Self::Alist { path } => LdpcCode::from_alist(&std::fs::read_to_string(path)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Joint,
    Separate,
}

/// Iteration budget of the coded receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodedReceiver {
    pub scheme: Scheme,
    pub detector_iterations: usize,
    pub decoder_iterations: usize,
    pub outer_iterations: usize,
}

impl Default for CodedReceiver {
    fn default() -> Self {
        Self {
            scheme: Scheme::Joint,
            detector_iterations: 1,
            decoder_iterations: 2,
            outer_iterations: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub snr_db: Vec<f64>,
    /// Upper bound on trials (frames) per SNR point.
    pub max_trials: u64,
    /// A point stops once this many bit errors are collected.
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    pub receiver: Receiver,
    #[serde(default)]
    pub mpd: MpdConfig,
    /// Channel uses per coherence frame, pilots included. Required for the
    /// estimated-CSI receivers; defaults to `K + 1` (one data use per
    /// channel draw) otherwise.
    #[serde(default)]
    pub frame_length: Option<usize>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub code: Option<CodeSelection>,
    #[serde(default)]
    pub coded_receiver: CodedReceiver,
    #[serde(default)]
    pub correction: GramCorrection,
    #[serde(default = "default_symbol_energy")]
    pub symbol_energy: f64,
    /// Trials run between stopping checks. Part of the result's identity:
    /// changing it can change where a point stops.
    #[serde(default = "default_batch_size")]
    pub batch_size: u64,
    pub seed: u64,
}

fn default_target_errors() -> u64 {
    100
}

fn default_symbol_energy() -> f64 {
    QPSK_SYMBOL_ENERGY
}

fn default_batch_size() -> u64 {
    16
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 || self.k > self.n {
            return bad(format!("need 1 <= K <= N, got N = {}, K = {}", self.n, self.k));
        }
        if self.max_trials == 0 {
            return bad("max_trials must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.snr_db.is_empty() {
            return bad("empty SNR grid".into());
        }
        for &s in &self.snr_db {
            SnrSpec::with_energy(s, self.symbol_energy).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.mpd.validate().map_err(|e| Error::Config(e.to_string()))?;
        match self.frame_length {
            Some(l) if l <= self.k => {
                return bad(format!("frame length {l} leaves no data uses after {} pilots", self.k));
            }
            None if self.receiver.estimated_csi() => {
                return bad(format!("{} needs frame_length > K", self.receiver.name()));
            }
            _ => {}
        }
        if self.receiver == Receiver::MapOracle && 2 * self.k > MAP_MAX_DIM {
            return bad(format!("map_oracle supports 2K <= {MAP_MAX_DIM}"));
        }
        if self.mode == Mode::Coded {
            if !matches!(self.receiver, Receiver::MpdTrueCsi | Receiver::ChempEstimated) {
                return bad(format!(
                    "coded mode supports mpd_true_csi and chemp_estimated, not {}",
                    self.receiver.name()
                ));
            }
            if self.code.is_none() {
                return bad("coded mode needs a code selection".into());
            }
            let r = &self.coded_receiver;
            if r.detector_iterations == 0 || r.outer_iterations == 0 {
                return bad("detector and outer iterations must be >= 1".into());
            }
        }
        Ok(())
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length.unwrap_or(self.k + 1)
    }

    /// Data channel uses per coherence frame.
    pub fn data_uses(&self) -> usize {
        self.frame_length() - self.k
    }

    pub fn snr(&self, point: usize) -> Result<SnrSpec> {
        SnrSpec::with_energy(self.snr_db[point], self.symbol_energy)
    }
}
