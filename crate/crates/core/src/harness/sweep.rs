//! Monte Carlo SNR sweeps.
//!
//! Each trial is one coherence frame (uncoded) or one code frame (coded) and
//! draws everything from `stream(seed, point, trial)`. Trials run in
//! fixed-size batches; the stopping rule is checked between batches, so the
//! trial count and every count in the result are independent of how many
//! threads execute a batch.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::config::{Mode, Receiver, Scheme, SimConfig};
use super::results::{BerCurve, Provenance, TrialRecord};
use crate::baseline::{map_oracle, mmse_detect};
use crate::error::{Error, Result};
use crate::estimate::{mmse_channel_error_var, mmse_channel_estimate, receive_pilots, ChempFrontEnd};
use crate::ldpc::joint::symbols_for_use;
use crate::ldpc::{joint_detect_decode_uses, separate_detect_decode, ChannelUse, JointGraphConfig, LdpcCode};
use crate::model::{generate_channel, modulate, to_real, transmit_with_noise_var, ComplexChannel};
use crate::mpd::{effective_noise_var, hard_decision_probs, GramKernel, MpdDetector};
use crate::rng::{stream, SimRng};

/// Error counts of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub bits: u64,
    pub errors: u64,
    /// Codewords and erroneous codewords (coded mode only).
    pub blocks: u64,
    pub block_errors: u64,
    /// Outer receiver iterations spent (coded mode only).
    pub outer_iterations: u64,
}

impl std::ops::AddAssign for TrialOutcome {
    fn add_assign(&mut self, o: Self) {
        self.bits += o.bits;
        self.errors += o.errors;
        self.blocks += o.blocks;
        self.block_errors += o.block_errors;
        self.outer_iterations += o.outer_iterations;
    }
}

/// Runs the sweep selected by `cfg.mode`.
pub fn run_sweep(cfg: &SimConfig) -> Result<BerCurve> {
    match cfg.mode {
        Mode::Uncoded => run_uncoded_sweep(cfg),
        Mode::Coded => run_coded_sweep(cfg),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        b = b.num_threads(w);
    }
    let pool = b.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn run_uncoded_sweep(cfg: &SimConfig) -> Result<BerCurve> {
    cfg.validate()?;
    if cfg.mode != Mode::Uncoded {
        return Err(Error::Config("run_uncoded_sweep needs mode = uncoded".into()));
    }
    sweep(cfg, |p, t| uncoded_trial(cfg, p, t))
}

pub fn run_coded_sweep(cfg: &SimConfig) -> Result<BerCurve> {
    cfg.validate()?;
    if cfg.mode != Mode::Coded {
        return Err(Error::Config("run_coded_sweep needs mode = coded".into()));
    }
    let code = cfg.code.as_ref().expect("validated").build()?;
    check_code(&code)?;
    sweep(cfg, |p, t| coded_trial(cfg, &code, p, t))
}

fn check_code(code: &LdpcCode) -> Result<()> {
    if code.n() % 2 != 0 {
        return Err(Error::Config(format!("block length {} must be even", code.n())));
    }
    Ok(())
}

fn sweep(cfg: &SimConfig, trial: impl Fn(usize, u64) -> Result<TrialOutcome> + Sync) -> Result<BerCurve> {
    let mut points = Vec::with_capacity(cfg.snr_db.len());
    for (p, &snr_db) in cfg.snr_db.iter().enumerate() {
        let mut acc = TrialOutcome::default();
        let mut done = 0u64;
        while done < cfg.max_trials && acc.errors < cfg.target_errors {
            let end = (done + cfg.batch_size).min(cfg.max_trials);
            let batch: Vec<TrialOutcome> = (done..end)
                .into_par_iter()
                .map(|t| trial(p, t))
                .collect::<Result<_>>()?;
            batch.into_iter().for_each(|o| acc += o);
            done = end;
        }
        let rec = TrialRecord::new(snr_db, acc.bits, acc.errors, done);
        points.push(match cfg.mode {
            Mode::Coded => rec.with_frames(acc.blocks, acc.block_errors),
            Mode::Uncoded => rec,
        });
    }
    Ok(BerCurve {
        points,
        provenance: Provenance::new(cfg),
    })
}

/// Receiver-side view of one coherence frame.
enum Front {
    Perfect {
        h: DMatrix<f64>,
        kernel: Option<Arc<GramKernel>>,
    },
    Chemp {
        front: ChempFrontEnd,
        kernel: Arc<GramKernel>,
    },
    Mmse {
        h_hat: DMatrix<f64>,
        noise_var: f64,
    },
}

fn draw_frame(cfg: &SimConfig, noise_var: f64, rng: &mut SimRng) -> Result<(DMatrix<f64>, Front)> {
    let hc: ComplexChannel = generate_channel(cfg.n, cfg.k, &vec![1.0; cfg.k], rng)?;
    let h = to_real(&hc);
    let front = match cfg.receiver {
        Receiver::MpdTrueCsi => {
            let j = h.tr_mul(&h) / cfg.n as f64;
            Front::Perfect {
                h: h.clone(),
                kernel: Some(Arc::new(GramKernel::new(&j)?)),
            }
        }
        Receiver::MmsePerfect | Receiver::MapOracle => Front::Perfect {
            h: h.clone(),
            kernel: None,
        },
        Receiver::ChempEstimated => {
            let front = ChempFrontEnd::new(receive_pilots(&hc, cfg.symbol_energy, noise_var, rng)?, cfg.correction);
            let kernel = Arc::new(GramKernel::new(front.j_hat())?);
            Front::Chemp { front, kernel }
        }
        Receiver::MmseEstimated => {
            let pilots = receive_pilots(&hc, cfg.symbol_energy, noise_var, rng)?;
            // Channel estimation error acts as extra noise of variance 2K σ_e² per row.
            let e = mmse_channel_error_var(pilots.p, noise_var);
            Front::Mmse {
                h_hat: mmse_channel_estimate(&pilots),
                noise_var: noise_var + 2.0 * cfg.k as f64 * e,
            }
        }
    };
    Ok((h, front))
}

/// Gram-domain channel use for the MPD-based receivers.
fn gram_use(cfg: &SimConfig, front: &Front, y: &DVector<f64>, noise_var: f64) -> Result<ChannelUse> {
    match front {
        Front::Perfect {
            h,
            kernel: Some(kernel),
        } => Ok(ChannelUse {
            kernel: kernel.clone(),
            z: (h.tr_mul(y) / cfg.n as f64).iter().copied().collect(),
            sigma_v_sq: effective_noise_var(noise_var, cfg.n),
        }),
        Front::Chemp { front, kernel } => {
            let obs = front.observe(y)?;
            Ok(ChannelUse {
                kernel: kernel.clone(),
                z: obs.z.iter().copied().collect(),
                sigma_v_sq: obs.sigma_v_sq,
            })
        }
        _ => Err(Error::Config(format!(
            "{} has no Gram-domain front end",
            cfg.receiver.name()
        ))),
    }
}

fn detect(cfg: &SimConfig, front: &Front, y: &DVector<f64>, noise_var: f64) -> Result<Vec<f64>> {
    match (cfg.receiver, front) {
        (Receiver::MmsePerfect, Front::Perfect { h, .. }) => Ok(mmse_detect(h, y, noise_var)?.decisions),
        (Receiver::MapOracle, Front::Perfect { h, .. }) => map_oracle(h, y),
        (_, Front::Mmse { h_hat, noise_var }) => Ok(mmse_detect(h_hat, y, *noise_var)?.decisions),
        _ => {
            let u = gram_use(cfg, front, y, noise_var)?;
            let mut det = MpdDetector::with_kernel(u.kernel, &u.z, u.sigma_v_sq, &cfg.mpd)?;
            det.run(None);
            Ok(hard_decision_probs(det.beliefs()))
        }
    }
}

/// One uncoded coherence frame: a channel draw, pilots when the receiver
/// estimates, then `L_f - K` data channel uses.
pub fn uncoded_trial(cfg: &SimConfig, point: usize, trial: u64) -> Result<TrialOutcome> {
    let mut rng = stream(cfg.seed, point as u64, trial);
    let noise_var = cfg.snr(point)?.noise_var(cfg.k);
    let (h, front) = draw_frame(cfg, noise_var, &mut rng)?;
    let mut out = TrialOutcome::default();
    for _ in 0..cfg.data_uses() {
        let bits: Vec<u8> = (0..2 * cfg.k).map(|_| rng.random_range(0..2u8)).collect();
        let x = modulate(&bits);
        let y = transmit_with_noise_var(&h, &x, noise_var, &mut rng)?;
        let xh = detect(cfg, &front, &y, noise_var)?;
        out.bits += x.len() as u64;
        out.errors += xh.iter().zip(x.iter()).filter(|(a, b)| a != b).count() as u64;
    }
    Ok(out)
}

/// One coded frame: every user sends one codeword over `n/2` channel uses
/// under block fading with `L_f - K` data uses per channel draw.
pub fn coded_trial(cfg: &SimConfig, code: &LdpcCode, point: usize, trial: u64) -> Result<TrialOutcome> {
    let mut rng = stream(cfg.seed, point as u64, trial);
    let noise_var = cfg.snr(point)?.noise_var(cfg.k);
    let info: Vec<Vec<u8>> = (0..cfg.k)
        .map(|_| (0..code.k()).map(|_| rng.random_range(0..2u8)).collect())
        .collect();
    let codewords = info.iter().map(|i| code.encode(i)).collect::<Result<Vec<_>>>()?;
    let total = code.n() / 2;
    let mut uses = Vec::with_capacity(total);
    while uses.len() < total {
        let (h, front) = draw_frame(cfg, noise_var, &mut rng)?;
        for _ in 0..cfg.data_uses().min(total - uses.len()) {
            let x = symbols_for_use(&codewords, uses.len());
            let y = transmit_with_noise_var(&h, &x, noise_var, &mut rng)?;
            uses.push(gram_use(cfg, &front, &y, noise_var)?);
        }
    }
    let r = &cfg.coded_receiver;
    let graph = JointGraphConfig {
        detector_iterations: r.detector_iterations,
        decoder_iterations: r.decoder_iterations,
        outer_iterations: r.outer_iterations,
        n: code.n(),
        users: cfg.k,
    };
    let codes = vec![code; cfg.k];
    let decoded = match r.scheme {
        Scheme::Joint => joint_detect_decode_uses(&uses, &codes, &graph, &cfg.mpd)?,
        Scheme::Separate => separate_detect_decode(&uses, &codes, &graph, &cfg.mpd)?,
    };
    let mut out = TrialOutcome {
        outer_iterations: decoded.outer_iterations as u64,
        ..TrialOutcome::default()
    };
    for (sent, got) in info.iter().zip(&decoded.info) {
        let e = sent.iter().zip(got).filter(|(a, b)| a != b).count() as u64;
        out.bits += sent.len() as u64;
        out.errors += e;
        out.blocks += 1;
        out.block_errors += (e > 0) as u64;
    }
    Ok(out)
}
