//! `chemp` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 when a
//! run fails. Flat flags override fields of a `--config` file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chemp::analysis::{
    convergence_condition, fixed_point_residuals, iterations_to_converge, llr_mse_empirical, LlrMseConfig, LlrReference,
};
use chemp::estimate::GramCorrection;
use chemp::hardening::{gram, hardening_report, mp_distance, normalized_eigenvalues, spectrum_histogram};
use chemp::harness::{count_operations, run_sweep, with_workers, Mode, OpReceiver, SimConfig};
use chemp::ldpc::exit::{measure_exit_detector, ExitConfig};
use chemp::ldpc::{build_code, DegreeProfile};
use chemp::model::{generate_channel, to_real};
use chemp::mpd::{matched_filter, MpdDetector};
use chemp::rng::{seeded, stream};
use chemp::{MpdConfig, RealSystemInstance, SnrSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "chemp",
    version,
    about = "Message passing detection experiments for large MU-MIMO uplinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory (file for code-build); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "CHEMP_SEED", default_value_t = 1)]
    seed: u64,
    /// Parallel workers [default: available cores].
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Clone)]
struct SweepCommon {
    /// Output directory for ber.csv and ber.json; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, env = "CHEMP_SEED")]
    seed: Option<u64>,
    /// Parallel workers [default: available cores].
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Clone)]
struct Detector {
    /// Detector iterations.
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Damping factor Δ.
    #[arg(long, default_value_t = 0.33)]
    damping: f64,
    /// Enable Aitken extrapolation.
    #[arg(long)]
    aitken: bool,
}

impl Detector {
    fn config(&self) -> MpdConfig {
        MpdConfig {
            iterations: self.iterations,
            damping: self.damping,
            aitken: self.aitken,
            ..MpdConfig::default()
        }
    }
}

#[derive(Args, Clone)]
struct Sweep {
    /// SimConfig JSON file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: SweepCommon,
    /// Override: receive antennas N.
    #[arg(long)]
    n: Option<usize>,
    /// Override: users K.
    #[arg(long)]
    k: Option<usize>,
    /// Override: SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    /// Override: maximum trials per point.
    #[arg(long)]
    trials: Option<u64>,
    /// Override: detector iterations [config default: 20].
    #[arg(long)]
    iterations: Option<usize>,
    /// Override: damping factor Δ [config default: 0.33].
    #[arg(long)]
    damping: Option<f64>,
    /// Override: enable Aitken extrapolation.
    #[arg(long)]
    aitken: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Alpha1,
    AlphaHalf,
    AlphaEighth,
    Regular,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    Effective,
    Perfect,
}

#[derive(Subcommand)]
enum Command {
    /// Uncoded BER sweep from a SimConfig file.
    Uncoded(Sweep),
    /// Coded BER/FER sweep from a SimConfig file.
    Coded(Sweep),
    /// Diagonal mean and off-diagonal RMS of HᵀH/N against N.
    Hardening {
        /// Antenna counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
        n: Vec<usize>,
        /// Loading factor K/N.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Channel realizations.
        #[arg(long, default_value_t = 100)]
        realizations: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalue histogram of HᴴH/N against the Marčenko-Pastur density.
    MpLaw {
        /// Receive antennas N.
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Loading factor K/N.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Channel realizations.
        #[arg(long, default_value_t = 1)]
        realizations: usize,
        /// Histogram bins.
        #[arg(long, default_value_t = 32)]
        bins: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Detector EXIT curve.
    Exit {
        /// Receive antennas N.
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Users K.
        #[arg(long, default_value_t = 32)]
        k: usize,
        /// SNR in dB.
        #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
        snr: f64,
        /// A priori mutual information values, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,0.95")]
        ia: Vec<f64>,
        /// LLR samples per point.
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        #[command(flatten)]
        detector: Detector,
        #[command(flatten)]
        common: Common,
    },
    /// Per-trial convergence condition and iterations to settle.
    Convergence {
        /// Receive antennas N.
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Users K.
        #[arg(long, default_value_t = 64)]
        k: usize,
        /// SNR in dB.
        #[arg(long, default_value_t = 12.0, allow_negative_numbers = true)]
        snr: f64,
        /// Channel realizations.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Residual threshold on max |p^t - p^(t-1)|.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        detector: Detector,
        #[command(flatten)]
        common: Common,
    },
    /// First-iteration LLR MSE of the estimated-CSI receiver and its bound.
    LlrMse {
        /// Receive antennas N.
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Users K.
        #[arg(long, default_value_t = 64)]
        k: usize,
        /// SNR grid in dB, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "8,10,12",
            allow_negative_numbers = true
        )]
        snr: Vec<f64>,
        /// Channel realizations.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Receiver the estimated-CSI LLRs are compared with.
        #[arg(long, value_enum, default_value_t = ReferenceArg::Effective)]
        reference: ReferenceArg,
        #[command(flatten)]
        common: Common,
    },
    /// Real-operation counts of MPD and MMSE.
    Opcount {
        /// Receive antennas N.
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Users K.
        #[arg(long, default_value_t = 128)]
        k: usize,
        /// MPD iterations.
        #[arg(long, default_value_t = 20)]
        iters: usize,
        /// Output directory for opcount.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds an LDPC code and writes its parity-check matrix as alist.
    CodeBuild {
        #[arg(long, value_enum, default_value_t = ProfileArg::Alpha1)]
        profile: ProfileArg,
        /// Variable degree of the regular profile.
        #[arg(long, default_value_t = 3)]
        dv: usize,
        /// Check degree of the regular profile.
        #[arg(long, default_value_t = 6)]
        dc: usize,
        /// Block length.
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use chemp::Error as E;
    match e.downcast_ref::<E>() {
        Some(
            E::Config(_)
            | E::InvalidParameter(_)
            | E::Dimension(_)
            | E::TooLarge(_)
            | E::InfeasibleProfile(_)
            | E::Alist { .. }
            | E::Json(_),
        ) => 1,
        _ => 2,
    }
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    chemp::Error::Config(msg.into()).into()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Uncoded(s) => sweep(s, Mode::Uncoded),
        Command::Coded(s) => sweep(s, Mode::Coded),
        Command::Hardening {
            n,
            alpha,
            realizations,
            common,
        } => parallel(&common, || hardening(&n, alpha, realizations, &common)),
        Command::MpLaw {
            n,
            alpha,
            realizations,
            bins,
            common,
        } => mp_law(n, alpha, realizations, bins, &common),
        Command::Exit {
            n,
            k,
            snr,
            ia,
            samples,
            detector,
            common,
        } => parallel(&common, || {
            let points = measure_exit_detector(&ExitConfig {
                n,
                k,
                snr_db: snr,
                i_a: ia,
                samples,
                seed: common.seed,
                mpd: detector.config(),
                bins: 64,
            })?;
            let mut csv = String::from("i_a,i_e,snr_db\n");
            for p in points {
                writeln!(csv, "{},{},{}", p.i_a, p.i_e, p.snr_db)?;
            }
            emit(common.out.as_deref(), "exit.csv", &csv)
        }),
        Command::Convergence {
            n,
            k,
            snr,
            trials,
            tol,
            detector,
            common,
        } => convergence(n, k, snr, trials, tol, &detector, &common),
        Command::LlrMse {
            n,
            k,
            snr,
            trials,
            reference,
            common,
        } => parallel(&common, || {
            let points = llr_mse_empirical(&LlrMseConfig {
                n,
                k,
                snr_db: snr,
                trials,
                seed: common.seed,
                correction: GramCorrection::default(),
                reference: match reference {
                    ReferenceArg::Effective => LlrReference::Effective,
                    ReferenceArg::Perfect => LlrReference::Perfect,
                },
            })?;
            let mut csv = String::from("snr_db,mse_empirical,mse_bound\n");
            for p in points {
                writeln!(csv, "{},{:e},{:e}", p.snr_db, p.mse_empirical, p.mse_bound)?;
            }
            emit(common.out.as_deref(), "llr_mse.csv", &csv)
        }),
        Command::Opcount { n, k, iters, out } => {
            if k == 0 || k > n {
                return Err(config_error(format!("need 1 <= K <= N, got N = {n}, K = {k}")));
            }
            let mpd = count_operations(OpReceiver::Mpd, n, k, iters);
            let mmse = count_operations(OpReceiver::Mmse, n, k, iters);
            let ratio = mpd.total as f64 / mmse.total as f64;
            println!("receiver,operations");
            println!("mpd,{}", mpd.total);
            println!("mmse,{}", mmse.total);
            println!("# mpd/mmse = {ratio:.4}");
            println!("# mpd model: {}", mpd.model);
            println!("# mmse model: {}", mmse.model);
            if let Some(dir) = out {
                let json = serde_json::json!({ "mpd": mpd, "mmse": mmse, "ratio": ratio });
                write_file(&dir.join("opcount.json"), &serde_json::to_string_pretty(&json)?)?;
            }
            Ok(())
        }
        Command::CodeBuild {
            profile,
            dv,
            dc,
            length,
            common,
        } => {
            let p = match profile {
                ProfileArg::Alpha1 => DegreeProfile::optimized_alpha_1(),
                ProfileArg::AlphaHalf => DegreeProfile::optimized_alpha_half(),
                ProfileArg::AlphaEighth => DegreeProfile::optimized_alpha_eighth(),
                ProfileArg::Regular => DegreeProfile::regular(dv, dc)?,
            };
            let code = build_code(&p, length, &mut seeded(common.seed))?;
            eprintln!(
                "n = {}, k = {}, m = {}, variable degrees {:?}, check degrees {:?}",
                code.n(),
                code.k(),
                code.m(),
                code.variable_degree_histogram(),
                code.check_degree_histogram()
            );
            match common.out {
                Some(path) => write_file(&path, &code.to_alist()),
                None => {
                    print!("{}", code.to_alist());
                    Ok(())
                }
            }
        }
    }
}

fn parallel(common: &Common, f: impl FnOnce() -> Result<()> + Send) -> Result<()> {
    with_workers(common.workers, f)?
}

fn sweep(s: Sweep, mode: Mode) -> Result<()> {
    let mut cfg = SimConfig::load(&s.config)?;
    if cfg.mode != mode {
        return Err(config_error(format!(
            "config mode does not match the subcommand ({:?})",
            mode
        )));
    }
    if let Some(v) = s.n {
        cfg.n = v;
    }
    if let Some(v) = s.k {
        cfg.k = v;
    }
    if let Some(v) = s.snr {
        cfg.snr_db = v;
    }
    if let Some(v) = s.trials {
        cfg.max_trials = v;
    }
    if let Some(v) = s.iterations {
        cfg.mpd.iterations = v;
    }
    if let Some(v) = s.damping {
        cfg.mpd.damping = v;
    }
    if s.aitken {
        cfg.mpd.aitken = true;
    }
    if let Some(v) = s.common.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    let curve = with_workers(s.common.workers, || run_sweep(&cfg))??;
    match s.common.out {
        Some(dir) => {
            let (csv, json) = curve.write(&dir, "ber")?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        None => print!("{}", curve.to_csv()),
    }
    Ok(())
}

fn users(n: usize, alpha: f64) -> Result<usize> {
    let k = (alpha * n as f64).round() as usize;
    if !(alpha > 0.0 && alpha <= 1.0) || k == 0 {
        return Err(config_error(format!("alpha = {alpha} must be in (0, 1] with K >= 1")));
    }
    Ok(k)
}

fn hardening(ns: &[usize], alpha: f64, realizations: usize, common: &Common) -> Result<()> {
    if realizations == 0 {
        return Err(config_error("realizations must be >= 1"));
    }
    let mut csv = String::from("n,k,realizations,diag_mean,offdiag_rms,offdiag_max\n");
    for (pi, &n) in ns.iter().enumerate() {
        let k = users(n, alpha)?;
        let (mut d, mut r, mut m) = (0.0, 0.0, 0.0);
        for t in 0..realizations {
            let mut rng = stream(common.seed, pi as u64, t as u64);
            let h = to_real(&generate_channel(n, k, &vec![1.0; k], &mut rng)?);
            let rep = hardening_report(&gram(&h, n)?.j);
            d += rep.diag_mean;
            r += rep.offdiag_rms;
            m += rep.offdiag_max;
        }
        let c = realizations as f64;
        writeln!(csv, "{n},{k},{realizations},{},{},{}", d / c, r / c, m / c)?;
    }
    emit(common.out.as_deref(), "hardening.csv", &csv)
}

fn mp_law(n: usize, alpha: f64, realizations: usize, bins: usize, common: &Common) -> Result<()> {
    let k = users(n, alpha)?;
    if realizations == 0 || bins == 0 {
        return Err(config_error("realizations and bins must be >= 1"));
    }
    let mut rng = seeded(common.seed);
    let ensemble = (0..realizations)
        .map(|_| generate_channel(n, k, &vec![1.0; k], &mut rng))
        .collect::<chemp::Result<Vec<_>>>()?;
    let eigen: Vec<f64> = ensemble.iter().flat_map(normalized_eigenvalues).collect();
    let ks = mp_distance(&ensemble, k as f64 / n as f64)?;
    let mut csv = String::from("bin_center,empirical_density,mp_density\n");
    for b in spectrum_histogram(&eigen, k as f64 / n as f64, bins)? {
        writeln!(csv, "{},{},{}", b.bin_center, b.empirical_density, b.mp_density)?;
    }
    writeln!(csv, "# n={n} k={k} realizations={realizations} ks_statistic={ks}")?;
    emit(common.out.as_deref(), "mp_law.csv", &csv)
}

fn convergence(n: usize, k: usize, snr: f64, trials: usize, tol: f64, det: &Detector, common: &Common) -> Result<()> {
    let snr = SnrSpec::new(snr)?;
    let cfg = MpdConfig {
        record_history: true,
        ..det.config()
    };
    cfg.validate()?;
    parallel(common, || {
        let mut csv = String::from("trial,stated_fraction,dominance_fraction,iterations_to_tol,final_residual\n");
        for t in 0..trials {
            let mut rng = stream(common.seed, 0, t as u64);
            let inst = RealSystemInstance::random(n, k, &snr, &mut rng)?;
            let obs = matched_filter(&inst.h, &inst.y, n, inst.noise_var)?;
            let report = convergence_condition(&obs.j)?;
            let mut d = MpdDetector::new(&obs, &cfg)?;
            d.run(None);
            let res = fixed_point_residuals(d.state().history.as_deref().unwrap_or(&[]));
            let it = iterations_to_converge(&res, tol).map_or(String::new(), |v| v.to_string());
            writeln!(
                csv,
                "{t},{},{},{it},{:e}",
                report.stated_fraction(),
                report.dominance_fraction(),
                d.last_residual()
            )?;
        }
        emit(common.out.as_deref(), "convergence.csv", &csv)
    })
}

fn emit(dir: Option<&Path>, name: &str, content: &str) -> Result<()> {
    match dir {
        Some(d) => write_file(&d.join(name), content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}
