//! Uplink system model: Rayleigh channel generation, QPSK mapping and the
//! real-valued stacking `y = Hx + w`.
//!
//! SNR convention: every real symbol component has unit amplitude, so a QPSK
//! symbol carries `Es = 2`. The average SNR is `K * Es / (2 * noise_var)`,
//! where `noise_var` is the variance of each real noise component.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex channel gain matrix `H_c` (N x K) with per-user variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel {
    entries: DMatrix<Complex<f64>>,
    per_user_variance: Vec<f64>,
}

impl ComplexChannel {
    pub fn new(entries: DMatrix<Complex<f64>>, per_user_variance: Vec<f64>) -> Result<Self> {
        let k = entries.ncols();
        if per_user_variance.len() != k {
            return Err(Error::Dimension(format!(
                "{} per-user variances for {} users",
                per_user_variance.len(),
                k
            )));
        }
        validate_variances(&per_user_variance)?;
        Ok(Self {
            entries,
            per_user_variance,
        })
    }

    /// Number of receive antennas.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of users.
    pub fn k(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<Complex<f64>> {
        &self.entries
    }

    pub fn per_user_variance(&self) -> &[f64] {
        &self.per_user_variance
    }
}

fn validate_variances(v: &[f64]) -> Result<()> {
    if v.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter(
            "per-user variances must be positive and finite".into(),
        ));
    }
    let total: f64 = v.iter().sum();
    if (total - v.len() as f64).abs() > 1e-9 * v.len().max(1) as f64 {
        return Err(Error::InvalidParameter(format!(
            "per-user variances sum to {total}, expected {}",
            v.len()
        )));
    }
    Ok(())
}

/// Average SNR in dB together with the complex symbol energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub snr_db: f64,
    #[serde(default = "default_symbol_energy")]
    pub symbol_energy: f64,
}

fn default_symbol_energy() -> f64 {
    QPSK_SYMBOL_ENERGY
}

/// Energy of a unit-amplitude-per-component QPSK symbol.
pub const QPSK_SYMBOL_ENERGY: f64 = 2.0;

impl SnrSpec {
    pub fn new(snr_db: f64) -> Result<Self> {
        Self::with_energy(snr_db, QPSK_SYMBOL_ENERGY)
    }

    pub fn with_energy(snr_db: f64, symbol_energy: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::InvalidParameter("snr_db must be finite".into()));
        }
        if !(symbol_energy > 0.0 && symbol_energy.is_finite()) {
            return Err(Error::InvalidParameter("symbol_energy must be > 0".into()));
        }
        Ok(Self { snr_db, symbol_energy })
    }

    pub fn linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Per-real-component noise variance for a system with `k` users.
    pub fn noise_var(&self, k: usize) -> f64 {
        k as f64 * self.symbol_energy / (2.0 * self.linear())
    }
}

/// Real-valued stacked instance of one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSystemInstance {
    pub h: DMatrix<f64>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub noise_var: f64,
    pub n: usize,
    pub k: usize,
}

impl RealSystemInstance {
    /// Draws a fresh Rayleigh channel with unit per-user variance, random
    /// QPSK symbols and noise at `snr`.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, snr: &SnrSpec, rng: &mut R) -> Result<Self> {
        let hc = generate_channel(n, k, &vec![1.0; k], rng)?;
        let h = to_real(&hc);
        let bits: Vec<u8> = (0..2 * k).map(|_| rng.random_range(0..2u8)).collect();
        let x = modulate(&bits);
        let (y, noise_var) = transmit(&h, &x, snr, rng)?;
        Ok(Self {
            h,
            x,
            y,
            noise_var,
            n,
            k,
        })
    }
}

/// Draws `H_c` with independent circularly-symmetric Gaussian entries; column
/// `j` has variance `per_user_variance[j]`.
pub fn generate_channel<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    per_user_variance: &[f64],
    rng: &mut R,
) -> Result<ComplexChannel> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "K = {k} exceeds N = {n}; only loading factors <= 1 are supported"
        )));
    }
    if per_user_variance.len() != k {
        return Err(Error::Dimension(format!(
            "{} per-user variances for {} users",
            per_user_variance.len(),
            k
        )));
    }
    validate_variances(per_user_variance)?;
    // Column-major fill so the draw order is column by column.
    let mut entries = DMatrix::<Complex<f64>>::zeros(n, k);
    for j in 0..k {
        let s = (per_user_variance[j] / 2.0).sqrt();
        for i in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            entries[(i, j)] = Complex::new(s * re, s * im);
        }
    }
    Ok(ComplexChannel {
        entries,
        per_user_variance: per_user_variance.to_vec(),
    })
}

/// Real stacking `[Re -Im; Im Re]` of a complex channel.
pub fn to_real(hc: &ComplexChannel) -> DMatrix<f64> {
    stack_complex_matrix(hc.entries())
}

/// Real stacking `[Re -Im; Im Re]` of any complex matrix.
pub fn stack_complex_matrix(m: &DMatrix<Complex<f64>>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Inverse of [`stack_complex_matrix`]; reads the left block column.
pub fn unstack_complex_matrix(m: &DMatrix<f64>) -> Result<DMatrix<Complex<f64>>> {
    let (r2, c2) = m.shape();
    if r2 % 2 != 0 || c2 % 2 != 0 {
        return Err(Error::Dimension(format!("{r2}x{c2} is not a real stacking")));
    }
    let (r, c) = (r2 / 2, c2 / 2);
    Ok(DMatrix::from_fn(r, c, |i, j| Complex::new(m[(i, j)], m[(i + r, j)])))
}

/// Stacked `[Re; Im]` vector.
pub fn to_real_vec(v: &DVector<Complex<f64>>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn from_real_vec(v: &DVector<f64>) -> Result<DVector<Complex<f64>>> {
    if v.len() % 2 != 0 {
        return Err(Error::Dimension("odd-length stacked vector".into()));
    }
    let n = v.len() / 2;
    Ok(DVector::from_fn(n, |i, _| Complex::new(v[i], v[i + n])))
}

/// Maps bits to unit-amplitude real symbols: 0 -> -1, 1 -> +1.
pub fn modulate(bits: &[u8]) -> DVector<f64> {
    DVector::from_iterator(bits.len(), bits.iter().map(|&b| if b != 0 { 1.0 } else { -1.0 }))
}

/// Sign slicer back to bits (+ and zero -> 1).
pub fn demodulate(x: &[f64]) -> Vec<u8> {
    x.iter().map(|&v| u8::from(v >= 0.0)).collect()
}

/// `y = Hx + w` with the noise variance implied by `snr` for `K = H.ncols()/2` users.
pub fn transmit<R: Rng + ?Sized>(
    h: &DMatrix<f64>,
    x: &DVector<f64>,
    snr: &SnrSpec,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    let noise_var = snr.noise_var(h.ncols() / 2);
    let y = transmit_with_noise_var(h, x, noise_var, rng)?;
    Ok((y, noise_var))
}

pub fn transmit_with_noise_var<R: Rng + ?Sized>(
    h: &DMatrix<f64>,
    x: &DVector<f64>,
    noise_var: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if h.ncols() != x.len() {
        return Err(Error::Dimension(format!(
            "H has {} columns but x has {} entries",
            h.ncols(),
            x.len()
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidParameter("noise variance must be >= 0".into()));
    }
    let mut y = h * x;
    if noise_var > 0.0 {
        let s = noise_var.sqrt();
        for v in y.iter_mut() {
            let w: f64 = rng.sample(StandardNormal);
            *v += s * w;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn stacking_of_single_gain() {
        let m = DMatrix::from_element(1, 1, Complex::new(1.0, 2.0));
        let r = stack_complex_matrix(&m);
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 1.0]));
    }

    #[test]
    fn real_channel_stacks_block_diagonal() {
        let m = DMatrix::from_fn(3, 2, |i, j| Complex::new((i + 2 * j) as f64 + 0.5, 0.0));
        let r = stack_complex_matrix(&m);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(r[(i, j + 2)], 0.0);
                assert_eq!(r[(i + 3, j)], 0.0);
                assert_eq!(r[(i, j)], r[(i + 3, j + 2)]);
            }
        }
    }

    #[test]
    fn stacked_gram_matches_complex_gram() {
        let mut rng = seeded(11);
        let hc = generate_channel(4, 2, &[1.0, 1.0], &mut rng).unwrap();
        let h = to_real(&hc);
        let lhs = h.transpose() * &h;
        let gc = hc.entries().adjoint() * hc.entries();
        let rhs = stack_complex_matrix(&gc);
        assert!((lhs - rhs).norm() < 1e-12);
        assert_eq!(unstack_complex_matrix(&h).unwrap(), *hc.entries());
    }

    #[test]
    fn rejects_more_users_than_antennas() {
        let mut rng = seeded(0);
        assert!(generate_channel(4, 5, &[1.0; 5], &mut rng).is_err());
        assert!(generate_channel(4, 2, &[1.5, 1.0], &mut rng).is_err());
        assert!(generate_channel(4, 2, &[2.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn column_variance_and_zero_mean() {
        let mut rng = seeded(5);
        let hc = generate_channel(128, 16, &[1.0; 16], &mut rng).unwrap();
        let e = hc.entries();
        let count = (e.nrows() * e.ncols()) as f64;
        let power: f64 = e.iter().map(|c| c.norm_sqr()).sum::<f64>() / count;
        assert!((0.9..1.1).contains(&power), "power {power}");

        let hc = generate_channel(64, 64, &[1.0; 64], &mut rng).unwrap();
        let e = hc.entries();
        let nk = (64 * 64) as f64;
        let mean = e.iter().sum::<Complex<f64>>() / nk;
        assert!(mean.norm() < 4.0 / nk.sqrt(), "mean {mean}");
    }

    #[test]
    fn imbalanced_power_profile() {
        let mut rng = seeded(9);
        let hc = generate_channel(4000, 2, &[1.5, 0.5], &mut rng).unwrap();
        for (j, want) in [1.5, 0.5].into_iter().enumerate() {
            let p: f64 = hc.entries().column(j).iter().map(|c| c.norm_sqr()).sum::<f64>() / 4000.0;
            assert!((p / want - 1.0).abs() < 0.08, "user {j}: {p}");
        }
    }

    #[test]
    fn single_gain_is_reproducible() {
        let a = generate_channel(1, 1, &[1.0], &mut seeded(3)).unwrap();
        let b = generate_channel(1, 1, &[1.0], &mut seeded(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn modulation_mapping() {
        assert_eq!(modulate(&[0, 1]).as_slice(), &[-1.0, 1.0]);
        assert!(modulate(&[0; 8]).iter().all(|&v| v == -1.0));
        let mut rng = seeded(1);
        for _ in 0..1000 {
            let bits: Vec<u8> = (0..16).map(|_| rng.random_range(0..2u8)).collect();
            assert_eq!(demodulate(modulate(&bits).as_slice()), bits);
        }
    }

    #[test]
    fn noiseless_and_deterministic_transmit() {
        let mut rng = seeded(2);
        let inst = RealSystemInstance::random(6, 3, &SnrSpec::new(10.0).unwrap(), &mut rng).unwrap();
        let y0 = transmit_with_noise_var(&inst.h, &inst.x, 0.0, &mut rng).unwrap();
        assert_eq!(y0, &inst.h * &inst.x);

        let snr = SnrSpec::new(3.0).unwrap();
        let a = transmit(&inst.h, &inst.x, &snr, &mut seeded(77)).unwrap();
        let b = transmit(&inst.h, &inst.x, &snr, &mut seeded(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_calibration() {
        let mut rng = seeded(4);
        let h = DMatrix::<f64>::zeros(1000, 2);
        let x = DVector::from_element(2, 1.0);
        let nv = 0.37;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut count = 0.0;
        for _ in 0..100 {
            let y = transmit_with_noise_var(&h, &x, nv, &mut rng).unwrap();
            for &v in y.iter() {
                sum += v;
                sq += v * v;
                count += 1.0;
            }
        }
        let var = sq / count - (sum / count).powi(2);
        assert!((var / nv - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn snr_mapping() {
        let s = SnrSpec::new(10.0).unwrap();
        assert!((s.noise_var(64) - 6.4).abs() < 1e-12);
        assert!(SnrSpec::new(f64::NAN).is_err());
        assert!(SnrSpec::with_energy(0.0, -1.0).is_err());
    }
}
