//! Reference detectors: linear MMSE, exhaustive ML/MAP and the SISO-AWGN curve.

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::SnrSpec;

/// Largest number of real symbols the exhaustive search accepts.
pub const MAP_MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct MmseOutput {
    pub decisions: Vec<f64>,
    pub soft: DVector<f64>,
}

/// Solves `(HᵀH + σ_n² I) s = Hᵀy` by Cholesky and slices `s`.
pub fn mmse_detect(h: &DMatrix<f64>, y: &DVector<f64>, noise_var: f64) -> Result<MmseOutput> {
    if h.nrows() != y.len() {
        return Err(Error::Dimension("H rows vs y length".into()));
    }
    let mut g = h.tr_mul(h);
    for i in 0..g.nrows() {
        g[(i, i)] += noise_var;
    }
    let rhs = h.tr_mul(y);
    let chol = Cholesky::new(g)
        .ok_or_else(|| Error::InvalidParameter("regularized Gram matrix is not positive definite".into()))?;
    let soft = chol.solve(&rhs);
    Ok(MmseOutput {
        decisions: soft.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect(),
        soft,
    })
}

/// `argmin_x ‖y - Hx‖²` over `{±1}^{2K}` by enumeration.
pub fn map_oracle(h: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<f64>> {
    let dim = h.ncols();
    if dim > MAP_MAX_DIM {
        return Err(Error::TooLarge(dim));
    }
    if h.nrows() != y.len() {
        return Err(Error::Dimension("H rows vs y length".into()));
    }
    // ‖y - Hx‖² = yᵀy - 2xᵀHᵀy + xᵀGx; only the last two depend on x.
    let g = h.tr_mul(h);
    let c = h.tr_mul(y);
    let mut best = f64::INFINITY;
    let mut best_mask = 0usize;
    let mut x = vec![0.0; dim];
    for mask in 0..1usize << dim {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        let mut metric = 0.0;
        for i in 0..dim {
            let gx: f64 = (0..dim).map(|k| g[(i, k)] * x[k]).sum();
            metric += x[i] * (gx - 2.0 * c[i]);
        }
        if metric < best {
            best = metric;
            best_mask = mask;
        }
    }
    Ok((0..dim)
        .map(|i| if best_mask >> i & 1 == 1 { 1.0 } else { -1.0 })
        .collect())
}

/// Gaussian tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// BER of unit-amplitude antipodal signaling in real noise whose variance
/// is given by the SNR mapping of a single-user system.
pub fn siso_awgn_ber(snr: &SnrSpec) -> f64 {
    q_function(1.0 / snr.noise_var(1).sqrt())
}

/// SNR (dB) at which the SISO-AWGN curve reaches `ber`, by bisection.
pub fn siso_awgn_snr_for_ber(ber: f64, symbol_energy: f64) -> Result<f64> {
    if !(ber > 0.0 && ber < 0.5) {
        return Err(Error::InvalidParameter("target BER must lie in (0, 0.5)".into()));
    }
    let f = |db: f64| {
        siso_awgn_ber(&SnrSpec {
            snr_db: db,
            symbol_energy,
        })
    };
    let (mut lo, mut hi) = (-30.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
