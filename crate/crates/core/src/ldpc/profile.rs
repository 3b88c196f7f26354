//! Node-perspective degree profiles and their integer realization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRACTION_TOL: f64 = 1e-6;

/// Fractions of variable and check nodes of each degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub variable_degrees: Vec<(usize, f64)>,
    pub check_degrees: Vec<(usize, f64)>,
    pub rate: f64,
}

/// Integer node counts per degree class, in the order of the profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeCounts {
    pub variable: Vec<(usize, usize)>,
    pub check: Vec<(usize, usize)>,
}

impl NodeCounts {
    pub fn edges(&self) -> usize {
        self.variable.iter().map(|&(d, c)| d * c).sum()
    }
}

impl DegreeProfile {
    pub fn new(variable_degrees: Vec<(usize, f64)>, check_degrees: Vec<(usize, f64)>, rate: f64) -> Result<Self> {
        let p = Self {
            variable_degrees,
            check_degrees,
            rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::InvalidParameter(format!("rate {} outside (0, 1)", self.rate)));
        }
        for (side, list, min_deg) in [
            ("variable", &self.variable_degrees, 2),
            ("check", &self.check_degrees, 2),
        ] {
            if list.is_empty() {
                return Err(Error::InvalidParameter(format!("empty {side} profile")));
            }
            let sum: f64 = list.iter().map(|&(_, f)| f).sum();
            if (sum - 1.0).abs() > FRACTION_TOL {
                return Err(Error::InvalidParameter(format!("{side} fractions sum to {sum}")));
            }
            if list.iter().any(|&(d, f)| d < min_deg || !(f >= 0.0)) {
                return Err(Error::InvalidParameter(format!("{side} degrees must be >= {min_deg}")));
            }
        }
        Ok(())
    }

    /// `(d_v, d_c)`-regular profile of rate `1 - d_v/d_c`.
    pub fn regular(dv: usize, dc: usize) -> Result<Self> {
        if dc <= dv {
            return Err(Error::InvalidParameter("regular profile needs d_c > d_v".into()));
        }
        Self::new(vec![(dv, 1.0)], vec![(dc, 1.0)], 1.0 - dv as f64 / dc as f64)
    }

    /// Rate-1/2 profile optimized for `N = 128`, `α = 1`.
    pub fn optimized_alpha_1() -> Self {
        Self {
            variable_degrees: vec![(2, 0.3723), (4, 0.2798), (5, 0.2254), (8, 0.1152), (12, 0.0073)],
            check_degrees: vec![(6, 0.7067), (12, 0.2531), (18, 0.0402)],
            rate: 0.5,
        }
    }

    /// Rate-1/2 profile optimized for `N = 128`, `α = 0.5`. The published
    /// variable fractions sum to 0.9999 and are rescaled to one.
    pub fn optimized_alpha_half() -> Self {
        Self {
            variable_degrees: vec![(2, 0.5715), (4, 0.3132), (5, 0.1061), (8, 0.0091)],
            check_degrees: vec![(4, 0.7045), (8, 0.091), (12, 0.2045)],
            rate: 0.5,
        }
        .normalized()
    }

    /// Rate-1/2 profile optimized for `N = 128`, `α = 0.125`.
    pub fn optimized_alpha_eighth() -> Self {
        Self {
            variable_degrees: vec![(2, 0.4794), (4, 0.4201), (8, 0.0309), (16, 0.0696)],
            check_degrees: vec![(6, 0.7599), (12, 0.1003), (16, 0.1398)],
            rate: 0.5,
        }
    }

    /// Rescales both fraction lists to sum to one.
    pub fn normalized(mut self) -> Self {
        for list in [&mut self.variable_degrees, &mut self.check_degrees] {
            let s: f64 = list.iter().map(|&(_, f)| f).sum();
            if s > 0.0 {
                list.iter_mut().for_each(|e| e.1 /= s);
            }
        }
        self
    }

    pub fn mean_variable_degree(&self) -> f64 {
        self.variable_degrees.iter().map(|&(d, f)| d as f64 * f).sum()
    }

    pub fn mean_check_degree(&self) -> f64 {
        self.check_degrees.iter().map(|&(d, f)| d as f64 * f).sum()
    }

    /// `1 - mean d_v / mean d_c`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.mean_variable_degree() / self.mean_check_degree()
    }

    /// Number of check nodes for block length `n`.
    pub fn check_count(&self, n: usize) -> Result<usize> {
        let m = n as f64 * (1.0 - self.rate);
        if (m - m.round()).abs() > 1e-9 || m < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "n (1 - rate) = {m} is not a positive integer"
            )));
        }
        Ok(m.round() as usize)
    }

    /// Integer node counts for block length `n`: each class gets its rounded
    /// share ±1 node, chosen so that both sides carry the same number of
    /// edges and the total deviation from the exact shares is smallest.
    pub fn node_counts(&self, n: usize) -> Result<NodeCounts> {
        self.validate()?;
        let m = self.check_count(n)?;
        let var = candidates(&self.variable_degrees, n);
        let chk = candidates(&self.check_degrees, m);
        let mut best: Option<(f64, usize, usize)> = None;
        for (vi, (ve, vd, _)) in var.iter().enumerate() {
            for (ci, (ce, cd, _)) in chk.iter().enumerate() {
                if ve == ce && best.is_none_or(|b| vd + cd < b.0) {
                    best = Some((vd + cd, vi, ci));
                }
            }
        }
        let (_, vi, ci) = best.ok_or_else(|| {
            Error::InfeasibleProfile(format!("no ±1 rounding of the profile balances edges at n = {n}"))
        })?;
        Ok(NodeCounts {
            variable: var[vi].2.clone(),
            check: chk[ci].2.clone(),
        })
    }
}

/// All `(edges, deviation, counts)` with every class offset by at most one
/// node from its rounded share and the class sizes summing to `total`.
fn candidates(list: &[(usize, f64)], total: usize) -> Vec<(usize, f64, Vec<(usize, usize)>)> {
    let exact: Vec<f64> = list.iter().map(|&(_, f)| f * total as f64).collect();
    let base: Vec<i64> = exact.iter().map(|e| e.round() as i64).collect();
    let mut out = Vec::new();
    let classes = list.len();
    let combos = 3usize.pow(classes as u32);
    for code in 0..combos {
        let mut c = code;
        let mut counts = Vec::with_capacity(classes);
        for &b in &base {
            counts.push(b + (c % 3) as i64 - 1);
            c /= 3;
        }
        if counts.iter().any(|&v| v < 0) || counts.iter().sum::<i64>() != total as i64 {
            continue;
        }
        let dev: f64 = counts.iter().zip(&exact).map(|(&v, e)| (v as f64 - e).abs()).sum();
        let edges: usize = counts.iter().zip(list).map(|(&v, &(d, _))| v as usize * d).sum();
        out.push((
            edges,
            dev,
            counts.iter().zip(list).map(|(&v, &(d, _))| (d, v as usize)).collect(),
        ));
    }
    out
}
