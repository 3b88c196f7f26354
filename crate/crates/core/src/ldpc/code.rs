//! Parity-check codes: progressive-edge-growth construction, a systematic
//! encoder from GF(2) elimination, and alist import/export.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::profile::DegreeProfile;
use crate::error::{Error, Result};

/// Binary LDPC code given by its sparse parity-check matrix.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    /// Variable indices of each check, ascending.
    checks: Vec<Vec<usize>>,
    /// Check indices of each variable, ascending.
    vars: Vec<Vec<usize>>,
    /// Edge `e` connects check `c` (with `check_offsets[c] <= e < check_offsets[c+1]`)
    /// and variable `edge_var[e]`.
    pub(crate) check_offsets: Vec<usize>,
    pub(crate) edge_var: Vec<usize>,
    /// Edge indices incident to each variable.
    pub(crate) var_edges: Vec<Vec<usize>>,
    encoder: Encoder,
}

/// `x[parity[r]] = <rows[r], info bits>` over GF(2).
#[derive(Debug, Clone)]
struct Encoder {
    info: Vec<usize>,
    parity: Vec<usize>,
    rows: Vec<Vec<u64>>,
}

impl LdpcCode {
    /// Builds a code from the variable lists of its checks.
    pub fn from_checks(n: usize, mut checks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 || checks.is_empty() {
            return Err(Error::InvalidParameter("empty parity-check matrix".into()));
        }
        let mut vars = vec![Vec::new(); n];
        for (c, row) in checks.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!("check {c} has a parallel edge")));
            }
            for &v in row.iter() {
                if v >= n {
                    return Err(Error::Dimension(format!("check {c} references variable {v} >= n")));
                }
                vars[v].push(c);
            }
        }
        let mut check_offsets = Vec::with_capacity(checks.len() + 1);
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); n];
        check_offsets.push(0);
        for row in &checks {
            for &v in row {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            check_offsets.push(edge_var.len());
        }
        let encoder = Encoder::new(n, &checks);
        Ok(Self {
            n,
            checks,
            vars,
            check_offsets,
            edge_var,
            var_edges,
            encoder,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of information bits, `n - rank(H)`.
    pub fn k(&self) -> usize {
        self.encoder.info.len()
    }

    /// Number of parity checks (rows of `H`).
    pub fn m(&self) -> usize {
        self.checks.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    pub fn edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn variables(&self) -> &[Vec<usize>] {
        &self.vars
    }

    /// Codeword positions that carry the information bits, in order.
    pub fn info_positions(&self) -> &[usize] {
        &self.encoder.info
    }

    pub fn variable_degree_histogram(&self) -> Vec<(usize, usize)> {
        histogram(self.vars.iter().map(Vec::len))
    }

    pub fn check_degree_histogram(&self) -> Vec<(usize, usize)> {
        histogram(self.checks.iter().map(Vec::len))
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        let k = self.k();
        if info.len() != k {
            return Err(Error::Dimension(format!("expected {k} info bits, got {}", info.len())));
        }
        let mut packed = vec![0u64; k.div_ceil(64)];
        for (i, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                packed[i / 64] |= 1 << (i % 64);
            }
        }
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.encoder.info.iter().zip(info) {
            cw[pos] = b & 1;
        }
        for (row, &pos) in self.encoder.rows.iter().zip(&self.encoder.parity) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Information bits read back from a codeword.
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.encoder.info.iter().map(|&p| codeword[p]).collect()
    }

    /// Number of checks with odd parity.
    pub fn unsatisfied_checks(&self, word: &[u8]) -> usize {
        self.checks
            .iter()
            .filter(|row| row.iter().fold(0u8, |a, &v| a ^ (word[v] & 1)) == 1)
            .count()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n && self.unsatisfied_checks(word) == 0
    }

    /// alist text of the parity-check matrix, zero-padded rows.
    pub fn to_alist(&self) -> String {
        let max_col = self.vars.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.checks.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = format!("{} {}\n{} {}\n", self.n, self.m(), max_col, max_row);
        let join = |it: &mut dyn Iterator<Item = usize>| it.map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        s += &join(&mut self.vars.iter().map(Vec::len));
        s += "\n";
        s += &join(&mut self.checks.iter().map(Vec::len));
        s += "\n";
        for (lists, width) in [(&self.vars, max_col), (&self.checks, max_row)] {
            for l in lists.iter() {
                let mut row: Vec<usize> = l.iter().map(|&v| v + 1).collect();
                row.resize(width, 0);
                s += &join(&mut row.into_iter());
                s += "\n";
            }
        }
        s
    }

    /// Parses alist text; zero padding is optional.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (no, l) = lines.next().ok_or_else(|| Error::Alist {
                line: 0,
                msg: format!("unexpected end of input ({what})"),
            })?;
            let nums = l
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|e| Error::Alist {
                        line: no,
                        msg: format!("{t}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((no, nums))
        };
        let (no, dims) = next("dimensions")?;
        let [n, m] = dims[..] else {
            return Err(Error::Alist {
                line: no,
                msg: "expected `n m`".into(),
            });
        };
        let _ = next("maximum weights")?;
        let (no, col_w) = next("column weights")?;
        if col_w.len() != n {
            return Err(Error::Alist {
                line: no,
                msg: "column weight count".into(),
            });
        }
        let (no, row_w) = next("row weights")?;
        if row_w.len() != m {
            return Err(Error::Alist {
                line: no,
                msg: "row weight count".into(),
            });
        }
        let mut cols = Vec::with_capacity(n);
        for &w in &col_w {
            let (no, l) = next("column list")?;
            cols.push(nonzero_list(no, l, w)?);
        }
        let mut rows = Vec::with_capacity(m);
        for &w in &row_w {
            let (no, l) = next("row list")?;
            rows.push(nonzero_list(no, l, w)?);
        }
        let mut from_cols = vec![Vec::new(); m];
        for (v, c) in cols.iter().enumerate() {
            for &r in c {
                if r >= m {
                    return Err(Error::Alist {
                        line: 0,
                        msg: format!("row index {} out of range", r + 1),
                    });
                }
                from_cols[r].push(v);
            }
        }
        for (r, (a, b)) in from_cols.iter_mut().zip(rows.iter()).enumerate() {
            a.sort_unstable();
            let mut b = b.clone();
            b.sort_unstable();
            if *a != b {
                return Err(Error::Alist {
                    line: 0,
                    msg: format!("row {} disagrees with columns", r + 1),
                });
            }
        }
        Self::from_checks(n, rows)
    }
}

fn nonzero_list(line: usize, l: Vec<usize>, weight: usize) -> Result<Vec<usize>> {
    let v: Vec<usize> = l.into_iter().filter(|&x| x != 0).map(|x| x - 1).collect();
    if v.len() != weight {
        return Err(Error::Alist {
            line,
            msg: format!("expected {weight} entries, found {}", v.len()),
        });
    }
    Ok(v)
}

fn histogram(degrees: impl Iterator<Item = usize>) -> Vec<(usize, usize)> {
    let mut h = std::collections::BTreeMap::new();
    for d in degrees {
        *h.entry(d).or_insert(0) += 1;
    }
    h.into_iter().collect()
}

impl Encoder {
    fn new(n: usize, checks: &[Vec<usize>]) -> Self {
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = checks
            .iter()
            .map(|c| {
                let mut r = vec![0u64; words];
                for &v in c {
                    r[v / 64] |= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & b != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = std::mem::take(&mut rows[rank]);
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] & b != 0 {
                    for (x, y) in row[w..].iter_mut().zip(&pivot[w..]) {
                        *x ^= y;
                    }
                }
            }
            rows[rank] = pivot;
            pivots.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let info: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info.len();
        let gen = rows[..rank]
            .iter()
            .map(|row| {
                let mut g = vec![0u64; k.div_ceil(64)];
                for (i, &c) in info.iter().enumerate() {
                    if row[c / 64] >> (c % 64) & 1 == 1 {
                        g[i / 64] |= 1 << (i % 64);
                    }
                }
                g
            })
            .collect();
        Self {
            info,
            parity: pivots,
            rows: gen,
        }
    }
}

/// Constructs a code of length `n` realizing `profile` with progressive
/// edge growth. Variables are processed in order of increasing degree; each
/// new edge goes to a check with spare capacity that is unreachable from the
/// variable in the current graph or, failing that, as far away as possible.
/// Among those the check with the most unused capacity wins, ties broken by
/// `rng`; this keeps spare capacity spread out so the last, highest-degree
/// variables do not crowd into the same few checks.
pub fn build_code<R: Rng + ?Sized>(profile: &DegreeProfile, n: usize, rng: &mut R) -> Result<LdpcCode> {
    let counts = profile.node_counts(n)?;
    let m = profile.check_count(n)?;
    let mut var_deg: Vec<usize> = counts
        .variable
        .iter()
        .flat_map(|&(d, c)| std::iter::repeat_n(d, c))
        .collect();
    var_deg.sort_unstable();
    let mut target: Vec<usize> = counts
        .check
        .iter()
        .flat_map(|&(d, c)| std::iter::repeat_n(d, c))
        .collect();
    target.shuffle(rng);
    if var_deg.iter().any(|&d| d > m) {
        return Err(Error::InfeasibleProfile(
            "variable degree exceeds number of checks".into(),
        ));
    }

    let mut peg = Peg {
        var_adj: vec![Vec::new(); n],
        chk_adj: vec![Vec::new(); m],
        target,
        seen: vec![u32::MAX; m],
        seen_var: vec![u32::MAX; n],
        stamp: 0,
    };
    let mut open = peg.target.iter().filter(|&&t| t > 0).count();
    for (v, &dv) in var_deg.iter().enumerate() {
        for e in 0..dv {
            let c = if e == 0 {
                peg.pick(rng, (0..m).filter(|&c| peg.has_room(c)).collect())
            } else {
                peg.farthest(v, open, rng)
            };
            let (c, swapped) = match c {
                Some(c) => (c, false),
                None => (peg.swap_in(v, rng)?, true),
            };
            peg.var_adj[v].push(c);
            peg.chk_adj[c].push(v);
            if swapped {
                open = (0..m).filter(|&c| peg.has_room(c)).count();
            } else if !peg.has_room(c) {
                open -= 1;
            }
        }
    }
    LdpcCode::from_checks(n, peg.chk_adj)
}

struct Peg {
    var_adj: Vec<Vec<usize>>,
    chk_adj: Vec<Vec<usize>>,
    target: Vec<usize>,
    seen: Vec<u32>,
    seen_var: Vec<u32>,
    stamp: u32,
}

impl Peg {
    fn has_room(&self, c: usize) -> bool {
        self.chk_adj[c].len() < self.target[c]
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R, cands: Vec<usize>) -> Option<usize> {
        let room = |c: usize| self.target[c] - self.chk_adj[c].len();
        let best = cands.iter().map(|&c| room(c)).max()?;
        let ties: Vec<usize> = cands.into_iter().filter(|&c| room(c) == best).collect();
        ties.choose(rng).copied()
    }

    /// Breadth-first expansion from `v`; `open` is the number of checks with room.
    fn farthest<R: Rng + ?Sized>(&mut self, v: usize, open: usize, rng: &mut R) -> Option<usize> {
        self.stamp += 1;
        let stamp = self.stamp;
        self.seen_var[v] = stamp;
        let mut frontier: Vec<usize> = self.var_adj[v].clone();
        let mut reached_open = 0;
        for &c in &frontier {
            self.seen[c] = stamp;
            reached_open += self.has_room(c) as usize;
        }
        loop {
            let mut next = Vec::new();
            for &c in &frontier {
                for &u in &self.chk_adj[c] {
                    if self.seen_var[u] == stamp {
                        continue;
                    }
                    self.seen_var[u] = stamp;
                    for &c2 in &self.var_adj[u] {
                        if self.seen[c2] != stamp {
                            self.seen[c2] = stamp;
                            next.push(c2);
                        }
                    }
                }
            }
            let new_open = next.iter().filter(|&&c| self.has_room(c)).count();
            if next.is_empty() {
                // The component of v is exhausted: any unreached check with room.
                let cands = (0..self.chk_adj.len())
                    .filter(|&c| self.seen[c] != stamp && self.has_room(c))
                    .collect();
                return self.pick(rng, cands);
            }
            if reached_open + new_open == open {
                let cands = next.into_iter().filter(|&c| self.has_room(c)).collect();
                return self.pick(rng, cands);
            }
            reached_open += new_open;
            frontier = next;
        }
    }

    /// No check with room is free of `v`: move an edge `(u, c)` to a check
    /// `c'` with room, then connect `v` to the vacated slot of `c`.
    fn swap_in<R: Rng + ?Sized>(&mut self, v: usize, rng: &mut R) -> Result<usize> {
        let roomy: Vec<usize> = (0..self.chk_adj.len()).filter(|&c| self.has_room(c)).collect();
        let mut checks: Vec<usize> = (0..self.chk_adj.len())
            .filter(|c| !self.var_adj[v].contains(c))
            .collect();
        checks.shuffle(rng);
        for &c2 in &roomy {
            for &c in &checks {
                if let Some(&u) = self.chk_adj[c]
                    .iter()
                    .find(|&&u| u != v && !self.var_adj[u].contains(&c2))
                {
                    self.chk_adj[c].retain(|&x| x != u);
                    let slot = self.var_adj[u].iter().position(|&x| x == c).expect("edge present");
                    self.var_adj[u][slot] = c2;
                    self.chk_adj[c2].push(u);
                    return Ok(c);
                }
            }
        }
        Err(Error::InfeasibleProfile(
            "cannot place edge without a parallel edge".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn toy() -> LdpcCode {
        build_code(&DegreeProfile::regular(3, 6).unwrap(), 8, &mut seeded(1)).unwrap()
    }

    #[test]
    fn toy_regular_code() {
        let c = toy();
        assert_eq!(c.m(), 4);
        assert!(c.variables().iter().all(|v| v.len() == 3));
        assert!(c.checks().iter().all(|r| (5..=7).contains(&r.len())));
        assert!(c.k() >= 4);
        let zero = c.encode(&vec![0; c.k()]).unwrap();
        assert!(zero.iter().all(|&b| b == 0));
        assert!(c.is_codeword(&zero));
    }

    #[test]
    fn optimized_profile_at_4000() {
        let p = DegreeProfile::optimized_alpha_1();
        let c = build_code(&p, 4000, &mut seeded(2)).unwrap();
        let want = p.node_counts(4000).unwrap();
        assert_eq!(c.variable_degree_histogram(), want.variable);
        let mut wc = want.check.clone();
        wc.sort_unstable();
        assert_eq!(c.check_degree_histogram(), wc);
        for (d, f) in &p.variable_degrees {
            let got = c.variables().iter().filter(|v| v.len() == *d).count() as f64;
            assert!((got - f * 4000.0).abs() <= 1.5, "degree {d}: {got}");
        }
        assert!(c.checks().iter().all(|r| r.windows(2).all(|w| w[0] < w[1])));
        assert!(c.k() >= 2000);
    }

    #[test]
    fn random_words_encode_to_codewords() {
        let c = build_code(&DegreeProfile::optimized_alpha_1(), 1000, &mut seeded(3)).unwrap();
        let mut rng = seeded(4);
        for _ in 0..1000 {
            let info: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let cw = c.encode(&info).unwrap();
            assert!(c.is_codeword(&cw));
            assert_eq!(c.extract_info(&cw), info);
        }
    }

    #[test]
    fn alist_round_trip() {
        let c = build_code(&DegreeProfile::regular(3, 6).unwrap(), 96, &mut seeded(5)).unwrap();
        let text = c.to_alist();
        let d = LdpcCode::from_alist(&text).unwrap();
        assert_eq!(d.checks(), c.checks());
        assert_eq!(d.to_alist(), text);
        // Unpadded form parses to the same matrix.
        let unpadded: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i < 4 {
                    l.to_string()
                } else {
                    l.split(' ').filter(|t| *t != "0").collect::<Vec<_>>().join(" ")
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(LdpcCode::from_alist(&unpadded).unwrap().checks(), c.checks());
    }

    #[test]
    fn alist_errors() {
        assert!(LdpcCode::from_alist("").is_err());
        assert!(LdpcCode::from_alist("3 1\n1 3\n1 1 1\n3\n1\n1\nx\n1 2 3\n").is_err());
        let inconsistent = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 2\n";
        assert!(LdpcCode::from_alist(inconsistent).is_err());
        let ok = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 3\n";
        assert_eq!(LdpcCode::from_alist(ok).unwrap().k(), 2);
    }

    #[test]
    fn rejects_parallel_edges() {
        assert!(LdpcCode::from_checks(3, vec![vec![0, 0, 1]]).is_err());
        assert!(LdpcCode::from_checks(3, vec![vec![0, 3]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn encoding_is_linear(seed in 0u64..1000) {
            let c = build_code(&DegreeProfile::regular(3, 6).unwrap(), 64, &mut seeded(6)).unwrap();
            let mut rng = seeded(seed);
            let a: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let (ca, cb) = (c.encode(&a).unwrap(), c.encode(&b).unwrap());
            let sum: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            prop_assert_eq!(c.encode(&ab).unwrap(), sum);
        }
    }
}
