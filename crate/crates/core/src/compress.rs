//! Per-embedding compression of the shared projector chain: contract the
//! embedding cap into the top projector, then sweep SVD splits down to the
//! bottom, carrying the unitary factors into the next level. The result
//! evaluates identically on every input string but stores far fewer
//! elements.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alphabet::NGram;
use crate::error::{ModelError, Result};
use crate::hierarchy::Hierarchy;

/// One level's 0/1 projector P_n[μ_n, μ_{n−1}, k], stored as the list of
/// its unit entries (each gram contributes exactly one).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProjector {
    pub n: usize,
    pub d_n: usize,
    pub d_prev: usize,
    pub d: usize,
    pub entries: Vec<(usize, usize, usize)>,
}

/// The shared chain m·P_N·…·P_2 owned by one embedding: level projectors
/// plus the cap vector over top-level grams.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorChain {
    pub levels: Vec<SparseProjector>,
    pub cap: Vec<f64>,
    pub d: usize,
}

impl ProjectorChain {
    /// Chain over levels 2..=n_top of a hierarchy with an explicit cap.
    pub fn from_hierarchy(h: &Hierarchy, n_top: usize, cap: Vec<f64>) -> Result<Self> {
        if n_top < 2 {
            return Err(ModelError::Domain("chain needs n_top >= 2".into()));
        }
        let d = h.alphabet().d();
        let mut levels = Vec::with_capacity(n_top - 1);
        for n in 2..=n_top {
            let level = h.level(n).ok_or(ModelError::HierarchyOrder {
                requested: n_top,
                missing: n,
            })?;
            let d_prev = if n == 2 {
                d
            } else {
                h.level(n - 1).unwrap().len()
            };
            let mut entries = Vec::with_capacity(level.len());
            for (mu, gram) in level.grams().iter().enumerate() {
                let prev = if n == 2 {
                    gram[0] as usize
                } else {
                    h.level(n - 1)
                        .unwrap()
                        .index_of(&gram[..n - 1])
                        .ok_or_else(|| ModelError::Consistency("non-smooth level".into()))?
                };
                entries.push((mu, prev, gram[n - 1] as usize));
            }
            levels.push(SparseProjector {
                n,
                d_n: level.len(),
                d_prev,
                d,
                entries,
            });
        }
        let top_dim = levels.last().unwrap().d_n;
        if cap.len() != top_dim {
            return Err(ModelError::LengthMismatch {
                expected: top_dim,
                got: cap.len(),
            });
        }
        Ok(Self { levels, cap, d })
    }

    /// The indicator chain of a single learned word: unit cap at its gram.
    pub fn word_indicator(h: &Hierarchy, word: &str) -> Result<Self> {
        let gram = h.alphabet().encode(word)?;
        if gram.len() < 2 {
            return Err(ModelError::Domain("indicator words need length >= 2".into()));
        }
        let level = h.level(gram.len()).ok_or(ModelError::HierarchyOrder {
            requested: gram.len(),
            missing: h.depth() + 1,
        })?;
        let mu = level
            .index_of(&gram)
            .ok_or_else(|| ModelError::Consistency(format!("word {word:?} is not learned")))?;
        let mut cap = vec![0.0; level.len()];
        cap[mu] = 1.0;
        Self::from_hierarchy(h, gram.len(), cap)
    }

    /// Word length N: the chain consumes exactly N basis symbols.
    pub fn word_len(&self) -> usize {
        self.levels.len() + 1
    }

    /// Contract against a one-hot string; unit caps make this the word
    /// indicator.
    pub fn apply(&self, s: &[u8]) -> Result<f64> {
        if s.len() != self.word_len() {
            return Err(ModelError::LengthMismatch {
                expected: self.word_len(),
                got: s.len(),
            });
        }
        let mut state = vec![0.0f64; self.d];
        let first = s[0] as usize;
        if first >= self.d {
            return Err(ModelError::IndexOutOfRange(format!("symbol {first}")));
        }
        state[first] = 1.0;
        for (li, p) in self.levels.iter().enumerate() {
            let c = s[li + 1] as usize;
            if c >= self.d {
                return Err(ModelError::IndexOutOfRange(format!("symbol {c}")));
            }
            let mut next = vec![0.0f64; p.d_n];
            for &(mu, prev, k) in &p.entries {
                if k == c {
                    next[mu] += state[prev];
                }
            }
            state = next;
        }
        Ok(state.iter().zip(&self.cap).map(|(v, m)| v * m).sum())
    }

    /// Elements a dense materialization of this chain would store.
    pub fn dense_cost(&self) -> usize {
        self.levels
            .iter()
            .map(|p| p.d_n * p.d_prev * p.d)
            .sum::<usize>()
            + self.cap.len()
    }
}

/// Dense 3-index tensor, row-major in (i, j, k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub dims: (usize, usize, usize),
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(a: usize, b: usize, c: usize) -> Self {
        Self {
            dims: (a, b, c),
            data: vec![0.0; a * b * c],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let at = self.idx(i, j, k);
        self.data[at] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// The compressed chain: levels[0] is the bottom tensor P̂_2 of shape
/// (b_2, d, d); levels[i>0] has shape (b_n, b_{n−1}, d). The cap scalar is
/// absorbed into the top tensor, whose leading bond dimension is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedChain {
    pub levels: Vec<Tensor3>,
}

impl CompressedChain {
    pub fn word_len(&self) -> usize {
        self.levels.len() + 1
    }

    /// Bond dimensions b_2..=b_N.
    pub fn bonds(&self) -> Vec<usize> {
        self.levels.iter().map(|t| t.dims.0).collect()
    }

    pub fn apply(&self, s: &[u8]) -> Result<f64> {
        if s.len() != self.word_len() {
            return Err(ModelError::LengthMismatch {
                expected: self.word_len(),
                got: s.len(),
            });
        }
        let bottom = &self.levels[0];
        let (j, k) = (s[0] as usize, s[1] as usize);
        if j >= bottom.dims.1 || k >= bottom.dims.2 {
            return Err(ModelError::IndexOutOfRange("symbol out of alphabet".into()));
        }
        let mut state: Vec<f64> = (0..bottom.dims.0).map(|b| bottom.get(b, j, k)).collect();
        for (li, t) in self.levels.iter().enumerate().skip(1) {
            let c = s[li + 1] as usize;
            if c >= t.dims.2 {
                return Err(ModelError::IndexOutOfRange("symbol out of alphabet".into()));
            }
            let mut next = vec![0.0; t.dims.0];
            for (bn, slot) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (bp, sv) in state.iter().enumerate() {
                    acc += t.get(bn, bp, c) * sv;
                }
                *slot = acc;
            }
            state = next;
        }
        Ok(state.first().copied().unwrap_or(0.0))
    }
}

/// Total stored matrix elements of a compressed chain.
pub fn measured_cost(c: &CompressedChain) -> usize {
    c.levels.iter().map(Tensor3::len).sum()
}

/// Thin SVD M = U·diag(D)·V with singular values descending, values below
/// tol·max(D) truncated, and each kept row of V signed so its first
/// non-negligible element is positive.
pub fn svd_decompose(m: &DMatrix<f64>, tol: f64) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::Domain("non-finite matrix entry".into()));
    }
    let svd = m.clone().svd(true, true);
    let u_full = svd
        .u
        .ok_or_else(|| ModelError::Internal("svd returned no U".into()))?;
    let vt_full = svd
        .v_t
        .ok_or_else(|| ModelError::Internal("svd returned no V".into()))?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());
    let smax = order.first().map(|&i| sv[i]).unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| sv[i] > tol * smax && sv[i] > 0.0)
        .collect();
    let r = kept.len();
    let mut u = DMatrix::zeros(m.nrows(), r);
    let mut v = DMatrix::zeros(r, m.ncols());
    let mut d = Vec::with_capacity(r);
    for (out, &i) in kept.iter().enumerate() {
        d.push(sv[i]);
        for row in 0..m.nrows() {
            u[(row, out)] = u_full[(row, i)];
        }
        for col in 0..m.ncols() {
            v[(out, col)] = vt_full[(i, col)];
        }
        // canonical sign: first non-negligible element of the V row positive
        let flip = (0..m.ncols())
            .map(|c| v[(out, c)])
            .find(|x| x.abs() > 1e-12)
            .is_some_and(|x| x < 0.0);
        if flip {
            for col in 0..m.ncols() {
                v[(out, col)] = -v[(out, col)];
            }
            for row in 0..m.nrows() {
                u[(row, out)] = -u[(row, out)];
            }
        }
    }
    Ok((u, d, v))
}

pub const COMPRESS_TOL: f64 = 1e-10;

/// The top-down sweep: contract the cap into P_N, then repeatedly merge
/// the (bond, letter) indices, SVD-split a new bond toward level n−1, keep
/// the right factor as P̂_n, and carry D·Uᵀ downward. The bottom tensor is
/// kept whole. Equivalence with the input chain is re-verified on the cap
/// support and perturbed/probe strings; failure is an internal error.
pub fn compress_chain(pc: &ProjectorChain, tol: f64) -> Result<CompressedChain> {
    if pc.levels.is_empty() {
        return Err(ModelError::Domain("empty projector chain".into()));
    }
    let d = pc.d;
    let mut carry = DMatrix::from_fn(1, pc.cap.len(), |_, j| pc.cap[j]);
    let mut rev: Vec<Tensor3> = Vec::with_capacity(pc.levels.len());
    for li in (0..pc.levels.len()).rev() {
        let p = &pc.levels[li];
        let b = carry.nrows();
        let mut t = Tensor3::zeros(b, p.d_prev, d);
        for &(mu, prev, k) in &p.entries {
            for beta in 0..b {
                let v = carry[(beta, mu)];
                if v != 0.0 {
                    let cur = t.get(beta, prev, k);
                    t.set(beta, prev, k, cur + v);
                }
            }
        }
        if li == 0 {
            rev.push(t);
            break;
        }
        // merge the right indices (β_n, k) into columns; rows are μ_{n−1}
        let m = DMatrix::from_fn(p.d_prev, b * d, |prev, col| t.get(col / d, prev, col % d));
        let (u, s, v) = svd_decompose(&m, tol)?;
        let r = s.len();
        let mut ph = Tensor3::zeros(b, r, d);
        for bn in 0..b {
            for br in 0..r {
                for k in 0..d {
                    ph.set(bn, br, k, v[(br, bn * d + k)]);
                }
            }
        }
        rev.push(ph);
        carry = DMatrix::from_fn(r, p.d_prev, |br, prev| s[br] * u[(prev, br)]);
    }
    rev.reverse();
    let cc = CompressedChain { levels: rev };
    verify_equivalence(pc, &cc)?;
    Ok(cc)
}

/// Deterministic probe set: every cap-support word, single-symbol
/// perturbations of the first support word, and pseudo-random strings.
fn verify_equivalence(pc: &ProjectorChain, cc: &CompressedChain) -> Result<()> {
    let n = pc.word_len();
    let d = pc.d;
    let mut probes: Vec<NGram> = Vec::new();
    let top = pc.levels.last().unwrap();
    // decode support words by walking prefixes down the chain
    let mut support = 0usize;
    for (mu, &w) in pc.cap.iter().enumerate() {
        if w == 0.0 || support >= 64 {
            continue;
        }
        support += 1;
        let mut word = vec![0u8; n];
        let mut cur = mu;
        for li in (0..pc.levels.len()).rev() {
            let p = &pc.levels[li];
            let &(_, prev, k) = p
                .entries
                .iter()
                .find(|&&(m, _, _)| m == cur)
                .ok_or_else(|| ModelError::Consistency("dangling chain index".into()))?;
            word[li + 1] = k as u8;
            cur = prev;
        }
        word[0] = cur as u8;
        probes.push(word);
        let _ = top;
    }
    if let Some(first) = probes.first().cloned() {
        for pos in 0..n {
            for k in 0..d {
                let mut s = first.clone();
                s[pos] = k as u8;
                probes.push(s);
            }
        }
    }
    let mut x = 0x5eed_c0ffee_u64;
    for _ in 0..200 {
        let mut s = Vec::with_capacity(n);
        for _ in 0..n {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            s.push(((x >> 33) % d as u64) as u8);
        }
        probes.push(s);
    }
    for s in &probes {
        let a = pc.apply(s)?;
        let b = cc.apply(s)?;
        if (a - b).abs() >= 1e-10 {
            return Err(ModelError::Internal(format!(
                "compression broke equivalence: {a} vs {b}"
            )));
        }
    }
    Ok(())
}

/// Storage cost of one compressed word chain, summation form.
pub fn cost_gamma(d: u64, n_alpha: u64) -> Result<u64> {
    if n_alpha < 2 {
        return Err(ModelError::Domain("word length must be >= 2".into()));
    }
    if d == 0 {
        return Err(ModelError::Domain("alphabet size must be >= 1".into()));
    }
    let (d, n) = (d as i128, n_alpha as i128);
    let mut s1: i128 = 0;
    let mut s2: i128 = 0;
    for k in 3..=n {
        s1 += n - k + 1;
        s2 += (k - 3) * (n - k + 1) * (n - k + 1);
    }
    let gamma = d * d + (d + d * d) * s1 + d * s2;
    Ok(gamma as u64)
}

/// The equivalent quartic closed form of `cost_gamma`.
pub fn cost_gamma_closed(d: u64, n_alpha: u64) -> Result<u64> {
    if n_alpha < 2 {
        return Err(ModelError::Domain("word length must be >= 2".into()));
    }
    if d == 0 {
        return Err(ModelError::Domain("alphabet size must be >= 1".into()));
    }
    let (d, n) = (d as i128, n_alpha as i128);
    let poly = 24 - 46 * n + 29 * n * n - 8 * n * n * n + n * n * n * n + 6 * d * (4 - 3 * n + n * n);
    let num = d * poly;
    debug_assert_eq!(num % 12, 0);
    Ok((num / 12) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn toy() -> Hierarchy {
        Hierarchy::from_levels(
            Alphabet::latin(),
            vec![
                vec![
                    ("an", 1.0),
                    ("ey", 1.0),
                    ("he", 1.0),
                    ("ns", 1.0),
                    ("ra", 1.0),
                    ("ru", 1.0),
                    ("th", 1.0),
                    ("un", 1.0),
                ],
                vec![
                    ("hey", 1.0),
                    ("ran", 1.0),
                    ("run", 1.0),
                    ("the", 1.0),
                    ("uns", 1.0),
                ],
                vec![("runs", 1.0), ("they", 1.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn svd_identity_and_rank_one() {
        let id = DMatrix::<f64>::identity(2, 2);
        let (u, s, v) = svd_decompose(&id, 1e-12).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let uv = u * v;
        assert!((&uv - &id).abs().max() < 1e-12);

        let a = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 2.0]);
        let b = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let m = a * b;
        let (_, s, _) = svd_decompose(&m, 1e-12).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0] - 3.0 * 5.0).abs() < 1e-10);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let m = DMatrix::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0));
        let (u, s, v) = svd_decompose(&m, 1e-14).unwrap();
        let mut rebuilt = DMatrix::zeros(6, 4);
        for (i, &sv) in s.iter().enumerate() {
            rebuilt += u.column(i) * sv * v.row(i);
        }
        assert!((&rebuilt - &m).abs().max() < 1e-10);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let bad = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(svd_decompose(&bad, 1e-12).is_err());
    }

    #[test]
    fn word_indicator_fires_only_on_its_word() {
        let h = toy();
        let a = h.alphabet();
        let pc = ProjectorChain::word_indicator(&h, "they").unwrap();
        assert!((pc.apply(&a.encode("they").unwrap()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pc.apply(&a.encode("them").unwrap()).unwrap(), 0.0);
        assert_eq!(pc.apply(&a.encode("runs").unwrap()).unwrap(), 0.0);
        assert!(pc.apply(&a.encode("the").unwrap()).is_err());
        assert!(ProjectorChain::word_indicator(&h, "zzzz").is_err());
    }

    #[test]
    fn compressed_they_chain_is_equivalent_and_small() {
        let h = toy();
        let a = h.alphabet().clone();
        let pc = ProjectorChain::word_indicator(&h, "they").unwrap();
        let cc = compress_chain(&pc, COMPRESS_TOL).unwrap();
        // bond dimensions never exceed the word's own gram counts
        let bonds = cc.bonds();
        assert!(bonds[0] <= 3 && bonds[1] <= 2 && bonds[2] == 1, "{bonds:?}");
        // exhaustive over the letters the tokenset touches, plus random spot checks
        let letters: Vec<u8> = "theyrunas".chars().map(|c| a.index_of(c).unwrap()).collect();
        for &i in &letters {
            for &j in &letters {
                for &k in &letters {
                    for &l in &letters {
                        let s = [i, j, k, l];
                        assert!((pc.apply(&s).unwrap() - cc.apply(&s).unwrap()).abs() < 1e-10);
                    }
                }
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let s: Vec<u8> = (0..4).map(|_| rng.gen_range(0..26u8)).collect();
            assert!((pc.apply(&s).unwrap() - cc.apply(&s).unwrap()).abs() < 1e-10);
        }
        assert!(measured_cost(&cc) <= pc.dense_cost());
        assert!(measured_cost(&cc) as u64 <= cost_gamma(26, 4).unwrap());
    }

    #[test]
    fn bigram_chain_compresses_to_its_row() {
        let h = toy();
        let a = h.alphabet();
        let pc = ProjectorChain::word_indicator(&h, "ru").unwrap();
        let cc = compress_chain(&pc, COMPRESS_TOL).unwrap();
        assert_eq!(measured_cost(&cc), 26 * 26);
        for j in 0..26u8 {
            for k in 0..26u8 {
                let want = if (j, k) == (a.index_of('r').unwrap(), a.index_of('u').unwrap()) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(cc.apply(&[j, k]).unwrap(), want);
            }
        }
    }

    #[test]
    fn exhaustive_equivalence_on_small_alphabet() {
        let a = Alphabet::latin_prefix(4);
        let h = Hierarchy::from_levels(
            a.clone(),
            vec![
                vec![
                    ("ab", 1.0),
                    ("ad", 1.0),
                    ("ba", 1.0),
                    ("bc", 1.0),
                    ("cd", 1.0),
                    ("da", 1.0),
                ],
                vec![("abc", 1.0), ("bcd", 1.0), ("dab", 1.0)],
                vec![("abcd", 1.0), ("dabc", 1.0)],
            ],
        )
        .unwrap();
        for word in ["ab", "abc", "bcd", "dab", "abcd", "dabc"] {
            let pc = ProjectorChain::word_indicator(&h, word).unwrap();
            let cc = compress_chain(&pc, COMPRESS_TOL).unwrap();
            let n = word.len();
            for idx in 0..4usize.pow(n as u32) {
                let mut s = Vec::with_capacity(n);
                let mut rest = idx;
                for _ in 0..n {
                    s.push((rest % 4) as u8);
                    rest /= 4;
                }
                assert!((pc.apply(&s).unwrap() - cc.apply(&s).unwrap()).abs() < 1e-10);
            }
            assert!(measured_cost(&cc) <= pc.dense_cost());
        }
    }

    #[test]
    fn general_cap_chain_is_equivalent() {
        // a non-indicator cap mixing both 4-gram words
        let h = toy();
        let pc = ProjectorChain::from_hierarchy(&h, 4, vec![0.3, 0.9]).unwrap();
        let cc = compress_chain(&pc, COMPRESS_TOL).unwrap();
        let a = h.alphabet();
        assert!((cc.apply(&a.encode("they").unwrap()).unwrap() - 0.9).abs() < 1e-12);
        assert!((cc.apply(&a.encode("runs").unwrap()).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cost_formula_examples_and_identity() {
        assert_eq!(cost_gamma(26, 3).unwrap(), 1378);
        assert_eq!(cost_gamma(26, 4).unwrap(), 2808);
        assert_eq!(cost_gamma(2, 3).unwrap(), 10);
        assert!(cost_gamma(26, 1).is_err());
        assert!(cost_gamma(0, 3).is_err());
        for d in 1..=50 {
            for n in 2..=20 {
                assert_eq!(
                    cost_gamma(d, n).unwrap(),
                    cost_gamma_closed(d, n).unwrap(),
                    "d={d} n={n}"
                );
            }
        }
    }

    #[test]
    fn store_cost_grows_linearly() {
        let a = Alphabet::latin_prefix(4);
        let h = Hierarchy::from_levels(
            a,
            vec![
                vec![
                    ("ab", 1.0),
                    ("ac", 1.0),
                    ("ba", 1.0),
                    ("bc", 1.0),
                    ("ca", 1.0),
                    ("cb", 1.0),
                    ("cd", 1.0),
                    ("da", 1.0),
                    ("db", 1.0),
                    ("dc", 1.0),
                ],
                vec![
                    ("aba", 1.0),
                    ("abc", 1.0),
                    ("acb", 1.0),
                    ("bab", 1.0),
                    ("bca", 1.0),
                    ("bcd", 1.0),
                    ("cab", 1.0),
                    ("cba", 1.0),
                    ("dab", 1.0),
                    ("dcb", 1.0),
                ],
            ],
        )
        .unwrap();
        let words = ["aba", "abc", "acb", "bab", "bca", "bcd", "cab", "cba", "dab", "dcb"];
        let costs: Vec<usize> = words
            .iter()
            .map(|w| {
                let pc = ProjectorChain::word_indicator(&h, w).unwrap();
                measured_cost(&compress_chain(&pc, COMPRESS_TOL).unwrap())
            })
            .collect();
        // independence: total cost of any store prefix is the plain sum
        let mut running = 0usize;
        for (k, &c) in costs.iter().enumerate() {
            running += c;
            let direct: usize = costs[..=k].iter().sum();
            assert_eq!(running, direct);
        }
        // same-length words cost the same, so growth is exactly linear
        assert!(costs.iter().all(|&c| c == costs[0]));
    }
}
