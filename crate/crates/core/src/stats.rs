//! Vocabulary statistics: intra-word n-gram histograms, rank-ordered
//! frequency tables, the log-normal density, and its least-squares fit.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistSource {
    Text,
    Vocabulary,
}

/// d_n: number of unique intra-word n-grams per n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramHistogram {
    pub counts: BTreeMap<usize, usize>,
    pub source: HistSource,
}

impl NGramHistogram {
    pub fn d(&self, n: usize) -> usize {
        self.counts.get(&n).copied().unwrap_or(0)
    }

    pub fn n_max(&self) -> usize {
        self.counts
            .iter()
            .filter(|&(_, &c)| c > 0)
            .map(|(&n, _)| n)
            .max()
            .unwrap_or(0)
    }
}

/// Counts distinct length-n substrings occurring inside any word
/// (types, not occurrences), for every n up to the longest word.
pub fn count_intraword_ngrams<S: AsRef<str>>(words: &[S]) -> NGramHistogram {
    let mut sets: BTreeMap<usize, BTreeSet<Vec<u8>>> = BTreeMap::new();
    for w in words {
        let b = w.as_ref().as_bytes();
        for n in 1..=b.len() {
            let set = sets.entry(n).or_default();
            for s in b.windows(n) {
                set.insert(s.to_vec());
            }
        }
    }
    NGramHistogram {
        counts: sets.into_iter().map(|(n, s)| (n, s.len())).collect(),
        source: HistSource::Vocabulary,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Every word occurrence in the multiset contributes.
    Tokens,
    /// Each distinct word contributes once.
    Types,
}

/// Per-n rank-ordered (gram, frequency) lists, descending by frequency,
/// ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankFrequencyTable {
    pub per_n: BTreeMap<usize, Vec<(String, u64)>>,
}

pub fn rank_frequency<S: AsRef<str>>(words: &[S], mode: CountMode) -> RankFrequencyTable {
    let mut owned: Vec<&str> = words.iter().map(|w| w.as_ref()).collect();
    if mode == CountMode::Types {
        owned.sort_unstable();
        owned.dedup();
    }
    let mut tables: BTreeMap<usize, HashMap<String, u64>> = BTreeMap::new();
    for w in &owned {
        let b = w.as_bytes();
        for n in 1..=b.len() {
            let table = tables.entry(n).or_default();
            for s in b.windows(n) {
                *table.entry(String::from_utf8_lossy(s).into_owned()).or_insert(0) += 1;
            }
        }
    }
    let per_n = tables
        .into_iter()
        .map(|(n, t)| {
            let mut v: Vec<(String, u64)> = t.into_iter().collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            (n, v)
        })
        .collect();
    RankFrequencyTable { per_n }
}

/// F(n, μ, σ, 𝒩) = 𝒩·exp(−(ln n − μ)²/2σ²) / (nσ√(2π)).
pub fn lognormal_pdf(n: f64, mu: f64, sigma: f64, n_total: f64) -> Result<f64> {
    if n <= 0.0 {
        return Err(ModelError::Domain(format!("n must be > 0, got {n}")));
    }
    if sigma <= 0.0 {
        return Err(ModelError::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    let z = (n.ln() - mu) / sigma;
    Ok(n_total * (-0.5 * z * z).exp() / (n * sigma * (2.0 * std::f64::consts::PI).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub n_total: f64,
    /// Sum of squared residuals in log(·+1) space.
    pub residual: f64,
}

impl LogNormalFit {
    /// Log-space RMS of the residuals over the fitted points.
    pub fn rms(&self, points: usize) -> f64 {
        (self.residual / points.max(1) as f64).sqrt()
    }
}

fn fit_points(hist: &NGramHistogram) -> Vec<(f64, f64)> {
    // n = 1 is the raw alphabet, not part of the hierarchy shape
    let n_max = hist.n_max();
    (2..=n_max)
        .map(|n| (n as f64, hist.d(n) as f64))
        .collect()
}

fn residual_at(points: &[(f64, f64)], mu: f64, sigma: f64, ln_n: f64) -> f64 {
    let mut acc = 0.0;
    for &(n, d) in points {
        let f = lognormal_pdf(n, mu, sigma, ln_n.exp()).unwrap_or(f64::INFINITY);
        let r = (d + 1.0).ln() - (f + 1.0).ln();
        acc += r * r;
    }
    acc
}

/// Conditional optimum of ln 𝒩 given (μ, σ), using the log-residuals
/// without the +1 guard; exact enough to seed the local search.
fn conditional_ln_n(points: &[(f64, f64)], mu: f64, sigma: f64) -> f64 {
    let mut acc = 0.0;
    let mut cnt = 0.0;
    for &(n, d) in points {
        let phi = lognormal_pdf(n, mu, sigma, 1.0).unwrap();
        if phi > 0.0 {
            acc += (d + 1.0).ln() - phi.ln();
            cnt += 1.0;
        }
    }
    if cnt > 0.0 {
        acc / cnt
    } else {
        0.0
    }
}

/// Least-squares log-normal fit of a histogram: deterministic grid seed
/// (μ ∈ [0.5, 2.5] × σ ∈ [0.1, 1.0]) followed by pattern-search refinement
/// on Σ (log(d_n+1) − log(F(n)+1))². n = 1 is excluded.
pub fn fit_lognormal(hist: &NGramHistogram) -> Result<LogNormalFit> {
    let points = fit_points(hist);
    if points.iter().filter(|&&(_, d)| d > 0.0).count() < 3 {
        return Err(ModelError::InsufficientData(
            "log-normal fit needs >= 3 nonzero points".into(),
        ));
    }
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    let mut mu = 0.5;
    while mu <= 2.5 + 1e-9 {
        let mut sigma = 0.1;
        while sigma <= 1.0 + 1e-9 {
            let ln_n = conditional_ln_n(&points, mu, sigma);
            let r = residual_at(&points, mu, sigma, ln_n);
            if r < best.0 {
                best = (r, mu, sigma, ln_n);
            }
            sigma += 0.02;
        }
        mu += 0.05;
    }
    // pattern search with shrinking steps
    let (mut r, mut mu, mut sigma, mut ln_n) = best;
    let mut steps = [0.05, 0.02, 0.25];
    while steps[0] > 1e-5 {
        let mut improved = false;
        for axis in 0..3 {
            for dir in [-1.0, 1.0] {
                let mut cand = [mu, sigma, ln_n];
                cand[axis] += dir * steps[axis];
                // keep refinement inside a padded version of the seed grid
                if !(0.3..=3.0).contains(&cand[0]) || !(0.05..=1.5).contains(&cand[1]) {
                    continue;
                }
                let rc = residual_at(&points, cand[0], cand[1], cand[2]);
                if rc < r {
                    r = rc;
                    mu = cand[0];
                    sigma = cand[1];
                    ln_n = cand[2];
                    improved = true;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    Ok(LogNormalFit {
        mu,
        sigma,
        n_total: ln_n.exp(),
        residual: r,
    })
}

/// (n_peak, n_max): argmax of d_n over n ≥ 2 (smallest on ties) and the
/// deepest populated level.
pub fn peak_and_collapse(hist: &NGramHistogram) -> Result<(usize, usize)> {
    let n_max = hist.n_max();
    if n_max == 0 {
        return Err(ModelError::EmptyInput("peak_and_collapse"));
    }
    let mut peak = 2;
    let mut best = 0usize;
    for n in 2..=n_max {
        if hist.d(n) > best {
            best = hist.d(n);
            peak = n;
        }
    }
    Ok((peak, n_max))
}
