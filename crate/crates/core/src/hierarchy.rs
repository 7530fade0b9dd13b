//! Levels of learned n-grams, Hebbian training with forgetting, projector
//! construction with cutoffs, the smoothness constraint, and random growth.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::alphabet::{Alphabet, NGram};
use crate::error::{ModelError, Result};
use crate::stream::{NormalizedStream, StreamToken};

/// Synaptic forgetting regime.
///
/// `Window(xi)` is the decaying update g ← (1-ξ)g + ξ·activity with
/// ξ = 1/N_g. `Infinite` is the N_g → ∞ stationary limit: occurrences are
/// accumulated and normalized by total steps, so g is the empirical window
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forgetting {
    Window(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub forgetting: Forgetting,
    /// Cutoffs ε_2, ε_3, … ; missing entries default to 0.
    pub epsilons: Vec<f64>,
    pub max_level: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn accumulating(epsilons: Vec<f64>, max_level: usize) -> Self {
        Self {
            forgetting: Forgetting::Infinite,
            epsilons,
            max_level,
            seed: 0,
        }
    }

    pub fn with_xi(xi_g: f64, epsilons: Vec<f64>, max_level: usize) -> Result<Self> {
        if !(xi_g > 0.0 && xi_g <= 1.0) {
            return Err(ModelError::Domain(format!("xi_g must be in (0,1], got {xi_g}")));
        }
        Ok(Self {
            forgetting: Forgetting::Window(xi_g),
            epsilons,
            max_level,
            seed: 0,
        })
    }

    /// ξ_g = 1/N_g.
    pub fn with_horizon(n_g: u64, epsilons: Vec<f64>, max_level: usize) -> Result<Self> {
        if n_g == 0 {
            return Err(ModelError::Domain("N_g must be >= 1".into()));
        }
        Self::with_xi(1.0 / n_g as f64, epsilons, max_level)
    }

    pub fn epsilon_for(&self, n: usize) -> f64 {
        debug_assert!(n >= 2);
        self.epsilons.get(n - 2).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_level < 2 {
            return Err(ModelError::Domain("max_level must be >= 2".into()));
        }
        for &e in &self.epsilons {
            if !(0.0..1.0).contains(&e) {
                return Err(ModelError::Domain(format!("epsilon {e} outside [0,1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Entry {
    /// Value as of `step`; decays lazily by (1-ξ)^(now-step) on read.
    Ema { value: f64, step: u64 },
    Count(u64),
}

/// The per-level Hebbian weights g^(n), keyed by (μ_{n-1}, k).
///
/// For n = 2 the context index μ_1 is the basis symbol itself. Only
/// smoothness-admissible pairs are ever imprinted; the caller checks
/// admissibility before passing an active pair.
#[derive(Debug, Clone)]
pub struct SynapseMatrix {
    n: usize,
    prev_dim: usize,
    d: usize,
    forgetting: Forgetting,
    steps: u64,
    entries: HashMap<(u32, u8), Entry>,
}

impl SynapseMatrix {
    pub fn new(n: usize, prev_dim: usize, d: usize, forgetting: Forgetting) -> Self {
        Self {
            n,
            prev_dim,
            d,
            forgetting,
            steps: 0,
            entries: HashMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn check_pair(&self, pair: (u32, u8)) -> Result<()> {
        if (pair.0 as usize) >= self.prev_dim || (pair.1 as usize) >= self.d {
            return Err(ModelError::IndexOutOfRange(format!(
                "pair ({}, {}) for dims ({}, {})",
                pair.0, pair.1, self.prev_dim, self.d
            )));
        }
        Ok(())
    }

    /// One Hebbian step: every entry decays by (1-ξ_g); the active pair,
    /// if any, additionally gains ξ_g (firing rates are one-hot 0/1).
    pub fn step(&mut self, active: Option<(u32, u8)>) -> Result<()> {
        if let Some(pair) = active {
            self.check_pair(pair)?;
        }
        self.steps += 1;
        if let Some(pair) = active {
            match self.forgetting {
                Forgetting::Window(xi) => {
                    let now = self.steps;
                    let e = self
                        .entries
                        .entry(pair)
                        .or_insert(Entry::Ema { value: 0.0, step: now - 1 });
                    if let Entry::Ema { value, step } = e {
                        let decayed = *value * (1.0 - xi).powi((now - *step) as i32 - 1);
                        *value = (1.0 - xi) * decayed + xi;
                        *step = now;
                    }
                }
                Forgetting::Infinite => {
                    let e = self.entries.entry(pair).or_insert(Entry::Count(0));
                    if let Entry::Count(c) = e {
                        *c += 1;
                    }
                }
            }
        }
        Ok(())
    }

    /// Current value of g for a pair (zero if never imprinted).
    pub fn value(&self, pair: (u32, u8)) -> Result<f64> {
        self.check_pair(pair)?;
        Ok(self.entry_value(self.entries.get(&pair)))
    }

    fn entry_value(&self, e: Option<&Entry>) -> f64 {
        match e {
            None => 0.0,
            Some(Entry::Ema { value, step }) => match self.forgetting {
                Forgetting::Window(xi) => value * (1.0 - xi).powi((self.steps - step) as i32),
                Forgetting::Infinite => unreachable!(),
            },
            Some(Entry::Count(c)) => {
                if self.steps == 0 {
                    0.0
                } else {
                    *c as f64 / self.steps as f64
                }
            }
        }
    }

    /// All nonzero entries materialized at the current step.
    pub fn nonzero(&self) -> Vec<((u32, u8), f64)> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .map(|(k, e)| (*k, self.entry_value(Some(e))))
            .filter(|(_, g)| *g > 0.0)
            .collect();
        v.sort_by_key(|(k, _)| *k);
        v
    }
}

/// One level of the hierarchy: the learned n-grams with their surviving
/// weights, plus lookup tables used by tokenization and inference.
#[derive(Debug, Clone)]
pub struct Level {
    pub n: usize,
    grams: Vec<NGram>,
    weights: Vec<f64>,
    index: HashMap<NGram, usize>,
    /// (n-1)-prefix → (last symbol, gram index): right continuations.
    by_prefix: HashMap<NGram, Vec<(u8, usize)>>,
    /// (n-1)-suffix → (first symbol, gram index): left continuations.
    by_suffix: HashMap<NGram, Vec<(u8, usize)>>,
}

impl Level {
    /// Builds a level from (gram, weight) pairs; grams are deduplicated and
    /// ordered lexicographically so μ_n assignment is deterministic.
    pub fn from_pairs(n: usize, mut pairs: Vec<(NGram, f64)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        let mut grams = Vec::with_capacity(pairs.len());
        let mut weights = Vec::with_capacity(pairs.len());
        let mut index = HashMap::with_capacity(pairs.len());
        let mut by_prefix: HashMap<NGram, Vec<(u8, usize)>> = HashMap::new();
        let mut by_suffix: HashMap<NGram, Vec<(u8, usize)>> = HashMap::new();
        for (mu, (gram, w)) in pairs.into_iter().enumerate() {
            if gram.len() != n {
                return Err(ModelError::LengthMismatch {
                    expected: n,
                    got: gram.len(),
                });
            }
            by_prefix
                .entry(gram[..n - 1].to_vec())
                .or_default()
                .push((gram[n - 1], mu));
            by_suffix
                .entry(gram[1..].to_vec())
                .or_default()
                .push((gram[0], mu));
            index.insert(gram.clone(), mu);
            grams.push(gram);
            weights.push(w);
        }
        Ok(Self {
            n,
            grams,
            weights,
            index,
            by_prefix,
            by_suffix,
        })
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn grams(&self) -> &[NGram] {
        &self.grams
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gram(&self, mu: usize) -> Result<&NGram> {
        self.grams
            .get(mu)
            .ok_or_else(|| ModelError::IndexOutOfRange(format!("mu {mu} at level {}", self.n)))
    }

    pub fn index_of(&self, gram: &[u8]) -> Option<usize> {
        self.index.get(gram).copied()
    }

    pub fn contains(&self, gram: &[u8]) -> bool {
        self.index.contains_key(gram)
    }

    pub fn weight_of(&self, gram: &[u8]) -> Option<f64> {
        self.index_of(gram).map(|mu| self.weights[mu])
    }

    /// Right continuations of an (n-1)-prefix: (appended symbol, μ_n).
    pub fn continuations(&self, prefix: &[u8]) -> &[(u8, usize)] {
        self.by_prefix.get(prefix).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Left continuations of an (n-1)-suffix: (prepended symbol, μ_n).
    pub fn left_continuations(&self, suffix: &[u8]) -> &[(u8, usize)] {
        self.by_suffix.get(suffix).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// The trained model: ordered levels of learned n-grams over an alphabet.
///
/// Levels are contiguous from n = 2; the DAG (smoothness) property holds
/// across adjacent levels. A frozen hierarchy is immutable and safely
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    alphabet: Alphabet,
    levels: Vec<Level>,
    frozen: bool,
}

impl Hierarchy {
    pub fn new(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            levels: Vec::new(),
            frozen: false,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Deepest populated level (1 when only the basis set exists).
    pub fn depth(&self) -> usize {
        if self.levels.is_empty() {
            1
        } else {
            self.levels[self.levels.len() - 1].n
        }
    }

    pub fn level(&self, n: usize) -> Option<&Level> {
        if n < 2 {
            return None;
        }
        self.levels.get(n - 2)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn total_grams(&self) -> usize {
        self.levels.iter().map(Level::len).sum()
    }

    /// True iff `gram` is a learned token: a basis symbol or a member of
    /// its level.
    pub fn contains_gram(&self, gram: &[u8]) -> bool {
        match gram.len() {
            0 => false,
            1 => (gram[0] as usize) < self.alphabet.d(),
            n => self.level(n).is_some_and(|l| l.contains(gram)),
        }
    }

    pub fn push_level(&mut self, level: Level) -> Result<()> {
        if self.frozen {
            return Err(ModelError::Consistency("hierarchy is frozen".into()));
        }
        let expected = self.depth() + 1;
        if level.n != expected.max(2) {
            return Err(ModelError::HierarchyOrder {
                requested: level.n,
                missing: expected.max(2),
            });
        }
        self.levels.push(level);
        Ok(())
    }

    /// Builds a frozen hierarchy directly from (gram string, weight) level
    /// listings. Intended for tests and hand-built toys; the DAG property
    /// is validated.
    pub fn from_levels(alphabet: Alphabet, levels: Vec<Vec<(&str, f64)>>) -> Result<Self> {
        let mut h = Self::new(alphabet);
        for (i, pairs) in levels.into_iter().enumerate() {
            let n = i + 2;
            let encoded = pairs
                .into_iter()
                .map(|(s, w)| Ok((h.alphabet.encode(s)?, w)))
                .collect::<Result<Vec<_>>>()?;
            let level = Level::from_pairs(n, encoded)?;
            h.validate_smooth(&level)?;
            h.push_level(level)?;
        }
        h.freeze();
        Ok(h)
    }

    fn validate_smooth(&self, level: &Level) -> Result<()> {
        if level.n < 3 {
            return Ok(());
        }
        let prev = self.level(level.n - 1).ok_or(ModelError::HierarchyOrder {
            requested: level.n,
            missing: level.n - 1,
        })?;
        for g in level.grams() {
            if !prev.contains(&g[..level.n - 1]) || !prev.contains(&g[1..]) {
                return Err(ModelError::Consistency(format!(
                    "gram at level {} violates smoothness",
                    level.n
                )));
            }
        }
        Ok(())
    }

    /// Trains g^(n) by sliding the two-slot window {ṽ^(n-1)(x-n+1), v(x)}
    /// over the stream. Only smoothness-admissible candidates imprint
    /// (prefix learned ∧ suffix learned); every other step is pure decay.
    pub fn train_level(
        &self,
        n: usize,
        stream: &NormalizedStream,
        cfg: &TrainConfig,
    ) -> Result<SynapseMatrix> {
        cfg.validate()?;
        if n < 2 {
            return Err(ModelError::Domain("level must be >= 2".into()));
        }
        let d = self.alphabet.d();
        let prev_dim = if n == 2 {
            d
        } else {
            self.level(n - 1)
                .ok_or(ModelError::HierarchyOrder {
                    requested: n,
                    missing: n - 1,
                })?
                .len()
        };
        let mut g = SynapseMatrix::new(n, prev_dim, d, cfg.forgetting);
        let toks = &stream.tokens;
        for x in 0..toks.len() {
            g.step(self.window_pair(n, toks, x))?;
        }
        Ok(g)
    }

    /// The active (μ_{n-1}, k) pair for the window ending at `x`, if the
    /// window is fully pinned and the implied n-gram is admissible.
    fn window_pair(&self, n: usize, toks: &[StreamToken], x: usize) -> Option<(u32, u8)> {
        if x + 1 < n {
            return None;
        }
        let mut window = Vec::with_capacity(n);
        for t in &toks[x + 1 - n..=x] {
            match t {
                StreamToken::Sym(i) => window.push(*i),
                StreamToken::Sep => return None,
            }
        }
        let k = window[n - 1];
        if n == 2 {
            return Some((window[0] as u32, k));
        }
        let prev = self.level(n - 1)?;
        let mu = prev.index_of(&window[..n - 1])?;
        // Remedy (1): the suffix (n-1)-gram must also be learned.
        if !prev.contains(&window[1..]) {
            return None;
        }
        Some((mu as u32, k))
    }

    /// Thresholds a trained synapse matrix into a level: exactly the
    /// n-grams with g > eps, lexicographically indexed, weights retained.
    pub fn build_level(&self, g: &SynapseMatrix, eps: f64) -> Result<Level> {
        let n = g.n();
        let mut pairs = Vec::new();
        for ((mu, k), w) in g.nonzero() {
            if w > eps {
                let mut gram = if n == 2 {
                    vec![mu as u8]
                } else {
                    self.level(n - 1)
                        .ok_or(ModelError::HierarchyOrder {
                            requested: n,
                            missing: n - 1,
                        })?
                        .gram(mu as usize)?
                        .clone()
                };
                gram.push(k);
                pairs.push((gram, w));
            }
        }
        Level::from_pairs(n, pairs)
    }

    /// Remedy (2): removes any n-gram whose (n-1)-prefix or suffix is
    /// absent from the previous level. Idempotent; a no-op at n = 2.
    pub fn enforce_smoothness(&self, level: Level) -> Result<Level> {
        if level.n < 3 {
            return Ok(level);
        }
        let prev = self.level(level.n - 1).ok_or(ModelError::HierarchyOrder {
            requested: level.n,
            missing: level.n - 1,
        })?;
        let n = level.n;
        let pairs = level
            .grams
            .into_iter()
            .zip(level.weights)
            .filter(|(g, _)| prev.contains(&g[..n - 1]) && prev.contains(&g[1..]))
            .collect();
        Level::from_pairs(n, pairs)
    }

    /// Grows a hierarchy from a normalized stream: train → threshold →
    /// smooth, level by level, until collapse or max_level.
    pub fn grow_from_text(
        stream: &NormalizedStream,
        alphabet: Alphabet,
        cfg: &TrainConfig,
    ) -> Result<Hierarchy> {
        cfg.validate()?;
        let mut h = Hierarchy::new(alphabet);
        for n in 2..=cfg.max_level {
            let g = h.train_level(n, stream, cfg)?;
            let level = h.enforce_smoothness(h.build_level(&g, cfg.epsilon_for(n))?)?;
            if level.is_empty() {
                break;
            }
            h.push_level(level)?;
        }
        h.freeze();
        Ok(h)
    }

    /// Grows a random hierarchy: g sampled uniformly over [0,1] on the
    /// smoothness-admissible pairs only, thresholded by ε_n, until collapse
    /// or max_level. Deterministic given cfg.seed.
    pub fn grow_random(cfg: &TrainConfig, alphabet: Alphabet) -> Result<Hierarchy> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let d = alphabet.d();
        let mut h = Hierarchy::new(alphabet);
        for n in 2..=cfg.max_level {
            let eps = cfg.epsilon_for(n);
            let mut pairs: Vec<(NGram, f64)> = Vec::new();
            if n == 2 {
                for j in 0..d {
                    for k in 0..d {
                        let g: f64 = rng.gen();
                        if g > eps {
                            pairs.push((vec![j as u8, k as u8], g));
                        }
                    }
                }
            } else {
                let prev = h.level(n - 1).unwrap();
                for gram in prev.grams() {
                    for k in 0..d {
                        // admissible iff the suffix (n-1)-gram is learned
                        let mut suffix = gram[1..].to_vec();
                        suffix.push(k as u8);
                        if !prev.contains(&suffix) {
                            continue;
                        }
                        let g: f64 = rng.gen();
                        if g > eps {
                            let mut full = gram.clone();
                            full.push(k as u8);
                            pairs.push((full, g));
                        }
                    }
                }
            }
            let level = h.enforce_smoothness(Level::from_pairs(n, pairs)?)?;
            if level.is_empty() {
                break;
            }
            h.push_level(level)?;
        }
        h.freeze();
        Ok(h)
    }
}

/// Analytic solution of τ_g·ġ + g = Λ with g(0) = g0, used as an oracle
/// against the iterated update rule.
pub fn decay_closed_form(g0: f64, t: f64, tau_g: f64, lambda: f64) -> Result<f64> {
    if tau_g <= 0.0 {
        return Err(ModelError::Domain(format!("tau_g must be > 0, got {tau_g}")));
    }
    if t < 0.0 {
        return Err(ModelError::Domain(format!("t must be >= 0, got {t}")));
    }
    Ok(lambda + (g0 - lambda) * (-t / tau_g).exp())
}

/// Minimal occurrence count M with M/N_g > ε: the lower frequency bound
/// below which a pattern cannot cross the cutoff.
pub fn learning_threshold_bound(eps: f64, n_g: u64) -> u64 {
    // nudge guards against products like 0.85 * 100 landing just below an integer
    (eps * n_g as f64 + 1e-9).floor() as u64 + 1
}
