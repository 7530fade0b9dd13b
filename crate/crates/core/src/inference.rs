//! Next-token inference over a hierarchy: order-weighted evidence,
//! measurement, left inference, replay cycles, and vocabulary generation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::alphabet::NGram;
use crate::error::{ModelError, Result};
use crate::hierarchy::Hierarchy;
use crate::stream::derive_seed;
use crate::tokenizer::{token_ref, TokenRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMode {
    Sample,
    Argmax,
}

#[derive(Debug, Clone)]
pub struct MeasureConfig {
    /// Order weighting β^n, biasing inference toward longer correlations.
    pub beta: f64,
    pub seed: u64,
    pub mode: MeasureMode,
}

impl MeasureConfig {
    pub fn new(beta: f64, seed: u64, mode: MeasureMode) -> Result<Self> {
        if beta.is_nan() || beta < 1.0 {
            return Err(ModelError::Domain(format!("beta must be >= 1, got {beta}")));
        }
        Ok(Self { beta, seed, mode })
    }

    pub fn sampling(seed: u64) -> Self {
        Self {
            beta: 1.0,
            seed,
            mode: MeasureMode::Sample,
        }
    }

    pub fn argmax() -> Self {
        Self {
            beta: 1.0,
            seed: 0,
            mode: MeasureMode::Argmax,
        }
    }
}

/// Unnormalized next-symbol evidence over the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Superposition {
    pub evidence: Vec<f64>,
}

impl Superposition {
    pub fn null(d: usize) -> Self {
        Self {
            evidence: vec![0.0; d],
        }
    }

    pub fn is_null(&self) -> bool {
        self.evidence.iter().all(|&e| e == 0.0)
    }

    /// Normalized distribution ρ, or None when all evidence vanishes.
    pub fn rho(&self) -> Option<Vec<f64>> {
        let total: f64 = self.evidence.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(self.evidence.iter().map(|e| e / total).collect())
    }
}

fn check_ctx(h: &Hierarchy, ctx: &[u8], what: &'static str) -> Result<()> {
    if ctx.is_empty() {
        return Err(ModelError::EmptyInput(what));
    }
    for &s in ctx {
        if (s as usize) >= h.alphabet().d() {
            return Err(ModelError::IndexOutOfRange(format!("context symbol {s}")));
        }
    }
    Ok(())
}

/// Evidence for the symbol following `ctx`:
/// evidence_k = Σ_n β^n · g^(n)(suffix of length n−1, k), summed over
/// every order the context and hierarchy support. A vanished suffix
/// projection contributes nothing.
pub fn next_token_evidence(
    h: &Hierarchy,
    ctx: &[u8],
    cfg: &MeasureConfig,
) -> Result<Superposition> {
    check_ctx(h, ctx, "next_token_evidence")?;
    let d = h.alphabet().d();
    let mut ev = vec![0.0; d];
    for n in 2..=(ctx.len() + 1).min(h.depth().max(2)) {
        let level = match h.level(n) {
            Some(l) => l,
            None => break,
        };
        let suffix = &ctx[ctx.len() + 1 - n..];
        let bn = cfg.beta.powi(n as i32);
        for &(k, mu) in level.continuations(suffix) {
            ev[k as usize] += bn * level.weights()[mu];
        }
    }
    Ok(Superposition { evidence: ev })
}

/// Mirror of `next_token_evidence` for the symbol preceding `ctx`,
/// evaluated through the left-tokenized (suffix-keyed) tables.
pub fn prev_token_evidence(
    h: &Hierarchy,
    ctx: &[u8],
    cfg: &MeasureConfig,
) -> Result<Superposition> {
    check_ctx(h, ctx, "prev_token_evidence")?;
    let d = h.alphabet().d();
    let mut ev = vec![0.0; d];
    for n in 2..=(ctx.len() + 1).min(h.depth().max(2)) {
        let level = match h.level(n) {
            Some(l) => l,
            None => break,
        };
        let prefix = &ctx[..n - 1];
        let bn = cfg.beta.powi(n as i32);
        for &(j, mu) in level.left_continuations(prefix) {
            ev[j as usize] += bn * level.weights()[mu];
        }
    }
    Ok(Superposition { evidence: ev })
}

/// Collapse a superposition to one symbol, or halt (None) when the
/// evidence is identically zero.
pub fn measure(
    sup: &Superposition,
    cfg: &MeasureConfig,
    rng: &mut impl Rng,
) -> Result<Option<u8>> {
    if sup.evidence.iter().any(|&e| e < 0.0) {
        return Err(ModelError::Consistency("negative evidence".into()));
    }
    let rho = match sup.rho() {
        Some(r) => r,
        None => return Ok(None),
    };
    let k = match cfg.mode {
        MeasureMode::Argmax => {
            let mut best = 0usize;
            for (i, &p) in rho.iter().enumerate() {
                if p > rho[best] {
                    best = i;
                }
            }
            best
        }
        MeasureMode::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = rho.len() - 1;
            for (i, &p) in rho.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        }
    };
    Ok(Some(k as u8))
}

/// Zeroes every candidate whose one-symbol extension of the full context
/// is not itself a learned gram. Words built under this gate stay smooth,
/// and inference halts exactly at maximal smooth strings.
fn gate_right(h: &Hierarchy, ctx: &[u8], sup: &mut Superposition) {
    let mut allowed = vec![false; sup.evidence.len()];
    if let Some(level) = h.level(ctx.len() + 1) {
        for &(k, _) in level.continuations(ctx) {
            allowed[k as usize] = true;
        }
    }
    for (e, ok) in sup.evidence.iter_mut().zip(allowed) {
        if !ok {
            *e = 0.0;
        }
    }
}

fn gate_left(h: &Hierarchy, ctx: &[u8], sup: &mut Superposition) {
    let mut allowed = vec![false; sup.evidence.len()];
    if let Some(level) = h.level(ctx.len() + 1) {
        for &(j, _) in level.left_continuations(ctx) {
            allowed[j as usize] = true;
        }
    }
    for (e, ok) in sup.evidence.iter_mut().zip(allowed) {
        if !ok {
            *e = 0.0;
        }
    }
}

/// Prepend measured symbols until the left word boundary: halts when no
/// learned gram extends the context one symbol to the left.
pub fn infer_left(
    h: &Hierarchy,
    ctx: &[u8],
    cfg: &MeasureConfig,
    rng: &mut impl Rng,
) -> Result<NGram> {
    check_ctx(h, ctx, "infer_left")?;
    let mut w = ctx.to_vec();
    loop {
        let mut sup = prev_token_evidence(h, &w, cfg)?;
        gate_left(h, &w, &mut sup);
        match measure(&sup, cfg, rng)? {
            Some(j) => w.insert(0, j),
            None => break,
        }
    }
    Ok(w)
}

/// Append measured symbols until the right word boundary.
pub fn infer_right(
    h: &Hierarchy,
    ctx: &[u8],
    cfg: &MeasureConfig,
    rng: &mut impl Rng,
) -> Result<NGram> {
    check_ctx(h, ctx, "infer_right")?;
    let mut w = ctx.to_vec();
    loop {
        let mut sup = next_token_evidence(h, &w, cfg)?;
        gate_right(h, &w, &mut sup);
        match measure(&sup, cfg, rng)? {
            Some(k) => w.push(k),
            None => break,
        }
    }
    Ok(w)
}

/// One replayed word with the tokens it exercised (all learned n-grams
/// of the word, for embedding imprinting).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub word: String,
    pub gram: NGram,
    pub tokens: Vec<TokenRef>,
}

fn substring_tokens(h: &Hierarchy, word: &[u8]) -> Vec<TokenRef> {
    let mut out = Vec::new();
    if word.len() == 1 {
        if let Some(t) = token_ref(h, word) {
            out.push(t);
        }
        return out;
    }
    for n in 2..=word.len() {
        for start in 0..=word.len() - n {
            if let Some(t) = token_ref(h, &word[start..start + n]) {
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
    }
    out
}

/// One full replay: sample an initial symbol, infer left to the word
/// boundary, then run right inference `repeats` times from that boundary.
/// Initial symbols are uniform over letters that begin a learned bigram
/// (all letters when no bigrams exist).
pub fn replay_cycle(
    h: &Hierarchy,
    cfg: &MeasureConfig,
    repeats: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ReplayOutcome>> {
    if repeats == 0 {
        return Err(ModelError::Domain("repeats must be >= 1".into()));
    }
    let d = h.alphabet().d();
    let starters: Vec<u8> = match h.level(2) {
        Some(l) => {
            let mut s: Vec<u8> = l.grams().iter().map(|g| g[0]).collect();
            s.sort_unstable();
            s.dedup();
            s
        }
        None => (0..d as u8).collect(),
    };
    let seed_sym = starters[rng.gen_range(0..starters.len())];
    let left = infer_left(h, &[seed_sym], cfg, rng)?;
    let mut out = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let gram = infer_right(h, &left, cfg, rng)?;
        out.push(ReplayOutcome {
            word: h.alphabet().decode(&gram)?,
            tokens: substring_tokens(h, &gram),
            gram,
        });
    }
    Ok(out)
}

/// `n_words` independent replay cycles; cycle i uses a seed derived from
/// (cfg.seed, i), so the multiset is deterministic and order-independent.
pub fn generate_vocabulary(
    h: &Hierarchy,
    n_words: usize,
    cfg: &MeasureConfig,
) -> Result<Vec<String>> {
    if n_words == 0 {
        return Err(ModelError::Domain("n_words must be >= 1".into()));
    }
    (0..n_words)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, i as u64));
            Ok(replay_cycle(h, cfg, 1, &mut rng)?.remove(0).word)
        })
        .collect()
}
