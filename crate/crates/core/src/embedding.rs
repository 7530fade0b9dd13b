//! Auxiliary word neurons learned during replay, key-value recognition,
//! and continual-learning bookkeeping.
//!
//! Each embedding row m stores its grams by expansion string, not by
//! level index, so a record keeps working after the hierarchy that
//! produced it has forgotten or been retrained.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::alphabet::Alphabet;
use crate::compress::CompressedChain;
use crate::error::{ModelError, Result};
use crate::hierarchy::Hierarchy;
use crate::inference::{ReplayOutcome, Superposition};
use crate::tokenizer::TokenRef;

/// Clipped activation transfer: the fast-neuron fixed point.
fn f_clip(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

pub const DEFAULT_XI_M: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub alpha: usize,
    pub word: String,
    /// (level, gram expansion) → synapse weight, all in [0, 1].
    pub m: BTreeMap<(usize, String), f64>,
    pub compressed: Option<CompressedChain>,
}

impl EmbeddingRecord {
    /// Activation from an explicit set of (level, gram) context keys.
    fn activation_from_keys(&self, keys: &BTreeSet<(usize, String)>) -> f64 {
        f_clip(keys.iter().filter_map(|k| self.m.get(k)).sum())
    }
}

/// External drive pinning one embedding during a replay cycle; its
/// magnitude must dominate the unit activation cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinningField {
    pub pinned_alpha: usize,
    pub magnitude: f64,
}

impl PinningField {
    pub fn new(pinned_alpha: usize, magnitude: f64) -> Result<Self> {
        if magnitude.is_nan() || magnitude <= 1.0 {
            return Err(ModelError::Domain(format!(
                "pinning magnitude must exceed 1, got {magnitude}"
            )));
        }
        Ok(Self {
            pinned_alpha,
            magnitude,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    records: Vec<EmbeddingRecord>,
    by_word: HashMap<String, usize>,
    next_alpha: usize,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, alpha: usize) -> Option<&EmbeddingRecord> {
        self.records.iter().find(|r| r.alpha == alpha)
    }

    pub fn get_mut(&mut self, alpha: usize) -> Option<&mut EmbeddingRecord> {
        self.records.iter_mut().find(|r| r.alpha == alpha)
    }

    pub fn by_word(&self, word: &str) -> Option<&EmbeddingRecord> {
        self.by_word.get(word).map(|&i| &self.records[i])
    }

    /// One embedding per distinct word: returns the existing id or
    /// allocates a fresh one.
    pub fn alloc(&mut self, word: &str) -> usize {
        if let Some(&i) = self.by_word.get(word) {
            return self.records[i].alpha;
        }
        let alpha = self.next_alpha;
        self.next_alpha += 1;
        self.by_word.insert(word.to_string(), self.records.len());
        self.records.push(EmbeddingRecord {
            alpha,
            word: word.to_string(),
            m: BTreeMap::new(),
            compressed: None,
        });
        alpha
    }

    pub(crate) fn insert_record(&mut self, rec: EmbeddingRecord) -> Result<()> {
        if self.by_word.contains_key(&rec.word) || self.get(rec.alpha).is_some() {
            return Err(ModelError::Consistency(format!(
                "duplicate embedding {} / {:?}",
                rec.alpha, rec.word
            )));
        }
        self.next_alpha = self.next_alpha.max(rec.alpha + 1);
        self.by_word.insert(rec.word.clone(), self.records.len());
        self.records.push(rec);
        Ok(())
    }

    /// Imprints one replay cycle into the pinned embedding: every replayed
    /// token of order ≥ 2 adds ξ_m (pinned activation is exactly 1),
    /// clipped at the unit cap. No other row is touched.
    pub fn replay_relearn(
        &mut self,
        h: &Hierarchy,
        cycle_output: &[TokenRef],
        pin: &PinningField,
        xi_m: f64,
    ) -> Result<()> {
        if !(xi_m > 0.0 && xi_m <= 1.0) {
            return Err(ModelError::Domain(format!("xi_m must be in (0,1], got {xi_m}")));
        }
        let alphabet = h.alphabet().clone();
        let rec = self.get_mut(pin.pinned_alpha).ok_or_else(|| {
            ModelError::IndexOutOfRange(format!("unallocated embedding {}", pin.pinned_alpha))
        })?;
        for t in cycle_output {
            if t.n < 2 {
                continue;
            }
            let key = (t.n, alphabet.decode(&t.expansion)?);
            let w = rec.m.entry(key).or_insert(0.0);
            *w = f_clip(*w + xi_m);
        }
        Ok(())
    }

    /// Allocates (or finds) the embedding for a replayed word and imprints
    /// the cycle into it.
    pub fn imprint(&mut self, h: &Hierarchy, out: &ReplayOutcome, xi_m: f64) -> Result<usize> {
        let alpha = self.alloc(&out.word);
        let pin = PinningField::new(alpha, 10.0)?;
        self.replay_relearn(h, &out.tokens, &pin, xi_m)?;
        Ok(alpha)
    }

    /// Activation of every embedding against a set of context tokens.
    pub fn embedding_activation(
        &self,
        h: &Hierarchy,
        ctx_grams: &[TokenRef],
    ) -> Vec<(usize, f64)> {
        let keys = token_keys(h.alphabet(), ctx_grams);
        self.records
            .iter()
            .map(|r| (r.alpha, r.activation_from_keys(&keys)))
            .collect()
    }

    /// Key-value next-symbol evidence: each embedding contributes its
    /// activation against the context suffixes (key) times its stored
    /// continuation weight for each symbol (value), independently.
    pub fn key_value_next_token(&self, h: &Hierarchy, ctx: &[u8]) -> Result<Superposition> {
        if ctx.is_empty() {
            return Err(ModelError::EmptyInput("key_value_next_token"));
        }
        let alphabet = h.alphabet();
        let d = alphabet.d();
        let mut keys = BTreeSet::new();
        for n in 2..=ctx.len() {
            keys.insert((n, alphabet.decode(&ctx[ctx.len() - n..])?));
        }
        let mut ev = vec![0.0; d];
        for rec in &self.records {
            let key = rec.activation_from_keys(&keys);
            if key == 0.0 {
                continue;
            }
            for (k, slot) in ev.iter_mut().enumerate() {
                let mut value = 0.0;
                for n in 2..=ctx.len() + 1 {
                    let mut gram = ctx[ctx.len() + 1 - n..].to_vec();
                    gram.push(k as u8);
                    if let Some(w) = rec.m.get(&(n, alphabet.decode(&gram[..n])?)) {
                        value += w;
                    }
                }
                *slot += key * value;
            }
        }
        Ok(Superposition { evidence: ev })
    }

    /// Ranks embeddings by activation against every length-≥2 substring
    /// of a fragment; zero-activation records are dropped, ties break by
    /// embedding id.
    pub fn recognize_word(&self, h: &Hierarchy, fragment: &str) -> Result<Vec<(usize, f64)>> {
        let gram = h.alphabet().encode(fragment)?;
        if gram.is_empty() {
            return Err(ModelError::EmptyInput("recognize_word"));
        }
        let mut keys = BTreeSet::new();
        for n in 2..=gram.len() {
            for start in 0..=gram.len() - n {
                keys.insert((n, h.alphabet().decode(&gram[start..start + n])?));
            }
        }
        let mut ranked: Vec<(usize, f64)> = self
            .records
            .iter()
            .map(|r| (r.alpha, r.activation_from_keys(&keys)))
            .filter(|&(_, a)| a > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        Ok(ranked)
    }

    /// Drops every embedding outside `retain` and hands back a fresh,
    /// trainable hierarchy over the same alphabet. Retained embeddings
    /// keep recognizing through their own cached expansions.
    pub fn forget_and_continue(
        mut self,
        h: &Hierarchy,
        retain: &BTreeSet<usize>,
    ) -> Result<(EmbeddingStore, Hierarchy)> {
        for &alpha in retain {
            let rec = self.get(alpha).ok_or_else(|| {
                ModelError::IndexOutOfRange(format!("retained embedding {alpha} not in store"))
            })?;
            if rec.word.is_empty() || (rec.m.is_empty() && rec.compressed.is_none()) {
                return Err(ModelError::Consistency(format!(
                    "retained embedding {alpha} has no cached expansions"
                )));
            }
        }
        self.records.retain(|r| retain.contains(&r.alpha));
        self.by_word = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.word.clone(), i))
            .collect();
        Ok((self, Hierarchy::new(h.alphabet().clone())))
    }
}

fn token_keys(alphabet: &Alphabet, grams: &[TokenRef]) -> BTreeSet<(usize, String)> {
    grams
        .iter()
        .filter(|t| t.n >= 2)
        .filter_map(|t| alphabet.decode(&t.expansion).ok().map(|s| (t.n, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{replay_cycle, MeasureConfig};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn toy() -> Hierarchy {
        Hierarchy::from_levels(
            Alphabet::latin(),
            vec![
                vec![
                    ("an", 0.3),
                    ("ey", 0.2),
                    ("he", 0.25),
                    ("ns", 0.15),
                    ("ra", 0.4),
                    ("ru", 0.5),
                    ("th", 0.35),
                    ("un", 0.6),
                ],
                vec![
                    ("hey", 0.1),
                    ("ran", 0.7),
                    ("run", 0.8),
                    ("the", 0.45),
                    ("uns", 0.12),
                ],
                vec![("runs", 0.3), ("they", 0.4)],
            ],
        )
        .unwrap()
    }

    fn tokens_of(h: &Hierarchy, word: &str) -> Vec<TokenRef> {
        let gram = h.alphabet().encode(word).unwrap();
        let mut out = Vec::new();
        for n in 2..=gram.len() {
            for s in 0..=gram.len() - n {
                if let Some(t) = crate::tokenizer::token_ref(h, &gram[s..s + n]) {
                    if !out.contains(&t) {
                        out.push(t);
                    }
                }
            }
        }
        out
    }

    fn learned_store(h: &Hierarchy, words: &[&str]) -> EmbeddingStore {
        let mut store = EmbeddingStore::new();
        for w in words {
            let alpha = store.alloc(w);
            let pin = PinningField::new(alpha, 10.0).unwrap();
            store
                .replay_relearn(h, &tokens_of(h, w), &pin, DEFAULT_XI_M)
                .unwrap();
        }
        store
    }

    #[test]
    fn imprint_run_touches_exactly_its_grams() {
        let h = toy();
        let store = learned_store(&h, &["run"]);
        let rec = store.by_word("run").unwrap();
        let keys: Vec<_> = rec.m.keys().cloned().collect();
        assert_eq!(
            keys,
            vec![
                (2, "ru".to_string()),
                (2, "un".to_string()),
                (3, "run".to_string())
            ]
        );
        assert!(rec.m.values().all(|&w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn repeated_imprints_accumulate_then_clip() {
        let h = toy();
        let mut store = learned_store(&h, &["run"]);
        let pin = PinningField::new(0, 10.0).unwrap();
        store
            .replay_relearn(&h, &tokens_of(&h, "run"), &pin, DEFAULT_XI_M)
            .unwrap();
        let rec = store.by_word("run").unwrap();
        assert!(rec.m.values().all(|&w| (w - 0.5).abs() < 1e-15));
        for _ in 0..10 {
            store
                .replay_relearn(&h, &tokens_of(&h, "run"), &pin, DEFAULT_XI_M)
                .unwrap();
        }
        assert!(store.by_word("run").unwrap().m.values().all(|&w| w == 1.0));
    }

    #[test]
    fn relearn_never_touches_other_rows() {
        let h = toy();
        let mut store = learned_store(&h, &["run", "ran"]);
        let before = store.by_word("run").unwrap().m.clone();
        let alpha_ran = store.by_word("ran").unwrap().alpha;
        let pin = PinningField::new(alpha_ran, 10.0).unwrap();
        store
            .replay_relearn(&h, &tokens_of(&h, "ran"), &pin, DEFAULT_XI_M)
            .unwrap();
        assert_eq!(store.by_word("run").unwrap().m, before);
    }

    #[test]
    fn relearn_validates_inputs() {
        let h = toy();
        let mut store = EmbeddingStore::new();
        let pin = PinningField::new(7, 10.0).unwrap();
        assert!(store
            .replay_relearn(&h, &tokens_of(&h, "run"), &pin, DEFAULT_XI_M)
            .is_err());
        assert!(PinningField::new(0, 1.0).is_err());
        let alpha = store.alloc("run");
        let pin = PinningField::new(alpha, 10.0).unwrap();
        assert!(store.replay_relearn(&h, &[], &pin, 0.0).is_err());
    }

    #[test]
    fn activation_superposition_is_symmetric() {
        let h = toy();
        let store = learned_store(&h, &["they", "hey"]);
        let ctx = tokens_of(&h, "he");
        let acts = store.embedding_activation(&h, &ctx);
        assert_eq!(acts.len(), 2);
        assert!(acts[0].1 > 0.0);
        assert_eq!(acts[0].1, acts[1].1);
        assert!(store.embedding_activation(&h, &[]).iter().all(|&(_, a)| a == 0.0));
    }

    #[test]
    fn key_value_evidence_follows_run() {
        let h = toy();
        let store = learned_store(&h, &["run"]);
        let ctx = h.alphabet().encode("ru").unwrap();
        let sup = store.key_value_next_token(&h, &ctx).unwrap();
        let n = h.alphabet().index_of('n').unwrap() as usize;
        assert!(sup.evidence[n] > 0.0);
        assert!(sup
            .evidence
            .iter()
            .enumerate()
            .all(|(k, &e)| k == n || e == 0.0));
    }

    #[test]
    fn key_value_tie_breaks_with_context() {
        let h = toy();
        let store = learned_store(&h, &["run", "ran"]);
        // single letter carries no order->=2 key: equal (zero) evidence
        let sup = store
            .key_value_next_token(&h, &h.alphabet().encode("r").unwrap())
            .unwrap();
        let u = h.alphabet().index_of('u').unwrap() as usize;
        let a = h.alphabet().index_of('a').unwrap() as usize;
        assert_eq!(sup.evidence[u], sup.evidence[a]);
        // "ra" selects the ran-embedding and its continuation 'n'
        let sup = store
            .key_value_next_token(&h, &h.alphabet().encode("ra").unwrap())
            .unwrap();
        let n = h.alphabet().index_of('n').unwrap() as usize;
        assert!(sup.evidence[n] > 0.0);
        assert!((0..26).all(|k| k == n || sup.evidence[k] == 0.0));
        assert!(store.key_value_next_token(&h, &[]).is_err());
    }

    #[test]
    fn key_value_is_additive_over_the_store() {
        let h = toy();
        let both = learned_store(&h, &["run", "runs"]);
        let only_run = learned_store(&h, &["run"]);
        let only_runs = learned_store(&h, &["runs"]);
        let ctx = h.alphabet().encode("run").unwrap();
        let e_both = both.key_value_next_token(&h, &ctx).unwrap();
        let e_a = only_run.key_value_next_token(&h, &ctx).unwrap();
        let e_b = only_runs.key_value_next_token(&h, &ctx).unwrap();
        for k in 0..26 {
            assert!((e_both.evidence[k] - (e_a.evidence[k] + e_b.evidence[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn recognition_ranks_overlap() {
        let h = toy();
        let store = learned_store(&h, &["run", "runs", "they"]);
        let ranked = store.recognize_word(&h, "unn").unwrap();
        let words: Vec<&str> = ranked
            .iter()
            .map(|&(a, _)| store.get(a).unwrap().word.as_str())
            .collect();
        assert_eq!(words.len(), 2);
        assert!(words.contains(&"run") && words.contains(&"runs"));
        // unlearned pair: nothing fires
        assert!(store.recognize_word(&h, "zq").unwrap().is_empty());
        // a gram unique to one word ranks it first
        let ranked = store.recognize_word(&h, "uns").unwrap();
        assert_eq!(store.get(ranked[0].0).unwrap().word, "runs");
    }

    #[test]
    fn recognition_survives_hierarchy_forgetting() {
        let h = toy();
        let store = learned_store(&h, &["run", "they"]);
        let retain: BTreeSet<usize> = store.records().iter().map(|r| r.alpha).collect();
        let (store, fresh) = store.forget_and_continue(&h, &retain).unwrap();
        assert_eq!(fresh.depth(), 1);
        let ranked = store.recognize_word(&fresh, "ru").unwrap();
        assert_eq!(store.get(ranked[0].0).unwrap().word, "run");
    }

    #[test]
    fn two_batch_continual_learning() {
        use crate::hierarchy::TrainConfig;
        use crate::stream::normalize_text;
        let a = Alphabet::latin();
        let cfg = TrainConfig::accumulating(vec![], 8);
        let h1 = Hierarchy::grow_from_text(&normalize_text("run run run", &a), a.clone(), &cfg)
            .unwrap();
        let mut store = EmbeddingStore::new();
        let mcfg = MeasureConfig::sampling(4);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let out = replay_cycle(&h1, &mcfg, 1, &mut rng).unwrap().remove(0);
        assert_eq!(out.word, "run");
        store.imprint(&h1, &out, DEFAULT_XI_M).unwrap();
        let retain: BTreeSet<usize> = store.records().iter().map(|r| r.alpha).collect();
        let (mut store, _) = store.forget_and_continue(&h1, &retain).unwrap();
        // second batch on a fresh hierarchy
        let h2 =
            Hierarchy::grow_from_text(&normalize_text("they they", &a), a.clone(), &cfg).unwrap();
        let out = replay_cycle(&h2, &mcfg, 1, &mut rng).unwrap().remove(0);
        assert_eq!(out.word, "they");
        store.imprint(&h2, &out, DEFAULT_XI_M).unwrap();
        // both batches recognizable afterwards
        let r = store.recognize_word(&h2, "run").unwrap();
        assert_eq!(store.get(r[0].0).unwrap().word, "run");
        let r = store.recognize_word(&h2, "hey").unwrap();
        assert_eq!(store.get(r[0].0).unwrap().word, "they");
    }

    #[test]
    fn forget_everything_empties_store() {
        let h = toy();
        let store = learned_store(&h, &["run"]);
        let (store, fresh) = store.forget_and_continue(&h, &BTreeSet::new()).unwrap();
        assert!(store.is_empty());
        assert!(!fresh.frozen());
    }
}
