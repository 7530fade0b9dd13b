use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::alphabet::Alphabet;

/// One step of a pinning stream: a basis symbol, or the zero vector at a
/// space/punctuation character.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamToken {
    Sym(u8),
    Sep,
}

/// A normalized character stream: alphabet symbols interleaved with
/// word separators, with separator runs collapsed to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedStream {
    pub tokens: Vec<StreamToken>,
    pub origin: String,
}

impl NormalizedStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Words of the stream as encoded grams (separator-delimited runs).
    pub fn words(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        for t in &self.tokens {
            match t {
                StreamToken::Sym(i) => cur.push(*i),
                StreamToken::Sep => {
                    if !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                    }
                }
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }

    /// Render back to text, separators as single spaces.
    pub fn render(&self, alphabet: &Alphabet) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                StreamToken::Sym(i) => alphabet.symbol(*i).unwrap_or('?'),
                StreamToken::Sep => ' ',
            })
            .collect()
    }

    /// Split into batches at word boundaries, each batch covering roughly
    /// `batch_len` stream tokens. Splitting only at separators preserves
    /// the n-gram set of the full stream.
    pub fn split_at_boundaries(&self, batch_len: usize) -> Vec<NormalizedStream> {
        let mut batches = Vec::new();
        let mut cur = Vec::new();
        for t in &self.tokens {
            cur.push(*t);
            if cur.len() >= batch_len && matches!(t, StreamToken::Sep) {
                batches.push(NormalizedStream {
                    tokens: std::mem::take(&mut cur),
                    origin: format!("{} (batch {})", self.origin, batches.len()),
                });
            }
        }
        if !cur.is_empty() {
            batches.push(NormalizedStream {
                tokens: cur,
                origin: format!("{} (batch {})", self.origin, batches.len()),
            });
        }
        batches
    }
}

/// Lowercase and map every non-alphabet character run to a single separator.
pub fn normalize_text(raw: &str, alphabet: &Alphabet) -> NormalizedStream {
    let mut tokens: Vec<StreamToken> = Vec::with_capacity(raw.len());
    for c in raw.chars() {
        let mut mapped = None;
        for lc in c.to_lowercase() {
            if let Some(i) = alphabet.index_of(lc) {
                mapped = Some(i);
                break;
            }
        }
        match mapped {
            Some(i) => tokens.push(StreamToken::Sym(i)),
            None => {
                if !matches!(tokens.last(), Some(StreamToken::Sep)) {
                    tokens.push(StreamToken::Sep);
                }
            }
        }
    }
    NormalizedStream {
        tokens,
        origin: "text".to_string(),
    }
}

/// An i.i.d. uniform random string over the alphabet, deterministic under seed.
pub fn uniform_random_string(length: usize, seed: u64, alphabet: &Alphabet) -> String {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..length)
        .map(|_| alphabet.symbols()[rng.gen_range(0..alphabet.d())])
        .collect()
}

/// Derive an independent per-cycle seed from (seed, label) via splitmix64.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_pinning_walkthrough() {
        let a = Alphabet::latin();
        let s = normalize_text("My name", &a);
        let want: Vec<StreamToken> = "my name"
            .chars()
            .map(|c| match a.index_of(c) {
                Some(i) => StreamToken::Sym(i),
                None => StreamToken::Sep,
            })
            .collect();
        assert_eq!(s.tokens, want);
    }

    #[test]
    fn normalize_collapses_punctuation() {
        let a = Alphabet::latin();
        let s = normalize_text("Alice!", &a);
        assert_eq!(s.tokens.len(), 6);
        assert_eq!(s.tokens[5], StreamToken::Sep);
        let only_dash = normalize_text("\u{2014}", &a);
        assert_eq!(only_dash.tokens, vec![StreamToken::Sep]);
    }

    #[test]
    fn normalize_is_idempotent_through_render() {
        let a = Alphabet::latin();
        let s = normalize_text("Some text, with -- punctuation!!", &a);
        let again = normalize_text(&s.render(&a), &a);
        assert_eq!(s.tokens, again.tokens);
    }

    #[test]
    fn random_string_deterministic() {
        let a = Alphabet::latin();
        assert_eq!(
            uniform_random_string(64, 7, &a),
            uniform_random_string(64, 7, &a)
        );
        assert_eq!(uniform_random_string(1, 3, &a).chars().count(), 1);
    }
}
