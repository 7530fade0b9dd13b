//! String-side use of the hierarchy: smoothness tests, maximal-token
//! segmentation, forced-boundary detection, and token decoding.

use std::collections::HashMap;

use crate::alphabet::NGram;
use crate::error::{ModelError, Result};
use crate::hierarchy::Hierarchy;

/// A handle to a learned token: its level, its index μ_n within that level,
/// and the basis-symbol expansion. Level 1 refers to a basis symbol itself.
///
/// Equality is (n, expansion); weights play no role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRef {
    pub n: usize,
    pub mu: usize,
    pub expansion: NGram,
}

/// One tiling of a string by maximal smooth tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub tokens: Vec<TokenRef>,
    /// Interior cut positions, strictly increasing.
    pub boundaries: Vec<usize>,
    /// True iff no alternative maximal tiling exists.
    pub unique: bool,
}

/// A string is smooth iff every substring of every length is learned —
/// equivalently, the whole string sits in the level of its own length.
/// Strings longer than the deepest level are never smooth.
pub fn is_smooth(h: &Hierarchy, s: &str) -> Result<bool> {
    let gram = h.alphabet().encode(s)?;
    if gram.is_empty() {
        return Err(ModelError::EmptyInput("is_smooth"));
    }
    Ok(h.contains_gram(&gram))
}

/// Iterated projection of a string to its token at level len(s); `None`
/// where any projection along the way vanishes.
pub fn project_up(h: &Hierarchy, s: &str) -> Result<Option<TokenRef>> {
    let gram = h.alphabet().encode(s)?;
    if gram.len() < 2 {
        return Err(ModelError::Domain(
            "project_up needs a string of length >= 2".into(),
        ));
    }
    Ok(token_ref(h, &gram))
}

/// TokenRef for a gram of any length >= 1, or None if not learned.
pub(crate) fn token_ref(h: &Hierarchy, gram: &[u8]) -> Option<TokenRef> {
    match gram.len() {
        0 => None,
        1 => {
            if (gram[0] as usize) < h.alphabet().d() {
                Some(TokenRef {
                    n: 1,
                    mu: gram[0] as usize,
                    expansion: gram.to_vec(),
                })
            } else {
                None
            }
        }
        n => {
            let mu = h.level(n)?.index_of(gram)?;
            Some(TokenRef {
                n,
                mu,
                expansion: gram.to_vec(),
            })
        }
    }
}

/// Recovers the basis-symbol list of a learned token by peeling one suffix
/// symbol per level, re-validating each intermediate against the hierarchy.
pub fn decode_token(h: &Hierarchy, t: &TokenRef) -> Result<Vec<u8>> {
    let mut gram = t.expansion.clone();
    if gram.len() != t.n || gram.is_empty() {
        return Err(ModelError::Consistency("token expansion/level mismatch".into()));
    }
    let mut peeled = Vec::with_capacity(t.n);
    while gram.len() >= 2 {
        if !h.contains_gram(&gram) {
            return Err(ModelError::Consistency(format!(
                "stale token at level {}",
                gram.len()
            )));
        }
        peeled.push(*gram.last().unwrap());
        gram.pop();
    }
    if !h.contains_gram(&gram) {
        return Err(ModelError::Consistency("stale basis symbol".into()));
    }
    peeled.push(gram[0]);
    peeled.reverse();
    Ok(peeled)
}

/// All tilings of `s` by maximal smooth tokens.
///
/// A token is maximal within its residual interval: it cannot be grown
/// left or right by one symbol, inside the part of the string not already
/// claimed by previously placed tokens, and stay smooth. Single letters
/// are always admissible, so every in-alphabet string tokenizes.
/// Segmentations are deduplicated and ordered leftmost-longest first.
pub fn tokenize(h: &Hierarchy, s: &str) -> Result<Vec<Segmentation>> {
    let gram = h.alphabet().encode(s)?;
    if gram.is_empty() {
        return Err(ModelError::EmptyInput("tokenize"));
    }
    let len = gram.len();
    // longest[a] = end of the longest smooth token starting at a
    // (smoothness is closed under prefixes, so one scan per start suffices)
    let mut longest = vec![0usize; len];
    for a in 0..len {
        let mut b = a + 1;
        while b < len && h.contains_gram(&gram[a..=b]) {
            b += 1;
        }
        longest[a] = b;
    }
    let mut memo: HashMap<(usize, usize), Vec<Vec<usize>>> = HashMap::new();
    let tilings = solve(&longest, 0, len, &mut memo);
    let mut tilings = tilings;
    // leftmost-longest first: larger early cuts sort first
    tilings.sort_by(|a, b| b.cmp(a));
    let unique = tilings.len() == 1;
    let segs = tilings
        .into_iter()
        .map(|cuts| {
            let mut tokens = Vec::with_capacity(cuts.len() + 1);
            let mut prev = 0usize;
            for &c in cuts.iter().chain(std::iter::once(&len)) {
                tokens.push(token_ref(h, &gram[prev..c]).ok_or_else(|| {
                    ModelError::Internal("segmentation produced an unlearned token".into())
                })?);
                prev = c;
            }
            Ok(Segmentation {
                tokens,
                boundaries: cuts,
                unique,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(segs)
}

/// Tilings of [i, j) as sorted interior-cut lists (relative to the whole
/// string), deduplicated.
fn solve(
    longest: &[usize],
    i: usize,
    j: usize,
    memo: &mut HashMap<(usize, usize), Vec<Vec<usize>>>,
) -> Vec<Vec<usize>> {
    if i == j {
        return vec![vec![]];
    }
    if let Some(hit) = memo.get(&(i, j)) {
        return hit.clone();
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for a in i..j {
        let end = longest[a].min(j);
        // maximal iff it cannot be grown left within the interval
        if a > i && longest[a - 1].min(j) >= end {
            continue;
        }
        for left in solve(longest, i, a, memo) {
            for right in solve(longest, end, j, memo) {
                let mut cuts = left.clone();
                if a > i {
                    cuts.push(a);
                }
                if end < j {
                    cuts.push(end);
                }
                cuts.extend_from_slice(&right);
                cuts.sort_unstable();
                out.push(cuts);
            }
        }
    }
    out.sort();
    out.dedup();
    memo.insert((i, j), out.clone());
    out
}

/// Cut positions shared by every maximal tiling; empty when the string is
/// itself one smooth token.
pub fn find_boundaries(h: &Hierarchy, s: &str) -> Result<Vec<usize>> {
    let segs = tokenize(h, s)?;
    let mut iter = segs.iter();
    let mut forced: Vec<usize> = iter.next().map(|s| s.boundaries.clone()).unwrap_or_default();
    for seg in iter {
        forced.retain(|c| seg.boundaries.contains(c));
    }
    Ok(forced)
}
