//! Versioned, canonical JSON documents for hierarchies and embedding
//! stores. Grams and embeddings are emitted in sorted order so identical
//! states always serialize to byte-identical documents.

use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::compress::CompressedChain;
use crate::embedding::{EmbeddingRecord, EmbeddingStore};
use crate::error::{ModelError, Result};
use crate::hierarchy::{Hierarchy, Level};

pub const DOC_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct HierarchyDoc {
    version: u32,
    alphabet: String,
    levels: Vec<LevelDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LevelDoc {
    n: usize,
    grams: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreDoc {
    version: u32,
    embeddings: Vec<EmbeddingDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingDoc {
    alpha: usize,
    word: String,
    m: Vec<MEntryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    compressed: Option<CompressedChain>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MEntryDoc {
    n: usize,
    gram: String,
    w: f64,
}

fn parse_err(e: serde_json::Error) -> ModelError {
    ModelError::Parse(format!("{e}"))
}

pub fn hierarchy_to_json(h: &Hierarchy) -> Result<String> {
    let alphabet: String = h.alphabet().symbols().iter().collect();
    let levels = h
        .levels()
        .iter()
        .map(|l| {
            Ok(LevelDoc {
                n: l.n,
                grams: l
                    .grams()
                    .iter()
                    .map(|g| h.alphabet().decode(g))
                    .collect::<Result<_>>()?,
                weights: l.weights().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let doc = HierarchyDoc {
        version: DOC_VERSION,
        alphabet,
        levels,
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(parse_err)?;
    s.push('\n');
    Ok(s)
}

pub fn hierarchy_from_json(json: &str) -> Result<Hierarchy> {
    let doc: HierarchyDoc = serde_json::from_str(json).map_err(parse_err)?;
    if doc.version != DOC_VERSION {
        return Err(ModelError::Version {
            expected: DOC_VERSION,
            got: doc.version,
        });
    }
    let alphabet = Alphabet::new(doc.alphabet.chars().collect())?;
    let mut h = Hierarchy::new(alphabet);
    for ld in doc.levels {
        if ld.grams.len() != ld.weights.len() {
            return Err(ModelError::LengthMismatch {
                expected: ld.grams.len(),
                got: ld.weights.len(),
            });
        }
        let pairs = ld
            .grams
            .iter()
            .zip(&ld.weights)
            .map(|(g, &w)| Ok((h.alphabet().encode(g)?, w)))
            .collect::<Result<Vec<_>>>()?;
        let level = Level::from_pairs(ld.n, pairs)?;
        // re-validate the DAG property on load
        if ld.n >= 3 {
            let prev = h.level(ld.n - 1).ok_or(ModelError::HierarchyOrder {
                requested: ld.n,
                missing: ld.n - 1,
            })?;
            for g in level.grams() {
                if !prev.contains(&g[..ld.n - 1]) || !prev.contains(&g[1..]) {
                    return Err(ModelError::Consistency(format!(
                        "level {} gram violates smoothness",
                        ld.n
                    )));
                }
            }
        }
        h.push_level(level)?;
    }
    h.freeze();
    Ok(h)
}

pub fn store_to_json(store: &EmbeddingStore) -> Result<String> {
    let mut embeddings: Vec<EmbeddingDoc> = store
        .records()
        .iter()
        .map(|r| EmbeddingDoc {
            alpha: r.alpha,
            word: r.word.clone(),
            m: r
                .m
                .iter()
                .map(|(&(n, ref gram), &w)| MEntryDoc {
                    n,
                    gram: gram.clone(),
                    w,
                })
                .collect(),
            compressed: r.compressed.clone(),
        })
        .collect();
    embeddings.sort_by_key(|e| e.alpha);
    let doc = StoreDoc {
        version: DOC_VERSION,
        embeddings,
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(parse_err)?;
    s.push('\n');
    Ok(s)
}

pub fn store_from_json(json: &str) -> Result<EmbeddingStore> {
    let doc: StoreDoc = serde_json::from_str(json).map_err(parse_err)?;
    if doc.version != DOC_VERSION {
        return Err(ModelError::Version {
            expected: DOC_VERSION,
            got: doc.version,
        });
    }
    let mut store = EmbeddingStore::new();
    for ed in doc.embeddings {
        let mut m = std::collections::BTreeMap::new();
        for e in ed.m {
            if !(0.0..=1.0).contains(&e.w) {
                return Err(ModelError::Consistency(format!(
                    "embedding weight {} outside [0,1]",
                    e.w
                )));
            }
            if e.gram.len() != e.n {
                return Err(ModelError::LengthMismatch {
                    expected: e.n,
                    got: e.gram.len(),
                });
            }
            m.insert((e.n, e.gram), e.w);
        }
        store.insert_record(EmbeddingRecord {
            alpha: ed.alpha,
            word: ed.word,
            m,
            compressed: ed.compressed,
        })?;
    }
    Ok(store)
}
