use std::collections::HashMap;

use crate::error::{ModelError, Result};

/// A learned pattern of `n` contiguous basis symbols, stored as alphabet indices.
pub type NGram = Vec<u8>;

/// The basis tokenset: an ordered set of distinct characters.
///
/// Index/symbol mapping is a bijection; indices are `u8`, so at most 256
/// symbols. The default is the 26 lowercase Latin letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    index: HashMap<char, u8>,
}

impl Alphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self> {
        if symbols.is_empty() || symbols.len() > 256 {
            return Err(ModelError::Domain(format!(
                "alphabet must have 1..=256 symbols, got {}",
                symbols.len()
            )));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i as u8).is_some() {
                return Err(ModelError::Domain(format!("duplicate symbol {c:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// The 26 lowercase Latin letters.
    pub fn latin() -> Self {
        Self::new(('a'..='z').collect()).unwrap()
    }

    /// Convenience for small test alphabets: the first `d` Latin letters.
    pub fn latin_prefix(d: usize) -> Self {
        Self::new(('a'..='z').take(d).collect()).unwrap()
    }

    pub fn d(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<u8> {
        self.index.get(&c).copied()
    }

    pub fn symbol(&self, i: u8) -> Result<char> {
        self.symbols
            .get(i as usize)
            .copied()
            .ok_or_else(|| ModelError::IndexOutOfRange(format!("symbol index {i}")))
    }

    /// Encode a string of alphabet characters as indices.
    pub fn encode(&self, s: &str) -> Result<NGram> {
        s.chars()
            .map(|c| self.index_of(c).ok_or(ModelError::InputChar(c)))
            .collect()
    }

    /// Decode indices back into a string.
    pub fn decode(&self, gram: &[u8]) -> Result<String> {
        gram.iter().map(|&i| self.symbol(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin_is_bijective() {
        let a = Alphabet::latin();
        assert_eq!(a.d(), 26);
        for (i, &c) in a.symbols().iter().enumerate() {
            assert_eq!(a.index_of(c), Some(i as u8));
            assert_eq!(a.symbol(i as u8).unwrap(), c);
        }
    }

    #[test]
    fn rejects_duplicates() {
        assert!(Alphabet::new(vec!['a', 'b', 'a']).is_err());
    }

    #[test]
    fn encode_rejects_foreign_chars() {
        let a = Alphabet::latin();
        assert!(matches!(a.encode("ab!"), Err(ModelError::InputChar('!'))));
    }
}
