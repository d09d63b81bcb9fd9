use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite sequence of symbols drawn from `0..alphabet_size`.
///
/// Scanpaths are represented this way once fixations have been mapped to
/// areas of interest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct SymbolSequence {
    symbols: Vec<u32>,
    alphabet_size: usize,
}

#[derive(Deserialize)]
struct RawSequence {
    symbols: Vec<u32>,
    alphabet_size: usize,
}

impl TryFrom<RawSequence> for SymbolSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        SymbolSequence::new(raw.symbols, raw.alphabet_size)
    }
}

impl SymbolSequence {
    pub fn new(symbols: Vec<u32>, alphabet_size: usize) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if let Some((position, &symbol)) = symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s as usize >= alphabet_size)
        {
            return Err(Error::SymbolOutOfRange {
                symbol,
                position,
                alphabet_size,
            });
        }
        Ok(Self {
            symbols,
            alphabet_size,
        })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Keep only the last `length` symbols (or all of them if shorter).
    pub fn suffix(&self, length: usize) -> Self {
        let start = self.symbols.len().saturating_sub(length);
        Self {
            symbols: self.symbols[start..].to_vec(),
            alphabet_size: self.alphabet_size,
        }
    }

    /// Merge runs of identical consecutive symbols into one.
    pub fn collapse_repeats(&self) -> Self {
        let mut symbols = self.symbols.clone();
        symbols.dedup();
        Self {
            symbols,
            alphabet_size: self.alphabet_size,
        }
    }

    pub fn into_symbols(self) -> Vec<u32> {
        self.symbols
    }
}
