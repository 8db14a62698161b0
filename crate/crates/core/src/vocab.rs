//! Token ids and the two vocabularies the language models work over.
//!
//! Character vocabularies reserve id 0 for the beginning-of-line sentinel and
//! id 1 for unknown characters; the remaining ids are the training characters
//! in code-point order. The byte vocabulary keeps the null byte (used as
//! padding and as the start-of-line context) plus the printable range
//! `32..=255`, for 225 ids in total.

use std::fmt;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Bos,
    Unk,
    Char(char),
    Byte(u8),
}

/// What a single token stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenUnit {
    Char,
    Byte,
}

/// Number of ids in the byte vocabulary: the null byte plus `32..=255`.
pub const BYTE_VOCAB_SIZE: usize = 1 + 224;

#[derive(Clone, Debug)]
pub struct Vocabulary {
    unit: TokenUnit,
    symbols: Vec<Symbol>,
    index: FxHashMap<Symbol, TokenId>,
    bos: Option<TokenId>,
    unk: Option<TokenId>,
    pad: Option<TokenId>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.unit == other.unit && self.symbols == other.symbols
    }
}

impl Vocabulary {
    /// Character vocabulary over the given characters (duplicates ignored).
    pub fn characters<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let mut chars: Vec<char> = chars.into_iter().collect();
        chars.sort_unstable();
        chars.dedup();
        let mut symbols = vec![Symbol::Bos, Symbol::Unk];
        symbols.extend(chars.into_iter().map(Symbol::Char));
        Self::from_symbols(TokenUnit::Char, symbols)
    }

    /// The fixed 225-entry byte vocabulary.
    pub fn bytes() -> Self {
        let symbols = std::iter::once(0u8).chain(32..=255).map(Symbol::Byte).collect();
        Self::from_symbols(TokenUnit::Byte, symbols)
    }

    fn from_symbols(unit: TokenUnit, symbols: Vec<Symbol>) -> Self {
        let index: FxHashMap<Symbol, TokenId> = symbols
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, TokenId(i as u32)))
            .collect();
        debug_assert_eq!(index.len(), symbols.len());
        let bos = index.get(&Symbol::Bos).copied();
        let unk = index.get(&Symbol::Unk).copied();
        let pad = index.get(&Symbol::Byte(0)).copied();
        Vocabulary {
            unit,
            symbols,
            index,
            bos,
            unk,
            pad,
        }
    }

    pub fn unit(&self) -> TokenUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, id: TokenId) -> Option<Symbol> {
        self.symbols.get(id.index()).copied()
    }

    pub fn id(&self, symbol: Symbol) -> Option<TokenId> {
        self.index.get(&symbol).copied()
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.symbols.len()
    }

    pub fn bos(&self) -> Option<TokenId> {
        self.bos
    }

    pub fn unk(&self) -> Option<TokenId> {
        self.unk
    }

    pub fn pad(&self) -> Option<TokenId> {
        self.pad
    }

    /// Token that fills missing history: BOS for characters, PAD for bytes.
    pub fn context_pad(&self) -> TokenId {
        self.bos.or(self.pad).expect("vocabulary has neither BOS nor PAD")
    }

    /// Ids a model can actually emit (everything except BOS).
    pub fn predictable(&self) -> impl Iterator<Item = TokenId> + '_ {
        let bos = self.bos;
        (0..self.symbols.len() as u32)
            .map(TokenId)
            .filter(move |&id| Some(id) != bos)
    }

    /// Tokens for one character; empty for characters a byte vocabulary drops.
    pub fn encode_char(&self, c: char, out: &mut Vec<TokenId>) {
        match self.unit {
            TokenUnit::Char => {
                let id = self
                    .index
                    .get(&Symbol::Char(c))
                    .copied()
                    .or(self.unk)
                    .expect("character vocabulary always has UNK");
                out.push(id);
            }
            TokenUnit::Byte => {
                let mut buf = [0u8; 4];
                for &b in c.encode_utf8(&mut buf).as_bytes() {
                    if let Some(id) = self.byte_id(b) {
                        out.push(id);
                    }
                }
            }
        }
    }

    pub fn byte_id(&self, b: u8) -> Option<TokenId> {
        match b {
            0 => Some(TokenId(0)),
            1..=31 => None,
            _ => Some(TokenId(u32::from(b) - 31)),
        }
        .filter(|_| self.unit == TokenUnit::Byte)
    }

    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(text.len());
        for c in text.chars() {
            self.encode_char(c, &mut out);
        }
        out
    }

    /// The single token standing for `c`, or an error if `c` is unknown or
    /// spans several tokens.
    pub fn single_token(&self, c: char) -> Result<TokenId> {
        let mut out = Vec::new();
        self.encode_char(c, &mut out);
        match out.as_slice() {
            [id] if Some(*id) != self.unk => Ok(*id),
            _ => Err(Error::config(format!("{c:?} is not a single in-vocabulary token"))),
        }
    }

    pub fn check(&self, id: TokenId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "token id {} out of range for a vocabulary of {}",
                id.0,
                self.len()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_vocab_layout() {
        let v = Vocabulary::bytes();
        assert_eq!(v.len(), BYTE_VOCAB_SIZE);
        assert_eq!(v.len(), 225);
        for b in 1u8..=31 {
            assert_eq!(v.id(Symbol::Byte(b)), None);
        }
        assert_eq!(v.pad(), Some(TokenId(0)));
        assert_eq!(v.byte_id(32), Some(TokenId(1)));
        assert_eq!(v.byte_id(255), Some(TokenId(224)));
        for b in (0u8..=255).filter(|b| !(1..=31).contains(b)) {
            assert_eq!(v.symbol(v.byte_id(b).unwrap()), Some(Symbol::Byte(b)));
        }
    }

    #[test]
    fn byte_tokenize_drops_controls() {
        let v = Vocabulary::bytes();
        let ids = v.tokenize("ab");
        assert_eq!(ids.len(), 2);
        assert_ne!(ids[0], ids[1]);
        assert!(v.tokenize("\n").is_empty());
        assert_eq!(v.tokenize("ñ").len(), 2);
    }

    #[test]
    fn char_vocab_reserves_bos_and_unk() {
        let v = Vocabulary::characters("banana".chars());
        assert_eq!(v.bos(), Some(TokenId(0)));
        assert_eq!(v.unk(), Some(TokenId(1)));
        assert_eq!(v.len(), 5);
        assert_eq!(v.tokenize("az"), vec![v.id(Symbol::Char('a')).unwrap(), TokenId(1)]);
        assert!(v.single_token('z').is_err());
        assert!(v.single_token('n').is_ok());
    }

    #[test]
    fn mapping_is_bijective() {
        let v = Vocabulary::characters("the price was fair".chars());
        for (i, &s) in v.symbols().iter().enumerate() {
            assert_eq!(v.id(s), Some(TokenId(i as u32)));
        }
    }
}
