//! Ulam-Harris words: finite sequences of positive integers labelling the
//! vertices of an ordered rooted tree.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite word over the positive integers. The empty word is the root.
///
/// Words are ordered breadth-first: shorter words first, equal lengths
/// lexicographically. This is the canonical vertex order used everywhere in
/// the crate (serialization, level arrays, reports).
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word(Vec<u32>);

impl Word {
    pub fn root() -> Self {
        Word(Vec::new())
    }

    /// Builds a word, rejecting the letter 0.
    pub fn new(letters: Vec<u32>) -> Result<Self> {
        if letters.contains(&0) {
            return Err(Error::MalformedWord(format!("{letters:?}")));
        }
        Ok(Word(letters))
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    /// Generation of the vertex, `|u|`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// `u|m`: the ancestor at generation `m`, or `u` itself when `m >= |u|`.
    pub fn restrict(&self, m: usize) -> Word {
        Word(self.0[..m.min(self.0.len())].to_vec())
    }

    /// `u*i`.
    pub fn child(&self, i: u32) -> Word {
        assert!(i >= 1, "child indices are 1-based");
        let mut v = self.0.clone();
        v.push(i);
        Word(v)
    }

    pub fn parent(&self) -> Option<Word> {
        if self.0.is_empty() {
            None
        } else {
            Some(Word(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn last(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// Concatenation `u*v`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Genealogical order: `self ⪯ other` iff `self` is a prefix of `other`.
    pub fn is_ancestor_of(&self, other: &Word) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// `θ_u` on words: strips the prefix `u`, if present.
    pub fn strip_prefix(&self, prefix: &Word) -> Option<Word> {
        if prefix.is_ancestor_of(self) {
            Some(Word(self.0[prefix.0.len()..].to_vec()))
        } else {
            None
        }
    }

    /// Longest common prefix `u ∧ v`.
    pub fn meet(&self, other: &Word) -> Word {
        let n = self.0.iter().zip(other.0.iter()).take_while(|(a, b)| a == b).count();
        Word(self.0[..n].to_vec())
    }
}

/// Free-function form of [`Word::meet`].
pub fn meet(u: &Word, v: &Word) -> Word {
    u.meet(v)
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("Word(∅)")
        } else {
            write!(f, "Word({self})")
        }
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Parses the dot-separated form; the empty string is the root.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::root());
        }
        let letters = s
            .split('.')
            .map(|t| t.parse::<u32>().map_err(|_| Error::MalformedWord(s.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Word::new(letters)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl<const N: usize> TryFrom<[u32; N]> for Word {
    type Error = Error;
    fn try_from(a: [u32; N]) -> Result<Self> {
        Word::new(a.to_vec())
    }
}

/// Shorthand used heavily in tests: `w(&[1, 2])`.
pub fn w(letters: &[u32]) -> Word {
    Word::new(letters.to_vec()).expect("letters must be positive")
}
