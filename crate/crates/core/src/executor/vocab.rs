use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const UNK: u32 = 0;
/// All integer tokens share one id; their magnitude enters as a feature.
pub const NUM: u32 = 1;

/// Token-to-id table. Id 0 is the unknown token, id 1 the shared numeral.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

/// Integer value of a numeral token.
pub fn numeral(token: &str) -> Option<i64> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    token.parse().ok()
}

impl Vocab {
    /// Builds a vocabulary from token sequences, sorted for determinism.
    pub fn build<'a>(sequences: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut words: Vec<String> = Vec::new();
        for seq in sequences {
            for t in seq {
                if numeral(t).is_none() {
                    words.push(t.clone());
                }
            }
        }
        words.sort();
        words.dedup();
        let mut tokens = alloc::vec!["<unk>".to_string(), "<num>".to_string()];
        tokens.extend(words);
        Vocab::from(tokens)
    }

    /// Every passage and question token of `worlds`.
    pub fn from_worlds(worlds: &[crate::world::WorldInstance]) -> Self {
        Vocab::build(worlds.iter().flat_map(|w| {
            core::iter::once(w.passage_tokens.as_slice()).chain(w.questions.iter().map(|q| q.question_tokens.as_slice()))
        }))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        if numeral(token).is_some() {
            return NUM;
        }
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }
}
