use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, NewsPair};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const START: usize = 2;
pub const STOP: usize = 3;
pub const SB: usize = 4;

pub const UNK_TOKEN: &str = "<unk>";
pub const SB_TOKEN: &str = "<sb>";
const SPECIALS: [&str; 5] = ["<pad>", UNK_TOKEN, "<s>", "</s>", SB_TOKEN];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabMode {
    /// Keep the `n` most frequent tokens (specials not counted).
    Cap(usize),
    /// Keep tokens seen at least `k` times.
    MinCount(usize),
}

/// Token/id bijection with fixed special ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn specials_only() -> Self {
        Self::from_tokens(SPECIALS.iter().map(|s| s.to_string()).collect()).expect("specials are valid")
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, CorpusError> {
        if tokens.len() < SPECIALS.len() || tokens.iter().zip(SPECIALS).any(|(t, s)| t != s) {
            return Err(CorpusError::Line { line: 0, message: "vocabulary must start with the special tokens".into() });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::Line { line: i + 1, message: format!("duplicate token {t:?}") });
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn build(pairs: &[NewsPair], mode: VocabMode) -> Result<Self, CorpusError> {
        if pairs.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut order = 0usize;
        let all = pairs.iter().flat_map(|p| p.article.iter().chain(p.summary.iter().flatten()));
        for tok in all {
            let e = counts.entry(tok.as_str()).or_insert_with(|| {
                order += 1;
                (0, order)
            });
            e.0 += 1;
        }
        let mut ranked: Vec<(&str, usize, usize)> = counts
            .into_iter()
            .filter(|(t, _)| !SPECIALS.contains(t))
            .map(|(t, (c, first))| (t, c, first))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        match mode {
            VocabMode::Cap(n) => ranked.truncate(n),
            VocabMode::MinCount(k) => ranked.retain(|&(_, c, _)| c >= k),
        }
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().map(|(t, _, _)| t.to_string()));
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        std::fs::write(path, serde_json::to_string_pretty(&self.tokens)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let tokens: Vec<String> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_tokens(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn corpus(article: &str) -> Vec<NewsPair> {
        vec![NewsPair {
            id: "x".into(),
            article: tokenize(article),
            summary: [vec![], vec![], vec![]],
            label: None,
            category: None,
        }]
    }

    fn content(v: &Vocabulary) -> Vec<&str> {
        v.tokens()[SPECIALS.len()..].iter().map(String::as_str).collect()
    }

    #[test]
    fn min_count_two() {
        let v = Vocabulary::build(&corpus("a a b"), VocabMode::MinCount(2)).unwrap();
        assert_eq!(content(&v), vec!["a"]);
        assert_eq!(v.id("b"), UNK);
    }

    #[test]
    fn cap_one() {
        let v = Vocabulary::build(&corpus("a a b"), VocabMode::Cap(1)).unwrap();
        assert_eq!(content(&v), vec!["a"]);
    }

    #[test]
    fn ties_by_first_occurrence_and_deterministic() {
        let c = corpus("q p r p q r z");
        let v1 = Vocabulary::build(&c, VocabMode::Cap(3)).unwrap();
        let v2 = Vocabulary::build(&c, VocabMode::Cap(3)).unwrap();
        assert_eq!(content(&v1), vec!["q", "p", "r"]);
        assert_eq!(v1, v2);
    }

    #[test]
    fn specials_fixed_and_excluded_from_cap() {
        let v = Vocabulary::build(&corpus("<sb> a <unk> b"), VocabMode::Cap(10)).unwrap();
        assert_eq!(v.id("<pad>"), PAD);
        assert_eq!(v.id("<unk>"), UNK);
        assert_eq!(v.id("<s>"), START);
        assert_eq!(v.id("</s>"), STOP);
        assert_eq!(v.id("<sb>"), SB);
        assert_eq!(content(&v), vec!["a", "b"]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::build(&corpus("x y y z"), VocabMode::MinCount(1)).unwrap();
        let path = dir.path().join("v.json");
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }
}
