use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(hits: usize, sys_total: usize, ref_total: usize) -> Self {
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = frac(hits, sys_total);
        let recall = frac(hits, ref_total);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        RougeScore { precision, recall, f1 }
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram counts.
///
/// # Panics
/// If `n` is zero.
pub fn rouge_n<S: AsRef<str>, T: AsRef<str>>(sys: &[S], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let s = ngram_counts(sys, n);
    let r = ngram_counts(reference, n);
    let hits = s.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    RougeScore::from_counts(hits, s.values().sum(), r.values().sum())
}

fn lcs_len<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L from the longest common subsequence.
pub fn rouge_l<S: AsRef<str>, T: AsRef<str>>(sys: &[S], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(sys, reference), sys.len(), reference.len())
}

/// R-1, R-2 and R-L F1 of one sentence pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SentenceRouge {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
}

impl SentenceRouge {
    pub fn score<S: AsRef<str>, T: AsRef<str>>(sys: &[S], reference: &[T]) -> Self {
        SentenceRouge { r1: rouge_n(sys, reference, 1).f1, r2: rouge_n(sys, reference, 2).f1, rl: rouge_l(sys, reference).f1 }
    }

    pub fn mean(items: &[SentenceRouge]) -> Self {
        if items.is_empty() {
            return SentenceRouge::default();
        }
        let n = items.len() as f64;
        SentenceRouge {
            r1: items.iter().map(|s| s.r1).sum::<f64>() / n,
            r2: items.iter().map(|s| s.r2).sum::<f64>() / n,
            rl: items.iter().map(|s| s.rl).sum::<f64>() / n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn t(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn hand_fixtures() {
        let s = rouge_n(&t("a b d"), &t("a b c"), 1);
        assert_eq!((s.precision, s.recall, s.f1), (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0));
        let s = rouge_n(&t("a b c d"), &t("a b c"), 2);
        assert_eq!((s.precision, s.recall), (2.0 / 3.0, 1.0));
        assert!((s.f1 - 0.8).abs() < 1e-15);
        let s = rouge_l(&t("a c b d"), &t("a b c d"));
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
    }

    #[test]
    fn identical_and_disjoint() {
        let x = t("x y z x");
        assert_eq!(rouge_n(&x, &x, 2).f1, 1.0);
        assert_eq!(rouge_l(&x, &x).f1, 1.0);
        assert_eq!(rouge_l(&t("a b"), &t("c d")), RougeScore::default());
    }

    #[test]
    fn clipping_and_empty() {
        let s = rouge_n(&t("a a a"), &t("a b"), 1);
        assert_eq!(s.precision, 1.0 / 3.0);
        assert_eq!(s.recall, 0.5);
        let empty: Vec<String> = Vec::new();
        assert_eq!(rouge_n(&empty, &t("a"), 1), RougeScore::default());
        assert_eq!(rouge_n(&t("a"), &t("a"), 2), RougeScore::default());
        assert_eq!(SentenceRouge::score(&empty, &t("a b")), SentenceRouge::default());
    }
}
