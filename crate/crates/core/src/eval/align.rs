use serde::{Deserialize, Serialize};

use super::rouge::rouge_l;
use super::EvalError;

/// The six bijections in lexicographic order of their pattern strings.
pub const PATTERNS: [[usize; 3]; 6] = [[1, 2, 3], [1, 3, 2], [2, 1, 3], [2, 3, 1], [3, 1, 2], [3, 2, 1]];

/// No-duplicate assignment of system sentences to oracle sentences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPattern {
    /// `perm[k]` is the 1-based oracle sentence matched to system sentence k.
    pub perm: [usize; 3],
    /// ROUGE-L F1 of each system sentence against its matched oracle sentence.
    pub scores: [f64; 3],
}

impl AlignmentPattern {
    /// Pattern string such as `"132"`.
    pub fn pattern(&self) -> String {
        self.perm.iter().map(|d| char::from(b'0' + *d as u8)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / 3.0
    }
}

/// Exhaustive search over the six bijections for the highest mean ROUGE-L
/// F1. Ties go to the lexicographically smallest pattern.
pub fn pairwise_align<S: AsRef<str>, T: AsRef<str>>(
    sys: &[Vec<S>],
    oracle: &[Vec<T>],
) -> Result<AlignmentPattern, EvalError> {
    if sys.len() != 3 {
        return Err(EvalError::SentenceCount { side: "system summary", got: sys.len() });
    }
    if oracle.len() != 3 {
        return Err(EvalError::SentenceCount { side: "oracle summary", got: oracle.len() });
    }
    let mut table = [[0.0; 3]; 3];
    for (k, s) in sys.iter().enumerate() {
        for (j, o) in oracle.iter().enumerate() {
            table[k][j] = rouge_l(s, o).f1;
        }
    }
    let mut best: Option<AlignmentPattern> = None;
    for perm in PATTERNS {
        let cand = AlignmentPattern { perm, scores: [0, 1, 2].map(|k| table[k][perm[k] - 1]) };
        if best.as_ref().is_none_or(|b| cand.mean() > b.mean()) {
            best = Some(cand);
        }
    }
    Ok(best.expect("six candidates"))
}
