//! News/summary pairs: ingestion, preprocessing, vocabulary, splits and a
//! synthetic generator with gold structure labels.

mod jsonl;
mod preprocess;
mod split;
mod synth;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jsonl::{load_jsonl, load_jsonl_str, parse_pair_line, to_jsonl_line, write_jsonl, LineError, LoadReport};
pub use preprocess::{preprocess, PreprocessConfig, PreprocessReport};
pub use split::{split, split_by_ids, Split, SplitSizes};
pub use synth::{label_by_subject_rule, synth_generate, SynthConfig};
pub use vocab::{VocabMode, Vocabulary, PAD, SB, SB_TOKEN, START, STOP, UNK, UNK_TOKEN};

/// Number of sentences in every summary.
pub const SUMMARY_SENTENCES: usize = 3;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unknown structure label {0:?}")]
    UnknownLabel(String),
    #[error("requested split sizes {requested} exceed corpus size {available}")]
    SplitTooLarge { requested: usize, available: usize },
    #[error("id {0:?} not found in corpus")]
    UnknownId(String),
    #[error("empty corpus")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Annotation taxonomy of summary structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StructureLabel {
    #[serde(rename = "parallel")]
    Parallel,
    #[serde(rename = "parallel_enum")]
    ParallelEnumeration,
    #[serde(rename = "sequence")]
    Sequence,
    #[serde(rename = "sequence_seg")]
    SequenceSegmented,
}

impl StructureLabel {
    pub const ALL: [StructureLabel; 4] = [
        StructureLabel::Parallel,
        StructureLabel::ParallelEnumeration,
        StructureLabel::Sequence,
        StructureLabel::SequenceSegmented,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StructureLabel::Parallel => "parallel",
            StructureLabel::ParallelEnumeration => "parallel_enum",
            StructureLabel::Sequence => "sequence",
            StructureLabel::SequenceSegmented => "sequence_seg",
        }
    }

    pub fn binary(self) -> StructureType {
        match self {
            StructureLabel::Parallel | StructureLabel::ParallelEnumeration => StructureType::Parallel,
            StructureLabel::Sequence | StructureLabel::SequenceSegmented => StructureType::Sequence,
        }
    }
}

impl FromStr for StructureLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StructureLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for StructureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary structure type used for modeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureType {
    Parallel,
    Sequence,
}

impl StructureType {
    pub const BOTH: [StructureType; 2] = [StructureType::Parallel, StructureType::Sequence];

    pub fn index(self) -> usize {
        match self {
            StructureType::Parallel => 0,
            StructureType::Sequence => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            StructureType::Parallel
        } else {
            StructureType::Sequence
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StructureType::Parallel => "parallel",
            StructureType::Sequence => "sequence",
        }
    }

    pub fn label(self) -> StructureLabel {
        match self {
            StructureType::Parallel => StructureLabel::Parallel,
            StructureType::Sequence => StructureLabel::Sequence,
        }
    }
}

impl fmt::Display for StructureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StructureType {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(StructureType::Parallel),
            "sequence" => Ok(StructureType::Sequence),
            other => Err(CorpusError::UnknownLabel(other.to_string())),
        }
    }
}

/// One article with its three-sentence summary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewsPair {
    pub id: String,
    pub article: Vec<String>,
    pub summary: [Vec<String>; SUMMARY_SENTENCES],
    pub label: Option<StructureLabel>,
    pub category: Option<String>,
}

impl NewsPair {
    pub fn summary_len(&self) -> usize {
        self.summary.iter().map(Vec::len).sum()
    }

    /// Summary sentences joined by the sentence-boundary token.
    pub fn summary_with_boundaries(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.summary_len() + 2);
        for (k, s) in self.summary.iter().enumerate() {
            if k > 0 {
                out.push(SB_TOKEN.to_string());
            }
            out.extend(s.iter().cloned());
        }
        out
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}
