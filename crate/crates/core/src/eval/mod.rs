//! ROUGE, pairwise sentence alignment, breakdown tables, classifier metrics
//! and annotation counts. Everything here is a pure function of its inputs.

mod align;
mod annotation;
mod metrics;
mod report;
mod rouge;

use thiserror::Error;

pub use align::{pairwise_align, AlignmentPattern, PATTERNS};
pub use annotation::{annotation_stats, parse_annotation_tsv, AnnotationStats};
pub use metrics::{classification_report, ClassMetrics, ClassificationReport};
pub use report::{breakdown_report, score_document, BreakdownReport, DocResult, PatternRow, PositionRow, SubsetRow};
pub use rouge::{rouge_l, rouge_n, RougeScore, SentenceRouge};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{side} has {got} sentences, expected 3")]
    SentenceCount { side: &'static str, got: usize },
    #[error("{preds} predictions but {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("document {0:?} has no gold structure label")]
    MissingLabel(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}
