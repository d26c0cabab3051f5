use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::StructureLabel;

/// Label counts per split, in the order splits first appear.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationStats {
    pub splits: Vec<String>,
    /// `counts[label][split]`, labels in [`StructureLabel::ALL`] order.
    pub counts: [Vec<usize>; 4],
}

impl AnnotationStats {
    pub fn count(&self, label: StructureLabel, split: &str) -> usize {
        let row = label_row(label);
        self.splits.iter().position(|s| s == split).map_or(0, |j| self.counts[row][j])
    }

    pub fn label_total(&self, label: StructureLabel) -> usize {
        self.counts[label_row(label)].iter().sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

fn label_row(label: StructureLabel) -> usize {
    StructureLabel::ALL.iter().position(|&l| l == label).expect("label in ALL")
}

fn table_name(label: StructureLabel) -> &'static str {
    match label {
        StructureLabel::Parallel => "parallel",
        StructureLabel::ParallelEnumeration => "parallel w/ enumeration",
        StructureLabel::Sequence => "sequence",
        StructureLabel::SequenceSegmented => "sequence w/ segmented sents.",
    }
}

/// Counts `(split, label)` records.
pub fn annotation_stats<'a>(records: impl IntoIterator<Item = (&'a str, StructureLabel)>) -> AnnotationStats {
    let mut stats = AnnotationStats::default();
    for (split, label) in records {
        let j = match stats.splits.iter().position(|s| s == split) {
            Some(j) => j,
            None => {
                stats.splits.push(split.to_string());
                stats.counts.iter_mut().for_each(|row| row.push(0));
                stats.splits.len() - 1
            }
        };
        stats.counts[label_row(label)][j] += 1;
    }
    stats
}

/// Parses `split<TAB>label` lines (blank lines and `#` comments skipped).
pub fn parse_annotation_tsv(text: &str) -> Result<Vec<(String, StructureLabel)>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::Line { line: i + 1, message };
        let (split, label) = line.split_once('\t').ok_or_else(|| err("expected split<TAB>label".into()))?;
        let label = label.trim().parse::<StructureLabel>().map_err(|e| err(e.to_string()))?;
        out.push((split.trim().to_string(), label));
    }
    Ok(out)
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl fmt::Display for AnnotationStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<30}", "")?;
        for s in &self.splits {
            write!(f, " {s:>7}")?;
        }
        writeln!(f, " {:>7}", "total")?;
        for label in StructureLabel::ALL {
            write!(f, "{:<30}", table_name(label))?;
            for c in &self.counts[label_row(label)] {
                write!(f, " {:>7}", thousands(*c))?;
            }
            writeln!(f, " {:>7}", thousands(self.label_total(label)))?;
        }
        Ok(())
    }
}
