use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::align::{pairwise_align, AlignmentPattern, PATTERNS};
use super::rouge::SentenceRouge;
use super::EvalError;
use crate::corpus::StructureType;

/// Scores of one system summary against its reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocResult {
    pub id: String,
    pub label: Option<StructureType>,
    /// Whole summary (sentences concatenated) against the whole reference.
    pub overall: SentenceRouge,
    /// System sentence k against reference sentence k.
    pub positional: [SentenceRouge; 3],
    pub alignment: AlignmentPattern,
    /// System sentence k against its aligned reference sentence.
    pub aligned: [SentenceRouge; 3],
}

pub fn score_document<S: AsRef<str>, T: AsRef<str>>(
    id: &str,
    label: Option<StructureType>,
    sys: &[Vec<S>],
    reference: &[Vec<T>],
) -> Result<DocResult, EvalError> {
    let alignment = pairwise_align(sys, reference)?;
    let flat_sys: Vec<&str> = sys.iter().flatten().map(AsRef::as_ref).collect();
    let flat_ref: Vec<&str> = reference.iter().flatten().map(AsRef::as_ref).collect();
    Ok(DocResult {
        id: id.to_string(),
        label,
        overall: SentenceRouge::score(&flat_sys, &flat_ref),
        positional: [0, 1, 2].map(|k| SentenceRouge::score(&sys[k], &reference[k])),
        aligned: [0, 1, 2].map(|k| SentenceRouge::score(&sys[k], &reference[alignment.perm[k] - 1])),
        alignment,
    })
}

/// Mean whole-summary scores of one document subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub subset: String,
    pub documents: usize,
    pub scores: SentenceRouge,
}

/// Mean per-position scores of one subset; `positions[3]` is their average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionRow {
    pub subset: String,
    pub documents: usize,
    pub positions: [SentenceRouge; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub pattern: String,
    pub count: usize,
    pub percent: f64,
    /// Mean aligned scores per system sentence position.
    pub positions: [SentenceRouge; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub overall: Vec<SubsetRow>,
    pub positions: Vec<PositionRow>,
    pub patterns: Vec<PatternRow>,
}

pub fn breakdown_report(results: &[DocResult]) -> Result<BreakdownReport, EvalError> {
    if let Some(r) = results.iter().find(|r| r.label.is_none()) {
        return Err(EvalError::MissingLabel(r.id.clone()));
    }
    let subsets: [(&str, Option<StructureType>); 3] =
        [("all", None), ("parallel", Some(StructureType::Parallel)), ("sequence", Some(StructureType::Sequence))];
    let mut overall = Vec::new();
    let mut positions = Vec::new();
    for (name, filter) in subsets {
        let docs: Vec<&DocResult> = results.iter().filter(|r| filter.is_none() || r.label == filter).collect();
        overall.push(SubsetRow {
            subset: name.to_string(),
            documents: docs.len(),
            scores: SentenceRouge::mean(&docs.iter().map(|d| d.overall).collect::<Vec<_>>()),
        });
        let per_pos = [0, 1, 2].map(|k| SentenceRouge::mean(&docs.iter().map(|d| d.positional[k]).collect::<Vec<_>>()));
        positions.push(PositionRow {
            subset: name.to_string(),
            documents: docs.len(),
            positions: [per_pos[0], per_pos[1], per_pos[2], SentenceRouge::mean(&per_pos)],
        });
    }
    let patterns = PATTERNS
        .iter()
        .map(|perm| {
            let docs: Vec<&DocResult> = results.iter().filter(|r| &r.alignment.perm == perm).collect();
            PatternRow {
                pattern: perm.iter().map(|d| d.to_string()).collect(),
                count: docs.len(),
                percent: if results.is_empty() { 0.0 } else { 100.0 * docs.len() as f64 / results.len() as f64 },
                positions: [0, 1, 2]
                    .map(|k| SentenceRouge::mean(&docs.iter().map(|d| d.aligned[k]).collect::<Vec<_>>())),
            }
        })
        .collect();
    Ok(BreakdownReport { overall, positions, patterns })
}

fn pct(s: &SentenceRouge) -> [String; 3] {
    [s.r1, s.r2, s.rl].map(|v| format!("{:.2}", 100.0 * v))
}

impl BreakdownReport {
    /// Tab-separated sections, scores in percent.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("# summary\nsubset\tdocs\tR-1\tR-2\tR-L\n");
        for r in &self.overall {
            let _ = writeln!(out, "{}\t{}\t{}", r.subset, r.documents, pct(&r.scores).join("\t"));
        }
        out.push_str("\n# per-sentence\nsubset\tdocs");
        for p in ["1st", "2nd", "3rd", "ave"] {
            let _ = write!(out, "\t{p} R-1\t{p} R-2\t{p} R-L");
        }
        out.push('\n');
        for r in &self.positions {
            let cells: Vec<String> = r.positions.iter().flat_map(pct).collect();
            let _ = writeln!(out, "{}\t{}\t{}", r.subset, r.documents, cells.join("\t"));
        }
        out.push_str("\n# alignment\npattern\tcount\tpercent");
        for p in ["1st", "2nd", "3rd"] {
            let _ = write!(out, "\t{p} R-1\t{p} R-2\t{p} R-L");
        }
        out.push('\n');
        for r in &self.patterns {
            let cells: Vec<String> = r.positions.iter().flat_map(pct).collect();
            let _ = writeln!(out, "{}\t{}\t{:.1}\t{}", r.pattern, r.count, r.percent, cells.join("\t"));
        }
        out
    }
}

impl fmt::Display for BreakdownReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let triple = |s: &SentenceRouge| {
            let [a, b, c] = pct(s);
            format!("{a:>6} {b:>6} {c:>6}")
        };
        writeln!(f, "{:<10} {:>5} | {:^20}", "", "docs", "R-1    R-2    R-L")?;
        for r in &self.overall {
            writeln!(f, "{:<10} {:>5} | {}", r.subset, r.documents, triple(&r.scores))?;
        }
        writeln!(f)?;
        writeln!(f, "{:<10} {:>5} | {:^20} | {:^20} | {:^20} | {:^20}", "", "docs", "1st", "2nd", "3rd", "ave")?;
        for r in &self.positions {
            let cells: Vec<String> = r.positions.iter().map(triple).collect();
            writeln!(f, "{:<10} {:>5} | {}", r.subset, r.documents, cells.join(" | "))?;
        }
        writeln!(f)?;
        writeln!(f, "{:<7} {:>5} {:>8} | {:^20} | {:^20} | {:^20}", "pattern", "pairs", "", "1st", "2nd", "3rd")?;
        for r in &self.patterns {
            let cells: Vec<String> = r.positions.iter().map(triple).collect();
            writeln!(f, "{:<7} {:>5} {:>8} | {}", r.pattern, r.count, format!("({:.1}%)", r.percent), cells.join(" | "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn sents(v: [&str; 3]) -> Vec<Vec<String>> {
        v.iter().map(|s| tokenize(s)).collect()
    }

    #[test]
    fn single_document_fills_every_cell() {
        let r = sents(["a b c", "d e f", "g h i"]);
        let doc = score_document("d", Some(StructureType::Parallel), &r, &r).unwrap();
        let rep = breakdown_report(&[doc]).unwrap();
        let one = SentenceRouge { r1: 1.0, r2: 1.0, rl: 1.0 };
        assert_eq!(rep.overall[0].scores, one);
        assert_eq!(rep.positions[1].positions, [one; 4]);
        assert_eq!(rep.positions[2].documents, 0);
        assert_eq!(rep.patterns[0].count, 1);
        assert_eq!(rep.patterns[0].percent, 100.0);
    }

    #[test]
    fn histogram_percent_sums_to_100() {
        let r = sents(["a b", "c d", "e f"]);
        let docs: Vec<DocResult> = [["a b", "c d", "e f"], ["c d", "a b", "e f"], ["a b", "e f", "c d"]]
            .iter()
            .map(|s| score_document("x", Some(StructureType::Sequence), &sents(*s), &r).unwrap())
            .collect();
        let rep = breakdown_report(&docs).unwrap();
        let total: f64 = rep.patterns.iter().map(|p| p.percent).sum();
        assert!((total - 100.0).abs() < 1e-9);
        let counts: Vec<usize> = rep.patterns.iter().map(|p| p.count).collect();
        assert_eq!(counts, vec![1, 1, 1, 0, 0, 0]);
        assert!(rep.to_tsv().contains("132\t1\t33.3"));
        assert!(rep.to_string().contains("(33.3%)"));
    }

    #[test]
    fn missing_label_rejected() {
        let r = sents(["a", "b", "c"]);
        let doc = score_document("nolabel", None, &r, &r).unwrap();
        assert_eq!(breakdown_report(&[doc]), Err(EvalError::MissingLabel("nolabel".into())));
    }
}
