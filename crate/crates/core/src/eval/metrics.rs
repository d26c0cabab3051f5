use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::StructureType;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold instances of the class.
    pub support: usize,
    /// Instances predicted as the class.
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Indexed by [`StructureType::index`].
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
    pub macro_f1: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; 2]; 2],
}

impl ClassificationReport {
    pub fn class(&self, t: StructureType) -> &ClassMetrics {
        &self.classes[t.index()]
    }

    pub fn min_precision(&self) -> f64 {
        self.classes[0].precision.min(self.classes[1].precision)
    }
}

fn frac(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn classification_report(
    preds: &[StructureType],
    golds: &[StructureType],
) -> Result<ClassificationReport, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    let mut confusion = [[0usize; 2]; 2];
    for (p, g) in preds.iter().zip(golds) {
        confusion[g.index()][p.index()] += 1;
    }
    let classes = [0, 1].map(|c| {
        let tp = confusion[c][c];
        let support = confusion[c][0] + confusion[c][1];
        let predicted = confusion[0][c] + confusion[1][c];
        let precision = frac(tp, predicted);
        let recall = frac(tp, support);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        ClassMetrics { precision, recall, f1, support, predicted }
    });
    Ok(ClassificationReport {
        accuracy: frac(confusion[0][0] + confusion[1][1], preds.len()),
        macro_f1: (classes[0].f1 + classes[1].f1) / 2.0,
        classes,
        confusion,
    })
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9} {:>7} {:>6} {:>8}", "", "precision", "recall", "F1", "support")?;
        for t in StructureType::BOTH {
            let m = self.class(t);
            writeln!(f, "{:<10} {:>9.3} {:>7.3} {:>6.3} {:>8}", t.as_str(), m.precision, m.recall, m.f1, m.support)?;
        }
        writeln!(f, "accuracy {:.3}  macro-F1 {:.3}", self.accuracy, self.macro_f1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use StructureType::{Parallel as P, Sequence as S};

    #[test]
    fn perfect() {
        let g = [P, S, S, P];
        let r = classification_report(&g, &g).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert!(r.classes.iter().all(|c| c.precision == 1.0 && c.recall == 1.0));
    }

    #[test]
    fn all_parallel_on_balanced() {
        let r = classification_report(&[P, P, P, P], &[P, S, P, S]).unwrap();
        assert_eq!(r.class(P).recall, 1.0);
        assert_eq!(r.class(S).recall, 0.0);
        assert_eq!(r.class(S).precision, 0.0);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn hand_confusion() {
        // gold P P P S S, pred P S P S P: tp_P=2 fp_P=1 fn_P=1, tp_S=1 fp_S=1 fn_S=1
        let r = classification_report(&[P, S, P, S, P], &[P, P, P, S, S]).unwrap();
        assert_eq!(r.confusion, [[2, 1], [1, 1]]);
        assert_eq!(r.class(P).precision, 2.0 / 3.0);
        assert_eq!(r.class(P).recall, 2.0 / 3.0);
        assert_eq!(r.class(S).precision, 0.5);
        assert_eq!(r.class(S).recall, 0.5);
        assert_eq!(r.accuracy, 0.6);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(classification_report(&[P], &[]), Err(EvalError::LengthMismatch { preds: 1, golds: 0 }));
    }
}
