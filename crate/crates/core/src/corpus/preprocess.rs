use serde::{Deserialize, Serialize};

use super::NewsPair;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Articles are cut to their first `max_src_len` tokens.
    pub max_src_len: usize,
    /// Pairs whose three summary sentences total fewer tokens are dropped.
    pub min_summary_len: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { max_src_len: 400, min_summary_len: 70 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub input: usize,
    pub kept: usize,
    pub truncated: usize,
    pub dropped_short_summary: usize,
}

pub fn preprocess(pairs: &[NewsPair], cfg: &PreprocessConfig) -> (Vec<NewsPair>, PreprocessReport) {
    let mut report = PreprocessReport { input: pairs.len(), ..Default::default() };
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        if p.summary_len() < cfg.min_summary_len {
            report.dropped_short_summary += 1;
            continue;
        }
        let mut p = p.clone();
        if p.article.len() > cfg.max_src_len {
            p.article.truncate(cfg.max_src_len);
            report.truncated += 1;
        }
        out.push(p);
    }
    report.kept = out.len();
    (out, report)
}
