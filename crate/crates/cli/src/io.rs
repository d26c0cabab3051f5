//! File helpers shared by the subcommands.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use b3sum_core::checkpoint::{check_names, load_checkpoint, save_checkpoint};
use b3sum_core::classifier::ClassifierParams;
use b3sum_core::config::RunConfig;
use b3sum_core::corpus::{load_jsonl, NewsPair, StructureLabel, StructureType};
use b3sum_core::summarizer::SummarizerParams;
use serde::{Deserialize, Serialize};

pub fn read_pairs(path: &Path, strict: bool) -> Result<Vec<NewsPair>> {
    let report = load_jsonl(path, strict).with_context(|| format!("reading {}", path.display()))?;
    for e in &report.errors {
        log::warn!("{}:{}: skipped: {}", path.display(), e.line, e.message);
    }
    Ok(report.pairs)
}

/// One line of a summaries file. Corpus files also parse as summaries
/// (their other fields are ignored).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub summary: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SummaryRecord {
    pub fn sentences(&self) -> Vec<Vec<String>> {
        self.summary.iter().map(|s| s.split_whitespace().map(str::to_string).collect()).collect()
    }

    pub fn structure(&self) -> Result<Option<StructureType>> {
        match self.label.as_deref() {
            None => Ok(None),
            Some(s) => match s.parse::<StructureLabel>() {
                Ok(l) => Ok(Some(l.binary())),
                Err(_) => Ok(Some(s.parse::<StructureType>().with_context(|| format!("record {:?}", self.id))?)),
            },
        }
    }
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: SummaryRecord =
            serde_json::from_str(line).with_context(|| format!("{}:{}: bad summary record", path.display(), i + 1))?;
        if rec.summary.len() != 3 {
            bail!("{}:{}: summary has {} sentences, expected 3", path.display(), i + 1, rec.summary.len());
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_model(path: &Path, store: &b3sum_core::grad::ParamStore, cfg: &RunConfig) -> Result<()> {
    save_checkpoint(path, store, &cfg.hash()).with_context(|| format!("writing {}", path.display()))
}

pub fn load_summarizer(path: &Path, cfg: &RunConfig) -> Result<SummarizerParams> {
    let loaded = load_checkpoint(path, Some(&cfg.hash())).with_context(|| format!("loading {}", path.display()))?;
    let model = SummarizerParams::from_store(loaded.store).with_context(|| format!("{} is not a summarizer", path.display()))?;
    let reference = SummarizerParams::new(model.dims, 0)?;
    check_names(&model.store, &reference.store).with_context(|| format!("loading {}", path.display()))?;
    Ok(model)
}

pub fn load_classifier(path: &Path, cfg: &RunConfig) -> Result<ClassifierParams> {
    let loaded = load_checkpoint(path, Some(&cfg.hash())).with_context(|| format!("loading {}", path.display()))?;
    let model = ClassifierParams::from_store(loaded.store).with_context(|| format!("{} is not a classifier", path.display()))?;
    let reference = ClassifierParams::new(model.dims, 0)?;
    check_names(&model.store, &reference.store).with_context(|| format!("loading {}", path.display()))?;
    Ok(model)
}
