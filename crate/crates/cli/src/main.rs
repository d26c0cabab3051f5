//! `b3sum`: command-line front end for every pipeline stage.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use b3sum_core::config::RunConfig;
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

#[derive(Parser, Debug)]
#[command(name = "b3sum", version, about = "Structure-aware three-sentence summarization")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Flat JSON config file; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides one config key (repeatable), e.g. `--set hidden_dim=64`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic labeled corpus.
    GenSynth(commands::GenSynth),
    /// Build a vocabulary file from a corpus.
    BuildVocab(commands::BuildVocab),
    /// Truncate articles, drop short summaries, optionally split.
    Preprocess(commands::Preprocess),
    /// Train the shared base summarizer on all pairs.
    Pretrain(commands::Pretrain),
    /// Split training pairs by the summary classifier's prediction.
    AutoLabel(commands::AutoLabel),
    /// Fine-tune a copy of the base summarizer on one structure subset.
    Finetune(commands::Finetune),
    /// Train a structure classifier on summaries or articles.
    TrainClassifier(commands::TrainClassifier),
    /// Search under-sampling ratios until both class precisions pass the target.
    TuneUndersample(commands::TuneUndersample),
    /// Summarize articles, routed by the article classifier or with one model.
    Summarize(commands::Summarize),
    /// Mean ROUGE of system summaries against references.
    Evaluate(commands::Evaluate),
    /// Sentence alignment patterns between system and oracle summaries.
    AlignEval(commands::AlignEval),
    /// Whole-summary, per-sentence and alignment-pattern tables.
    Report(commands::Report),
    /// Structure label counts per split.
    Stats(commands::Stats),
}

/// File config, then `--seed`, then `--set` overrides.
pub fn resolve_config(g: &Global) -> Result<RunConfig> {
    let mut obj: Map<String, Value> = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{} must hold a JSON object", path.display()))?
        }
        None => Map::new(),
    };
    if let Some(seed) = g.seed {
        obj.insert("seed".into(), seed.into());
    }
    for kv in &g.overrides {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        obj.insert(k.trim().to_string(), value);
    }
    let cfg = RunConfig::from_json_str(&Value::Object(obj).to_string())?;
    log::info!("config {} {}", &b3sum_core::checkpoint::hex(&cfg.hash())[..12], cfg.to_json());
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    let result = commands::dispatch(cli.command, &cfg)?;
    let text = serde_json::to_string_pretty(&result)? + "\n";
    match &cli.global.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("B3SUM_LOG", "info")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
