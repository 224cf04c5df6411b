//! `records.csv`, `summary.json` and per-seed query logs.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::json;

use crate::error::Result;
use crate::numfmt::fmt_g17;

use super::config::ExperimentConfig;
use super::experiment::{query_records, RunResult};

pub const RECORDS_HEADER: &str = "seed,round,strategy,labeled_size,test_accuracy,G,alignment,B,mmd,approx_ratio,epochs";

fn cell(v: Option<f64>) -> String {
    v.map(fmt_g17).unwrap_or_default()
}

/// Rows ordered by seed, then round. Disabled metrics are empty cells.
pub fn write_records<W: Write>(result: &RunResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORDS_HEADER.split(','))?;
    let mut seeds: Vec<_> = result.seeds.iter().collect();
    seeds.sort_by_key(|s| s.seed);
    for s in seeds {
        for r in &s.records {
            out.write_record([
                s.seed.to_string(),
                r.round.to_string(),
                result.strategy.clone(),
                r.labeled_size.to_string(),
                fmt_g17(r.test_accuracy),
                cell(r.g),
                cell(r.alignment),
                cell(r.bound),
                cell(r.mmd),
                cell(r.approx_ratio),
                r.train_epochs.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn summary_json(config: &ExperimentConfig, result: &RunResult) -> Result<serde_json::Value> {
    let seeds: Vec<_> = result
        .seeds
        .iter()
        .map(|s| {
            json!({
                "seed": s.seed,
                "rounds_completed": s.records.len(),
                "initial_class_coverage": s.initial_class_coverage,
                "error": s.error,
            })
        })
        .collect();
    Ok(json!({
        "fingerprint": result.fingerprint,
        "strategy": result.strategy,
        "config": serde_json::to_value(config)?,
        "metadata": {
            "test_split": "stratified",
            "margin": "softmax_probabilities",
            "confidence": "softmax_probabilities",
        },
        "seeds": seeds,
        "aggregate": result.aggregate,
    }))
}

/// Writes `records.csv`, `summary.json` and `queries_seed<N>.jsonl` into `dir`.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, result: &RunResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records(result, fs::File::create(dir.join("records.csv"))?)?;
    let summary = serde_json::to_string_pretty(&summary_json(config, result)?)?;
    fs::write(dir.join("summary.json"), summary + "\n")?;
    for s in &result.seeds {
        let mut f = fs::File::create(dir.join(format!("queries_seed{}.jsonl", s.seed)))?;
        for q in query_records(result, s) {
            writeln!(f, "{}", serde_json::to_string(&q)?)?;
        }
    }
    Ok(())
}
