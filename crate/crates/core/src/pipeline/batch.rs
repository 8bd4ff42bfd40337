//! Corpus discovery and parallel evaluation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{aggregate, evaluate_script, CorpusTags, PipelineConfig, PipelineError, Report, StageRecord};
use crate::normalizer::RawScript;
use crate::rubric::Rubric;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub tags: CorpusTags,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no rubric for prompt `{0}`")]
    MissingRubric(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    pub records: Vec<StageRecord>,
    pub report: Report,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BatchError + '_ {
    move |source| BatchError::Io { path: path.to_path_buf(), source }
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>, BatchError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let entry = entry.map_err(io(dir))?;
        if entry.file_type().map_err(io(dir))?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Numeric stems sort numerically, ahead of any other names.
fn sample_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Collect `DIR/<model>/<prompt>/<k>.in`, ordered by model, prompt, sample.
pub fn discover_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, BatchError> {
    let mut entries = Vec::new();
    for model_dir in subdirs(dir)? {
        for prompt_dir in subdirs(&model_dir)? {
            let mut samples = Vec::new();
            for entry in fs::read_dir(&prompt_dir).map_err(io(&prompt_dir))? {
                let path = entry.map_err(io(&prompt_dir))?.path();
                if path.is_file() && path.extension().is_some_and(|e| e == "in") {
                    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    samples.push((stem, path));
                }
            }
            samples.sort_by(|a, b| sample_order(&a.0, &b.0));
            for (sample, path) in samples {
                let tags = CorpusTags { model: file_name(&model_dir), prompt: file_name(&prompt_dir), sample };
                entries.push(CorpusEntry { path, tags });
            }
        }
    }
    Ok(entries)
}

/// Evaluate every entry with the rubric named after its prompt directory.
///
/// Output order follows `entries` regardless of `jobs`.
pub fn evaluate_batch(
    entries: &[CorpusEntry],
    rubrics: &BTreeMap<String, Rubric>,
    config: &PipelineConfig,
    jobs: usize,
) -> Result<BatchOutput, BatchError> {
    if let Some(e) = entries.iter().find(|e| !rubrics.contains_key(&e.tags.prompt)) {
        return Err(BatchError::MissingRubric(e.tags.prompt.clone()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BatchError::Pool(e.to_string()))?;
    let records: Result<Vec<StageRecord>, BatchError> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let source = fs::read_to_string(&entry.path).map_err(io(&entry.path))?;
                let raw = RawScript::new(source, entry.path.to_string_lossy());
                let config = PipelineConfig { rubric: rubrics.get(&entry.tags.prompt).cloned(), ..config.clone() };
                Ok(evaluate_script(&raw, Some(entry.tags.clone()), &config)?)
            })
            .collect()
    });
    let records = records?;
    let report = aggregate(&records);
    Ok(BatchOutput { records, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_samples_sort_numerically() {
        let mut v = vec!["10", "2", "b", "1", "a"];
        v.sort_by(|a, b| sample_order(a, b));
        assert_eq!(v, vec!["1", "2", "10", "a", "b"]);
    }
}
