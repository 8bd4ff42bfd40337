//! Stage-by-stage evaluation of one script and batch evaluation of a corpus.

mod batch;
mod report;
mod runner;

use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{analyze, passes_parser};
use crate::diagnostics::{Code, Diagnostic};
use crate::normalizer::{normalize, NormalizeConfig, NormalizeError, RawScript};
use crate::parser::{parse, serialize, SignatureRegistry};
use crate::rubric::{evaluate_rubric, evaluate_rubric_with, extract_parameters, Rubric, RubricResult, PAIR_EXTRACTORS};
use crate::transforms::{apply_pair_style_zero, truncate_runs, DEFAULT_MAX_STEPS, DEFAULT_PSZ_CUTOFF};

pub use batch::{discover_corpus, evaluate_batch, BatchError, BatchOutput, CorpusEntry};
pub use report::{aggregate, Report, SliceCounts, PARSER_PASS_DEFINITION};
pub use runner::{ExecOutcome, ExternalRunner, Runner, RunnerError, INPUT_NAME, LOG_NAME};

/// Terminal outcome of a script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FinalClass {
    #[serde(rename = "Acc_C")]
    AccC,
    #[serde(rename = "Acc_F")]
    AccF,
    #[serde(rename = "PSZ_Acc_C")]
    PszAccC,
    #[serde(rename = "PSZ_Acc_F")]
    PszAccF,
    #[serde(rename = "PSZ_Exec_F")]
    PszExecF,
    #[serde(rename = "Parser_F")]
    ParserF,
    #[serde(rename = "Sanitizer_F")]
    SanitizerF,
    /// Parsed cleanly but was never executed.
    StaticPass,
}

impl FinalClass {
    pub const ALL: [FinalClass; 8] = [
        FinalClass::AccC,
        FinalClass::AccF,
        FinalClass::PszAccC,
        FinalClass::PszAccF,
        FinalClass::PszExecF,
        FinalClass::ParserF,
        FinalClass::SanitizerF,
        FinalClass::StaticPass,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FinalClass::AccC => "Acc_C",
            FinalClass::AccF => "Acc_F",
            FinalClass::PszAccC => "PSZ_Acc_C",
            FinalClass::PszAccF => "PSZ_Acc_F",
            FinalClass::PszExecF => "PSZ_Exec_F",
            FinalClass::ParserF => "Parser_F",
            FinalClass::SanitizerF => "Sanitizer_F",
            FinalClass::StaticPass => "StaticPass",
        }
    }

    pub fn from_label(label: &str) -> Option<FinalClass> {
        FinalClass::ALL.into_iter().find(|c| c.label() == label)
    }
}

impl std::fmt::Display for FinalClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Payload-free summary of a stage, the input to [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Ok,
    Fail,
    Skipped,
    NotNeeded,
}

impl Status {
    pub const ALL: [Status; 4] = [Status::Ok, Status::Fail, Status::Skipped, Status::NotNeeded];
}

/// Map stage statuses to a final class. Defined for every combination.
pub fn classify(normalize: Status, parse: Status, exec: Status, psz: Status, rubric: Status) -> FinalClass {
    if normalize != Status::Ok {
        return FinalClass::SanitizerF;
    }
    if parse != Status::Ok {
        return FinalClass::ParserF;
    }
    let accurate = rubric == Status::Ok;
    match exec {
        Status::Ok if accurate => FinalClass::AccC,
        Status::Ok => FinalClass::AccF,
        Status::Fail => match psz {
            Status::Ok if accurate => FinalClass::PszAccC,
            Status::Ok => FinalClass::PszAccF,
            _ => FinalClass::PszExecF,
        },
        Status::Skipped | Status::NotNeeded => FinalClass::StaticPass,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorpusTags {
    pub model: String,
    pub prompt: String,
    pub sample: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NormalizeStage {
    Ok { lines: usize },
    Fail { error: NormalizeError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseStage {
    /// Diagnostics here are warnings only.
    Ok {
        commands: usize,
        diagnostics: Vec<Diagnostic>,
    },
    Fail {
        diagnostics: Vec<Diagnostic>,
    },
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecStage {
    Ok { outcome: ExecOutcome },
    Fail { outcome: ExecOutcome },
    Skipped { reason: String },
    NotNeeded,
}

impl ExecStage {
    fn from_outcome(outcome: ExecOutcome) -> Self {
        if outcome.success {
            ExecStage::Ok { outcome }
        } else {
            ExecStage::Fail { outcome }
        }
    }

    pub fn status(&self) -> Status {
        match self {
            ExecStage::Ok { .. } => Status::Ok,
            ExecStage::Fail { .. } => Status::Fail,
            ExecStage::Skipped { .. } => Status::Skipped,
            ExecStage::NotNeeded => Status::NotNeeded,
        }
    }

    pub fn outcome(&self) -> Option<&ExecOutcome> {
        match self {
            ExecStage::Ok { outcome } | ExecStage::Fail { outcome } => Some(outcome),
            _ => None,
        }
    }

    fn without_timing(&self) -> Self {
        match self {
            ExecStage::Ok { outcome } => ExecStage::Ok { outcome: outcome.without_timing() },
            ExecStage::Fail { outcome } => ExecStage::Fail { outcome: outcome.without_timing() },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RubricStage {
    Pass { result: RubricResult },
    Fail { failing: Vec<String>, result: RubricResult },
    Skipped,
}

impl RubricStage {
    fn from_result(result: RubricResult) -> Self {
        if result.passed() {
            RubricStage::Pass { result }
        } else {
            let failing = result.failing().into_iter().map(str::to_string).collect();
            RubricStage::Fail { failing, result }
        }
    }

    pub fn status(&self) -> Status {
        match self {
            RubricStage::Pass { .. } => Status::Ok,
            RubricStage::Fail { .. } => Status::Fail,
            RubricStage::Skipped => Status::Skipped,
        }
    }

    pub fn result(&self) -> Option<&RubricResult> {
        match self {
            RubricStage::Pass { result } | RubricStage::Fail { result, .. } => Some(result),
            RubricStage::Skipped => None,
        }
    }
}

/// Everything that happened to one script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub origin: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tags: Option<CorpusTags>,
    pub rubric_id: String,
    pub normalize: NormalizeStage,
    pub parse: ParseStage,
    pub exec: ExecStage,
    pub psz_exec: ExecStage,
    pub rubric: RubricStage,
    pub final_class: FinalClass,
}

impl StageRecord {
    pub fn normalize_status(&self) -> Status {
        match self.normalize {
            NormalizeStage::Ok { .. } => Status::Ok,
            NormalizeStage::Fail { .. } => Status::Fail,
        }
    }

    pub fn parse_status(&self) -> Status {
        match self.parse {
            ParseStage::Ok { .. } => Status::Ok,
            ParseStage::Fail { .. } => Status::Fail,
            ParseStage::Skipped => Status::Skipped,
        }
    }

    /// Recompute the class from the recorded stages.
    pub fn classify(&self) -> FinalClass {
        classify(
            self.normalize_status(),
            self.parse_status(),
            self.exec.status(),
            self.psz_exec.status(),
            self.rubric.status(),
        )
    }

    pub fn parser_passed(&self) -> bool {
        self.normalize_status() == Status::Ok && self.parse_status() == Status::Ok
    }

    /// Ran to completion, either as written or with the zero potential.
    pub fn executed(&self) -> bool {
        self.exec.status() == Status::Ok || self.psz_exec.status() == Status::Ok
    }

    pub fn slice_key(&self) -> (String, String) {
        match &self.tags {
            Some(t) => (t.model.clone(), t.prompt.clone()),
            None => ("unknown".to_string(), "unknown".to_string()),
        }
    }

    /// Copy with wall-clock timings zeroed, for comparing reruns.
    pub fn without_timing(&self) -> Self {
        StageRecord { exec: self.exec.without_timing(), psz_exec: self.psz_exec.without_timing(), ..self.clone() }
    }
}

/// When a failed run earns a second attempt with the zero potential.
#[derive(Debug, Clone)]
pub enum PszTrigger {
    AnyFailure,
    /// Only when the last log line matches.
    Matching(Regex),
}

impl PszTrigger {
    pub fn pair_related() -> Self {
        PszTrigger::Matching(Regex::new(r"(?i)pair|potential|eam|kim|setfl|funcfl|coeff").expect("static regex"))
    }

    fn fires(&self, outcome: &ExecOutcome) -> bool {
        match self {
            PszTrigger::AnyFailure => true,
            PszTrigger::Matching(re) => re.is_match(&outcome.last_log_line),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no rubric configured for {0}")]
    MissingRubric(String),
}

#[derive(Clone)]
pub struct PipelineConfig {
    pub normalize: NormalizeConfig,
    pub registry: Arc<SignatureRegistry>,
    pub rubric: Option<Rubric>,
    /// `None` runs the static stages only.
    pub runner: Option<Arc<dyn Runner>>,
    pub max_steps: u64,
    pub psz_cutoff: f64,
    pub psz_trigger: PszTrigger,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            normalize: NormalizeConfig::default(),
            registry: Arc::new(SignatureRegistry::lammps_core()),
            rubric: None,
            runner: None,
            max_steps: DEFAULT_MAX_STEPS,
            psz_cutoff: DEFAULT_PSZ_CUTOFF,
            psz_trigger: PszTrigger::AnyFailure,
        }
    }
}

impl PipelineConfig {
    pub fn with_rubric(mut self, rubric: Rubric) -> Self {
        self.rubric = Some(rubric);
        self
    }

    pub fn with_runner(mut self, runner: Arc<dyn Runner>) -> Self {
        self.runner = Some(runner);
        self
    }
}

fn label(raw: &RawScript, tags: Option<&CorpusTags>) -> String {
    match tags {
        Some(t) => format!("{}-{}-{}", t.model, t.prompt, t.sample),
        None => raw.origin().to_string(),
    }
}

/// Run one script through every stage and classify it.
pub fn evaluate_script(
    raw: &RawScript,
    tags: Option<CorpusTags>,
    config: &PipelineConfig,
) -> Result<StageRecord, PipelineError> {
    let rubric = config.rubric.as_ref().ok_or_else(|| PipelineError::MissingRubric(raw.origin().to_string()))?;
    let mut record = StageRecord {
        origin: raw.origin().to_string(),
        tags,
        rubric_id: rubric.id.clone(),
        normalize: NormalizeStage::Ok { lines: 0 },
        parse: ParseStage::Skipped,
        exec: ExecStage::Skipped { reason: "earlier stage failed".into() },
        psz_exec: ExecStage::Skipped { reason: "earlier stage failed".into() },
        rubric: RubricStage::Skipped,
        final_class: FinalClass::SanitizerF,
    };

    let canonical = match normalize(raw, &config.normalize) {
        Ok(c) => c,
        Err(error) => {
            record.normalize = NormalizeStage::Fail { error };
            record.final_class = record.classify();
            return Ok(record);
        }
    };
    record.normalize = NormalizeStage::Ok { lines: canonical.lines.len() };

    let parsed = parse(&canonical, &config.registry);
    let (_, semantic) = analyze(&parsed.ast);
    let mut diagnostics: Vec<Diagnostic> = parsed.diagnostics.iter().chain(&semantic).cloned().collect();
    diagnostics.sort_by_key(|d| (d.location.raw_line, d.location.line_index));
    if !passes_parser(&parsed.diagnostics, &semantic) {
        let fatal = |d: &Diagnostic| d.is_error() || matches!(d.code, Code::S001 | Code::S003);
        record.parse = ParseStage::Fail { diagnostics: diagnostics.into_iter().filter(fatal).collect() };
        record.final_class = record.classify();
        return Ok(record);
    }
    let ast = parsed.ast;
    record.parse = ParseStage::Ok { commands: ast.commands.len(), diagnostics };

    let params = extract_parameters(&ast);
    let Some(runner) = &config.runner else {
        record.exec = ExecStage::Skipped { reason: "no runner configured".into() };
        record.psz_exec = ExecStage::Skipped { reason: "no runner configured".into() };
        record.rubric = RubricStage::from_result(evaluate_rubric(&params, rubric));
        record.final_class = record.classify();
        return Ok(record);
    };

    let name = label(raw, record.tags.as_ref());
    let (short, _) = truncate_runs(&ast, config.max_steps);
    record.exec = match runner.run(&serialize(&short).text(), &name) {
        Ok(outcome) => ExecStage::from_outcome(outcome),
        Err(e) => ExecStage::Skipped { reason: e.to_string() },
    };
    record.psz_exec = ExecStage::NotNeeded;
    let mut full = true;
    if let ExecStage::Fail { outcome } = &record.exec {
        record.psz_exec = if config.psz_trigger.fires(outcome) {
            let (zero, _) = apply_pair_style_zero(&short, config.psz_cutoff);
            match runner.run(&serialize(&zero).text(), &format!("{name}-psz")) {
                Ok(outcome) => ExecStage::from_outcome(outcome),
                Err(e) => ExecStage::Skipped { reason: e.to_string() },
            }
        } else {
            ExecStage::Skipped { reason: "failure not attributed to the potential".into() }
        };
        full = false;
    }
    let result =
        if full { evaluate_rubric(&params, rubric) } else { evaluate_rubric_with(&params, rubric, PAIR_EXTRACTORS) };
    record.rubric = RubricStage::from_result(result);
    record.final_class = record.classify();
    Ok(record)
}
