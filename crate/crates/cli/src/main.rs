use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use lammps_lint_core::analyzer::analyze;
use lammps_lint_core::diagnostics::Diagnostic;
use lammps_lint_core::normalizer::{normalize, CanonicalScript, NormalizeConfig, RawScript};
use lammps_lint_core::parser::{parse, serialize, ParseOutput, SignatureRegistry};
use lammps_lint_core::pipeline::{
    discover_corpus, evaluate_batch, BatchOutput, ExternalRunner, FinalClass, PipelineConfig, PszTrigger, Report,
    StageRecord,
};
use lammps_lint_core::rubric::{
    evaluate_rubric, extract_parameters, load_rubric_path, shipped_rubric, shipped_rubrics, Rubric, RubricResult,
    Verdict,
};
use lammps_lint_core::transforms::{apply_pair_style_zero, truncate_runs, DEFAULT_MAX_STEPS, DEFAULT_PSZ_CUTOFF};

const RUNNER_ENV: &str = "LAMMPS_LINT_RUNNER";

/// Lint LAMMPS input scripts and score them against task rubrics.
#[derive(Parser)]
#[command(name = "lammps-lint", version)]
struct Cli {
    /// Command signature registry (JSON). Defaults to the built-in LAMMPS core set.
    #[arg(long, global = true, value_name = "FILE")]
    signatures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical form of a script.
    Normalize(Input),
    /// Print the typed AST as JSON.
    Parse(Input),
    /// Report parser and semantic diagnostics.
    Lint {
        #[command(flatten)]
        input: Input,
        /// Emit diagnostics as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Rewrite a script for a short smoke-test run.
    Transform {
        #[command(flatten)]
        input: Input,
        /// Cap every `run` at N steps.
        #[arg(long, value_name = "N")]
        truncate_runs: Option<u64>,
        /// Replace the interatomic potential with `pair_style zero`.
        #[arg(long)]
        psz: bool,
        #[arg(long, value_name = "C", default_value_t = DEFAULT_PSZ_CUTOFF)]
        psz_cutoff: f64,
    },
    /// Score a script against a rubric.
    Evaluate {
        /// Shipped rubric id or path to a rubric file.
        #[arg(long, value_name = "R")]
        rubric: String,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        json: bool,
    },
    /// Run every script of a corpus through the full pipeline.
    Batch(BatchArgs),
    /// Print the rate and class tables for saved records.
    Report {
        /// Output of `batch --out`, or a JSON array of records.
        file: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    /// Script path; `-` or nothing reads stdin.
    path: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    /// Directory laid out as `<model>/<prompt>/<k>.in`.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Rubric id or file. One rubric applies to every prompt; several are
    /// matched to prompt directories by id. Defaults to the shipped set.
    #[arg(long, value_name = "R")]
    rubric: Vec<String>,
    /// LAMMPS executable. Without one only the static stages run.
    #[arg(long, value_name = "EXE", env = RUNNER_ENV)]
    runner: Option<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Write records and report as JSON.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Per-run wall-clock limit in seconds.
    #[arg(long, value_name = "SECS", default_value_t = 600)]
    timeout: u64,
    /// Directory copied next to each run as `potentials/`.
    #[arg(long, value_name = "DIR")]
    potentials: Option<PathBuf>,
    /// Keep each run's working directory under DIR.
    #[arg(long, value_name = "DIR")]
    scratch: Option<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long, value_name = "C", default_value_t = DEFAULT_PSZ_CUTOFF)]
    psz_cutoff: f64,
    /// Retry with `pair_style zero` only when the failure looks potential related.
    #[arg(long)]
    psz_on_pair_errors: bool,
}

/// A usage or configuration problem; exits with status 2.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| ConfigError(e).into())
}

fn read_input(input: &Input) -> Result<RawScript> {
    match input.path.as_deref() {
        None => stdin_script(),
        Some(p) if p == Path::new("-") => stdin_script(),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
            Ok(RawScript::new(config(text)?, p.to_string_lossy()))
        }
    }
}

fn stdin_script() -> Result<RawScript> {
    let mut text = String::new();
    config(std::io::stdin().read_to_string(&mut text).context("reading stdin"))?;
    Ok(RawScript::new(text, "<stdin>"))
}

fn registry(path: Option<&Path>) -> Result<SignatureRegistry> {
    match path {
        None => Ok(SignatureRegistry::lammps_core()),
        Some(p) => config(SignatureRegistry::from_path(p).with_context(|| format!("loading {}", p.display()))),
    }
}

fn load_rubric(given: &str) -> Result<Rubric> {
    if let Some(r) = shipped_rubric(given) {
        return Ok(r);
    }
    let path = Path::new(given);
    if !path.exists() {
        let known: Vec<String> = shipped_rubrics().into_iter().map(|r| r.id).collect();
        return config(Err(anyhow!("`{given}` is neither a file nor a shipped rubric ({})", known.join(", "))));
    }
    config(load_rubric_path(path).with_context(|| format!("loading {given}")))
}

fn canonical(raw: &RawScript) -> std::result::Result<CanonicalScript, String> {
    normalize(raw, &NormalizeConfig::default()).map_err(|e| format!("{}: {e}", raw.origin()))
}

fn parse_and_analyze(canon: &CanonicalScript, registry: &SignatureRegistry) -> (ParseOutput, Vec<Diagnostic>) {
    let parsed = parse(canon, registry);
    let (_, semantic) = analyze(&parsed.ast);
    let mut all: Vec<Diagnostic> = parsed.diagnostics.iter().chain(&semantic).cloned().collect();
    all.sort_by_key(|d| (d.location.raw_line, d.location.column, d.code));
    (parsed, all)
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "Pass",
        Verdict::Fail => "Fail",
        Verdict::NotFound => "NotFound",
        Verdict::Ignored => "Ignored",
    }
}

fn rubric_table(result: &RubricResult) -> String {
    let width = result.criteria.iter().map(|c| c.id.len()).max().unwrap_or(0).max(9);
    let mut out = String::new();
    let _ = writeln!(out, "{:width$}  {:8}  {:24}  expected", "criterion", "verdict", "extracted");
    for c in &result.criteria {
        let got =
            c.extracted.as_ref().map_or_else(|| "-".to_string(), |v| serde_json::to_string(v).unwrap_or_default());
        let want = serde_json::to_string(&c.expected).unwrap_or_default();
        let _ = writeln!(out, "{:width$}  {:8}  {:24}  {}", c.id, verdict_label(c.verdict), got, want);
    }
    let _ = writeln!(out, "overall: {}", verdict_label(result.overall));
    out
}

fn is_failure(class: FinalClass) -> bool {
    matches!(
        class,
        FinalClass::SanitizerF | FinalClass::ParserF | FinalClass::AccF | FinalClass::PszAccF | FinalClass::PszExecF
    )
}

fn batch(args: &BatchArgs, signatures: Option<&Path>) -> Result<bool> {
    if args.jobs == 0 {
        return config(Err(anyhow!("--jobs must be at least 1")));
    }
    let entries = config(discover_corpus(&args.corpus).with_context(|| format!("scanning {}", args.corpus.display())))?;
    if entries.is_empty() {
        return config(Err(anyhow!("no `<model>/<prompt>/<k>.in` scripts under {}", args.corpus.display())));
    }
    let mut rubrics: BTreeMap<String, Rubric> = BTreeMap::new();
    match args.rubric.as_slice() {
        [] => rubrics.extend(shipped_rubrics().into_iter().map(|r| (r.id.clone(), r))),
        [one] => {
            let r = load_rubric(one)?;
            for e in &entries {
                rubrics.insert(e.tags.prompt.clone(), r.clone());
            }
        }
        many => {
            for given in many {
                let r = load_rubric(given)?;
                rubrics.insert(r.id.clone(), r);
            }
        }
    }

    let mut cfg = PipelineConfig {
        registry: Arc::new(registry(signatures)?),
        max_steps: args.max_steps,
        psz_cutoff: args.psz_cutoff,
        ..PipelineConfig::default()
    };
    if args.psz_on_pair_errors {
        cfg.psz_trigger = PszTrigger::pair_related();
    }
    if let Some(exe) = &args.runner {
        let mut runner =
            config(ExternalRunner::new(exe, Duration::from_secs(args.timeout)).map_err(anyhow::Error::from))?;
        if let Some(p) = &args.potentials {
            runner = runner.with_potentials(p);
        }
        if let Some(s) = &args.scratch {
            runner = runner.with_scratch_root(s);
        }
        cfg.runner = Some(Arc::new(runner));
    }

    let output = evaluate_batch(&entries, &rubrics, &cfg, args.jobs).map_err(|e| ConfigError(e.into()))?;
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&output)?;
        config(std::fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display())))?;
    }
    print!("{}", output.report.to_text());
    Ok(output.records.iter().all(|r| !is_failure(r.final_class)))
}

fn read_records(path: &Path) -> Result<Report> {
    let text = config(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
    let records: Vec<StageRecord> = match serde_json::from_str::<BatchOutput>(&text) {
        Ok(out) => out.records,
        Err(_) => config(serde_json::from_str(&text).with_context(|| format!("{} holds no records", path.display())))?,
    };
    Ok(lammps_lint_core::pipeline::aggregate(&records))
}

/// Returns whether the command succeeded; errors are usage or config problems.
fn run(cli: Cli) -> Result<bool> {
    let signatures = cli.signatures.as_deref();
    match &cli.command {
        Command::Normalize(input) => {
            let raw = read_input(input)?;
            match canonical(&raw) {
                Ok(c) => print!("{}", c.text()),
                Err(e) => return config(Err(anyhow!(e))),
            }
            Ok(true)
        }
        Command::Parse(input) => {
            let raw = read_input(input)?;
            let reg = registry(signatures)?;
            let canon = match canonical(&raw) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(false);
                }
            };
            let parsed = parse(&canon, &reg);
            println!("{}", serde_json::to_string_pretty(&parsed.ast)?);
            for d in &parsed.diagnostics {
                eprintln!("{}: {d}", raw.origin());
            }
            Ok(!parsed.has_errors())
        }
        Command::Lint { input, json: as_json } => {
            let raw = read_input(input)?;
            let reg = registry(signatures)?;
            let canon = match canonical(&raw) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(false);
                }
            };
            let (_, diags) = parse_and_analyze(&canon, &reg);
            if *as_json {
                println!("{}", serde_json::to_string_pretty(&diags)?);
            } else {
                for d in &diags {
                    println!(
                        "{}:{}:{}: {} {} {}",
                        raw.origin(),
                        d.location.raw_line,
                        d.location.column,
                        d.severity,
                        d.code,
                        d.message
                    );
                }
            }
            Ok(!diags.iter().any(Diagnostic::is_error))
        }
        Command::Transform { input, truncate_runs: cap, psz, psz_cutoff } => {
            let raw = read_input(input)?;
            let reg = registry(signatures)?;
            let canon = match canonical(&raw) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(false);
                }
            };
            let parsed = parse(&canon, &reg);
            if parsed.has_errors() {
                for d in parsed.diagnostics.iter().filter(|d| d.is_error()) {
                    eprintln!("{}: {d}", raw.origin());
                }
                return Ok(false);
            }
            let mut ast = parsed.ast;
            if let Some(n) = cap {
                ast = truncate_runs(&ast, *n).0;
            }
            if *psz {
                let (out, report) = apply_pair_style_zero(&ast, *psz_cutoff);
                for w in &report.warnings {
                    eprintln!("warning: {w:?}");
                }
                ast = out;
            }
            print!("{}", serialize(&ast).text());
            Ok(true)
        }
        Command::Evaluate { rubric, input, json: as_json } => {
            let rubric = load_rubric(rubric)?;
            let raw = read_input(input)?;
            let reg = registry(signatures)?;
            let canon = match canonical(&raw) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(false);
                }
            };
            let parsed = parse(&canon, &reg);
            for d in parsed.diagnostics.iter().filter(|d| d.is_error()) {
                eprintln!("{}: {d}", raw.origin());
            }
            let result = evaluate_rubric(&extract_parameters(&parsed.ast), &rubric);
            if *as_json {
                println!("{}", serde_json::to_string_pretty(&result)?);
            } else {
                print!("{}", rubric_table(&result));
            }
            Ok(!parsed.has_errors() && result.passed())
        }
        Command::Batch(args) => batch(args, signatures),
        Command::Report { file } => {
            print!("{}", read_records(file)?.to_text());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
