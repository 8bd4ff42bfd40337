//! AST rewrites used before execution: run-length capping and replacing
//! the interatomic potential with `pair_style zero`.

use serde::{Deserialize, Serialize};

use crate::parser::{ArgKind, ArgValue, AstCommand, AstScript, TypedArg};

pub const DEFAULT_MAX_STEPS: u64 = 10;
pub const DEFAULT_PSZ_CUTOFF: f64 = 10.0;

pub const TRUNCATE_RUNS: &str = "truncate_runs";
pub const PAIR_STYLE_ZERO: &str = "pair_style_zero";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    /// Index into the output AST.
    pub index: usize,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformWarning {
    /// Atoms are created but nothing selects a potential.
    NoPairStylePresent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformReport {
    pub name: String,
    pub edits: Vec<Edit>,
    /// Output indices of commands that have no counterpart in the input.
    pub inserted: Vec<usize>,
    pub warnings: Vec<TransformWarning>,
}

impl TransformReport {
    fn new(name: &str) -> Self {
        TransformReport { name: name.to_string(), edits: Vec::new(), inserted: Vec::new(), warnings: Vec::new() }
    }
}

/// Cap every `run N` at `max_steps`. `minimize` is left alone.
pub fn truncate_runs(ast: &AstScript, max_steps: u64) -> (AstScript, TransformReport) {
    let cap = i64::try_from(max_steps).unwrap_or(i64::MAX);
    let mut out = ast.clone();
    let mut report = TransformReport::new(TRUNCATE_RUNS);
    for (index, cmd) in out.commands.iter_mut().enumerate() {
        if cmd.name != "run" {
            continue;
        }
        let before = cmd.to_text();
        let Some(arg) = cmd.args.iter_mut().find(|a| a.slot == "n") else { continue };
        if arg.value.as_i64().is_some_and(|n| n > cap) {
            arg.value = ArgValue::Int(cap);
            arg.text = cap.to_string();
            report.edits.push(Edit { index, before, after: cmd.to_text() });
        }
    }
    (out, report)
}

fn zero_style(cutoff: f64, like: &AstCommand) -> AstCommand {
    let args = vec![
        TypedArg::new("style", &ArgKind::Word, ArgValue::Text("zero".into()), "zero"),
        TypedArg::new("cutoff", &ArgKind::Float, ArgValue::Float(cutoff), format!("{cutoff:?}")),
    ];
    AstCommand::new("pair_style", args, like.span.clone())
}

fn wildcard_coeff(like: &AstCommand) -> AstCommand {
    let star = |slot: &str| TypedArg::new(slot, &ArgKind::Star, ArgValue::Text("*".into()), "*");
    AstCommand::new("pair_coeff", vec![star("i"), star("j")], like.span.clone())
}

fn units_command(units: &TypedArg, like: &AstCommand) -> AstCommand {
    let kind = ArgKind::EnumOf { values: vec![units.word().to_string()] };
    let arg = TypedArg::new("style", &kind, ArgValue::Text(units.word().to_string()), units.word());
    AstCommand::new("units", vec![arg], like.span.clone())
}

enum KimForm {
    Init,
    Interactions,
    Other,
}

fn kim_form(cmd: &AstCommand) -> Option<KimForm> {
    match cmd.name.as_str() {
        "kim_init" => Some(KimForm::Init),
        "kim_interactions" => Some(KimForm::Interactions),
        "kim" => Some(match cmd.arg("subcommand").map(|a| a.word()) {
            Some("init") => KimForm::Init,
            Some("interactions") => KimForm::Interactions,
            _ => KimForm::Other,
        }),
        _ => None,
    }
}

fn selects_potential(cmd: &AstCommand) -> bool {
    cmd.name == "pair_style" || matches!(kim_form(cmd), Some(KimForm::Interactions))
}

fn creates_atoms(cmd: &AstCommand) -> bool {
    matches!(cmd.name.as_str(), "create_atoms" | "read_data")
}

/// Replace the potential with `pair_style zero <cutoff>` and `pair_coeff * *`.
///
/// `kim init M u` becomes `units u`; `kim interactions ...` becomes the
/// zero style followed by an inserted wildcard `pair_coeff`.
pub fn apply_pair_style_zero(ast: &AstScript, cutoff: f64) -> (AstScript, TransformReport) {
    let mut report = TransformReport::new(PAIR_STYLE_ZERO);
    let mut commands = Vec::with_capacity(ast.commands.len());
    let push_edit = |report: &mut TransformReport, index: usize, before: String, after: &AstCommand| {
        let after = after.to_text();
        if before != after {
            report.edits.push(Edit { index, before, after });
        }
    };
    for cmd in &ast.commands {
        let before = cmd.to_text();
        let replacement = match (cmd.name.as_str(), kim_form(cmd)) {
            ("pair_style", _) => Some(zero_style(cutoff, cmd)),
            ("pair_coeff", _) => Some(wildcard_coeff(cmd)),
            (_, Some(KimForm::Init)) => cmd.arg("user_units").map(|u| units_command(u, cmd)),
            (_, Some(KimForm::Interactions)) => {
                let style = zero_style(cutoff, cmd);
                push_edit(&mut report, commands.len(), before, &style);
                commands.push(style);
                report.inserted.push(commands.len());
                commands.push(wildcard_coeff(cmd));
                continue;
            }
            _ => None,
        };
        match replacement {
            Some(new) => {
                push_edit(&mut report, commands.len(), before, &new);
                commands.push(new);
            }
            None => commands.push(cmd.clone()),
        }
    }
    if ast.commands.iter().any(creates_atoms) && !ast.commands.iter().any(selects_potential) {
        report.warnings.push(TransformWarning::NoPairStylePresent);
    }
    (AstScript { commands, ..ast.clone() }, report)
}
