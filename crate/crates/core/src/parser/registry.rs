//! Command signatures loaded from JSON.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SHIPPED: &str = include_str!("../../signatures/lammps-core.json");

/// Argument shape for one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArgKind {
    Int,
    Float,
    #[serde(rename = "number")]
    NumberEither,
    Word,
    #[serde(rename = "string")]
    QuotedString,
    #[serde(rename = "id")]
    Identifier,
    #[serde(rename = "enum")]
    EnumOf {
        values: Vec<String>,
    },
    Star,
    #[serde(rename = "file")]
    FilePath,
}

impl ArgKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ArgKind::Int => "int",
            ArgKind::Float => "float",
            ArgKind::NumberEither => "number",
            ArgKind::Word => "word",
            ArgKind::QuotedString => "string",
            ArgKind::Identifier => "id",
            ArgKind::EnumOf { .. } => "enum",
            ArgKind::Star => "star",
            ArgKind::FilePath => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSlot {
    pub name: String,
    #[serde(flatten)]
    pub kind: ArgKind,
    /// Literal words accepted in place of the typed value (`NULL`, `INF`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub also: Vec<String>,
}

impl ArgSlot {
    pub fn new(name: impl Into<String>, kind: ArgKind) -> Self {
        ArgSlot { name: name.into(), kind, also: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordGroup {
    #[serde(default)]
    pub args: Vec<ArgSlot>,
    #[serde(default)]
    pub repeatable: bool,
    /// Trailing open-ended arguments, consumed until the next keyword.
    #[serde(default)]
    pub variadic: Option<ArgSlot>,
    #[serde(default)]
    pub min_variadic: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grammar {
    #[serde(default)]
    pub positional: Vec<ArgSlot>,
    #[serde(default)]
    pub min_positional: usize,
    #[serde(default)]
    pub variadic: Option<ArgSlot>,
    #[serde(default)]
    pub min_variadic: usize,
    #[serde(default)]
    pub keywords: BTreeMap<String, KeywordGroup>,
    #[serde(default)]
    pub required_keywords: Vec<String>,
}

/// How to treat a style word that has no entry in `styles`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownStyle {
    /// Report as an unknown command (P001).
    UnknownCommand,
    /// Report as a bad enum value (P005).
    #[default]
    BadEnum,
    /// Accept any trailing words.
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSignature {
    pub name: String,
    #[serde(flatten)]
    pub grammar: Grammar,
    #[serde(default)]
    pub style_slot: Option<usize>,
    #[serde(default)]
    pub unknown_style: UnknownStyle,
    #[serde(default)]
    pub styles: BTreeMap<String, Grammar>,
    #[serde(default)]
    pub doc_ref: String,
}

impl CommandSignature {
    /// A signature with only required positional slots.
    pub fn positional(name: impl Into<String>, slots: Vec<ArgSlot>) -> Self {
        let grammar = Grammar { min_positional: slots.len(), positional: slots, ..Grammar::default() };
        CommandSignature {
            name: name.into(),
            grammar,
            style_slot: None,
            unknown_style: UnknownStyle::default(),
            styles: BTreeMap::new(),
            doc_ref: String::new(),
        }
    }

    fn validate(&self) -> Result<(), RegistryError> {
        let bad = |message: String| RegistryError::Invalid { command: self.name.clone(), message };
        let mut grammars = vec![("base".to_string(), &self.grammar)];
        grammars.extend(self.styles.iter().map(|(k, g)| (format!("style `{k}`"), g)));
        for (label, g) in grammars {
            if g.min_positional > g.positional.len() {
                return Err(bad(format!("{label}: min_positional exceeds positional slots")));
            }
            for req in &g.required_keywords {
                if !g.keywords.contains_key(req) && !self.grammar.keywords.contains_key(req) {
                    return Err(bad(format!("{label}: required keyword `{req}` is not declared")));
                }
            }
        }
        if let Some(slot) = self.style_slot {
            if self.grammar.positional.len() != slot + 1 || self.grammar.min_positional != slot + 1 {
                return Err(bad("style_slot must be the last required base positional".into()));
            }
            if self.grammar.variadic.is_some() {
                return Err(bad("a dispatched command cannot have a base variadic".into()));
            }
        } else if !self.styles.is_empty() {
            return Err(bad("styles given without style_slot".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("signature for `{0}` is already registered")]
    DuplicateSignature(String),
    #[error("invalid signature for `{command}`: {message}")]
    Invalid { command: String, message: String },
    #[error("signature file is not valid at `{path}`: {message}")]
    Json { path: String, message: String },
    #[error("cannot read signature file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct RegistryFile {
    version: String,
    commands: Vec<CommandSignature>,
}

/// Command name to signature, with a version tag carried into each AST.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureRegistry {
    version: String,
    commands: BTreeMap<String, CommandSignature>,
}

impl SignatureRegistry {
    pub fn empty(version: impl Into<String>) -> Self {
        SignatureRegistry { version: version.into(), commands: BTreeMap::new() }
    }

    /// The registry shipped with the crate.
    pub fn lammps_core() -> Self {
        Self::from_json(SHIPPED).expect("shipped signature file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: RegistryFile = serde_path_to_error::deserialize(de)
            .map_err(|e| RegistryError::Json { path: e.path().to_string(), message: e.inner().to_string() })?;
        let mut reg = SignatureRegistry::empty(file.version);
        for sig in file.commands {
            reg.register(sig, false)?;
        }
        Ok(reg)
    }

    pub fn from_path(path: &Path) -> Result<Self, RegistryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Add a signature. An existing name is an error unless `overwrite`.
    pub fn register(&mut self, sig: CommandSignature, overwrite: bool) -> Result<(), RegistryError> {
        sig.validate()?;
        if !overwrite && self.commands.contains_key(&sig.name) {
            return Err(RegistryError::DuplicateSignature(sig.name));
        }
        self.commands.insert(sig.name.clone(), sig);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CommandSignature> {
        self.commands.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.commands.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.commands.keys().map(String::as_str)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

impl Default for SignatureRegistry {
    fn default() -> Self {
        Self::lammps_core()
    }
}
