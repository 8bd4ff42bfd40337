//! Static analysis and evaluation of LAMMPS input scripts.

pub mod analyzer;
pub mod diagnostics;
mod lexical;
pub mod normalizer;
pub mod parser;
pub mod pipeline;
pub mod rubric;
pub mod transforms;
