//! Compositional question answering with typed module programs.
//!
//! Programs are trees of modules (`find`, `filter`, `count`, ...) that execute
//! as differentiable soft operators over a question/passage encoding. Training
//! combines answer likelihood with a paired-consistency term: when two questions
//! share a program subtree, the symmetric KL divergence between the subtree's
//! denotations in each question's context is minimized.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and all
//! IO live in the `modpair` companion crate.
//!
//! Layout:
//!
//! - [`dsl`]: grammar, parser, typechecker, subtree utilities.
//! - [`world`]: deterministic synthetic passages, questions, gold annotations.
//! - [`autodiff`]: reverse-mode differentiation over dense `f64` matrices.
//! - [`executor`]: joint encoder and the soft module implementations.
//! - [`pairing`]: found, templated and generated pair acquisition.
//! - [`training`]: batching and the combined objective.
//! - [`eval`]: answer metrics, faithfulness, compositional splits.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod autodiff;
pub mod dsl;
pub mod eval;
pub mod executor;
pub mod pairing;
pub mod rng;
pub mod training;
pub mod world;

pub use dsl::{ModuleKind, NodePath, Program, ProgramNode, TemplateSignature, ValueType};

