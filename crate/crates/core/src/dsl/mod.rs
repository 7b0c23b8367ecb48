//! The module-program language.
//!
//! Surface syntax is `name[arg tokens](child, child)`. The string argument is
//! present exactly for `find`, `filter` and `project`; children are separated
//! by commas. Example: `count(filter[in the first half](find[field goals]))`.

mod parse;
mod program;
mod registry;

pub use parse::{parse, render, SyntaxError};
pub use program::{
    enumerate_subtrees, template_signature, typecheck, typecheck_full, NodePath, PathParseError,
    Program, ProgramNode, TemplateSignature, TypeError,
};
pub use registry::{ModuleKind, ModuleSpec, ValueType, REGISTRY};
