//! Acquisition of paired examples: questions (or constructed probes) on one
//! passage whose programs share a `find` leaf with an equivalent argument.
//!
//! Three sources are supported. Found pairs match existing questions against
//! each other. Template pairs build probe questions ("What were the ...?",
//! "When did the ...?") and superlative-inverted questions from frequent
//! program shapes. Generated pairs ask rule-based questions about individual
//! numbers and dates and keep those matching an existing question's argument.

mod found;
mod generated;
mod similarity;
mod template;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsl::{ModuleKind, NodePath, ProgramNode};
use crate::world::QAExample;

pub use found::find_natural_pairs;
pub use generated::generate_probe_pairs;
pub use similarity::{arg_similarity, arg_similarity_with, token_similarity, Matcher, SimilarityVerdict, DEFAULT_THRESHOLD};
pub use template::{construct_template_pairs, template_family, template_pairs_for_world, Family, FamilySet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Equality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSource {
    Found,
    Template,
    Generated,
}

impl PairSource {
    pub const ALL: [PairSource; 3] = [PairSource::Found, PairSource::Template, PairSource::Generated];

    pub fn name(self) -> &'static str {
        match self {
            PairSource::Found => "found",
            PairSource::Template => "template",
            PairSource::Generated => "generated",
        }
    }
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PairSource::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| alloc::format!("unknown pair source `{s}`"))
    }
}

/// Two subtrees, in two examples on the same passage, whose denotations should agree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairLink {
    pub example_a: String,
    pub path_a: NodePath,
    pub example_b: String,
    pub path_b: NodePath,
    pub relation: Relation,
    pub source: PairSource,
}

impl PairLink {
    pub fn new(a: &str, path_a: NodePath, b: &str, path_b: NodePath, source: PairSource) -> Self {
        PairLink {
            example_a: String::from(a),
            path_a,
            example_b: String::from(b),
            path_b,
            relation: Relation::Equality,
            source,
        }
    }
}

/// New examples (probes or inverted questions) for one passage and the links
/// that tie them to its questions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorldPairs {
    pub examples: Vec<QAExample>,
    pub links: Vec<PairLink>,
}

/// `find` leaves of a program with their argument tokens.
pub(crate) fn find_leaves(example: &QAExample) -> Vec<(NodePath, Vec<String>)> {
    let mut out = Vec::new();
    for path in example.program.paths() {
        let node: &ProgramNode = example.program.get(&path).expect("path from the same program");
        if node.module == ModuleKind::Find {
            if let Some(arg) = &node.arg {
                out.push((path, arg.clone()));
            }
        }
    }
    out
}
