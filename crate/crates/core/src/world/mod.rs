//! Synthetic passages with structured events, questions and gold annotations.
//!
//! Two domains are generated. Game passages describe scoring plays with yardage
//! and quarters; history passages describe battles, treaties and sieges with
//! years. Every question carries a gold program, the question-token slice of
//! each string argument, a gold answer and the gold token set of every
//! token-valued program node, all computed by [`symbolic_execute`].

mod config;
mod dataset;
mod generate;
mod lexicon;
mod symbolic;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsl::{NodePath, Program};

pub use config::{ConfigError, GenConfig, QuestionMix};
pub use dataset::{generate_dataset, passage_split, Dataset, SplitManifest};
pub use generate::generate_world;
pub use generate::MAX_COUNT;
pub use lexicon::{detokenize, tokenize, Lexicon, Modifier, Predicate};
pub use symbolic::{symbolic_execute, SymbolicError, SymbolicResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Game,
    History,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    FieldGoal,
    TouchdownPass,
    TouchdownRun,
    MissedFieldGoal,
    DroppedPass,
    FumbledRun,
    Battle,
    Treaty,
    Siege,
}

impl EventKind {
    pub const PRIMARY: [EventKind; 6] = [
        EventKind::FieldGoal,
        EventKind::TouchdownPass,
        EventKind::TouchdownRun,
        EventKind::Battle,
        EventKind::Treaty,
        EventKind::Siege,
    ];

    pub fn domain(self) -> Domain {
        match self {
            EventKind::Battle | EventKind::Treaty | EventKind::Siege => Domain::History,
            _ => Domain::Game,
        }
    }

    pub fn is_distractor(self) -> bool {
        matches!(self, EventKind::MissedFieldGoal | EventKind::DroppedPass | EventKind::FumbledRun)
    }

    /// The near-miss counterpart of a scoring kind.
    pub fn distractor(self) -> Option<EventKind> {
        match self {
            EventKind::FieldGoal => Some(EventKind::MissedFieldGoal),
            EventKind::TouchdownPass => Some(EventKind::DroppedPass),
            EventKind::TouchdownRun => Some(EventKind::FumbledRun),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::FieldGoal => "field-goal",
            EventKind::TouchdownPass => "touchdown-pass",
            EventKind::TouchdownRun => "touchdown-run",
            EventKind::MissedFieldGoal => "missed-field-goal",
            EventKind::DroppedPass => "dropped-pass",
            EventKind::FumbledRun => "fumbled-run",
            EventKind::Battle => "battle",
            EventKind::Treaty => "treaty",
            EventKind::Siege => "siege",
        }
    }

    pub fn from_name(s: &str) -> Option<EventKind> {
        [
            EventKind::FieldGoal,
            EventKind::TouchdownPass,
            EventKind::TouchdownRun,
            EventKind::MissedFieldGoal,
            EventKind::DroppedPass,
            EventKind::FumbledRun,
            EventKind::Battle,
            EventKind::Treaty,
            EventKind::Siege,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Date {
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub month: Option<u8>,
}

/// Half-open `[start, end)` index range, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span(pub usize, pub usize);

impl Span {
    pub fn start(self) -> usize {
        self.0
    }

    pub fn end(self) -> usize {
        self.1
    }

    pub fn len(self) -> usize {
        self.1.saturating_sub(self.0)
    }

    pub fn is_empty(self) -> bool {
        self.1 <= self.0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 <= i && i < self.1
    }

    pub fn indices(self) -> core::ops::Range<usize> {
        self.0..self.1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Entity name: the player for game events, the place for history events.
    pub agent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<Date>,
    pub token_span: Span,
    /// Game: quarter 1..=4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quarter: Option<u8>,
    /// Passage tokens naming the event: the player token, or "Battle of X".
    pub name_span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum GoldAnswer {
    Count(u32),
    Number(i64),
    Year(i32),
    Span(Span),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question_tokens: Vec<String>,
    pub program: Program,
    pub arg_spans: BTreeMap<NodePath, Span>,
    /// Absent for unlabeled probes.
    pub answer: Option<GoldAnswer>,
    /// Gold passage-token indices per annotated node.
    pub gold_module_outputs: BTreeMap<NodePath, Vec<usize>>,
    #[serde(default)]
    pub is_probe: bool,
    /// Built from another question (e.g. superlative inversion) rather than sampled.
    #[serde(default)]
    pub augmented: bool,
}

impl QAExample {
    pub fn question_text(&self) -> String {
        detokenize(&self.question_tokens)
    }

    /// Whether the example may contribute an answer-likelihood term.
    pub fn is_labeled(&self) -> bool {
        !self.is_probe && self.answer.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldInstance {
    pub id: String,
    pub domain: Domain,
    pub passage_tokens: Vec<String>,
    pub numbers: Vec<(usize, i64)>,
    pub dates: Vec<(usize, Date)>,
    pub events: Vec<Event>,
    pub questions: Vec<QAExample>,
}

impl WorldInstance {
    pub fn question(&self, id: &str) -> Option<&QAExample> {
        self.questions.iter().find(|q| q.id == id)
    }

    /// Sentence index of each passage token (sentences end at ".").
    pub fn sentence_ids(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.passage_tokens.len());
        let mut s = 0;
        for t in &self.passage_tokens {
            out.push(s);
            if t == "." {
                s += 1;
            }
        }
        out
    }
}
