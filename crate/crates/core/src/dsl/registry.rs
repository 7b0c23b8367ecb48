use core::fmt;

use serde::{Deserialize, Serialize};

/// Kind of value a module produces or consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ValueType {
    TokenDist,
    NumberDist,
    DateDist,
    CountDist,
    ComposedValueDist,
    /// Pseudo-kind for "decodes to an answer"; only used as a root requirement.
    Answer,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueType::TokenDist => "TokenDist",
            ValueType::NumberDist => "NumberDist",
            ValueType::DateDist => "DateDist",
            ValueType::CountDist => "CountDist",
            ValueType::ComposedValueDist => "ComposedValueDist",
            ValueType::Answer => "Answer",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModuleKind {
    Find,
    Filter,
    Project,
    Count,
    FindNum,
    FindDate,
    FindMaxNum,
    FindMinNum,
    NumCompareGt,
    NumCompareLt,
    DateCompareGt,
    DateCompareLt,
    NumAdd,
    NumDiff,
    TimeDiff,
    Span,
}

/// Static signature of a module.
#[derive(Debug, PartialEq, Eq)]
pub struct ModuleSpec {
    pub kind: ModuleKind,
    pub name: &'static str,
    pub input_types: &'static [ValueType],
    pub output_type: ValueType,
    pub takes_string_arg: bool,
}

use ValueType::*;

pub static REGISTRY: [ModuleSpec; 16] = [
    ModuleSpec { kind: ModuleKind::Find, name: "find", input_types: &[], output_type: TokenDist, takes_string_arg: true },
    ModuleSpec { kind: ModuleKind::Filter, name: "filter", input_types: &[TokenDist], output_type: TokenDist, takes_string_arg: true },
    ModuleSpec { kind: ModuleKind::Project, name: "project", input_types: &[TokenDist], output_type: TokenDist, takes_string_arg: true },
    ModuleSpec { kind: ModuleKind::Count, name: "count", input_types: &[TokenDist], output_type: CountDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::FindNum, name: "find-num", input_types: &[TokenDist], output_type: NumberDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::FindDate, name: "find-date", input_types: &[TokenDist], output_type: DateDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::FindMaxNum, name: "find-max-num", input_types: &[TokenDist], output_type: TokenDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::FindMinNum, name: "find-min-num", input_types: &[TokenDist], output_type: TokenDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::NumCompareGt, name: "num-compare-gt", input_types: &[TokenDist, TokenDist], output_type: TokenDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::NumCompareLt, name: "num-compare-lt", input_types: &[TokenDist, TokenDist], output_type: TokenDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::DateCompareGt, name: "date-compare-gt", input_types: &[TokenDist, TokenDist], output_type: TokenDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::DateCompareLt, name: "date-compare-lt", input_types: &[TokenDist, TokenDist], output_type: TokenDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::NumAdd, name: "num-add", input_types: &[NumberDist, NumberDist], output_type: ComposedValueDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::NumDiff, name: "num-diff", input_types: &[NumberDist, NumberDist], output_type: ComposedValueDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::TimeDiff, name: "time-diff", input_types: &[TokenDist, TokenDist], output_type: ComposedValueDist, takes_string_arg: false },
    ModuleSpec { kind: ModuleKind::Span, name: "span", input_types: &[TokenDist], output_type: TokenDist, takes_string_arg: false },
];

impl ModuleKind {
    pub const ALL: [ModuleKind; 16] = [
        ModuleKind::Find,
        ModuleKind::Filter,
        ModuleKind::Project,
        ModuleKind::Count,
        ModuleKind::FindNum,
        ModuleKind::FindDate,
        ModuleKind::FindMaxNum,
        ModuleKind::FindMinNum,
        ModuleKind::NumCompareGt,
        ModuleKind::NumCompareLt,
        ModuleKind::DateCompareGt,
        ModuleKind::DateCompareLt,
        ModuleKind::NumAdd,
        ModuleKind::NumDiff,
        ModuleKind::TimeDiff,
        ModuleKind::Span,
    ];

    pub fn spec(self) -> &'static ModuleSpec {
        // REGISTRY is ordered like ALL.
        &REGISTRY[self as usize]
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    pub fn from_name(name: &str) -> Option<ModuleKind> {
        REGISTRY.iter().find(|s| s.name == name).map(|s| s.kind)
    }

    pub fn arity(self) -> usize {
        self.spec().input_types.len()
    }

    pub fn takes_string_arg(self) -> bool {
        self.spec().takes_string_arg
    }

    pub fn output_type(self) -> ValueType {
        self.spec().output_type
    }

    /// Whether a program rooted at this module decodes to an answer.
    ///
    /// Non-token kinds always decode; token-producing roots must be an
    /// answer-selecting module (`span`, `project`, or a comparison).
    pub fn is_answer_root(self) -> bool {
        match self.output_type() {
            TokenDist => matches!(
                self,
                ModuleKind::Span
                    | ModuleKind::Project
                    | ModuleKind::NumCompareGt
                    | ModuleKind::NumCompareLt
                    | ModuleKind::DateCompareGt
                    | ModuleKind::DateCompareLt
            ),
            _ => true,
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
