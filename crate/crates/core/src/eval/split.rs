use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dsl::{ModuleKind, Program, ProgramNode};
use crate::rng;
use crate::world::Dataset;

/// Which program templates are held out of training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitSpec {
    /// Addition or subtraction at the root over anything but two plain
    /// `find-num(find)` operands.
    ComplexArithmetic,
    /// A min/max module directly above a `filter`.
    FilterArgmax,
}

impl SplitSpec {
    pub const ALL: [SplitSpec; 2] = [SplitSpec::ComplexArithmetic, SplitSpec::FilterArgmax];

    pub fn name(self) -> &'static str {
        match self {
            SplitSpec::ComplexArithmetic => "complex-arithmetic",
            SplitSpec::FilterArgmax => "filter-argmax",
        }
    }

    pub fn holds_out(self, program: &Program) -> bool {
        match self {
            SplitSpec::ComplexArithmetic => {
                let root = &program.root;
                matches!(root.module, ModuleKind::NumAdd | ModuleKind::NumDiff) && !root.children.iter().all(is_plain_number)
            }
            SplitSpec::FilterArgmax => argmax_over_filter(&program.root),
        }
    }
}

fn is_plain_number(node: &ProgramNode) -> bool {
    node.module == ModuleKind::FindNum && node.children.len() == 1 && node.children[0].module == ModuleKind::Find
}

fn argmax_over_filter(node: &ProgramNode) -> bool {
    let here = matches!(node.module, ModuleKind::FindMaxNum | ModuleKind::FindMinNum)
        && node.children.first().is_some_and(|c| c.module == ModuleKind::Filter);
    here || node.children.iter().any(argmax_over_filter)
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SplitSpec::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown split `{s}`"))
    }
}

/// Question ids of a compositional split. Held-out questions come from every
/// passage; the remaining questions are divided into train and dev by passage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompSplit {
    pub spec: SplitSpec,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub held_out: Vec<String>,
}

impl CompSplit {
    pub fn train_set(&self) -> BTreeSet<&str> {
        self.train.iter().map(String::as_str).collect()
    }
}

pub fn build_comp_split(dataset: &Dataset, spec: SplitSpec, seed: u64, dev_fraction: f64) -> Result<CompSplit, EvalError> {
    if dataset.worlds.is_empty() {
        return Err(EvalError::Split(String::from("dataset has no passages")));
    }
    if !(0.0..1.0).contains(&dev_fraction) {
        return Err(EvalError::Split(format!("dev fraction {dev_fraction} outside [0, 1)")));
    }
    let mut order: Vec<usize> = (0..dataset.worlds.len()).collect();
    order.shuffle(&mut rng::rng(rng::mix(rng::stream(seed, "comp-split"), rng::fnv1a(spec.name().as_bytes()))));
    let n_dev = libm::round(dataset.worlds.len() as f64 * dev_fraction) as usize;
    let dev_worlds: BTreeSet<usize> = order[..n_dev].iter().copied().collect();

    let mut split = CompSplit { spec, train: Vec::new(), dev: Vec::new(), held_out: Vec::new() };
    for (wi, world) in dataset.worlds.iter().enumerate() {
        for q in world.questions.iter().filter(|q| q.is_labeled() && !q.augmented) {
            let bucket = if spec.holds_out(&q.program) {
                &mut split.held_out
            } else if dev_worlds.contains(&wi) {
                &mut split.dev
            } else {
                &mut split.train
            };
            bucket.push(q.id.clone());
        }
    }
    if split.held_out.is_empty() {
        return Err(EvalError::Split(format!("no question matches {spec}")));
    }
    if split.train.is_empty() && split.dev.is_empty() {
        return Err(EvalError::Split(format!("every question matches {spec}")));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn held(spec: SplitSpec, text: &str) -> bool {
        spec.holds_out(&parse(text).unwrap())
    }

    #[test]
    fn complex_arithmetic_examples() {
        let s = SplitSpec::ComplexArithmetic;
        assert!(held(s, "num-diff(find-num(find-max-num(find[a])), find-num(find-min-num(find[a])))"));
        assert!(!held(s, "num-diff(find-num(find[a]), find-num(find[b]))"));
        assert!(!held(s, "num-add(find-num(find[a]), find-num(find[b]))"));
        assert!(held(s, "num-add(find-num(filter[x](find[a])), find-num(find[b]))"));
        assert!(!held(s, "count(find[a])"));
    }

    #[test]
    fn filter_argmax_examples() {
        let s = SplitSpec::FilterArgmax;
        assert!(held(s, "project[who](find-max-num(filter[first half](find[a])))"));
        assert!(held(s, "span(find-min-num(filter[x](find[a])))"));
        assert!(!held(s, "project[who](find-max-num(find[a]))"));
        assert!(!held(s, "find-max-num(find[a])") && !held(s, "count(filter[x](find[a]))"));
    }

    #[test]
    fn names_round_trip() {
        for s in SplitSpec::ALL {
            assert_eq!(s.name().parse::<SplitSpec>().unwrap(), s);
        }
        assert!("other".parse::<SplitSpec>().is_err());
    }
}
