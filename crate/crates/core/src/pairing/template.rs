use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PairLink, PairSource, WorldPairs};
use crate::dsl::{ModuleKind, NodePath, Program, ProgramNode};
use crate::world::{symbolic_execute, tokenize, Lexicon, QAExample, Span, WorldInstance};

/// Program shapes that receive constructed pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `count(find)` and `count(filter(find))`.
    Count,
    /// `find-num|project(find-max-num(find | filter(find)))`.
    Max,
    /// As `Max` with `find-min-num`.
    Min,
    /// `date-compare-gt|lt(find, find)` and `time-diff(find, find)`.
    Date,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Count, Family::Max, Family::Min, Family::Date];

    pub fn name(self) -> &'static str {
        match self {
            Family::Count => "count",
            Family::Max => "max",
            Family::Min => "min",
            Family::Date => "date",
        }
    }
}

/// Enabled template families, written as a comma list such as `count,max,min`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySet(pub BTreeSet<Family>);

impl FamilySet {
    pub fn all() -> Self {
        FamilySet(Family::ALL.into_iter().collect())
    }

    pub fn contains(&self, f: Family) -> bool {
        self.0.contains(&f)
    }
}

impl Default for FamilySet {
    fn default() -> Self {
        FamilySet::all()
    }
}

impl FromStr for FamilySet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                return Ok(FamilySet::all());
            }
            let f = Family::ALL.into_iter().find(|f| f.name() == part).ok_or_else(|| format!("unknown family `{part}`"))?;
            set.insert(f);
        }
        Ok(FamilySet(set))
    }
}

fn is_find(n: &ProgramNode) -> bool {
    n.module == ModuleKind::Find && n.children.is_empty()
}

/// Path of the `find` leaf under `find` or `filter(find)` rooted at `path`.
fn find_or_filtered(n: &ProgramNode, path: NodePath) -> Option<NodePath> {
    if is_find(n) {
        return Some(path);
    }
    if n.module == ModuleKind::Filter && n.children.len() == 1 && is_find(&n.children[0]) {
        return Some(path.child(0));
    }
    None
}

/// Classifies a program into a template family and returns its `find` leaf paths.
pub fn template_family(program: &Program) -> Option<(Family, Vec<NodePath>)> {
    let root = &program.root;
    let r = NodePath::root();
    match root.module {
        ModuleKind::Count => Some((Family::Count, alloc::vec![find_or_filtered(&root.children[0], r.child(0))?])),
        ModuleKind::FindNum | ModuleKind::Project => {
            let ext = root.children.first()?;
            let family = match ext.module {
                ModuleKind::FindMaxNum => Family::Max,
                ModuleKind::FindMinNum => Family::Min,
                _ => return None,
            };
            Some((family, alloc::vec![find_or_filtered(&ext.children[0], r.child(0).child(0))?]))
        }
        ModuleKind::DateCompareGt | ModuleKind::DateCompareLt | ModuleKind::TimeDiff => {
            if root.children.iter().all(is_find) {
                Some((Family::Date, alloc::vec![r.child(0), r.child(1)]))
            } else {
                None
            }
        }
        _ => None,
    }
}

fn probe(id: String, prefix: &str, arg: &[String], wrap: ModuleKind, world: &WorldInstance, lexicon: &Lexicon) -> QAExample {
    let mut tokens = tokenize(prefix);
    let start = tokens.len();
    tokens.extend(arg.iter().cloned());
    let end = tokens.len();
    tokens.push(String::from("?"));
    let program = Program::new(ProgramNode::unary(wrap, ProgramNode { module: ModuleKind::Find, arg: Some(arg.to_vec()), children: Vec::new() }));
    let mut arg_spans = BTreeMap::new();
    arg_spans.insert(NodePath::root().child(0), Span(start, end));
    let gold = symbolic_execute(&program, world, lexicon).map(|r| r.gold).unwrap_or_default();
    QAExample {
        id,
        question_tokens: tokens,
        program,
        arg_spans,
        answer: None,
        gold_module_outputs: gold,
        is_probe: true,
        augmented: false,
    }
}

fn swap_extremum(n: &mut ProgramNode) {
    n.module = match n.module {
        ModuleKind::FindMaxNum => ModuleKind::FindMinNum,
        ModuleKind::FindMinNum => ModuleKind::FindMaxNum,
        m => m,
    };
    n.children.iter_mut().for_each(swap_extremum);
}

/// The question with its superlative replaced by the antonym and min/max swapped.
fn invert(example: &QAExample, world: &WorldInstance, lexicon: &Lexicon) -> Option<QAExample> {
    let i = example.question_tokens.iter().position(|t| lexicon.antonym(t).is_some())?;
    let mut tokens = example.question_tokens.clone();
    tokens[i] = String::from(lexicon.antonym(&tokens[i])?);
    let mut program = example.program.clone();
    swap_extremum(&mut program.root);
    let sym = symbolic_execute(&program, world, lexicon).ok()?;
    let answer = sym.answer?;
    Some(QAExample {
        id: format!("{}-inv", example.id),
        question_tokens: tokens,
        program,
        arg_spans: example.arg_spans.clone(),
        answer: Some(answer),
        gold_module_outputs: sym.gold,
        is_probe: false,
        augmented: true,
    })
}

/// Constructed examples for one question: a "What were the ...?" probe for
/// count/max/min shapes, one "When did the ...?" probe per `find` of date
/// shapes, and a superlative-inverted question for max/min shapes. Each is
/// returned with the link that ties it to `example`.
pub fn construct_template_pairs(example: &QAExample, world: &WorldInstance, lexicon: &Lexicon) -> Vec<(QAExample, PairLink)> {
    let Some((family, finds)) = template_family(&example.program) else { return Vec::new() };
    let arg = |p: &NodePath| example.program.get(p).and_then(|n| n.arg.clone()).unwrap_or_default();
    let probe_path = NodePath::root().child(0);
    let mut out = Vec::new();
    match family {
        Family::Count | Family::Max | Family::Min => {
            let f = &finds[0];
            let plural = lexicon.pluralize(&arg(f));
            let p = probe(format!("{}-what", example.id), "What were the", &plural, ModuleKind::Span, world, lexicon);
            let link = PairLink::new(&example.id, f.clone(), &p.id, probe_path.clone(), PairSource::Template);
            out.push((p, link));
            if family != Family::Count {
                if let Some(inv) = invert(example, world, lexicon) {
                    let link = PairLink::new(&example.id, f.clone(), &inv.id, f.clone(), PairSource::Template);
                    out.push((inv, link));
                }
            }
        }
        Family::Date => {
            for (k, f) in finds.iter().enumerate() {
                let p = probe(format!("{}-when{k}", example.id), "When did the", &arg(f), ModuleKind::FindDate, world, lexicon);
                let link = PairLink::new(&example.id, f.clone(), &p.id, probe_path.clone(), PairSource::Template);
                out.push((p, link));
            }
        }
    }
    out
}

/// Template constructions for every question of one passage in the enabled
/// families. Identical probes are merged so several questions link to one
/// shared probe; probes are renamed `<passage>-t<NN>`.
pub fn template_pairs_for_world(world: &WorldInstance, lexicon: &Lexicon, families: &FamilySet) -> WorldPairs {
    let mut questions: Vec<&QAExample> = world.questions.iter().filter(|q| !q.is_probe && !q.augmented).collect();
    questions.sort_by(|a, b| a.id.cmp(&b.id));
    let mut texts: BTreeSet<Vec<String>> = world.questions.iter().map(|q| q.question_tokens.clone()).collect();
    let mut probe_ids: BTreeMap<Vec<String>, String> = BTreeMap::new();
    let mut out = WorldPairs::default();
    for q in questions {
        match template_family(&q.program) {
            Some((f, _)) if families.contains(f) => {}
            _ => continue,
        }
        for (mut ex, mut link) in construct_template_pairs(q, world, lexicon) {
            if ex.is_probe {
                let id = match probe_ids.get(&ex.question_tokens) {
                    Some(id) => id.clone(),
                    None => {
                        let id = format!("{}-t{:02}", world.id, probe_ids.len());
                        probe_ids.insert(ex.question_tokens.clone(), id.clone());
                        ex.id = id.clone();
                        out.examples.push(ex);
                        id
                    }
                };
                link.example_b = id;
            } else {
                if !texts.insert(ex.question_tokens.clone()) {
                    continue;
                }
                out.examples.push(ex);
            }
            out.links.push(link);
        }
    }
    out
}
