//! Exact discrete semantics of programs over a world's events.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::lexicon::{Lexicon, Modifier};
use super::{GoldAnswer, Span, WorldInstance};
use crate::dsl::{ModuleKind, NodePath, Program, ProgramNode};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SymbolicError {
    #[error("argument `{arg}` at {path} matches no lexicon entry")]
    UnresolvableArg { path: NodePath, arg: String },
    #[error("node {path} selects no events")]
    Empty { path: NodePath },
    #[error("node {path} needs exactly one event carrying a value")]
    Ambiguous { path: NodePath },
    #[error("comparison at {path} is tied")]
    Tie { path: NodePath },
}

/// Discrete value of a program node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymValue {
    /// Event indices with the passage tokens they denote.
    Tokens { events: Vec<usize>, tokens: Vec<usize> },
    Number { value: i64, token: usize },
    Year { year: i32, token: usize },
    Count(u32),
    Composed(i64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicResult {
    /// `None` when a token-valued root does not denote one contiguous span.
    /// A comparison answers with the winning event's name.
    pub answer: Option<GoldAnswer>,
    /// Gold passage-token indices of every token-, number- and date-valued node.
    pub gold: BTreeMap<NodePath, Vec<usize>>,
    pub values: BTreeMap<NodePath, SymValue>,
}

struct Exec<'a> {
    world: &'a WorldInstance,
    lexicon: &'a Lexicon,
    values: BTreeMap<NodePath, SymValue>,
}

impl Exec<'_> {
    fn event_tokens(&self, events: &[usize]) -> Vec<usize> {
        let mut t: Vec<usize> = events.iter().flat_map(|&e| self.world.events[e].token_span.indices()).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    fn tokens_of(&self, events: Vec<usize>, path: &NodePath) -> Result<SymValue, SymbolicError> {
        if events.is_empty() {
            return Err(SymbolicError::Empty { path: path.clone() });
        }
        let tokens = self.event_tokens(&events);
        Ok(SymValue::Tokens { events, tokens })
    }

    fn single(&self, v: &SymValue, path: &NodePath) -> Result<usize, SymbolicError> {
        match v {
            SymValue::Tokens { events, .. } if events.len() == 1 => Ok(events[0]),
            _ => Err(SymbolicError::Ambiguous { path: path.clone() }),
        }
    }

    fn number_of(&self, e: usize, path: &NodePath) -> Result<(i64, usize), SymbolicError> {
        let ev = &self.world.events[e];
        let value = ev.value.ok_or_else(|| SymbolicError::Ambiguous { path: path.clone() })?;
        let token = self
            .world
            .numbers
            .iter()
            .find(|(t, _)| ev.token_span.contains(*t))
            .map(|(t, _)| *t)
            .ok_or_else(|| SymbolicError::Ambiguous { path: path.clone() })?;
        Ok((value, token))
    }

    fn date_of(&self, e: usize, path: &NodePath) -> Result<(i32, usize), SymbolicError> {
        let ev = &self.world.events[e];
        let year = ev.date.ok_or_else(|| SymbolicError::Ambiguous { path: path.clone() })?.year;
        let token = self
            .world
            .dates
            .iter()
            .find(|(t, _)| ev.token_span.contains(*t))
            .map(|(t, _)| *t)
            .ok_or_else(|| SymbolicError::Ambiguous { path: path.clone() })?;
        Ok((year, token))
    }

    fn events(&self, v: &SymValue) -> Vec<usize> {
        match v {
            SymValue::Tokens { events, .. } => events.clone(),
            _ => Vec::new(),
        }
    }

    fn run(&mut self, node: &ProgramNode, path: NodePath) -> Result<SymValue, SymbolicError> {
        let mut kids = Vec::with_capacity(node.children.len());
        for (i, c) in node.children.iter().enumerate() {
            kids.push(self.run(c, path.child(i))?);
        }
        let unresolvable = || SymbolicError::UnresolvableArg { path: path.clone(), arg: node.arg_text().unwrap_or_default() };
        let arg: &[String] = node.arg.as_deref().unwrap_or(&[]);
        let world = self.world;
        let value = match node.module {
            ModuleKind::Find => {
                let pred = self.lexicon.resolve_find(arg).ok_or_else(unresolvable)?;
                let events = world
                    .events
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| pred.kinds.contains(&e.kind) && pred.agent.as_ref().is_none_or(|a| *a == e.agent))
                    .map(|(i, _)| i)
                    .collect();
                self.tokens_of(events, &path)?
            }
            ModuleKind::Filter => {
                let m = self.lexicon.resolve_filter(arg).ok_or_else(unresolvable)?;
                let events = self
                    .events(&kids[0])
                    .into_iter()
                    .filter(|&i| {
                        let e = &world.events[i];
                        match &m {
                            Modifier::FirstHalf => matches!(e.quarter, Some(1 | 2)),
                            Modifier::SecondHalf => matches!(e.quarter, Some(3 | 4)),
                            Modifier::By(name) => e.agent == *name,
                        }
                    })
                    .collect();
                self.tokens_of(events, &path)?
            }
            ModuleKind::Project => {
                if !self.lexicon.resolve_project(arg) {
                    return Err(unresolvable());
                }
                let events = self.events(&kids[0]);
                let mut tokens: Vec<usize> = events.iter().flat_map(|&e| world.events[e].name_span.indices()).collect();
                tokens.sort_unstable();
                tokens.dedup();
                SymValue::Tokens { events, tokens }
            }
            ModuleKind::Count => SymValue::Count(self.events(&kids[0]).len() as u32),
            ModuleKind::FindNum => {
                let e = self.single(&kids[0], &path)?;
                let (value, token) = self.number_of(e, &path)?;
                SymValue::Number { value, token }
            }
            ModuleKind::FindDate => {
                let e = self.single(&kids[0], &path)?;
                let (year, token) = self.date_of(e, &path)?;
                SymValue::Year { year, token }
            }
            ModuleKind::FindMaxNum | ModuleKind::FindMinNum => {
                let mut best: Option<(i64, usize)> = None;
                for e in self.events(&kids[0]) {
                    if let Some(v) = world.events[e].value {
                        let better = match best {
                            None => true,
                            Some((b, _)) if node.module == ModuleKind::FindMaxNum => v > b,
                            Some((b, _)) => v < b,
                        };
                        if better {
                            best = Some((v, e));
                        }
                    }
                }
                let (_, e) = best.ok_or_else(|| SymbolicError::Empty { path: path.clone() })?;
                self.tokens_of(alloc::vec![e], &path)?
            }
            ModuleKind::NumCompareGt | ModuleKind::NumCompareLt | ModuleKind::DateCompareGt | ModuleKind::DateCompareLt => {
                let a = self.single(&kids[0], &path)?;
                let b = self.single(&kids[1], &path)?;
                let (va, vb) = if matches!(node.module, ModuleKind::NumCompareGt | ModuleKind::NumCompareLt) {
                    (self.number_of(a, &path)?.0, self.number_of(b, &path)?.0)
                } else {
                    let da = world.events[a].date.ok_or_else(|| SymbolicError::Ambiguous { path: path.clone() })?;
                    let db = world.events[b].date.ok_or_else(|| SymbolicError::Ambiguous { path: path.clone() })?;
                    (i64::from(da.year), i64::from(db.year))
                };
                if va == vb {
                    return Err(SymbolicError::Tie { path });
                }
                let gt = matches!(node.module, ModuleKind::NumCompareGt | ModuleKind::DateCompareGt);
                let winner = if (va > vb) == gt { a } else { b };
                self.tokens_of(alloc::vec![winner], &path)?
            }
            ModuleKind::NumAdd | ModuleKind::NumDiff => {
                let (a, b) = match (&kids[0], &kids[1]) {
                    (SymValue::Number { value: a, .. }, SymValue::Number { value: b, .. }) => (*a, *b),
                    _ => return Err(SymbolicError::Ambiguous { path }),
                };
                SymValue::Composed(if node.module == ModuleKind::NumAdd { a + b } else { a - b })
            }
            ModuleKind::TimeDiff => {
                let a = self.single(&kids[0], &path)?;
                let b = self.single(&kids[1], &path)?;
                let (ya, _) = self.date_of(a, &path)?;
                let (yb, _) = self.date_of(b, &path)?;
                SymValue::Composed(i64::from((ya - yb).abs()))
            }
            ModuleKind::Span => kids.pop().expect("span has one child"),
        };
        self.values.insert(path, value.clone());
        Ok(value)
    }
}

fn contiguous(tokens: &[usize]) -> Option<Span> {
    let (&first, &last) = (tokens.first()?, tokens.last()?);
    (last + 1 - first == tokens.len()).then_some(Span(first, last + 1))
}

fn is_compare(m: ModuleKind) -> bool {
    matches!(m, ModuleKind::NumCompareGt | ModuleKind::NumCompareLt | ModuleKind::DateCompareGt | ModuleKind::DateCompareLt)
}

/// Executes `program` over `world.events` with exact discrete semantics.
pub fn symbolic_execute(program: &Program, world: &WorldInstance, lexicon: &Lexicon) -> Result<SymbolicResult, SymbolicError> {
    let mut exec = Exec { world, lexicon, values: BTreeMap::new() };
    let root = exec.run(&program.root, NodePath::root())?;
    let answer = match root {
        SymValue::Count(c) => Some(GoldAnswer::Count(c)),
        SymValue::Number { value, .. } => Some(GoldAnswer::Number(value)),
        SymValue::Composed(v) => Some(GoldAnswer::Number(v)),
        SymValue::Year { year, .. } => Some(GoldAnswer::Year(year)),
        SymValue::Tokens { ref events, .. } if is_compare(program.root.module) && events.len() == 1 => {
            Some(GoldAnswer::Span(world.events[events[0]].name_span))
        }
        SymValue::Tokens { ref tokens, .. } => contiguous(tokens).map(GoldAnswer::Span),
    };
    let mut gold = BTreeMap::new();
    for (path, v) in &exec.values {
        match v {
            SymValue::Tokens { tokens, .. } => {
                gold.insert(path.clone(), tokens.clone());
            }
            SymValue::Number { token, .. } | SymValue::Year { token, .. } => {
                gold.insert(path.clone(), alloc::vec![*token]);
            }
            _ => {}
        }
    }
    Ok(SymbolicResult { answer, gold, values: exec.values })
}
