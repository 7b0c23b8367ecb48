use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{ConfigError, GenConfig};
use super::lexicon::{Lexicon, MONTHS, ORDINALS, PLACES, PLAYERS};
use super::symbolic::symbolic_execute;
use super::{Date, Domain, Event, EventKind, GoldAnswer, QAExample, Span, WorldInstance};
use crate::dsl::{ModuleKind, NodePath, Program, ProgramNode};
use crate::rng;

/// Largest count a question may have as its answer.
pub const MAX_COUNT: u32 = 9;

/// Generates one passage with its questions; a pure function of `(seed, config)`.
pub fn generate_world(seed: u64, config: &GenConfig) -> Result<WorldInstance, ConfigError> {
    config.validate()?;
    Ok(build_world(seed, config, &format!("w{seed:016x}")))
}

pub(crate) fn build_world(seed: u64, config: &GenConfig, id: &str) -> WorldInstance {
    let mut rng = rng::rng(seed);
    let game = config.kinds_in(Domain::History).is_empty()
        || (!config.kinds_in(Domain::Game).is_empty() && rng.random::<f64>() < config.game_fraction);
    let mut world = if game { game_passage(&mut rng, config, id) } else { history_passage(&mut rng, config, id) };
    add_questions(&mut rng, config, &mut world);
    world
}

fn push_words(tokens: &mut Vec<String>, text: &str) {
    tokens.extend(text.split_whitespace().map(String::from));
}

fn game_passage(rng: &mut ChaCha8Rng, config: &GenConfig, id: &str) -> WorldInstance {
    let kinds = config.kinds_in(Domain::Game);
    let n = rng.random_range(config.min_events..=config.max_events);
    let span = (config.value_max - config.value_min + 1) as usize;
    let mut values: Vec<i64> =
        rand::seq::index::sample(rng, span, n).into_iter().map(|v| config.value_min + v as i64).collect();
    values.shuffle(rng);
    let mut quarters: Vec<u8> = (0..n).map(|_| rng.random_range(1..=4u8)).collect();
    quarters.sort_unstable();
    let pool_size = rng.random_range(3..=6usize);
    let pool: Vec<&str> = PLAYERS.choose_multiple(rng, pool_size).copied().collect();

    let mut tokens = Vec::new();
    let mut numbers = Vec::new();
    let mut events = Vec::new();
    for i in 0..n {
        let base = *kinds.choose(rng).expect("validated: game kinds exist");
        let kind = if rng.random::<f64>() < config.distractor_rate { base.distractor().unwrap_or(base) } else { base };
        let agent = pool.choose(rng).expect("pool is non-empty").to_string();
        let verb_phrase = match kind {
            EventKind::FieldGoal => "kicked a {v} yard field goal",
            EventKind::TouchdownPass => "threw a {v} yard touchdown pass",
            EventKind::TouchdownRun => "ran a {v} yard touchdown run",
            EventKind::MissedFieldGoal => "missed a {v} yard field goal",
            EventKind::DroppedPass => "dropped a {v} yard touchdown pass",
            EventKind::FumbledRun => "fumbled a {v} yard touchdown run",
            _ => unreachable!("game kinds only"),
        };
        let start = tokens.len();
        tokens.push(agent.clone());
        for w in verb_phrase.split_whitespace() {
            if w == "{v}" {
                numbers.push((tokens.len(), values[i]));
                tokens.push(values[i].to_string());
            } else {
                tokens.push(w.to_string());
            }
        }
        push_words(&mut tokens, "in the");
        tokens.push(ORDINALS[usize::from(quarters[i]) - 1].to_string());
        tokens.push("quarter".to_string());
        let end = tokens.len();
        tokens.push(".".to_string());
        events.push(Event {
            kind,
            agent,
            value: Some(values[i]),
            date: None,
            token_span: Span(start, end),
            quarter: Some(quarters[i]),
            name_span: Span(start, start + 1),
        });
    }
    WorldInstance {
        id: id.to_string(),
        domain: Domain::Game,
        passage_tokens: tokens,
        numbers,
        dates: Vec::new(),
        events,
        questions: Vec::new(),
    }
}

fn history_passage(rng: &mut ChaCha8Rng, config: &GenConfig, id: &str) -> WorldInstance {
    let kinds = config.kinds_in(Domain::History);
    let n = rng.random_range(config.min_events..=config.max_events);
    let places: Vec<&str> = PLACES.choose_multiple(rng, n).copied().collect();
    let span = (config.year_max - config.year_min + 1) as usize;
    let years: Vec<i32> =
        rand::seq::index::sample(rng, span, n).into_iter().map(|v| config.year_min + v as i32).collect();

    let mut tokens = Vec::new();
    let mut dates = Vec::new();
    let mut events = Vec::new();
    for i in 0..n {
        let kind = *kinds.choose(rng).expect("validated: history kinds exist");
        let (title, verb) = match kind {
            EventKind::Battle => ("Battle", "was fought in"),
            EventKind::Treaty => ("Treaty", "was signed in"),
            EventKind::Siege => ("Siege", "began in"),
            _ => unreachable!("history kinds only"),
        };
        let month = (rng.random::<f64>() < config.month_rate).then(|| rng.random_range(1..=12u8));
        let start = tokens.len();
        tokens.push("The".to_string());
        tokens.push(title.to_string());
        tokens.push("of".to_string());
        push_words(&mut tokens, places[i]);
        let name_end = tokens.len();
        push_words(&mut tokens, verb);
        if let Some(m) = month {
            tokens.push(MONTHS[usize::from(m) - 1].to_string());
        }
        let date = Date { year: years[i], month };
        dates.push((tokens.len(), date));
        tokens.push(years[i].to_string());
        let end = tokens.len();
        tokens.push(".".to_string());
        events.push(Event {
            kind,
            agent: places[i].to_string(),
            value: None,
            date: Some(date),
            token_span: Span(start, end),
            quarter: None,
            name_span: Span(start + 1, name_end),
        });
    }
    WorldInstance {
        id: id.to_string(),
        domain: Domain::History,
        passage_tokens: tokens,
        numbers: Vec::new(),
        dates,
        events,
        questions: Vec::new(),
    }
}

/// Question families the generator samples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Count,
    CountFilter,
    MaxNum,
    MaxNumFilter,
    ProjectMax,
    ProjectMaxFilter,
    NumSingle,
    NumCompare,
    ArithSimple,
    ArithComplex,
    DateCount,
    DateSingle,
    DateCompare,
    TimeDiff,
}

fn families(config: &GenConfig, domain: Domain) -> Vec<(Family, f64)> {
    let m = &config.mix;
    let all = match domain {
        Domain::Game => alloc::vec![
            (Family::Count, m.count),
            (Family::CountFilter, m.count_filter),
            (Family::MaxNum, m.max_num),
            (Family::MaxNumFilter, m.max_num_filter),
            (Family::ProjectMax, m.project_max),
            (Family::ProjectMaxFilter, m.project_max_filter),
            (Family::NumSingle, m.num_single),
            (Family::NumCompare, m.num_compare),
            (Family::ArithSimple, m.arith_simple),
            (Family::ArithComplex, m.arith_complex),
        ],
        Domain::History => alloc::vec![
            (Family::DateCount, m.date_count),
            (Family::DateSingle, m.date_single),
            (Family::DateCompare, m.date_compare),
            (Family::TimeDiff, m.time_diff),
        ],
    };
    all.into_iter().filter(|(_, w)| *w > 0.0).collect()
}

/// Accumulates question tokens and the slices of string arguments.
#[derive(Default)]
struct Builder {
    tokens: Vec<String>,
    spans: BTreeMap<NodePath, Span>,
}

impl Builder {
    fn words(&mut self, text: &str) -> &mut Self {
        push_words(&mut self.tokens, text);
        self
    }

    fn arg(&mut self, path: NodePath, toks: &[String]) -> &mut Self {
        let start = self.tokens.len();
        self.tokens.extend(toks.iter().cloned());
        self.spans.insert(path, Span(start, self.tokens.len()));
        self
    }
}

fn p(indices: &[usize]) -> NodePath {
    NodePath(indices.to_vec())
}

fn w(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn node_arg(module: ModuleKind, arg: &[String], children: Vec<ProgramNode>) -> ProgramNode {
    ProgramNode { module, arg: Some(arg.to_vec()), children }
}

fn node(module: ModuleKind, children: Vec<ProgramNode>) -> ProgramNode {
    ProgramNode { module, arg: None, children }
}

struct Ctx<'a> {
    world: &'a WorldInstance,
    config: &'a GenConfig,
    lexicon: Lexicon,
}

impl Ctx<'_> {
    fn matching(&self, kinds: &[EventKind], agent: Option<&str>) -> Vec<usize> {
        self.world
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| kinds.contains(&e.kind) && agent.is_none_or(|a| a == e.agent))
            .map(|(i, _)| i)
            .collect()
    }

    /// Kind groups with at least `min` matching events.
    fn groups(&self, min: usize) -> Vec<Vec<EventKind>> {
        let mut out = Vec::new();
        for g in [
            alloc::vec![EventKind::FieldGoal],
            alloc::vec![EventKind::TouchdownPass],
            alloc::vec![EventKind::TouchdownRun],
            alloc::vec![EventKind::TouchdownPass, EventKind::TouchdownRun],
        ] {
            if self.matching(&g, None).len() >= min {
                out.push(g);
            }
        }
        out
    }

    fn phrase(&self, rng: &mut ChaCha8Rng, kinds: &[EventKind], plural: bool) -> Vec<String> {
        let syn = rng.random::<f64>() < self.config.synonym_rate;
        self.lexicon.kind_phrase(kinds, plural, syn).expect("every group has a phrase")
    }

    /// A filter modifier leaving at least `min` of `events`.
    fn modifier(&self, rng: &mut ChaCha8Rng, events: &[usize], min: usize) -> Option<Vec<String>> {
        let mut options: Vec<Vec<String>> = Vec::new();
        let first = events.iter().filter(|&&e| matches!(self.world.events[e].quarter, Some(1 | 2))).count();
        let second = events.len() - first;
        if first >= min && first < events.len() {
            options.push(w("in the first half"));
        }
        if second >= min && second < events.len() {
            options.push(w("in the second half"));
        }
        let mut agents: Vec<&str> = events.iter().map(|&e| self.world.events[e].agent.as_str()).collect();
        agents.sort_unstable();
        agents.dedup();
        for a in agents {
            let c = events.iter().filter(|&&e| self.world.events[e].agent == a).count();
            if c >= min && c < events.len() {
                options.push(alloc::vec!["by".to_string(), a.to_string()]);
            }
        }
        options.choose(rng).cloned()
    }

    /// `<Player> 's <kind>` naming exactly one scoring event.
    fn unique_event_ref(&self, rng: &mut ChaCha8Rng, exclude: Option<usize>) -> Option<(usize, Vec<String>)> {
        let mut cands = Vec::new();
        for (i, e) in self.world.events.iter().enumerate() {
            if e.kind.is_distractor() || Some(i) == exclude {
                continue;
            }
            let g = alloc::vec![e.kind];
            if self.matching(&g, Some(&e.agent)).len() == 1 {
                cands.push(i);
            }
        }
        let i = *cands.choose(rng)?;
        let e = &self.world.events[i];
        let mut toks = alloc::vec![e.agent.clone(), "'s".to_string()];
        toks.extend(self.phrase(rng, &[e.kind], false));
        Some((i, toks))
    }

    fn title(&self, e: usize) -> Vec<String> {
        let ev = &self.world.events[e];
        self.world.passage_tokens[ev.name_span.indices()].to_vec()
    }

    fn superlative(&self, rng: &mut ChaCha8Rng) -> (ModuleKind, &'static str) {
        if rng.random::<f64>() < self.config.min_rate {
            (ModuleKind::FindMinNum, "shortest")
        } else {
            (ModuleKind::FindMaxNum, "longest")
        }
    }

    fn build(&self, rng: &mut ChaCha8Rng, family: Family) -> Option<(Builder, ProgramNode)> {
        let mut b = Builder::default();
        let prog = match family {
            Family::Count => {
                let g = self.groups(1).choose(rng)?.clone();
                let k = self.phrase(rng, &g, true);
                let tail = *["were there ?", "were scored in the game ?", "did the teams score ?"].choose(rng)?;
                b.words("How many").arg(p(&[0]), &k).words(tail);
                node(ModuleKind::Count, alloc::vec![node_arg(ModuleKind::Find, &k, alloc::vec![])])
            }
            Family::CountFilter => {
                let g = self.groups(2).choose(rng)?.clone();
                let m = self.modifier(rng, &self.matching(&g, None), 1)?;
                let k = self.phrase(rng, &g, true);
                b.words("How many").arg(p(&[0, 0]), &k).words("were scored").arg(p(&[0]), &m).words("?");
                let find = node_arg(ModuleKind::Find, &k, alloc::vec![]);
                node(ModuleKind::Count, alloc::vec![node_arg(ModuleKind::Filter, &m, alloc::vec![find])])
            }
            Family::MaxNum | Family::MaxNumFilter => {
                let filtered = family == Family::MaxNumFilter;
                let g = self.groups(if filtered { 3 } else { 2 }).choose(rng)?.clone();
                let (sup, word) = self.superlative(rng);
                let k = self.phrase(rng, &g, false);
                let find = node_arg(ModuleKind::Find, &k, alloc::vec![]);
                if filtered {
                    let m = self.modifier(rng, &self.matching(&g, None), 2)?;
                    b.words("How many yards was the").words(word).arg(p(&[0, 0, 0]), &k).arg(p(&[0, 0]), &m).words("?");
                    let filter = node_arg(ModuleKind::Filter, &m, alloc::vec![find]);
                    node(ModuleKind::FindNum, alloc::vec![node(sup, alloc::vec![filter])])
                } else {
                    b.words("How many yards was the").words(word).arg(p(&[0, 0]), &k).words("?");
                    node(ModuleKind::FindNum, alloc::vec![node(sup, alloc::vec![find])])
                }
            }
            Family::ProjectMax | Family::ProjectMaxFilter => {
                let filtered = family == Family::ProjectMaxFilter;
                let g = self.groups(if filtered { 3 } else { 2 }).choose(rng)?.clone();
                let (sup, word) = self.superlative(rng);
                let k = self.phrase(rng, &g, false);
                let who = w(self.lexicon.project_arg(&g));
                let find = node_arg(ModuleKind::Find, &k, alloc::vec![]);
                b.arg(p(&[]), &who).words("the").words(word);
                let inner = if filtered {
                    let m = self.modifier(rng, &self.matching(&g, None), 2)?;
                    b.arg(p(&[0, 0, 0]), &k).arg(p(&[0, 0]), &m);
                    node_arg(ModuleKind::Filter, &m, alloc::vec![find])
                } else {
                    b.arg(p(&[0, 0]), &k);
                    find
                };
                b.words("?");
                node_arg(ModuleKind::Project, &who, alloc::vec![node(sup, alloc::vec![inner])])
            }
            Family::NumSingle => {
                let (_, r) = self.unique_event_ref(rng, None)?;
                b.words("How long was").arg(p(&[0]), &r).words("?");
                node(ModuleKind::FindNum, alloc::vec![node_arg(ModuleKind::Find, &r, alloc::vec![])])
            }
            Family::NumCompare => {
                let (e1, r1) = self.unique_event_ref(rng, None)?;
                let (_, r2) = self.unique_event_ref(rng, Some(e1))?;
                let gt = rng.random::<bool>();
                b.words("Which was").words(if gt { "longer ," } else { "shorter ," });
                b.arg(p(&[0]), &r1).words("or").arg(p(&[1]), &r2).words("?");
                let m = if gt { ModuleKind::NumCompareGt } else { ModuleKind::NumCompareLt };
                node(
                    m,
                    alloc::vec![
                        node_arg(ModuleKind::Find, &r1, alloc::vec![]),
                        node_arg(ModuleKind::Find, &r2, alloc::vec![])
                    ],
                )
            }
            Family::ArithSimple => {
                let (e1, r1) = self.unique_event_ref(rng, None)?;
                let (_, r2) = self.unique_event_ref(rng, Some(e1))?;
                let add = rng.random::<bool>();
                if add {
                    b.words("How many yards did").arg(p(&[0, 0]), &r1).words("and").arg(p(&[1, 0]), &r2);
                    b.words("cover in total ?");
                } else {
                    b.words("How many more yards was").arg(p(&[0, 0]), &r1).words("than").arg(p(&[1, 0]), &r2);
                    b.words("?");
                }
                let side = |r: &[String]| node(ModuleKind::FindNum, alloc::vec![node_arg(ModuleKind::Find, r, alloc::vec![])]);
                node(if add { ModuleKind::NumAdd } else { ModuleKind::NumDiff }, alloc::vec![side(&r1), side(&r2)])
            }
            Family::ArithComplex => {
                let side = |sup: ModuleKind, k: &[String]| {
                    node(ModuleKind::FindNum, alloc::vec![node(sup, alloc::vec![node_arg(ModuleKind::Find, k, alloc::vec![])])])
                };
                if rng.random::<bool>() {
                    let g = self.groups(2).choose(rng)?.clone();
                    let k1 = self.phrase(rng, &g, false);
                    let k2 = self.phrase(rng, &g, false);
                    b.words("How many yards longer was the longest").arg(p(&[0, 0, 0]), &k1);
                    b.words("than the shortest").arg(p(&[1, 0, 0]), &k2).words("?");
                    node(ModuleKind::NumDiff, alloc::vec![side(ModuleKind::FindMaxNum, &k1), side(ModuleKind::FindMinNum, &k2)])
                } else {
                    let groups = self.groups(1);
                    let disjoint: Vec<(usize, usize)> = (0..groups.len())
                        .flat_map(|i| (0..groups.len()).map(move |j| (i, j)))
                        .filter(|&(i, j)| i != j && groups[i].iter().all(|k| !groups[j].contains(k)))
                        .collect();
                    let &(i, j) = disjoint.choose(rng)?;
                    let k1 = self.phrase(rng, &groups[i], false);
                    let k2 = self.phrase(rng, &groups[j], false);
                    b.words("How many total yards were the longest").arg(p(&[0, 0, 0]), &k1);
                    b.words("and the longest").arg(p(&[1, 0, 0]), &k2).words("?");
                    node(ModuleKind::NumAdd, alloc::vec![side(ModuleKind::FindMaxNum, &k1), side(ModuleKind::FindMaxNum, &k2)])
                }
            }
            Family::DateCount => {
                let kinds: Vec<EventKind> = [EventKind::Battle, EventKind::Treaty, EventKind::Siege]
                    .into_iter()
                    .filter(|k| !self.matching(&[*k], None).is_empty())
                    .collect();
                let kind = *kinds.choose(rng)?;
                let k = self.lexicon.kind_phrase(&[kind], true, false)?;
                let tail = match kind {
                    EventKind::Battle => "were fought ?",
                    EventKind::Treaty => "were signed ?",
                    _ => "took place ?",
                };
                b.words("How many").arg(p(&[0]), &k).words(tail);
                node(ModuleKind::Count, alloc::vec![node_arg(ModuleKind::Find, &k, alloc::vec![])])
            }
            Family::DateSingle => {
                let e = rng.random_range(0..self.world.events.len());
                let t = self.title(e);
                b.words("In which year did the").arg(p(&[0]), &t).words("take place ?");
                node(ModuleKind::FindDate, alloc::vec![node_arg(ModuleKind::Find, &t, alloc::vec![])])
            }
            Family::DateCompare | Family::TimeDiff => {
                let picks: Vec<usize> = rand::seq::index::sample(rng, self.world.events.len(), 2).into_vec();
                let (mut e1, mut e2) = (picks[0], picks[1]);
                let year = |e: usize| self.world.events[e].date.map(|d| d.year);
                if family == Family::TimeDiff && year(e1) > year(e2) {
                    core::mem::swap(&mut e1, &mut e2);
                }
                let (t1, t2) = (self.title(e1), self.title(e2));
                let finds =
                    alloc::vec![node_arg(ModuleKind::Find, &t1, alloc::vec![]), node_arg(ModuleKind::Find, &t2, alloc::vec![])];
                if family == Family::TimeDiff {
                    b.words("How many years after the").arg(p(&[0]), &t1).words("was the").arg(p(&[1]), &t2).words("?");
                    node(ModuleKind::TimeDiff, finds)
                } else {
                    let gt = rng.random::<bool>();
                    b.words("Which happened").words(if gt { "later , the" } else { "first , the" });
                    b.arg(p(&[0]), &t1).words("or the").arg(p(&[1]), &t2).words("?");
                    node(if gt { ModuleKind::DateCompareGt } else { ModuleKind::DateCompareLt }, finds)
                }
            }
        };
        Some((b, prog))
    }
}

fn add_questions(rng: &mut ChaCha8Rng, config: &GenConfig, world: &mut WorldInstance) {
    let fams = families(config, world.domain);
    if fams.is_empty() {
        return;
    }
    let dist = WeightedIndex::new(fams.iter().map(|(_, w)| *w)).expect("validated weights");
    let ctx = Ctx { world, config, lexicon: Lexicon::standard() };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < config.questions_per_passage && attempts < config.questions_per_passage * 8 {
        attempts += 1;
        let family = fams[dist.sample(rng)].0;
        let Some((b, root)) = ctx.build(rng, family) else { continue };
        let program = Program::new(root);
        let Ok(sym) = symbolic_execute(&program, ctx.world, &ctx.lexicon) else { continue };
        let Some(answer) = sym.answer else { continue };
        if matches!(answer, GoldAnswer::Count(c) if c > MAX_COUNT) {
            continue;
        }
        if !seen.insert(b.tokens.clone()) {
            continue;
        }
        out.push(QAExample {
            id: format!("{}-q{:02}", ctx.world.id, out.len()),
            question_tokens: b.tokens,
            program,
            arg_spans: b.spans,
            answer: Some(answer),
            gold_module_outputs: sym.gold,
            is_probe: false,
            augmented: false,
        });
    }
    world.questions = out;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::typecheck_full;

    #[test]
    fn deterministic() {
        let c = GenConfig::default();
        assert_eq!(generate_world(3, &c).unwrap(), generate_world(3, &c).unwrap());
        assert_ne!(generate_world(3, &c).unwrap(), generate_world(4, &c).unwrap());
    }

    #[test]
    fn questions_are_well_formed() {
        let c = GenConfig::default();
        for seed in 0..60 {
            let w = generate_world(seed, &c).unwrap();
            assert!(!w.questions.is_empty(), "seed {seed}");
            for q in &w.questions {
                assert!(typecheck_full(&q.program).is_empty(), "{}", q.program);
                for path in q.program.paths() {
                    let n = q.program.get(&path).unwrap();
                    if let Some(arg) = &n.arg {
                        let s = q.arg_spans[&path];
                        assert_eq!(&q.question_tokens[s.indices()], &arg[..], "{}", q.question_text());
                    }
                    if n.module.output_type() == crate::dsl::ValueType::TokenDist {
                        let gold = &q.gold_module_outputs[&path];
                        assert!(!gold.is_empty());
                        assert!(gold.iter().all(|&t| t < w.passage_tokens.len()));
                    }
                }
            }
        }
    }

    #[test]
    fn world_indexes_point_into_events() {
        for seed in 0..30 {
            let w = generate_world(seed, &GenConfig::default()).unwrap();
            for (t, _) in &w.numbers {
                assert!(w.events.iter().any(|e| e.token_span.contains(*t)));
            }
            for (t, _) in &w.dates {
                assert!(w.events.iter().any(|e| e.token_span.contains(*t)));
            }
            assert!(w.numbers.windows(2).all(|p| p[0].0 < p[1].0));
            assert!(w.dates.windows(2).all(|p| p[0].0 < p[1].0));
        }
    }
}

