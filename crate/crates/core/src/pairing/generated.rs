use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{find_leaves, Matcher, PairLink, PairSource, WorldPairs};
use crate::dsl::{ModuleKind, NodePath, Program, ProgramNode};
use crate::rng;
use crate::world::{symbolic_execute, tokenize, Domain, Event, EventKind, Lexicon, QAExample, Span, WorldInstance};

/// Question text around the `find` argument, and the wrapping module.
fn probe_frame(event: &Event, lexicon: &Lexicon) -> Option<(Vec<String>, &'static str, &'static str, ModuleKind)> {
    match event.kind.domain() {
        Domain::Game => {
            let mut arg = tokenize(&event.agent);
            arg.push(String::from("'s"));
            arg.extend(lexicon.kind_phrase(&[event.kind], false, false)?);
            Some((arg, "How many yards was", "?", ModuleKind::FindNum))
        }
        Domain::History => {
            let title = match event.kind {
                EventKind::Battle => "Battle",
                EventKind::Treaty => "Treaty",
                _ => "Siege",
            };
            let arg = tokenize(&format!("{title} of {}", event.agent));
            let (prefix, suffix) = match event.kind {
                EventKind::Battle => ("When was the", "fought ?"),
                EventKind::Treaty => ("When was the", "signed ?"),
                _ => ("When did the", "begin ?"),
            };
            Some((arg, prefix, suffix, ModuleKind::FindDate))
        }
    }
}

/// Rule-based probes about up to `k` sampled numbers and dates of the
/// passage. Each probe asks about the event owning the sampled token and is
/// kept only if its `find` argument is equivalent to some question's `find`
/// argument, to which it is then linked.
pub fn generate_probe_pairs(world: &WorldInstance, seed: u64, k: usize, matcher: &Matcher) -> WorldPairs {
    let lexicon = &matcher.lexicon;
    let mut positions: Vec<usize> = world.numbers.iter().map(|(t, _)| *t).chain(world.dates.iter().map(|(t, _)| *t)).collect();
    positions.shuffle(&mut rng::rng(rng::mix(rng::stream(seed, "probes"), rng::fnv1a(world.id.as_bytes()))));
    positions.truncate(k);
    positions.sort_unstable();

    let mut questions: Vec<&QAExample> = world.questions.iter().filter(|q| !q.is_probe && !q.augmented).collect();
    questions.sort_by(|a, b| a.id.cmp(&b.id));
    let leaves: Vec<_> = questions.iter().map(|q| find_leaves(q)).collect();

    let mut out = WorldPairs::default();
    let mut seen = BTreeSet::new();
    for pos in positions {
        let Some(event) = world.events.iter().find(|e| e.token_span.contains(pos)) else { continue };
        let Some((arg, prefix, suffix, wrap)) = probe_frame(event, lexicon) else { continue };
        let mut tokens = tokenize(prefix);
        let start = tokens.len();
        tokens.extend(arg.iter().cloned());
        let end = tokens.len();
        tokens.extend(tokenize(suffix));
        if !seen.insert(tokens.clone()) {
            continue;
        }
        let id = format!("{}-g{:02}", world.id, out.examples.len());
        let probe_find = NodePath::root().child(0);
        let mut links = Vec::new();
        for (q, qs) in questions.iter().zip(&leaves) {
            for (path, other) in qs {
                if matcher.similarity(other, &arg).equivalent {
                    links.push(PairLink::new(&q.id, path.clone(), &id, probe_find.clone(), PairSource::Generated));
                }
            }
        }
        if links.is_empty() {
            continue;
        }
        let program = Program::new(ProgramNode::unary(wrap, ProgramNode { module: ModuleKind::Find, arg: Some(arg), children: Vec::new() }));
        let gold = symbolic_execute(&program, world, lexicon).map(|r| r.gold).unwrap_or_default();
        let mut arg_spans = BTreeMap::new();
        arg_spans.insert(probe_find, Span(start, end));
        out.examples.push(QAExample {
            id,
            question_tokens: tokens,
            program,
            arg_spans,
            answer: None,
            gold_module_outputs: gold,
            is_probe: true,
            augmented: false,
        });
        out.links.extend(links);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{detokenize, generate_world, GenConfig};

    #[test]
    fn zero_budget_or_no_quantities() {
        let m = Matcher::uniform(crate::pairing::DEFAULT_THRESHOLD);
        let w = generate_world(2, &GenConfig::default()).unwrap();
        assert_eq!(generate_probe_pairs(&w, 1, 0, &m), WorldPairs::default());
        let mut bare = w.clone();
        bare.numbers.clear();
        bare.dates.clear();
        assert_eq!(generate_probe_pairs(&bare, 1, 10, &m), WorldPairs::default());
    }

    #[test]
    fn probes_link_to_matching_questions() {
        let m = Matcher::uniform(crate::pairing::DEFAULT_THRESHOLD);
        let mut n_links = 0;
        for seed in 0..30 {
            let w = generate_world(seed, &GenConfig::default()).unwrap();
            let pairs = generate_probe_pairs(&w, 7, 10, &m);
            for p in &pairs.examples {
                assert!(p.is_probe && p.answer.is_none());
                let text = detokenize(&p.question_tokens);
                assert!(text.starts_with("How many yards was") || text.starts_with("When"), "{text}");
                let s = p.arg_spans[&NodePath(alloc::vec![0])];
                assert_eq!(&p.question_tokens[s.indices()], &p.program.root.children[0].arg.clone().unwrap()[..]);
            }
            for l in &pairs.links {
                assert!(pairs.examples.iter().any(|p| p.id == l.example_b));
                assert!(w.question(&l.example_a).is_some());
            }
            n_links += pairs.links.len();
        }
        assert!(n_links > 0);
    }

    #[test]
    fn sampled_event_phrasing() {
        let lx = Lexicon::standard();
        let w = (0..).map(|s| generate_world(s, &GenConfig::default()).unwrap()).find(|w| w.domain == Domain::Game).unwrap();
        let e = w.events.iter().find(|e| e.kind == EventKind::FieldGoal).or(w.events.first()).unwrap();
        if let Some((arg, prefix, _, wrap)) = probe_frame(e, &lx) {
            assert_eq!(prefix, "How many yards was");
            assert_eq!(wrap, ModuleKind::FindNum);
            assert!(arg.contains(&String::from("'s")));
        }
    }
}
