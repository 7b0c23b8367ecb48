use std::collections::BTreeSet;

use proptest::prelude::*;

use modpair_core::autodiff::check::{gradcheck, RandomGraph};
use modpair_core::autodiff::{kl_divergence, symmetric_kl, Graph, Matrix};
use modpair_core::dsl::{enumerate_subtrees, parse, render, template_signature, typecheck, typecheck_full};
use modpair_core::eval::{answer_metrics, build_comp_split, node_faithfulness, Answer, SplitSpec};
use modpair_core::executor::{ExecOptions, Model, ModelConfig, Support, Vocab, WorldIndex};
use modpair_core::pairing::{arg_similarity, find_natural_pairs, generate_probe_pairs, template_pairs_for_world, FamilySet, Matcher, DEFAULT_THRESHOLD};
use modpair_core::world::{generate_dataset, generate_world, symbolic_execute, GenConfig, Lexicon};
use modpair_core::{ModuleKind, NodePath, Program, ProgramNode, ValueType};

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}",
        "[A-Z][a-z]{1,6}",
        Just("'s".to_string()),
        Just("touchdown".to_string()),
        Just("passes".to_string()),
        Just("field".to_string()),
        Just("goals".to_string()),
    ]
}

fn arg() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 1..5)
}

fn kinds_producing(ty: ValueType) -> Vec<ModuleKind> {
    ModuleKind::ALL.into_iter().filter(|k| k.output_type() == ty).collect()
}

/// Well-typed trees producing `ty`, at most `depth` levels deep.
fn node_of(ty: ValueType, depth: u32) -> BoxedStrategy<ProgramNode> {
    let kinds: Vec<ModuleKind> = kinds_producing(ty).into_iter().filter(|k| depth > 0 || k.arity() == 0).collect();
    prop::sample::select(kinds)
        .prop_flat_map(move |kind| {
            let children: Vec<BoxedStrategy<ProgramNode>> = kind.spec().input_types.iter().map(|&t| node_of(t, depth.saturating_sub(1))).collect();
            let arg = if kind.takes_string_arg() { arg().prop_map(Some).boxed() } else { Just(None).boxed() };
            (Just(kind), arg, children)
        })
        .prop_map(|(module, arg, children)| ProgramNode { module, arg, children })
        .boxed()
}

fn program() -> impl Strategy<Value = Program> {
    prop::sample::select(vec![ValueType::TokenDist, ValueType::CountDist, ValueType::NumberDist, ValueType::DateDist, ValueType::ComposedValueDist])
        .prop_flat_map(|ty| node_of(ty, 4))
        .prop_map(Program::new)
}

fn map_args(node: &mut ProgramNode, f: &mut impl FnMut(&[String]) -> Vec<String>) {
    if let Some(a) = &node.arg {
        node.arg = Some(f(a));
    }
    for c in &mut node.children {
        map_args(c, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn render_parse_round_trip(p in program()) {
        let text = render(&p);
        prop_assert_eq!(parse(&text).unwrap(), p.clone());
    }

    #[test]
    fn subtrees_cover_every_node(p in program()) {
        let subs = enumerate_subtrees(&p);
        prop_assert_eq!(subs.len(), p.node_count());
        for (path, sub) in &subs {
            prop_assert_eq!(&p.get(path).unwrap().clone(), &sub.root);
        }
        let paths: BTreeSet<&NodePath> = subs.iter().map(|(q, _)| q).collect();
        prop_assert_eq!(paths.len(), subs.len());
    }

    #[test]
    fn well_typed_trees_typecheck(p in program()) {
        prop_assert!(typecheck(&p).is_empty());
        let full = typecheck_full(&p);
        prop_assert_eq!(full.is_empty(), p.root.module.is_answer_root());
    }

    #[test]
    fn a_kind_violation_is_reported_at_its_path(p in program(), pick in any::<prop::sample::Index>(), replace in any::<prop::sample::Index>()) {
        let paths: Vec<NodePath> = p.paths().into_iter().filter(|q| !q.is_root()).collect();
        prop_assume!(!paths.is_empty());
        let path = pick.get(&paths).clone();
        let old = p.get(&path).unwrap().module;
        let wrong: Vec<ModuleKind> = ModuleKind::ALL.into_iter().filter(|k| k.output_type() != old.output_type()).collect();
        let kind = *replace.get(&wrong);
        let mut bad = p.clone();
        let node = bad.get_mut(&path).unwrap();
        // Replace the whole subtree by a structurally valid one of the wrong kind.
        *node = ProgramNode {
            module: kind,
            arg: kind.takes_string_arg().then(|| vec!["x".to_string()]),
            children: kind.spec().input_types.iter().map(|_| ProgramNode::leaf(ModuleKind::Find, "y")).collect(),
        };
        let errors = typecheck(&bad);
        prop_assert!(errors.iter().any(|e| e.path == path), "{:?} at {}", errors, path);
    }

    #[test]
    fn signature_ignores_arguments(p in program(), replacement in arg()) {
        let mut q = p.clone();
        map_args(&mut q.root, &mut |_| replacement.clone());
        prop_assert_eq!(template_signature(&p), template_signature(&q));
    }

    #[test]
    fn similarity_is_symmetric(a in arg(), b in arg()) {
        let lex = Lexicon::standard();
        let (x, y) = (arg_similarity(&a, &b, &lex), arg_similarity(&b, &a, &lex));
        prop_assert!((x.score - y.score).abs() < 1e-12);
        prop_assert_eq!(x.entity_match, y.entity_match);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&x.score));
        prop_assert!((arg_similarity(&a, &a, &lex).score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_on_equal_inputs(raw in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..9)) {
        let norm = |xs: Vec<f64>| { let s: f64 = xs.iter().sum(); xs.into_iter().map(|x| x / s).collect::<Vec<_>>() };
        let p = norm(raw.iter().map(|r| r.0).collect());
        let q = norm(raw.iter().map(|r| r.1).collect());
        let mut g = Graph::new();
        let (pv, qv) = (g.constant(Matrix::row(&p)), g.constant(Matrix::row(&q)));
        let kl = kl_divergence(&mut g, pv, qv, 0.0).unwrap();
        let same = kl_divergence(&mut g, pv, pv, 0.0).unwrap();
        let sym_pq = symmetric_kl(&mut g, pv, qv, 1e-8).unwrap();
        let sym_qp = symmetric_kl(&mut g, qv, pv, 1e-8).unwrap();
        prop_assert!(g.value(kl).item() >= -1e-12);
        prop_assert!(g.value(same).item().abs() < 1e-9);
        prop_assert!((g.value(sym_pq).item() - g.value(sym_qp).item()).abs() < 1e-12);
        let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        if l1 > 1e-3 {
            prop_assert!(g.value(kl).item() > 1e-9);
        }
    }

    #[test]
    fn random_graph_gradients_match_finite_differences(seed in 1_000u64..1_000_000) {
        let rg = RandomGraph::new(seed);
        let r = gradcheck(&rg.inputs, 1e-5, 1e-8, |g, v| rg.build(g, v)).unwrap();
        prop_assert!(r.max_rel_error < 1e-4, "seed {}: {:?}", seed, r);
    }

    #[test]
    fn answer_metrics_ignore_order(items in prop::collection::vec((0i64..5, 0i64..5), 1..20), shuffle_seed in any::<u64>()) {
        let preds: Vec<Answer> = items.iter().map(|p| Answer::Value(p.0)).collect();
        let golds: Vec<Answer> = items.iter().map(|p| Answer::Value(p.1)).collect();
        let mut order: Vec<usize> = (0..items.len()).collect();
        let mut s = shuffle_seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let p2: Vec<Answer> = order.iter().map(|&i| preds[i].clone()).collect();
        let g2: Vec<Answer> = order.iter().map(|&i| golds[i].clone()).collect();
        let a = answer_metrics(&preds, &golds).unwrap();
        let b = answer_metrics(&p2, &g2).unwrap();
        prop_assert!((a.em - b.em).abs() < 1e-12 && (a.f1 - b.f1).abs() < 1e-12);
    }

    #[test]
    fn faithfulness_falls_as_mass_moves_to_gold(raw in prop::collection::vec(0.01f64..1.0, 2..10), gold_mask in prop::collection::vec(any::<bool>(), 10), step in 0.01f64..0.9) {
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let gold: Vec<usize> = (0..p.len()).filter(|&i| gold_mask[i]).collect();
        let outside: Vec<usize> = (0..p.len()).filter(|i| !gold.contains(i)).collect();
        prop_assume!(!gold.is_empty() && !outside.is_empty());
        let before = node_faithfulness(&p, &gold);
        let mut moved = p.clone();
        let from = outside[0];
        let amount = moved[from] * step;
        moved[from] -= amount;
        moved[gold[0]] += amount;
        prop_assert!(node_faithfulness(&moved, &gold) < before);
        let mut all_gold = vec![0.0; p.len()];
        for &i in &gold { all_gold[i] = 1.0 / gold.len() as f64; }
        prop_assert!(node_faithfulness(&all_gold, &gold) < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_questions_are_consistent(seed in any::<u64>()) {
        let cfg = GenConfig::default();
        let w = generate_world(seed, &cfg).unwrap();
        prop_assert_eq!(&w, &generate_world(seed, &cfg).unwrap());
        let lex = Lexicon::standard();
        for q in &w.questions {
            prop_assert!(typecheck_full(&q.program).is_empty());
            let sym = symbolic_execute(&q.program, &w, &lex).unwrap();
            prop_assert_eq!(sym.answer, q.answer, "{}", q.question_text());
            for (path, gold) in &q.gold_module_outputs {
                if q.program.get(path).unwrap().module.output_type() == ValueType::TokenDist {
                    prop_assert!(!gold.is_empty());
                }
                prop_assert!(gold.iter().all(|&i| i < w.passage_tokens.len()));
            }
        }
    }

    #[test]
    fn every_denotation_is_a_distribution(seed in any::<u64>(), scale in 0.1f64..3.0, tau in 0.01f64..2.0) {
        let w = generate_world(seed, &GenConfig::default()).unwrap();
        let model = Model::new(ModelConfig { dim: 8, init_scale: scale, ..ModelConfig::default() }, Vocab::from_worlds(std::slice::from_ref(&w)), seed).unwrap();
        let index = WorldIndex::new(&w);
        for q in &w.questions {
            let mut g = Graph::new();
            let trace = model.execute(&mut g, q, &w, &index, &ExecOptions { tau }).unwrap();
            for (path, d) in &trace.nodes {
                let p = g.value(d.var).data();
                prop_assert_eq!(p.len(), d.support.len());
                prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0), "{} at {}", q.id, path);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{} at {}", q.id, path);
                if let Support::Tokens(n) = d.support { prop_assert_eq!(n, w.passage_tokens.len()); }
            }
        }
    }

    #[test]
    fn linked_subtrees_share_signature_and_kind(seed in any::<u64>()) {
        let d = generate_dataset(seed, &GenConfig::default(), 3).unwrap();
        let matcher = Matcher::from_worlds(&d.worlds, DEFAULT_THRESHOLD);
        let lex = Lexicon::standard();
        for w in &d.worlds {
            let templated = template_pairs_for_world(w, &lex, &FamilySet::all());
            let probes = generate_probe_pairs(w, seed, 10, &matcher);
            let mut world = w.clone();
            world.questions.extend(templated.examples.iter().chain(&probes.examples).cloned());
            let links = find_natural_pairs(w, &matcher).into_iter().chain(templated.links).chain(probes.links);
            for link in links {
                let a = world.question(&link.example_a).unwrap().program.get(&link.path_a).unwrap().clone();
                let b = world.question(&link.example_b).unwrap().program.get(&link.path_b).unwrap().clone();
                prop_assert_eq!(template_signature(&Program::new(a.clone())), template_signature(&Program::new(b.clone())));
                prop_assert_eq!(a.module.output_type(), b.module.output_type());
            }
            for probe in templated.examples.iter().chain(&probes.examples) {
                prop_assert!(!probe.is_labeled() || probe.augmented);
            }
        }
    }

    #[test]
    fn comp_splits_partition_questions(seed in any::<u64>()) {
        let d = generate_dataset(seed, &GenConfig::default(), 12).unwrap();
        for spec in SplitSpec::ALL {
            let s = build_comp_split(&d, spec, seed, 0.2).unwrap();
            let all: Vec<&String> = s.train.iter().chain(&s.dev).chain(&s.held_out).collect();
            let uniq: BTreeSet<&&String> = all.iter().collect();
            prop_assert_eq!(all.len(), uniq.len());
            let questions: Vec<_> = d.worlds.iter().flat_map(|w| &w.questions).collect();
            prop_assert_eq!(all.len(), questions.len());
            for q in questions {
                prop_assert_eq!(s.held_out.contains(&q.id), spec.holds_out(&q.program));
            }
        }
    }
}
