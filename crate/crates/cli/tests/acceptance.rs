//! Acceptance run: one PASS/FAIL line per criterion with the measured values
//! and the bound they are held to. Pass criterion numbers as arguments to run
//! a subset, e.g. `cargo test --test acceptance -- 1 3`. Set
//! `MODPAIR_ACCEPTANCE_STRICT=1` to exit non-zero when a criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use modpair_core::autodiff::check::{gradcheck, RandomGraph, RANDOM_OPS};
use modpair_core::autodiff::{Graph, Matrix};
use modpair_core::dsl::parse;
use modpair_core::eval::{build_comp_split, evaluate, EvalReport, MeanStd, SplitSpec};
use modpair_core::executor::{Denotation, Model, ModelConfig, Support, Trace, Vocab};
use modpair_core::pairing::{
    construct_template_pairs, find_natural_pairs, generate_probe_pairs, template_family, template_pairs_for_world, FamilySet, Matcher, PairLink,
    DEFAULT_THRESHOLD,
};
use modpair_core::training::{paired_loss, snapshot, train, TrainConfig, TrainSet};
use modpair_core::world::{
    detokenize, generate_dataset, generate_world, symbolic_execute, tokenize, Dataset, Domain, GenConfig, Lexicon, QAExample, Span, WorldInstance,
};
use modpair_core::{ModuleKind, NodePath, ValueType};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

const SEEDS: [u64; 3] = [0, 1, 2];

// ---- 1: gradients ----

fn autodiff_gradients() -> Verdict {
    let t = Instant::now();
    let mut worst = (0.0f64, 0u64);
    let mut ops = BTreeSet::new();
    for seed in 0..200 {
        let rg = RandomGraph::new(seed);
        ops.extend(rg.ops());
        let r = gradcheck(&rg.inputs, 1e-5, 1e-8, |g, v| rg.build(g, v)).expect("random graph evaluates");
        if r.max_rel_error > worst.0 {
            worst = (r.max_rel_error, seed);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let missing: Vec<_> = RANDOM_OPS.iter().filter(|o| !ops.contains(o)).collect();
    verdict(
        worst.0 < 1e-4 && secs < 30.0 && missing.is_empty(),
        format!("200 graphs, max rel error {:.2e} (seed {}) < 1e-4, {secs:.1}s < 30s, primitives missing: {missing:?}", worst.0, worst.1),
    )
}

// ---- 2: paired loss ----

fn trace_of(g: &mut Graph, p: &[f64]) -> Trace {
    let var = g.constant(Matrix::row(p));
    let d = Denotation { kind: ValueType::TokenDist, var, support: Support::Tokens(p.len()) };
    Trace { nodes: [(NodePath::root(), d)].into_iter().collect() }
}

fn paired(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let mut g = Graph::new();
    let (a, b) = (trace_of(&mut g, p), trace_of(&mut g, q));
    let root = NodePath::root();
    let v = paired_loss(&mut g, &a, &root, &b, &root, eps).expect("valid distributions");
    g.value(v).item()
}

fn paired_loss_properties() -> Verdict {
    let mut rng = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut ok = true;
    for _ in 0..500 {
        let n = 1 + (next() * 8.0) as usize;
        let mut dist = || {
            let raw: Vec<f64> = (0..n).map(|_| next() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (p, q) = (dist(), dist());
        let (pq, qp) = (paired(&p, &q, 1e-8), paired(&q, &p, 1e-8));
        ok &= pq >= 0.0 && (pq - qp).abs() < 1e-12 && paired(&p, &p, 1e-8).abs() < 1e-12;
    }
    let value = paired(&[1.0, 0.0], &[0.5, 0.5], 1e-12);
    let target = 1.039721;
    verdict(
        ok && (value - target).abs() < 1e-5,
        format!(
            "nonnegative, zero on identical inputs, swap-symmetric on 500 random pairs: {ok}; value on ([1,0],[0.5,0.5]) at eps 1e-12 = {value:.6}, expected {target} ± 1e-5"
        ),
    )
}

// ---- 3: found pairs against a brute-force matcher ----

fn trigram_cosine(a: &str, b: &str) -> f64 {
    let grams = |t: &str| {
        let chars: Vec<char> = std::iter::once('^').chain(t.to_lowercase().chars()).chain(std::iter::once('$')).collect();
        let mut m: BTreeMap<(char, char, char), f64> = BTreeMap::new();
        for w in chars.windows(3) {
            *m.entry((w[0], w[1], w[2])).or_default() += 1.0;
        }
        m
    };
    let (x, y) = (grams(a), grams(b));
    let dot: f64 = x.iter().map(|(k, v)| v * y.get(k).unwrap_or(&0.0)).sum();
    let norm = |m: &BTreeMap<(char, char, char), f64>| m.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm(&x) == 0.0 || norm(&y) == 0.0 {
        0.0
    } else {
        dot / (norm(&x) * norm(&y))
    }
}

fn brute_equivalent(a: &[String], b: &[String], m: &Matcher) -> bool {
    let entity = |t: &String| t.chars().next().is_some_and(char::is_uppercase);
    let ents = |ts: &[String]| ts.iter().filter(|t| entity(t)).cloned().collect::<BTreeSet<_>>();
    if ents(a) != ents(b) {
        return false;
    }
    let plain = a.iter().any(|t| !entity(t)) && b.iter().any(|t| !entity(t));
    let w = |t: &String| if plain && entity(t) { 0.0 } else { m.weight(t) };
    let sim = |x: &String, y: &String| if m.lexicon.synonymous(x, y) { 1.0 } else { trigram_cosine(x, y).clamp(0.0, 1.0) };
    let side = |xs: &[String], ys: &[String]| {
        let mut num = 0.0;
        let mut den = 0.0;
        for x in xs {
            let mut best = 0.0f64;
            for y in ys {
                best = best.max(sim(x, y));
            }
            num += w(x) * best;
            den += w(x);
        }
        if den > 0.0 { num / den } else { 0.0 }
    };
    let (r, p) = (side(a, b), side(b, a));
    let f1 = if r + p > 0.0 { 2.0 * r * p / (r + p) } else { 0.0 };
    f1 >= m.threshold
}

fn found_pairs_oracle() -> Verdict {
    let t = Instant::now();
    let worlds: Vec<WorldInstance> = (0..100).map(|s| generate_world(1000 + s, &GenConfig::default()).expect("valid config")).collect();
    let matcher = Matcher::from_worlds(&worlds, DEFAULT_THRESHOLD);
    let (mut discrepancies, mut total) = (0usize, 0usize);
    for w in &worlds {
        let fast: BTreeSet<PairLink> = find_natural_pairs(w, &matcher).into_iter().collect();
        let mut slow = BTreeSet::new();
        for qa in &w.questions {
            for qb in &w.questions {
                if qa.is_probe || qb.is_probe || qa.id >= qb.id {
                    continue;
                }
                for pa in qa.program.paths() {
                    for pb in qb.program.paths() {
                        let (na, nb) = (qa.program.get(&pa).unwrap(), qb.program.get(&pb).unwrap());
                        if na.module != ModuleKind::Find || nb.module != ModuleKind::Find {
                            continue;
                        }
                        if brute_equivalent(na.arg.as_ref().unwrap(), nb.arg.as_ref().unwrap(), &matcher) {
                            slow.insert(PairLink::new(&qa.id, pa.clone(), &qb.id, pb.clone(), modpair_core::pairing::PairSource::Found));
                        }
                    }
                }
            }
        }
        discrepancies += fast.symmetric_difference(&slow).count();
        total += slow.len();
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(discrepancies == 0 && secs < 10.0, format!("100 worlds, {total} links, {discrepancies} discrepancies, {secs:.1}s < 10s"))
}

// ---- 4: template constructions ----

fn planted(text: &str, program: &str, world: &WorldInstance) -> QAExample {
    let tokens = tokenize(text);
    let program = parse(program).expect("planted program parses");
    let mut arg_spans = BTreeMap::new();
    for path in program.paths() {
        if let Some(arg) = &program.get(&path).unwrap().arg {
            let start = tokens.windows(arg.len()).position(|w| w == &arg[..]).expect("argument occurs in the question");
            arg_spans.insert(path, Span(start, start + arg.len()));
        }
    }
    let sym = symbolic_execute(&program, world, &Lexicon::standard()).ok();
    QAExample {
        id: "planted-q00".into(),
        question_tokens: tokens,
        program,
        arg_spans,
        answer: sym.as_ref().and_then(|s| s.answer),
        gold_module_outputs: sym.map(|s| s.gold).unwrap_or_default(),
        is_probe: false,
        augmented: false,
    }
}

fn template_totality() -> Verdict {
    let lex = Lexicon::standard();
    let d = generate_dataset(7, &GenConfig::default(), 500).expect("valid config");
    let (mut eligible, mut covered) = (0usize, 0usize);
    for w in &d.worlds {
        let pairs = template_pairs_for_world(w, &lex, &FamilySet::all());
        let linked: BTreeSet<&str> = pairs.links.iter().map(|l| l.example_a.as_str()).collect();
        for q in &w.questions {
            if template_family(&q.program).is_some() {
                eligible += 1;
                if !construct_template_pairs(q, w, &lex).is_empty() && linked.contains(q.id.as_str()) {
                    covered += 1;
                }
            }
        }
    }

    let touchdowns = |w: &WorldInstance| w.events.iter().filter(|e| e.kind.name().starts_with("touchdown")).count();
    let game = (0..).map(|s| generate_world(s, &GenConfig::default()).unwrap()).find(|w| w.domain == Domain::Game && touchdowns(w) >= 2).unwrap();
    let q = planted("Who scored the longest touchdown ?", "project[Who scored](find-max-num(find[touchdown]))", &game);
    let out = construct_template_pairs(&q, &game, &lex);
    let texts: Vec<String> = out.iter().map(|(e, _)| detokenize(&e.question_tokens)).collect();
    let what = texts.first().map(String::as_str) == Some("What were the touchdowns?");
    let inverted = out.get(1).is_some_and(|(e, _)| {
        detokenize(&e.question_tokens) == "Who scored the shortest touchdown?" && e.program.to_string() == "project[Who scored](find-min-num(find[touchdown]))"
    });

    let mut history = generate_world(0, &GenConfig { game_fraction: 0.0, ..GenConfig::default() }).unwrap();
    history.id = "planted".into();
    let q = planted(
        "How many years after the Battle of Rullion Green was the Battle of Drumclog ?",
        "time-diff(find[Battle of Rullion Green], find[Battle of Drumclog])",
        &history,
    );
    let when: Vec<String> = construct_template_pairs(&q, &history, &lex).iter().map(|(e, _)| detokenize(&e.question_tokens)).collect();
    let when_ok = when == ["When did the Battle of Rullion Green?", "When did the Battle of Drumclog?"];

    verdict(
        covered == eligible && eligible > 0 && what && inverted && when_ok,
        format!(
            "{covered}/{eligible} template-family questions on 500 passages yield a linked construction; verbatim: \"What were the touchdowns?\" {what}, \"When did the Battle of Rullion Green?\" {when_ok}, superlative swap {inverted}"
        ),
    )
}

// ---- 5-7: direction-level experiments ----

const EXP_DIM: usize = 32;
const EXP_EPOCHS: usize = 20;

fn exp_config(seed: u64, lambda: f64) -> TrainConfig {
    TrainConfig { epochs: EXP_EPOCHS, seed, lambda_paired: lambda, ..TrainConfig::default() }
}

/// Trains on `set` and evaluates on `items`.
fn run_arm<'a>(
    vocab_from: &[WorldInstance],
    set: &TrainSet<'_>,
    links: &[PairLink],
    lambda: f64,
    seed: u64,
    items: impl IntoIterator<Item = (&'a WorldInstance, &'a QAExample)>,
    split: &str,
) -> EvalReport {
    let mut model = Model::new(ModelConfig { dim: EXP_DIM, ..ModelConfig::default() }, Vocab::from_worlds(vocab_from), seed).unwrap();
    let out = train(&mut model, set, links, &exp_config(seed, lambda)).expect("training succeeds");
    evaluate(&model, items, split, out.tau).expect("evaluation succeeds")
}

fn test_items(d: &Dataset, worlds: &[WorldInstance]) -> Vec<usize> {
    worlds.iter().enumerate().filter(|(_, w)| d.manifest.test.contains(&w.id)).map(|(i, _)| i).collect()
}

/// Worlds extended with template constructions of the given families, plus their links.
fn with_templates(worlds: &[WorldInstance], families: &FamilySet) -> (Vec<WorldInstance>, Vec<PairLink>) {
    let lex = Lexicon::standard();
    let mut out = worlds.to_vec();
    let mut links = Vec::new();
    for w in &mut out {
        let p = template_pairs_for_world(w, &lex, families);
        w.questions.extend(p.examples);
        links.extend(p.links);
    }
    (out, links)
}

/// Worlds extended with probes from every source, plus all links.
fn with_all_sources(worlds: &[WorldInstance], seed: u64) -> (Vec<WorldInstance>, Vec<PairLink>) {
    let matcher = Matcher::from_worlds(worlds, DEFAULT_THRESHOLD);
    let mut links: Vec<PairLink> = worlds.iter().flat_map(|w| find_natural_pairs(w, &matcher)).collect();
    let (mut out, templated) = with_templates(worlds, &FamilySet::all());
    links.extend(templated);
    for w in &mut out {
        let p = generate_probe_pairs(w, seed, 10, &matcher);
        w.questions.extend(p.examples);
        links.extend(p.links);
    }
    (out, links)
}

fn count_accuracy(r: &EvalReport) -> f64 {
    r.per_root.get("count").map_or(0.0, |m| m.em)
}

fn min_max_count_direction() -> Verdict {
    let mut gains_all = Vec::new();
    let mut gains_max = Vec::new();
    let mut rows = Vec::new();
    let mut slowest = 0.0f64;
    for seed in SEEDS {
        let d = generate_dataset(seed, &GenConfig::min_max_count(), 250).unwrap();
        let n_train: usize = d.worlds.iter().filter(|w| d.manifest.train.contains(&w.id)).map(|w| w.questions.len()).sum();
        let mut arm = |families: Option<&str>| {
            let t = Instant::now();
            let (worlds, links) = match families {
                None => (d.worlds.clone(), Vec::new()),
                Some(f) => with_templates(&d.worlds, &f.parse().unwrap()),
            };
            let set = TrainSet::from_manifest(&worlds, &d.manifest);
            let idx = test_items(&d, &worlds);
            let items = idx.iter().flat_map(|&i| worlds[i].questions.iter().map(move |q| (i, q))).map(|(i, q)| (&worlds[i], q));
            let r = run_arm(&worlds, &set, &links, if families.is_some() { 1.0 } else { 0.0 }, seed, items.collect::<Vec<_>>(), "test");
            slowest = slowest.max(t.elapsed().as_secs_f64());
            (count_accuracy(&r), r.faithfulness.overall)
        };
        let base = arm(None);
        let all = arm(Some("count,max,min"));
        let max = arm(Some("count,max"));
        gains_all.push(all.0 - base.0);
        gains_max.push(max.0 - base.0);
        rows.push(format!(
            "seed {seed} ({n_train} train q): count acc {:.3} / {:.3} / {:.3}, faithfulness {:.3} / {:.3} / {:.3}",
            base.0, all.0, max.0, base.1, all.1, max.1
        ));
    }
    let (g_all, g_max) = (MeanStd::of(&gains_all), MeanStd::of(&gains_max));
    verdict(
        g_all.mean >= 0.10 && g_max.mean < g_all.mean && slowest < 900.0,
        format!(
            "[baseline / max+min+count / max+count] {}; count gain max+min+count {:+.3} ± {:.3} (need >= +0.100), max+count {:+.3} ± {:.3} (need < max+min+count); slowest run {slowest:.0}s < 900s",
            rows.join("; "),
            g_all.mean,
            g_all.stdev,
            g_max.mean,
            g_max.stdev
        ),
    )
}

fn faithfulness_direction() -> Verdict {
    let mut base = Vec::new();
    let mut paired = Vec::new();
    for seed in SEEDS {
        let d = generate_dataset(seed, &GenConfig::default(), 300).unwrap();
        let (worlds, links) = with_all_sources(&d.worlds, seed);
        let eval_arm = |worlds: &[WorldInstance], links: &[PairLink], lambda: f64| {
            let set = TrainSet::from_manifest(worlds, &d.manifest);
            let idx = test_items(&d, worlds);
            let items: Vec<_> = idx.iter().flat_map(|&i| worlds[i].questions.iter().map(move |q| (&worlds[i], q))).collect();
            run_arm(worlds, &set, links, lambda, seed, items, "test").faithfulness.overall
        };
        base.push(eval_arm(&d.worlds, &[], 0.0));
        paired.push(eval_arm(&worlds, &links, 1.0));
    }
    let (b, p) = (MeanStd::of(&base), MeanStd::of(&paired));
    let reduction = 1.0 - p.mean / b.mean;
    verdict(
        reduction >= 0.30,
        format!(
            "overall faithfulness baseline {:.3} ± {:.3}, all sources {:.3} ± {:.3} (per seed {base:.3?} vs {paired:.3?}); relative reduction {:.1}% (need >= 30%)",
            b.mean,
            b.stdev,
            p.mean,
            p.stdev,
            100.0 * reduction
        ),
    )
}

fn comp_gen_direction() -> Verdict {
    let mut all_pass = true;
    let mut rows = Vec::new();
    for spec in SplitSpec::ALL {
        let mut deltas = Vec::new();
        for seed in SEEDS {
            let d = generate_dataset(seed, &GenConfig::default(), 300).unwrap();
            let split = build_comp_split(&d, spec, seed, 0.1).unwrap();
            let held: BTreeSet<&str> = split.held_out.iter().map(String::as_str).collect();
            // Pairs are acquired without the held-out questions.
            let mut visible = d.worlds.clone();
            for w in &mut visible {
                w.questions.retain(|q| !held.contains(q.id.as_str()));
            }
            let (worlds, links) = with_all_sources(&visible, seed);
            let dev: BTreeSet<&str> = split.dev.iter().map(String::as_str).collect();
            let items: Vec<_> = d.worlds.iter().flat_map(|w| w.questions.iter().map(move |q| (w, q))).filter(|(_, q)| held.contains(q.id.as_str())).collect();
            let f1 = |worlds: &[WorldInstance], links: &[PairLink], lambda: f64| {
                let set = TrainSet::from_ids(worlds, &split.train_set(), &dev);
                run_arm(&d.worlds, &set, links, lambda, seed, items.iter().copied(), "held-out").f1
            };
            let base = f1(&visible, &[], 0.0);
            let paired = f1(&worlds, &links, 1.0);
            deltas.push(paired - base);
            rows.push(format!("{spec} seed {seed}: held-out F1 {base:.3} -> {paired:.3} ({} held-out q)", items.len()));
        }
        let wins = deltas.iter().filter(|&&x| x > 0.0).count();
        let m = MeanStd::of(&deltas);
        let pass = wins >= 2 && m.mean > 0.0;
        all_pass &= pass;
        rows.push(format!("{spec}: wins {wins}/3 (need >= 2), mean delta {:+.3} ± {:.3} (need > 0)", m.mean, m.stdev));
    }
    verdict(all_pass, rows.join("; "))
}

// ---- 8: zero weight equals no pairing ----

fn baseline_equivalence() -> Verdict {
    let d = generate_dataset(3, &GenConfig::default(), 8).unwrap();
    let (worlds, links) = with_all_sources(&d.worlds, 3);
    let set = TrainSet::from_manifest(&worlds, &d.manifest);
    let run = |links: &[PairLink], sources: Option<BTreeSet<modpair_core::pairing::PairSource>>| {
        let mut model = Model::new(ModelConfig { dim: 16, ..ModelConfig::default() }, Vocab::from_worlds(&worlds), 5).unwrap();
        let mut cfg = TrainConfig { epochs: 4, lambda_paired: 0.0, seed: 5, ..TrainConfig::default() };
        if let Some(s) = sources {
            cfg.pair_sources = s;
        }
        let out = train(&mut model, &set, links, &cfg).unwrap();
        (out.history, snapshot(&model))
    };
    let with_links = run(&links, None);
    let without = run(&[], None);
    let disabled = run(&links, Some(BTreeSet::new()));
    let same = with_links == without && without == disabled;
    verdict(same, format!("lambda_paired = 0 with {} links vs no links vs no pair sources: histories and parameters identical = {same}", links.len()))
}

// ---- 9: CLI determinism ----

fn cli_run(bin: &str, dir: &Path, args: &[&str]) -> bool {
    Command::new(bin).args(args).current_dir(dir).output().map(|o| o.status.success()).unwrap_or(false)
}

fn cli_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let name = p.strip_prefix(dir).unwrap().display().to_string();
            let mut bytes = std::fs::read(&p).unwrap();
            if name.ends_with("run.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("wall_time_secs");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            files.insert(name, bytes);
        }
    }
    files
}

fn cli_determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_modpair");
    let steps: [&[&str]; 10] = [
        &["gen-data", "--seed", "11", "--n", "12", "--out", "d.jsonl"],
        &["find-pairs", "--data", "d.jsonl", "--out", "found.jsonl"],
        &["make-pairs", "--data", "d.jsonl", "--out", "tpl.jsonl", "--out-data", "d2.jsonl"],
        &["gen-probes", "--data", "d2.jsonl", "--seed", "4", "--out", "gen.jsonl", "--out-data", "d3.jsonl"],
        &["train", "--data", "d3.jsonl", "--pairs", "found.jsonl", "--pairs", "tpl.jsonl", "--pairs", "gen.jsonl", "--config", "cfg.txt", "--out-dir", "run"],
        &["train", "--data", "d3.jsonl", "--config", "base.txt", "--out-dir", "base"],
        &["eval", "--data", "d3.jsonl", "--checkpoint", "run/checkpoint.json", "--out", "paired.json"],
        &["eval", "--data", "d3.jsonl", "--checkpoint", "base/checkpoint.json", "--out", "base.json"],
        &["comp-split", "--data", "d.jsonl", "--spec", "complex-arithmetic", "--out", "comp.json"],
        &["compare", "--baseline", "base.json", "--runs", "paired.json", "--out", "cmp.json"],
    ];
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cfg.txt"), "dim = 16\nepochs = 2\n").unwrap();
        std::fs::write(dir.path().join("base.txt"), "dim = 16\nepochs = 2\nlambda_paired = 0\n").unwrap();
        for args in steps {
            if !cli_run(bin, dir.path(), args) {
                return verdict(false, format!("`modpair {}` failed", args.join(" ")));
            }
        }
        trees.push(cli_outputs(dir.path()));
    }
    let differing: Vec<&String> = trees[0].iter().filter(|(k, v)| trees[1].get(*k) != Some(v)).map(|(k, _)| k).collect();
    verdict(
        differing.is_empty() && trees[0].len() == trees[1].len(),
        format!("8 commands run twice, {} output files compared (manifests without wall time), differing: {differing:?}", trees[0].len()),
    )
}

// ---- 10: overfit ----

fn overfit() -> Verdict {
    let d = generate_dataset(17, &GenConfig::default(), 5).unwrap();
    let mut manifest = d.manifest.clone();
    manifest.train = d.worlds.iter().map(|w| w.id.clone()).collect();
    manifest.dev.clear();
    manifest.test.clear();
    let set = TrainSet::from_manifest(&d.worlds, &manifest);
    let mut model = Model::new(ModelConfig { dim: 32, ..ModelConfig::default() }, Vocab::from_worlds(&d.worlds), 1).unwrap();
    let cfg = TrainConfig { epochs: 50, batch_size: 4, lr: 5e-3, lambda_paired: 0.0, ..TrainConfig::default() };
    let out = train(&mut model, &set, &[], &cfg).unwrap();
    let r = evaluate(&model, set.train.iter().map(|e| e.get(&d.worlds)), "train", out.tau).unwrap();
    verdict(r.em >= 0.95, format!("5 passages, {} questions, 50 epochs: train accuracy {:.3} (need >= 0.95)", r.n_examples, r.em))
}

fn main() {
    let only: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "autodiff gradients", autodiff_gradients),
        (2, "paired loss properties", paired_loss_properties),
        (3, "found pairs match brute force", found_pairs_oracle),
        (4, "template totality", template_totality),
        (5, "min/max/count direction", min_max_count_direction),
        (6, "faithfulness direction", faithfulness_direction),
        (7, "compositional generalization direction", comp_gen_direction),
        (8, "zero pairing weight equals no pairing", baseline_equivalence),
        (9, "CLI determinism", cli_determinism),
        (10, "overfit sanity", overfit),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| verdict(false, "panicked"));
        println!("criterion {id:>2} {} {name}: {} [{:.1}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail, t.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("all criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        if std::env::var_os("MODPAIR_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
