use std::collections::BTreeSet;
use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::cli::*;
use crate::config::RunConfig;
use crate::manifest::{manifest_path, Recorder};
use crate::{io, pipeline, CliError};
use modpair_core::eval::{build_comp_split, compare_runs, evaluate, CompSplit, EvalReport, SplitSpec};
use modpair_core::executor::{Model, Vocab};
use modpair_core::pairing::{FamilySet, PairLink};
use modpair_core::training::{train_with, EpochMetrics, TrainSet};
use modpair_core::world::generate_dataset;

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData(a) => gen_data(&a),
        Command::FindPairs(a) => find_pairs(&a),
        Command::MakePairs(a) => make_pairs(&a),
        Command::GenProbes(a) => gen_probes(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::CompSplit(a) => comp_split(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn load_config(rec: &mut Recorder, path: Option<&Path>) -> Result<RunConfig, CliError> {
    if let Some(p) = path {
        rec.input(p)?;
    }
    let cfg = RunConfig::load(path)?;
    rec.config(cfg.hash());
    Ok(cfg)
}

fn read_dataset(rec: &mut Recorder, path: &Path) -> Result<modpair_core::world::Dataset, CliError> {
    let d = io::read_dataset(path)?;
    rec.input(path)?;
    rec.input(&io::split_path(path))?;
    Ok(d)
}

pub fn gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("gen-data");
    let cfg = load_config(&mut rec, a.config.as_deref())?;
    rec.seed(a.seed);
    let dataset = generate_dataset(a.seed, &cfg.gen, a.n)?;
    io::write_dataset(&a.out, &dataset)?;
    rec.output(&a.out);
    rec.output(&io::split_path(&a.out));
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

pub fn find_pairs(a: &FindPairsArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("find-pairs");
    let dataset = read_dataset(&mut rec, &a.data)?;
    let links = pipeline::find_pairs(&dataset.worlds, a.threshold);
    io::write_jsonl(&a.out, &links)?;
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

fn write_extended(rec: &mut Recorder, dataset: &modpair_core::world::Dataset, out_data: &Path, out: &Path, links: &[PairLink]) -> Result<(), CliError> {
    io::write_dataset(out_data, dataset)?;
    io::write_jsonl(out, links)?;
    rec.output(out);
    rec.output(out_data);
    rec.output(&io::split_path(out_data));
    Ok(())
}

pub fn make_pairs(a: &MakePairsArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("make-pairs");
    let families: FamilySet = a.templates.parse().map_err(|e| CliError::invalid(format!("--templates: {e}")))?;
    let mut dataset = read_dataset(&mut rec, &a.data)?;
    let links = pipeline::make_pairs(&mut dataset.worlds, &families)?;
    write_extended(&mut rec, &dataset, &a.out_data, &a.out, &links)?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

pub fn gen_probes(a: &GenProbesArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("gen-probes");
    rec.seed(a.seed);
    let mut dataset = read_dataset(&mut rec, &a.data)?;
    let links = pipeline::gen_probes(&mut dataset.worlds, a.seed, a.k, a.threshold)?;
    write_extended(&mut rec, &dataset, &a.out_data, &a.out, &links)?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

fn read_comp_split(rec: &mut Recorder, path: Option<&Path>) -> Result<Option<CompSplit>, CliError> {
    path.map(|p| {
        rec.input(p)?;
        io::read_json(p)
    })
    .transpose()
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("train");
    let mut cfg = load_config(&mut rec, a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    cfg.train.validate()?;
    cfg.model.validate()?;
    if cfg.train.lambda_paired > 0.0 && a.pairs.is_empty() {
        return Err(CliError::invalid("lambda_paired > 0 needs at least one --pairs file (or set lambda_paired = 0)"));
    }
    rec.seed(cfg.train.seed);
    let dataset = read_dataset(&mut rec, &a.data)?;
    let mut links = Vec::new();
    for p in &a.pairs {
        links.extend(io::read_pairs(p)?);
        rec.input(p)?;
    }
    let comp = read_comp_split(&mut rec, a.comp_split.as_deref())?;
    let set = match &comp {
        None => TrainSet::from_manifest(&dataset.worlds, &dataset.manifest),
        Some(c) => {
            let dev: BTreeSet<&str> = c.dev.iter().map(String::as_str).collect();
            TrainSet::from_ids(&dataset.worlds, &c.train_set(), &dev)
        }
    };
    let mut model = Model::new(cfg.model.clone(), Vocab::from_worlds(&dataset.worlds), cfg.train.seed).map_err(|e| CliError::invalid(e.to_string()))?;
    let mut history: Vec<EpochMetrics> = Vec::new();
    let outcome = train_with(&mut model, &set, &links, &cfg.train, |m| {
        eprintln!("epoch {:>3}  loss {:.4}  paired {:.4}  pairs {:>5}  dev f1 {:.4}  tau {:.3}", m.epoch, m.train_loss, m.paired_loss, m.n_pairs, m.dev_f1, m.tau);
        history.push(m.clone());
    })?;
    let dir = &a.out_dir;
    let ckpt = dir.join("checkpoint.json");
    let metrics = dir.join("metrics.jsonl");
    Checkpoint::from_model(&model, outcome.tau).write(&ckpt)?;
    io::write_jsonl(&metrics, &history)?;
    rec.output(&ckpt);
    rec.output(&metrics);
    rec.finish(&dir.join("run.json"))?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("eval");
    let dataset = read_dataset(&mut rec, &a.data)?;
    let comp = read_comp_split(&mut rec, a.comp_split.as_deref())?;
    let items = pipeline::split_examples(&dataset, &a.split, comp.as_ref())?;
    rec.input(&a.checkpoint)?;
    let (model, tau) = Checkpoint::read(&a.checkpoint)?.into_model()?;
    let report = evaluate(&model, items, &a.split, tau)?;
    io::write_json(&a.out, &report)?;
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

pub fn comp_split(a: &CompSplitArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("comp-split");
    rec.seed(a.seed);
    let spec: SplitSpec = a.spec.parse().map_err(|e| CliError::invalid(format!("--spec: {e}")))?;
    let dataset = read_dataset(&mut rec, &a.data)?;
    let split = build_comp_split(&dataset, spec, a.seed, a.dev_fraction)?;
    io::write_json(&a.out, &split)?;
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<(), CliError> {
    let mut rec = Recorder::start("compare");
    let mut read = |paths: &[std::path::PathBuf]| -> Result<Vec<EvalReport>, CliError> {
        paths
            .iter()
            .map(|p| {
                rec.input(p)?;
                io::read_json(p)
            })
            .collect()
    };
    let base = read(&a.baseline)?;
    let runs = read(&a.runs)?;
    let seeds: Vec<u64> = if a.seeds.is_empty() { (0..base.len() as u64).collect() } else { a.seeds.clone() };
    let cmp = compare_runs(&base, &runs, &seeds)?;
    io::write_json(&a.out, &cmp)?;
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}
