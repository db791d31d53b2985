use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use objforge::cluster::{kmeans, select_cluster_count, train_skipgram, ClusterMap, EmbeddingTable};
use objforge::config::{PipelineConfig, TokenizerKind};
use objforge::corpus::{corpus_stats as stats_of, ingest_sources, Corpus};
use objforge::corruption::{crts_corrupt, mlm_corrupt, rts_corrupt, slm_corrupt, FMatrix, TokenSpace};
use objforge::generators::{write_shards, Generator, Objective};
use objforge::metrics::{evaluate, head_cost, jointwise_latency_ratio, read_groups, HeadObjective};
use objforge::model::write_checkpoint;
use objforge::rng::{keyed, sub_seed};
use objforge::tokenizer::Vocabulary;
use objforge::train::{loss_ratio, TaskConfig, ToySetup, TrainData, TrainObjective, Trainer};
use objforge::{Error, Result};

use crate::context::{load_corpus, open, require, source_name, split_inputs, Context};

pub const VOCAB_FILE: &str = "vocab.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const TRACE_FILE: &str = "loss_trace.csv";

fn json_line(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn read_vocab(ctx: &Context, path: Option<PathBuf>) -> Result<Vocabulary> {
    let path = path.unwrap_or_else(|| ctx.out_path(VOCAB_FILE));
    Vocabulary::read_json(open(&path, "--vocab")?)
}

pub fn corpus_ingest(ctx: &Context, inputs: &[PathBuf]) -> Result<()> {
    let cfg = ctx.checked()?;
    let inputs: Vec<PathBuf> = if inputs.is_empty() {
        let p = cfg.paths.corpus.clone();
        vec![p.ok_or_else(|| Error::config("corpus ingest needs input files or paths.corpus"))?]
    } else {
        inputs.to_vec()
    };
    for p in &inputs {
        require(p, "input")?;
    }
    if ctx.stop_here() {
        return Ok(());
    }
    let (jsonl, text) = split_inputs(&inputs);
    let mut documents = Vec::new();
    for p in jsonl {
        documents.extend(load_corpus(p, &cfg)?.documents().iter().cloned());
    }
    if !text.is_empty() {
        let mut sources = Vec::new();
        for p in text {
            sources.push((source_name(p), std::fs::read(p).map_err(|e| Error::io(p, e))?));
        }
        documents.extend(ingest_sources(&sources, &cfg.segmentation.build()?)?.documents().iter().cloned());
    }
    let corpus = Corpus::new(documents)?;
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf)?;
    ctx.write("corpus.jsonl", &buf)?;
    Ok(())
}

pub fn corpus_stats(ctx: &Context) -> Result<()> {
    ctx.checked()?;
    if ctx.stop_here() {
        return Ok(());
    }
    json_line(&stats_of(&ctx.corpus()?))
}

fn tokenizer_kind(name: &str) -> Result<TokenizerKind> {
    match name.to_ascii_lowercase().as_str() {
        "bpe" => Ok(TokenizerKind::Bpe),
        "wordpiece" => Ok(TokenizerKind::Wordpiece),
        "unigram" => Ok(TokenizerKind::Unigram),
        _ => Err(Error::config(format!("--kind: unknown tokenizer {name:?}"))),
    }
}

pub fn tok_train(ctx: &mut Context, kind: Option<&str>, size: Option<usize>) -> Result<()> {
    if let Some(k) = kind {
        ctx.cfg.tokenizer.kind = tokenizer_kind(k)?;
    }
    if let Some(s) = size {
        ctx.cfg.tokenizer.size = s;
    }
    let cfg = ctx.checked()?;
    if ctx.stop_here() {
        return Ok(());
    }
    let vocab = cfg.tokenizer.train(&ctx.corpus()?)?;
    let mut buf = Vec::new();
    vocab.write_json(&mut buf)?;
    ctx.write(VOCAB_FILE, &buf)?;
    Ok(())
}

#[derive(Serialize)]
struct Encoded<'a> {
    text: &'a str,
    ids: Vec<u32>,
    pieces: Vec<String>,
}

pub fn tok_encode(ctx: &Context, vocab: Option<PathBuf>, text: &[String]) -> Result<()> {
    ctx.checked()?;
    let vocab = read_vocab(ctx, vocab)?;
    if ctx.stop_here() {
        return Ok(());
    }
    let emit = |line: &str| -> Result<()> {
        let seq = vocab.encode(line);
        let pieces = vocab.pieces(&seq)?;
        json_line(&Encoded { text: line, ids: seq.ids, pieces })
    };
    if text.is_empty() {
        for line in std::io::stdin().lock().lines() {
            emit(&line.map_err(|e| Error::Decode(e.to_string()))?)?;
        }
    } else {
        for t in text {
            emit(t)?;
        }
    }
    Ok(())
}

pub fn cluster_embed(ctx: &Context, vocab: Option<PathBuf>) -> Result<()> {
    let cfg = ctx.checked()?;
    let vocab = read_vocab(ctx, vocab)?;
    if ctx.stop_here() {
        return Ok(());
    }
    let table = train_skipgram(&ctx.corpus()?, &vocab, &cfg.task.skipgram)?;
    let mut buf = Vec::new();
    table.write_json(&mut buf)?;
    ctx.write(EMBEDDINGS_FILE, &buf)?;
    Ok(())
}

pub fn cluster_kmeans(
    ctx: &Context,
    embeddings: Option<PathBuf>,
    n: Option<usize>,
    restarts: Option<usize>,
) -> Result<()> {
    let cfg = ctx.checked()?;
    let path = embeddings.unwrap_or_else(|| ctx.out_path(EMBEDDINGS_FILE));
    let table = EmbeddingTable::read_json(open(&path, "--embeddings")?)?;
    let n = n.unwrap_or(cfg.task.n_clusters);
    let restarts = restarts.unwrap_or(cfg.task.kmeans_restarts);
    if n == 0 || n > table.rows() {
        return Err(Error::config(format!("--n must lie in 1..={}, got {n}", table.rows())));
    }
    if restarts == 0 {
        return Err(Error::config("--restarts must be positive"));
    }
    if ctx.stop_here() {
        return Ok(());
    }
    let map = kmeans(&table, n, restarts, sub_seed(cfg.seed, "kmeans"))?;
    let mut buf = Vec::new();
    map.write_json(&mut buf)?;
    ctx.write(CLUSTERS_FILE, &buf)?;
    Ok(())
}

pub fn cluster_select(ctx: &Context, scores: &Path) -> Result<()> {
    ctx.checked()?;
    let table: BTreeMap<String, f64> = serde_json::from_reader(open(scores, "--scores")?)?;
    let mut accuracy = BTreeMap::new();
    for (k, v) in table {
        let n: usize = k.parse().map_err(|_| Error::config(format!("--scores: {k:?} is not a cluster count")))?;
        accuracy.insert(n, v);
    }
    let candidates: Vec<usize> = accuracy.keys().copied().collect();
    let n = select_cluster_count(&candidates, |n| Ok(accuracy[&n]))?;
    if ctx.stop_here() {
        return Ok(());
    }
    json_line(&serde_json::json!({ "n": n, "accuracy": accuracy[&n] }))
}

pub fn gen(ctx: &Context, objective: &str, shards: usize, groups_per_shard: Option<usize>) -> Result<()> {
    let cfg = ctx.checked()?;
    let objective: Objective = objective.parse()?;
    if shards == 0 || groups_per_shard == Some(0) {
        return Err(Error::config("--shards and --groups-per-shard must be positive"));
    }
    if ctx.stop_here() {
        return Ok(());
    }
    let corpus = ctx.corpus()?;
    let generator = Generator::new(&corpus, objective, cfg.task.gen.clone())?;
    let per_shard = groups_per_shard.unwrap_or_else(|| generator.group_count().div_ceil(shards).max(1));
    for path in write_shards(&generator, ctx.out_dir(), per_shard, 0..shards)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn corrupt(
    ctx: &Context,
    objective: &str,
    vocab: Option<PathBuf>,
    clusters: Option<PathBuf>,
    f_matrix: Option<PathBuf>,
) -> Result<()> {
    let cfg = ctx.checked()?;
    let objective: TrainObjective = objective.parse()?;
    if !objective.is_token_level() {
        return Err(Error::config(format!("corrupt: {objective} is not a token-level objective")));
    }
    let vocab = read_vocab(ctx, vocab)?;
    let crts = if objective == TrainObjective::Crts {
        let path = clusters.ok_or_else(|| Error::config("corrupt crts needs --clusters"))?;
        let map = ClusterMap::read_json(open(&path, "--clusters")?)?;
        if map.vocab_size() != vocab.len() {
            return Err(Error::config(format!(
                "--clusters covers {} ids but the vocabulary has {}",
                map.vocab_size(),
                vocab.len()
            )));
        }
        let f = match f_matrix {
            Some(p) => FMatrix::read_binary(open(&p, "--f-matrix")?)?,
            None => FMatrix::zeros(map.n()),
        };
        Some((map, f))
    } else {
        None
    };
    if ctx.stop_here() {
        return Ok(());
    }
    let corpus = ctx.corpus()?;
    let space = TokenSpace::from(&vocab);
    let sentences: Vec<&str> = corpus.sentences().map(|s| s.text()).collect();
    let seed = sub_seed(cfg.seed, &format!("corrupt/{objective}"));
    let task = &cfg.task;
    // one keyed stream per sentence, so the output does not depend on --jobs
    let lines: Vec<Vec<u8>> = sentences
        .par_iter()
        .enumerate()
        .map(|(i, text)| {
            let ids = vocab.encode(text).ids;
            let mut rng = keyed(seed, i as u64);
            let out = match objective {
                TrainObjective::Mlm => mlm_corrupt(&ids, &task.mlm, &space, &mut rng),
                TrainObjective::Rts => rts_corrupt(&ids, task.rate, &space, &mut rng),
                TrainObjective::Slm => slm_corrupt(&ids, task.rate, &space, &mut rng),
                _ => {
                    let (map, f) = crts.as_ref().expect("cluster map loaded for crts");
                    crts_corrupt(&ids, &task.crts, map, f, &space, &mut rng)
                }
            }?;
            let mut line = serde_json::to_vec(&out)?;
            line.push(b'\n');
            Ok(line)
        })
        .collect::<Result<_>>()?;
    ctx.write(&format!("{objective}-corrupted.jsonl"), &lines.concat())?;
    Ok(())
}

/// Terms such as `mlm:1.0` or `ssp`, joined into one weight list.
fn objective_list(terms: &[String]) -> String {
    terms.join(", ")
}

fn toy_trainer(
    mut toy: ToySetup,
    cfg: &PipelineConfig,
    weights: Vec<(TrainObjective, f64)>,
) -> Result<(Trainer, Option<Vocabulary>)> {
    toy.model.seed = cfg.model.seed;
    toy.train.seed = cfg.train.seed;
    toy.train.total_steps = cfg.train.total_steps;
    toy.train.warmup_steps = toy.train.warmup_steps.min(cfg.train.total_steps);
    Ok((toy.trainer(weights)?, Some(toy.vocab)))
}

fn corpus_trainer(
    ctx: &Context,
    cfg: &PipelineConfig,
    weights: Vec<(TrainObjective, f64)>,
) -> Result<(Trainer, Option<Vocabulary>)> {
    let corpus = ctx.corpus()?;
    let vocab = cfg.tokenizer.train(&corpus)?;
    let mut model = cfg.model.clone();
    model.vocab_size = vocab.len();
    let names: Vec<TrainObjective> = weights.iter().map(|(o, _)| *o).collect();
    let task: TaskConfig = cfg.task.clone();
    let data = TrainData::prepare(&corpus, vocab.clone(), &names, &task)?;
    Ok((Trainer::new(model, cfg.train.clone(), task, weights, data)?, Some(vocab)))
}

pub fn train(ctx: &mut Context, objectives: &[String], steps: Option<usize>) -> Result<()> {
    if !objectives.is_empty() {
        ctx.cfg.objectives = objective_list(objectives);
    }
    if let Some(s) = steps {
        if s == 0 {
            return Err(Error::config("--steps must be positive"));
        }
        ctx.cfg.train.total_steps = s;
        ctx.cfg.train.warmup_steps = ctx.cfg.train.warmup_steps.min(s);
    }
    let toy = match ctx.cfg.paths.corpus {
        Some(_) => None,
        None => {
            // the bundled setup brings its own model, checked here like any other
            let setup = ToySetup::new(ctx.cfg.seed)?;
            ctx.cfg.model = setup.model.clone();
            ctx.cfg.task = setup.task.clone();
            Some(setup)
        }
    };
    let cfg = ctx.checked()?;
    let weights = cfg.weights()?;
    if ctx.stop_here() {
        return Ok(());
    }
    log::info!("training {} for {} steps", cfg.objectives, cfg.train.total_steps);
    let (mut trainer, vocab) = match toy {
        Some(setup) => toy_trainer(setup, &cfg, weights.clone())?,
        None => corpus_trainer(ctx, &cfg, weights.clone())?,
    };
    let trace = trainer.run()?;

    let mut csv = Vec::new();
    trace.write_csv(&mut csv).map_err(|e| Error::io(TRACE_FILE, e))?;
    ctx.write(TRACE_FILE, &csv)?;
    let model = trainer.model();
    let mut ckpt = Vec::new();
    write_checkpoint(&model.cfg, &model.params, &mut ckpt)?;
    ctx.write("model.ckpt", &ckpt)?;
    if let Some(v) = vocab {
        let mut buf = Vec::new();
        v.write_json(&mut buf)?;
        ctx.write(VOCAB_FILE, &buf)?;
    }
    let window = (cfg.train.total_steps / 5).max(1);
    for (o, _) in &weights {
        if let Some(r) = loss_ratio(&trace.losses(o.name()), window.min(10), window) {
            println!("{o}: final/initial loss {r:.3}");
        }
    }
    Ok(())
}

pub fn eval_rank(ctx: &Context, input: &Path) -> Result<()> {
    ctx.checked()?;
    let groups = read_groups(open(input, "--input")?)?;
    let report = evaluate(&groups)?;
    if ctx.stop_here() {
        return Ok(());
    }
    ctx.write("eval_report.json", &to_json(&report)?)?;
    json_line(&report)
}

/// Digit grouping for numbers of five or more digits.
fn grouped(n: u64) -> String {
    let s = n.to_string();
    if s.len() < 5 {
        return s;
    }
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn flops_table(d: u64, vocab: u64) -> String {
    let mut out = format!("{:<10} {:>14} {:>16}\n", "objective", "head params", "FLOPs/token");
    for obj in HeadObjective::ALL {
        let c = head_cost(obj, d, vocab);
        out.push_str(&format!("{:<10} {:>14} {:>16}\n", obj.name(), grouped(c.params), grouped(c.flops_per_token)));
    }
    out
}

pub fn flops_report(ctx: &Context, d: Option<u64>, vocab: Option<u64>, k: Option<u64>) -> Result<()> {
    let cfg = ctx.checked()?;
    let d = d.unwrap_or(cfg.model.d as u64);
    let vocab = vocab.unwrap_or(cfg.model.vocab_size as u64);
    if d == 0 || vocab == 0 {
        return Err(Error::config("--d and --vocab must be positive"));
    }
    let ratio = k.map(jointwise_latency_ratio).transpose()?;
    if ctx.stop_here() {
        return Ok(());
    }
    print!("d = {d}, vocabulary = {}\n{}", grouped(vocab), flops_table(d, vocab));
    if let (Some(k), Some(r)) = (k, ratio) {
        println!("pairwise / jointwise latency at k = {k}: {r:.4}");
    }
    Ok(())
}
