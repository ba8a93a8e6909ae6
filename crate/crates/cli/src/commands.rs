use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use subspace_merge::config::{read_layer, ResolvedConfig};
use subspace_merge::harness::{
    leave_one_out_at_lambda, read_results_csv, results_to_csv, summary_table, Experiment, ResultRow, ENSEMBLE,
};
use subspace_merge::merge::{build_shared_basis, merge_checkpoint, MergeConfig, Method, ScoreVariant};
use subspace_merge::metrics::{angle_matrix, conflict_map, sar_matrix, LayerDeltas, PairwiseMatrix};
use subspace_merge::store::{compute_deltas, load_any, read_manifest, save_checkpoint};
use subspace_merge::{Checkpoint, Error, Result};

use crate::manifest::{now, RunManifest};
use crate::{Cli, Command, ConflictArgs, EvalArgs, MergeArgs, PairwiseArgs, ReportArgs};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io { path: parent.into(), source: e })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io { path: path.into(), source: e })
}

/// Collects flag values into a config layer, skipping absent ones.
#[derive(Default)]
struct Overlay(Map<String, Value>);

impl Overlay {
    fn set(&mut self, key: &str, value: Option<impl Into<Value>>) {
        if let Some(v) = value {
            self.0.insert(key.to_string(), v.into());
        }
    }

    fn nested(&mut self, section: &str, key: &str, value: Option<impl Into<Value>>) {
        if let Some(v) = value {
            let entry = self.0.entry(section).or_insert_with(|| Value::Object(Map::new()));
            if let Value::Object(m) = entry {
                m.insert(key.to_string(), v.into());
            }
        }
    }
}

fn resolve(cli: &Cli, layers: Vec<Value>) -> Result<ResolvedConfig> {
    let mut all = Vec::new();
    if let Some(path) = &cli.config {
        all.push(read_layer(path)?);
    }
    all.extend(layers);
    let cfg = ResolvedConfig::resolve(&all)?;
    log::debug!("resolved config: {}", cfg.canonical_json());
    Ok(cfg)
}

/// Finishes and writes the run manifest for `outputs`, the first being the primary one.
fn finish_manifest(cli: &Cli, mut manifest: RunManifest, outputs: Vec<PathBuf>) -> Result<()> {
    let Some(primary) = outputs.first() else {
        return Ok(());
    };
    let path = cli.manifest.clone().unwrap_or_else(|| RunManifest::default_path(primary));
    manifest.outputs = outputs;
    manifest.finished_at = now();
    write_file(&path, &serde_json::to_string_pretty(&manifest)?)?;
    log::info!("wrote run manifest {}", path.display());
    Ok(())
}

fn paths_json(paths: &[PathBuf]) -> Value {
    Value::Array(paths.iter().map(|p| Value::String(p.display().to_string())).collect())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Inspect { path } => inspect(path),
        Command::Merge(args) => merge(cli, args),
        Command::Sar(args) => pairwise(cli, "sar", args),
        Command::Angles(args) => pairwise(cli, "angles", args),
        Command::ConflictMap(args) => conflict(cli, args),
        Command::Eval(args) => eval(cli, args),
        Command::Report(args) => report(args),
    }
}

fn inspect(path: &Path) -> Result<()> {
    if path.is_dir() {
        let entries = read_manifest(path)?;
        println!("{:<32} {:<5} {:<14} {:<16} {:>10} {:>10}", "name", "dtype", "shape", "file", "offset", "bytes");
        for e in entries {
            let shape = format!("{:?}", e.shape);
            let dtype = serde_json::to_value(e.dtype)?;
            println!(
                "{:<32} {:<5} {:<14} {:<16} {:>10} {:>10}",
                e.name,
                dtype.as_str().unwrap_or("?"),
                shape,
                e.file,
                e.byte_offset,
                e.byte_len
            );
        }
    } else {
        let ckpt = load_any(path)?;
        println!("{:<32} {:<14} {:>10} {:>14}", "name", "shape", "elements", "norm");
        for (name, t) in ckpt.params() {
            let norm = t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            println!("{:<32} {:<14} {:>10} {:>14.6}", name, format!("{:?}", t.shape()), t.data().len(), norm);
        }
    }
    Ok(())
}

fn load_models(pre: &Path, models: &[PathBuf]) -> Result<(Checkpoint, Vec<Checkpoint>)> {
    let pre = load_any(pre)?;
    let models = models.iter().map(load_any).collect::<Result<Vec<_>>>()?;
    log::info!("loaded {} fine-tuned checkpoints", models.len());
    Ok((pre, models))
}

fn merge(cli: &Cli, args: &MergeArgs) -> Result<()> {
    let started = now();
    let mut o = Overlay::default();
    o.set("method", args.method.clone());
    o.set("score_variant", args.variant.clone());
    o.set("lambda", args.lambda);
    o.set("tau", args.tau);
    o.set("ties_density", args.ties_density);
    o.set("normalize_sigma_by_domains", args.normalize_sigma.then_some(true));
    let cfg = resolve(cli, vec![Value::Object(o.0)])?;
    let params = json!({ "pre": args.pre.display().to_string(), "models": paths_json(&args.models) });
    let manifest = RunManifest::new("merge", &cfg, params, started);

    let (pre, models) = load_models(&args.pre, &args.models)?;
    let merge_cfg = cfg.merge_config();
    log::info!("merging {} models with {}", models.len(), merge_cfg.label());
    let (merged, report) = merge_checkpoint(&pre, &models, &merge_cfg)?;
    save_checkpoint(&merged, &args.out)?;
    let mut outputs = vec![args.out.clone()];
    if let Some(path) = &args.report {
        write_file(path, &serde_json::to_string_pretty(&report)?)?;
        outputs.push(path.clone());
    }
    finish_manifest(cli, manifest, outputs)
}

/// Per-model layer deltas labelled by model id.
fn model_deltas(pre: &Checkpoint, models: &[Checkpoint]) -> Result<Vec<(String, LayerDeltas)>> {
    let deltas = compute_deltas(models, pre)?;
    Ok(models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let layers = deltas
                .matrices
                .iter()
                .map(|(name, set)| (name.clone(), set.deltas()[i].clone()))
                .collect();
            (m.model_id.clone(), layers)
        })
        .collect())
}

fn matrix_json(m: &PairwiseMatrix) -> Value {
    json!({ "metric": m.metric_name, "labels": m.labels, "values": m.values })
}

fn pairwise(cli: &Cli, command: &str, args: &PairwiseArgs) -> Result<()> {
    let started = now();
    let mut o = Overlay::default();
    o.set("epsilon", args.epsilon);
    let cfg = resolve(cli, vec![Value::Object(o.0)])?;
    let params = json!({ "pre": args.pre.display().to_string(), "models": paths_json(&args.models) });
    let manifest = RunManifest::new(command, &cfg, params, started);

    let (pre, models) = load_models(&args.pre, &args.models)?;
    let labelled = model_deltas(&pre, &models)?;
    let matrix = if command == "sar" {
        sar_matrix(&labelled, cfg.epsilon)?
    } else {
        angle_matrix(&labelled, cfg.epsilon)?
    };
    let mut outputs = Vec::new();
    match &args.out {
        Some(path) => {
            write_file(path, &matrix.to_csv())?;
            outputs.push(path.clone());
        }
        None => print!("{}", matrix.to_csv()),
    }
    if let Some(path) = &args.json {
        write_file(path, &serde_json::to_string_pretty(&matrix_json(&matrix))?)?;
        outputs.push(path.clone());
    }
    finish_manifest(cli, manifest, outputs)
}

fn conflict(cli: &Cli, args: &ConflictArgs) -> Result<()> {
    let started = now();
    let cfg = resolve(cli, Vec::new())?;
    let params = json!({
        "pre": args.pre.display().to_string(),
        "models": paths_json(&args.models),
        "layer": args.layer,
    });
    let manifest = RunManifest::new("conflict-map", &cfg, params, started);

    let (pre, models) = load_models(&args.pre, &args.models)?;
    let deltas = compute_deltas(&models, &pre)?;
    let set = deltas.matrices.get(&args.layer).ok_or_else(|| {
        let known: Vec<&str> = deltas.matrices.keys().map(String::as_str).collect();
        Error::InvalidArgument(format!("no 2-D layer `{}`; available: {}", args.layer, known.join(", ")))
    })?;
    let basis = build_shared_basis(set, &cfg.merge_config()).map_err(|e| e.in_layer(&args.layer))?;
    let map = conflict_map(set, &basis)?;
    log::info!("layer {}: diagonal energy fraction {:.4}", args.layer, map.agreement());

    let mut outputs = Vec::new();
    match &args.out {
        Some(path) => {
            write_file(path, &map.to_csv())?;
            outputs.push(path.clone());
        }
        None => print!("{}", map.to_csv()),
    }
    if let Some(path) = &args.json {
        write_file(path, &serde_json::to_string_pretty(&map)?)?;
        outputs.push(path.clone());
    }
    finish_manifest(cli, manifest, outputs)
}

/// `all`, or a comma list of method names and `score/<variant>` labels.
pub fn parse_methods(list: &str, base: &MergeConfig) -> Result<Vec<MergeConfig>> {
    if list.trim() == "all" {
        let mut out: Vec<MergeConfig> = [Method::TaskArithmetic, Method::Ties, Method::Magmax, Method::IsoC]
            .into_iter()
            .map(|method| MergeConfig { method, ..*base })
            .collect();
        out.extend(ScoreVariant::ALL.into_iter().map(|score_variant| MergeConfig {
            method: Method::Score,
            score_variant,
            ..*base
        }));
        return Ok(out);
    }
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (method, variant) = match item.split_once('/') {
                Some((m, v)) => (m, Some(v)),
                None => (item, None),
            };
            let method: Method = method.parse()?;
            let mut cfg = MergeConfig { method, ..*base };
            if let Some(v) = variant {
                if method != Method::Score {
                    return Err(Error::InvalidArgument(format!("`{item}`: only score takes a variant")));
                }
                cfg.score_variant = v.parse()?;
            }
            Ok(cfg)
        })
        .collect()
}

fn eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let started = now();
    let mut layers = Vec::new();
    if let Some(path) = &args.spec {
        layers.push(json!({ "spec": read_layer(path)? }));
    }
    let mut o = Overlay::default();
    o.nested("spec", "seed", args.seed);
    o.nested("fit", "epochs", args.epochs);
    o.nested("fit", "lr", args.lr);
    layers.push(Value::Object(o.0));
    let cfg = resolve(cli, layers)?;
    let methods = parse_methods(&args.methods, &cfg.merge_config())?;
    if args.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    let lambda = args.explore_lambda.unwrap_or(1.0);
    let params = json!({
        "methods": methods.iter().map(MergeConfig::label).collect::<Vec<_>>(),
        "seeds": args.seeds,
        "lambda": lambda,
        "timings": args.timings,
    });
    let manifest = RunManifest::new("eval", &cfg, params, started);

    let mut rows = Vec::new();
    for seed in cfg.spec.seed..cfg.spec.seed + args.seeds {
        log::info!("seed {seed}: fitting {} domain models", cfg.spec.n_domains);
        let exp = Experiment::prepare(&cfg.spec.with_seed(seed), &cfg.fit)?;
        let results = leave_one_out_at_lambda(&exp.pre, &exp.experts, &exp.domains, &methods, lambda)?;
        rows.extend(results.iter().map(|r| ResultRow::from_eval(seed, r, args.timings)));
    }
    write_file(&args.out, &results_to_csv(&rows)?)?;
    log::info!("wrote {} rows to {}", rows.len(), args.out.display());
    finish_manifest(cli, manifest, vec![args.out.clone()])
}

fn report(args: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.results).map_err(|e| Error::Io { path: args.results.clone(), source: e })?;
    let rows = read_results_csv(&text)?;
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no result rows", args.results.display())));
    }
    let table = summary_table(&rows);
    let markdown = args.out.as_ref().is_none_or(|p| p.extension().is_some_and(|e| e == "md"));
    let mut out = if markdown { table.to_markdown() } else { table.to_csv() };
    if markdown {
        if let Some(ensemble) = table.mean_of(ENSEMBLE) {
            out.push('\n');
            for (label, _, avg) in table.rows.iter().filter(|(l, _, _)| l.starts_with("score")) {
                out.push_str(&format!("{label} vs {ENSEMBLE}: {:+.2}\n", avg - ensemble));
            }
        }
    }
    match &args.out {
        Some(path) => write_file(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}
