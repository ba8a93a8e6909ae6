//! Leave-one-domain-out evaluation of merged toy models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::merge::{merge_checkpoint, MergeConfig, Method};

use super::data::{generate_base, generate_domains, Dataset, DomainData, SyntheticSpec};
use super::model::{argmax_rows, fit_domain_model, ToyModel};

pub const ZERO_SHOT: &str = "zero_shot";
pub const ENSEMBLE: &str = "ensemble";
pub const EXPERT: &str = "expert";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub target_domain: String,
    /// Merge method name, or one of [`ZERO_SHOT`], [`ENSEMBLE`], [`EXPERT`].
    pub method: String,
    pub variant: Option<String>,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub wall_time_ms: f64,
}

impl EvalResult {
    /// `method` or `method/variant`.
    pub fn label(&self) -> String {
        match &self.variant {
            Some(v) => format!("{}/{v}", self.method),
            None => self.method.clone(),
        }
    }
}

/// Mean per-class recall over the classes present in `labels`.
pub fn balanced_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("balanced accuracy of an empty set".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut hits = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    let recalls: Vec<f64> = hits
        .iter()
        .zip(&totals)
        .filter(|(_, &t)| t > 0)
        .map(|(&h, &t)| h as f64 / t as f64)
        .collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Training schedule shared by pretraining and per-domain fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Epochs on unshifted base samples before domain fitting; 0 keeps the random init.
    pub pretrain_epochs: usize,
    pub pretrain_samples: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { pretrain_epochs: 100, pretrain_samples: 400, epochs: 300, lr: 0.5 }
    }
}

/// Shared initialization, one expert per domain, and the data they came from.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: SyntheticSpec,
    pub pre: ToyModel,
    pub experts: Vec<ToyModel>,
    pub domains: Vec<DomainData>,
}

impl Experiment {
    /// Fits sequentially in domain order, so the models depend on the seed alone.
    pub fn prepare(spec: &SyntheticSpec, fit: &FitConfig) -> Result<Self> {
        let domains = generate_domains(spec)?;
        let init = ToyModel::init(spec, spec.seed);
        let pre = if fit.pretrain_epochs > 0 {
            let base = generate_base(spec, fit.pretrain_samples)?;
            fit_domain_model(&init, &base, fit.pretrain_epochs, fit.lr)?
        } else {
            init
        };
        let experts = domains
            .iter()
            .map(|d| fit_domain_model(&pre, &d.train, fit.epochs, fit.lr))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec: spec.clone(), pre, experts, domains })
    }

    pub fn leave_one_out(&self, methods: &[MergeConfig]) -> Result<Vec<EvalResult>> {
        leave_one_out(&self.pre, &self.experts, &self.domains, methods)
    }
}

enum Cell<'a> {
    ZeroShot,
    Merge(&'a MergeConfig),
    Ensemble,
    Expert,
}

fn scores(predictions: &[usize], test: &Dataset) -> Result<(f64, f64)> {
    Ok((accuracy(predictions, &test.labels), balanced_accuracy(predictions, &test.labels)?))
}

/// Rows per target, in order: zero-shot, each method, ensemble, expert.
///
/// Merges use `λ = 1` regardless of the configured value. Cells are
/// independent and may run concurrently; the output order is fixed.
pub fn leave_one_out(
    pre: &ToyModel,
    domain_models: &[ToyModel],
    datasets: &[DomainData],
    methods: &[MergeConfig],
) -> Result<Vec<EvalResult>> {
    leave_one_out_at_lambda(pre, domain_models, datasets, methods, 1.0)
}

/// [`leave_one_out`] with every merge scaled by `lambda`, for exploration.
pub fn leave_one_out_at_lambda(
    pre: &ToyModel,
    domain_models: &[ToyModel],
    datasets: &[DomainData],
    methods: &[MergeConfig],
    lambda: f64,
) -> Result<Vec<EvalResult>> {
    let d = datasets.len();
    if d < 3 || domain_models.len() != d {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out needs at least 3 domains with one model each, got {d} datasets and {} models",
            domain_models.len()
        )));
    }
    let pre_ckpt = pre.to_checkpoint("pre");
    let ckpts: Vec<_> = domain_models
        .iter()
        .zip(datasets)
        .map(|(m, data)| m.to_checkpoint(&data.name))
        .collect();

    let mut cells = Vec::new();
    for t in 0..d {
        cells.push((t, Cell::ZeroShot));
        cells.extend(methods.iter().map(|m| (t, Cell::Merge(m))));
        cells.push((t, Cell::Ensemble));
        cells.push((t, Cell::Expert));
    }

    let rows = par_map(&cells, |(t, cell)| -> Result<EvalResult> {
        let t = *t;
        let test = &datasets[t].test;
        let sources: Vec<usize> = (0..d).filter(|&s| s != t).collect();
        let start = clock();
        let (method, variant, predictions) = match cell {
            Cell::ZeroShot => (ZERO_SHOT.to_string(), None, pre.predict(&test.inputs)?),
            Cell::Expert => (EXPERT.to_string(), None, domain_models[t].predict(&test.inputs)?),
            Cell::Ensemble => {
                let c = pre.n_classes();
                let mut sum = vec![0.0; test.len() * c];
                for &s in &sources {
                    for (acc, v) in sum.iter_mut().zip(domain_models[s].logits(&test.inputs)?) {
                        *acc += v;
                    }
                }
                let mean: Vec<f64> = sum.iter().map(|v| v / sources.len() as f64).collect();
                (ENSEMBLE.to_string(), None, argmax_rows(&mean, c))
            }
            Cell::Merge(cfg) => {
                let cfg = MergeConfig { lambda, ..**cfg };
                let fine_tuned: Vec<_> = sources.iter().map(|&s| ckpts[s].clone()).collect();
                let (merged, _) = merge_checkpoint(&pre_ckpt, &fine_tuned, &cfg)?;
                let model = ToyModel::from_checkpoint(&merged, pre.activation)?;
                let variant = (cfg.method == Method::Score).then(|| cfg.score_variant.to_string());
                (cfg.method.to_string(), variant, model.predict(&test.inputs)?)
            }
        };
        let (accuracy, balanced_accuracy) = scores(&predictions, test)?;
        Ok(EvalResult {
            target_domain: datasets[t].name.clone(),
            method,
            variant,
            accuracy,
            balanced_accuracy,
            wall_time_ms: elapsed_ms(start),
        })
    });
    rows.into_iter().collect()
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn clock() -> Option<()> {
    None
}

#[cfg(not(target_arch = "wasm32"))]
fn elapsed_ms(start: Option<std::time::Instant>) -> f64 {
    start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)
}

#[cfg(target_arch = "wasm32")]
fn elapsed_ms(_: Option<()>) -> f64 {
    0.0
}
