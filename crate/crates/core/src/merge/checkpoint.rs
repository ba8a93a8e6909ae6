use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::par_map;
use crate::linalg::average_vectors;
use crate::store::{apply_merged, compute_deltas, Checkpoint, DeltaSet, Deltas};
use crate::tensor::Tensor;

use super::{
    merge_iso_c, merge_magmax, merge_task_arithmetic, merge_ties, score_layer, MergeConfig,
    Method, TrimStats,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: String,
    /// Merge method, or `"average"` for 1-D parameters.
    pub method: String,
    pub variant: Option<String>,
    pub shape: Vec<usize>,
    /// Shared-basis width (score) or spectrum length (iso_c).
    pub rank_used: Option<usize>,
    /// Means over domains of the per-core statistics.
    pub mu_off: Option<f64>,
    pub sigma_off: Option<f64>,
    pub pruned_fraction: Option<f64>,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trim_stats: Vec<TrimStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub config: MergeConfig,
    pub domains: Vec<String>,
    pub layers: Vec<LayerReport>,
}

#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

// no monotonic clock on wasm32-unknown-unknown
#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn merge_matrix_layer(set: &DeltaSet, cfg: &MergeConfig) -> Result<(Tensor, LayerReport)> {
    let (result, wall_time_ms) = timed(|| -> Result<_> {
        let (m, n) = set.shape();
        Ok(match cfg.method {
            Method::TaskArithmetic => (merge_task_arithmetic(set, cfg)?, None, Vec::new()),
            Method::Ties => (merge_ties(set, cfg)?, None, Vec::new()),
            Method::Magmax => (merge_magmax(set, cfg)?, None, Vec::new()),
            Method::IsoC => (merge_iso_c(set, cfg)?, Some(m.min(n)), Vec::new()),
            Method::Score => {
                let out = score_layer(set, cfg)?;
                let width = out.basis_width();
                (out.merged, Some(width), out.stats)
            }
        })
    });
    let (merged, rank_used, stats) = result.map_err(|e| e.in_layer(&set.layer_name))?;
    let report = LayerReport {
        layer: set.layer_name.clone(),
        method: cfg.method.to_string(),
        variant: (cfg.method == Method::Score).then(|| cfg.score_variant.to_string()),
        shape: vec![merged.rows(), merged.cols()],
        rank_used,
        mu_off: mean(stats.iter().map(|s| s.mu_off)),
        sigma_off: mean(stats.iter().map(|s| s.sigma_off)),
        pruned_fraction: mean(stats.iter().map(|s| s.pruned_fraction)),
        wall_time_ms,
        trim_stats: stats,
    };
    Ok((Tensor::Matrix(merged), report))
}

/// Merges every parameter: 2-D layers by `cfg.method`, 1-D ones by averaging.
///
/// Layers are independent and may run concurrently; the result does not
/// depend on the schedule. The returned deltas are already scaled by `λ`
/// for matrices; vector averages are scaled by `λ` as well.
pub fn merge_deltas(deltas: &Deltas, cfg: &MergeConfig) -> Result<(BTreeMap<String, Tensor>, Vec<LayerReport>)> {
    cfg.validate()?;
    let matrix_sets: Vec<&DeltaSet> = deltas.matrices.values().collect();
    let matrix_results = par_map(&matrix_sets, |set| merge_matrix_layer(set, cfg));

    let mut merged = BTreeMap::new();
    let mut reports = Vec::new();
    for result in matrix_results {
        let (tensor, report) = result?;
        merged.insert(report.layer.clone(), tensor);
        reports.push(report);
    }
    for (name, set) in &deltas.vectors {
        let (avg, wall_time_ms) = timed(|| average_vectors(set.deltas()));
        let avg = avg.map_err(|e| e.in_layer(name))?.scale(cfg.lambda);
        reports.push(LayerReport {
            layer: name.clone(),
            method: "average".into(),
            variant: None,
            shape: vec![avg.len()],
            rank_used: None,
            mu_off: None,
            sigma_off: None,
            pruned_fraction: None,
            wall_time_ms,
            trim_stats: Vec::new(),
        });
        merged.insert(name.clone(), Tensor::Vector(avg));
    }
    reports.sort_by(|a, b| a.layer.cmp(&b.layer));
    Ok((merged, reports))
}

/// `θ_pre + Δ_merged` for a set of fine-tuned checkpoints.
pub fn merge_checkpoint(
    pre: &Checkpoint,
    fine_tuned: &[Checkpoint],
    cfg: &MergeConfig,
) -> Result<(Checkpoint, MergeReport)> {
    let deltas = compute_deltas(fine_tuned, pre)?;
    let (merged, layers) = merge_deltas(&deltas, cfg)?;
    // λ is already folded into `merged`
    let mut out = apply_merged(pre, &merged, 1.0)?;
    out.model_id = "merged".into();
    let report = MergeReport {
        config: *cfg,
        domains: fine_tuned.iter().map(|c| c.model_id.clone()).collect(),
        layers,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gaussian_matrix, rng};
    use crate::tensor::{WeightMatrix, WeightVector};

    fn model(id: &str, seed: u64) -> Checkpoint {
        let mut r = rng(seed);
        Checkpoint::from_params(
            id,
            [
                ("a.weight", Tensor::Matrix(gaussian_matrix(&mut r, 5, 4))),
                ("b.weight", Tensor::Matrix(gaussian_matrix(&mut r, 3, 5))),
                ("b.bias", Tensor::Vector(WeightVector::new(vec![seed as f64, 1.0, -1.0]).unwrap())),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identical_models_return_pre() {
        let pre = model("pre", 1);
        let fts: Vec<_> = ["x", "y"].iter().map(|id| pre.clone().with_model_id(*id)).collect();
        for method in Method::ALL {
            let (out, report) = merge_checkpoint(&pre, &fts, &MergeConfig::with_method(method)).unwrap();
            assert_eq!(out.params(), pre.params(), "{method}");
            assert_eq!(report.layers.len(), 3);
        }
    }

    #[test]
    fn single_model_score_round_trip() {
        let pre = model("pre", 1);
        let ft = model("ft", 2);
        let (out, report) = merge_checkpoint(&pre, std::slice::from_ref(&ft), &MergeConfig::default()).unwrap();
        for (name, t) in ft.params() {
            let got = out.get(name).unwrap();
            let err: f64 = got.data().iter().zip(t.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= 1e-6 * norm, "{name}: {err}");
        }
        let a = report.layers.iter().find(|l| l.layer == "a.weight").unwrap();
        assert_eq!(a.rank_used, Some(4));
        assert_eq!(a.variant.as_deref(), Some("trimmed"));
    }

    #[test]
    fn task_arithmetic_checkpoint() {
        let pre = model("pre", 1);
        let fts = [model("x", 2), model("y", 3)];
        let cfg = MergeConfig { lambda: 0.5, ..MergeConfig::with_method(Method::TaskArithmetic) };
        let (out, _) = merge_checkpoint(&pre, &fts, &cfg).unwrap();
        let get = |c: &Checkpoint| c.get("a.weight").unwrap().as_matrix().unwrap().clone();
        let (p, x, y) = (get(&pre), get(&fts[0]), get(&fts[1]));
        let o = get(&out);
        for idx in 0..20 {
            let (pv, xv, yv) = (p.data()[idx], x.data()[idx], y.data()[idx]);
            let expect = pv + 0.5 * ((xv - pv) + (yv - pv));
            assert!((o.data()[idx] - expect).abs() < 1e-14);
        }
        let bias = out.get("b.bias").unwrap().data();
        let pb = pre.get("b.bias").unwrap().data();
        assert!((bias[0] - (pb[0] + 0.5 * ((2.0 - 1.0) + (3.0 - 1.0)) / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn failure_names_layer() {
        let pre = Checkpoint::from_params("pre", [("w", Tensor::Matrix(WeightMatrix::zeros(3, 2)))]).unwrap();
        // two identical rank-1 deltas: k = 1 each, U_* has two equal columns
        let col = WeightMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]);
        let a = Checkpoint::from_params("a", [("w", Tensor::Matrix(col.clone()))]).unwrap();
        let b = Checkpoint::from_params("b", [("w", Tensor::Matrix(col))]).unwrap();
        let err = merge_checkpoint(&pre, &[a, b], &MergeConfig::default()).unwrap_err();
        assert!(err.to_string().contains("`w`"), "{err}");
        assert!(err.is_numerical());
    }
}
