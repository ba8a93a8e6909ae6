//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no bindings beyond `JSON.parse`. The `*_json` functions hold the
//! logic and are callable natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use subspace_merge::merge::{build_shared_basis, trim_core, MergeConfig, ScoreVariant};
use subspace_merge::metrics::{angle_matrix, conflict_map, sar_matrix, LayerDeltas};
use subspace_merge::synthetic::{delta_family, FamilyKind, FamilySpec};
use subspace_merge::{linalg, DeltaSet, Error, Result, WeightMatrix};

const MAX_DIM: usize = 96;
const MAX_MODELS: usize = 8;

fn family_kind(kind: &str) -> Result<FamilyKind> {
    match kind {
        "domain" | "domain_like" => Ok(FamilyKind::DomainLike),
        "task" | "task_like" => Ok(FamilyKind::TaskLike),
        other => Err(Error::InvalidArgument(format!("unknown family `{other}`, expected domain or task"))),
    }
}

fn family(kind: &str, n_models: usize, dim: usize, rank: usize, noise: f64, seed: u64) -> Result<Vec<LayerDeltas>> {
    if !(1..=MAX_MODELS).contains(&n_models) {
        return Err(Error::InvalidArgument(format!("n_models must lie in 1..={MAX_MODELS}")));
    }
    if !(2..=MAX_DIM).contains(&dim) || rank == 0 || rank > dim {
        return Err(Error::InvalidArgument(format!("need 2 <= dim <= {MAX_DIM} and 1 <= rank <= dim")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument("noise must be finite and nonnegative".into()));
    }
    let spec = FamilySpec { n_models, layer_shapes: vec![(dim, dim)], rank, noise };
    Ok(delta_family(family_kind(kind)?, &spec, seed))
}

fn layer_set(models: &[LayerDeltas]) -> Result<DeltaSet> {
    let deltas: Vec<WeightMatrix> = models.iter().map(|m| m["layer0.weight"].clone()).collect();
    DeltaSet::unnamed("layer0.weight", deltas)
}

fn grid(m: &WeightMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[derive(Serialize)]
struct ConflictView {
    basis_width: usize,
    agreement: f64,
    sigma_score: Vec<Vec<f64>>,
}

/// Untrimmed `Σ_d U⊥ᵀ Δ_d V⊥` of a synthetic family.
pub fn conflict_map_json(kind: &str, n_models: usize, dim: usize, rank: usize, noise: f64, seed: u64) -> Result<String> {
    let set = layer_set(&family(kind, n_models, dim, rank, noise, seed)?)?;
    let basis = build_shared_basis(&set, &MergeConfig::default())?;
    let map = conflict_map(&set, &basis)?;
    Ok(serde_json::to_string(&ConflictView {
        basis_width: basis.width(),
        agreement: map.agreement(),
        sigma_score: grid(&map.sigma_score),
    })?)
}

#[derive(Serialize)]
struct AlignmentView {
    labels: Vec<String>,
    sar: Vec<Vec<f64>>,
    angles: Vec<Vec<f64>>,
    mean_sar: f64,
    mean_angle: f64,
}

/// Pairwise alignment ratio and mean principal angle (radians) of a family.
pub fn alignment_json(kind: &str, n_models: usize, dim: usize, rank: usize, noise: f64, epsilon: f64, seed: u64) -> Result<String> {
    let labelled: Vec<(String, LayerDeltas)> = family(kind, n_models, dim, rank, noise, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, m)| (format!("model{i}"), m))
        .collect();
    let sar = sar_matrix(&labelled, epsilon)?;
    let angles = angle_matrix(&labelled, epsilon)?;
    Ok(serde_json::to_string(&AlignmentView {
        labels: sar.labels.clone(),
        mean_sar: sar.off_diagonal_mean(),
        mean_angle: angles.off_diagonal_mean(),
        sar: sar.values,
        angles: angles.values,
    })?)
}

#[derive(Serialize)]
struct TrimView {
    core: Vec<Vec<f64>>,
    /// 1 kept off-diagonal, 0 pruned, 2 diagonal.
    mask: Vec<Vec<u8>>,
    mu_off: f64,
    sigma_off: f64,
    pruned_fraction: f64,
    /// Relative Frobenius change of the merged layer against the untrimmed merge.
    merged_change: f64,
}

/// Trim mask of one domain's core under threshold `tau`.
#[allow(clippy::too_many_arguments)]
pub fn trim_json(
    kind: &str,
    n_models: usize,
    dim: usize,
    rank: usize,
    noise: f64,
    tau: f64,
    domain: usize,
    seed: u64,
) -> Result<String> {
    let set = layer_set(&family(kind, n_models, dim, rank, noise, seed)?)?;
    let delta = set
        .deltas()
        .get(domain)
        .ok_or_else(|| Error::InvalidArgument(format!("domain {domain} out of range")))?;
    let cfg = MergeConfig { tau, ..MergeConfig::default() };
    cfg.validate()?;
    let basis = build_shared_basis(&set, &cfg)?;
    let core = linalg::change_basis(delta, &basis)?;
    let (trimmed, stats) = trim_core(&core, &cfg, set.len())?;
    let mask = (0..core.rows())
        .map(|i| {
            (0..core.cols())
                .map(|j| match (i == j, trimmed.get(i, j) == core.get(i, j)) {
                    (true, _) => 2,
                    (false, true) if core.get(i, j) != 0.0 => 1,
                    _ => 0,
                })
                .collect()
        })
        .collect();
    let trimmed_merge = subspace_merge::merge::merge_score(&set, &cfg)?.0;
    let full_merge = subspace_merge::merge::merge_score(&set, &MergeConfig::score(ScoreVariant::Full))?.0;
    let denom = full_merge.frobenius_norm().max(f64::MIN_POSITIVE);
    Ok(serde_json::to_string(&TrimView {
        core: grid(&core),
        mask,
        mu_off: stats.mu_off,
        sigma_off: stats.sigma_off,
        pruned_fraction: stats.pruned_fraction,
        merged_change: trimmed_merge.try_sub(&full_merge)?.frobenius_norm() / denom,
    })?)
}

fn to_js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = conflictMap)]
pub fn conflict_map_js(kind: &str, n_models: u32, dim: u32, rank: u32, noise: f64, seed: u32) -> std::result::Result<String, JsError> {
    to_js(conflict_map_json(kind, n_models as usize, dim as usize, rank as usize, noise, seed.into()))
}

#[wasm_bindgen(js_name = alignment)]
pub fn alignment_js(
    kind: &str,
    n_models: u32,
    dim: u32,
    rank: u32,
    noise: f64,
    epsilon: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(alignment_json(kind, n_models as usize, dim as usize, rank as usize, noise, epsilon, seed.into()))
}

#[wasm_bindgen(js_name = trimMask)]
#[allow(clippy::too_many_arguments)]
pub fn trim_mask_js(
    kind: &str,
    n_models: u32,
    dim: u32,
    rank: u32,
    noise: f64,
    tau: f64,
    domain: u32,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(trim_json(kind, n_models as usize, dim as usize, rank as usize, noise, tau, domain as usize, seed.into()))
}
