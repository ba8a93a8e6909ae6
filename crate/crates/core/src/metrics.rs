//! Overlap and conflict diagnostics between domain subspaces.
//!
//! * Subspace alignment ratio: the share of `‖Δ_i‖_F` that survives projection
//!   onto the top-`k_j` left singular subspace of `Δ_j`, with `k_j` the
//!   smallest rank whose residual energy is at most `ε²` of the total.
//! * Principal angles between orthonormal bases.
//! * Conflict maps: the accumulated core `Σ_d U⊥ᵀ Δ_d V⊥` with its energy
//!   split between the diagonal and the off-diagonal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::linalg::{change_basis, orthonormality_error, svd, truncate, SharedBasis};
use crate::store::DeltaSet;
use crate::tensor::WeightMatrix;

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Orthonormality slack for [`principal_angles`] inputs.
pub const ANGLE_INPUT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SarResult {
    pub value: f64,
    pub k_used: usize,
    pub epsilon: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )))
    }
}

/// Smallest `k` whose tail energy `Σ_{i>k} σ_i² / Σ σ_i²` is at most `ε²`.
///
/// `singular_values` must be sorted nonincreasing and not all zero.
pub fn rank_from_spectrum(singular_values: &[f64], epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::ZeroMatrix("rank selection on a zero spectrum".into()));
    }
    let budget = epsilon * epsilon;
    // tail[k] = Σ_{i>=k} σ_i², summed from the small end
    let mut tail = vec![0.0; singular_values.len() + 1];
    for i in (0..singular_values.len()).rev() {
        tail[i] = tail[i + 1] + singular_values[i] * singular_values[i];
    }
    Ok((1..=singular_values.len())
        .find(|&k| tail[k] / total <= budget)
        .unwrap_or(singular_values.len()))
}

pub fn select_rank(delta: &WeightMatrix, epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    if delta.is_zero() {
        return Err(Error::ZeroMatrix("rank selection on a zero delta".into()));
    }
    rank_from_spectrum(&svd(delta)?.s, epsilon)
}

/// Top-`k` left singular vectors of `delta`.
pub fn leading_subspace(delta: &WeightMatrix, k: usize) -> Result<WeightMatrix> {
    Ok(truncate(&svd(delta)?, k)?.u)
}

/// Alignment of `delta_i` with the top-`k` left singular subspace of `delta_j`.
pub fn sar_with_rank(delta_i: &WeightMatrix, delta_j: &WeightMatrix, k: usize) -> Result<f64> {
    if delta_i.shape() != delta_j.shape() {
        return Err(Error::Dimension(format!(
            "SAR between {:?} and {:?} deltas",
            delta_i.shape(),
            delta_j.shape()
        )));
    }
    let norm_i = delta_i.frobenius_norm();
    if norm_i == 0.0 {
        return Err(Error::ZeroMatrix("SAR of a zero delta".into()));
    }
    let u = leading_subspace(delta_j, k)?;
    // ‖U Uᵀ Δ‖_F = ‖Uᵀ Δ‖_F for orthonormal U
    Ok(u.t_matmul(delta_i)?.frobenius_norm() / norm_i)
}

pub fn sar(delta_i: &WeightMatrix, delta_j: &WeightMatrix, epsilon: f64) -> Result<SarResult> {
    if delta_i.shape() != delta_j.shape() {
        return Err(Error::Dimension(format!(
            "SAR between {:?} and {:?} deltas",
            delta_i.shape(),
            delta_j.shape()
        )));
    }
    if delta_i.is_zero() {
        return Err(Error::ZeroMatrix("SAR of a zero delta".into()));
    }
    if delta_j.is_zero() {
        return Err(Error::ZeroMatrix("SAR against a zero reference delta".into()));
    }
    let k_used = select_rank(delta_j, epsilon)?;
    Ok(SarResult {
        value: sar_with_rank(delta_i, delta_j, k_used)?,
        k_used,
        epsilon,
    })
}

/// Layers present in both maps where neither delta is identically zero.
fn shared_layers<'a>(
    a: &'a BTreeMap<String, WeightMatrix>,
    b: &'a BTreeMap<String, WeightMatrix>,
) -> Result<Vec<(&'a str, &'a WeightMatrix, &'a WeightMatrix)>> {
    let layers: Vec<_> = a
        .iter()
        .filter_map(|(name, da)| b.get(name).map(|db| (name.as_str(), da, db)))
        .filter(|(_, da, db)| !da.is_zero() && !db.is_zero())
        .collect();
    if layers.is_empty() {
        return Err(Error::InvalidArgument(
            "no shared nonzero 2-D layers between the two models".into(),
        ));
    }
    Ok(layers)
}

/// Unweighted mean of per-layer SAR over the shared nonzero layers.
pub fn sar_avg(
    deltas_i: &BTreeMap<String, WeightMatrix>,
    deltas_j: &BTreeMap<String, WeightMatrix>,
    epsilon: f64,
) -> Result<f64> {
    let layers = shared_layers(deltas_i, deltas_j)?;
    let mut total = 0.0;
    for (name, di, dj) in &layers {
        total += sar(di, dj, epsilon).map_err(|e| e.in_layer(name))?.value;
    }
    Ok(total / layers.len() as f64)
}

/// Principal angles (radians, nondecreasing) between the spans of two orthonormal bases.
pub fn principal_angles(a: &WeightMatrix, b: &WeightMatrix) -> Result<Vec<f64>> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "bases live in R^{} and R^{}",
            a.rows(),
            b.rows()
        )));
    }
    for q in [a, b] {
        let deviation = orthonormality_error(q);
        if deviation > ANGLE_INPUT_TOLERANCE {
            return Err(Error::NotOrthonormal {
                deviation,
                tolerance: ANGLE_INPUT_TOLERANCE,
            });
        }
    }
    let cosines = svd(&a.t_matmul(b)?)?.s;
    let mut angles: Vec<f64> = cosines
        .iter()
        .map(|c| c.clamp(0.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Mean principal angle between the ε-rank left subspaces of two deltas.
pub fn mean_subspace_angle(
    delta_i: &WeightMatrix,
    delta_j: &WeightMatrix,
    epsilon: f64,
) -> Result<f64> {
    let a = leading_subspace(delta_i, select_rank(delta_i, epsilon)?)?;
    let b = leading_subspace(delta_j, select_rank(delta_j, epsilon)?)?;
    let angles = principal_angles(&a, &b)?;
    Ok(angles.iter().sum::<f64>() / angles.len() as f64)
}

/// Layer-averaged [`mean_subspace_angle`].
pub fn angle_avg(
    deltas_i: &BTreeMap<String, WeightMatrix>,
    deltas_j: &BTreeMap<String, WeightMatrix>,
    epsilon: f64,
) -> Result<f64> {
    let layers = shared_layers(deltas_i, deltas_j)?;
    let mut total = 0.0;
    for (name, di, dj) in &layers {
        total += mean_subspace_angle(di, dj, epsilon).map_err(|e| e.in_layer(name))?;
    }
    Ok(total / layers.len() as f64)
}

/// A labelled `D × D` table of a pairwise metric. Row `i`, column `j` holds `metric(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub metric_name: String,
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    /// Header row of labels followed by one row of values per label.
    pub fn to_csv(&self) -> String {
        let mut out = self.labels.join(",");
        out.push('\n');
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Mean over off-diagonal cells.
    pub fn off_diagonal_mean(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return f64::NAN;
        }
        let sum: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.values[i][j])
            .sum();
        sum / (n * (n - 1)) as f64
    }
}

pub type LayerDeltas = BTreeMap<String, WeightMatrix>;

fn pairwise(
    metric_name: &str,
    models: &[(String, LayerDeltas)],
    f: impl Fn(&LayerDeltas, &LayerDeltas) -> Result<f64> + Sync + Send,
) -> Result<PairwiseMatrix> {
    let n = models.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let results = par_map(&cells, |&(i, j)| f(&models[i].1, &models[j].1));
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), r) in cells.iter().zip(results) {
        values[i][j] = r?;
    }
    Ok(PairwiseMatrix {
        metric_name: metric_name.to_string(),
        labels: models.iter().map(|(l, _)| l.clone()).collect(),
        values,
    })
}

/// Asymmetric matrix of `SAR_avg(model_i, model_j)`.
pub fn sar_matrix(models: &[(String, LayerDeltas)], epsilon: f64) -> Result<PairwiseMatrix> {
    check_epsilon(epsilon)?;
    pairwise("sar_avg", models, |a, b| sar_avg(a, b, epsilon))
}

/// Matrix of layer-averaged mean principal angles (radians).
pub fn angle_matrix(models: &[(String, LayerDeltas)], epsilon: f64) -> Result<PairwiseMatrix> {
    check_epsilon(epsilon)?;
    pairwise("mean_principal_angle", models, |a, b| angle_avg(a, b, epsilon))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictMap {
    pub layer_name: String,
    pub sigma_score: WeightMatrix,
    pub diag_energy: f64,
    pub offdiag_energy: f64,
}

impl ConflictMap {
    pub fn from_core(layer_name: impl Into<String>, sigma_score: WeightMatrix) -> Self {
        let mut diag_energy = 0.0;
        let mut offdiag_energy = 0.0;
        for i in 0..sigma_score.rows() {
            for j in 0..sigma_score.cols() {
                let e = sigma_score.get(i, j).powi(2);
                if i == j {
                    diag_energy += e;
                } else {
                    offdiag_energy += e;
                }
            }
        }
        Self {
            layer_name: layer_name.into(),
            sigma_score,
            diag_energy,
            offdiag_energy,
        }
    }

    /// Fraction of the energy on the diagonal; `NaN` for an all-zero map.
    pub fn agreement(&self) -> f64 {
        self.diag_energy / (self.diag_energy + self.offdiag_energy)
    }

    /// Plain numeric grid, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.sigma_score.rows() {
            let cells: Vec<String> = self
                .sigma_score
                .row(i)
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// `Σ_d U⊥ᵀ Δ_d V⊥` for an untrimmed view of the shared-basis conflicts.
pub fn conflict_map(deltas: &DeltaSet, basis: &SharedBasis) -> Result<ConflictMap> {
    let mut acc: Option<WeightMatrix> = None;
    for delta in deltas.deltas() {
        let core = change_basis(delta, basis)?;
        acc = Some(match acc {
            None => core,
            Some(sum) => sum.try_add(&core)?,
        });
    }
    let sigma = acc.expect("delta sets are nonempty");
    Ok(ConflictMap::from_core(deltas.layer_name.clone(), sigma))
}
