//! Subspace conflict-resolving merge.
//!
//! 1. Per domain, keep the leading `max(1, ⌊min(m,n)/D⌋)` singular triplets.
//! 2. Concatenate the kept left (right) singular vectors into `U_*` (`V_*`)
//!    and replace each by its orthogonal polar factor, giving `U⊥`, `V⊥`.
//! 3. Express every delta in that basis, `Δ'_d = U⊥ᵀ Δ_d V⊥`, and process
//!    the core according to the variant (trim keeps the diagonal and the
//!    off-diagonal entries within `τ·σ_off` of `μ_off`).
//! 4. Sum the processed cores and map back: `U⊥ Σ V⊥ᵀ`, scaled by `λ`.

use crate::error::{Error, Result};
use crate::linalg::{change_basis, polar_orthogonalize, reconstruct, svd, truncate, SharedBasis};
use crate::store::DeltaSet;
use crate::tensor::WeightMatrix;

use super::{MergeConfig, ScoreVariant, TrimStats};

pub fn per_domain_rank(min_dim: usize, domains: usize) -> usize {
    (min_dim / domains.max(1)).max(1)
}

/// Shared basis of the given deltas; every delta must be nonzero.
pub fn build_shared_basis(deltas: &DeltaSet, _cfg: &MergeConfig) -> Result<SharedBasis> {
    if deltas.deltas().iter().any(WeightMatrix::is_zero) {
        return Err(Error::ZeroMatrix(format!(
            "layer `{}` has an all-zero delta; it spans no subspace",
            deltas.layer_name
        )));
    }
    let refs: Vec<&WeightMatrix> = deltas.deltas().iter().collect();
    let (m, n) = deltas.shape();
    basis_from(&refs, per_domain_rank(m.min(n), deltas.len()))
        .map_err(|e| e.in_layer(&deltas.layer_name))
}

struct Candidate {
    domain: usize,
    index: usize,
    sigma: f64,
}

fn basis_from(deltas: &[&WeightMatrix], k: usize) -> Result<SharedBasis> {
    let (m, n) = deltas[0].shape();
    let cap = m.min(n);
    let factors = deltas
        .iter()
        .map(|d| {
            let f = svd(d)?;
            let keep = k.min(f.rank());
            truncate(&f, keep)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<Candidate> = factors
        .iter()
        .enumerate()
        .flat_map(|(domain, f)| {
            f.s.iter().enumerate().map(move |(index, &sigma)| Candidate {
                domain,
                index,
                sigma,
            })
        })
        .collect();
    if columns.len() > cap {
        // keep U_* tall: retain the columns with the largest singular values
        columns.sort_by(|a, b| {
            b.sigma
                .total_cmp(&a.sigma)
                .then(a.domain.cmp(&b.domain))
                .then(a.index.cmp(&b.index))
        });
        columns.truncate(cap);
        columns.sort_by(|a, b| a.domain.cmp(&b.domain).then(a.index.cmp(&b.index)));
    }

    let r = columns.len();
    let u_star = WeightMatrix::from_fn(m, r, |i, j| {
        let c = &columns[j];
        factors[c.domain].u.get(i, c.index)
    });
    let v_star = WeightMatrix::from_fn(n, r, |i, j| {
        let c = &columns[j];
        factors[c.domain].vt.get(c.index, i)
    });
    SharedBasis::new(polar_orthogonalize(&u_star)?, polar_orthogonalize(&v_star)?)
}

fn off_diagonal_stats(core: &WeightMatrix) -> (f64, f64) {
    let r = core.rows();
    let count = (r * (r - 1)) as f64;
    let off = || {
        (0..r).flat_map(move |i| (0..r).filter(move |&j| j != i).map(move |j| core.get(i, j)))
    };
    let mu = off().sum::<f64>() / count;
    let var = off().map(|x| (x - mu).powi(2)).sum::<f64>() / count;
    (mu, var.sqrt())
}

fn process_core(
    core: &WeightMatrix,
    variant: ScoreVariant,
    cfg: &MergeConfig,
    domains: usize,
) -> (WeightMatrix, TrimStats) {
    let r = core.rows();
    let mut stats = TrimStats {
        layer_name: String::new(),
        domain_id: String::new(),
        mu_off: 0.0,
        sigma_off: 0.0,
        pruned_fraction: 0.0,
        kept_offdiag: 0,
        pruned_nonzero: 0,
    };
    if r < 2 {
        let out = match variant {
            ScoreVariant::OffdiagOnly => WeightMatrix::zeros(r, r),
            _ => core.clone(),
        };
        return (out, stats);
    }
    let (mu, mut sigma) = off_diagonal_stats(core);
    if cfg.normalize_sigma_by_domains {
        sigma /= domains as f64;
    }
    stats.mu_off = mu;
    stats.sigma_off = sigma;

    let band = cfg.tau * sigma;
    let keep_off = |x: f64| match variant {
        ScoreVariant::Trimmed => (x - mu).abs() < band,
        ScoreVariant::DiagonalOnly => false,
        ScoreVariant::OffdiagOnly | ScoreVariant::Full => true,
    };
    let keep_diag = variant != ScoreVariant::OffdiagOnly;

    let mut kept = 0;
    let mut pruned_nonzero = 0;
    let out = WeightMatrix::from_fn(r, r, |i, j| {
        let x = core.get(i, j);
        if i == j {
            return if keep_diag { x } else { 0.0 };
        }
        if keep_off(x) {
            kept += 1;
            x
        } else {
            if x != 0.0 {
                pruned_nonzero += 1;
            }
            0.0
        }
    });
    let total = r * (r - 1);
    stats.kept_offdiag = kept;
    stats.pruned_nonzero = pruned_nonzero;
    stats.pruned_fraction = (total - kept) as f64 / total as f64;
    (out, stats)
}

/// Keeps the diagonal and the off-diagonal entries `x` with `|x − μ_off| < τ·σ_off`.
///
/// `μ_off` and the population `σ_off` are taken over the core's own
/// off-diagonal entries; with `normalize_sigma_by_domains`, `σ_off` is divided
/// by `domains` first. A constant off-diagonal (`σ_off = 0`) is pruned entirely.
/// A `1×1` core passes through unchanged.
pub fn trim_core(core: &WeightMatrix, cfg: &MergeConfig, domains: usize) -> Result<(WeightMatrix, TrimStats)> {
    if !core.is_square() {
        return Err(Error::Dimension(format!(
            "trim needs a square core, got {}x{}",
            core.rows(),
            core.cols()
        )));
    }
    Ok(process_core(core, ScoreVariant::Trimmed, cfg, domains))
}

/// Processes one square core as `cfg.score_variant` prescribes.
pub fn apply_variant(core: &WeightMatrix, cfg: &MergeConfig, domains: usize) -> Result<(WeightMatrix, TrimStats)> {
    if !core.is_square() {
        return Err(Error::Dimension(format!(
            "core must be square, got {}x{}",
            core.rows(),
            core.cols()
        )));
    }
    Ok(process_core(core, cfg.score_variant, cfg, domains))
}

/// Everything one subspace merge of a layer produces.
#[derive(Debug, Clone)]
pub struct ScoreOutput {
    /// `λ · U⊥ Σ_score V⊥ᵀ`.
    pub merged: WeightMatrix,
    /// Accumulated processed cores; `None` when every delta is zero.
    pub sigma_score: Option<WeightMatrix>,
    pub basis: Option<SharedBasis>,
    pub stats: Vec<TrimStats>,
}

impl ScoreOutput {
    pub fn basis_width(&self) -> usize {
        self.basis.as_ref().map_or(0, SharedBasis::width)
    }
}

/// Runs the full subspace merge of one layer.
///
/// All-zero deltas are left out of the basis (they contribute nothing to the
/// sum) but still count towards `D` in the per-domain rank and in the
/// optional `σ_off` normalization.
pub fn score_layer(deltas: &DeltaSet, cfg: &MergeConfig) -> Result<ScoreOutput> {
    cfg.validate()?;
    let (m, n) = deltas.shape();
    let domains = deltas.len();
    let active: Vec<usize> = (0..domains)
        .filter(|&d| !deltas.deltas()[d].is_zero())
        .collect();
    if active.is_empty() {
        return Ok(ScoreOutput {
            merged: WeightMatrix::zeros(m, n),
            sigma_score: None,
            basis: None,
            stats: Vec::new(),
        });
    }
    let layer = deltas.layer_name.as_str();
    let refs: Vec<&WeightMatrix> = active.iter().map(|&d| &deltas.deltas()[d]).collect();
    let basis = basis_from(&refs, per_domain_rank(m.min(n), domains)).map_err(|e| e.in_layer(layer))?;

    let r = basis.width();
    let mut sigma_score = WeightMatrix::zeros(r, r);
    let mut stats = Vec::with_capacity(active.len());
    for &d in &active {
        let core = change_basis(&deltas.deltas()[d], &basis).map_err(|e| e.in_layer(layer))?;
        let (processed, mut s) = process_core(&core, cfg.score_variant, cfg, domains);
        s.layer_name = layer.to_string();
        s.domain_id = deltas.domain_ids()[d].clone();
        stats.push(s);
        sigma_score = sigma_score.try_add(&processed)?;
    }
    let merged = reconstruct(&basis, &sigma_score)?.scale(cfg.lambda);
    Ok(ScoreOutput {
        merged,
        sigma_score: Some(sigma_score),
        basis: Some(basis),
        stats,
    })
}

pub fn merge_score(deltas: &DeltaSet, cfg: &MergeConfig) -> Result<(WeightMatrix, Vec<TrimStats>)> {
    let out = score_layer(deltas, cfg)?;
    Ok((out.merged, out.stats))
}
