//! Dense kernels shared by the metrics and the merge engine.
//!
//! The SVD is nalgebra's bidiagonalization + implicit-shift QR, which is
//! deterministic for a fixed input. Every function here is out-of-place.

use nalgebra::linalg::SVD;

use crate::error::{Error, Result};
use crate::tensor::{WeightMatrix, WeightVector};

/// Singular values at or below `RANK_TOLERANCE · σ_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Orthonormality slack accepted by [`SharedBasis::new`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

/// Thin SVD `A = U·diag(S)·Vt` with `S` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: WeightMatrix,
    pub s: Vec<f64>,
    pub vt: WeightMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Number of singular values above `tol · σ_max`.
    pub fn effective_rank(&self, tol: f64) -> usize {
        let max = self.s.first().copied().unwrap_or(0.0);
        if max == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > tol * max).count()
    }

    /// `U·diag(S)·Vt`.
    pub fn reconstruct(&self) -> WeightMatrix {
        let us = WeightMatrix::from_fn(self.u.rows(), self.u.cols(), |i, j| {
            self.u.get(i, j) * self.s[j]
        });
        us.matmul(&self.vt).expect("factor shapes agree")
    }

    pub fn v(&self) -> WeightMatrix {
        self.vt.transpose()
    }
}

pub fn svd(a: &WeightMatrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    let max_iter = 200 * m.max(n).max(10);
    let dec = SVD::try_new(a.to_na(), true, true, f64::EPSILON, max_iter)
        .ok_or(Error::SvdConvergence { rows: m, cols: n })?;
    let u = dec.u.expect("u requested");
    let vt = dec.v_t.expect("v_t requested");
    let s = dec.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let r = order.len();
    Ok(SvdFactors {
        u: WeightMatrix::from_fn(m, r, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&k| s[k].max(0.0)).collect(),
        vt: WeightMatrix::from_fn(r, n, |i, j| vt[(order[i], j)]),
    })
}

/// Keeps the leading `k` singular triplets.
pub fn truncate(f: &SvdFactors, k: usize) -> Result<SvdFactors> {
    let r = f.rank();
    if k == 0 || k > r {
        return Err(Error::InvalidArgument(format!(
            "truncation rank {k} outside 1..={r}"
        )));
    }
    let keep: Vec<usize> = (0..k).collect();
    Ok(SvdFactors {
        u: f.u.select_columns(&keep),
        s: f.s[..k].to_vec(),
        vt: WeightMatrix::from_fn(k, f.vt.cols(), |i, j| f.vt.get(i, j)),
    })
}

/// Orthogonal polar factor `P·Qᵀ` of a tall full-rank `M = P·Σ·Qᵀ`.
///
/// This is the matrix with orthonormal columns nearest to `M` in Frobenius
/// norm. Fails when `M` is wide or its rank falls below `RANK_TOLERANCE · σ_max`.
pub fn polar_orthogonalize(m: &WeightMatrix) -> Result<WeightMatrix> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::Dimension(format!(
            "polar orthogonalization needs a tall matrix, got {rows}x{cols}"
        )));
    }
    let f = svd(m)?;
    let effective_rank = f.effective_rank(RANK_TOLERANCE);
    if effective_rank < cols {
        return Err(Error::RankDeficient {
            effective_rank,
            required: cols,
            tolerance: RANK_TOLERANCE,
        });
    }
    f.u.matmul(&f.vt)
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_error(q: &WeightMatrix) -> f64 {
    let gram = q.t_matmul(q).expect("square gram");
    gram.data()
        .iter()
        .enumerate()
        .map(|(idx, &g)| {
            let (i, j) = (idx / gram.cols(), idx % gram.cols());
            let target = if i == j { 1.0 } else { 0.0 };
            (g - target).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Left/right orthonormal bases of a merged coordinate system.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedBasis {
    u_perp: WeightMatrix,
    v_perp: WeightMatrix,
}

impl SharedBasis {
    /// Validates that both factors have orthonormal columns.
    pub fn new(u_perp: WeightMatrix, v_perp: WeightMatrix) -> Result<Self> {
        for q in [&u_perp, &v_perp] {
            let deviation = orthonormality_error(q);
            let tolerance = ORTHONORMAL_TOLERANCE * (q.cols() as f64).max(1.0);
            if deviation > tolerance {
                return Err(Error::NotOrthonormal {
                    deviation,
                    tolerance,
                });
            }
        }
        Ok(Self { u_perp, v_perp })
    }

    pub fn identity(rows: usize, cols: usize) -> Self {
        Self {
            u_perp: WeightMatrix::identity(rows),
            v_perp: WeightMatrix::identity(cols),
        }
    }

    pub fn u_perp(&self) -> &WeightMatrix {
        &self.u_perp
    }

    pub fn v_perp(&self) -> &WeightMatrix {
        &self.v_perp
    }

    /// Column count of the left factor (equal to the right one for merge bases).
    pub fn width(&self) -> usize {
        self.u_perp.cols()
    }
}

/// Expresses `delta` in the shared basis: `U⊥ᵀ·Δ·V⊥`.
pub fn change_basis(delta: &WeightMatrix, basis: &SharedBasis) -> Result<WeightMatrix> {
    let (m, n) = delta.shape();
    if basis.u_perp.rows() != m || basis.v_perp.rows() != n {
        return Err(Error::Dimension(format!(
            "basis ({}x{}, {}x{}) incompatible with {m}x{n} delta",
            basis.u_perp.rows(),
            basis.u_perp.cols(),
            basis.v_perp.rows(),
            basis.v_perp.cols()
        )));
    }
    basis.u_perp.t_matmul(delta)?.matmul(&basis.v_perp)
}

/// Maps a core back to parameter space: `U⊥·core·V⊥ᵀ`.
pub fn reconstruct(basis: &SharedBasis, core: &WeightMatrix) -> Result<WeightMatrix> {
    if core.shape() != (basis.u_perp.cols(), basis.v_perp.cols()) {
        return Err(Error::Dimension(format!(
            "core {}x{} incompatible with basis widths {}/{}",
            core.rows(),
            core.cols(),
            basis.u_perp.cols(),
            basis.v_perp.cols()
        )));
    }
    basis
        .u_perp
        .matmul(core)?
        .matmul(&basis.v_perp.transpose())
}

/// Elementwise arithmetic mean.
pub fn average_vectors(vs: &[WeightVector]) -> Result<WeightVector> {
    let first = vs
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot average zero vectors".into()))?;
    let len = first.len();
    if let Some(bad) = vs.iter().find(|v| v.len() != len) {
        return Err(Error::Dimension(format!(
            "vector lengths {len} and {} differ",
            bad.len()
        )));
    }
    let count = vs.len() as f64;
    let data = (0..len)
        .map(|i| vs.iter().map(|v| v.data()[i]).sum::<f64>() / count)
        .collect();
    WeightVector::new(data)
}
