//! Seeded random matrices and synthetic delta families.
//!
//! "Domain-like" families share one dominant singular subspace per layer and
//! differ only by their spectra plus small idiosyncratic noise. "Task-like"
//! families give every model its own dominant subspace, disjoint from the
//! others whenever the dimensions leave room for it.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::WeightMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for `(seed, stream)`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> WeightMatrix {
    WeightMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// `rows × cols` matrix with orthonormal columns (`cols ≤ rows`), from the QR of a Gaussian draw.
pub fn random_orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> WeightMatrix {
    assert!(cols <= rows, "need cols <= rows");
    let g = gaussian_matrix(rng, rows, cols);
    let qr = DMatrix::from_row_slice(rows, cols, g.data()).qr();
    let (q, r) = qr.unpack();
    // sign-fix so the draw is Haar distributed and deterministic
    WeightMatrix::from_fn(rows, cols, |i, j| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    DomainLike,
    TaskLike,
}

/// Shape and strength of a synthetic delta family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub n_models: usize,
    pub layer_shapes: Vec<(usize, usize)>,
    /// Rank of each model's dominant component.
    pub rank: usize,
    /// Frobenius norm of the idiosyncratic noise relative to the dominant part.
    pub noise: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            n_models: 4,
            layer_shapes: vec![(24, 16), (16, 16), (12, 20)],
            rank: 3,
            noise: 0.1,
        }
    }
}

/// One `layer name → delta` map per model.
pub fn delta_family(
    kind: FamilyKind,
    spec: &FamilySpec,
    seed: u64,
) -> Vec<BTreeMap<String, WeightMatrix>> {
    let mut r = rng(seed);
    let mut models = vec![BTreeMap::new(); spec.n_models];
    for (layer, &(m, n)) in spec.layer_shapes.iter().enumerate() {
        let k = spec.rank.min(m).min(n);
        let name = format!("layer{layer}.weight");
        let shared = (random_orthonormal(&mut r, m, k), random_orthonormal(&mut r, n, k));
        let room = spec.n_models * k <= m.min(n);
        let (task_u, task_v) = if room {
            (
                Some(random_orthonormal(&mut r, m, spec.n_models * k)),
                Some(random_orthonormal(&mut r, n, spec.n_models * k)),
            )
        } else {
            (None, None)
        };
        for (d, model) in models.iter_mut().enumerate() {
            let (u, v) = match kind {
                FamilyKind::DomainLike => shared.clone(),
                FamilyKind::TaskLike => match (&task_u, &task_v) {
                    (Some(tu), Some(tv)) => {
                        let cols: Vec<usize> = (d * k..(d + 1) * k).collect();
                        (tu.select_columns(&cols), tv.select_columns(&cols))
                    }
                    _ => (random_orthonormal(&mut r, m, k), random_orthonormal(&mut r, n, k)),
                },
            };
            let spectrum: Vec<f64> = (0..k)
                .map(|i| (1.0 + r.random::<f64>()) / (1.0 + i as f64))
                .collect();
            let dominant = u
                .matmul(&WeightMatrix::from_diagonal(&spectrum))
                .and_then(|us| us.matmul(&v.transpose()))
                .expect("shapes agree");
            let noise = gaussian_matrix(&mut r, m, n);
            let scale = spec.noise * dominant.frobenius_norm() / noise.frobenius_norm();
            let delta = dominant
                .zip_with(&noise, |a, b| a + scale * b)
                .expect("same shape");
            model.insert(name.clone(), delta);
        }
    }
    models
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_error;

    #[test]
    fn orthonormal_draws() {
        let mut r = rng(1);
        let q = random_orthonormal(&mut r, 7, 4);
        assert!(orthonormality_error(&q) < 1e-12);
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<f64> = (0..4).map(|_| normal(&mut rng_stream(3, 1))).collect();
        let b: Vec<f64> = (0..4).map(|_| normal(&mut rng_stream(3, 1))).collect();
        assert_eq!(a, b);
        let c = normal(&mut rng_stream(3, 2));
        assert_ne!(a[0], c);
    }

    #[test]
    fn family_shapes() {
        let spec = FamilySpec::default();
        let fam = delta_family(FamilyKind::TaskLike, &spec, 4);
        assert_eq!(fam.len(), spec.n_models);
        for model in &fam {
            let shapes: Vec<_> = model.values().map(WeightMatrix::shape).collect();
            assert_eq!(shapes, spec.layer_shapes);
        }
    }
}
