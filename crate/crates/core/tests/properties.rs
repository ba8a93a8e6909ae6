use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;

use subspace_merge::linalg::{change_basis, orthonormality_error, polar_orthogonalize, reconstruct, SharedBasis};
use subspace_merge::merge::{
    build_shared_basis, merge_deltas, merge_layer, trim_core, MergeConfig, Method, ScoreVariant,
};
use subspace_merge::metrics::{sar, sar_with_rank, select_rank};
use subspace_merge::store::{apply_merged, compute_deltas, load_checkpoint, save_checkpoint};
use subspace_merge::{Checkpoint, DeltaSet, Tensor, WeightMatrix, WeightVector};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = WeightMatrix> {
    prop::collection::vec(-10.0..10.0f64, rows * cols).prop_map(move |d| WeightMatrix::new(rows, cols, d).unwrap())
}

fn shaped_matrix(max: usize) -> impl Strategy<Value = WeightMatrix> {
    (2..=max, 2..=max).prop_flat_map(|(m, n)| matrix(m, n))
}

/// `count` deltas of one shape.
fn delta_set(count: usize, max: usize) -> impl Strategy<Value = DeltaSet> {
    (2..=max, 2..=max)
        .prop_flat_map(move |(m, n)| prop::collection::vec(matrix(m, n), count))
        .prop_map(|ds| DeltaSet::unnamed("w", ds).unwrap())
}

fn rel_diff(a: &WeightMatrix, b: &WeightMatrix) -> f64 {
    a.try_sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
}

fn dense(m: &WeightMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn any_finite() -> BoxedStrategy<f64> {
    (prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO).boxed()
}

/// Finite values that `f32` represents exactly.
fn f32_values() -> BoxedStrategy<f64> {
    (-1e6f32..1e6).prop_map(f64::from).boxed()
}

fn checkpoint(values: BoxedStrategy<f64>) -> impl Strategy<Value = Checkpoint> {
    let tensor = prop_oneof![
        (1..5usize, 1..5usize).prop_flat_map({
            let values = values.clone();
            move |(m, n)| {
                prop::collection::vec(values.clone(), m * n)
                    .prop_map(move |d| Tensor::Matrix(WeightMatrix::new(m, n, d).unwrap()))
            }
        }),
        prop::collection::vec(values, 1..6).prop_map(|d| Tensor::Vector(WeightVector::new(d).unwrap())),
    ];
    prop::collection::btree_map("[a-z]{1,6}(\\.[a-z]{1,6})?", tensor, 1..5)
        .prop_map(|params: BTreeMap<String, Tensor>| Checkpoint::from_params("m", params).unwrap())
}

/// Same parameter layout as `ckpt` with fresh values.
fn sibling(ckpt: &Checkpoint, values: &[f64]) -> Checkpoint {
    let mut it = values.iter().cycle().copied();
    let params = ckpt.params().iter().map(|(name, t)| {
        let data: Vec<f64> = t.data().iter().map(|_| it.next().unwrap()).collect();
        (name.clone(), Tensor::from_shape(name, &t.shape(), data).unwrap())
    });
    Checkpoint::from_params("ft", params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn save_load_round_trip(ckpt in checkpoint(any_finite())) {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("m");
        save_checkpoint(&ckpt, &dir).unwrap();
        let loaded = load_checkpoint(&dir).unwrap();
        prop_assert_eq!(loaded.params(), ckpt.params());
    }

    #[test]
    fn delta_then_apply_is_exact(
        pre in checkpoint(f32_values()),
        fresh in prop::collection::vec(f32_values(), 1..30),
    ) {
        let ft = sibling(&pre, &fresh);
        let deltas = compute_deltas(std::slice::from_ref(&ft), &pre).unwrap();
        let (merged, _) = merge_deltas(&deltas, &MergeConfig::with_method(Method::TaskArithmetic)).unwrap();
        let back = apply_merged(&pre, &merged, 1.0).unwrap();
        prop_assert_eq!(back.params(), ft.params());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sar_ignores_scale(
        (a, b) in (2..=12usize, 2..=12usize).prop_flat_map(|(m, n)| (matrix(m, n), matrix(m, n))),
        si in 1e-3..1e3f64,
        sj in 1e-3..1e3f64,
    ) {
        prop_assume!(!a.is_zero() && !b.is_zero());
        let base = sar(&a, &b, 0.1).unwrap();
        let scaled = sar(&a.scale(si), &b.scale(sj), 0.1).unwrap();
        prop_assert_eq!(base.k_used, scaled.k_used);
        prop_assert!((base.value - scaled.value).abs() < 1e-9);
    }

    #[test]
    fn sar_grows_with_rank(
        (a, b) in (2..=12usize, 2..=12usize).prop_flat_map(|(m, n)| (matrix(m, n), matrix(m, n))),
    ) {
        prop_assume!(!a.is_zero());
        let values: Vec<f64> = (1..=a.min_dim()).map(|k| sar_with_rank(&a, &b, k).unwrap()).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        prop_assert!(values.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn rank_shrinks_as_epsilon_grows(a in shaped_matrix(14)) {
        prop_assume!(!a.is_zero());
        let ranks: Vec<usize> = [0.01, 0.05, 0.1, 0.3, 0.6].iter().map(|&e| select_rank(&a, e).unwrap()).collect();
        prop_assert!(ranks.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(ranks[0] <= a.min_dim());
    }

    #[test]
    fn merge_ignores_domain_order(set in delta_set(3, 10), variant in prop::sample::select(ScoreVariant::ALL.to_vec())) {
        let cfg = MergeConfig::score(variant);
        let a = merge_layer(&set, &cfg).unwrap().0;
        let b = merge_layer(&set.permuted(&[2, 0, 1]).unwrap(), &cfg).unwrap().0;
        prop_assert!(rel_diff(&b, &a) < 1e-8, "{}", rel_diff(&b, &a));
    }

    #[test]
    fn trim_splits_core(core in (2..=20usize).prop_flat_map(|r| matrix(r, r)), tau in 0.2..4.0f64) {
        let cfg = MergeConfig { tau, ..MergeConfig::default() };
        let (trimmed, stats) = trim_core(&core, &cfg, 1).unwrap();
        let r = core.rows();
        let off: Vec<f64> = (0..r).flat_map(|i| (0..r).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| core.get(i, j))
            .collect();
        let mu = off.iter().sum::<f64>() / off.len() as f64;
        let sigma = (off.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / off.len() as f64).sqrt();
        let mut kept = 0;
        for i in 0..r {
            for j in 0..r {
                let (x, t) = (core.get(i, j), trimmed.get(i, j));
                if i == j {
                    prop_assert_eq!(t, x);
                } else if (x - mu).abs() < tau * sigma * (1.0 - 1e-12) {
                    prop_assert_eq!(t, x);
                    kept += 1;
                } else if (x - mu).abs() > tau * sigma * (1.0 + 1e-12) {
                    prop_assert_eq!(t, 0.0);
                } else if t != 0.0 {
                    // within rounding of the boundary either outcome is fine
                    kept += 1;
                }
            }
        }
        prop_assert_eq!(kept, stats.kept_offdiag);
        let pruned = (r * (r - 1) - kept) as f64 / (r * (r - 1)) as f64;
        prop_assert!((stats.pruned_fraction - pruned).abs() < 1e-15);
    }

    #[test]
    fn lambda_scales_every_method(
        set in delta_set(3, 8),
        method in prop::sample::select(Method::ALL.to_vec()),
        lambda in -3.0..3.0f64,
    ) {
        let unit = merge_layer(&set, &MergeConfig::with_method(method)).unwrap().0;
        let scaled = merge_layer(&set, &MergeConfig { lambda, ..MergeConfig::with_method(method) }).unwrap().0;
        let expected = unit.scale(lambda);
        let err = scaled.try_sub(&expected).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-10 * (1.0 + unit.frobenius_norm() * lambda.abs()), "{err}");
    }

    #[test]
    fn polar_is_idempotent(m in (2..=12usize).prop_flat_map(|rows| (1..=rows).prop_flat_map(move |cols| matrix(rows, cols)))) {
        let q = match polar_orthogonalize(&m) {
            Ok(q) => q,
            Err(_) => return Ok(()),
        };
        prop_assert!(orthonormality_error(&q) < 1e-10);
        let again = polar_orthogonalize(&q).unwrap();
        prop_assert!(rel_diff(&again, &q) < 1e-10);
    }

    #[test]
    fn core_round_trip_is_double_projection(set in delta_set(3, 10)) {
        prop_assume!(set.deltas().iter().all(|d| !d.is_zero()));
        let basis: SharedBasis = match build_shared_basis(&set, &MergeConfig::default()) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let (u, v) = (dense(basis.u_perp()), dense(basis.v_perp()));
        for delta in set.deltas() {
            let back = reconstruct(&basis, &change_basis(delta, &basis).unwrap()).unwrap();
            let oracle = &u * u.transpose() * dense(delta) * &v * v.transpose();
            let err = (dense(&back) - &oracle).norm() / oracle.norm().max(1e-300);
            prop_assert!(err < 1e-10 || oracle.norm() < 1e-12, "{err}");
        }
    }
}
