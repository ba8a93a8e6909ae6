//! Entrywise and spectral baselines: task arithmetic, TIES, MagMax, Iso-C.

use crate::error::Result;
use crate::linalg::svd;
use crate::store::DeltaSet;
use crate::tensor::WeightMatrix;

use super::MergeConfig;

/// `λ · Σ_d Δ_d`.
pub fn merge_task_arithmetic(deltas: &DeltaSet, cfg: &MergeConfig) -> Result<WeightMatrix> {
    let (m, n) = deltas.shape();
    let mut sum = vec![0.0; m * n];
    for d in deltas.deltas() {
        for (acc, v) in sum.iter_mut().zip(d.data()) {
            *acc += v;
        }
    }
    Ok(WeightMatrix::new(m, n, sum)?.scale(cfg.lambda))
}

/// Mask of the `ceil(density · N)` largest-magnitude entries; ties go to the lower index.
fn top_magnitude_mask(values: &[f64], density: f64) -> Vec<bool> {
    let n = values.len();
    let keep = ((density * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut mask = vec![false; n];
    for &i in &order[..keep] {
        mask[i] = true;
    }
    mask
}

/// Trim to the top `ties_density` entries per domain, elect a sign per entry
/// from the sum of kept values (zero sum elects `+`), then average the kept
/// values that agree with the elected sign.
pub fn merge_ties(deltas: &DeltaSet, cfg: &MergeConfig) -> Result<WeightMatrix> {
    let (m, n) = deltas.shape();
    let masks: Vec<Vec<bool>> = deltas
        .deltas()
        .iter()
        .map(|d| top_magnitude_mask(d.data(), cfg.ties_density))
        .collect();
    let mut out = vec![0.0; m * n];
    for (idx, slot) in out.iter_mut().enumerate() {
        let kept = deltas
            .deltas()
            .iter()
            .zip(&masks)
            .filter(|(_, mask)| mask[idx])
            .map(|(d, _)| d.data()[idx]);
        let total: f64 = kept.clone().sum();
        let positive = total >= 0.0;
        let (sum, count) = kept
            .filter(|&v| if positive { v > 0.0 } else { v < 0.0 })
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count > 0 {
            *slot = sum / count as f64;
        }
    }
    Ok(WeightMatrix::new(m, n, out)?.scale(cfg.lambda))
}

/// Per entry, the value of largest magnitude across domains (lowest domain index on ties).
pub fn merge_magmax(deltas: &DeltaSet, cfg: &MergeConfig) -> Result<WeightMatrix> {
    let (m, n) = deltas.shape();
    let mut out = deltas.deltas()[0].data().to_vec();
    for d in &deltas.deltas()[1..] {
        for (best, &v) in out.iter_mut().zip(d.data()) {
            if v.abs() > best.abs() {
                *best = v;
            }
        }
    }
    Ok(WeightMatrix::new(m, n, out)?.scale(cfg.lambda))
}

/// Sum of deltas with its spectrum flattened to the mean singular value.
pub fn merge_iso_c(deltas: &DeltaSet, cfg: &MergeConfig) -> Result<WeightMatrix> {
    let unit = MergeConfig { lambda: 1.0, ..*cfg };
    let sum = merge_task_arithmetic(deltas, &unit)?;
    if sum.is_zero() {
        return Ok(sum);
    }
    let mut f = svd(&sum)?;
    let mean = f.s.iter().sum::<f64>() / f.s.len() as f64;
    f.s.iter_mut().for_each(|s| *s = mean);
    Ok(f.reconstruct().scale(cfg.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gaussian_matrix, rng};

    fn set(values: &[&[f64]]) -> DeltaSet {
        let deltas = values
            .iter()
            .map(|v| WeightMatrix::new(1, v.len(), v.to_vec()).unwrap())
            .collect();
        DeltaSet::unnamed("w", deltas).unwrap()
    }

    fn dense() -> MergeConfig {
        MergeConfig {
            ties_density: 1.0,
            ..MergeConfig::default()
        }
    }

    #[test]
    fn task_arithmetic_cases() {
        let cfg = MergeConfig::default();
        let one = set(&[&[1.0, -2.0]]);
        assert_eq!(merge_task_arithmetic(&one, &cfg).unwrap().data(), &[1.0, -2.0]);
        let cancel = set(&[&[1.0, -2.0], &[-1.0, 2.0]]);
        assert!(merge_task_arithmetic(&cancel, &cfg).unwrap().is_zero());

        let mut r = rng(1);
        let ds: Vec<_> = (0..3).map(|_| gaussian_matrix(&mut r, 3, 4)).collect();
        let cfg = MergeConfig { lambda: 0.3, ..cfg };
        let out = merge_task_arithmetic(&DeltaSet::unnamed("w", ds.clone()).unwrap(), &cfg).unwrap();
        for idx in 0..12 {
            let expect = 0.3 * (ds[0].data()[idx] + ds[1].data()[idx] + ds[2].data()[idx]);
            assert!((out.data()[idx] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn ties_hand_cases() {
        assert_eq!(merge_ties(&set(&[&[1.5, -3.0], &[1.5, -3.0]]), &dense()).unwrap().data(), &[1.5, -3.0]);
        assert_eq!(merge_ties(&set(&[&[2.0], &[-2.0]]), &dense()).unwrap().data(), &[2.0]);
        assert_eq!(merge_ties(&set(&[&[3.0], &[1.0], &[-2.0]]), &dense()).unwrap().data(), &[2.0]);
        assert_eq!(merge_ties(&set(&[&[-3.0], &[1.0], &[-2.0]]), &dense()).unwrap().data(), &[-2.5]);
    }

    #[test]
    fn ties_trims_small_entries() {
        // density 0.5 keeps the two largest of four entries in each domain
        let cfg = MergeConfig { ties_density: 0.5, ..MergeConfig::default() };
        let out = merge_ties(&set(&[&[4.0, 0.1, -3.0, 0.2], &[0.1, 5.0, 0.3, -1.0]]), &cfg).unwrap();
        assert_eq!(out.data(), &[4.0, 5.0, -3.0, -1.0]);
        assert_eq!(top_magnitude_mask(&[1.0, -1.0, 1.0], 0.3), vec![true, false, false]);
    }

    #[test]
    fn magmax_cases() {
        let cfg = MergeConfig::default();
        assert_eq!(merge_magmax(&set(&[&[1.0, -5.0]]), &cfg).unwrap().data(), &[1.0, -5.0]);
        assert_eq!(merge_magmax(&set(&[&[1.0], &[-5.0]]), &cfg).unwrap().data(), &[-5.0]);
        assert_eq!(merge_magmax(&set(&[&[2.0], &[-2.0]]), &cfg).unwrap().data(), &[2.0]);
    }

    #[test]
    fn iso_c_cases() {
        let cfg = MergeConfig::default();
        let d = DeltaSet::unnamed("w", vec![WeightMatrix::from_diagonal(&[3.0, 1.0])]).unwrap();
        let out = merge_iso_c(&d, &cfg).unwrap();
        assert!((out.frobenius_norm() - 8f64.sqrt()).abs() < 1e-12);
        assert!((out.get(0, 0) - 2.0).abs() < 1e-12 && (out.get(1, 1) - 2.0).abs() < 1e-12);

        let iso = WeightMatrix::from_rows(&[[0.0, 2.0], [-2.0, 0.0]]);
        let fixed = merge_iso_c(&DeltaSet::unnamed("w", vec![iso.clone()]).unwrap(), &cfg).unwrap();
        assert!(fixed.try_sub(&iso).unwrap().frobenius_norm() < 1e-8);

        let z = DeltaSet::unnamed("w", vec![iso.clone(), iso.scale(-1.0)]).unwrap();
        assert!(merge_iso_c(&z, &cfg).unwrap().is_zero());
    }
}
