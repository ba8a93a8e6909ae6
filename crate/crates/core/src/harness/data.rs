//! Seeded multi-domain classification data over a shared label space.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthetic::{normal, rng_stream};
use crate::tensor::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// Domain `d` rotates every coordinate plane `(2i, 2i+1)` by `d · strength` radians.
    Rotation,
    /// Domain `d > 0` adds `strength · u_d` for a random unit vector `u_d`.
    MeanShift,
    /// Domain `d > 0` zeroes `round(strength · dim)` random coordinates (at most `dim − 1`).
    FeatureMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_domains: usize,
    pub n_classes: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub samples_per_domain: usize,
    pub shift_kind: ShiftKind,
    pub shift_strength: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_domains: 4,
            n_classes: 4,
            input_dim: 8,
            hidden_dim: 16,
            samples_per_domain: 400,
            shift_kind: ShiftKind::Rotation,
            shift_strength: PI / 6.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_domains", self.n_domains, 3),
            ("n_classes", self.n_classes, 2),
            ("input_dim", self.input_dim, 1),
            ("hidden_dim", self.hidden_dim, 1),
            ("samples_per_domain", self.samples_per_domain, 1),
        ];
        for (name, value, min) in counts {
            if value < min {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be at least {min}, got {value}"
                )));
            }
        }
        if self.samples_per_domain < 2 * self.n_classes {
            return Err(Error::InvalidArgument(format!(
                "samples_per_domain must cover a train and a test sample per class ({} < {})",
                self.samples_per_domain,
                2 * self.n_classes
            )));
        }
        if !(self.shift_strength >= 0.0 && self.shift_strength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "shift_strength must be finite and nonnegative, got {}",
                self.shift_strength
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Row-per-sample inputs with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: WeightMatrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn subset(&self, rows: &[usize]) -> Dataset {
        let dim = self.inputs.cols();
        Dataset {
            inputs: WeightMatrix::from_fn(rows.len(), dim, |i, j| self.inputs.get(rows[i], j)),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            n_classes: self.n_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
}

/// Scale of the class means relative to the unit within-class noise.
const CLASS_SEPARATION: f64 = 1.5;

fn class_means(spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    let mut r = rng_stream(spec.seed, 0);
    (0..spec.n_classes)
        .map(|_| (0..spec.input_dim).map(|_| CLASS_SEPARATION * normal(&mut r)).collect())
        .collect()
}

fn sample(
    spec: &SyntheticSpec,
    means: &[Vec<f64>],
    transform: &DomainTransform,
    n: usize,
    r: &mut impl rand::Rng,
) -> Result<Dataset> {
    let labels: Vec<usize> = (0..n).map(|i| i % spec.n_classes).collect();
    let mut data = Vec::with_capacity(n * spec.input_dim);
    for &label in &labels {
        let x: Vec<f64> = means[label].iter().map(|m| m + normal(r)).collect();
        data.extend(transform.apply(&x));
    }
    Ok(Dataset {
        inputs: WeightMatrix::new(n, spec.input_dim, data)?,
        labels,
        n_classes: spec.n_classes,
    })
}

/// Stream 0 draws the class means, stream `d + 1` the samples and transform of domain `d`.
pub fn generate_domains(spec: &SyntheticSpec) -> Result<Vec<DomainData>> {
    spec.validate()?;
    let means = class_means(spec);
    (0..spec.n_domains)
        .map(|d| {
            let mut r = rng_stream(spec.seed, d as u64 + 1);
            let transform = DomainTransform::draw(spec, d, &mut r);
            let all = sample(spec, &means, &transform, spec.samples_per_domain, &mut r)?;
            let (train_rows, test_rows) = stratified_split(&all.labels, spec.n_classes, 0.8, &mut r);
            Ok(DomainData {
                name: format!("domain{d}"),
                train: all.subset(&train_rows),
                test: all.subset(&test_rows),
            })
        })
        .collect()
}

/// `n` unshifted samples from an independent stream, used for pretraining.
pub fn generate_base(spec: &SyntheticSpec, n: usize) -> Result<Dataset> {
    spec.validate()?;
    let mut r = rng_stream(spec.seed, u64::MAX - 1);
    sample(spec, &class_means(spec), &DomainTransform::Rotation(0.0), n, &mut r)
}

/// Per class, the first `ceil(fraction · count)` shuffled rows train (keeping one for test).
fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    r: &mut impl rand::Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..n_classes {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        rows.shuffle(r);
        let cut = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len().saturating_sub(1).max(1));
        train.extend_from_slice(&rows[..cut]);
        test.extend_from_slice(&rows[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone)]
enum DomainTransform {
    Rotation(f64),
    Shift(Vec<f64>),
    Mask(Vec<bool>),
}

impl DomainTransform {
    fn draw(spec: &SyntheticSpec, domain: usize, r: &mut impl rand::Rng) -> Self {
        let dim = spec.input_dim;
        match spec.shift_kind {
            ShiftKind::Rotation => DomainTransform::Rotation((domain + 1) as f64 * spec.shift_strength),
            ShiftKind::MeanShift => {
                let u: Vec<f64> = (0..dim).map(|_| normal(r)).collect();
                let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let scale = if domain == 0 { 0.0 } else { spec.shift_strength / norm };
                DomainTransform::Shift(u.iter().map(|v| v * scale).collect())
            }
            ShiftKind::FeatureMask => {
                let masked = if domain == 0 {
                    0
                } else {
                    ((spec.shift_strength * dim as f64).round() as usize).min(dim - 1)
                };
                let mut coords: Vec<usize> = (0..dim).collect();
                coords.shuffle(r);
                let mut mask = vec![false; dim];
                for &c in &coords[..masked] {
                    mask[c] = true;
                }
                DomainTransform::Mask(mask)
            }
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            DomainTransform::Rotation(angle) => {
                let (s, c) = angle.sin_cos();
                let mut out = x.to_vec();
                for pair in out.chunks_exact_mut(2) {
                    let (a, b) = (pair[0], pair[1]);
                    pair[0] = c * a - s * b;
                    pair[1] = s * a + c * b;
                }
                out
            }
            DomainTransform::Shift(offset) => x.iter().zip(offset).map(|(a, b)| a + b).collect(),
            DomainTransform::Mask(mask) => x
                .iter()
                .zip(mask)
                .map(|(&a, &m)| if m { 0.0 } else { a })
                .collect(),
        }
    }
}

/// Rotation of `x` used by [`ShiftKind::Rotation`] for `angle` radians.
pub fn rotate_planes(x: &[f64], angle: f64) -> Vec<f64> {
    DomainTransform::Rotation(angle).apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_mean(data: &Dataset, class: usize) -> Vec<f64> {
        let rows: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        (0..data.inputs.cols())
            .map(|j| rows.iter().map(|&i| data.inputs.get(i, j)).sum::<f64>() / rows.len() as f64)
            .collect()
    }

    #[test]
    fn null_shift_is_identity() {
        for kind in [ShiftKind::Rotation, ShiftKind::MeanShift, ShiftKind::FeatureMask] {
            let spec = SyntheticSpec { shift_kind: kind, shift_strength: 0.0, ..Default::default() };
            let mut r = rng_stream(0, 1);
            for d in 0..spec.n_domains {
                let t = DomainTransform::draw(&spec, d, &mut r);
                let x = [0.3, -1.0, 2.0, 0.5, 1.0, 1.0, -2.0, 0.25];
                assert_eq!(t.apply(&x), x.to_vec(), "{kind:?} domain {d}");
            }
        }
    }

    #[test]
    fn quarter_turn_rotates_class_means() {
        let spec = SyntheticSpec {
            n_classes: 2,
            input_dim: 2,
            samples_per_domain: 4000,
            shift_strength: PI / 2.0,
            seed: 3,
            ..Default::default()
        };
        let domains = generate_domains(&spec).unwrap();
        for c in 0..2 {
            let m0 = class_mean(&domains[0].train, c);
            let m1 = class_mean(&domains[1].train, c);
            let rotated = rotate_planes(&m0, PI / 2.0);
            // sample means: agreement up to sampling noise of ~1/sqrt(1600)
            for (a, b) in rotated.iter().zip(&m1) {
                assert!((a - b).abs() < 0.2, "{rotated:?} vs {m1:?}");
            }
        }
        assert_eq!(rotate_planes(&[1.0, 0.0], PI / 2.0)[1], 1.0);
    }

    #[test]
    fn priors_uniform_and_split_stratified() {
        let spec = SyntheticSpec { samples_per_domain: 203, n_classes: 3, ..Default::default() };
        let domains = generate_domains(&spec).unwrap();
        for d in &domains {
            assert_eq!(d.train.len() + d.test.len(), 203);
            for c in 0..3 {
                let total = d.train.labels.iter().chain(&d.test.labels).filter(|&&l| l == c).count();
                // round-robin labels: counts differ by at most one
                assert!((67..=68).contains(&total));
                let train = d.train.labels.iter().filter(|&&l| l == c).count();
                assert!((train as f64 - 0.8 * total as f64).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = SyntheticSpec { shift_kind: ShiftKind::MeanShift, shift_strength: 2.0, ..Default::default() };
        assert_eq!(generate_domains(&spec).unwrap(), generate_domains(&spec).unwrap());
        assert_ne!(generate_domains(&spec).unwrap(), generate_domains(&spec.with_seed(1)).unwrap());
        assert!(SyntheticSpec { n_domains: 2, ..Default::default() }.validate().is_err());
        assert!(SyntheticSpec { shift_strength: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn feature_mask_zeroes_coordinates() {
        let spec = SyntheticSpec { shift_kind: ShiftKind::FeatureMask, shift_strength: 0.25, ..Default::default() };
        let domains = generate_domains(&spec).unwrap();
        let zero_cols = |d: &Dataset| (0..d.inputs.cols()).filter(|&j| (0..d.len()).all(|i| d.inputs.get(i, j) == 0.0)).count();
        assert_eq!(zero_cols(&domains[0].train), 0);
        assert_eq!(zero_cols(&domains[1].train), 2);
    }
}
