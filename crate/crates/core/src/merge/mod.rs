//! Layer-wise merge operators and whole-checkpoint merging.
//!
//! Every operator maps a [`DeltaSet`] to one merged delta. The scaling
//! factor `λ` is applied last, so each output is linear in `λ`.

mod baselines;
mod checkpoint;
mod score;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{merge_iso_c, merge_magmax, merge_task_arithmetic, merge_ties};
pub use checkpoint::{merge_checkpoint, merge_deltas, LayerReport, MergeReport};
pub use score::{apply_variant, build_shared_basis, merge_score, per_domain_rank, score_layer, trim_core, ScoreOutput};

use crate::error::{Error, Result};
use crate::store::DeltaSet;
use crate::tensor::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TaskArithmetic,
    Ties,
    Magmax,
    IsoC,
    Score,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::TaskArithmetic,
        Method::Ties,
        Method::Magmax,
        Method::IsoC,
        Method::Score,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TaskArithmetic => "task_arithmetic",
            Method::Ties => "ties",
            Method::Magmax => "magmax",
            Method::IsoC => "iso_c",
            Method::Score => "score",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown merge method `{s}`")))
    }
}

/// How each domain's core is treated before accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// Diagonal plus off-diagonal inliers.
    #[default]
    Trimmed,
    DiagonalOnly,
    OffdiagOnly,
    Full,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 4] = [
        ScoreVariant::Trimmed,
        ScoreVariant::DiagonalOnly,
        ScoreVariant::OffdiagOnly,
        ScoreVariant::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreVariant::Trimmed => "trimmed",
            ScoreVariant::DiagonalOnly => "diagonal_only",
            ScoreVariant::OffdiagOnly => "offdiag_only",
            ScoreVariant::Full => "full",
        }
    }
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScoreVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown score variant `{s}`")))
    }
}

pub const DEFAULT_TAU: f64 = 1.96;
pub const DEFAULT_TIES_DENSITY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeConfig {
    pub method: Method,
    pub score_variant: ScoreVariant,
    pub lambda: f64,
    pub tau: f64,
    /// Divide `σ_off` by the number of merged domains before trimming.
    pub normalize_sigma_by_domains: bool,
    pub ties_density: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            method: Method::Score,
            score_variant: ScoreVariant::Trimmed,
            lambda: 1.0,
            tau: DEFAULT_TAU,
            normalize_sigma_by_domains: false,
            ties_density: DEFAULT_TIES_DENSITY,
        }
    }
}

impl MergeConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn score(variant: ScoreVariant) -> Self {
        Self {
            method: Method::Score,
            score_variant: variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite, got {}",
                self.lambda
            )));
        }
        if !(self.ties_density > 0.0 && self.ties_density <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ties_density must lie in (0, 1], got {}",
                self.ties_density
            )));
        }
        Ok(())
    }

    /// `method` or `score/variant`.
    pub fn label(&self) -> String {
        match self.method {
            Method::Score => format!("score/{}", self.score_variant),
            m => m.to_string(),
        }
    }
}

/// Off-diagonal statistics of one domain core and what trimming kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimStats {
    pub layer_name: String,
    pub domain_id: String,
    pub mu_off: f64,
    /// Population standard deviation, after optional division by the domain count.
    pub sigma_off: f64,
    /// Zeroed off-diagonal entries over all `r(r−1)` off-diagonal entries.
    pub pruned_fraction: f64,
    pub kept_offdiag: usize,
    /// Off-diagonal entries that were nonzero and got zeroed.
    pub pruned_nonzero: usize,
}

/// Dispatches on `cfg.method`. Returns the merged delta and, for the
/// subspace merge, per-domain trim statistics.
pub fn merge_layer(deltas: &DeltaSet, cfg: &MergeConfig) -> Result<(WeightMatrix, Vec<TrimStats>)> {
    cfg.validate()?;
    match cfg.method {
        Method::TaskArithmetic => Ok((merge_task_arithmetic(deltas, cfg)?, Vec::new())),
        Method::Ties => Ok((merge_ties(deltas, cfg)?, Vec::new())),
        Method::Magmax => Ok((merge_magmax(deltas, cfg)?, Vec::new())),
        Method::IsoC => Ok((merge_iso_c(deltas, cfg)?, Vec::new())),
        Method::Score => merge_score(deltas, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        for v in ScoreVariant::ALL {
            assert_eq!(v.as_str().parse::<ScoreVariant>().unwrap(), v);
        }
        assert!("tie".parse::<Method>().is_err());
    }

    #[test]
    fn validation() {
        assert!(MergeConfig::default().validate().is_ok());
        let bad = [
            MergeConfig { tau: 0.0, ..Default::default() },
            MergeConfig { lambda: f64::NAN, ..Default::default() },
            MergeConfig { ties_density: 0.0, ..Default::default() },
            MergeConfig { ties_density: 1.5, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn defaults() {
        let cfg = MergeConfig::default();
        assert_eq!(cfg.lambda, 1.0);
        assert_eq!(cfg.tau, 1.96);
        assert!(!cfg.normalize_sigma_by_domains);
        assert_eq!(cfg.label(), "score/trimmed");
        assert_eq!(MergeConfig::with_method(Method::Ties).label(), "ties");
    }
}
