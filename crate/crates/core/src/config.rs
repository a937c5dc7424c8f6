//! The full control-parameter vector and the named presets.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bandwidth::{BandwidthConfig, CategoricalBandwidth, MagicRule};
use crate::error::{config_err, Result};
use crate::registry::Registry;
use crate::splitting::{split_rule, SplitConfig};
use crate::weighting::WeightConfig;

/// Objective value stored in place of NaN or infinite results.
pub const DEFAULT_PENALTY: f64 = 1e300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeConfig {
    pub n_startup_trials: usize,
    pub n_ei_candidates: usize,
    pub split: SplitConfig,
    pub weights: WeightConfig,
    pub bandwidth: BandwidthConfig,
    pub multivariate: bool,
    pub consider_prior: bool,
    /// Model each subspace of a conditional space separately.
    pub group: bool,
    /// In group mode, model subspaces with fewer than two observations from
    /// whatever they have (prior included) instead of sampling at random.
    pub model_sparse_subspaces: bool,
    /// Probability of replacing the model-based suggestion by a random one.
    pub epsilon: f64,
    pub seed: u64,
    pub penalty: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        recommended()
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup_trials == 0 {
            return Err(config_err("n_startup_trials must be at least 1"));
        }
        if self.n_ei_candidates == 0 {
            return Err(config_err("n_ei_candidates must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(config_err(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.penalty.is_finite() && self.penalty > 0.0) {
            return Err(config_err("penalty must be a positive finite number"));
        }
        split_rule(&self.split)?;
        self.weights.validate()?;
        self.bandwidth.validate()
    }

    /// Applies a (possibly partial) JSON object of overrides on top of this
    /// configuration. Nested objects merge key by key.
    pub fn with_overrides(&self, overrides: &Value) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, overrides);
        let cfg: Self = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Looks up a dotted key such as `weights.rule` in the serialized config.
    pub fn lookup(&self, key: &str) -> Result<Value> {
        let v = serde_json::to_value(self)?;
        key.split('.')
            .try_fold(&v, |node, part| node.get(part))
            .cloned()
            .ok_or_else(|| config_err(format!("unknown config key `{key}`")))
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn hyperopt_bandwidth(categorical: CategoricalBandwidth) -> BandwidthConfig {
    BandwidthConfig {
        heuristic: "hyperopt".into(),
        consider_magic_clip: true,
        alpha: MagicRule::Legacy,
        delta: 0.0,
        consider_endpoints: false,
        categorical,
    }
}

fn base(split: SplitConfig, weights: &str, bandwidth: BandwidthConfig, multivariate: bool) -> TpeConfig {
    TpeConfig {
        n_startup_trials: 10,
        n_ei_candidates: 24,
        split,
        weights: WeightConfig {
            rule: weights.into(),
            ..WeightConfig::default()
        },
        bandwidth,
        multivariate,
        consider_prior: true,
        group: false,
        model_sparse_subspaces: false,
        epsilon: 0.0,
        seed: 0,
        penalty: DEFAULT_PENALTY,
    }
}

/// Recommended defaults from the ablation study.
pub fn recommended() -> TpeConfig {
    base(SplitConfig::default(), "ei", BandwidthConfig::default(), true)
}

pub fn tpe2011() -> TpeConfig {
    let split = SplitConfig {
        rule: "linear".into(),
        beta: 0.15,
        better_cap: Some(25),
    };
    base(
        split,
        "uniform",
        hyperopt_bandwidth(CategoricalBandwidth::Fixed(0.0)),
        false,
    )
}

pub fn tpe2013() -> TpeConfig {
    let split = SplitConfig {
        rule: "sqrt".into(),
        beta: 0.25,
        better_cap: Some(25),
    };
    base(
        split,
        "old_decay",
        hyperopt_bandwidth(CategoricalBandwidth::Fixed(0.0)),
        false,
    )
}

pub fn bohb() -> TpeConfig {
    let split = SplitConfig {
        rule: "linear".into(),
        beta: 0.15,
        better_cap: None,
    };
    let bandwidth = BandwidthConfig {
        heuristic: "scott".into(),
        consider_magic_clip: false,
        alpha: MagicRule::Legacy,
        delta: 1e-3,
        consider_endpoints: false,
        categorical: CategoricalBandwidth::Rule("scott".into()),
    };
    base(split, "bohb_uniform", bandwidth, true)
}

pub fn optuna() -> TpeConfig {
    let split = SplitConfig {
        rule: "linear".into(),
        beta: 0.10,
        better_cap: Some(25),
    };
    let bandwidth = BandwidthConfig {
        heuristic: "optuna".into(),
        ..hyperopt_bandwidth(CategoricalBandwidth::Rule("optuna".into()))
    };
    base(split, "old_decay", bandwidth, true)
}

/// Every suggestion is uniformly random.
pub fn random() -> TpeConfig {
    TpeConfig {
        epsilon: 1.0,
        ..recommended()
    }
}

pub static PRESETS: Registry<fn() -> TpeConfig> = Registry::new(
    "preset",
    &[
        ("recommended", recommended),
        ("tpe2011", tpe2011),
        ("tpe2013", tpe2013),
        ("bohb", bohb),
        ("optuna", optuna),
        ("random", random),
    ],
);

pub fn preset(name: &str) -> Result<TpeConfig> {
    Ok(PRESETS.get(name)?())
}
