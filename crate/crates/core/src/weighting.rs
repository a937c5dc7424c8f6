//! Mixture weights for the better and worse KDEs, including the prior's
//! share and the `prior_weight` amplifier.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::registry::Registry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    /// Registered rule name: `uniform`, `old_decay`, `old_drop`, `ei`, `bohb_uniform`.
    pub rule: String,
    pub t_old: usize,
    pub prior_weight: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            rule: "ei".into(),
            t_old: 25,
            prior_weight: 1.0,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_old == 0 {
            return Err(config_err("weights.t_old must be at least 1"));
        }
        if !(self.prior_weight > 0.0 && self.prior_weight.is_finite()) {
            return Err(config_err(format!(
                "weights.prior_weight must be positive, got {}",
                self.prior_weight
            )));
        }
        WEIGHT_RULES.get(&self.rule).map(|_| ())
    }
}

/// Normalized mixture weights: the prior's (if present) and one per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub prior: Option<f64>,
    pub obs: Vec<f64>,
}

impl WeightVector {
    /// Normalizes unnormalized nonnegative weights.
    fn normalized(prior: Option<f64>, obs: Vec<f64>) -> Result<Self> {
        let total = prior.unwrap_or(0.0) + obs.iter().sum::<f64>();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::EmptyDataset("mixture has no positive weight"));
        }
        Ok(Self {
            prior: prior.map(|p| p / total),
            obs: obs.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn total(&self) -> f64 {
        self.prior.unwrap_or(0.0) + self.obs.iter().sum::<f64>()
    }

    /// Weights in basis order: prior first.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.prior.into_iter().chain(self.obs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.obs.len() + usize::from(self.prior.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn weights_uniform(n: usize, include_prior: bool) -> Result<WeightVector> {
    let m = n + usize::from(include_prior);
    if m == 0 {
        return Err(Error::EmptyDataset("uniform weights over an empty mixture"));
    }
    let w = 1.0 / m as f64;
    Ok(WeightVector {
        prior: include_prior.then_some(w),
        obs: vec![w; n],
    })
}

/// Query-order ranks `t` of the observations: 1 is the oldest, and the
/// prior (when present) takes `t = 1` ahead of every observation.
fn query_ranks(query_orders: &[usize], include_prior: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..query_orders.len()).collect();
    idx.sort_by_key(|&i| query_orders[i]);
    let mut ranks = vec![0; query_orders.len()];
    let base = 1 + usize::from(include_prior);
    for (r, i) in idx.into_iter().enumerate() {
        ranks[i] = base + r;
    }
    ranks
}

/// Older observations get linearly decaying weight; the newest `t_old`
/// entries share the maximal weight.
pub fn weights_old_decay(query_orders: &[usize], t_old: usize, include_prior: bool) -> Result<WeightVector> {
    let n = query_orders.len();
    let m = n + usize::from(include_prior);
    if m == 0 {
        return Err(Error::EmptyDataset("old-decay weights over an empty mixture"));
    }
    if m - 1 <= t_old {
        return weights_uniform(n, include_prior);
    }
    let raw = |t: usize| {
        if t > m - t_old {
            1.0
        } else {
            let tau = (t - 1) as f64 / (m - 1 - t_old) as f64;
            tau + (1.0 - tau) / m as f64
        }
    };
    let ranks = query_ranks(query_orders, include_prior);
    WeightVector::normalized(include_prior.then(|| raw(1)), ranks.into_iter().map(raw).collect())
}

/// The newest `t_old` observations (and the prior) share the weight
/// uniformly; older observations get exactly zero.
pub fn weights_old_drop(query_orders: &[usize], t_old: usize, include_prior: bool) -> Result<WeightVector> {
    let n = query_orders.len();
    if n + usize::from(include_prior) == 0 {
        return Err(Error::EmptyDataset("old-drop weights over an empty mixture"));
    }
    let first_kept = n.saturating_sub(t_old);
    let ranks = query_ranks(query_orders, false);
    let obs = ranks
        .into_iter()
        .map(|t| if t > first_kept { 1.0 } else { 0.0 })
        .collect();
    WeightVector::normalized(include_prior.then_some(1.0), obs)
}

/// Expected-improvement weights for the better group: proportional to
/// `y_gamma - y_n`, with the prior getting the mean improvement. Falls back
/// to uniform when every improvement is zero.
pub fn weights_ei(better_ys: &[f64], y_gamma: f64, include_prior: bool) -> Result<WeightVector> {
    if better_ys.iter().any(|y| !y.is_finite()) || !y_gamma.is_finite() {
        return Err(Error::MalformedData("EI weights need finite objective values".into()));
    }
    let n = better_ys.len();
    let improvements: Vec<f64> = better_ys.iter().map(|y| y_gamma - y).collect();
    if improvements.iter().any(|&d| d < 0.0) {
        return Err(Error::MalformedData("EI weights need every y <= y_gamma".into()));
    }
    let sum: f64 = improvements.iter().sum();
    if !(sum > 0.0) {
        return weights_uniform(n, include_prior);
    }
    if !include_prior {
        return Ok(WeightVector {
            prior: None,
            obs: improvements.iter().map(|d| d / sum).collect(),
        });
    }
    let denom = (1.0 + 1.0 / n as f64) * sum;
    Ok(WeightVector {
        prior: Some(sum / n as f64 / denom),
        obs: improvements.iter().map(|d| d / denom).collect(),
    })
}

/// Weights proportional to each basis' truncation mass `z_n`; `masses` is
/// in basis order (prior first when included).
pub fn weights_bohb_uniform(masses: &[f64], include_prior: bool) -> Result<WeightVector> {
    let (prior, obs) = if include_prior {
        let (p, rest) = masses
            .split_first()
            .ok_or(Error::EmptyDataset("truncation masses are empty"))?;
        (Some(*p), rest.to_vec())
    } else {
        (None, masses.to_vec())
    };
    WeightVector::normalized(prior, obs)
}

/// Multiplies the prior's weight by `prior_weight` and renormalizes.
pub fn apply_prior_weight(wv: WeightVector, prior_weight: f64) -> Result<WeightVector> {
    match wv.prior {
        None => Ok(wv),
        Some(_) if prior_weight == 1.0 => Ok(wv),
        Some(p) => WeightVector::normalized(Some(p * prior_weight), wv.obs),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Better,
    Worse,
}

/// Everything a weighting rule may look at for one group.
#[derive(Clone, Debug)]
pub struct WeightContext<'a> {
    pub group: Group,
    /// Objective values of the group members, in group order.
    pub ys: &'a [f64],
    /// Global query order (1-based trial number) of each group member.
    pub query_orders: &'a [usize],
    pub y_gamma: f64,
    pub include_prior: bool,
    /// Truncation mass of each basis (prior first when included).
    pub truncation_mass: &'a [f64],
}

pub trait WeightRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Normalized weights before the `prior_weight` amplifier.
    fn weights(&self, ctx: &WeightContext<'_>) -> Result<WeightVector>;
}

#[derive(Debug)]
pub struct Uniform;

impl WeightRule for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn weights(&self, ctx: &WeightContext<'_>) -> Result<WeightVector> {
        weights_uniform(ctx.ys.len(), ctx.include_prior)
    }
}

/// Uniform for the better group, old decay for the worse group.
#[derive(Debug)]
pub struct OldDecay {
    pub t_old: usize,
}

impl WeightRule for OldDecay {
    fn name(&self) -> &'static str {
        "old_decay"
    }

    fn weights(&self, ctx: &WeightContext<'_>) -> Result<WeightVector> {
        match ctx.group {
            Group::Better => weights_uniform(ctx.ys.len(), ctx.include_prior),
            Group::Worse => weights_old_decay(ctx.query_orders, self.t_old, ctx.include_prior),
        }
    }
}

/// Uniform for the better group, old drop for the worse group.
#[derive(Debug)]
pub struct OldDrop {
    pub t_old: usize,
}

impl WeightRule for OldDrop {
    fn name(&self) -> &'static str {
        "old_drop"
    }

    fn weights(&self, ctx: &WeightContext<'_>) -> Result<WeightVector> {
        match ctx.group {
            Group::Better => weights_uniform(ctx.ys.len(), ctx.include_prior),
            Group::Worse => weights_old_drop(ctx.query_orders, self.t_old, ctx.include_prior),
        }
    }
}

/// EI weights for the better group, uniform for the worse group.
#[derive(Debug)]
pub struct ExpectedImprovement;

impl WeightRule for ExpectedImprovement {
    fn name(&self) -> &'static str {
        "ei"
    }

    fn weights(&self, ctx: &WeightContext<'_>) -> Result<WeightVector> {
        match ctx.group {
            Group::Better => weights_ei(ctx.ys, ctx.y_gamma, ctx.include_prior),
            Group::Worse => weights_uniform(ctx.ys.len(), ctx.include_prior),
        }
    }
}

#[derive(Debug)]
pub struct BohbUniform;

impl WeightRule for BohbUniform {
    fn name(&self) -> &'static str {
        "bohb_uniform"
    }

    fn weights(&self, ctx: &WeightContext<'_>) -> Result<WeightVector> {
        weights_bohb_uniform(ctx.truncation_mass, ctx.include_prior)
    }
}

pub type WeightFactory = fn(&WeightConfig) -> Box<dyn WeightRule>;

pub static WEIGHT_RULES: Registry<WeightFactory> = Registry::new(
    "weighting rule",
    &[
        ("uniform", |_| Box::new(Uniform)),
        ("old_decay", |c| Box::new(OldDecay { t_old: c.t_old })),
        ("old_drop", |c| Box::new(OldDrop { t_old: c.t_old })),
        ("ei", |_| Box::new(ExpectedImprovement)),
        ("bohb_uniform", |_| Box::new(BohbUniform)),
    ],
);

pub fn weight_rule(cfg: &WeightConfig) -> Result<Box<dyn WeightRule>> {
    Ok(WEIGHT_RULES.get(&cfg.rule)?(cfg))
}
