//! Top-quantile rules `gamma = Gamma(N)` and the better/worse split.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::registry::Registry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Registered rule name (`linear` or `sqrt`).
    pub rule: String,
    pub beta: f64,
    /// Upper bound on the size of the better group.
    #[serde(default)]
    pub better_cap: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            rule: "linear".into(),
            beta: 0.15,
            better_cap: None,
        }
    }
}

pub trait SplitRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// `gamma = Gamma(n)`, always in `(0, 1]`.
    fn gamma(&self, n: usize) -> f64;
}

/// `gamma = beta`
#[derive(Debug)]
pub struct Linear {
    beta: f64,
}

impl Linear {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(config_err(format!("linear gamma needs beta in (0, 1], got {beta}")));
        }
        Ok(Self { beta })
    }
}

impl SplitRule for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn gamma(&self, _n: usize) -> f64 {
        self.beta
    }
}

/// `gamma = min(beta / sqrt(N), 1)`
#[derive(Debug)]
pub struct Sqrt {
    beta: f64,
}

impl Sqrt {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(config_err(format!("sqrt gamma needs beta > 0, got {beta}")));
        }
        Ok(Self { beta })
    }
}

impl SplitRule for Sqrt {
    fn name(&self) -> &'static str {
        "sqrt"
    }

    fn gamma(&self, n: usize) -> f64 {
        (self.beta / (n.max(1) as f64).sqrt()).min(1.0)
    }
}

pub type SplitFactory = fn(f64) -> Result<Box<dyn SplitRule>>;

pub static SPLIT_RULES: Registry<SplitFactory> = Registry::new(
    "splitting rule",
    &[
        ("linear", |b| Ok(Box::new(Linear::new(b)?))),
        ("sqrt", |b| Ok(Box::new(Sqrt::new(b)?))),
    ],
);

pub fn split_rule(cfg: &SplitConfig) -> Result<Box<dyn SplitRule>> {
    SPLIT_RULES.get(&cfg.rule)?(cfg.beta)
}

/// Better/worse partition of a dataset, as indices into the input order.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    pub gamma: f64,
    /// Observations with the smallest objectives, ascending.
    pub better: Vec<usize>,
    /// The remaining observations, ascending.
    pub worse: Vec<usize>,
    /// Largest objective value in the better group.
    pub y_gamma: f64,
}

impl SplitResult {
    pub fn n_better(&self) -> usize {
        self.better.len()
    }
}

/// `ceil(gamma * n)` without letting products such as `0.15 * 20 =
/// 3.0000000000000004` round up to the next integer.
pub fn better_size(gamma: f64, n: usize) -> usize {
    let raw = gamma * n as f64;
    let nearest = raw.round();
    let n_l = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (n_l as usize).clamp(1, n)
}

/// Stable ascending sort by objective (ties keep insertion order) and split
/// into the first `min(ceil(gamma N), cap)` observations and the rest.
pub fn split(ys: &[f64], rule: &dyn SplitRule, better_cap: Option<usize>) -> Result<SplitResult> {
    let n = ys.len();
    if n == 0 {
        return Err(Error::EmptyDataset("cannot split an empty dataset"));
    }
    let gamma = rule.gamma(n);
    let mut n_better = better_size(gamma, n);
    if let Some(cap) = better_cap {
        n_better = n_better.min(cap.max(1));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    let worse = order.split_off(n_better);
    let y_gamma = ys[*order.last().unwrap()];
    Ok(SplitResult {
        gamma,
        better: order,
        worse,
        y_gamma,
    })
}
