//! Bandwidth heuristics for the numerical and categorical kernels, and the
//! (generalized) magic clipping that lower-bounds numerical bandwidths.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{config_err, Error, Result};
use crate::registry::Registry;

/// How `b_magic` is computed from the number of kernel bases `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MagicRule {
    /// `(R - L) / min(100, N)`
    Legacy,
    /// `(R - L) / N^alpha`; `alpha = inf` disables the term.
    Exponent(f64),
}

impl Serialize for MagicRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            MagicRule::Legacy => s.serialize_str("legacy"),
            MagicRule::Exponent(a) if a.is_infinite() => s.serialize_str("inf"),
            MagicRule::Exponent(a) => s.serialize_f64(a),
        }
    }
}

impl<'de> Deserialize<'de> for MagicRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => Ok(MagicRule::Exponent(a)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for MagicRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "legacy" => Ok(MagicRule::Legacy),
            "inf" | "infinity" => Ok(MagicRule::Exponent(f64::INFINITY)),
            other => other
                .parse::<f64>()
                .map(MagicRule::Exponent)
                .map_err(|_| config_err(format!("alpha must be a positive number, `inf` or `legacy`, got `{s}`"))),
        }
    }
}

impl fmt::Display for MagicRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MagicRule::Legacy => f.write_str("legacy"),
            MagicRule::Exponent(a) if a.is_infinite() => f.write_str("inf"),
            MagicRule::Exponent(a) => write!(f, "{a}"),
        }
    }
}

/// Categorical bandwidth: a fixed value or the name of a registered rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CategoricalBandwidth {
    Fixed(f64),
    Rule(String),
}

impl std::str::FromStr for CategoricalBandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<f64>() {
            Ok(b) => Ok(CategoricalBandwidth::Fixed(b)),
            Err(_) if CATEGORICAL_RULES.contains(s) => Ok(CategoricalBandwidth::Rule(s.to_string())),
            Err(_) => Err(Error::UnknownName {
                kind: CATEGORICAL_RULES.kind(),
                name: s.to_string(),
                known: CATEGORICAL_RULES.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub heuristic: String,
    pub consider_magic_clip: bool,
    pub alpha: MagicRule,
    /// Minimum bandwidth factor: `b_min >= delta * (R - L)`.
    pub delta: f64,
    pub consider_endpoints: bool,
    pub categorical: CategoricalBandwidth,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            heuristic: "hyperopt".into(),
            consider_magic_clip: true,
            alpha: MagicRule::Exponent(2.0),
            delta: 0.03,
            consider_endpoints: false,
            categorical: CategoricalBandwidth::Rule("optuna".into()),
        }
    }
}

impl BandwidthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(config_err(format!(
                "bandwidth.delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if let MagicRule::Exponent(a) = self.alpha {
            if !(a > 0.0) {
                return Err(config_err(format!("bandwidth.alpha must be positive, got {a}")));
            }
        }
        NUMERICAL_HEURISTICS.get(&self.heuristic)?;
        match &self.categorical {
            CategoricalBandwidth::Fixed(b) if !(0.0..1.0).contains(b) => {
                Err(config_err(format!("bandwidth.categorical must lie in [0, 1), got {b}")))
            }
            CategoricalBandwidth::Rule(name) => CATEGORICAL_RULES.get(name).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// Per-basis bandwidths from neighbor gaps of the sorted centers.
pub fn bw_hyperopt(sorted_centers: &[f64], low: f64, high: f64, consider_endpoints: bool) -> Result<Vec<f64>> {
    let n = sorted_centers.len();
    if n == 0 {
        return Err(Error::EmptyDataset("hyperopt bandwidth needs at least one center"));
    }
    let mut xs = Vec::with_capacity(n + 2);
    if consider_endpoints {
        xs.push(low);
    }
    xs.extend_from_slice(sorted_centers);
    if consider_endpoints {
        xs.push(high);
    }
    if xs.len() == 1 {
        // no neighbor at all: measure the gap to the domain edges instead
        let x = xs[0];
        return Ok(vec![(x - low).max(high - x)]);
    }
    let offset = usize::from(consider_endpoints);
    Ok((offset..offset + n)
        .map(|i| {
            let left = (i > 0).then(|| xs[i] - xs[i - 1]);
            let right = (i + 1 < xs.len()).then(|| xs[i + 1] - xs[i]);
            match (left, right) {
                (Some(l), Some(r)) => l.max(r),
                (Some(g), None) | (None, Some(g)) => g,
                (None, None) => unreachable!(),
            }
        })
        .collect())
}

/// Linear-interpolation (type 7) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Scott's rule: `1.059 N^(-1/5) min(sigma, IQR / 1.34)`.
///
/// `sigma` is the sample standard deviation (`N - 1` denominator); a single
/// center yields 0.
pub fn bw_scott(centers: &[f64]) -> f64 {
    let n = centers.len();
    if n < 2 {
        return 0.0;
    }
    let mean = centers.iter().sum::<f64>() / n as f64;
    let var = centers.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mut sorted = centers.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    1.059 * (n as f64).powf(-0.2) * var.sqrt().min(iqr / 1.34)
}

/// Shared numerical bandwidth `(R - L)/5 * N^(-1/(D + 4))`.
pub fn bw_optuna_numerical(n: usize, n_dims: usize, low: f64, high: f64) -> f64 {
    (high - low) / 5.0 * (n.max(1) as f64).powf(-1.0 / (n_dims as f64 + 4.0))
}

/// Categorical bandwidth `(1 + 1/N) / (1 + C/N)`.
pub fn bw_optuna_categorical(n: usize, n_choices: usize) -> f64 {
    let n = n.max(1) as f64;
    (1.0 + 1.0 / n) / (1.0 + n_choices as f64 / n)
}

/// `b_min = max(delta (R - L), b_magic)` for `n_effective` kernel bases.
pub fn min_bandwidth(low: f64, high: f64, n_effective: usize, cfg: &BandwidthConfig) -> f64 {
    let span = high - low;
    let n = n_effective.max(1) as f64;
    let magic = if !cfg.consider_magic_clip {
        0.0
    } else {
        match cfg.alpha {
            MagicRule::Legacy => span / n.min(100.0),
            MagicRule::Exponent(a) if a.is_infinite() => 0.0,
            MagicRule::Exponent(a) => span / n.powf(a),
        }
    };
    (cfg.delta * span).max(magic)
}

/// `max(raw_b, b_min)`.
pub fn magic_clip(raw_b: f64, low: f64, high: f64, n_effective: usize, cfg: &BandwidthConfig) -> f64 {
    raw_b.max(min_bandwidth(low, high, n_effective, cfg))
}

/// Centers of one numerical dimension handed to a heuristic.
#[derive(Clone, Debug)]
pub struct NumericalSample<'a> {
    /// Observation centers, in group order.
    pub centers: &'a [f64],
    /// Prior center `(L + R)/2` when the prior takes part in the mixture.
    pub prior_center: Option<f64>,
    pub low: f64,
    pub high: f64,
    /// Number of dimensions of the modeled (sub)space.
    pub n_dims: usize,
}

impl NumericalSample<'_> {
    /// Number of kernel bases including the prior.
    pub fn n_effective(&self) -> usize {
        self.centers.len() + usize::from(self.prior_center.is_some())
    }

    fn all_centers(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.prior_center.into_iter().collect();
        v.extend_from_slice(self.centers);
        v
    }
}

/// A numerical bandwidth selection heuristic.
pub trait NumericalBandwidth: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Raw (unclipped) bandwidth for each entry of `sample.centers`.
    fn raw_bandwidths(&self, sample: &NumericalSample<'_>) -> Result<Vec<f64>>;
}

#[derive(Debug)]
pub struct HyperoptBandwidth {
    pub consider_endpoints: bool,
}

impl NumericalBandwidth for HyperoptBandwidth {
    fn name(&self) -> &'static str {
        "hyperopt"
    }

    fn raw_bandwidths(&self, s: &NumericalSample<'_>) -> Result<Vec<f64>> {
        // the prior center joins the gap computation but gets no output entry
        let mut tagged: Vec<(f64, Option<usize>)> = s.prior_center.map(|c| (c, None)).into_iter().collect();
        tagged.extend(s.centers.iter().enumerate().map(|(i, &c)| (c, Some(i))));
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sorted: Vec<f64> = tagged.iter().map(|t| t.0).collect();
        let gaps = bw_hyperopt(&sorted, s.low, s.high, self.consider_endpoints)?;
        let mut out = vec![0.0; s.centers.len()];
        for ((_, idx), b) in tagged.iter().zip(gaps) {
            if let Some(i) = idx {
                out[*i] = b;
            }
        }
        Ok(out)
    }
}

#[derive(Debug)]
pub struct ScottBandwidth;

impl NumericalBandwidth for ScottBandwidth {
    fn name(&self) -> &'static str {
        "scott"
    }

    fn raw_bandwidths(&self, s: &NumericalSample<'_>) -> Result<Vec<f64>> {
        Ok(vec![bw_scott(&s.all_centers()); s.centers.len()])
    }
}

#[derive(Debug)]
pub struct OptunaBandwidth;

impl NumericalBandwidth for OptunaBandwidth {
    fn name(&self) -> &'static str {
        "optuna"
    }

    fn raw_bandwidths(&self, s: &NumericalSample<'_>) -> Result<Vec<f64>> {
        let b = bw_optuna_numerical(s.n_effective(), s.n_dims, s.low, s.high);
        Ok(vec![b; s.centers.len()])
    }
}

pub type NumericalFactory = fn(&BandwidthConfig) -> Box<dyn NumericalBandwidth>;

pub static NUMERICAL_HEURISTICS: Registry<NumericalFactory> = Registry::new(
    "bandwidth heuristic",
    &[
        ("hyperopt", |c| {
            Box::new(HyperoptBandwidth {
                consider_endpoints: c.consider_endpoints,
            })
        }),
        ("scott", |_| Box::new(ScottBandwidth)),
        ("optuna", |_| Box::new(OptunaBandwidth)),
    ],
);

pub fn numerical_heuristic(cfg: &BandwidthConfig) -> Result<Box<dyn NumericalBandwidth>> {
    Ok(NUMERICAL_HEURISTICS.get(&cfg.heuristic)?(cfg))
}

/// Bandwidth rule for the Aitchison-Aitken kernel. Returned values are
/// usable by the kernel directly: in `[0, 1)`, and 0 for a single choice.
pub trait CategoricalBandwidthRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn bandwidth(&self, centers: &[usize], n_effective: usize, n_choices: usize) -> f64;
}

#[derive(Debug)]
pub struct FixedCategorical(pub f64);

impl CategoricalBandwidthRule for FixedCategorical {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn bandwidth(&self, _: &[usize], _: usize, n_choices: usize) -> f64 {
        if n_choices == 1 {
            0.0
        } else {
            self.0
        }
    }
}

#[derive(Debug)]
pub struct OptunaCategorical;

impl CategoricalBandwidthRule for OptunaCategorical {
    fn name(&self) -> &'static str {
        "optuna"
    }

    fn bandwidth(&self, _: &[usize], n_effective: usize, n_choices: usize) -> f64 {
        if n_choices == 1 {
            0.0
        } else {
            bw_optuna_categorical(n_effective, n_choices)
        }
    }
}

/// Scott's rule on the category indices as if they were numbers, capped at
/// the uniform point `(C - 1)/C`.
#[derive(Debug)]
pub struct ScottCategorical;

impl CategoricalBandwidthRule for ScottCategorical {
    fn name(&self) -> &'static str {
        "scott"
    }

    fn bandwidth(&self, centers: &[usize], _: usize, n_choices: usize) -> f64 {
        let xs: Vec<f64> = centers.iter().map(|&c| c as f64).collect();
        bw_scott(&xs).min((n_choices - 1) as f64 / n_choices as f64)
    }
}

pub type CategoricalFactory = fn() -> Box<dyn CategoricalBandwidthRule>;

pub static CATEGORICAL_RULES: Registry<CategoricalFactory> = Registry::new(
    "categorical bandwidth rule",
    &[
        ("optuna", || Box::new(OptunaCategorical)),
        ("scott", || Box::new(ScottCategorical)),
    ],
);

pub fn categorical_rule(cfg: &BandwidthConfig) -> Result<Box<dyn CategoricalBandwidthRule>> {
    match &cfg.categorical {
        CategoricalBandwidth::Fixed(b) => Ok(Box::new(FixedCategorical(*b))),
        CategoricalBandwidth::Rule(name) => Ok(CATEGORICAL_RULES.get(name)?()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(consider: bool, alpha: MagicRule, delta: f64) -> BandwidthConfig {
        BandwidthConfig {
            consider_magic_clip: consider,
            alpha,
            delta,
            ..Default::default()
        }
    }

    #[test]
    fn hyperopt_gaps() {
        let b = bw_hyperopt(&[0.2, 0.5, 0.9], 0.0, 1.0, false).unwrap();
        assert_eq!(b.len(), 3);
        for (got, want) in b.iter().zip([0.3, 0.4, 0.4]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(bw_hyperopt(&[0.5], 0.0, 1.0, true).unwrap(), vec![0.5]);
        assert_eq!(bw_hyperopt(&[0.3, 0.3], 0.0, 1.0, false).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(bw_hyperopt(&[], 0.0, 1.0, false), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn hyperopt_endpoints_augment() {
        let b = bw_hyperopt(&[0.2, 0.5, 0.9], 0.0, 1.0, true).unwrap();
        for (got, want) in b.iter().zip([0.3, 0.4, 0.4]) {
            assert!((got - want).abs() < 1e-15);
        }
        let b = bw_hyperopt(&[0.1, 0.2], 0.0, 1.0, true).unwrap();
        assert!((b[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn hyperopt_trait_maps_back_to_input_order_and_uses_prior() {
        let h = HyperoptBandwidth {
            consider_endpoints: false,
        };
        let s = NumericalSample {
            centers: &[0.9, 0.2],
            prior_center: Some(0.5),
            low: 0.0,
            high: 1.0,
            n_dims: 1,
        };
        let b = h.raw_bandwidths(&s).unwrap();
        assert!((b[0] - 0.4).abs() < 1e-15 && (b[1] - 0.3).abs() < 1e-15, "{b:?}");
    }

    #[test]
    fn scott_reference_values() {
        assert_eq!(bw_scott(&[0.4; 5]), 0.0);
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        // sample sd of 0..9 = sqrt(110/12); type-7 IQR = 6.75 - 2.25 = 4.5
        let sigma = (110.0f64 / 12.0).sqrt();
        let expected = 1.059 * 10f64.powf(-0.2) * sigma.min(4.5 / 1.34);
        assert!((bw_scott(&xs) - expected).abs() < 1e-9);
        let scaled: Vec<f64> = xs.iter().map(|x| 3.5 * x).collect();
        assert!((bw_scott(&scaled) - 3.5 * bw_scott(&xs)).abs() < 1e-12);
    }

    #[test]
    fn optuna_numerical_values() {
        assert!((bw_optuna_numerical(1, 3, 0.0, 2.0) - 0.4).abs() < 1e-15);
        assert!((bw_optuna_numerical(32, 1, 0.0, 1.0) - 0.1).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for n in 1..200 {
            let b = bw_optuna_numerical(n, 4, 0.0, 1.0);
            assert!(b < prev && b > 0.0 && b <= 0.2);
            prev = b;
        }
    }

    #[test]
    fn optuna_categorical_values() {
        assert_eq!(bw_optuna_categorical(7, 1), 1.0);
        assert!((bw_optuna_categorical(10, 3) - 1.1 / 1.3).abs() < 1e-15);
        assert!((bw_optuna_categorical(1_000_000, 3) - 1.0).abs() < 1e-5);
        assert!(bw_optuna_categorical(3, 2) < 1.0);
        assert_eq!(OptunaCategorical.bandwidth(&[0], 5, 1), 0.0);
    }

    #[test]
    fn magic_clip_rules() {
        let legacy = cfg(true, MagicRule::Legacy, 0.0);
        assert!((magic_clip(0.001, 0.0, 1.0, 50, &legacy) - 0.02).abs() < 1e-15);
        assert!((magic_clip(0.001, 0.0, 1.0, 500, &legacy) - 0.01).abs() < 1e-15);
        let off = cfg(true, MagicRule::Exponent(f64::INFINITY), 0.0);
        assert_eq!(magic_clip(1e-7, 0.0, 1.0, 10, &off), 1e-7);
        let gen = cfg(true, MagicRule::Exponent(2.0), 0.03);
        assert!((magic_clip(0.0, 0.0, 1.0, 10, &gen) - 0.03).abs() < 1e-15);
        let no_clip = cfg(false, MagicRule::Exponent(1.0), 0.1);
        assert!((magic_clip(0.0, 0.0, 2.0, 3, &no_clip) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn categorical_scott_is_capped() {
        let b = ScottCategorical.bandwidth(&[0, 3, 0, 3, 1], 5, 4);
        assert!(b <= 0.75 && b > 0.0);
        assert_eq!(ScottCategorical.bandwidth(&[2, 2], 2, 3), 0.0);
    }

    #[test]
    fn magic_rule_text_forms() {
        assert_eq!("legacy".parse::<MagicRule>().unwrap(), MagicRule::Legacy);
        assert_eq!("inf".parse::<MagicRule>().unwrap(), MagicRule::Exponent(f64::INFINITY));
        assert_eq!("0.5".parse::<MagicRule>().unwrap(), MagicRule::Exponent(0.5));
        let json = serde_json::to_string(&MagicRule::Exponent(f64::INFINITY)).unwrap();
        assert_eq!(
            serde_json::from_str::<MagicRule>(&json).unwrap(),
            MagicRule::Exponent(f64::INFINITY)
        );
        assert!("fast".parse::<MagicRule>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(BandwidthConfig::default().validate().is_ok());
        for bad in [
            BandwidthConfig {
                delta: 1.0,
                ..Default::default()
            },
            BandwidthConfig {
                heuristic: "silverman".into(),
                ..Default::default()
            },
            BandwidthConfig {
                categorical: CategoricalBandwidth::Fixed(1.0),
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!(
            "0.8".parse::<CategoricalBandwidth>().unwrap(),
            CategoricalBandwidth::Fixed(0.8)
        );
        assert!("median".parse::<CategoricalBandwidth>().is_err());
    }
}
