//! Parameter domains, value transforms, random sampling and tree-structured
//! (conditional) search spaces.
//!
//! Values inside a [`Configuration`] live in the *transformed* space: log is
//! applied to log-scale continuous parameters, discrete-grid and categorical
//! parameters are stored as integer indices. Inactive conditional parameters
//! are `None`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{config_err, domain_err, Error, Result};

const GRID_TOLERANCE: f64 = 1e-9;

/// A single value in transformed space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Real(f64),
    Index(usize),
}

impl ParamValue {
    pub fn as_real(self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(v),
            ParamValue::Index(_) => None,
        }
    }

    pub fn as_index(self) -> Option<usize> {
        match self {
            ParamValue::Index(i) => Some(i),
            ParamValue::Real(_) => None,
        }
    }
}

/// Domain of one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamDomain {
    Continuous {
        low: f64,
        high: f64,
        log_scale: bool,
    },
    /// The grid `{low, low + step, ..., low + (count - 1) * step}`.
    DiscreteGrid {
        low: f64,
        step: f64,
        count: usize,
    },
    Categorical {
        n_choices: usize,
    },
}

impl ParamDomain {
    pub fn continuous(low: f64, high: f64, log_scale: bool) -> Result<Self> {
        let d = ParamDomain::Continuous { low, high, log_scale };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(low: f64, step: f64, count: usize) -> Result<Self> {
        let d = ParamDomain::DiscreteGrid { low, step, count };
        d.validate()?;
        Ok(d)
    }

    pub fn categorical(n_choices: usize) -> Result<Self> {
        let d = ParamDomain::Categorical { n_choices };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ParamDomain::Continuous { low, high, log_scale } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(config_err(format!(
                        "continuous domain needs low < high, got [{low}, {high}]"
                    )));
                }
                if log_scale && low <= 0.0 {
                    return Err(config_err(format!("log-scale domain needs low > 0, got {low}")));
                }
            }
            ParamDomain::DiscreteGrid { low, step, count } => {
                if !(low.is_finite() && step.is_finite() && step > 0.0) {
                    return Err(config_err(format!(
                        "discrete grid needs finite low and step > 0, got low={low} step={step}"
                    )));
                }
                if count == 0 {
                    return Err(config_err("discrete grid needs at least one point"));
                }
            }
            ParamDomain::Categorical { n_choices } => {
                if n_choices == 0 {
                    return Err(config_err("categorical parameter needs at least one choice"));
                }
            }
        }
        Ok(())
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, ParamDomain::Categorical { .. })
    }

    /// Bounds `[L, R]` of the numeric axis the kernels work on: the
    /// transformed interval for continuous parameters, the real grid extent
    /// `R = L + (K - 1) q` for discrete ones.
    pub fn numeric_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ParamDomain::Continuous { low, high, log_scale } => {
                Some(if log_scale { (low.ln(), high.ln()) } else { (low, high) })
            }
            ParamDomain::DiscreteGrid { low, step, count } => Some((low, low + (count - 1) as f64 * step)),
            ParamDomain::Categorical { .. } => None,
        }
    }

    /// Maps a raw (user-facing) value into transformed space.
    pub fn transform(&self, raw: f64) -> Result<ParamValue> {
        match *self {
            ParamDomain::Continuous { low, high, log_scale } => {
                if !(low..=high).contains(&raw) {
                    return Err(domain_err("continuous parameter", raw));
                }
                Ok(ParamValue::Real(if log_scale { raw.ln() } else { raw }))
            }
            ParamDomain::DiscreteGrid { low, step, count } => {
                let pos = (raw - low) / step;
                let idx = pos.round();
                if !(pos - idx).abs().le(&GRID_TOLERANCE) || idx < 0.0 || idx >= count as f64 {
                    return Err(domain_err("discrete grid", raw));
                }
                Ok(ParamValue::Index(idx as usize))
            }
            ParamDomain::Categorical { n_choices } => {
                if raw < 0.0 || raw.fract() != 0.0 || raw >= n_choices as f64 {
                    return Err(domain_err("categorical index", raw));
                }
                Ok(ParamValue::Index(raw as usize))
            }
        }
    }

    /// Inverse of [`ParamDomain::transform`].
    pub fn untransform(&self, value: ParamValue) -> Result<f64> {
        if !self.contains(value) {
            let v = match value {
                ParamValue::Real(v) => v,
                ParamValue::Index(i) => i as f64,
            };
            return Err(domain_err("transformed value", v));
        }
        Ok(match (*self, value) {
            (ParamDomain::Continuous { low, high, log_scale }, ParamValue::Real(v)) => {
                if log_scale {
                    v.exp().clamp(low, high)
                } else {
                    v
                }
            }
            (ParamDomain::DiscreteGrid { low, step, .. }, ParamValue::Index(i)) => low + i as f64 * step,
            (ParamDomain::Categorical { .. }, ParamValue::Index(i)) => i as f64,
            _ => unreachable!("contains() checked the variant"),
        })
    }

    /// Whether a transformed value belongs to this domain.
    pub fn contains(&self, value: ParamValue) -> bool {
        match (*self, value) {
            (ParamDomain::Continuous { .. }, ParamValue::Real(v)) => {
                let (lo, hi) = self.numeric_bounds().unwrap();
                (lo..=hi).contains(&v)
            }
            (ParamDomain::DiscreteGrid { count, .. }, ParamValue::Index(i)) => i < count,
            (ParamDomain::Categorical { n_choices }, ParamValue::Index(i)) => i < n_choices,
            _ => false,
        }
    }

    /// Uniform draw over the transformed domain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match *self {
            ParamDomain::Continuous { .. } => {
                let (lo, hi) = self.numeric_bounds().unwrap();
                let u: f64 = rng.random();
                ParamValue::Real((lo + (hi - lo) * u).clamp(lo, hi))
            }
            ParamDomain::DiscreteGrid { count, .. } => ParamValue::Index(rng.random_range(0..count)),
            ParamDomain::Categorical { n_choices } => ParamValue::Index(rng.random_range(0..n_choices)),
        }
    }
}

/// Parameter kind as written in a search-space JSON file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Continuous,
    Discrete,
    Categorical,
}

/// One entry of a search-space JSON file.
///
/// ```json
/// {"name": "lr", "type": "continuous", "low": 1e-5, "high": 1.0, "log": true}
/// {"name": "opt", "type": "categorical", "choices": ["adam", "sgd"]}
/// {"name": "beta1", "type": "continuous", "low": 0.0, "high": 1.0, "condition": "opt == adam"}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub log: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

impl ParamSpec {
    pub fn continuous(name: &str, low: f64, high: f64) -> Self {
        Self::bare(name, ParamKind::Continuous, Some(low), Some(high))
    }

    pub fn log_continuous(name: &str, low: f64, high: f64) -> Self {
        ParamSpec {
            log: true,
            ..Self::continuous(name, low, high)
        }
    }

    pub fn discrete(name: &str, low: f64, high: f64, step: f64) -> Self {
        ParamSpec {
            step: Some(step),
            ..Self::bare(name, ParamKind::Discrete, Some(low), Some(high))
        }
    }

    pub fn categorical<V: Into<Value>>(name: &str, choices: impl IntoIterator<Item = V>) -> Self {
        ParamSpec {
            choices: Some(choices.into_iter().map(Into::into).collect()),
            ..Self::bare(name, ParamKind::Categorical, None, None)
        }
    }

    pub fn when(mut self, condition: &str) -> Self {
        self.condition = Some(condition.to_string());
        self
    }

    fn bare(name: &str, kind: ParamKind, low: Option<f64>, high: Option<f64>) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind,
            low,
            high,
            log: false,
            step: None,
            choices: None,
            condition: None,
        }
    }

    fn domain(&self) -> Result<ParamDomain> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| config_err(format!("parameter `{}` is missing `{key}`", self.name)))
        };
        match self.kind {
            ParamKind::Continuous => {
                ParamDomain::continuous(need(self.low, "low")?, need(self.high, "high")?, self.log)
            }
            ParamKind::Discrete => {
                let (low, high, step) = (
                    need(self.low, "low")?,
                    need(self.high, "high")?,
                    need(self.step, "step")?,
                );
                if !(step > 0.0) || high < low {
                    return Err(config_err(format!(
                        "parameter `{}` needs step > 0 and high >= low",
                        self.name
                    )));
                }
                let span = (high - low) / step;
                if (span - span.round()).abs() > GRID_TOLERANCE * span.max(1.0) {
                    return Err(config_err(format!(
                        "parameter `{}`: (high - low) is not a multiple of step",
                        self.name
                    )));
                }
                ParamDomain::discrete(low, step, span.round() as usize + 1)
            }
            ParamKind::Categorical => {
                let n = self.choices.as_ref().map_or(0, Vec::len);
                ParamDomain::categorical(n)
                    .map_err(|_| config_err(format!("parameter `{}` needs non-empty `choices`", self.name)))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Comparison {
    Eq,
    Ge,
}

/// Activation predicate of a conditional parameter on a single parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub parent: usize,
    op: Comparison,
    target: f64,
}

impl Condition {
    /// A parameter whose parent is inactive is inactive itself.
    fn holds(&self, parent_domain: &ParamDomain, parent: Option<ParamValue>) -> bool {
        let Some(value) = parent else { return false };
        let Ok(raw) = parent_domain.untransform(value) else {
            return false;
        };
        match self.op {
            Comparison::Eq => (raw - self.target).abs() <= 1e-12 * self.target.abs().max(1.0),
            Comparison::Ge => raw >= self.target,
        }
    }
}

/// A named parameter together with its domain and optional activation condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub domain: ParamDomain,
    pub labels: Option<Vec<Value>>,
    pub condition: Option<Condition>,
}

/// A configuration in transformed space; `None` marks an inactive parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub values: Vec<Option<ParamValue>>,
}

impl Configuration {
    pub fn new(values: Vec<Option<ParamValue>>) -> Self {
        Self { values }
    }

    /// Indices of the active (non-null) dimensions.
    pub fn active_dims(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
            .collect()
    }

    pub fn get(&self, dim: usize) -> Option<ParamValue> {
        self.values.get(dim).copied().flatten()
    }
}

/// One group produced by [`SearchSpace::enumerate_subspaces`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subspace {
    /// Sorted indices of the active dimensions.
    pub dims: Vec<usize>,
    /// Indices into the dataset of the observations with exactly this pattern.
    pub members: Vec<usize>,
}

/// Ordered list of parameters with activation conditions forming a tree.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    params: Vec<Param>,
    order: Vec<usize>,
}

impl SearchSpace {
    pub fn new(specs: Vec<ParamSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(config_err("search space needs at least one parameter"));
        }
        let mut index = HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.name.clone(), i).is_some() {
                return Err(config_err(format!("duplicate parameter name `{}`", s.name)));
            }
        }
        let mut params = Vec::with_capacity(specs.len());
        for s in &specs {
            params.push(Param {
                name: s.name.clone(),
                domain: s.domain()?,
                labels: s.choices.clone(),
                condition: None,
            });
        }
        for (i, s) in specs.iter().enumerate() {
            if let Some(text) = &s.condition {
                let cond = parse_condition(text, &index, &params)?;
                if cond.parent == i {
                    return Err(config_err(format!("parameter `{}` conditions on itself", s.name)));
                }
                params[i].condition = Some(cond);
            }
        }
        let order = topological_order(&params)?;
        Ok(SearchSpace { params, order })
    }

    /// Parses either a bare JSON array of parameters or `{"params": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrapped {
            params: Vec<ParamSpec>,
        }
        let value: Value = serde_json::from_str(text)?;
        let specs: Vec<ParamSpec> = if value.is_array() {
            serde_json::from_value(value)?
        } else {
            serde_json::from_value::<Wrapped>(value)?.params
        };
        Self::new(specs)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Dimensions in dependency order: parents precede their children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn has_conditions(&self) -> bool {
        self.params.iter().any(|p| p.condition.is_some())
    }

    /// Whether dimension `dim` is active given the (partially filled) values.
    pub fn is_active(&self, dim: usize, values: &[Option<ParamValue>]) -> bool {
        match &self.params[dim].condition {
            None => true,
            Some(c) => c.holds(&self.params[c.parent].domain, values[c.parent]),
        }
    }

    /// Draws a configuration uniformly over the transformed domain, resolving
    /// conditional parameters in dependency order.
    pub fn random_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        self.complete(vec![None; self.dim()], &[], rng)
    }

    /// Fills a configuration in dependency order. Dimensions listed in `fixed`
    /// keep the value present in `values` when active; other active
    /// dimensions are drawn uniformly; inactive ones become `None`.
    pub fn complete<R: Rng + ?Sized>(
        &self,
        mut values: Vec<Option<ParamValue>>,
        fixed: &[usize],
        rng: &mut R,
    ) -> Configuration {
        for &d in &self.order {
            if !self.is_active(d, &values) {
                values[d] = None;
            } else if !(fixed.contains(&d) && values[d].is_some()) {
                values[d] = Some(self.params[d].domain.sample(rng));
            }
        }
        Configuration { values }
    }

    /// Checks that a configuration has the right length, in-domain values,
    /// and a null pattern consistent with the activation conditions.
    pub fn check(&self, config: &Configuration) -> Result<()> {
        if config.values.len() != self.dim() {
            return Err(Error::MalformedData(format!(
                "configuration has {} values, search space has {} parameters",
                config.values.len(),
                self.dim()
            )));
        }
        for (d, p) in self.params.iter().enumerate() {
            let active = self.is_active(d, &config.values);
            match config.values[d] {
                Some(v) if !active => {
                    return Err(Error::MalformedData(format!(
                        "parameter `{}` has value {v:?} but its condition is not met",
                        p.name
                    )))
                }
                None if active => {
                    return Err(Error::MalformedData(format!(
                        "parameter `{}` is active but has no value",
                        p.name
                    )))
                }
                Some(v) if !p.domain.contains(v) => {
                    return Err(Error::MalformedData(format!(
                        "parameter `{}` value {v:?} is outside its domain",
                        p.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Groups observations by their exact set of active dimensions. Each
    /// observation lands in exactly one group; groups appear in order of
    /// first occurrence.
    pub fn enumerate_subspaces<'a>(
        &self,
        configs: impl IntoIterator<Item = &'a Configuration>,
    ) -> Result<Vec<Subspace>> {
        let mut groups: Vec<Subspace> = Vec::new();
        let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
        for (n, config) in configs.into_iter().enumerate() {
            self.check(config)?;
            let dims = config.active_dims();
            match lookup.get(&dims) {
                Some(&g) => groups[g].members.push(n),
                None => {
                    lookup.insert(dims.clone(), groups.len());
                    groups.push(Subspace { dims, members: vec![n] });
                }
            }
        }
        Ok(groups)
    }

    /// Raw (user-facing) value of one dimension: untransformed numbers, or
    /// the choice label for categorical parameters.
    pub fn raw_value(&self, dim: usize, value: ParamValue) -> Result<Value> {
        let p = &self.params[dim];
        let raw = p.domain.untransform(value)?;
        if let (Some(labels), ParamValue::Index(i)) = (&p.labels, value) {
            return Ok(labels[i].clone());
        }
        Ok(serde_json::Number::from_f64(raw).map_or(Value::Null, Value::Number))
    }

    /// `{name: raw value | null}` for a configuration.
    pub fn to_raw_map(&self, config: &Configuration) -> Result<serde_json::Map<String, Value>> {
        let mut map = serde_json::Map::new();
        for (d, p) in self.params.iter().enumerate() {
            let v = match config.values.get(d).copied().flatten() {
                Some(v) => self.raw_value(d, v)?,
                None => Value::Null,
            };
            map.insert(p.name.clone(), v);
        }
        Ok(map)
    }

    /// Inverse of [`SearchSpace::to_raw_map`].
    pub fn from_raw_map(&self, map: &serde_json::Map<String, Value>) -> Result<Configuration> {
        let mut values = Vec::with_capacity(self.dim());
        for p in &self.params {
            let v = match map.get(&p.name) {
                None | Some(Value::Null) => None,
                Some(raw) => Some(match (&p.labels, &p.domain) {
                    (Some(labels), ParamDomain::Categorical { .. }) => {
                        let i = labels
                            .iter()
                            .position(|l| l == raw)
                            .ok_or_else(|| Error::MalformedData(format!("`{}` has no choice {raw}", p.name)))?;
                        ParamValue::Index(i)
                    }
                    _ => {
                        let x = raw
                            .as_f64()
                            .ok_or_else(|| Error::MalformedData(format!("`{}` expects a number, got {raw}", p.name)))?;
                        p.domain.transform(x)?
                    }
                }),
            };
            values.push(v);
        }
        let config = Configuration { values };
        self.check(&config)?;
        Ok(config)
    }
}

fn parse_condition(text: &str, index: &HashMap<String, usize>, params: &[Param]) -> Result<Condition> {
    let (lhs, op, rhs) = if let Some((l, r)) = text.split_once(">=") {
        (l, Comparison::Ge, r)
    } else if let Some((l, r)) = text.split_once("==") {
        (l, Comparison::Eq, r)
    } else {
        return Err(config_err(format!(
            "condition `{text}` must have the form `<param> == <value>` or `<param> >= <value>`"
        )));
    };
    let parent_name = lhs.trim();
    let rhs = rhs.trim();
    let &parent = index.get(parent_name).ok_or_else(|| {
        config_err(format!(
            "condition `{text}` refers to unknown parameter `{parent_name}`"
        ))
    })?;
    let p = &params[parent];
    let target = match (&p.domain, op) {
        (ParamDomain::Categorical { .. }, Comparison::Ge) => {
            return Err(config_err(format!(
                "condition `{text}`: `>=` on a categorical parameter"
            )))
        }
        (ParamDomain::Categorical { .. }, Comparison::Eq) => {
            let labels = p.labels.as_deref().unwrap_or_default();
            let unquoted = rhs.trim_matches(|c| c == '"' || c == '\'');
            labels
                .iter()
                .position(|l| match l {
                    Value::String(s) => s == unquoted,
                    other => *other == unquoted,
                })
                .ok_or_else(|| config_err(format!("condition `{text}`: `{parent_name}` has no choice `{rhs}`")))?
                as f64
        }
        _ => rhs
            .parse::<f64>()
            .map_err(|_| config_err(format!("condition `{text}`: `{rhs}` is not a number")))?,
    };
    Ok(Condition { parent, op, target })
}

fn topological_order(params: &[Param]) -> Result<Vec<usize>> {
    let n = params.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending = vec![0usize; n];
    for (i, p) in params.iter().enumerate() {
        if let Some(c) = &p.condition {
            children[c.parent].push(i);
            pending[i] = 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &c in children[i].iter().rev() {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.push(c);
            }
        }
    }
    if order.len() != n {
        return Err(config_err("activation conditions contain a cycle"));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two-layer network with per-layer optimizer choice.
    pub(crate) fn two_layer_space() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::discrete("n_layers", 1.0, 2.0, 1.0),
            ParamSpec::categorical("opt1", ["adam", "sgd"]),
            ParamSpec::continuous("beta1_1", 0.0, 1.0).when("opt1 == adam"),
            ParamSpec::continuous("beta2_1", 0.0, 1.0).when("opt1 == adam"),
            ParamSpec::continuous("momentum_1", 0.0, 1.0).when("opt1 == sgd"),
            ParamSpec::categorical("opt2", ["adam", "sgd"]).when("n_layers >= 2"),
            ParamSpec::continuous("beta1_2", 0.0, 1.0).when("opt2 == adam"),
            ParamSpec::continuous("beta2_2", 0.0, 1.0).when("opt2 == adam"),
            ParamSpec::continuous("momentum_2", 0.0, 1.0).when("opt2 == sgd"),
        ])
        .unwrap()
    }

    #[test]
    fn log_transform_endpoint_and_round_trip() {
        let d = ParamDomain::continuous(1e-3, 1.0, true).unwrap();
        assert_eq!(d.transform(1e-3).unwrap(), ParamValue::Real(1e-3f64.ln()));
        let back = d.untransform(d.transform(0.5).unwrap()).unwrap();
        assert!((back - 0.5).abs() <= 1e-12 * 0.5);
    }

    #[test]
    fn linear_transform_is_identity() {
        let d = ParamDomain::continuous(-2.0, 3.0, false).unwrap();
        assert_eq!(d.transform(1.25).unwrap(), ParamValue::Real(1.25));
    }

    #[test]
    fn transform_rejects_out_of_domain() {
        let d = ParamDomain::continuous(0.0, 1.0, false).unwrap();
        assert!(matches!(d.transform(1.5), Err(Error::Domain { .. })));
        let g = ParamDomain::discrete(0.0, 0.5, 3).unwrap();
        assert_eq!(g.transform(1.0).unwrap(), ParamValue::Index(2));
        assert!(g.transform(0.7).is_err());
        assert!(g.transform(1.5).is_err());
        let c = ParamDomain::categorical(3).unwrap();
        assert!(c.transform(3.0).is_err());
        assert!(c.transform(0.5).is_err());
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(ParamDomain::continuous(1.0, 1.0, false).is_err());
        assert!(ParamDomain::continuous(0.0, 1.0, true).is_err());
        assert!(ParamDomain::discrete(0.0, 0.0, 3).is_err());
        assert!(ParamDomain::discrete(0.0, 1.0, 0).is_err());
        assert!(ParamDomain::categorical(0).is_err());
    }

    #[test]
    fn single_choice_always_zero() {
        let space = SearchSpace::new(vec![ParamSpec::categorical("c", ["only"])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(space.random_sample(&mut rng).values[0], Some(ParamValue::Index(0)));
        }
    }

    #[test]
    fn categorical_frequencies_binomial() {
        // 4-sigma band of Binomial(1e5, 0.25)
        let space = SearchSpace::new(vec![ParamSpec::categorical("c", [0, 1, 2, 3])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[space.random_sample(&mut rng).values[0].unwrap().as_index().unwrap()] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn unknown_and_cyclic_conditions_rejected() {
        assert!(SearchSpace::new(vec![ParamSpec::continuous("a", 0.0, 1.0).when("b >= 1")]).is_err());
        assert!(SearchSpace::new(vec![ParamSpec::continuous("a", 0.0, 1.0).when("a >= 1")]).is_err());
        let cyclic = SearchSpace::new(vec![
            ParamSpec::continuous("a", 0.0, 1.0).when("b >= 0.5"),
            ParamSpec::continuous("b", 0.0, 1.0).when("a >= 0.5"),
        ]);
        assert!(cyclic.unwrap_err().to_string().contains("cycle"));
        let dup = SearchSpace::new(vec![
            ParamSpec::continuous("a", 0.0, 1.0),
            ParamSpec::continuous("a", 0.0, 1.0),
        ]);
        assert!(dup.is_err());
    }

    #[test]
    fn conditional_sampling_respects_tree() {
        let space = two_layer_space();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let c = space.random_sample(&mut rng);
            space.check(&c).unwrap();
        }
    }

    #[test]
    fn unconditional_space_is_single_subspace() {
        let space = SearchSpace::new(vec![
            ParamSpec::continuous("x", 0.0, 1.0),
            ParamSpec::categorical("c", ["a", "b"]),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data: Vec<_> = (0..20).map(|_| space.random_sample(&mut rng)).collect();
        let groups = space.enumerate_subspaces(&data).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].dims, vec![0, 1]);
        assert_eq!(groups[0].members, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn malformed_null_pattern_rejected() {
        let space = two_layer_space();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = space.random_sample(&mut rng);
        c.values[1] = Some(ParamValue::Index(0)); // adam
        c.values[2] = None; // beta1_1 must be active
        assert!(matches!(space.enumerate_subspaces([&c]), Err(Error::MalformedData(_))));
    }

    #[test]
    fn raw_map_round_trip_with_labels() {
        let space = two_layer_space();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let c = space.random_sample(&mut rng);
            let map = space.to_raw_map(&c).unwrap();
            assert_eq!(space.from_raw_map(&map).unwrap(), c);
        }
    }

    #[test]
    fn json_space_parses_both_layouts() {
        let text = r#"[{"name": "lr", "type": "continuous", "low": 1e-5, "high": 1.0, "log": true},
                      {"name": "layers", "type": "discrete", "low": 1, "high": 3, "step": 1},
                      {"name": "opt", "type": "categorical", "choices": ["adam", "sgd"]},
                      {"name": "mom", "type": "continuous", "low": 0, "high": 1, "condition": "opt == sgd"}]"#;
        let a = SearchSpace::from_json(text).unwrap();
        let b = SearchSpace::from_json(&format!("{{\"params\": {text}}}")).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.params()[1].domain,
            ParamDomain::DiscreteGrid {
                low: 1.0,
                step: 1.0,
                count: 3
            }
        );
        assert!(a.has_conditions());
    }
}
