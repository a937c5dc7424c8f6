//! Weighted kernel mixtures `p(x | D)` over a (sub)space, in univariate
//! (per-dimension mixtures multiplied together) or multivariate (mixture of
//! product kernels) composition.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{categorical_rule, magic_clip, numerical_heuristic, BandwidthConfig, NumericalSample};
use crate::error::{config_err, domain_err, Error, Result};
use crate::kernels::{AitchisonAitken, DiscreteGaussian, KernelBasis, TruncatedGaussian};
use crate::normal::log_sum_exp;
use crate::space::{Configuration, ParamDomain, ParamValue, SearchSpace};
use crate::weighting::{apply_prior_weight, Group, WeightContext, WeightRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KdeVariant {
    Univariate,
    Multivariate,
}

/// Relative floor keeping degenerate (zero-width) bandwidths usable.
const BANDWIDTH_FLOOR: f64 = 1e-12;

/// An immutable weighted mixture over a fixed list of dimensions.
#[derive(Clone, Debug)]
pub struct KdeModel {
    variant: KdeVariant,
    domains: Vec<ParamDomain>,
    /// `bases[n][j]` is basis `n`'s kernel for the `j`-th modeled dimension.
    bases: Vec<Vec<KernelBasis>>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    picker: WeightedIndex<f64>,
}

impl KdeModel {
    /// Assembles a model from explicit bases and weights. Bases with zero
    /// weight are dropped; they cannot change the density.
    pub fn new(
        variant: KdeVariant,
        domains: Vec<ParamDomain>,
        bases: Vec<Vec<KernelBasis>>,
        weights: &[f64],
    ) -> Result<Self> {
        if bases.len() != weights.len() {
            return Err(config_err(format!(
                "{} kernel bases but {} weights",
                bases.len(),
                weights.len()
            )));
        }
        if bases.iter().any(|b| b.len() != domains.len()) {
            return Err(config_err("every basis needs one kernel per modeled dimension"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(config_err("mixture weights must be finite and nonnegative"));
        }
        let (bases, weights): (Vec<_>, Vec<_>) = bases
            .into_iter()
            .zip(weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
            .unzip();
        if bases.is_empty() {
            return Err(Error::EmptyDataset("mixture has no basis with positive weight"));
        }
        let picker = WeightedIndex::new(&weights).map_err(|e| config_err(format!("invalid mixture weights: {e}")))?;
        Ok(Self {
            variant,
            domains,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            bases,
            picker,
        })
    }

    pub fn variant(&self) -> KdeVariant {
        self.variant
    }

    pub fn n_dims(&self) -> usize {
        self.domains.len()
    }

    /// Number of bases with positive weight.
    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bases(&self) -> &[Vec<KernelBasis>] {
        &self.bases
    }

    fn check(&self, point: &[ParamValue]) -> Result<()> {
        if point.len() != self.domains.len() {
            return Err(Error::MalformedData(format!(
                "point has {} values, model has {} dimensions",
                point.len(),
                self.domains.len()
            )));
        }
        for (d, &v) in self.domains.iter().zip(point) {
            if !d.contains(v) {
                let raw = match v {
                    ParamValue::Real(x) => x,
                    ParamValue::Index(i) => i as f64,
                };
                return Err(domain_err("KDE argument", raw));
            }
        }
        Ok(())
    }

    /// `log p(x)` at a point given in modeled-dimension order.
    pub fn log_pdf(&self, point: &[ParamValue]) -> Result<f64> {
        self.check(point)?;
        Ok(self.log_pdf_unchecked(point))
    }

    pub(crate) fn log_pdf_unchecked(&self, point: &[ParamValue]) -> f64 {
        match self.variant {
            KdeVariant::Univariate => (0..point.len()).map(|j| self.log_marginal(j, point[j])).sum(),
            KdeVariant::Multivariate => {
                let terms = self
                    .bases
                    .iter()
                    .zip(&self.log_weights)
                    .map(|(basis, lw)| lw + basis.iter().zip(point).map(|(k, &v)| k.log_density(v)).sum::<f64>());
                log_sum_exp(terms)
            }
        }
    }

    /// `log sum_n w_n k_{n,j}(v)`, the weighted mixture along dimension `j` alone.
    pub fn log_marginal(&self, j: usize, v: ParamValue) -> f64 {
        log_sum_exp(
            self.bases
                .iter()
                .zip(&self.log_weights)
                .map(|(basis, lw)| lw + basis[j].log_density(v)),
        )
    }

    /// Draws one point: a single basis for all dimensions (multivariate) or
    /// an independent basis per dimension (univariate).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ParamValue> {
        match self.variant {
            KdeVariant::Multivariate => {
                let n = self.picker.sample(rng);
                self.bases[n].iter().map(|k| k.sample(rng)).collect()
            }
            KdeVariant::Univariate => (0..self.domains.len())
                .map(|j| {
                    let n = self.picker.sample(rng);
                    self.bases[n][j].sample(rng)
                })
                .collect(),
        }
    }
}

/// Prior basis: a wide Gaussian centered on the domain (truncated or
/// discretized), or the uniform categorical pmf.
pub fn prior_kernel(domain: &ParamDomain) -> Result<KernelBasis> {
    Ok(match *domain {
        ParamDomain::Continuous { .. } => {
            let (lo, hi) = domain.numeric_bounds().unwrap();
            KernelBasis::Gaussian(TruncatedGaussian::new(0.5 * (lo + hi), hi - lo, lo, hi)?)
        }
        ParamDomain::DiscreteGrid { low, step, count } => {
            let (lo, hi) = domain.numeric_bounds().unwrap();
            KernelBasis::Discrete(DiscreteGaussian::new(
                0.5 * (lo + hi),
                (hi - lo).max(step),
                low,
                step,
                count,
            )?)
        }
        ParamDomain::Categorical { n_choices } => KernelBasis::Categorical(AitchisonAitken::uniform(n_choices)?),
    })
}

/// Control parameters the KDE construction depends on.
#[derive(Clone, Copy, Debug)]
pub struct KdeSettings<'a> {
    pub variant: KdeVariant,
    pub consider_prior: bool,
    pub prior_weight: f64,
    pub bandwidth: &'a BandwidthConfig,
    pub weights: &'a dyn WeightRule,
}

/// One group of observations restricted to the modeled dimensions.
#[derive(Clone, Debug)]
pub struct GroupData<'a> {
    pub group: Group,
    pub configs: Vec<&'a Configuration>,
    pub ys: Vec<f64>,
    /// 1-based query order of each member.
    pub query_orders: Vec<usize>,
    pub y_gamma: f64,
}

/// Builds `p(x | D)` for one group over the dimensions `dims` of `space`.
/// Every member must be active on all of `dims`.
pub fn build_kde(
    space: &SearchSpace,
    dims: &[usize],
    data: &GroupData<'_>,
    settings: &KdeSettings<'_>,
) -> Result<KdeModel> {
    let n = data.configs.len();
    if n == 0 && !settings.consider_prior {
        return Err(Error::EmptyDataset("empty group and no prior"));
    }
    if data.ys.len() != n || data.query_orders.len() != n {
        return Err(config_err("group data columns have different lengths"));
    }
    if dims.is_empty() {
        return Err(config_err("a KDE needs at least one dimension"));
    }
    let n_eff = n + usize::from(settings.consider_prior);
    let heuristic = numerical_heuristic(settings.bandwidth)?;
    let cat_rule = categorical_rule(settings.bandwidth)?;

    let value = |c: &Configuration, d: usize| {
        c.get(d).ok_or_else(|| {
            Error::MalformedData(format!(
                "parameter `{}` is inactive in a modeled observation",
                space.params()[d].name
            ))
        })
    };

    // kernels[j][n] for observation n, then transposed into bases
    let mut columns: Vec<Vec<KernelBasis>> = Vec::with_capacity(dims.len());
    let mut prior_column = Vec::with_capacity(dims.len());
    for &d in dims {
        let domain = &space.params()[d].domain;
        let values = data.configs.iter().map(|c| value(c, d)).collect::<Result<Vec<_>>>()?;
        let column = match *domain {
            ParamDomain::Categorical { n_choices } => {
                let centers: Vec<usize> = values.iter().map(|v| v.as_index().unwrap_or(usize::MAX)).collect();
                let b = cat_rule.bandwidth(&centers, n_eff, n_choices);
                centers
                    .iter()
                    .map(|&c| AitchisonAitken::new(c, b, n_choices).map(KernelBasis::Categorical))
                    .collect::<Result<Vec<_>>>()?
            }
            ParamDomain::Continuous { .. } | ParamDomain::DiscreteGrid { .. } => {
                let (lo, hi) = domain.numeric_bounds().unwrap();
                let centers: Vec<f64> = values
                    .iter()
                    .map(|&v| match (domain, v) {
                        (ParamDomain::DiscreteGrid { low, step, .. }, ParamValue::Index(i)) => low + i as f64 * step,
                        (_, ParamValue::Real(x)) => x,
                        (_, ParamValue::Index(i)) => i as f64,
                    })
                    .collect();
                let sample = NumericalSample {
                    centers: &centers,
                    prior_center: settings.consider_prior.then_some(0.5 * (lo + hi)),
                    low: lo,
                    high: hi,
                    n_dims: dims.len(),
                };
                let raw = heuristic.raw_bandwidths(&sample)?;
                numeric_column(domain, &centers, &values, &raw, n_eff, settings.bandwidth)?
            }
        };
        columns.push(column);
        if settings.consider_prior {
            prior_column.push(prior_kernel(domain)?);
        }
    }

    let mut bases: Vec<Vec<KernelBasis>> = Vec::with_capacity(n_eff);
    if settings.consider_prior {
        bases.push(prior_column);
    }
    for i in 0..n {
        bases.push(columns.iter().map(|col| col[i].clone()).collect());
    }

    let truncation_mass: Vec<f64> = bases
        .iter()
        .map(|b| b.iter().map(KernelBasis::log_truncation_mass).sum::<f64>().exp())
        .collect();
    let ctx = WeightContext {
        group: data.group,
        ys: &data.ys,
        query_orders: &data.query_orders,
        y_gamma: data.y_gamma,
        include_prior: settings.consider_prior,
        truncation_mass: &truncation_mass,
    };
    let wv = apply_prior_weight(settings.weights.weights(&ctx)?, settings.prior_weight)?;
    let weights: Vec<f64> = wv.iter().collect();
    let domains = dims.iter().map(|&d| space.params()[d].domain).collect();
    KdeModel::new(settings.variant, domains, bases, &weights)
}

fn numeric_column(
    domain: &ParamDomain,
    centers: &[f64],
    values: &[ParamValue],
    raw: &[f64],
    n_eff: usize,
    cfg: &BandwidthConfig,
) -> Result<Vec<KernelBasis>> {
    let (lo, hi) = domain.numeric_bounds().unwrap();
    let span = match *domain {
        ParamDomain::DiscreteGrid { step, .. } => hi - lo + step,
        _ => hi - lo,
    };
    centers
        .iter()
        .zip(values)
        .zip(raw)
        .map(|((&c, &v), &b)| {
            let b = magic_clip(b, lo, hi, n_eff, cfg).max(BANDWIDTH_FLOOR * span);
            match (*domain, v) {
                (ParamDomain::DiscreteGrid { low, step, count }, ParamValue::Index(i)) => {
                    DiscreteGaussian::at_index(i, b, low, step, count).map(KernelBasis::Discrete)
                }
                _ => TruncatedGaussian::new(c, b, lo, hi).map(KernelBasis::Gaussian),
            }
        })
        .collect()
}
