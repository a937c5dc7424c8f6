//! The TPE ask/tell loop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TpeConfig;
use crate::error::{Error, Result};
use crate::kde::{build_kde, GroupData, KdeModel, KdeSettings, KdeVariant};
use crate::record::TrialRecord;
use crate::space::{Configuration, ParamValue, SearchSpace};
use crate::splitting::{split, split_rule, SplitResult, SplitRule};
use crate::weighting::{weight_rule, Group, WeightRule};

/// Stream carrying the epsilon-greedy coin flips.
pub const COIN_STREAM: u64 = 1;
/// Stream carrying observation noise in benchmark runs.
pub const NOISE_STREAM: u64 = 2;

/// Main sampling stream for `seed`; shared with random search.
pub fn sampling_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub config: Configuration,
    pub y: f64,
    /// 1-based query order.
    pub order: usize,
}

/// Result of one objective evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Noiseless value when `value` carries observation noise.
    pub true_value: Option<f64>,
}

impl From<f64> for Evaluation {
    fn from(value: f64) -> Self {
        Self {
            value,
            true_value: None,
        }
    }
}

/// The pair of densities fitted to the current data.
#[derive(Clone, Debug)]
pub struct TpeModel {
    /// Modeled dimensions, in search-space order.
    pub dims: Vec<usize>,
    pub split: SplitResult,
    pub better: KdeModel,
    pub worse: KdeModel,
}

impl TpeModel {
    /// `log p(x | D_better) - log p(x | D_worse)` at a point over `dims`.
    pub fn acquisition(&self, point: &[ParamValue]) -> Result<f64> {
        Ok(self.better.log_pdf(point)? - self.worse.log_pdf(point)?)
    }

    fn acquisition_unchecked(&self, point: &[ParamValue]) -> f64 {
        self.better.log_pdf_unchecked(point) - self.worse.log_pdf_unchecked(point)
    }

    /// `gamma p_l / (gamma p_l + (1 - gamma) p_g)`.
    pub fn pi_value(&self, point: &[ParamValue]) -> Result<f64> {
        Ok(pi_from_log_ratio(self.acquisition(point)?, self.split.gamma))
    }

    /// Restriction of a configuration to the modeled dimensions.
    pub fn project(&self, config: &Configuration) -> Result<Vec<ParamValue>> {
        self.dims
            .iter()
            .map(|&d| {
                config
                    .get(d)
                    .ok_or_else(|| Error::MalformedData(format!("dimension {d} is inactive but modeled")))
            })
            .collect()
    }
}

/// Probability of improvement from the log density ratio.
pub fn pi_from_log_ratio(log_ratio: f64, gamma: f64) -> f64 {
    if gamma >= 1.0 {
        return 1.0;
    }
    1.0 / (1.0 + (1.0 - gamma) / gamma * (-log_ratio).exp())
}

/// A single-writer optimization run over one search space.
pub struct Study {
    config: TpeConfig,
    space: SearchSpace,
    trials: Vec<Observation>,
    rng: ChaCha8Rng,
    coin: ChaCha8Rng,
    split_rule: Box<dyn SplitRule>,
    weight_rule: Box<dyn WeightRule>,
}

impl std::fmt::Debug for Study {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Study")
            .field("config", &self.config)
            .field("n_trials", &self.trials.len())
            .finish_non_exhaustive()
    }
}

impl Study {
    pub fn new(space: SearchSpace, config: TpeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            split_rule: split_rule(&config.split)?,
            weight_rule: weight_rule(&config.weights)?,
            rng: sampling_rng(config.seed),
            coin: stream_rng(config.seed, COIN_STREAM),
            config,
            space,
            trials: Vec::new(),
        })
    }

    pub fn config(&self) -> &TpeConfig {
        &self.config
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn trials(&self) -> &[Observation] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Next configuration to evaluate.
    pub fn ask(&mut self) -> Result<Configuration> {
        if self.trials.len() < self.config.n_startup_trials {
            return Ok(self.space.random_sample(&mut self.rng));
        }
        if self.config.epsilon > 0.0 && self.coin.random::<f64>() < self.config.epsilon {
            return Ok(self.space.random_sample(&mut self.rng));
        }
        let Some(model) = self.model()? else {
            return Ok(self.space.random_sample(&mut self.rng));
        };
        let mut best: Option<(f64, Vec<ParamValue>)> = None;
        for _ in 0..self.config.n_ei_candidates {
            let point = model.better.sample(&mut self.rng);
            let score = model.acquisition_unchecked(&point);
            // strict comparison keeps the lowest index on ties; NaN never wins
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, point));
            }
        }
        let point = best.map(|b| b.1).expect("n_ei_candidates >= 1");
        let mut values = vec![None; self.space.dim()];
        for (&d, v) in model.dims.iter().zip(point) {
            values[d] = Some(v);
        }
        Ok(self.space.complete(values, &model.dims, &mut self.rng))
    }

    /// Records an evaluated configuration. Non-finite values are replaced by
    /// the penalty (negated for `-inf`).
    pub fn tell(&mut self, config: Configuration, y: f64) -> Result<()> {
        self.space.check(&config)?;
        let y = if y.is_finite() {
            y
        } else if y == f64::NEG_INFINITY {
            -self.config.penalty
        } else {
            self.config.penalty
        };
        self.trials.push(Observation {
            config,
            y,
            order: self.trials.len() + 1,
        });
        Ok(())
    }

    /// Dimensions to model and the observations to model them with, or
    /// `None` when the current data cannot support a model.
    fn modeled_subset(&self) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
        let all: Vec<usize> = (0..self.trials.len()).collect();
        if !self.space.has_conditions() {
            return Ok(Some(((0..self.space.dim()).collect(), all)));
        }
        if self.config.group {
            let subspaces = self.space.enumerate_subspaces(self.trials.iter().map(|t| &t.config))?;
            // most populated, earliest first among equals
            let Some(best) = subspaces
                .into_iter()
                .reduce(|a, b| if b.members.len() > a.members.len() { b } else { a })
            else {
                return Ok(None);
            };
            let sparse = best.members.len() < 2;
            if best.dims.is_empty() || (sparse && !(self.config.model_sparse_subspaces && self.config.consider_prior)) {
                return Ok(None);
            }
            return Ok(Some((best.dims, best.members)));
        }
        // dimensions active in every observation
        let dims: Vec<usize> = (0..self.space.dim())
            .filter(|&d| self.trials.iter().all(|t| t.config.get(d).is_some()))
            .collect();
        if dims.is_empty() {
            return Ok(None);
        }
        Ok(Some((dims, all)))
    }

    /// Fits `p(x | D_better)` and `p(x | D_worse)` to the current data.
    pub fn model(&self) -> Result<Option<TpeModel>> {
        if self.trials.is_empty() {
            return Ok(None);
        }
        let Some((dims, members)) = self.modeled_subset()? else {
            return Ok(None);
        };
        let ys: Vec<f64> = members.iter().map(|&i| self.trials[i].y).collect();
        let sr = split(&ys, self.split_rule.as_ref(), self.config.split.better_cap)?;
        if sr.worse.is_empty() && !self.config.consider_prior {
            return Ok(None);
        }
        let settings = KdeSettings {
            variant: if self.config.multivariate {
                KdeVariant::Multivariate
            } else {
                KdeVariant::Univariate
            },
            consider_prior: self.config.consider_prior,
            prior_weight: self.config.weights.prior_weight,
            bandwidth: &self.config.bandwidth,
            weights: self.weight_rule.as_ref(),
        };
        let group_data = |group: Group, idx: &[usize]| {
            let obs: Vec<&Observation> = idx.iter().map(|&i| &self.trials[members[i]]).collect();
            GroupData {
                group,
                configs: obs.iter().map(|o| &o.config).collect(),
                ys: obs.iter().map(|o| o.y).collect(),
                query_orders: obs.iter().map(|o| o.order).collect(),
                y_gamma: sr.y_gamma,
            }
        };
        let better = build_kde(&self.space, &dims, &group_data(Group::Better, &sr.better), &settings)?;
        let worse = build_kde(&self.space, &dims, &group_data(Group::Worse, &sr.worse), &settings)?;
        Ok(Some(TpeModel {
            dims,
            split: sr,
            better,
            worse,
        }))
    }

    /// Log density ratio of a configuration under the current model.
    pub fn acquisition(&self, config: &Configuration) -> Result<f64> {
        let model = self
            .model()?
            .ok_or(Error::EmptyDataset("no model for the current data"))?;
        model.acquisition(&model.project(config)?)
    }

    /// Probability of improvement of a configuration under the current model.
    pub fn pi_value(&self, config: &Configuration) -> Result<f64> {
        let model = self
            .model()?
            .ok_or(Error::EmptyDataset("no model for the current data"))?;
        model.pi_value(&model.project(config)?)
    }

    /// Runs `n_trials` ask/evaluate/tell rounds. Evaluator errors are logged
    /// on the trial and the penalty is stored as its value.
    pub fn optimize<F, E>(&mut self, n_trials: usize, mut objective: F) -> Result<Vec<TrialRecord>>
    where
        F: FnMut(&Configuration) -> Result<E>,
        E: Into<Evaluation>,
    {
        let mut records = Vec::with_capacity(n_trials);
        for _ in 0..n_trials {
            let start = Instant::now();
            let config = self.ask()?;
            let (eval, error) = match objective(&config) {
                Ok(e) => (e.into(), None),
                Err(e) => (Evaluation::from(self.config.penalty), Some(e.to_string())),
            };
            let params = self.space.to_raw_map(&config)?;
            self.tell(config, eval.value)?;
            let stored = self.trials.last().expect("just told").y;
            records.push(TrialRecord {
                order: self.trials.len(),
                params,
                value: stored,
                elapsed: start.elapsed().as_secs_f64(),
                true_value: eval.true_value,
                error,
            });
        }
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{random, recommended};
    use crate::space::ParamSpec;

    fn space_2d() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::continuous("x", -1.0, 1.0),
            ParamSpec::continuous("y", -1.0, 1.0),
        ])
        .unwrap()
    }

    fn quad(c: &Configuration) -> Result<f64> {
        Ok(c.values.iter().map(|v| v.unwrap().as_real().unwrap().powi(2)).sum())
    }

    #[test]
    fn startup_phase_is_random_and_model_free() {
        let mut s = Study::new(space_2d(), recommended()).unwrap();
        assert!(s.model().unwrap().is_none());
        s.optimize(9, quad).unwrap();
        assert_eq!(s.len(), 9);
        let mut r = sampling_rng(0);
        let space = space_2d();
        for t in s.trials() {
            assert_eq!(t.config, space.random_sample(&mut r));
        }
    }

    #[test]
    fn epsilon_one_is_random_search() {
        let mut s = Study::new(space_2d(), random()).unwrap();
        s.optimize(40, quad).unwrap();
        let mut r = sampling_rng(0);
        let space = space_2d();
        for t in s.trials() {
            assert_eq!(t.config, space.random_sample(&mut r));
        }
    }

    #[test]
    fn same_seed_same_log() {
        let run = || {
            let mut s = Study::new(
                space_2d(),
                TpeConfig {
                    seed: 5,
                    ..recommended()
                },
            )
            .unwrap();
            s.optimize(30, quad).unwrap();
            s.trials().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_values_are_penalized() {
        let mut s = Study::new(space_2d(), recommended()).unwrap();
        let c = s.ask().unwrap();
        s.tell(c.clone(), f64::NAN).unwrap();
        s.tell(c.clone(), f64::INFINITY).unwrap();
        s.tell(c, f64::NEG_INFINITY).unwrap();
        let ys: Vec<f64> = s.trials().iter().map(|t| t.y).collect();
        assert_eq!(ys, vec![1e300, 1e300, -1e300]);
    }

    #[test]
    fn evaluator_errors_become_penalties() {
        let mut s = Study::new(space_2d(), recommended()).unwrap();
        let recs = s
            .optimize(3, |_| -> Result<f64> { Err(Error::Objective("boom".into())) })
            .unwrap();
        assert!(recs.iter().all(|r| r.value == 1e300 && r.error.is_some()));
    }

    #[test]
    fn tell_rejects_foreign_configs() {
        let mut s = Study::new(space_2d(), recommended()).unwrap();
        let bad = Configuration::new(vec![Some(ParamValue::Real(3.0)), Some(ParamValue::Real(0.0))]);
        assert!(s.tell(bad, 1.0).is_err());
        assert!(s.tell(Configuration::new(vec![None]), 1.0).is_err());
    }

    #[test]
    fn duplicates_are_kept() {
        let mut s = Study::new(space_2d(), recommended()).unwrap();
        let c = s.ask().unwrap();
        s.tell(c.clone(), 1.0).unwrap();
        s.tell(c, 1.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.trials()[1].order, 2);
    }

    #[test]
    fn identical_groups_give_zero_acquisition() {
        let mut s = Study::new(
            space_2d(),
            TpeConfig {
                weights: crate::weighting::WeightConfig {
                    rule: "uniform".into(),
                    ..Default::default()
                },
                ..recommended()
            },
        )
        .unwrap();
        s.optimize(12, |_| Ok(1.0)).unwrap();
        // all-equal objectives still split; the model is well defined
        let m = s.model().unwrap().unwrap();
        let p = m.project(&s.trials()[0].config).unwrap();
        assert!(m.acquisition(&p).unwrap().is_finite());
        assert!(pi_from_log_ratio(0.0, 0.15) - 0.15 < 1e-15);
        assert_eq!(pi_from_log_ratio(3.0, 1.0), 1.0);
    }
}
