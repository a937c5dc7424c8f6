//! Batch experiments over methods, benchmarks and seeds, and the analyses
//! run on their results.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bandwidth::bw_scott;
use crate::benchmarks::BenchmarkSpec;
use crate::config::{preset, TpeConfig};
use crate::error::{config_err, Error, Result};
use crate::record::StudyResult;
use crate::sampler::{stream_rng, Evaluation, Study, NOISE_STREAM};
use crate::splitting::better_size;

/// A named method: a preset plus optional overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    #[serde(default = "default_preset")]
    pub preset: String,
    /// Partial `TpeConfig` merged over the preset.
    #[serde(default)]
    pub overrides: Option<Value>,
}

fn default_preset() -> String {
    "recommended".into()
}

impl MethodSpec {
    pub fn new(name: &str, preset: &str) -> Self {
        Self {
            name: name.into(),
            preset: preset.into(),
            overrides: None,
        }
    }

    /// Effective configuration; the run's seed replaces the config seed.
    pub fn config(&self) -> Result<TpeConfig> {
        let base = preset(&self.preset)?;
        match &self.overrides {
            Some(o) => base.with_overrides(o),
            None => Ok(base),
        }
    }
}

/// Seeds given as a list or as an inclusive range string `"a..b"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range(String),
}

impl Seeds {
    pub fn to_vec(&self) -> Result<Vec<u64>> {
        match self {
            Seeds::List(v) => Ok(v.clone()),
            Seeds::Range(s) => parse_seed_range(s),
        }
    }
}

/// Parses `"a..b"` (inclusive) or a single seed.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>> {
    let bad = || config_err(format!("seeds must look like `0..9` or `3`, got `{s}`"));
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub benchmarks: Vec<BenchmarkSpec>,
    pub methods: Vec<MethodSpec>,
    pub seeds: Seeds,
    #[serde(default = "default_n_trials")]
    pub n_trials: usize,
}

fn default_n_trials() -> usize {
    200
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.benchmarks.is_empty() || self.methods.is_empty() || self.seeds.to_vec()?.is_empty() {
            return Err(config_err("plan needs at least one benchmark, method and seed"));
        }
        let mut names = BTreeSet::new();
        for m in &self.methods {
            if !names.insert(&m.name) {
                return Err(config_err(format!("method name `{}` appears twice", m.name)));
            }
            let cfg = m.config()?;
            if self.n_trials < cfg.n_startup_trials {
                return Err(config_err(format!(
                    "n_trials {} is below n_startup_trials {} of `{}`",
                    self.n_trials, cfg.n_startup_trials, m.name
                )));
            }
        }
        Ok(())
    }

    /// Run coordinates in output order: method, then benchmark, then seed.
    fn cells(&self) -> Result<Vec<(&MethodSpec, &BenchmarkSpec, u64)>> {
        let seeds = self.seeds.to_vec()?;
        Ok(self
            .methods
            .iter()
            .flat_map(|m| self.benchmarks.iter().map(move |b| (m, b)))
            .flat_map(|(m, b)| seeds.iter().map(move |&s| (m, b, s)))
            .collect())
    }
}

/// One TPE run of `method` on `bench`. Noise draws come from a stream
/// separate from the sampler's.
pub fn run_study(method: &MethodSpec, bench: &BenchmarkSpec, seed: u64, n_trials: usize) -> StudyResult {
    let name = bench.to_string();
    let cfg = match method.config() {
        Ok(c) => TpeConfig { seed, ..c },
        Err(e) => return StudyResult::failed(&method.name, &name, seed, None, e.to_string()),
    };
    let cfg_json = serde_json::to_value(&cfg).ok();
    let run = || -> Result<StudyResult> {
        let mut study = Study::new(bench.space(), cfg.clone())?;
        let mut noise = stream_rng(seed, NOISE_STREAM);
        let trials = study.optimize(n_trials, |c| {
            let x = bench.coordinates(c)?;
            let value = bench.evaluate(&x, &mut noise)?;
            let true_value = (bench.noise_std > 0.0).then(|| bench.value(&x)).transpose()?;
            Ok(Evaluation { value, true_value })
        })?;
        Ok(StudyResult::new(&method.name, &name, seed, cfg_json.clone(), trials))
    };
    run().unwrap_or_else(|e| StudyResult::failed(&method.name, &name, seed, cfg_json.clone(), e.to_string()))
}

/// Runs every cell of the plan in parallel; results come back in plan order.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<StudyResult>> {
    plan.validate()?;
    let cells = plan.cells()?;
    Ok(cells
        .par_iter()
        .map(|(m, b, s)| run_study(m, b, *s, plan.n_trials))
        .collect())
}

/// Ranks with 1 = smallest; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Methods, benchmarks and `table[benchmark][method]`.
type MedianTable = (Vec<String>, Vec<String>, Vec<Vec<f64>>);

/// `median over seeds of zeta_step` for every (benchmark, method) pair.
/// Missing results or steps are reported by name.
fn median_table(results: &[StudyResult], step: usize) -> Result<MedianTable> {
    let ok: Vec<&StudyResult> = results.iter().filter(|r| r.error.is_none()).collect();
    let methods: Vec<String> = unique(results.iter().map(|r| r.method.clone()));
    let benches: Vec<String> = unique(results.iter().map(|r| r.benchmark.clone()));
    let seeds: BTreeSet<u64> = results.iter().map(|r| r.seed).collect();
    let mut table = Vec::with_capacity(benches.len());
    for b in &benches {
        let mut row = Vec::with_capacity(methods.len());
        for m in &methods {
            let mut vals = Vec::with_capacity(seeds.len());
            for &s in &seeds {
                let r = ok
                    .iter()
                    .find(|r| &r.method == m && &r.benchmark == b && r.seed == s)
                    .ok_or_else(|| Error::MissingCell(format!("method `{m}`, benchmark `{b}`, seed {s}")))?;
                vals.push(r.best_at(step).ok_or_else(|| {
                    Error::MissingCell(format!("method `{m}`, benchmark `{b}`, seed {s} has no step {step}"))
                })?);
            }
            row.push(median(&mut vals));
        }
        table.push(row);
    }
    Ok((methods, benches, table))
}

fn unique(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items.filter(|s| seen.insert(s.clone())).collect()
}

/// Mean rank of each method at each step.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub steps: Vec<usize>,
    /// `ranks[s][m]` for step `steps[s]` and method `methods[m]`.
    pub ranks: Vec<Vec<f64>>,
}

impl RankTable {
    pub fn rank(&self, method: &str, step: usize) -> Option<f64> {
        let m = self.methods.iter().position(|x| x == method)?;
        let s = self.steps.iter().position(|&x| x == step)?;
        Some(self.ranks[s][m])
    }

    /// Columns `step,method,average_rank`; rows grouped by step in
    /// ascending order, methods in first-appearance order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "method", "average_rank"]).map_err(csv_err)?;
        for (s, step) in self.steps.iter().enumerate() {
            for (m, method) in self.methods.iter().enumerate() {
                w.write_record([step.to_string(), method.clone(), self.ranks[s][m].to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Average over benchmarks of each method's rank by median performance.
pub fn average_rank(results: &[StudyResult], steps: &[usize]) -> Result<RankTable> {
    if steps.is_empty() {
        return Err(config_err("average_rank needs at least one step"));
    }
    let mut ranks = Vec::with_capacity(steps.len());
    let mut methods = Vec::new();
    for &step in steps {
        let (m, benches, table) = median_table(results, step)?;
        if m.len() < 2 {
            return Err(config_err("average_rank needs at least two methods"));
        }
        let mut acc = vec![0.0; m.len()];
        for row in &table {
            for (a, r) in acc.iter_mut().zip(average_ranks(row)) {
                *a += r;
            }
        }
        ranks.push(acc.into_iter().map(|a| a / benches.len() as f64).collect());
        methods = m;
    }
    Ok(RankTable {
        methods,
        steps: steps.to_vec(),
        ranks,
    })
}

/// Distribution of one control parameter's values among the top methods.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileMass {
    pub param: String,
    /// `(choice, mass)` with choices in sorted order.
    pub mass: Vec<(String, f64)>,
}

impl QuantileMass {
    pub fn get(&self, choice: &str) -> Option<f64> {
        self.mass.iter().find(|(c, _)| c == choice).map(|(_, m)| *m)
    }

    /// Columns `param,choice,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["param", "choice", "mass"]).map_err(csv_err)?;
        for (c, m) in &self.mass {
            w.write_record([self.param.as_str(), c.as_str(), &m.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn choice_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Per task: keep the top `ceil(alpha K)` of the `K` methods by median
/// `zeta_step`, build a pmf over `param` among the survivors, then average
/// the pmfs over tasks. Numeric parameters use a Gaussian kernel with Scott
/// bandwidth evaluated at the grid values; other parameters are counted.
pub fn top_quantile_mass(results: &[StudyResult], alpha: f64, step: usize, param: &str) -> Result<QuantileMass> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(config_err(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let (methods, benches, table) = median_table(results, step)?;
    // parameter value per method, read from the stored effective config
    let mut value_of: BTreeMap<&str, Value> = BTreeMap::new();
    for m in &methods {
        let r = results
            .iter()
            .find(|r| &r.method == m)
            .expect("method comes from results");
        let cfg = r
            .config
            .as_ref()
            .ok_or_else(|| Error::MissingCell(format!("method `{m}` has no stored config")))?;
        let v = param
            .split('.')
            .try_fold(cfg, |node, part| node.get(part))
            .ok_or_else(|| Error::MissingCell(format!("method `{m}` has no parameter `{param}`")))?;
        value_of.insert(m, v.clone());
    }
    let grid: Vec<String> = unique(methods.iter().map(|m| choice_label(&value_of[m.as_str()])))
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let numeric: Option<Vec<f64>> = methods.iter().map(|m| value_of[m.as_str()].as_f64()).collect();

    let k = methods.len();
    let keep = better_size(alpha, k);
    let mut total = vec![0.0; grid.len()];
    for row in &table {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
        let survivors = &order[..keep];
        if survivors.is_empty() {
            return Err(Error::EmptyDataset("no survivors in the top quantile"));
        }
        let pmf = match &numeric {
            Some(vals) => {
                let xs: Vec<f64> = survivors.iter().map(|&i| vals[i]).collect();
                let grid_x: Vec<f64> = grid
                    .iter()
                    .map(|g| g.parse::<f64>().expect("numeric labels parse"))
                    .collect();
                kde_pmf(&xs, &grid_x)
            }
            None => {
                let mut counts = vec![0.0; grid.len()];
                for &i in survivors {
                    let label = choice_label(&value_of[methods[i].as_str()]);
                    counts[grid.iter().position(|g| *g == label).unwrap()] += 1.0;
                }
                counts.iter().map(|c| c / survivors.len() as f64).collect()
            }
        };
        for (t, p) in total.iter_mut().zip(pmf) {
            *t += p;
        }
    }
    let mass = grid
        .into_iter()
        .zip(total)
        .map(|(g, t)| (g, t / benches.len() as f64))
        .collect();
    Ok(QuantileMass {
        param: param.into(),
        mass,
    })
}

/// Gaussian KDE of `xs` (Scott bandwidth) evaluated on `grid` and
/// normalized; counts when the bandwidth degenerates to 0.
fn kde_pmf(xs: &[f64], grid: &[f64]) -> Vec<f64> {
    let b = bw_scott(xs);
    let raw: Vec<f64> = if b > 0.0 {
        grid.iter()
            .map(|g| xs.iter().map(|x| (-0.5 * ((g - x) / b).powi(2)).exp()).sum())
            .collect()
    } else {
        grid.iter()
            .map(|g| xs.iter().filter(|x| *x == g).count() as f64)
            .collect()
    };
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| r / s).collect()
}
