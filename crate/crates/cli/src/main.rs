use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use tpe_core::benchmarks::{benchmark, BenchmarkSpec, BENCHMARKS};
use tpe_core::harness::{average_rank, run_plan, top_quantile_mass, ExperimentPlan, MethodSpec, Seeds};
use tpe_core::record::{read_jsonl, write_jsonl};
use tpe_core::StudyResult;

#[derive(Parser)]
#[command(
    name = "tpe",
    version,
    about = "Run and analyze tree-structured Parzen estimator experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run studies from a plan file or from flags and write JSONL results.
    Run(Box<RunArgs>),
    /// Average rank of each method's median best value at given steps.
    Rank(RankArgs),
    /// Top-quantile probability mass of one control parameter.
    Mass(MassArgs),
    /// List the registered benchmark functions.
    BenchList,
}

#[derive(Args)]
struct RunArgs {
    /// JSON plan file; excludes --benchmark.
    #[arg(long, conflicts_with = "benchmark")]
    plan: Option<PathBuf>,
    /// Benchmark such as `sphere-5d`; repeatable.
    #[arg(long, required_unless_present = "plan")]
    benchmark: Vec<String>,
    /// Observation noise standard deviation for flag-defined benchmarks.
    #[arg(long, default_value_t = 0.0, requires = "benchmark")]
    noise_std: f64,
    #[arg(long, default_value = "recommended", conflicts_with = "plan")]
    preset: String,
    /// Method name recorded in the results; defaults to the preset name.
    #[arg(long, conflicts_with = "plan")]
    name: Option<String>,
    /// Inclusive seed range `a..b`.
    #[arg(long, conflicts_with_all = ["seed", "plan"])]
    seeds: Option<String>,
    #[arg(long, conflicts_with = "plan")]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "plan")]
    n_trials: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigFlags,
}

/// Flags mirroring `TpeConfig` keys. Applied on top of every method.
#[derive(Args, Default)]
struct ConfigFlags {
    /// JSON file with a partial config, applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Splitting rule: `linear` or `sqrt`.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    better_cap: Option<usize>,
    /// Weighting rule: `uniform`, `old_decay`, `old_drop`, `ei`, `bohb_uniform`.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    t_old: Option<usize>,
    #[arg(long)]
    prior_weight: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    multivariate: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    consider_prior: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    consider_magic_clip: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    consider_endpoints: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    group: Option<bool>,
    /// Magic-clip exponent: a positive number, `inf` or `legacy`.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Numerical bandwidth heuristic: `hyperopt`, `scott` or `optuna`.
    #[arg(long)]
    bandwidth: Option<String>,
    /// Categorical bandwidth: a number in [0, 1) or a rule name.
    #[arg(long)]
    categorical_bandwidth: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n_startup_trials: Option<usize>,
    #[arg(long)]
    n_ei_candidates: Option<usize>,
}

#[derive(Args)]
struct RankArgs {
    /// JSONL result files; repeatable.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Comma-separated 1-based steps; defaults to the shortest run length.
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MassArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Dotted config key such as `weights.rule` or `split.beta`.
    #[arg(long)]
    param: String,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// 1-based step; defaults to the shortest run length.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigFlags {
    fn to_overrides(&self) -> Result<Map<String, Value>> {
        let mut root = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
                    Value::Object(m) => m,
                    _ => bail!("{} must hold a JSON object", path.display()),
                }
            }
            None => Map::new(),
        };
        let mut set = |path: &str, v: Value| {
            let mut node = &mut root;
            let mut parts = path.split('.').peekable();
            while let Some(part) = parts.next() {
                if parts.peek().is_none() {
                    node.insert(part.into(), v);
                    return;
                }
                let child = node.entry(part).or_insert_with(|| json!({}));
                node = child.as_object_mut().expect("config sections are objects");
            }
        };
        let pairs = [
            ("split.rule", self.gamma.clone().map(Value::from)),
            ("split.beta", self.beta.map(Value::from)),
            ("split.better_cap", self.better_cap.map(Value::from)),
            ("weights.rule", self.weights.clone().map(Value::from)),
            ("weights.t_old", self.t_old.map(Value::from)),
            ("weights.prior_weight", self.prior_weight.map(Value::from)),
            ("multivariate", self.multivariate.map(Value::from)),
            ("consider_prior", self.consider_prior.map(Value::from)),
            (
                "bandwidth.consider_magic_clip",
                self.consider_magic_clip.map(Value::from),
            ),
            ("bandwidth.consider_endpoints", self.consider_endpoints.map(Value::from)),
            ("group", self.group.map(Value::from)),
            ("bandwidth.alpha", self.alpha.as_deref().map(number_or_text)),
            ("bandwidth.delta", self.delta.map(Value::from)),
            ("bandwidth.heuristic", self.bandwidth.clone().map(Value::from)),
            (
                "bandwidth.categorical",
                self.categorical_bandwidth.as_deref().map(number_or_text),
            ),
            ("epsilon", self.epsilon.map(Value::from)),
            ("n_startup_trials", self.n_startup_trials.map(Value::from)),
            ("n_ei_candidates", self.n_ei_candidates.map(Value::from)),
        ];
        for (path, v) in pairs {
            if let Some(v) = v {
                set(path, v);
            }
        }
        Ok(root)
    }
}

fn number_or_text(s: &str) -> Value {
    // non-finite numbers stay text so `inf` survives JSON
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::from(s),
    }
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_results(paths: &[PathBuf]) -> Result<Vec<StudyResult>> {
    let mut all = Vec::new();
    for p in paths {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        all.extend(
            read_jsonl::<StudyResult, _>(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))?,
        );
    }
    if let Some(bad) = all.iter().find(|r| r.error.is_some()) {
        bail!(
            "run {} / {} / seed {} failed: {}",
            bad.method,
            bad.benchmark,
            bad.seed,
            bad.error.as_deref().unwrap_or("")
        );
    }
    Ok(all)
}

fn shortest_run(results: &[StudyResult]) -> Result<usize> {
    results
        .iter()
        .map(|r| r.trials.len())
        .min()
        .filter(|&n| n > 0)
        .context("no completed trials in the input")
}

fn build_plan(args: &RunArgs, overrides: &Map<String, Value>) -> Result<ExperimentPlan> {
    let mut plan = match &args.plan {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentPlan::from_json(&text).with_context(|| format!("invalid plan {}", path.display()))?
        }
        None => {
            let benchmarks = args
                .benchmark
                .iter()
                .map(|b| {
                    let spec: BenchmarkSpec = b.parse()?;
                    BenchmarkSpec::new(&spec.name, spec.dim, args.noise_std)
                })
                .collect::<tpe_core::Result<Vec<_>>>()?;
            let seeds = match (&args.seeds, args.seed) {
                (Some(range), _) => Seeds::Range(range.clone()),
                (None, Some(s)) => Seeds::List(vec![s]),
                (None, None) => Seeds::List(vec![0]),
            };
            let name = args.name.clone().unwrap_or_else(|| args.preset.clone());
            ExperimentPlan {
                benchmarks,
                methods: vec![MethodSpec::new(&name, &args.preset)],
                seeds,
                n_trials: args.n_trials.unwrap_or(200),
            }
        }
    };
    if !overrides.is_empty() {
        // fold the flags into each method's full effective config
        for m in &mut plan.methods {
            let cfg = m.config()?.with_overrides(&Value::Object(overrides.clone()))?;
            m.overrides = Some(serde_json::to_value(cfg)?);
        }
    }
    plan.validate()?;
    Ok(plan)
}

fn run(args: RunArgs) -> Result<()> {
    let overrides = args.overrides.to_overrides()?;
    let plan = build_plan(&args, &overrides)?;
    let results = run_plan(&plan)?;
    for r in results.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: {} / {} / seed {} failed: {}",
            r.method,
            r.benchmark,
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }
    let mut out = writer(args.out.as_deref())?;
    write_jsonl(&mut out, &results)?;
    out.flush()?;
    Ok(())
}

fn rank(args: RankArgs) -> Result<()> {
    let results = load_results(&args.input)?;
    let steps = if args.steps.is_empty() {
        vec![shortest_run(&results)?]
    } else {
        args.steps
    };
    let table = average_rank(&results, &steps)?;
    let mut out = writer(args.out.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn mass(args: MassArgs) -> Result<()> {
    let results = load_results(&args.input)?;
    let step = match args.step {
        Some(s) => s,
        None => shortest_run(&results)?,
    };
    let m = top_quantile_mass(&results, args.alpha, step, &args.param)?;
    let mut out = writer(args.out.as_deref())?;
    m.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn bench_list() -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "name,bound,minimum_1d")?;
    for name in BENCHMARKS.names() {
        let f = benchmark(name)?;
        writeln!(out, "{name},{},{}", f.bound(), f.minimum(1))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(*a),
        Command::Rank(a) => rank(a),
        Command::Mass(a) => mass(a),
        Command::BenchList => bench_list(),
    }
}
