//! Analytic benchmark functions on boxes `[-R, R]^D`, observation noise, and
//! the random-search baseline.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Error, Result};
use crate::record::{StudyResult, TrialRecord};
use crate::registry::Registry;
use crate::sampler::{sampling_rng, stream_rng, NOISE_STREAM};
use crate::space::{Configuration, ParamSpec, SearchSpace};

/// A deterministic test function defined for every dimension.
pub trait Benchmark: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Half-width `R` of the domain box.
    fn bound(&self) -> f64;

    fn value(&self, x: &[f64]) -> f64;

    /// A global minimizer in dimension `dim`.
    fn minimizer(&self, dim: usize) -> Vec<f64>;

    /// Global minimum value in dimension `dim`.
    fn minimum(&self, _dim: usize) -> f64 {
        0.0
    }
}

macro_rules! benchmark {
    ($ty:ident, $name:literal, $bound:expr, |$x:ident| $body:expr, |$d:ident| $argmin:expr) => {
        #[derive(Debug)]
        pub struct $ty;

        impl Benchmark for $ty {
            fn name(&self) -> &'static str {
                $name
            }

            fn bound(&self) -> f64 {
                $bound
            }

            fn value(&self, $x: &[f64]) -> f64 {
                $body
            }

            fn minimizer(&self, $d: usize) -> Vec<f64> {
                $argmin
            }
        }
    };
}

benchmark!(
    Ackley,
    "ackley",
    32.768,
    |x| {
        let n = x.len() as f64;
        let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
        let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
        -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
    },
    |d| vec![0.0; d]
);

benchmark!(
    Griewank,
    "griewank",
    600.0,
    |x| {
        let sum = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
        let prod: f64 = x
            .iter()
            .enumerate()
            .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
            .product();
        1.0 + sum - prod
    },
    |d| vec![0.0; d]
);

benchmark!(
    KTablet,
    "k_tablet",
    5.12,
    |x| {
        let k = x.len().div_ceil(4);
        x.iter()
            .enumerate()
            .map(|(i, v)| if i < k { v * v } else { (100.0 * v).powi(2) })
            .sum()
    },
    |d| vec![0.0; d]
);

benchmark!(
    Levy,
    "levy",
    10.0,
    |x| {
        let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
        let last = w[w.len() - 1];
        let head = (PI * w[0]).sin().powi(2);
        let mid: f64 = w[..w.len() - 1]
            .iter()
            .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
            .sum();
        head + mid + (last - 1.0).powi(2) * (1.0 + (2.0 * PI * last).sin().powi(2))
    },
    |d| vec![1.0; d]
);

benchmark!(
    Perm,
    "perm",
    1.0,
    |x| {
        // Perm(0, beta = 1)
        let d = x.len();
        (1..=d)
            .map(|i| {
                let inner: f64 = (1..=d)
                    .map(|j| (j as f64 + 1.0) * (x[j - 1].powi(i as i32) - (j as f64).powi(-(i as i32))))
                    .sum();
                inner * inner
            })
            .sum()
    },
    |d| (1..=d).map(|j| 1.0 / j as f64).collect()
);

benchmark!(
    Rastrigin,
    "rastrigin",
    5.12,
    |x| 10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>(),
    |d| vec![0.0; d]
);

benchmark!(
    Rosenbrock,
    "rosenbrock",
    5.0,
    |x| {
        x.windows(2)
            .map(|p| 100.0 * (p[1] - p[0] * p[0]).powi(2) + (p[0] - 1.0).powi(2))
            .sum()
    },
    |d| vec![1.0; d]
);

benchmark!(Sphere, "sphere", 5.0, |x| x.iter().map(|v| v * v).sum(), |d| vec![
    0.0;
    d
]);

benchmark!(
    WeightedSphere,
    "weighted_sphere",
    5.0,
    |x| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum(),
    |d| vec![0.0; d]
);

benchmark!(
    XinSheYang,
    "xin_she_yang",
    2.0 * PI,
    |x| x.iter().map(|v| v.abs()).sum::<f64>() * (-x.iter().map(|v| (v * v).sin()).sum::<f64>()).exp(),
    |d| vec![0.0; d]
);

/// Coordinate of the Schwefel minimizer.
pub const SCHWEFEL_ARGMIN: f64 = 420.968_746_3;
/// Coordinate of the Styblinski-Tang minimizer.
pub const STYBLINSKI_ARGMIN: f64 = -2.903_534_027_771_177_6;

#[derive(Debug)]
pub struct Schwefel;

impl Benchmark for Schwefel {
    fn name(&self) -> &'static str {
        "schwefel"
    }

    fn bound(&self) -> f64 {
        500.0
    }

    fn value(&self, x: &[f64]) -> f64 {
        418.9829 * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
    }

    fn minimizer(&self, dim: usize) -> Vec<f64> {
        vec![SCHWEFEL_ARGMIN; dim]
    }

    /// Slightly off zero because of the truncated constant `418.9829`.
    fn minimum(&self, dim: usize) -> f64 {
        self.value(&self.minimizer(dim))
    }
}

#[derive(Debug)]
pub struct Styblinski;

impl Benchmark for Styblinski {
    fn name(&self) -> &'static str {
        "styblinski"
    }

    fn bound(&self) -> f64 {
        5.0
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>()
    }

    fn minimizer(&self, dim: usize) -> Vec<f64> {
        vec![STYBLINSKI_ARGMIN; dim]
    }

    fn minimum(&self, dim: usize) -> f64 {
        self.value(&self.minimizer(dim))
    }
}

pub static BENCHMARKS: Registry<fn() -> Box<dyn Benchmark>> = Registry::new(
    "benchmark",
    &[
        ("ackley", || Box::new(Ackley)),
        ("griewank", || Box::new(Griewank)),
        ("k_tablet", || Box::new(KTablet)),
        ("levy", || Box::new(Levy)),
        ("perm", || Box::new(Perm)),
        ("rastrigin", || Box::new(Rastrigin)),
        ("rosenbrock", || Box::new(Rosenbrock)),
        ("schwefel", || Box::new(Schwefel)),
        ("sphere", || Box::new(Sphere)),
        ("styblinski", || Box::new(Styblinski)),
        ("weighted_sphere", || Box::new(WeightedSphere)),
        ("xin_she_yang", || Box::new(XinSheYang)),
    ],
);

pub fn benchmark(name: &str) -> Result<Box<dyn Benchmark>> {
    Ok(BENCHMARKS.get(name)?())
}

/// A benchmark at a fixed dimension, addressed as `name-<D>d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BenchmarkSpecRepr", into = "BenchmarkSpecRepr")]
pub struct BenchmarkSpec {
    pub name: String,
    pub dim: usize,
    pub noise_std: f64,
}

impl BenchmarkSpec {
    pub fn new(name: &str, dim: usize, noise_std: f64) -> Result<Self> {
        BENCHMARKS.get(name)?;
        if dim == 0 {
            return Err(config_err("benchmark dimension must be at least 1"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(config_err(format!("noise_std must be nonnegative, got {noise_std}")));
        }
        Ok(Self {
            name: name.into(),
            dim,
            noise_std,
        })
    }

    pub fn function(&self) -> Box<dyn Benchmark> {
        BENCHMARKS.get(&self.name).expect("validated at construction")()
    }

    /// `x0 .. x{D-1}`, each continuous on `[-R, R]`.
    pub fn space(&self) -> SearchSpace {
        let r = self.function().bound();
        let specs = (0..self.dim)
            .map(|i| ParamSpec::continuous(&format!("x{i}"), -r, r))
            .collect();
        SearchSpace::new(specs).expect("benchmark spaces are valid")
    }

    /// Noiseless value; errors outside the box.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::MalformedData(format!(
                "{} expects {} coordinates, got {}",
                self,
                self.dim,
                x.len()
            )));
        }
        let f = self.function();
        let r = f.bound();
        if let Some(v) = x.iter().find(|v| !(v.abs() <= r)) {
            return Err(domain_err(format!("{self} box [-{r}, {r}]"), *v));
        }
        Ok(f.value(x))
    }

    /// Observed value: the noiseless value plus `N(0, noise_std^2)` noise.
    pub fn evaluate<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        let y = self.value(x)?;
        Ok(if self.noise_std > 0.0 {
            y + self.noise_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            y
        })
    }

    pub fn coordinates(&self, config: &Configuration) -> Result<Vec<f64>> {
        config
            .values
            .iter()
            .map(|v| {
                v.and_then(|v| v.as_real())
                    .ok_or_else(|| Error::MalformedData("benchmark configurations are fully real".into()))
            })
            .collect()
    }
}

impl fmt::Display for BenchmarkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}d", self.name, self.dim)
    }
}

impl FromStr for BenchmarkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || config_err(format!("benchmark must look like `sphere-5d`, got `{s}`"));
        let (name, dim) = s.rsplit_once('-').ok_or_else(bad)?;
        let dim = dim.strip_suffix('d').and_then(|d| d.parse().ok()).ok_or_else(bad)?;
        Self::new(name, dim, 0.0)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BenchmarkSpecRepr {
    Short(String),
    Full {
        name: String,
        #[serde(default)]
        noise_std: f64,
    },
}

impl TryFrom<BenchmarkSpecRepr> for BenchmarkSpec {
    type Error = Error;

    fn try_from(r: BenchmarkSpecRepr) -> Result<Self> {
        match r {
            BenchmarkSpecRepr::Short(s) => s.parse(),
            BenchmarkSpecRepr::Full { name, noise_std } => {
                let base: BenchmarkSpec = name.parse()?;
                Self::new(&base.name, base.dim, noise_std)
            }
        }
    }
}

impl From<BenchmarkSpec> for BenchmarkSpecRepr {
    fn from(s: BenchmarkSpec) -> Self {
        if s.noise_std == 0.0 {
            BenchmarkSpecRepr::Short(s.to_string())
        } else {
            BenchmarkSpecRepr::Full {
                name: s.to_string(),
                noise_std: s.noise_std,
            }
        }
    }
}

/// Uniform sampling over the box. Draws follow the same stream protocol as
/// a study with the same seed.
pub fn random_search(spec: &BenchmarkSpec, n_trials: usize, seed: u64) -> Result<StudyResult> {
    if n_trials == 0 {
        return Err(config_err("random search needs at least one trial"));
    }
    let space = spec.space();
    let mut rng = sampling_rng(seed);
    let mut noise = stream_rng(seed, NOISE_STREAM);
    let mut trials = Vec::with_capacity(n_trials);
    for order in 1..=n_trials {
        let start = std::time::Instant::now();
        let config = space.random_sample(&mut rng);
        let x = spec.coordinates(&config)?;
        let value = spec.evaluate(&x, &mut noise)?;
        trials.push(TrialRecord {
            order,
            params: space.to_raw_map(&config)?,
            value,
            elapsed: start.elapsed().as_secs_f64(),
            true_value: (spec.noise_std > 0.0).then(|| spec.value(&x)).transpose()?,
            error: None,
        });
    }
    Ok(StudyResult::new("random_search", &spec.to_string(), seed, None, trials))
}
