//! Persisted trial logs and study results (JSON lines).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// One evaluated trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based query order.
    pub order: usize,
    /// `{name: raw value | null}`.
    pub params: Map<String, Value>,
    pub value: f64,
    /// Wall-clock seconds spent on ask, evaluation and tell.
    pub elapsed: f64,
    /// Noiseless objective, when the observation was noisy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_value: Option<f64>,
    /// Evaluator failure replaced by the penalty value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Outcome of one (method, benchmark, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub method: String,
    pub benchmark: String,
    pub seed: u64,
    /// Effective control parameters of the method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub trials: Vec<TrialRecord>,
    /// `cumulative_min[n] = min(value[0..=n])`.
    pub cumulative_min: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StudyResult {
    pub fn new(method: &str, benchmark: &str, seed: u64, config: Option<Value>, trials: Vec<TrialRecord>) -> Self {
        let cumulative_min = cumulative_min(trials.iter().map(|t| t.value));
        Self {
            method: method.into(),
            benchmark: benchmark.into(),
            seed,
            config,
            trials,
            cumulative_min,
            error: None,
        }
    }

    pub fn failed(method: &str, benchmark: &str, seed: u64, config: Option<Value>, error: String) -> Self {
        Self {
            error: Some(error),
            ..Self::new(method, benchmark, seed, config, Vec::new())
        }
    }

    /// Cumulative minimum after `step` trials (1-based).
    pub fn best_at(&self, step: usize) -> Option<f64> {
        step.checked_sub(1).and_then(|i| self.cumulative_min.get(i)).copied()
    }

    /// Copy with every timing field zeroed, for byte-level comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.trials {
            t.elapsed = 0.0;
        }
        out
    }
}

pub fn cumulative_min(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    values
        .into_iter()
        .scan(f64::INFINITY, |best, v| {
            *best = best.min(v);
            Some(*best)
        })
        .collect()
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize, W: Write>(mut out: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads one JSON document per nonblank line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::MalformedData(format!("line {}: {e}", i + 1)))?;
        items.push(item);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn trial(order: usize, value: f64) -> TrialRecord {
        let mut params = Map::new();
        params.insert("x".into(), json!(value.sqrt()));
        params.insert("c".into(), Value::Null);
        TrialRecord {
            order,
            params,
            value,
            elapsed: 0.25,
            true_value: None,
            error: None,
        }
    }

    #[test]
    fn cumulative_min_is_nonincreasing() {
        assert_eq!(cumulative_min([3.0, 1.0, 2.0, 0.5]), vec![3.0, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let values = [0.1 + 0.2, 1.0 / 3.0, 1e-300, 123456.789e10, std::f64::consts::PI];
        let trials = values.iter().enumerate().map(|(i, &v)| trial(i + 1, v)).collect();
        let res = StudyResult::new("m", "sphere-5d", 3, Some(json!({"a": 1})), trials);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&res)).unwrap();
        let back: Vec<StudyResult> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        for (a, b) in back[0].trials.iter().zip(&res.trials) {
            assert_eq!(a.value.to_bits(), b.value.to_bits());
            assert_eq!(a.params, b.params);
        }
        assert_eq!(back[0], res);
    }

    #[test]
    fn best_at_is_one_based() {
        let res = StudyResult::new("m", "b", 0, None, vec![trial(1, 4.0), trial(2, 1.0)]);
        assert_eq!(res.best_at(1), Some(4.0));
        assert_eq!(res.best_at(2), Some(1.0));
        assert_eq!(res.best_at(0), None);
        assert_eq!(res.best_at(3), None);
    }

    #[test]
    fn malformed_line_names_its_position() {
        let err = read_jsonl::<StudyResult, _>("\n{oops}\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
