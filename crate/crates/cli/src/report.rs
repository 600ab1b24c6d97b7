//! Run reports: per-trial rows, a summary recomputed from them, and the CSV
//! and JSON renderings.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;

/// Normal quantile for two-sided 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

pub const BASE_COLUMNS: [&str; 6] = [
    "trial",
    "max_envy_true",
    "max_envy_observed",
    "bound_value",
    "bound_satisfied",
    "fail_events",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub max_envy_true: f64,
    pub max_envy_observed: f64,
    pub bound_value: f64,
    pub bound_satisfied: bool,
    pub fail_events: usize,
    /// Values for the subcommand's extra columns, in order.
    pub extras: Vec<f64>,
    /// Hard invariant failures found in this trial.
    pub violations: Vec<String>,
    pub time_ms: Option<f64>,
}

impl TrialRow {
    pub fn new(trial: usize) -> Self {
        Self {
            trial,
            max_envy_true: 0.0,
            max_envy_observed: 0.0,
            bound_value: 0.0,
            bound_satisfied: true,
            fail_events: 0,
            extras: Vec::new(),
            violations: Vec::new(),
            time_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub success_frequency: f64,
    /// Normal-approximation 95% half-width for `success_frequency`.
    pub success_ci_half_width: f64,
    pub median_max_envy_true: f64,
    pub median_max_envy_observed: f64,
    pub mean_max_envy_true: f64,
    /// 95% half-width for `mean_max_envy_true`.
    pub mean_ci_half_width: f64,
    pub fail_events: usize,
    pub runs_with_fail_events: usize,
    pub hard_violations: usize,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

impl Summary {
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let t = rows.len();
        let tf = t as f64;
        let successes = rows.iter().filter(|r| r.bound_satisfied).count();
        let freq = if t == 0 {
            f64::NAN
        } else {
            successes as f64 / tf
        };
        let mut truth: Vec<f64> = rows.iter().map(|r| r.max_envy_true).collect();
        let mut observed: Vec<f64> = rows.iter().map(|r| r.max_envy_observed).collect();
        let mean = truth.iter().sum::<f64>() / tf;
        let var = if t > 1 {
            truth.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (tf - 1.0)
        } else {
            0.0
        };
        Self {
            trials: t,
            success_frequency: freq,
            success_ci_half_width: Z95 * (freq * (1.0 - freq) / tf).sqrt(),
            median_max_envy_true: median(&mut truth),
            median_max_envy_observed: median(&mut observed),
            mean_max_envy_true: mean,
            mean_ci_half_width: Z95 * (var / tf).sqrt(),
            fail_events: rows.iter().map(|r| r.fail_events).sum(),
            runs_with_fail_events: rows.iter().filter(|r| r.fail_events > 0).count(),
            hard_violations: rows.iter().map(|r| r.violations.len()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub extra_columns: Vec<&'static str>,
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

impl RunReport {
    pub fn new(
        config: ExperimentConfig,
        extra_columns: Vec<&'static str>,
        rows: Vec<TrialRow>,
    ) -> Self {
        let summary = Summary::from_rows(&rows);
        Self {
            config,
            extra_columns,
            rows,
            summary,
        }
    }

    /// True when no trial recorded a hard invariant failure.
    pub fn passed(&self) -> bool {
        self.summary.hard_violations == 0
    }

    pub fn violations(&self) -> impl Iterator<Item = String> + '_ {
        self.rows.iter().flat_map(|r| {
            r.violations
                .iter()
                .map(move |v| format!("trial {}: {v}", r.trial))
        })
    }

    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols: Vec<&'static str> = BASE_COLUMNS.to_vec();
        cols.extend(&self.extra_columns);
        if self.config.timings {
            cols.push("time_ms");
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.columns().join(","))?;
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},{}",
                r.trial,
                r.max_envy_true,
                r.max_envy_observed,
                r.bound_value,
                flag(r.bound_satisfied),
                r.fail_events
            )?;
            for x in &r.extras {
                write!(out, ",{x}")?;
            }
            if self.config.timings {
                write!(out, ",{}", r.time_ms.unwrap_or(f64::NAN))?;
            }
            writeln!(out)?;
        }
        let s = &self.summary;
        writeln!(out, "# subcommand={}", self.config.subcommand)?;
        writeln!(out, "# trials={}", s.trials)?;
        writeln!(out, "# success_frequency={}", s.success_frequency)?;
        writeln!(out, "# success_ci_half_width={}", s.success_ci_half_width)?;
        writeln!(out, "# median_max_envy_true={}", s.median_max_envy_true)?;
        writeln!(
            out,
            "# median_max_envy_observed={}",
            s.median_max_envy_observed
        )?;
        writeln!(out, "# mean_max_envy_true={}", s.mean_max_envy_true)?;
        writeln!(out, "# mean_ci_half_width={}", s.mean_ci_half_width)?;
        writeln!(out, "# fail_events={}", s.fail_events)?;
        writeln!(out, "# runs_with_fail_events={}", s.runs_with_fail_events)?;
        writeln!(out, "# hard_violations={}", s.hard_violations)?;
        for v in self.violations() {
            writeln!(out, "# violation: {v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut obj = Map::new();
                obj.insert("trial".into(), json!(r.trial));
                obj.insert("max_envy_true".into(), json!(r.max_envy_true));
                obj.insert("max_envy_observed".into(), json!(r.max_envy_observed));
                obj.insert("bound_value".into(), json!(r.bound_value));
                obj.insert("bound_satisfied".into(), json!(r.bound_satisfied));
                obj.insert("fail_events".into(), json!(r.fail_events));
                for (name, x) in self.extra_columns.iter().zip(&r.extras) {
                    obj.insert((*name).into(), json!(x));
                }
                if self.config.timings {
                    obj.insert("time_ms".into(), json!(r.time_ms));
                }
                Value::Object(obj)
            })
            .collect();
        json!({
            "subcommand": self.config.subcommand,
            "config": self.config,
            "columns": self.columns(),
            "rows": rows,
            "summary": self.summary,
            "violations": self.violations().collect::<Vec<_>>(),
        })
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut out, &self.to_json())?;
        writeln!(out)
    }

    /// Writes CSV or JSON according to the configuration.
    pub fn write<W: Write>(&self, out: W) -> io::Result<()> {
        if self.config.json {
            self.write_json(out)
        } else {
            self.write_csv(out)
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}
