use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use toml::{Table, Value};

use super::config::{config_from_table, ConfigErrors, ConfigIssue, ExperimentConfig};
use super::run::{run_experiment_seeded, RunResult};
use super::RunError;
use crate::models::derive_seed;

/// One swept key with its values, e.g. `control.strength = [0, π, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    /// Dotted path `section.key`.
    pub key: String,
    pub values: Vec<Value>,
}

/// Parses `section.key=v1,v2,...`. Values are TOML literals; bare words are
/// taken as strings and `2pi`, `0.5pi`, `pi` as multiples of π.
pub fn parse_sweep_values(spec: &str) -> Result<SweepAxis, ConfigErrors> {
    let Some((key, list)) = spec.split_once('=') else {
        return Err(ConfigErrors::single(spec, "expected key=v1,v2,..."));
    };
    let key = key.trim().to_string();
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(parse_value)
        .collect::<Vec<_>>();
    if values.is_empty() {
        return Err(ConfigErrors::single(key, "no sweep values given"));
    }
    Ok(SweepAxis { key, values })
}

fn parse_value(s: &str) -> Value {
    if let Some(head) = s.strip_suffix("pi") {
        let factor = if head.is_empty() { Some(1.0) } else { head.trim_end_matches('*').parse::<f64>().ok() };
        if let Some(f) = factor {
            return Value::Float(f * std::f64::consts::PI);
        }
    }
    match format!("v = {s}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => Value::String(s.to_string()),
    }
}

/// All cells of a sweep in row-major order of the axes.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    /// Swept values and result of each cell.
    pub cells: Vec<(Vec<Value>, RunResult)>,
}

fn show(v: &Value) -> String {
    match v {
        Value::Float(x) => format!("{x:.16e}"),
        Value::Integer(i) => i.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SweepResult {
    /// One row per cell: the cell index, the swept values and the final value
    /// of every output column.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("cell");
        for a in &self.axes {
            write!(out, ",{}", a.key).expect("writing to a String");
        }
        if let Some((_, first)) = self.cells.first() {
            for c in &first.columns {
                write!(out, ",final_{c}").expect("writing to a String");
            }
        }
        out.push('\n');
        for (i, (vals, res)) in self.cells.iter().enumerate() {
            write!(out, "{i}").expect("writing to a String");
            for v in vals {
                write!(out, ",{}", show(v)).expect("writing to a String");
            }
            if let Some(last) = res.rows.last() {
                for x in last {
                    write!(out, ",{x:.16e}").expect("writing to a String");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `cell_NNN.csv` (plus metadata) per cell and `summary.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let io = |p: &Path| {
            let p = p.display().to_string();
            move |source| RunError::Io { path: p, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (i, (_, res)) in self.cells.iter().enumerate() {
            res.write(&dir.join(format!("cell_{i:03}.csv")))?;
        }
        let summary = dir.join("summary.csv");
        std::fs::write(&summary, self.summary_csv()).map_err(io(&summary))
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigIssue> {
    let unresolved = || ConfigIssue { path: key.to_string(), message: "sweep key does not resolve in the config".into() };
    let (section, field) = key.split_once('.').ok_or_else(unresolved)?;
    let slot = table
        .get_mut(section)
        .and_then(Value::as_table_mut)
        .and_then(|t| t.get_mut(field))
        .ok_or_else(unresolved)?;
    *slot = value;
    Ok(())
}

/// Runs the Cartesian product of `axes` over `cfg`. Cell `i` gets the seed
/// `derive_seed(master_seed, i)`; an empty sweep is a single run with the
/// master seed itself. Cells run in parallel and are reported in index
/// order.
pub fn run_sweep(cfg: &ExperimentConfig, axes: &[SweepAxis]) -> Result<SweepResult, RunError> {
    let base = cfg.to_table();
    let mut probe = base.clone();
    let mut issues = Vec::new();
    for a in axes {
        if let Err(e) = set_path(&mut probe, &a.key, a.values[0].clone()) {
            issues.push(e);
        }
    }
    if !issues.is_empty() {
        return Err(ConfigErrors(issues).into());
    }
    let mut combos: Vec<Vec<Value>> = vec![Vec::new()];
    for a in axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                a.values.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push(v.clone());
                    next
                })
            })
            .collect();
    }
    let mut configs = Vec::with_capacity(combos.len());
    for combo in &combos {
        let mut table = base.clone();
        for (a, v) in axes.iter().zip(combo) {
            set_path(&mut table, &a.key, v.clone()).expect("checked above");
        }
        configs.push(config_from_table(&table)?);
    }
    let master = cfg.ensemble.master_seed;
    let results: Vec<RunResult> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let seed = if axes.is_empty() { master } else { derive_seed(master, i as u64) };
            run_experiment_seeded(c, seed)
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepResult { axes: axes.to_vec(), cells: combos.into_iter().zip(results).collect() })
}
