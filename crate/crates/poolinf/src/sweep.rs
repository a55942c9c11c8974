//! Configuration matrices.
//!
//! A `scenarios` sweep lists cells, each a base scenario file patched with
//! `common` and then the cell's own `set` (JSON merge patches, applied in that
//! order):
//!
//! ```json
//! {
//!   "kind": "scenarios",
//!   "common": {"n_users": 1000},
//!   "cells": [
//!     {"name": "eps-0.01", "base": "web-weak.json", "set": {"mechanism": {"epsilon": 0.01}}}
//!   ]
//! }
//! ```
//!
//! Each cell writes the usual run files into `<out>/<name>/`; `<out>/sweep.csv`
//! collects `cell,adversary,n,auc,mean_jsd`.
//!
//! A `utility` sweep estimates popularity from simulated external datasets
//! for every `(epsilon, size)` pair and writes `<out>/utility.csv` with
//! `epsilon,n,mae,mape_top80`.

use std::path::{Path, PathBuf};

use poolinf_core::estimation::{
    mae, mape_top80, project_to_simplex, simulate_external_counts, SIMPLEX_TOL,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Overrides, ScenarioConfig};
use crate::io::{csv_error, csv_writer, flush};
use crate::output::Report;
use crate::pipeline::{simulate, Dumps};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub name: String,
    pub base: PathBuf,
    #[serde(default)]
    pub set: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepConfig {
    Scenarios {
        #[serde(default)]
        common: Value,
        cells: Vec<Cell>,
    },
    Utility {
        base: PathBuf,
        epsilons: Vec<f64>,
        sizes: Vec<u64>,
    },
}

pub fn load_sweep(path: &Path) -> Result<(SweepConfig, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let config = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        Error::Config(format!(
            "{}: field `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })?;
    let path = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, dir))
}

fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// The scenario of one cell after patching.
pub fn cell_config(
    dir: &Path,
    common: &Value,
    cell: &Cell,
    overrides: Overrides,
) -> Result<ScenarioConfig> {
    let base = dir.join(&cell.base);
    let mut doc = read_value(&base)?;
    json_patch::merge(&mut doc, common);
    json_patch::merge(&mut doc, &cell.set);
    if let Value::Object(map) = &mut doc {
        map.entry("name")
            .or_insert_with(|| Value::String(cell.name.clone()));
    }
    let mut config = ScenarioConfig::from_json_str(&doc.to_string(), &base)
        .map_err(|e| Error::Config(format!("cell `{}`: {e}", cell.name)))?;
    config.apply(overrides);
    Ok(config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityRow {
    pub epsilon: f64,
    pub n: u64,
    pub mae: f64,
    pub mape: f64,
}

/// Curator utility of the popularity estimate for every `(epsilon, size)`.
pub fn utility(base: &ScenarioConfig, epsilons: &[f64], sizes: &[u64]) -> Result<Vec<UtilityRow>> {
    let pools = base.resolve_pools()?;
    let truth = base.resolve_true_popularity(&pools)?;
    let mut rows = Vec::new();
    for &epsilon in epsilons {
        let mut spec = base.mechanism.clone();
        spec.epsilon = Some(epsilon);
        let mech = spec.build(pools.universe_size())?;
        for &n in sizes {
            let counts = simulate_external_counts(&mech, &truth, n, base.master_seed)?;
            let est = project_to_simplex(&counts.frequencies()?, SIMPLEX_TOL)?;
            let row = UtilityRow {
                epsilon,
                n,
                mae: mae(&est, &truth)?,
                mape: mape_top80(&est, &truth)?,
            };
            log::info!("epsilon {epsilon} n {n}: mae {} mape {}", row.mae, row.mape);
            rows.push(row);
        }
    }
    Ok(rows)
}

fn write_utility(path: &Path, rows: &[UtilityRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epsilon", "n", "mae", "mape_top80"])
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.n.to_string(),
            r.mae.to_string(),
            r.mape.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    flush(path, w)
}

#[derive(Debug, Clone)]
pub enum SweepResult {
    Scenarios(Vec<(String, Report)>),
    Utility(Vec<UtilityRow>),
}

pub fn run_sweep(
    path: &Path,
    out: &Path,
    overrides: Overrides,
    pool: &rayon::ThreadPool,
) -> Result<SweepResult> {
    let (config, dir) = load_sweep(path)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    match config {
        SweepConfig::Scenarios { common, cells } => {
            let mut names: Vec<&str> = cells.iter().map(|c| c.name.as_str()).collect();
            names.sort_unstable();
            if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Config(format!("duplicate cell name `{}`", w[0])));
            }
            // Resolve every cell first so a bad cell fails before any work.
            let configs: Vec<ScenarioConfig> = cells
                .iter()
                .map(|c| cell_config(&dir, &common, c, overrides))
                .collect::<Result<_>>()?;
            let mut results = Vec::new();
            for (cell, config) in cells.iter().zip(&configs) {
                log::info!("cell {}", cell.name);
                let report = simulate(config, &out.join(&cell.name), pool, Dumps::default())?;
                results.push((cell.name.clone(), report));
            }
            let path = out.join("sweep.csv");
            let mut w = csv_writer(&path)?;
            w.write_record(["cell", "adversary", "n", "auc", "mean_jsd"])
                .map_err(|e| csv_error(&path, e))?;
            for (name, r) in &results {
                for n in &r.per_n {
                    w.write_record([
                        name.clone(),
                        r.adversary.clone(),
                        n.n.to_string(),
                        n.auc.map(|a| a.to_string()).unwrap_or_default(),
                        r.mean_jsd.map(|a| a.to_string()).unwrap_or_default(),
                    ])
                    .map_err(|e| csv_error(&path, e))?;
                }
            }
            flush(&path, w)?;
            Ok(SweepResult::Scenarios(results))
        }
        SweepConfig::Utility {
            base,
            epsilons,
            sizes,
        } => {
            let mut base = crate::config::load_scenario(&dir.join(base))?;
            base.apply(overrides);
            let rows = utility(&base, &epsilons, &sizes)?;
            write_utility(&out.join("utility.csv"), &rows)?;
            Ok(SweepResult::Utility(rows))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patches_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("base.json"),
            r#"{"pools": {"type": "sizes", "universe_size": 40, "sizes": [5, 5]},
                "mechanism": {"variant": "cms", "epsilon": 8, "m": 16, "num_hashes": 4},
                "true_popularity": {"type": "uniform"},
                "est_popularity": {"type": "uniform"},
                "n_users": 50}"#,
        )
        .unwrap();
        let cell = Cell {
            name: "c".into(),
            base: "base.json".into(),
            set: serde_json::json!({"mechanism": {"epsilon": 1}, "pools": {"universe_size": 80}}),
        };
        let common = serde_json::json!({"n_users": 10, "mechanism": {"epsilon": 2}});
        let c = cell_config(
            dir.path(),
            &common,
            &cell,
            Overrides {
                seed: Some(4),
                full: false,
            },
        )
        .unwrap();
        assert_eq!(c.mechanism.epsilon, Some(1.0));
        assert_eq!(c.mechanism.m, Some(16));
        assert_eq!(c.n_users, 10);
        assert_eq!(c.master_seed, 4);
        assert_eq!(c.name.as_deref(), Some("c"));
        assert_eq!(c.resolve_pools().unwrap().universe_size(), 80);

        let bad = Cell {
            set: serde_json::json!({"mechanism": {"epsylon": 1}}),
            ..cell
        };
        let e = cell_config(dir.path(), &common, &bad, Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("epsylon"), "{e}");
    }
}
