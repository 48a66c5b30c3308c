//! Report assembly and emission: `summary.json`, `trials.csv` and optional field dumps.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use halfheat::Field;

use crate::config::ExperimentConfig;

/// A fixed-column table; every emitted row is prefixed with the seed and config hash.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, seed: u64, config_hash: &str) -> String {
        let mut out = String::from("seed,config_hash");
        for h in &self.header {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{seed},{config_hash}");
            for cell in row {
                out.push(',');
                out.push_str(cell);
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip formatting, scientific outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug)]
pub struct Outcome {
    pub results: Value,
    pub table: Table,
    pub failures: Vec<String>,
    pub fields: Vec<(String, Field)>,
}

impl Outcome {
    pub fn new(results: impl Serialize, table: Table, failures: Vec<String>) -> Self {
        Self {
            results: serde_json::to_value(results).expect("results serialize"),
            table,
            failures,
            fields: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: crate::config::ExperimentKind,
    seed: u64,
    config_hash: &'a str,
    passed: bool,
    failures: &'a [String],
    config: &'a ExperimentConfig,
    results: &'a Value,
}

pub fn summary_json(cfg: &ExperimentConfig, outcome: &Outcome) -> String {
    let hash = cfg.hash();
    let s = Summary {
        experiment: cfg.experiment,
        seed: cfg.seed,
        config_hash: &hash,
        passed: outcome.passed(),
        failures: &outcome.failures,
        config: cfg,
        results: &outcome.results,
    };
    let mut out = serde_json::to_string_pretty(&s).expect("summary serializes");
    out.push('\n');
    out
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    std::fs::write(dir.join("summary.json"), summary_json(cfg, outcome))?;
    std::fs::write(dir.join("trials.csv"), outcome.table.to_csv(cfg.seed, &cfg.hash()))?;
    if cfg.output.write_fields {
        for (name, field) in &outcome.fields {
            halfheat::htpf::save(&dir.join(format!("{name}.htpf")), field)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_prefixes_seed_and_hash() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(1.5), opt(None)]);
        assert_eq!(t.to_csv(3, "abc"), "seed,config_hash,a,b\n3,abc,1.5,\n");
        assert_eq!(num(1e-12), "1e-12");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(0.0), "0");
    }
}
