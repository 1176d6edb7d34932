//! Configuration, verdict reports and experiment orchestration.

mod config;
mod experiments;
mod tasks;

pub use config::{parse_manifold, parse_region, ExperimentConfig, CONFIG_KEYS};
pub use experiments::{
    exp_analytic_identities, exp_doubling, exp_fractional_equivalence, exp_isometric_consistency, exp_nell_pipeline,
    exp_recovery, exp_torus_distinguish, exp_wave_oracle, run_experiment, EXPERIMENTS,
};
pub use tasks::{run_task, Task};

use crate::csv::{num, CsvTable};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

/// One verdict with its numeric margin.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, relation: Relation::AtMost, passed: value <= threshold }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, relation: Relation::AtLeast, passed: value >= threshold }
    }

    /// Boolean outcome recorded as 1 or 0 against a threshold of 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            num(self.value),
            self.relation.symbol(),
            num(self.threshold)
        )
    }
}

/// Checks plus the CSV tables an experiment or task produced.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub tables: Vec<(String, CsvTable)>,
    /// Extra non-CSV outputs as (file name, contents).
    pub files: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentReport { name: name.into(), checks: Vec::new(), tables: Vec::new(), files: Vec::new() }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn table(&mut self, name: impl Into<String>, t: CsvTable) {
        self.tables.push((name.into(), t));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Writes `<name>_<table>.csv` for every table.
    pub fn write_tables(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (t, table) in &self.tables {
            table.write_to(&dir.join(format!("{}_{}.csv", self.name, t)))?;
        }
        for (f, text) in &self.files {
            std::fs::write(dir.join(f), text)?;
        }
        Ok(())
    }
}

/// `experiment, check, value, relation, threshold, verdict` for all reports.
pub fn report_table(reports: &[ExperimentReport]) -> CsvTable {
    let mut t = CsvTable::new(&["experiment", "check", "value", "relation", "threshold", "verdict"]);
    for r in reports {
        for c in &r.checks {
            t.push(vec![
                r.name.clone(),
                c.name.clone(),
                num(c.value),
                c.relation.symbol().into(),
                num(c.threshold),
                if c.passed { "PASS" } else { "FAIL" }.into(),
            ]);
        }
    }
    t
}

/// Writes every report's tables and the aggregate `report.csv`.
pub fn write_reports(reports: &[ExperimentReport], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in reports {
        r.write_tables(dir)?;
    }
    report_table(reports).write_to(&dir.join("report.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", 1.5, 1.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(Check::at_least("b", 2.0, 1.0).passed);
        assert!(!Check::holds("c", false).passed);
        assert!(Check::at_most("a", 1e-12, 1e-10).line().starts_with("PASS a: "));
    }

    #[test]
    fn aggregate_table_has_one_row_per_check() {
        let mut r = ExperimentReport::new("x");
        r.check(Check::at_most("a", 0.0, 1.0));
        r.check(Check::at_least("b", 0.0, 1.0));
        let t = report_table(&[r.clone(), r]);
        assert_eq!(t.rows.len(), 4);
        assert!(t.render().starts_with("experiment,check,value,relation,threshold,verdict\n"));
    }
}
