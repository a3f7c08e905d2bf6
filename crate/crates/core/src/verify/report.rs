use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// EXACT checks encode inequalities that hold for every conservative
/// symmetric semigroup, so a failure is a bug. EMPIRICAL checks fit
/// constants whose existence is known but whose values are not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Exact,
    Empirical,
}

/// Where a reported number came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub module: String,
    pub operation: String,
    pub grid: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub tier: Tier,
    pub passed: bool,
    /// True when the inequality holds trivially (e.g. `0 <= 0`).
    pub vacuous: bool,
    #[serde(deserialize_with = "crate::report::nullable::map")]
    pub fitted_constants: BTreeMap<String, f64>,
    pub worst_case: String,
    #[serde(deserialize_with = "crate::report::nullable::f64")]
    pub tolerance: f64,
    /// Truncation, divergence and similar warnings.
    pub flags: Vec<String>,
    pub columns: Vec<String>,
    #[serde(deserialize_with = "crate::report::nullable::rows")]
    pub details: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl CheckReport {
    pub fn new(name: &str, tier: Tier, module: &str, operation: &str) -> Self {
        CheckReport {
            name: name.to_string(),
            tier,
            passed: false,
            vacuous: false,
            fitted_constants: BTreeMap::new(),
            worst_case: String::new(),
            tolerance: 0.0,
            flags: Vec::new(),
            columns: Vec::new(),
            details: Vec::new(),
            provenance: Provenance {
                module: module.to_string(),
                operation: operation.to_string(),
                grid: String::new(),
            },
        }
    }

    pub fn constant(&mut self, key: &str, value: f64) -> &mut Self {
        self.fitted_constants.insert(key.to_string(), value);
        self
    }

    pub fn columns(&mut self, cols: &[&str]) -> &mut Self {
        self.columns = cols.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn row(&mut self, row: Vec<f64>) -> &mut Self {
        self.details.push(row);
        self
    }

    pub fn flag(&mut self, flag: impl Into<String>) -> &mut Self {
        let flag = flag.into();
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
        self
    }

    pub fn grid<T: crate::Real>(&mut self, grid: &[T]) -> &mut Self {
        self.provenance.grid = describe_grid(grid);
        self
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let verdict = match (self.passed, self.vacuous) {
            (true, true) => "PASS (vacuous)",
            (true, false) => "PASS",
            (false, _) => "FAIL",
        };
        let tier = match self.tier {
            Tier::Exact => "exact",
            Tier::Empirical => "empirical",
        };
        format!("{verdict} [{tier}] {}: {}", self.name, self.worst_case)
    }
}

/// `"<count> pts [lo, hi]"`.
pub fn describe_grid<T: crate::Real>(grid: &[T]) -> String {
    match (grid.first(), grid.last()) {
        (Some(a), Some(b)) => format!("{} pts [{:e}, {:e}]", grid.len(), a.to_f(), b.to_f()),
        _ => "empty".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_constants_survive_a_round_trip() {
        let mut r = CheckReport::new("x", Tier::Exact, "verify", "test");
        r.constant("ratio", f64::INFINITY).constant("c", 0.5);
        r.columns(&["t", "v"]).row(vec![1.0, f64::NAN]);
        let s = crate::report::to_json_string(&r).unwrap();
        let back: CheckReport = serde_json::from_str(&s).unwrap();
        assert!(back.fitted_constants["ratio"].is_nan());
        assert_eq!(back.fitted_constants["c"], 0.5);
        assert!(back.details[0][1].is_nan());
    }
}
