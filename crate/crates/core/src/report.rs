//! Outcome tables for the command line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Result;
use crate::oracle::simulate;
use crate::script::ExperimentScript;
use crate::state::{max_discrepancy, Distribution};
use crate::tensor::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Multitime,
    Oracle,
    Both,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Multitime => "multitime",
            Engine::Oracle => "oracle",
            Engine::Both => "both",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub engine: Engine,
    pub records: Vec<String>,
    /// Primary distribution: the multi-time engine unless only the oracle ran.
    pub distribution: Distribution,
    pub oracle: Option<BTreeMap<Vec<String>, f64>>,
    pub max_discrepancy: Option<f64>,
    pub prob_tol: f64,
}

impl Report {
    /// `None` unless both engines ran.
    pub fn passed(&self) -> Option<bool> {
        self.max_discrepancy.map(|d| d <= self.prob_tol)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# multitime-qsim report\n");
        let _ = writeln!(out, "# engine: {}", self.engine.name());
        let _ = writeln!(
            out,
            "# records: {}",
            if self.records.is_empty() {
                "-".to_string()
            } else {
                self.records.join(",")
            }
        );
        out.push_str("outcome\tprobability\trelative_weight");
        if self.oracle.is_some() {
            out.push_str("\toracle_probability");
        }
        out.push('\n');
        for (outcome, w) in &self.distribution.entries {
            let key = if outcome.is_empty() {
                "-".to_string()
            } else {
                outcome.join(",")
            };
            let _ = write!(out, "{key}\t{:.9}\t{:.9}", w.probability, w.relative_weight);
            if let Some(o) = &self.oracle {
                let _ = write!(out, "\t{:.9}", o.get(outcome).copied().unwrap_or(0.0));
            }
            out.push('\n');
        }
        if let (Some(d), Some(pass)) = (self.max_discrepancy, self.passed()) {
            let _ = writeln!(out, "# max-discrepancy: {d:.3e}");
            let _ = writeln!(out, "# result: {}", if pass { "PASS" } else { "FAIL" });
        }
        out
    }
}

/// Runs the selected engines on a checked script.
pub fn run(script: &ExperimentScript, engine: Engine, tol: Tolerance) -> Result<Report> {
    let records = script.records();
    let multitime = match engine {
        Engine::Oracle => None,
        _ => Some(script.compile(tol)?.probabilities(tol)?),
    };
    let oracle = match engine {
        Engine::Multitime => None,
        _ => Some(simulate(script, tol)?.distribution),
    };
    Ok(match (multitime, oracle) {
        (Some(m), Some(o)) => {
            let o = o.probabilities();
            let d = max_discrepancy(&m.probabilities(), &o);
            Report {
                engine,
                records,
                distribution: m,
                oracle: Some(o),
                max_discrepancy: Some(d),
                prob_tol: tol.prob_tol,
            }
        }
        (Some(d), None) | (None, Some(d)) => Report {
            engine,
            records,
            distribution: d,
            oracle: None,
            max_discrepancy: None,
            prob_tol: tol.prob_tol,
        },
        (None, None) => unreachable!("at least one engine runs"),
    })
}
