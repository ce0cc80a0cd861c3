//! Line-oriented experiment description format.
//!
//! ```text
//! system S dim 2
//! state up = [1, 0]
//! state upx = [0.7071067811865476, 0.7071067811865476]
//! operator sz = [[1, 0], [0, -1]]
//! prepare S up
//! measure S projective sz as z
//! postselect S upx
//! ```

mod parser;
mod render;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::kraus::projective_set;
use crate::script::{ExperimentScript, Step};
use crate::state::MeasurementPeriod;
use crate::tensor::{DenseTensor, Tolerance, C64};

pub use parser::{parse, parse_with};
pub use render::render;

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    System {
        name: String,
        dim: usize,
    },
    State {
        name: String,
        values: Vec<C64>,
    },
    Operator {
        name: String,
        rows: Vec<Vec<C64>>,
    },
    Prepare {
        systems: Vec<String>,
        state: String,
    },
    Unitary {
        systems: Vec<String>,
        operator: String,
    },
    MeasureProjective {
        systems: Vec<String>,
        operator: String,
        label: String,
    },
    /// Repeated outcome labels are lumped into one outcome.
    MeasureKraus {
        systems: Vec<String>,
        operators: Vec<(String, String)>,
        label: Option<String>,
    },
    Measure2 {
        system: String,
        first: (String, String),
        second: (String, String),
        label: String,
    },
    Postselect {
        systems: Vec<String>,
        state: String,
    },
    Slot {
        name: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticCode {
    SyntaxError,
    UnknownSystem,
    UnknownName,
    DuplicateName,
    DimensionMismatch,
    NotHermitian,
    NotUnitary,
    IncompleteKraus,
    InvalidScript,
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.code, self.message)
    }
}

/// Parsed source with positions and diagnostics. The document holds only
/// the statements that passed every check.
#[derive(Debug, Clone)]
pub struct ScriptDocument {
    pub source: String,
    pub document: Document,
    /// Source line of each statement.
    pub lines: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ScriptDocument {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Record label of a measurement statement; unlabelled Kraus measurements
/// are called `m<n>` after their position among all measurements.
pub(crate) fn record_label(statement: &Statement, ordinal: usize) -> Option<String> {
    match statement {
        Statement::MeasureProjective { label, .. } | Statement::Measure2 { label, .. } => Some(label.clone()),
        Statement::MeasureKraus { label, .. } => Some(label.clone().unwrap_or_else(|| format!("m{ordinal}"))),
        _ => None,
    }
}

/// Builds the experiment script of a document whose statements already
/// passed the per-statement checks. On failure returns the index of the
/// offending statement, if there is one.
pub fn to_script(doc: &Document, tol: Tolerance) -> Result<ExperimentScript, (Option<usize>, Error)> {
    let mut systems = Vec::new();
    let mut states: BTreeMap<&str, &Vec<C64>> = BTreeMap::new();
    let mut operators: BTreeMap<&str, &Vec<Vec<C64>>> = BTreeMap::new();
    let mut steps = Vec::new();
    let mut origin = Vec::new();
    let mut measures = 0;
    let vector = |name: &str, states: &BTreeMap<&str, &Vec<C64>>| -> Result<DenseTensor, Error> {
        let v = states
            .get(name)
            .ok_or_else(|| Error::Script(format!("unknown state {name}")))?;
        DenseTensor::vector((*v).clone())
    };
    let matrix = |name: &str, operators: &BTreeMap<&str, &Vec<Vec<C64>>>| -> Result<DenseTensor, Error> {
        let m = operators
            .get(name)
            .ok_or_else(|| Error::Script(format!("unknown operator {name}")))?;
        DenseTensor::from_rows(m)
    };
    for (k, st) in doc.statements.iter().enumerate() {
        let at = |e: Error| (Some(k), e);
        let step = match st {
            Statement::System { name, dim } => {
                systems.push((name.clone(), *dim));
                None
            }
            Statement::State { name, values } => {
                states.insert(name, values);
                None
            }
            Statement::Operator { name, rows } => {
                operators.insert(name, rows);
                None
            }
            Statement::Prepare { systems, state } => Some(Step::Prepare {
                systems: systems.clone(),
                state: vector(state, &states).map_err(at)?,
            }),
            Statement::Postselect { systems, state } => Some(Step::Postselect {
                systems: systems.clone(),
                state: vector(state, &states).map_err(at)?,
            }),
            Statement::Unitary { systems, operator } => Some(Step::Unitary {
                systems: systems.clone(),
                matrix: matrix(operator, &operators).map_err(at)?,
            }),
            Statement::MeasureProjective { systems, operator, .. } => {
                measures += 1;
                let h = matrix(operator, &operators).map_err(at)?;
                let set = projective_set(&h, &MeasurementPeriod::closed("_", "a", "b"), tol).map_err(at)?;
                let label = record_label(st, measures).expect("measure");
                let names: Vec<&str> = systems.iter().map(|s| s.as_str()).collect();
                Some(Step::measure(&names, &set, &label))
            }
            Statement::MeasureKraus {
                systems,
                operators: ops,
                ..
            } => {
                measures += 1;
                let mut outcomes: Vec<(String, Vec<DenseTensor>)> = Vec::new();
                for (label, op) in ops {
                    let m = matrix(op, &operators).map_err(at)?;
                    match outcomes.iter_mut().find(|(l, _)| l == label) {
                        Some((_, list)) => list.push(m),
                        None => outcomes.push((label.clone(), vec![m])),
                    }
                }
                Some(Step::Measure {
                    systems: systems.clone(),
                    outcomes,
                    label: record_label(st, measures).expect("measure"),
                })
            }
            Statement::Measure2 {
                system,
                first,
                second,
                label,
            } => {
                measures += 1;
                Some(Step::MeasureMultiTime {
                    system: system.clone(),
                    terms: vec![
                        (1.0, matrix(&first.0, &operators).map_err(at)?, first.1.clone()),
                        (-1.0, matrix(&second.0, &operators).map_err(at)?, second.1.clone()),
                    ],
                    label: label.clone(),
                })
            }
            Statement::Slot { name } => Some(Step::Slot(name.clone())),
        };
        if let Some(step) = step {
            steps.push(step);
            origin.push(k);
        }
    }
    ExperimentScript::check(systems, steps, tol).map_err(|issue| (issue.step.map(|s| origin[s]), issue.error))
}

impl ScriptDocument {
    /// The experiment script, once the document has no diagnostics.
    pub fn script(&self, tol: Tolerance) -> Result<ExperimentScript, Vec<Diagnostic>> {
        if !self.is_ok() {
            return Err(self.diagnostics.clone());
        }
        to_script(&self.document, tol).map_err(|(k, e)| vec![script_diagnostic(&self.lines, k, e)])
    }
}

pub(crate) fn script_diagnostic(lines: &[usize], statement: Option<usize>, e: Error) -> Diagnostic {
    let code = match e {
        Error::NotUnitary { .. } => DiagnosticCode::NotUnitary,
        Error::NotHermitian { .. } => DiagnosticCode::NotHermitian,
        Error::IncompleteKraus { .. } => DiagnosticCode::IncompleteKraus,
        Error::Shape(_) => DiagnosticCode::DimensionMismatch,
        _ => DiagnosticCode::InvalidScript,
    };
    let message = match e {
        Error::Script(m) => m,
        other => other.to_string(),
    };
    // whole-script problems are reported at the last statement
    let line = statement.map_or_else(|| lines.last().copied().unwrap_or(1), |k| lines[k]);
    Diagnostic {
        line,
        col: 1,
        code,
        message,
    }
}
