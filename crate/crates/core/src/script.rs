//! Sequential experiment descriptions and their translation into a
//! multi-time state plus one joint measurement.
//!
//! A script is read forward in time. `Prepare` starts a system's wire,
//! `Postselect` ends it; a system touched before any preparation starts
//! from a maximally mixed past. Everything in between (unitaries and
//! measurements, possibly acting on several systems) becomes a single
//! multi-period Kraus operator per branch of recorded outcomes.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::kraus::{KrausSet, MultiTimeObservable, PeriodBinding};
use crate::state::{self, BoundarySpec, Distribution, MeasurementPeriod, MultiTimeState, TimeLabel};
use crate::tensor::{c64, contract, kron, unitarity_deviation, DenseTensor, Tolerance};

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Fresh preparation of the listed systems in a joint state.
    Prepare {
        systems: Vec<String>,
        state: DenseTensor,
    },
    Unitary {
        systems: Vec<String>,
        matrix: DenseTensor,
    },
    /// Generalised measurement; each outcome may carry several operators.
    Measure {
        systems: Vec<String>,
        outcomes: Vec<(String, Vec<DenseTensor>)>,
        label: String,
    },
    /// Conditioning on finding the listed systems in `state`.
    Postselect {
        systems: Vec<String>,
        state: DenseTensor,
    },
    /// Named position on the time line, used by multi-time observables and
    /// as a probe site by preparation plans.
    Slot(String),
    /// Projective measurement of `Σ c_k O_k(slot_k)` on one system.
    MeasureMultiTime {
        system: String,
        terms: Vec<(f64, DenseTensor, String)>,
        label: String,
    },
}

impl Step {
    /// Measure step with the operators of a single-period set.
    pub fn measure(systems: &[&str], set: &KrausSet, label: &str) -> Self {
        Step::Measure {
            systems: systems.iter().map(|s| s.to_string()).collect(),
            outcomes: set
                .outcomes()
                .iter()
                .map(|(l, ops)| (l.clone(), ops.iter().map(|op| op.as_matrix()).collect()))
                .collect(),
            label: label.to_owned(),
        }
    }

    pub fn prepare(systems: &[&str], state: DenseTensor) -> Self {
        Step::Prepare {
            systems: systems.iter().map(|s| s.to_string()).collect(),
            state,
        }
    }

    pub fn unitary(systems: &[&str], matrix: DenseTensor) -> Self {
        Step::Unitary {
            systems: systems.iter().map(|s| s.to_string()).collect(),
            matrix,
        }
    }

    pub fn postselect(systems: &[&str], state: DenseTensor) -> Self {
        Step::Postselect {
            systems: systems.iter().map(|s| s.to_string()).collect(),
            state,
        }
    }

    fn systems(&self) -> Vec<&str> {
        match self {
            Step::Prepare { systems, .. }
            | Step::Unitary { systems, .. }
            | Step::Measure { systems, .. }
            | Step::Postselect { systems, .. } => systems.iter().map(|s| s.as_str()).collect(),
            Step::MeasureMultiTime { system, .. } => vec![system.as_str()],
            Step::Slot(_) => Vec::new(),
        }
    }
}

/// A validation failure and the step it was found at.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptIssue {
    pub step: Option<usize>,
    pub error: Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Life {
    Untouched,
    Alive,
    Consumed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentScript {
    systems: Vec<(String, usize)>,
    steps: Vec<Step>,
}

impl ExperimentScript {
    /// Validates references, shapes, unitarity, completeness and the
    /// prepare/postselect life cycle of every system.
    pub fn new(systems: Vec<(String, usize)>, steps: Vec<Step>, tol: Tolerance) -> Result<Self> {
        Self::check(systems, steps, tol).map_err(|issue| match (issue.step, issue.error) {
            (Some(k), Error::Script(m)) => Error::Script(format!("step {}: {m}", k + 1)),
            (_, e) => e,
        })
    }

    /// Like [`ExperimentScript::new`] but reports which step (0-based) is at
    /// fault, if any single step is.
    pub fn check(
        systems: Vec<(String, usize)>,
        steps: Vec<Step>,
        tol: Tolerance,
    ) -> std::result::Result<Self, ScriptIssue> {
        let script = Self { systems, steps };
        let mut at = None;
        match script.validate(tol, &mut at) {
            Ok(()) => Ok(script),
            Err(error) => Err(ScriptIssue { step: at, error }),
        }
    }

    pub fn systems(&self) -> &[(String, usize)] {
        &self.systems
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn dim(&self, system: &str) -> Option<usize> {
        self.systems.iter().find(|(n, _)| n == system).map(|(_, d)| *d)
    }

    /// Record labels of all measurements, in step order.
    pub fn records(&self) -> Vec<String> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Measure { label, .. } | Step::MeasureMultiTime { label, .. } => Some(label.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn has_multi_time(&self) -> bool {
        self.steps.iter().any(|s| matches!(s, Step::MeasureMultiTime { .. }))
    }

    fn joint_dim(&self, systems: &[&str]) -> Result<usize> {
        let mut seen = BTreeSet::new();
        let mut d = 1;
        for s in systems {
            if !seen.insert(*s) {
                return Err(Error::Script(format!("system {s} listed twice in one step")));
            }
            d *= self
                .dim(s)
                .ok_or_else(|| Error::Script(format!("unknown system {s}")))?;
        }
        Ok(d)
    }

    fn validate(&self, tol: Tolerance, at: &mut Option<usize>) -> Result<()> {
        let mut names = BTreeSet::new();
        for (name, d) in &self.systems {
            if *d == 0 || !names.insert(name.as_str()) {
                return Err(Error::Script(format!("bad declaration of system {name}")));
            }
        }
        let mut life: BTreeMap<&str, Life> = names.iter().map(|n| (*n, Life::Untouched)).collect();
        let mut prepared: BTreeSet<&str> = BTreeSet::new();
        let mut postselected: BTreeSet<&str> = BTreeSet::new();
        let mut labels = BTreeSet::new();
        let mut slots: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut informative = false;
        for (k, step) in self.steps.iter().enumerate() {
            *at = Some(k);
            let here = Error::Script;
            let systems = step.systems();
            let d = self.joint_dim(&systems).map_err(|e| here(e.to_string()))?;
            if let Step::MeasureMultiTime { .. } = step {
                // acts at its slots, not here
            } else if let Step::Prepare { .. } = step {
                for s in &systems {
                    if life[s] == Life::Alive {
                        return Err(here(format!("system {s} is prepared while still in use")));
                    }
                    life.insert(s, Life::Alive);
                    prepared.insert(s);
                }
            } else {
                for s in &systems {
                    match life[s] {
                        Life::Consumed => {
                            return Err(here(format!("system {s} was post-selected and not prepared again")))
                        }
                        Life::Untouched => {
                            life.insert(s, Life::Alive);
                        }
                        Life::Alive => {}
                    }
                }
            }
            match step {
                Step::Prepare { state, .. } | Step::Postselect { state, .. } => {
                    if state.dims() != [d] {
                        return Err(here(format!("state has dims {:?}, expected [{d}]", state.dims())));
                    }
                    if state.frobenius_norm_sq() == 0.0 {
                        return Err(here("zero state vector".into()));
                    }
                    if let Step::Postselect { .. } = step {
                        informative = true;
                        for s in &systems {
                            life.insert(s, Life::Consumed);
                            postselected.insert(s);
                        }
                    }
                }
                Step::Unitary { matrix, .. } => {
                    if matrix.dims() != [d, d] {
                        return Err(here(format!(
                            "unitary has dims {:?}, expected [{d}, {d}]",
                            matrix.dims()
                        )));
                    }
                    let deviation = unitarity_deviation(matrix)?;
                    if deviation > tol.eq_tol {
                        return Err(Error::NotUnitary { deviation });
                    }
                }
                Step::Measure { outcomes, label, .. } => {
                    informative = true;
                    if !labels.insert(label.as_str()) {
                        return Err(here(format!("record label {label} used twice")));
                    }
                    if outcomes.iter().flat_map(|(_, ops)| ops).any(|op| op.dims() != [d, d]) {
                        return Err(here(format!("Kraus operators must be {d}x{d}")));
                    }
                    let period = MeasurementPeriod::closed("_", "a", "b");
                    KrausSet::new(vec![PeriodBinding::square(period, d)], outcomes.clone(), tol)?;
                }
                Step::Slot(name) => {
                    let alive = life
                        .iter()
                        .filter(|(_, l)| **l == Life::Alive)
                        .map(|(s, _)| *s)
                        .collect();
                    if slots.insert(name.as_str(), alive).is_some() {
                        return Err(here(format!("slot {name} defined twice")));
                    }
                }
                Step::MeasureMultiTime { label, terms, .. } => {
                    informative = true;
                    if !labels.insert(label.as_str()) {
                        return Err(here(format!("record label {label} used twice")));
                    }
                    if terms.iter().any(|(_, op, _)| op.dims() != [d, d]) {
                        return Err(here(format!("observable terms must be {d}x{d}")));
                    }
                    let names: BTreeSet<&str> = terms.iter().map(|(_, _, s)| s.as_str()).collect();
                    if names.len() != terms.len() || terms.is_empty() {
                        return Err(Error::OverlappingPeriods("slots must be distinct".into()));
                    }
                }
            }
        }
        // slots referenced by multi-time measurements must see the system alive
        for (k, step) in self.steps.iter().enumerate() {
            *at = Some(k);
            if let Step::MeasureMultiTime { system, terms, .. } = step {
                for (_, _, slot) in terms {
                    if !slots
                        .get(slot.as_str())
                        .is_some_and(|alive| alive.contains(system.as_str()))
                    {
                        return Err(Error::Script(format!("system {system} is not in use at slot {slot}")));
                    }
                }
            }
        }
        *at = None;
        for (s, l) in &life {
            if *l != Life::Untouched && !prepared.contains(s) && !postselected.contains(s) {
                return Err(Error::Script(format!(
                    "system {s} is neither prepared nor post-selected"
                )));
            }
        }
        if !informative {
            return Err(Error::Script("script has no measurement and no post-selection".into()));
        }
        Ok(())
    }

    /// Translates the script into the multi-time engine's inputs.
    pub fn compile(&self, tol: Tolerance) -> Result<CompiledExperiment> {
        Compiler::new(self, tol).run()
    }
}

/// A script as the multi-time engine sees it: the state built from all
/// preparations and post-selections, and one joint measurement over all of
/// its periods whose outcome labels stand for record tuples.
#[derive(Debug, Clone)]
pub struct CompiledExperiment {
    pub records: Vec<String>,
    pub state: MultiTimeState,
    pub measurement: KrausSet,
    tuples: BTreeMap<String, Vec<String>>,
}

impl CompiledExperiment {
    /// Outcome distribution keyed by record tuples.
    ///
    /// The joint measurement is not required to be complete: an unprepared
    /// wire enters with weight `1/d` and a multi-time observable closes its
    /// wire between slots. Normalisation is global either way.
    pub fn probabilities(&self, tol: Tolerance) -> Result<Distribution> {
        let d = state::probabilities_unchecked(&self.state, std::slice::from_ref(&self.measurement), tol)?;
        let entries = d
            .entries
            .into_iter()
            .map(|(key, w)| (self.tuples[&key[0]].clone(), w))
            .collect();
        Ok(Distribution {
            entries,
            normalization: d.normalization,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Leg {
    In(usize),
    Out(usize),
    Wire(String),
    CutIn(String),
    CutOut(String),
}

struct PeriodInfo {
    system: String,
    start: Option<TimeLabel>,
    end: Option<TimeLabel>,
    dim: usize,
}

#[derive(Clone)]
struct Branch {
    record: Vec<String>,
    legs: Vec<Leg>,
    tensor: DenseTensor,
}

struct Compiler<'a> {
    script: &'a ExperimentScript,
    tol: Tolerance,
    periods: Vec<PeriodInfo>,
    current: BTreeMap<String, usize>,
    boundaries: Vec<BoundarySpec>,
    amplitudes: DenseTensor,
    branches: Vec<Branch>,
}

fn time(step: usize) -> TimeLabel {
    TimeLabel::new(format!("t{}", step + 1))
}

impl<'a> Compiler<'a> {
    fn new(script: &'a ExperimentScript, tol: Tolerance) -> Self {
        Self {
            script,
            tol,
            periods: Vec::new(),
            current: BTreeMap::new(),
            boundaries: Vec::new(),
            amplitudes: DenseTensor::scalar(c64(1.0, 0.0)),
            branches: vec![Branch {
                record: Vec::new(),
                legs: Vec::new(),
                tensor: DenseTensor::scalar(c64(1.0, 0.0)),
            }],
        }
    }

    fn dim(&self, s: &str) -> usize {
        self.script.dim(s).expect("validated")
    }

    /// Starts a period for `s`; the new wire is the identity from its in-leg.
    fn open(&mut self, s: &str, start: Option<TimeLabel>) -> Result<()> {
        let d = self.dim(s);
        let p = self.periods.len();
        self.periods.push(PeriodInfo {
            system: s.to_owned(),
            start: start.clone(),
            end: None,
            dim: d,
        });
        self.current.insert(s.to_owned(), p);
        // an unprepared wire starts maximally mixed: δ/√d, as in the oracle
        let scale = if start.is_some() { 1.0 } else { 1.0 / (d as f64).sqrt() };
        let delta = DenseTensor::identity(d).scale(c64(scale, 0.0));
        for b in &mut self.branches {
            b.tensor = kron(&b.tensor, &delta)?;
            b.legs.push(Leg::In(p));
            b.legs.push(Leg::Wire(s.to_owned()));
        }
        Ok(())
    }

    fn ensure_alive(&mut self, systems: &[String]) -> Result<()> {
        for s in systems {
            if !self.current.contains_key(s) {
                self.open(s, None)?;
            }
        }
        Ok(())
    }

    fn apply(&self, branch: &Branch, systems: &[String], op: &DenseTensor) -> Result<Branch> {
        let dims: Vec<usize> = systems.iter().map(|s| self.dim(s)).collect();
        let k = dims.len();
        let op = op.reshape(dims.iter().chain(&dims).copied().collect())?;
        let axes: Vec<usize> = systems
            .iter()
            .map(|s| {
                branch
                    .legs
                    .iter()
                    .position(|l| *l == Leg::Wire(s.clone()))
                    .expect("alive")
            })
            .collect();
        let tensor = contract(&branch.tensor, &axes, &op, &(k..2 * k).collect::<Vec<_>>())?;
        let mut legs: Vec<Leg> = branch
            .legs
            .iter()
            .enumerate()
            .filter(|(i, _)| !axes.contains(i))
            .map(|(_, l)| l.clone())
            .collect();
        legs.extend(systems.iter().map(|s| Leg::Wire(s.clone())));
        Ok(Branch {
            record: branch.record.clone(),
            legs,
            tensor,
        })
    }

    fn run(mut self) -> Result<CompiledExperiment> {
        let mut multi: Vec<(usize, &'a Step)> = Vec::new();
        for (k, step) in self.script.steps.iter().enumerate() {
            match step {
                Step::Prepare { systems, state } => {
                    let norm = state.frobenius_norm_sq().sqrt();
                    self.amplitudes = kron(&self.amplitudes, &state.scale(c64(1.0 / norm, 0.0)))?;
                    for s in systems {
                        self.boundaries.push(BoundarySpec::ket(s, time(k), self.dim(s)));
                    }
                    let dims: Vec<usize> = systems.iter().map(|s| self.dim(s)).collect();
                    self.amplitudes = self.amplitudes.reshape(
                        self.amplitudes.dims()[..self.amplitudes.rank() - 1]
                            .iter()
                            .copied()
                            .chain(dims)
                            .collect(),
                    )?;
                    for s in systems {
                        self.open(s, Some(time(k)))?;
                    }
                }
                Step::Unitary { systems, matrix } => {
                    self.ensure_alive(systems)?;
                    self.branches = self
                        .branches
                        .iter()
                        .map(|b| self.apply(b, systems, matrix))
                        .collect::<Result<_>>()?;
                }
                Step::Measure { systems, outcomes, .. } => {
                    self.ensure_alive(systems)?;
                    let mut next = Vec::new();
                    for b in &self.branches {
                        for (label, ops) in outcomes {
                            for op in ops {
                                let mut nb = self.apply(b, systems, op)?;
                                nb.record.push(label.clone());
                                next.push(nb);
                            }
                        }
                    }
                    self.branches = next;
                }
                Step::Postselect { systems, state } => {
                    self.ensure_alive(systems)?;
                    let norm = state.frobenius_norm_sq().sqrt();
                    let dims: Vec<usize> = systems.iter().map(|s| self.dim(s)).collect();
                    let bra = state.conj().scale(c64(1.0 / norm, 0.0)).reshape(dims)?;
                    self.amplitudes = kron(&self.amplitudes, &bra)?;
                    for s in systems {
                        self.boundaries.push(BoundarySpec::bra(s, time(k), self.dim(s)));
                        let p = self.current.remove(s).expect("alive");
                        self.periods[p].end = Some(time(k));
                        for b in &mut self.branches {
                            let ax = b.legs.iter().position(|l| *l == Leg::Wire(s.clone())).expect("alive");
                            b.legs[ax] = Leg::Out(p);
                        }
                    }
                }
                Step::Slot(name) => {
                    let alive: Vec<String> = self.current.keys().cloned().collect();
                    for s in alive {
                        let wanted = self.script.steps.iter().any(|st| match st {
                            Step::MeasureMultiTime { system, terms, .. } => {
                                *system == s && terms.iter().any(|(_, _, slot)| slot == name)
                            }
                            _ => false,
                        });
                        if !wanted {
                            continue;
                        }
                        let d = self.dim(&s);
                        for b in &mut self.branches {
                            let ax = b.legs.iter().position(|l| *l == Leg::Wire(s.clone())).expect("alive");
                            b.legs[ax] = Leg::CutIn(name.clone());
                            b.tensor = kron(&b.tensor, &DenseTensor::identity(d))?;
                            b.legs.push(Leg::CutOut(name.clone()));
                            b.legs.push(Leg::Wire(s.clone()));
                        }
                    }
                }
                Step::MeasureMultiTime { .. } => {
                    multi.push((self.branches[0].record.len(), step));
                    for b in &mut self.branches {
                        // placeholder, filled in once the cuts are closed
                        b.record.push(String::new());
                    }
                }
            }
        }
        let alive: Vec<(String, usize)> = self.current.iter().map(|(s, p)| (s.clone(), *p)).collect();
        for (s, p) in alive {
            for b in &mut self.branches {
                let ax = b.legs.iter().position(|l| *l == Leg::Wire(s.clone())).expect("alive");
                b.legs[ax] = Leg::Out(p);
            }
        }
        for (slot_pos, step) in multi {
            self.close_cuts(slot_pos, step)?;
        }
        self.finish()
    }

    /// Contracts the cut legs of a multi-time measurement with its projectors.
    fn close_cuts(&mut self, record_pos: usize, step: &Step) -> Result<()> {
        let Step::MeasureMultiTime { system, terms, .. } = step else {
            unreachable!()
        };
        let d = self.dim(system);
        let obs_terms = terms
            .iter()
            .map(|(c, op, slot)| {
                (
                    *c,
                    MeasurementPeriod::closed(system, slot.as_str(), format!("{slot}'")),
                    op.clone(),
                )
            })
            .collect();
        let set = crate::kraus::multi_time_projective_set(&MultiTimeObservable::new(obs_terms, self.tol)?, self.tol)?;
        let m = terms.len();
        let mut next = Vec::new();
        for b in &self.branches {
            // operator axes: [out_1..out_m, in_1..in_m]
            let mut b_axes = Vec::new();
            for (_, _, slot) in terms {
                b_axes.push(
                    b.legs
                        .iter()
                        .position(|l| *l == Leg::CutOut(slot.clone()))
                        .expect("cut"),
                );
            }
            for (_, _, slot) in terms {
                b_axes.push(b.legs.iter().position(|l| *l == Leg::CutIn(slot.clone())).expect("cut"));
            }
            let legs: Vec<Leg> = b
                .legs
                .iter()
                .enumerate()
                .filter(|(i, _)| !b_axes.contains(i))
                .map(|(_, l)| l.clone())
                .collect();
            for (label, ops) in set.outcomes() {
                for op in ops {
                    let t = op.tensor().reshape(vec![d; 2 * m])?;
                    let tensor = contract(&b.tensor, &b_axes, &t, &(0..2 * m).collect::<Vec<_>>())?;
                    let mut record = b.record.clone();
                    record[record_pos] = label.clone();
                    next.push(Branch {
                        record,
                        legs: legs.clone(),
                        tensor,
                    });
                }
            }
        }
        self.branches = next;
        Ok(())
    }

    fn finish(self) -> Result<CompiledExperiment> {
        let state = MultiTimeState::new(self.boundaries, self.amplitudes)?;
        // bindings follow the state's period order
        let order: Vec<usize> = state
            .periods()
            .iter()
            .map(|sp| {
                self.periods
                    .iter()
                    .position(|p| p.system == sp.system && p.start == sp.start && p.end == sp.end)
                    .expect("compiled periods match the state's")
            })
            .collect();
        let bindings: Vec<PeriodBinding> = order
            .iter()
            .map(|&p| {
                let info = &self.periods[p];
                let period = MeasurementPeriod {
                    system: info.system.clone(),
                    start: info.start.clone(),
                    end: info.end.clone(),
                };
                PeriodBinding::square(period, info.dim)
            })
            .collect();
        let mut grouped: BTreeMap<Vec<String>, Vec<DenseTensor>> = BTreeMap::new();
        for b in self.branches {
            let perm: Vec<usize> = order
                .iter()
                .map(|&p| b.legs.iter().position(|l| *l == Leg::Out(p)).expect("out leg"))
                .chain(
                    order
                        .iter()
                        .map(|&p| b.legs.iter().position(|l| *l == Leg::In(p)).expect("in leg")),
                )
                .collect();
            grouped.entry(b.record).or_default().push(b.tensor.permute(&perm)?);
        }
        let mut tuples = BTreeMap::new();
        let mut outcomes = Vec::new();
        for (record, ops) in grouped {
            let label = record.join(",");
            tuples.insert(label.clone(), record);
            outcomes.push((label, ops));
        }
        let measurement = KrausSet::new_unchecked(bindings, outcomes)?;
        Ok(CompiledExperiment {
            records: self.script.records(),
            state,
            measurement,
            tuples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kraus::projective_set;

    fn sys(name: &str, d: usize) -> (String, usize) {
        (name.to_owned(), d)
    }

    fn z_set() -> KrausSet {
        let sz = DenseTensor::real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        projective_set(&sz, &MeasurementPeriod::closed("S", "a", "b"), Tolerance::default()).unwrap()
    }

    fn up() -> DenseTensor {
        DenseTensor::real_vector(&[1.0, 0.0]).unwrap()
    }

    #[test]
    fn rejects_unknown_system() {
        let steps = vec![Step::prepare(&["X"], up()), Step::measure(&["X"], &z_set(), "m")];
        assert!(matches!(
            ExperimentScript::new(vec![sys("S", 2)], steps, Tolerance::default()),
            Err(Error::Script(_))
        ));
    }

    #[test]
    fn rejects_use_after_postselection() {
        let steps = vec![
            Step::prepare(&["S"], up()),
            Step::postselect(&["S"], up()),
            Step::measure(&["S"], &z_set(), "m"),
        ];
        assert!(ExperimentScript::new(vec![sys("S", 2)], steps, Tolerance::default()).is_err());
    }

    #[test]
    fn rejects_script_without_measurement() {
        let steps = vec![Step::prepare(&["S"], up())];
        assert!(ExperimentScript::new(vec![sys("S", 2)], steps, Tolerance::default()).is_err());
    }

    #[test]
    fn rejects_wire_without_any_boundary() {
        let steps = vec![Step::measure(&["S"], &z_set(), "m")];
        assert!(ExperimentScript::new(vec![sys("S", 2)], steps, Tolerance::default()).is_err());
    }

    #[test]
    fn rejects_non_unitary() {
        let steps = vec![
            Step::prepare(&["S"], up()),
            Step::unitary(&["S"], DenseTensor::identity(2).scale(c64(2.0, 0.0))),
            Step::measure(&["S"], &z_set(), "m"),
        ];
        assert!(matches!(
            ExperimentScript::new(vec![sys("S", 2)], steps, Tolerance::default()),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn compiled_pre_post_selected_example() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let steps = vec![
            Step::prepare(&["S"], up()),
            Step::measure(&["S"], &z_set(), "z"),
            Step::postselect(&["S"], DenseTensor::real_vector(&[h, h]).unwrap()),
        ];
        let script = ExperimentScript::new(vec![sys("S", 2)], steps, Tolerance::default()).unwrap();
        let c = script.compile(Tolerance::default()).unwrap();
        assert_eq!(c.state.periods(), &[MeasurementPeriod::closed("S", "t1", "t3")]);
        let d = c.probabilities(Tolerance::default()).unwrap();
        assert!((d.probability(&["1"]) - 1.0).abs() < 1e-12);
        // joint probability of the ↑z outcome and the post-selection
        assert!((d.normalization - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unprepared_system_gives_open_past() {
        let steps = vec![Step::measure(&["S"], &z_set(), "z"), Step::postselect(&["S"], up())];
        let script = ExperimentScript::new(vec![sys("S", 2)], steps, Tolerance::default()).unwrap();
        let c = script.compile(Tolerance::default()).unwrap();
        assert_eq!(c.state.periods(), &[MeasurementPeriod::open_past("S", "t2")]);
        let d = c.probabilities(Tolerance::default()).unwrap();
        assert!((d.probability(&["1"]) - 1.0).abs() < 1e-12);
    }
}
