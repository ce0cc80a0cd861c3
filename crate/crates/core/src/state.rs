//! Multi-time states and the contraction rule for outcome probabilities.
//!
//! A [`MultiTimeState`] is a vector in the tensor product of one Hilbert
//! space per time boundary. A ket boundary sits between a preparation and a
//! following measurement period; a bra boundary sits between a measurement
//! period and a following preparation. Per system the two kinds alternate
//! along time.
//!
//! Amplitude conventions: the coefficient on a ket axis multiplies `|i⟩`,
//! the coefficient on a bra axis multiplies `⟨j|`. A post-selected state
//! `⟨Φ|` therefore has amplitudes `conj(φ_j)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::kraus::{KrausOperator, KrausSet};
use crate::linalg::leading_svd;
use crate::tensor::{c64, contract, kron, DenseTensor, Tolerance, C64};

/// Opaque time label, ordered naturally (`t2 < t10`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimeLabel(String);

impl TimeLabel {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for TimeLabel {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for TimeLabel {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl fmt::Display for TimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let na = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let nb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let da = trim_zeros(&a[..na]);
                let db = trim_zeros(&b[..nb]);
                let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[na..];
                b = &b[nb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(digits: &[u8]) -> &[u8] {
    let k = digits.iter().take_while(|&&c| c == b'0').count();
    &digits[k..]
}

impl Ord for TimeLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for TimeLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Ket,
    Bra,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Ket => Direction::Bra,
            Direction::Bra => Direction::Ket,
        }
    }
}

/// One time boundary of one system.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundarySpec {
    pub time: TimeLabel,
    pub direction: Direction,
    pub system: String,
    pub dim: usize,
}

impl BoundarySpec {
    pub fn ket(system: &str, time: impl Into<TimeLabel>, dim: usize) -> Self {
        Self {
            time: time.into(),
            direction: Direction::Ket,
            system: system.to_owned(),
            dim,
        }
    }

    pub fn bra(system: &str, time: impl Into<TimeLabel>, dim: usize) -> Self {
        Self {
            time: time.into(),
            direction: Direction::Bra,
            system: system.to_owned(),
            dim,
        }
    }

    fn key(&self) -> (&str, &TimeLabel) {
        (&self.system, &self.time)
    }
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Direction::Ket => write!(f, "|·⟩^{}_{}", self.system, self.time),
            Direction::Bra => write!(f, "⟨·|^{}_{}", self.system, self.time),
        }
    }
}

/// Interval of one system between a ket boundary and the next bra boundary.
/// Either end may be missing (uncertain past or future), never both.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeasurementPeriod {
    pub system: String,
    pub start: Option<TimeLabel>,
    pub end: Option<TimeLabel>,
}

impl MeasurementPeriod {
    pub fn closed(system: &str, start: impl Into<TimeLabel>, end: impl Into<TimeLabel>) -> Self {
        Self {
            system: system.to_owned(),
            start: Some(start.into()),
            end: Some(end.into()),
        }
    }

    /// Period with no bra boundary after it.
    pub fn open_future(system: &str, start: impl Into<TimeLabel>) -> Self {
        Self {
            system: system.to_owned(),
            start: Some(start.into()),
            end: None,
        }
    }

    /// Period with no ket boundary before it.
    pub fn open_past(system: &str, end: impl Into<TimeLabel>) -> Self {
        Self {
            system: system.to_owned(),
            start: None,
            end: Some(end.into()),
        }
    }
}

impl fmt::Display for MeasurementPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.start.as_ref().map_or("-∞".to_owned(), |t| t.to_string());
        let e = self.end.as_ref().map_or("+∞".to_owned(), |t| t.to_string());
        write!(f, "{}[{s}, {e}]", self.system)
    }
}

/// Derives the measurement periods from boundaries sorted by (system, time).
fn derive_periods(boundaries: &[BoundarySpec]) -> Result<Vec<MeasurementPeriod>> {
    let mut periods = Vec::new();
    let mut k = 0;
    while k < boundaries.len() {
        let system = &boundaries[k].system;
        let run_end = k + boundaries[k..].iter().take_while(|b| &b.system == system).count();
        let run = &boundaries[k..run_end];
        if run[0].direction == Direction::Bra {
            periods.push(MeasurementPeriod::open_past(system, run[0].time.clone()));
        }
        for pair in run.windows(2) {
            match (pair[0].direction, pair[1].direction) {
                (Direction::Ket, Direction::Bra) => periods.push(MeasurementPeriod::closed(
                    system,
                    pair[0].time.clone(),
                    pair[1].time.clone(),
                )),
                (Direction::Bra, Direction::Ket) => {}
                (d, _) => {
                    return Err(Error::Alternation(format!(
                        "system {system}: two consecutive {d:?} boundaries at {} and {}",
                        pair[0].time, pair[1].time
                    )))
                }
            }
        }
        let last = &run[run.len() - 1];
        if last.direction == Direction::Ket {
            periods.push(MeasurementPeriod::open_future(system, last.time.clone()));
        }
        k = run_end;
    }
    Ok(periods)
}

/// A pure multi-time state: amplitudes over an ordered list of boundaries.
///
/// Axes are kept in canonical order, sorted by system label and then time.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTimeState {
    boundaries: Vec<BoundarySpec>,
    amplitudes: DenseTensor,
    periods: Vec<MeasurementPeriod>,
}

impl MultiTimeState {
    /// Builds a state; `amplitudes` has one axis per entry of `boundaries`,
    /// in the order given. Axes are reordered into canonical order.
    pub fn new(boundaries: Vec<BoundarySpec>, amplitudes: DenseTensor) -> Result<Self> {
        if amplitudes.rank() != boundaries.len() {
            return Err(Error::Shape(format!(
                "{} boundaries but amplitudes have rank {}",
                boundaries.len(),
                amplitudes.rank()
            )));
        }
        for (ax, b) in boundaries.iter().enumerate() {
            if b.dim == 0 || amplitudes.dims()[ax] != b.dim {
                return Err(Error::Shape(format!(
                    "boundary {b} has dim {} but axis {ax} has dim {}",
                    b.dim,
                    amplitudes.dims()[ax]
                )));
            }
        }
        let mut order: Vec<usize> = (0..boundaries.len()).collect();
        order.sort_by(|&a, &b| boundaries[a].key().cmp(&boundaries[b].key()));
        for w in order.windows(2) {
            if boundaries[w[0]].key() == boundaries[w[1]].key() {
                return Err(Error::Shape(format!(
                    "duplicate boundary for system {} at {}",
                    boundaries[w[0]].system, boundaries[w[0]].time
                )));
            }
        }
        let amplitudes = amplitudes.permute(&order)?;
        let boundaries: Vec<BoundarySpec> = order.iter().map(|&k| boundaries[k].clone()).collect();
        let periods = derive_periods(&boundaries)?;
        if amplitudes.frobenius_norm_sq() == 0.0 {
            return Err(Error::ZeroNormState);
        }
        Ok(Self {
            boundaries,
            amplitudes,
            periods,
        })
    }

    /// One-time state `|ψ⟩_t`.
    pub fn ket(system: &str, time: impl Into<TimeLabel>, psi: &DenseTensor) -> Result<Self> {
        Self::new(vec![BoundarySpec::ket(system, time, psi.len())], vector_like(psi)?)
    }

    /// One-time state `⟨φ|_t` (amplitudes are the conjugate of `phi`).
    pub fn bra(system: &str, time: impl Into<TimeLabel>, phi: &DenseTensor) -> Result<Self> {
        Self::new(
            vec![BoundarySpec::bra(system, time, phi.len())],
            vector_like(phi)?.conj(),
        )
    }

    /// Pre- and post-selected state `⟨φ|_{post} |ψ⟩_{pre}`.
    pub fn two_time(
        system: &str,
        pre: impl Into<TimeLabel>,
        psi: &DenseTensor,
        post: impl Into<TimeLabel>,
        phi: &DenseTensor,
    ) -> Result<Self> {
        let amps = kron(&vector_like(psi)?, &vector_like(phi)?.conj())?;
        Self::new(
            vec![
                BoundarySpec::ket(system, pre, psi.len()),
                BoundarySpec::bra(system, post, phi.len()),
            ],
            amps,
        )
    }

    /// The operator `Σ a_{ji} |j⟩_{out} ⟨i|_{in}` read as a state.
    pub fn from_operator(
        system: &str,
        in_time: impl Into<TimeLabel>,
        out_time: impl Into<TimeLabel>,
        op: &DenseTensor,
    ) -> Result<Self> {
        let (out_dim, in_dim) = op.matrix_dims()?;
        Self::new(
            vec![
                BoundarySpec::ket(system, out_time, out_dim),
                BoundarySpec::bra(system, in_time, in_dim),
            ],
            op.clone(),
        )
    }

    /// `Σ_i |i⟩_{ket_time} ⟨i|_{bra_time}`: nothing happens in between.
    pub fn identity_channel(
        system: &str,
        bra_time: impl Into<TimeLabel>,
        ket_time: impl Into<TimeLabel>,
        d: usize,
    ) -> Result<Self> {
        Self::from_operator(system, bra_time, ket_time, &DenseTensor::identity(d))
    }

    /// `Σ_i ⟨i|_{bra_time} |i⟩_{ket_time}` with `ket_time < bra_time`.
    pub fn closed_time_loop(
        system: &str,
        ket_time: impl Into<TimeLabel>,
        bra_time: impl Into<TimeLabel>,
        d: usize,
    ) -> Result<Self> {
        Self::new(
            vec![
                BoundarySpec::ket(system, ket_time, d),
                BoundarySpec::bra(system, bra_time, d),
            ],
            DenseTensor::identity(d),
        )
    }

    pub fn boundaries(&self) -> &[BoundarySpec] {
        &self.boundaries
    }

    pub fn amplitudes(&self) -> &DenseTensor {
        &self.amplitudes
    }

    /// Measurement periods, sorted by system and time.
    pub fn periods(&self) -> &[MeasurementPeriod] {
        &self.periods
    }

    pub fn axis_of(&self, system: &str, time: &TimeLabel) -> Option<usize> {
        self.boundaries
            .iter()
            .position(|b| b.system == system && &b.time == time)
    }

    pub fn scaled(&self, c: C64) -> Result<Self> {
        Self::new(self.boundaries.clone(), self.amplitudes.scale(c))
    }

    pub fn systems(&self) -> BTreeSet<&str> {
        self.boundaries.iter().map(|b| b.system.as_str()).collect()
    }

    /// Axes (start ket, end bra) of a period.
    fn period_axes(&self, p: &MeasurementPeriod) -> (Option<usize>, Option<usize>) {
        let start = p.start.as_ref().and_then(|t| self.axis_of(&p.system, t));
        let end = p.end.as_ref().and_then(|t| self.axis_of(&p.system, t));
        (start, end)
    }
}

fn vector_like(v: &DenseTensor) -> Result<DenseTensor> {
    if v.rank() != 1 {
        return Err(Error::Shape(format!("expected a vector, got dims {:?}", v.dims())));
    }
    Ok(v.clone())
}

/// Checks the boundary structure and returns the derived measurement periods.
pub fn validate(state: &MultiTimeState) -> Result<Vec<MeasurementPeriod>> {
    let rebuilt = MultiTimeState::new(state.boundaries.clone(), state.amplitudes.clone())?;
    Ok(rebuilt.periods)
}

/// What remains after inserting operators into a state: a number, an open
/// ket, an open bra, or a ket⊗bra object.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionResult {
    /// Periods whose output leg stays open (uncertain future).
    pub open_kets: Vec<MeasurementPeriod>,
    /// Periods whose input leg stays open (uncertain past).
    pub open_bras: Vec<MeasurementPeriod>,
    /// Axes: one per open ket, then one per open bra.
    pub value: DenseTensor,
}

impl ContractionResult {
    /// The relative probability carried by this result.
    pub fn norm_sq(&self) -> f64 {
        self.value.frobenius_norm_sq()
    }

    pub fn as_scalar(&self) -> Option<C64> {
        (self.value.rank() == 0).then(|| self.value.data()[0])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Leg {
    Boundary(usize),
    OpenKet(MeasurementPeriod),
    OpenBra(MeasurementPeriod),
}

/// Inserts one operator per measurement period (multi-time operators cover
/// several) and performs every scalar product with the state's vectors.
pub fn insert(state: &MultiTimeState, ops: &[KrausOperator]) -> Result<ContractionResult> {
    check_coverage(state, ops.iter().map(|op| op.periods()))?;
    let mut value = state.amplitudes.clone();
    let mut legs: Vec<Leg> = (0..state.boundaries.len()).map(Leg::Boundary).collect();
    for op in ops {
        let m = op.bindings().len();
        let mut t_axes = Vec::new();
        let mut op_axes = Vec::new();
        let mut new_legs: Vec<Option<Leg>> = vec![None; 2 * m];
        for (j, binding) in op.bindings().iter().enumerate() {
            let (start, end) = state.period_axes(&binding.period);
            match end {
                Some(ax) => {
                    check_dim(state, ax, binding.out_dim, &binding.period)?;
                    t_axes.push(position(&legs, ax));
                    op_axes.push(j);
                }
                None => new_legs[j] = Some(Leg::OpenKet(binding.period.clone())),
            }
            match start {
                Some(ax) => {
                    check_dim(state, ax, binding.in_dim, &binding.period)?;
                    t_axes.push(position(&legs, ax));
                    op_axes.push(m + j);
                }
                None => new_legs[m + j] = Some(Leg::OpenBra(binding.period.clone())),
            }
        }
        value = contract(&value, &t_axes, op.tensor(), &op_axes)?;
        let mut kept: Vec<Leg> = legs
            .iter()
            .enumerate()
            .filter(|(k, _)| !t_axes.contains(k))
            .map(|(_, l)| l.clone())
            .collect();
        kept.extend(new_legs.into_iter().flatten());
        legs = kept;
    }
    finish_open_legs(value, legs)
}

fn position(legs: &[Leg], axis: usize) -> usize {
    legs.iter()
        .position(|l| *l == Leg::Boundary(axis))
        .expect("boundary leg contracted twice")
}

fn check_dim(state: &MultiTimeState, axis: usize, dim: usize, p: &MeasurementPeriod) -> Result<()> {
    let have = state.boundaries[axis].dim;
    if have != dim {
        return Err(Error::Shape(format!(
            "operator on {p} expects dim {dim}, boundary {} has dim {have}",
            state.boundaries[axis]
        )));
    }
    Ok(())
}

/// Orders open legs as open kets then open bras, each by period.
fn finish_open_legs(value: DenseTensor, legs: Vec<Leg>) -> Result<ContractionResult> {
    let mut kets: Vec<(MeasurementPeriod, usize)> = Vec::new();
    let mut bras: Vec<(MeasurementPeriod, usize)> = Vec::new();
    for (k, leg) in legs.into_iter().enumerate() {
        match leg {
            Leg::OpenKet(p) => kets.push((p, k)),
            Leg::OpenBra(p) => bras.push((p, k)),
            Leg::Boundary(_) => unreachable!("uncontracted boundary after full coverage"),
        }
    }
    kets.sort();
    bras.sort();
    let perm: Vec<usize> = kets.iter().chain(&bras).map(|(_, k)| *k).collect();
    Ok(ContractionResult {
        value: value.permute(&perm)?,
        open_kets: kets.into_iter().map(|(p, _)| p).collect(),
        open_bras: bras.into_iter().map(|(p, _)| p).collect(),
    })
}

fn check_coverage<'a>(
    state: &MultiTimeState,
    assigned: impl Iterator<Item = Vec<&'a MeasurementPeriod>>,
) -> Result<()> {
    let mut seen: BTreeSet<&MeasurementPeriod> = BTreeSet::new();
    let known: BTreeSet<&MeasurementPeriod> = state.periods.iter().collect();
    for periods in assigned {
        for p in periods {
            if !known.contains(p) {
                return Err(Error::PeriodAssignment(format!("state has no period {p}")));
            }
            if !seen.insert(p) {
                return Err(Error::PeriodAssignment(format!("period {p} assigned twice")));
            }
        }
    }
    if let Some(missing) = state.periods.iter().find(|p| !seen.contains(p)) {
        return Err(Error::MissingPeriod(missing.to_string()));
    }
    Ok(())
}

/// Probability and unnormalised weight of one outcome tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeWeight {
    pub probability: f64,
    pub relative_weight: f64,
}

/// Normalised outcome distribution; one label per Kraus set in the tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub entries: BTreeMap<Vec<String>, OutcomeWeight>,
    /// Sum of all relative weights.
    pub normalization: f64,
}

impl Distribution {
    pub fn probability(&self, outcome: &[&str]) -> f64 {
        let key: Vec<String> = outcome.iter().map(|s| s.to_string()).collect();
        self.entries.get(&key).map_or(0.0, |w| w.probability)
    }

    pub fn probabilities(&self) -> BTreeMap<Vec<String>, f64> {
        self.entries.iter().map(|(k, w)| (k.clone(), w.probability)).collect()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().map(|w| w.probability).sum()
    }
}

/// Largest absolute difference between two distributions; outcomes missing
/// from one side count as probability zero.
pub fn max_discrepancy(a: &BTreeMap<Vec<String>, f64>, b: &BTreeMap<Vec<String>, f64>) -> f64 {
    let keys: BTreeSet<&Vec<String>> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Outcome distribution of `state` when every period is measured by the
/// given Kraus sets.
pub fn probabilities(state: &MultiTimeState, sets: &[KrausSet], tol: Tolerance) -> Result<Distribution> {
    weighted_probabilities(&[(1.0, state)], sets, tol, true)
}

/// As [`probabilities`] without the completeness check, for joint
/// measurements derived from already validated pieces.
pub(crate) fn probabilities_unchecked(
    state: &MultiTimeState,
    sets: &[KrausSet],
    tol: Tolerance,
) -> Result<Distribution> {
    weighted_probabilities(&[(1.0, state)], sets, tol, false)
}

fn weighted_probabilities(
    components: &[(f64, &MultiTimeState)],
    sets: &[KrausSet],
    tol: Tolerance,
    check: bool,
) -> Result<Distribution> {
    for set in sets.iter().filter(|_| check) {
        let c = set.check_complete(tol);
        if !c.complete {
            return Err(Error::IncompleteKraus {
                deviation: c.max_deviation,
            });
        }
    }
    for (_, state) in components {
        check_coverage(state, sets.iter().map(|s| s.periods()))?;
    }
    let mut weights: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    let radix: Vec<usize> = sets.iter().map(|s| s.outcomes().len()).collect();
    for choice in odometer(&radix) {
        let label: Vec<String> = choice
            .iter()
            .zip(sets)
            .map(|(&k, s)| s.outcomes()[k].0.clone())
            .collect();
        let sub_ops: Vec<&[KrausOperator]> = choice
            .iter()
            .zip(sets)
            .map(|(&k, s)| s.outcomes()[k].1.as_slice())
            .collect();
        let sub_radix: Vec<usize> = sub_ops.iter().map(|ops| ops.len()).collect();
        let mut weight = 0.0;
        for mu in odometer(&sub_radix) {
            let ops: Vec<KrausOperator> = mu.iter().zip(&sub_ops).map(|(&m, ops)| ops[m].clone()).collect();
            for (w, state) in components {
                weight += w * insert(state, &ops)?.norm_sq();
            }
        }
        *weights.entry(label).or_insert(0.0) += weight;
    }
    normalize(weights, tol)
}

pub(crate) fn normalize(weights: BTreeMap<Vec<String>, f64>, tol: Tolerance) -> Result<Distribution> {
    let total: f64 = weights.values().sum();
    if !(total > tol.eq_tol) {
        return Err(Error::ImpossiblePostselection { total });
    }
    let entries = weights
        .into_iter()
        .map(|(k, w)| {
            (
                k,
                OutcomeWeight {
                    probability: w / total,
                    relative_weight: w,
                },
            )
        })
        .collect();
    Ok(Distribution {
        entries,
        normalization: total,
    })
}

/// All index tuples `i` with `i[k] < radix[k]`, last index fastest.
pub(crate) fn odometer(radix: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = radix.iter().product();
    (0..total).map(move |mut n| {
        let mut idx = vec![0; radix.len()];
        for k in (0..radix.len()).rev() {
            idx[k] = n % radix[k];
            n /= radix[k];
        }
        idx
    })
}

/// A die-roll mixture of pure multi-time states sharing one boundary layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTimeMixture {
    components: Vec<(f64, MultiTimeState)>,
}

impl MultiTimeMixture {
    pub fn new(components: Vec<(f64, MultiTimeState)>, tol: Tolerance) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::Shape("empty mixture".into()))?;
        if components.iter().any(|(w, _)| !(*w > 0.0)) {
            return Err(Error::Shape("mixture weights must be positive".into()));
        }
        let sum: f64 = components.iter().map(|(w, _)| w).sum();
        if (sum - 1.0).abs() > tol.eq_tol {
            return Err(Error::Shape(format!("mixture weights sum to {sum}")));
        }
        if components.iter().any(|(_, s)| s.boundaries != first.1.boundaries) {
            return Err(Error::Shape("mixture components have different boundaries".into()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, MultiTimeState)] {
        &self.components
    }

    /// Relative weight of an outcome is `Σ_m w_m ‖K·Ψ_m‖²`, normalised once.
    pub fn probabilities(&self, sets: &[KrausSet], tol: Tolerance) -> Result<Distribution> {
        let refs: Vec<(f64, &MultiTimeState)> = self.components.iter().map(|(w, s)| (*w, s)).collect();
        weighted_probabilities(&refs, sets, tol, true)
    }
}

/// Combines two states into one covering both sets of boundaries.
///
/// For a shared system the boundaries of one state must lie within a single
/// gap of the other's (no interleaving), and the merged sequence must still
/// alternate.
pub fn tensor_compose(a: &MultiTimeState, b: &MultiTimeState) -> Result<MultiTimeState> {
    for system in a.systems().intersection(&b.systems()) {
        let mut merged: Vec<(&TimeLabel, bool)> = a
            .boundaries
            .iter()
            .filter(|x| x.system == *system)
            .map(|x| (&x.time, true))
            .chain(
                b.boundaries
                    .iter()
                    .filter(|x| x.system == *system)
                    .map(|x| (&x.time, false)),
            )
            .collect();
        merged.sort();
        if let Some(w) = merged.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Overlap(format!(
                "both states have a boundary of {system} at {}",
                w[0].0
            )));
        }
        let runs = 1 + merged.windows(2).filter(|w| w[0].1 != w[1].1).count();
        if runs > 3 {
            return Err(Error::Overlap(format!("boundaries of {system} interleave")));
        }
    }
    let boundaries: Vec<BoundarySpec> = a.boundaries.iter().chain(&b.boundaries).cloned().collect();
    MultiTimeState::new(boundaries, kron(&a.amplitudes, &b.amplitudes)?)
}

/// Restricts a state to the given periods when they decouple from the rest.
///
/// The amplitudes, matricised as (kept boundaries) × (other boundaries),
/// must have numerical rank one; the threshold is `eq_tol` times the largest
/// singular value.
pub fn reduce(state: &MultiTimeState, keep: &[MeasurementPeriod], tol: Tolerance) -> Result<MultiTimeState> {
    let mut kept_axes = BTreeSet::new();
    for p in keep {
        if !state.periods.contains(p) {
            return Err(Error::PeriodAssignment(format!("state has no period {p}")));
        }
        let (s, e) = state.period_axes(p);
        kept_axes.extend(s);
        kept_axes.extend(e);
    }
    if kept_axes.is_empty() {
        return Err(Error::Shape("nothing to keep".into()));
    }
    if kept_axes.len() == state.boundaries.len() {
        return Ok(state.clone());
    }
    let rest: Vec<usize> = (0..state.boundaries.len()).filter(|k| !kept_axes.contains(k)).collect();
    let perm: Vec<usize> = kept_axes.iter().copied().chain(rest).collect();
    let mat = state.amplitudes.permute(&perm)?.as_matrix(kept_axes.len())?;
    let svd = leading_svd(&mat)?;
    let top = svd.singular_values[0];
    let second = svd.singular_values.get(1).copied().unwrap_or(0.0);
    let ratio = second / top;
    if ratio > tol.eq_tol {
        return Err(Error::EntangledPeriods { ratio });
    }
    let dims: Vec<usize> = kept_axes.iter().map(|&k| state.boundaries[k].dim).collect();
    let amps = DenseTensor::new(dims, svd.left.iter().map(|z| z * c64(top, 0.0)).collect())?;
    let boundaries = kept_axes.iter().map(|&k| state.boundaries[k].clone()).collect();
    MultiTimeState::new(boundaries, amps)
}

/// Contracts a history (a measurement record written as a multi-time state)
/// with a state: every boundary of `state` is paired with the boundary of
/// `history` at the same system and time but opposite direction.
///
/// History boundaries left over become the open legs of the result; they
/// must be the outer legs of the state's open-ended periods.
pub fn history_inner_product(history: &MultiTimeState, state: &MultiTimeState) -> Result<ContractionResult> {
    let mut state_axes = Vec::new();
    let mut hist_axes = Vec::new();
    for (k, b) in state.boundaries.iter().enumerate() {
        let h = history
            .axis_of(&b.system, &b.time)
            .ok_or_else(|| Error::MissingPeriod(format!("history has no boundary of {} at {}", b.system, b.time)))?;
        let hb = &history.boundaries[h];
        if hb.direction == b.direction {
            return Err(Error::PeriodAssignment(format!(
                "history boundary {hb} has the same direction as the state's"
            )));
        }
        if hb.dim != b.dim {
            return Err(Error::Shape(format!(
                "history boundary {hb} dim {} vs {}",
                hb.dim, b.dim
            )));
        }
        state_axes.push(k);
        hist_axes.push(h);
    }
    let free: Vec<usize> = (0..history.boundaries.len())
        .filter(|h| !hist_axes.contains(h))
        .collect();
    let mut legs = Vec::new();
    let mut claimed: BTreeSet<&MeasurementPeriod> = BTreeSet::new();
    for &h in &free {
        let hb = &history.boundaries[h];
        let period = state
            .periods
            .iter()
            .filter(|p| p.system == hb.system && !claimed.contains(p))
            .find(|p| match hb.direction {
                Direction::Ket => p.end.is_none() && p.start.as_ref().is_some_and(|s| *s < hb.time),
                Direction::Bra => p.start.is_none() && p.end.as_ref().is_some_and(|e| hb.time < *e),
            })
            .ok_or_else(|| Error::PeriodAssignment(format!("history boundary {hb} has no open period to attach to")))?;
        claimed.insert(period);
        legs.push(match hb.direction {
            Direction::Ket => Leg::OpenKet(period.clone()),
            Direction::Bra => Leg::OpenBra(period.clone()),
        });
    }
    let open_periods = state
        .periods
        .iter()
        .filter(|p| p.start.is_none() || p.end.is_none())
        .count();
    if claimed.len() != open_periods {
        return Err(Error::MissingPeriod("history leaves an open period unmatched".into()));
    }
    let value = contract(&state.amplitudes, &state_axes, &history.amplitudes, &hist_axes)?;
    finish_open_legs(value, legs)
}
