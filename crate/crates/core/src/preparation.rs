//! Physical realisations of multi-time states as experiment scripts.
//!
//! Each plan prepares the system together with ancillas and converts
//! ancilla kets into system bras by post-selecting maximally entangled
//! states. The probe measurements under test are spliced in at named slots.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kraus::KrausSet;
use crate::linalg::{leading_svd, svd};
use crate::oracle::{simulate, BranchDistribution};
use crate::script::{ExperimentScript, Step};
use crate::state::{Direction, MeasurementPeriod, MultiTimeState};
use crate::tensor::{c64, kron, DenseTensor, Tolerance};

/// `Σ_n |n⟩|n⟩` over two `d`-dimensional systems, unnormalised.
pub fn bell_state(d: usize) -> DenseTensor {
    let mut v = vec![c64(0.0, 0.0); d * d];
    for n in 0..d {
        v[n * d + n] = c64(1.0, 0.0);
    }
    DenseTensor::vector(v).expect("finite")
}

/// Exchanges the states of two `d`-dimensional systems.
pub fn swap_operator(d: usize) -> DenseTensor {
    let mut m = vec![c64(0.0, 0.0); d * d * d * d];
    for a in 0..d {
        for b in 0..d {
            // |b⟩|a⟩ ⟨a|⟨b|
            m[(b * d + a) * d * d + a * d + b] = c64(1.0, 0.0);
        }
    }
    DenseTensor::matrix(d * d, d * d, m).expect("finite")
}

/// A target state with a script that realises it. Each slot of the script
/// is where a probe on the matching target period is inserted.
#[derive(Debug, Clone)]
pub struct PreparationPlan {
    pub target: MultiTimeState,
    pub script: ExperimentScript,
    pub ancilla_count: usize,
    pub slots: Vec<(String, MeasurementPeriod)>,
}

fn single_system(target: &MultiTimeState, layout: &[&[Direction]]) -> Result<(String, usize)> {
    let b = target.boundaries();
    let directions: Vec<Direction> = b.iter().map(|x| x.direction).collect();
    if !layout.contains(&directions.as_slice()) {
        return Err(Error::Shape(format!("unsupported boundary layout {directions:?}")));
    }
    let system = &b[0].system;
    let d = b[0].dim;
    if b.iter().any(|x| &x.system != system || x.dim != d) {
        return Err(Error::Shape("target must be one system with equal dims".into()));
    }
    Ok((system.clone(), d))
}

fn slot(name: &str) -> Step {
    Step::Slot(name.to_owned())
}

fn tol() -> Tolerance {
    Tolerance::default()
}

/// Realises `Σ α_ij ⟨j|_{t2} |i⟩_{t1}`.
///
/// Without `initial` the ancilla route is used: prepare `Σ α_ij |i⟩_S |j⟩_A`,
/// probe S, post-select `Φ⁺` on S and A. With `initial` the target must be
/// the product `⟨φ| |initial⟩` and is realised by plain pre- and
/// post-selection.
pub fn plan_two_time(target: &MultiTimeState, initial: Option<&DenseTensor>) -> Result<PreparationPlan> {
    let (s, d) = single_system(target, &[&[Direction::Ket, Direction::Bra]])?;
    let period = target.periods()[0].clone();
    let alpha = target.amplitudes();
    let steps;
    let systems;
    let ancilla_count;
    match initial {
        Some(psi) => {
            if psi.dims() != [d] {
                return Err(Error::Shape(format!("initial ket must have dim {d}")));
            }
            let lead = leading_svd(alpha)?;
            let ratio = lead.singular_values.get(1).copied().unwrap_or(0.0) / lead.singular_values[0];
            if ratio > tol().eq_tol {
                return Err(Error::Shape("target is entangled; it has no initial ket".into()));
            }
            let u = DenseTensor::vector(lead.left.clone())?;
            let overlap = crate::tensor::inner(&u, psi)?.norm();
            let norm = psi.frobenius_norm_sq().sqrt();
            if (overlap - norm).abs() > 1e-8 * norm {
                return Err(Error::Shape("target's ket factor is not the given initial ket".into()));
            }
            // α = ψ ⊗ β with β_j the bra coefficients; post-select onto conj(β)
            let k = (0..d)
                .max_by(|&a, &b| psi.data()[a].norm().total_cmp(&psi.data()[b].norm()))
                .unwrap();
            let beta: Vec<_> = (0..d).map(|j| alpha.get(&[k, j]).unwrap() / psi.data()[k]).collect();
            let phi = DenseTensor::vector(beta)?.conj();
            steps = vec![
                Step::prepare(&[&s], psi.clone()),
                slot("p1"),
                Step::postselect(&[&s], phi),
            ];
            systems = vec![(s.clone(), d)];
            ancilla_count = 0;
        }
        None => {
            let a = format!("{s}_A");
            steps = vec![
                Step::prepare(&[&s, &a], alpha.reshape(vec![d * d])?),
                slot("p1"),
                Step::postselect(&[&s, &a], bell_state(d)),
            ];
            systems = vec![(s.clone(), d), (a, d)];
            ancilla_count = 1;
        }
    }
    Ok(PreparationPlan {
        target: target.clone(),
        script: ExperimentScript::new(systems, steps, tol())?,
        ancilla_count,
        slots: vec![("p1".into(), period)],
    })
}

/// A second realisation of a two-time state: write `α = Σ_k s_k u_k v_k†`,
/// pre-select `Σ_k |u_k⟩_S |k⟩_A` and post-select `Σ_k s_k ⟨v_k|_S ⟨k|_A`.
pub fn plan_two_time_entangled(target: &MultiTimeState) -> Result<PreparationPlan> {
    let (s, d) = single_system(target, &[&[Direction::Ket, Direction::Bra]])?;
    let period = target.periods()[0].clone();
    let f = svd(target.amplitudes())?;
    let a = format!("{s}_A");
    let mut pre = DenseTensor::zeros(vec![d * d])?;
    let mut post = DenseTensor::zeros(vec![d * d])?;
    for k in 0..d {
        let e = DenseTensor::basis(d, k)?;
        let col = |m: &DenseTensor| DenseTensor::vector((0..d).map(|i| m.get(&[i, k]).unwrap()).collect());
        pre = pre.add(&kron(&col(&f.u)?, &e)?.reshape(vec![d * d])?)?;
        post = post.add(
            &kron(&col(&f.v)?, &e)?
                .reshape(vec![d * d])?
                .scale(c64(f.singular_values[k], 0.0)),
        )?;
    }
    let steps = vec![
        Step::prepare(&[&s, &a], pre),
        slot("p1"),
        Step::postselect(&[&s, &a], post),
    ];
    Ok(PreparationPlan {
        target: target.clone(),
        script: ExperimentScript::new(vec![(s, d), (a, d)], steps, tol())?,
        ancilla_count: 1,
        slots: vec![("p1".into(), period)],
    })
}

/// Realises `Σ α_ijkl ⟨l|_{t4} |k⟩_{t3} ⟨j|_{t2} |i⟩_{t1}` with three
/// ancillas, or the three-boundary state `Σ α_ijk |k⟩_{t3} ⟨j|_{t2} |i⟩_{t1}`
/// with two.
pub fn plan_four_time(target: &MultiTimeState) -> Result<PreparationPlan> {
    use Direction::{Bra, Ket};
    let (s, d) = single_system(target, &[&[Ket, Bra, Ket, Bra], &[Ket, Bra, Ket]])?;
    let full = target.boundaries().len() == 4;
    let (a1, a2, a3) = (format!("{s}_A1"), format!("{s}_A2"), format!("{s}_A3"));
    let mut prepared = vec![s.as_str(), a1.as_str(), a2.as_str()];
    if full {
        prepared.push(a3.as_str());
    }
    let n: usize = target.amplitudes().len();
    let mut steps = vec![
        Step::prepare(&prepared, target.amplitudes().reshape(vec![n])?),
        slot("p1"),
        Step::unitary(&[&s, &a2], swap_operator(d)),
        Step::postselect(&[&a1, &a2], bell_state(d)),
        slot("p2"),
    ];
    if full {
        steps.push(Step::postselect(&[&s, &a3], bell_state(d)));
    }
    let systems = prepared.iter().map(|x| (x.to_string(), d)).collect();
    let periods = target.periods();
    Ok(PreparationPlan {
        target: target.clone(),
        script: ExperimentScript::new(systems, steps, tol())?,
        ancilla_count: prepared.len() - 1,
        slots: vec![("p1".into(), periods[0].clone()), ("p2".into(), periods[1].clone())],
    })
}

/// Realises the one-time bra `⟨Ψ|` (uncertain past): prepare `Φ⁺` on the
/// system and an untouched ancilla, probe, then post-select `Ψ`.
pub fn plan_neutral_past(target: &MultiTimeState) -> Result<PreparationPlan> {
    let (s, d) = single_system(target, &[&[Direction::Bra]])?;
    let a = format!("{s}_A");
    // target amplitudes are the bra coefficients, the post-selected vector is their conjugate
    let psi = target.amplitudes().conj();
    let steps = vec![
        Step::prepare(&[&s, &a], bell_state(d)),
        slot("p1"),
        Step::postselect(&[&s], psi),
    ];
    Ok(PreparationPlan {
        target: target.clone(),
        script: ExperimentScript::new(vec![(s, d), (a, d)], steps, tol())?,
        ancilla_count: 1,
        slots: vec![("p1".into(), target.periods()[0].clone())],
    })
}

/// Runs a plan on the oracle with one probe per target period. Outcome
/// tuples list the probes in the order given, as `probabilities` does.
pub fn realize_multitime(plan: &PreparationPlan, probes: &[KrausSet], tol: Tolerance) -> Result<BranchDistribution> {
    let mut at_slot: BTreeMap<&str, (usize, &KrausSet)> = BTreeMap::new();
    for (slot_name, period) in &plan.slots {
        let (k, probe) = probes
            .iter()
            .enumerate()
            .find(|(_, p)| p.periods() == vec![period])
            .ok_or_else(|| Error::MissingPeriod(period.to_string()))?;
        at_slot.insert(slot_name, (k, probe));
    }
    if at_slot.len() != probes.len() {
        return Err(Error::PeriodAssignment(
            "a probe matches no period of the target".into(),
        ));
    }
    let system = plan.target.boundaries()[0].system.clone();
    let mut order = Vec::new();
    let steps = plan
        .script
        .steps()
        .iter()
        .map(|step| match step {
            Step::Slot(name) => {
                let (k, probe) = at_slot[name.as_str()];
                order.push(k);
                Step::measure(&[&system], probe, &format!("probe{k}"))
            }
            other => other.clone(),
        })
        .collect();
    let script = ExperimentScript::new(plan.script.systems().to_vec(), steps, tol)?;
    let result = simulate(&script, tol)?;
    // oracle tuples follow slot order; put them in probe order
    let mut entries = BTreeMap::new();
    for (key, w) in result.distribution.entries {
        let mut sorted = vec![String::new(); key.len()];
        for (pos, &k) in order.iter().enumerate() {
            sorted[k] = key[pos].clone();
        }
        entries.insert(sorted, w);
    }
    Ok(BranchDistribution {
        records: (0..probes.len()).map(|k| format!("probe{k}")).collect(),
        distribution: crate::state::Distribution {
            entries,
            normalization: result.distribution.normalization,
        },
        success_probability: result.success_probability,
    })
}
