//! Reference engine: ordinary forward-in-time quantum mechanics.
//!
//! Every measurement splits each branch into one branch per Kraus operator,
//! every post-selection projects onto a bra. Branches carry unnormalised
//! vectors so that the squared norm at the end is the joint probability of
//! the recorded outcomes and all post-selections.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::script::{ExperimentScript, Step};
use crate::state::{normalize, Distribution};
use crate::tensor::{c64, contract, kron, DenseTensor, Tolerance};

/// Branches lighter than this are dropped.
pub const PRUNE_WEIGHT: f64 = 1e-14;

/// Conditional distribution of the recorded outcomes given that every
/// post-selection succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchDistribution {
    pub records: Vec<String>,
    /// `relative_weight` of each entry is its joint probability.
    pub distribution: Distribution,
    pub success_probability: f64,
}

impl BranchDistribution {
    pub fn probability(&self, outcome: &[&str]) -> f64 {
        self.distribution.probability(outcome)
    }

    pub fn probabilities(&self) -> BTreeMap<Vec<String>, f64> {
        self.distribution.probabilities()
    }

    /// Conditions on `record` having produced `outcome`.
    pub fn condition(&self, record: &str, outcome: &str, tol: Tolerance) -> Result<BranchDistribution> {
        let k = self
            .records
            .iter()
            .position(|r| r == record)
            .ok_or_else(|| Error::Script(format!("no record named {record}")))?;
        let weights: BTreeMap<Vec<String>, f64> = self
            .distribution
            .entries
            .iter()
            .filter(|(key, _)| key[k] == outcome)
            .map(|(key, w)| (key.clone(), w.relative_weight))
            .collect();
        let distribution = normalize(weights, tol)?;
        Ok(BranchDistribution {
            records: self.records.clone(),
            success_probability: distribution.normalization,
            distribution,
        })
    }
}

#[derive(Clone)]
struct Branch {
    record: Vec<String>,
    vector: DenseTensor,
}

/// Registers currently holding a quantum system, in axis order.
struct Registers {
    names: Vec<String>,
}

impl Registers {
    fn axes(&self, systems: &[String]) -> Vec<usize> {
        systems
            .iter()
            .map(|s| self.names.iter().position(|n| n == s).expect("validated script"))
            .collect()
    }
}

/// Applies a matrix on `systems` and restores the register order.
fn apply(vector: &DenseTensor, axes: &[usize], dims: &[usize], op: &DenseTensor) -> Result<DenseTensor> {
    let k = axes.len();
    let op = op.reshape(dims.iter().chain(dims).copied().collect())?;
    // result: op outputs first, then untouched registers
    let out = contract(&op, &(k..2 * k).collect::<Vec<_>>(), vector, axes)?;
    let rest: Vec<usize> = (0..vector.rank()).filter(|a| !axes.contains(a)).collect();
    let mut perm = vec![0; vector.rank()];
    for (pos, &a) in axes.iter().enumerate() {
        perm[a] = pos;
    }
    for (pos, &a) in rest.iter().enumerate() {
        perm[a] = k + pos;
    }
    out.permute(&perm)
}

/// Runs the script by exhaustive branch enumeration.
pub fn simulate(script: &ExperimentScript, tol: Tolerance) -> Result<BranchDistribution> {
    if script.has_multi_time() {
        return Err(Error::Unsupported(
            "multi-time observables have no sequential form".into(),
        ));
    }
    let dim = |s: &String| script.dim(s).expect("validated script");
    let mut regs = Registers { names: Vec::new() };
    let mut branches = vec![Branch {
        record: Vec::new(),
        vector: DenseTensor::scalar(c64(1.0, 0.0)),
    }];
    // systems used before any preparation get a hidden purifying partner
    let mut purifiers = 0usize;
    let mut introduce = |regs: &mut Registers, branches: &mut Vec<Branch>, systems: &[String]| -> Result<()> {
        for s in systems {
            if regs.names.contains(s) {
                continue;
            }
            let d = dim(s);
            let phi = crate::preparation::bell_state(d).scale(c64(1.0 / (d as f64).sqrt(), 0.0));
            let phi = phi.reshape(vec![d, d])?;
            for b in branches.iter_mut() {
                b.vector = kron(&b.vector, &phi)?;
            }
            regs.names.push(s.clone());
            regs.names.push(format!("\u{0}purifier{purifiers}"));
            purifiers += 1;
        }
        Ok(())
    };
    for step in script.steps() {
        match step {
            Step::Prepare { systems, state } => {
                let norm = state.frobenius_norm_sq().sqrt();
                let dims: Vec<usize> = systems.iter().map(dim).collect();
                let psi = state.scale(c64(1.0 / norm, 0.0)).reshape(dims)?;
                for b in &mut branches {
                    b.vector = kron(&b.vector, &psi)?;
                }
                regs.names.extend(systems.iter().cloned());
            }
            Step::Unitary { systems, matrix } => {
                introduce(&mut regs, &mut branches, systems)?;
                let axes = regs.axes(systems);
                let dims: Vec<usize> = systems.iter().map(dim).collect();
                for b in &mut branches {
                    b.vector = apply(&b.vector, &axes, &dims, matrix)?;
                }
            }
            Step::Measure { systems, outcomes, .. } => {
                introduce(&mut regs, &mut branches, systems)?;
                let axes = regs.axes(systems);
                let dims: Vec<usize> = systems.iter().map(dim).collect();
                let mut next = Vec::new();
                for b in &branches {
                    for (label, ops) in outcomes {
                        for op in ops {
                            let vector = apply(&b.vector, &axes, &dims, op)?;
                            if vector.frobenius_norm_sq() < PRUNE_WEIGHT {
                                continue;
                            }
                            let mut record = b.record.clone();
                            record.push(label.clone());
                            next.push(Branch { record, vector });
                        }
                    }
                }
                branches = next;
            }
            Step::Postselect { systems, state } => {
                introduce(&mut regs, &mut branches, systems)?;
                let axes = regs.axes(systems);
                let dims: Vec<usize> = systems.iter().map(dim).collect();
                let norm = state.frobenius_norm_sq().sqrt();
                let bra = state.conj().scale(c64(1.0 / norm, 0.0)).reshape(dims)?;
                let all: Vec<usize> = (0..systems.len()).collect();
                let mut next = Vec::new();
                for b in &branches {
                    let vector = contract(&bra, &all, &b.vector, &axes)?;
                    if vector.frobenius_norm_sq() >= PRUNE_WEIGHT {
                        next.push(Branch {
                            record: b.record.clone(),
                            vector,
                        });
                    }
                }
                branches = next;
                regs.names = regs.names.iter().filter(|n| !systems.contains(n)).cloned().collect();
            }
            Step::Slot(_) => {}
            Step::MeasureMultiTime { .. } => unreachable!("rejected above"),
        }
    }
    let mut weights: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for b in branches {
        *weights.entry(b.record).or_insert(0.0) += b.vector.frobenius_norm_sq();
    }
    let distribution = normalize(weights, tol)?;
    Ok(BranchDistribution {
        records: script.records(),
        success_probability: distribution.normalization,
        distribution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kraus::projective_set;
    use crate::random::{random_state, random_unitary};
    use crate::state::MeasurementPeriod;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn set(m: &[&[f64]]) -> crate::KrausSet {
        let period = MeasurementPeriod::closed("S", "a", "b");
        projective_set(&DenseTensor::real_matrix(m).unwrap(), &period, Tolerance::default()).unwrap()
    }

    fn sz() -> crate::KrausSet {
        set(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    fn sx() -> crate::KrausSet {
        set(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn up() -> DenseTensor {
        DenseTensor::real_vector(&[1.0, 0.0]).unwrap()
    }

    fn up_x() -> DenseTensor {
        DenseTensor::real_vector(&[H, H]).unwrap()
    }

    fn run(steps: Vec<Step>) -> Result<BranchDistribution> {
        let script = ExperimentScript::new(vec![("S".into(), 2)], steps, Tolerance::default())?;
        simulate(&script, Tolerance::default())
    }

    #[test]
    fn z_measurement_of_up_is_certain() {
        let d = run(vec![Step::prepare(&["S"], up()), Step::measure(&["S"], &sz(), "z")]).unwrap();
        assert!((d.probability(&["1"]) - 1.0).abs() < 1e-12);
        assert!((d.success_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pre_and_post_selected_z_measurement() {
        let d = run(vec![
            Step::prepare(&["S"], up()),
            Step::measure(&["S"], &sz(), "z"),
            Step::postselect(&["S"], up_x()),
        ])
        .unwrap();
        assert!((d.probability(&["1"]) - 1.0).abs() < 1e-12);
        assert!((d.success_probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pre_and_post_selected_x_measurement() {
        let d = run(vec![
            Step::prepare(&["S"], up()),
            Step::measure(&["S"], &sx(), "x"),
            Step::postselect(&["S"], up_x()),
        ])
        .unwrap();
        assert!((d.probability(&["1"]) - 1.0).abs() < 1e-12);
        // branch ↑x: 1/2 · 1; branch ↓x: 1/2 · 0
        assert!((d.success_probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_post_selection_is_impossible() {
        let down = DenseTensor::real_vector(&[0.0, 1.0]).unwrap();
        let err = run(vec![
            Step::prepare(&["S"], up()),
            Step::measure(&["S"], &sz(), "z"),
            Step::postselect(&["S"], down),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::ImpossiblePostselection { .. }));
    }

    #[test]
    fn unitary_preserves_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = run(vec![
            Step::prepare(&["S"], random_state(&mut rng, 2)),
            Step::unitary(&["S"], random_unitary(&mut rng, 2)),
            Step::measure(&["S"], &sz(), "z"),
        ])
        .unwrap();
        assert!((d.success_probability - 1.0).abs() < 1e-12);
        assert!((d.distribution.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unprepared_system_is_maximally_mixed() {
        let d = run(vec![Step::measure(&["S"], &sx(), "x"), Step::postselect(&["S"], up())]).unwrap();
        assert!((d.probability(&["1"]) - 0.5).abs() < 1e-12);
        assert!((d.success_probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn conditioning_on_a_record() {
        let steps = vec![
            Step::prepare(&["S"], up_x()),
            Step::measure(&["S"], &sz(), "a"),
            Step::measure(&["S"], &sx(), "b"),
        ];
        let d = run(steps).unwrap();
        let c = d.condition("a", "1", Tolerance::default()).unwrap();
        assert!((c.success_probability - 0.5).abs() < 1e-12);
        assert!((c.probability(&["1", "1"]) - 0.5).abs() < 1e-12);
        assert!((c.probability(&["-1", "1"])).abs() < 1e-12);
    }

    #[test]
    fn multi_time_steps_are_unsupported() {
        let sxm = DenseTensor::real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let steps = vec![
            Step::prepare(&["S"], up()),
            Step::Slot("a".into()),
            Step::Slot("b".into()),
            Step::MeasureMultiTime {
                system: "S".into(),
                terms: vec![(1.0, sxm.clone(), "a".into()), (-1.0, sxm, "b".into())],
                label: "m".into(),
            },
        ];
        assert!(matches!(run(steps), Err(Error::Unsupported(_))));
    }
}
