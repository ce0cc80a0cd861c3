//! Cross-checks between the contraction engine, closed-form expressions and
//! the sequential oracle.

mod common;

use common::*;
use multitime_qsim::kraus::{multi_time_projective_set, projective_set};
use multitime_qsim::oracle::simulate;
use multitime_qsim::random::{random_hermitian, random_kraus_operators, random_state, random_tensor};
use multitime_qsim::script::{ExperimentScript, Step};
use multitime_qsim::state::{max_discrepancy, probabilities, tensor_compose, MultiTimeMixture};
use multitime_qsim::tensor::matvec;
use multitime_qsim::{
    c64, BoundarySpec, DenseTensor, KrausSet, MeasurementPeriod, MultiTimeObservable, MultiTimeState, C64,
};
use rand::Rng;

fn bracket(a: &DenseTensor, b: &DenseTensor) -> C64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum()
}

#[test]
fn sigma_x_difference_zero_outcome_two_term_formula() {
    let mut g = rng(40);
    let (up, down) = (upx(), downx());
    for _ in 0..100 {
        let (theta, xi, phi, psi) = (
            random_state(&mut g, 2),
            random_state(&mut g, 2),
            random_state(&mut g, 2),
            random_state(&mut g, 2),
        );
        // ⟨Ψ|_{t6} |Φ⟩_{t4} ⟨Ξ|_{t3} |Θ⟩_{t1}
        let state = [
            MultiTimeState::ket("S", "t1", &theta).unwrap(),
            MultiTimeState::bra("S", "t3", &xi).unwrap(),
            MultiTimeState::ket("S", "t4", &phi).unwrap(),
            MultiTimeState::bra("S", "t6", &psi).unwrap(),
        ]
        .iter()
        .skip(1)
        .fold(MultiTimeState::ket("S", "t1", &theta).unwrap(), |acc, s| {
            tensor_compose(&acc, s).unwrap()
        });

        let amp = |first: &DenseTensor, second: &DenseTensor| {
            bracket(&psi, second) * bracket(second, &phi) * bracket(&xi, first) * bracket(first, &theta)
        };
        let zero = (amp(&up, &up) + amp(&down, &down)).norm_sqr();
        let plus = amp(&up, &down).norm_sqr();
        let minus = amp(&down, &up).norm_sqr();
        let n = zero + plus + minus;

        let obs = MultiTimeObservable::new(
            vec![
                (1.0, MeasurementPeriod::closed("S", "t1", "t3"), sx()),
                (-1.0, MeasurementPeriod::closed("S", "t4", "t6"), sx()),
            ],
            tol(),
        )
        .unwrap();
        let set = multi_time_projective_set(&obs, tol()).unwrap();
        let p = probabilities(&state, &[set], tol()).unwrap();
        assert!((p.probability(&["0"]) - zero / n).abs() <= 1e-9);
        assert!((p.probability(&["2"]) - plus / n).abs() <= 1e-9);
        assert!((p.probability(&["-2"]) - minus / n).abs() <= 1e-9);
    }
}

#[test]
fn mixture_equals_purification() {
    let mut g = rng(11);
    for _ in 0..20 {
        let d = g.random_range(2..=3);
        let m = g.random_range(2..=3);
        let raw: Vec<f64> = (0..m).map(|_| g.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let parts: Vec<DenseTensor> = (0..m).map(|_| random_tensor(&mut g, &[d, d])).collect();
        let layout = vec![BoundarySpec::ket("S", "t1", d), BoundarySpec::bra("S", "t2", d)];
        let pure = |t: &DenseTensor| MultiTimeState::new(layout.clone(), t.clone()).unwrap();
        let mixture =
            MultiTimeMixture::new(weights.iter().zip(&parts).map(|(w, t)| (*w, pure(t))).collect(), tol()).unwrap();

        // Σ_m √w_m |m⟩_E ⊗ Ψ_m with the ancilla never measured
        let mut amps = Vec::new();
        for (w, t) in weights.iter().zip(&parts) {
            amps.extend(t.data().iter().map(|z| z * w.sqrt()));
        }
        let mut boundaries = vec![BoundarySpec::ket("E", "t0", m)];
        boundaries.extend(layout.iter().cloned());
        let purified = MultiTimeState::new(boundaries, DenseTensor::new(vec![m, d, d], amps).unwrap()).unwrap();

        let period = mixture.components()[0].1.periods()[0].clone();
        let probe = projective_set(&random_hermitian(&mut g, d), &period, tol()).unwrap();
        let ancilla = KrausSet::identity(vec![multitime_qsim::PeriodBinding::square(
            MeasurementPeriod::open_future("E", "t0"),
            m,
        )])
        .unwrap();
        let a = mixture.probabilities(std::slice::from_ref(&probe), tol()).unwrap();
        let b = probabilities(&purified, &[probe, ancilla], tol()).unwrap();
        for (key, w) in &a.entries {
            let k = vec![key[0].clone(), "I".to_string()];
            assert!((b.entries[&k].probability - w.probability).abs() <= 1e-12);
        }
    }
}

#[test]
fn composed_independent_systems_match_conditioned_oracle() {
    let mut g = rng(5);
    for _ in 0..20 {
        let (psi, phi, chi) = (
            random_state(&mut g, 2),
            random_state(&mut g, 2),
            random_state(&mut g, 3),
        );
        let period = MeasurementPeriod::closed("_", "a", "b");
        let a = projective_set(&random_hermitian(&mut g, 2), &period, tol()).unwrap();
        let outcomes = random_kraus_operators(&mut g, 3, 2)
            .into_iter()
            .enumerate()
            .map(|(k, m)| (format!("k{k}"), vec![m]));
        let b = KrausSet::on_period(period, outcomes.collect(), tol()).unwrap();

        let steps = vec![
            Step::prepare(&["S"], psi.clone()),
            Step::prepare(&["T"], chi.clone()),
            Step::measure(&["S"], &a, "a"),
            Step::measure(&["T"], &b, "b"),
            Step::postselect(&["S"], phi.clone()),
        ];
        let script = ExperimentScript::new(vec![("S".into(), 2), ("T".into(), 3)], steps, tol()).unwrap();
        let oracle = simulate(&script, tol()).unwrap();

        let s = MultiTimeState::two_time("S", "t1", &psi, "t5", &phi).unwrap();
        let t = MultiTimeState::ket("T", "t2", &chi).unwrap();
        let joint = tensor_compose(&s, &t).unwrap();
        let rebind = |set: &KrausSet, p: MeasurementPeriod| {
            let outcomes = set
                .outcomes()
                .iter()
                .map(|(l, o)| (l.clone(), o.iter().map(|k| k.as_matrix()).collect()));
            KrausSet::on_period(p, outcomes.collect(), tol()).unwrap()
        };
        let sa = rebind(&a, MeasurementPeriod::closed("S", "t1", "t5"));
        let tb = rebind(&b, MeasurementPeriod::open_future("T", "t2"));
        let engine = probabilities(&joint, &[sa.clone(), tb], tol()).unwrap();
        assert!(max_discrepancy(&engine.probabilities(), &oracle.probabilities()) <= 1e-9);

        // conditioning on T leaves the S marginal of the two-time state
        let alone = probabilities(&s, &[sa], tol()).unwrap();
        for label in b.labels() {
            let c = oracle.condition("b", label, tol()).unwrap();
            for (key, w) in &alone.entries {
                let p: f64 = c
                    .probabilities()
                    .iter()
                    .filter(|(k, _)| k[0] == key[0])
                    .map(|(_, p)| p)
                    .sum();
                assert!((p - w.probability).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn context_dependence_closed_form() {
    // Σ_i ⟨Φ|_{t4} |i⟩_{t3} ⟨i|_{t2} |Ψ⟩_{t1}: unitary on one period, Kraus on the other
    let mut g = rng(35);
    for _ in 0..20 {
        let (psi, phi) = (random_state(&mut g, 2), random_state(&mut g, 2));
        let state = [
            MultiTimeState::identity_channel("S", "t2", "t3", 2).unwrap(),
            MultiTimeState::bra("S", "t4", &phi).unwrap(),
        ]
        .iter()
        .fold(MultiTimeState::ket("S", "t1", &psi).unwrap(), |acc, s| {
            tensor_compose(&acc, s).unwrap()
        });
        let u = multitime_qsim::random::random_unitary(&mut g, 2);
        let ks = random_kraus_operators(&mut g, 2, 2);
        let p1 = MeasurementPeriod::closed("S", "t1", "t2");
        let p2 = MeasurementPeriod::closed("S", "t3", "t4");
        let kraus = |p: &MeasurementPeriod| {
            KrausSet::on_period(
                p.clone(),
                ks.iter()
                    .enumerate()
                    .map(|(k, m)| (format!("k{k}"), vec![m.clone()]))
                    .collect(),
                tol(),
            )
            .unwrap()
        };
        let unitary =
            |p: &MeasurementPeriod| KrausSet::on_period(p.clone(), vec![("U".into(), vec![u.clone()])], tol()).unwrap();

        // normalised |⟨Φ|y·x|Ψ⟩|² over k, with the unitary applied first or second
        let closed = |unitary_first: bool| -> Vec<f64> {
            let w: Vec<f64> = ks
                .iter()
                .map(|a| {
                    let (x, y) = if unitary_first { (&u, a) } else { (a, &u) };
                    let v = matvec(y, &matvec(x, &psi).unwrap()).unwrap();
                    bracket(&phi, &v).norm_sqr()
                })
                .collect();
            let n: f64 = w.iter().sum();
            w.into_iter().map(|x| x / n).collect()
        };
        // U first then A_k: |⟨Φ|A_k U|Ψ⟩|²
        let a = probabilities(&state, &[unitary(&p1), kraus(&p2)], tol()).unwrap();
        let expect = closed(true);
        for (k, e) in expect.iter().enumerate() {
            assert!((a.probability(&["U", &format!("k{k}")]) - e).abs() <= 1e-9);
        }
        // A_k first then U: |⟨Φ|U A_k|Ψ⟩|²
        let b = probabilities(&state, &[kraus(&p1), unitary(&p2)], tol()).unwrap();
        let expect = closed(false);
        for (k, e) in expect.iter().enumerate() {
            assert!((b.probability(&[&format!("k{k}"), "U"]) - e).abs() <= 1e-9);
        }
    }
}

#[test]
fn scalar_helpers_agree() {
    assert_eq!(bracket(&up(), &up()), c64(1.0, 0.0));
}
