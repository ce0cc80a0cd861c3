#![allow(dead_code)]

use multitime_qsim::kraus::projective_set;
use multitime_qsim::random::{random_hermitian, random_kraus_operators, random_tensor};
use multitime_qsim::{BoundarySpec, DenseTensor, Direction, KrausSet, MultiTimeState, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tol() -> Tolerance {
    Tolerance::default()
}

pub fn real(v: &[f64]) -> DenseTensor {
    DenseTensor::real_vector(v).unwrap()
}

pub fn up() -> DenseTensor {
    real(&[1.0, 0.0])
}

pub fn upx() -> DenseTensor {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    real(&[h, h])
}

pub fn downx() -> DenseTensor {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    real(&[h, -h])
}

pub fn sx() -> DenseTensor {
    DenseTensor::real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
}

pub fn sz() -> DenseTensor {
    DenseTensor::real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap()
}

/// Single-system state with times `t1..tn` and the given directions.
pub fn random_layout_state<R: Rng>(rng: &mut R, system: &str, d: usize, directions: &[Direction]) -> MultiTimeState {
    let boundaries: Vec<BoundarySpec> = directions
        .iter()
        .enumerate()
        .map(|(k, dir)| BoundarySpec {
            time: format!("t{}", k + 1).into(),
            direction: *dir,
            system: system.into(),
            dim: d,
        })
        .collect();
    let dims = vec![d; boundaries.len()];
    MultiTimeState::new(boundaries, random_tensor(rng, &dims)).unwrap()
}

/// Alternating layout of `n` boundaries starting with `first`.
pub fn alternating(first: Direction, n: usize) -> Vec<Direction> {
    (0..n).map(|k| if k % 2 == 0 { first } else { first.flip() }).collect()
}

/// One random complete measurement per period of `state`, either
/// projective or a general Kraus set.
pub fn random_probes<R: Rng>(rng: &mut R, state: &MultiTimeState) -> Vec<KrausSet> {
    state
        .periods()
        .iter()
        .map(|p| {
            let d = state.boundaries().iter().find(|b| b.system == p.system).unwrap().dim;
            if rng.random_bool(0.5) {
                projective_set(&random_hermitian(rng, d), p, tol()).unwrap()
            } else {
                let n = rng.random_range(2..=3);
                let outcomes = random_kraus_operators(rng, d, n)
                    .into_iter()
                    .enumerate()
                    .map(|(k, m)| (format!("k{k}"), vec![m]))
                    .collect();
                KrausSet::on_period(p.clone(), outcomes, tol()).unwrap()
            }
        })
        .collect()
}
