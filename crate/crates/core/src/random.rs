//! Seeded generators for random states, unitaries and measurements.
//!
//! Used by the test suites and by the corpus generator of the CLI.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::tensor::{c64, DenseTensor, C64};

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with independent complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseTensor {
    let data = (0..rows * cols).map(|_| random_complex(rng)).collect();
    DenseTensor::from_parts(vec![rows, cols], data)
}

/// Tensor with independent complex Gaussian entries.
pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> DenseTensor {
    let n = dims.iter().product();
    DenseTensor::from_parts(dims.to_vec(), (0..n).map(|_| random_complex(rng)).collect())
}

/// Unit vector, Haar distributed.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DenseTensor {
    let v: Vec<C64> = (0..d).map(|_| random_complex(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    DenseTensor::from_parts(vec![d], v.into_iter().map(|z| z / norm).collect())
}

/// Columns orthonormalised by modified Gram-Schmidt; `rows >= cols`.
fn orthonormal_columns<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseTensor {
    assert!(rows >= cols, "need rows >= cols");
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(cols);
    while columns.len() < cols {
        let mut v: Vec<C64> = (0..rows).map(|_| random_complex(rng)).collect();
        for q in &columns {
            let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        columns.push(v.into_iter().map(|z| z / norm).collect());
    }
    let mut data = vec![c64(0.0, 0.0); rows * cols];
    for (j, col) in columns.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            data[i * cols + j] = z;
        }
    }
    DenseTensor::from_parts(vec![rows, cols], data)
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DenseTensor {
    orthonormal_columns(rng, d, d)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DenseTensor {
    let m = random_matrix(rng, d, d);
    let data: Vec<C64> = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d, k % d);
            (m.data()[i * d + j] + m.data()[j * d + i].conj()) * 0.5
        })
        .collect();
    DenseTensor::from_parts(vec![d, d], data)
}

/// `count` Kraus operators on dimension `d` that resolve the identity,
/// cut from the blocks of a random isometry.
pub fn random_kraus_operators<R: Rng + ?Sized>(rng: &mut R, d: usize, count: usize) -> Vec<DenseTensor> {
    let v = orthonormal_columns(rng, d * count, d);
    (0..count)
        .map(|k| {
            let block = v.data()[k * d * d..(k + 1) * d * d].to_vec();
            DenseTensor::from_parts(vec![d, d], block)
        })
        .collect()
}

/// Orthogonal projectors onto a random orthonormal basis, grouped into
/// `groups` non-empty blocks.
pub fn random_projectors<R: Rng + ?Sized>(rng: &mut R, d: usize, groups: usize) -> Vec<DenseTensor> {
    let groups = groups.clamp(1, d);
    let u = random_unitary(rng, d);
    // every group gets one basis vector, the rest are spread at random
    let mut owner: Vec<usize> = (0..d)
        .map(|k| if k < groups { k } else { rng.random_range(0..groups) })
        .collect();
    owner.sort_unstable();
    (0..groups)
        .map(|g| {
            let mut p = vec![c64(0.0, 0.0); d * d];
            for (col, _) in owner.iter().enumerate().filter(|(_, &o)| o == g) {
                for i in 0..d {
                    for j in 0..d {
                        p[i * d + j] += u.data()[i * d + col] * u.data()[j * d + col].conj();
                    }
                }
            }
            DenseTensor::from_parts(vec![d, d], p)
        })
        .collect()
}
