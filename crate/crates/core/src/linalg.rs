//! Dense decompositions backed by nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, C64};

fn to_nalgebra(m: &DenseTensor) -> Result<DMatrix<C64>> {
    let (r, c) = m.matrix_dims()?;
    Ok(DMatrix::from_row_slice(r, c, m.data()))
}

fn from_nalgebra(m: &DMatrix<C64>) -> DenseTensor {
    let (r, c) = m.shape();
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            data.push(m[(i, j)]);
        }
    }
    DenseTensor::from_parts(vec![r, c], data)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` belongs to `values[k]`.
    pub vectors: DenseTensor,
}

pub fn hermitian_eigen(h: &DenseTensor) -> Result<HermitianEigen> {
    let (r, c) = h.matrix_dims()?;
    if r != c {
        return Err(Error::Shape(format!("{r}x{c} matrix is not square")));
    }
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(h)?);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let sorted = DMatrix::from_fn(r, r, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen {
        values,
        vectors: from_nalgebra(&sorted),
    })
}

/// Singular values in descending order together with the leading left
/// singular vector.
pub struct LeadingSvd {
    pub singular_values: Vec<f64>,
    pub left: Vec<C64>,
}

pub fn leading_svd(m: &DenseTensor) -> Result<LeadingSvd> {
    let svd = to_nalgebra(m)?.svd(true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Shape("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let lead = order[0];
    Ok(LeadingSvd {
        singular_values: order.iter().map(|&k| svd.singular_values[k]).collect(),
        left: u.column(lead).iter().copied().collect(),
    })
}

/// `m = U · diag(s) · V†` with singular values in descending order.
pub struct Svd {
    pub u: DenseTensor,
    pub singular_values: Vec<f64>,
    pub v: DenseTensor,
}

pub fn svd(m: &DenseTensor) -> Result<Svd> {
    let svd = to_nalgebra(m)?.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return Err(Error::Shape("SVD did not converge".into()));
    };
    let n = svd.singular_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u_sorted = DMatrix::from_fn(u.nrows(), n, |i, j| u[(i, order[j])]);
    let v_sorted = DMatrix::from_fn(v_t.ncols(), n, |i, j| v_t[(order[j], i)].conj());
    Ok(Svd {
        u: from_nalgebra(&u_sorted),
        singular_values: order.iter().map(|&k| svd.singular_values[k]).collect(),
        v: from_nalgebra(&v_sorted),
    })
}
