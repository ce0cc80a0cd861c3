//! Dense complex tensors in row-major layout.
//!
//! Every state, operator and contraction result in the crate is stored as a
//! [`DenseTensor`]. Tensors are immutable values: all operations return new
//! tensors and never touch their inputs.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest number of entries any operation may allocate.
pub const DEFAULT_MAX_ENTRIES: usize = 1 << 24;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Numerical tolerances used for equality and distribution checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Absolute elementwise tolerance.
    pub eq_tol: f64,
    /// Tolerance on probabilities.
    pub prob_tol: f64,
}

impl Tolerance {
    pub fn new(eq_tol: f64, prob_tol: f64) -> Result<Self> {
        for (name, v) in [("eq_tol", eq_tol), ("prob_tol", prob_tol)] {
            if !(v > 0.0 && v <= 1e-6) {
                return Err(Error::Tolerance(format!("{name} = {v} is outside (0, 1e-6]")));
            }
        }
        Ok(Self { eq_tol, prob_tol })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eq_tol: 1e-10,
            prob_tol: 1e-9,
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("dims", &self.dims)
            .field("data", &self.data)
            .finish()
    }
}

fn checked_product(dims: &[usize], limit: usize) -> Result<usize> {
    let mut n: usize = 1;
    for &d in dims {
        n = n.checked_mul(d).ok_or(Error::CapacityExceeded {
            requested: usize::MAX,
            limit,
        })?;
    }
    if n > limit {
        return Err(Error::CapacityExceeded { requested: n, limit });
    }
    Ok(n)
}

fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-sized axis in {dims:?}")));
        }
        let n = checked_product(&dims, DEFAULT_MAX_ENTRIES)?;
        if n != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {n} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Shape("non-finite entry".into()));
        }
        Ok(Self { dims, data })
    }

    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = checked_product(&dims, DEFAULT_MAX_ENTRIES)?;
        Self::new(dims, vec![C64::new(0.0, 0.0); n])
    }

    /// Rank-0 tensor holding a single number.
    pub fn scalar(z: C64) -> Self {
        Self {
            dims: Vec::new(),
            data: vec![z],
        }
    }

    pub fn vector(data: Vec<C64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    /// Vector from real amplitudes.
    pub fn real_vector(data: &[f64]) -> Result<Self> {
        Self::vector(data.iter().map(|&x| c64(x, 0.0)).collect())
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::matrix(r, c, rows.concat())
    }

    pub fn real_matrix(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| c64(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn identity(d: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            data[i * d + i] = C64::new(1.0, 0.0);
        }
        Self { dims: vec![d, d], data }
    }

    /// Standard basis vector `|index⟩` of dimension `d`.
    pub fn basis(d: usize, index: usize) -> Result<Self> {
        if index >= d {
            return Err(Error::Shape(format!("basis index {index} out of range for dim {d}")));
        }
        let mut data = vec![C64::new(0.0, 0.0); d];
        data[index] = C64::new(1.0, 0.0);
        Self::vector(data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a rank-0 tensor (or the single entry of any 1-entry tensor).
    pub fn as_scalar(&self) -> Option<C64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.dims)
    }

    pub fn get(&self, index: &[usize]) -> Option<C64> {
        if index.len() != self.dims.len() || index.iter().zip(&self.dims).any(|(i, d)| i >= d) {
            return None;
        }
        let off: usize = index.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        Some(self.data[off])
    }

    pub fn reshape(&self, dims: Vec<usize>) -> Result<Self> {
        if dims.iter().product::<usize>() != self.data.len() || dims.contains(&0) {
            return Err(Error::Shape(format!("cannot reshape {:?} into {dims:?}", self.dims)));
        }
        Ok(Self {
            dims,
            data: self.data.clone(),
        })
    }

    /// Reorders axes: axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Shape(format!("invalid permutation {perm:?} for rank {r}")));
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let src_strides = self.strides();
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; r];
        let mut off = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[off]);
            for k in (0..r).rev() {
                idx[k] += 1;
                off += strides[k];
                if idx[k] < dims[k] {
                    break;
                }
                off -= strides[k] * dims[k];
                idx[k] = 0;
            }
        }
        Ok(Self { dims, data })
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|z| z * c)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("dims {:?} vs {:?}", self.dims, other.dims)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("dims {:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other).is_ok_and(|d| d <= tol)
    }

    /// Sum of squared moduli of all entries.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Rows and columns when the tensor is a matrix.
    pub fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.dims[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape(format!("expected a matrix, got dims {:?}", self.dims))),
        }
    }

    /// Flattens to a matrix, splitting the axes after the first `row_axes`.
    pub fn as_matrix(&self, row_axes: usize) -> Result<Self> {
        if row_axes > self.rank() {
            return Err(Error::Shape(format!("{row_axes} row axes for rank {}", self.rank())));
        }
        let rows = self.dims[..row_axes].iter().product();
        let cols = self.dims[row_axes..].iter().product();
        self.reshape(vec![rows, cols])
    }

    pub fn is_square_matrix(&self) -> bool {
        matches!(self.dims[..], [r, c] if r == c)
    }
}

/// Tensor (Kronecker) product; the result's axes are `a`'s followed by `b`'s.
pub fn kron(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    kron_with_limit(a, b, DEFAULT_MAX_ENTRIES)
}

pub fn kron_with_limit(a: &DenseTensor, b: &DenseTensor, limit: usize) -> Result<DenseTensor> {
    let dims: Vec<usize> = a.dims.iter().chain(&b.dims).copied().collect();
    checked_product(&dims, limit)?;
    let mut data = Vec::with_capacity(a.len() * b.len());
    for &x in &a.data {
        data.extend(b.data.iter().map(|&y| x * y));
    }
    Ok(DenseTensor { dims, data })
}

/// Kronecker product of two matrices as a matrix: `(a ⊗ b)[(i,k),(j,l)] = a[i,j] b[k,l]`.
pub fn kron_matrix(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let (ar, ac) = a.matrix_dims()?;
    let (br, bc) = b.matrix_dims()?;
    kron(a, b)?.permute(&[0, 2, 1, 3])?.reshape(vec![ar * br, ac * bc])
}

/// Conjugate transpose of a matrix.
pub fn adjoint(m: &DenseTensor) -> Result<DenseTensor> {
    m.matrix_dims()?;
    Ok(m.permute(&[1, 0])?.conj())
}

pub fn matmul(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let (n, k) = a.matrix_dims()?;
    let (k2, m) = b.matrix_dims()?;
    if k != k2 {
        return Err(Error::Shape(format!("cannot multiply {n}x{k} by {k2}x{m}")));
    }
    Ok(DenseTensor::from_parts(vec![n, m], gemm(&a.data, &b.data, n, k, m)))
}

pub fn matvec(a: &DenseTensor, v: &DenseTensor) -> Result<DenseTensor> {
    let (n, k) = a.matrix_dims()?;
    if v.dims != [k] {
        return Err(Error::Shape(format!("cannot apply {n}x{k} matrix to {:?}", v.dims)));
    }
    Ok(DenseTensor::from_parts(vec![n], gemm(&a.data, &v.data, n, k, 1)))
}

/// `⟨a|b⟩` with `a` conjugated.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<C64> {
    if a.dims != b.dims {
        return Err(Error::Shape(format!("dims {:?} vs {:?}", a.dims, b.dims)));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
}

fn gemm(a: &[C64], b: &[C64], n: usize, k: usize, m: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &y) in row.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    out
}

/// Contracts `axes_a` of `a` pairwise with `axes_b` of `b`.
///
/// The result carries the uncontracted axes of `a` (in order) followed by
/// the uncontracted axes of `b`.
pub fn contract(a: &DenseTensor, axes_a: &[usize], b: &DenseTensor, axes_b: &[usize]) -> Result<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::Shape(format!(
            "{} axes of a paired with {} axes of b",
            axes_a.len(),
            axes_b.len()
        )));
    }
    let check = |t: &DenseTensor, axes: &[usize]| -> Result<Vec<usize>> {
        let mut used = vec![false; t.rank()];
        for &ax in axes {
            if ax >= t.rank() || std::mem::replace(&mut used[ax], true) {
                return Err(Error::Shape(format!("bad contraction axis {ax} for rank {}", t.rank())));
            }
        }
        Ok((0..t.rank()).filter(|k| !used[*k]).collect())
    };
    let free_a = check(a, axes_a)?;
    let free_b = check(b, axes_b)?;
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if a.dims[x] != b.dims[y] {
            return Err(Error::Shape(format!(
                "contracted axis dims differ: a[{x}]={} vs b[{y}]={}",
                a.dims[x], b.dims[y]
            )));
        }
    }
    let out_dims: Vec<usize> = free_a
        .iter()
        .map(|&k| a.dims[k])
        .chain(free_b.iter().map(|&k| b.dims[k]))
        .collect();
    checked_product(&out_dims, DEFAULT_MAX_ENTRIES)?;

    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let n: usize = free_a.iter().map(|&k| a.dims[k]).product();
    let k: usize = axes_a.iter().map(|&ax| a.dims[ax]).product();
    let m: usize = free_b.iter().map(|&ax| b.dims[ax]).product();
    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;
    Ok(DenseTensor::from_parts(out_dims, gemm(&pa.data, &pb.data, n, k, m)))
}

/// Largest elementwise deviation of `m` from the identity.
pub fn identity_deviation(m: &DenseTensor) -> Result<f64> {
    let (r, c) = m.matrix_dims()?;
    if r != c {
        return Err(Error::Shape(format!("{r}x{c} matrix is not square")));
    }
    m.max_abs_diff(&DenseTensor::identity(r))
}

/// Largest elementwise deviation of `U†U` from the identity.
pub fn unitarity_deviation(u: &DenseTensor) -> Result<f64> {
    identity_deviation(&matmul(&adjoint(u)?, u)?)
}

pub fn hermiticity_deviation(h: &DenseTensor) -> Result<f64> {
    if !h.is_square_matrix() {
        return Err(Error::Shape(format!("expected a square matrix, got {:?}", h.dims())));
    }
    h.max_abs_diff(&adjoint(h)?)
}
