//! Dense linear-algebra helpers: Hermitian eigendecomposition with a
//! reproducible basis, norms, and the real packing of Hermitian matrices used
//! by the solver hot loop.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// A component with modulus above this is "significant" for the phase
/// convention of eigenvectors.
const PHASE_COMPONENT_THRESHOLD: f64 = 1e-8;

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `max |m_ij - conj(m_ji)|`; `f64::INFINITY` for non-square input.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `|y⟩⟨y|`.
pub fn outer(y: &[C64]) -> CMatrix {
    let n = y.len();
    CMatrix::from_fn(n, n, |i, j| y[i] * y[j].conj())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `⟨a|b⟩ = Σ conj(a_k) b_k`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `⟨y|m|y⟩`, real part only (callers pass Hermitian `m`).
pub fn expectation(m: &CMatrix, y: &[C64]) -> f64 {
    let n = y.len();
    let mut acc = 0.0;
    for j in 0..n {
        let mut row = ZERO;
        for k in 0..n {
            row += m[(j, k)] * y[k];
        }
        acc += (y[j].conj() * row).re;
    }
    acc
}

pub fn mat_vec(m: &CMatrix, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|k| m[(i, k)] * v[k]).sum())
        .collect()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// The sort is stable, so exactly equal eigenvalues keep the solver's order,
/// and every eigenvector's first significant component is made real-positive,
/// so identical input always produces an identical basis.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&raw);

    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let phase = col
            .iter()
            .find(|z| z.norm() > PHASE_COMPONENT_THRESHOLD)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(ONE);
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
    }
    HermitianEigen {
        values: order.iter().map(|&k| raw[k]).collect(),
        vectors,
    }
}

/// Real symmetric eigendecomposition, eigenvalues descending.
pub fn symmetric_eigen(m: &RMatrix) -> (Vec<f64>, RMatrix) {
    let n = m.nrows();
    let sym = (m + m.transpose()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&raw);
    let mut vectors = RMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sign = col
            .iter()
            .find(|x| x.abs() > PHASE_COMPONENT_THRESHOLD)
            .map(|x| x.signum())
            .unwrap_or(1.0);
        for i in 0..n {
            vectors[(i, dst)] = col[i] * sign;
        }
    }
    (order.iter().map(|&k| raw[k]).collect(), vectors)
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Number of real coordinates of a `dim × dim` Hermitian matrix.
pub const fn packed_len(dim: usize) -> usize {
    dim * dim
}

/// Coordinates of a Hermitian matrix in the orthonormal (Hilbert–Schmidt)
/// basis `{E_jj, (E_jk + E_kj)/√2, i(E_jk − E_kj)/√2}`.
///
/// Layout: the `dim` diagonal entries, then for each `j < k` (row-major) the
/// pair `(√2 Re m_jk, √2 Im m_jk)`. With this layout `Tr(AB)` is the plain dot
/// product of the two coordinate vectors.
pub fn pack_hermitian(m: &CMatrix, out: &mut [f64]) {
    let n = m.nrows();
    debug_assert_eq!(out.len(), packed_len(n));
    for j in 0..n {
        out[j] = m[(j, j)].re;
    }
    let mut idx = n;
    for j in 0..n {
        for k in (j + 1)..n {
            let z = m[(j, k)];
            out[idx] = core::f64::consts::SQRT_2 * z.re;
            out[idx + 1] = core::f64::consts::SQRT_2 * z.im;
            idx += 2;
        }
    }
}

/// Packed coordinates of `|y⟩⟨y|` without forming the matrix.
pub fn pack_projector(y: &[C64], out: &mut [f64]) {
    let n = y.len();
    debug_assert_eq!(out.len(), packed_len(n));
    for j in 0..n {
        out[j] = y[j].norm_sqr();
    }
    let mut idx = n;
    for j in 0..n {
        for k in (j + 1)..n {
            let z = y[j] * y[k].conj();
            out[idx] = core::f64::consts::SQRT_2 * z.re;
            out[idx + 1] = core::f64::consts::SQRT_2 * z.im;
            idx += 2;
        }
    }
}

pub fn unpack_hermitian(v: &[f64], dim: usize) -> CMatrix {
    debug_assert_eq!(v.len(), packed_len(dim));
    let mut m = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        m[(j, j)] = C64::new(v[j], 0.0);
    }
    let mut idx = dim;
    let s = core::f64::consts::FRAC_1_SQRT_2;
    for j in 0..dim {
        for k in (j + 1)..dim {
            let z = C64::new(v[idx] * s, v[idx + 1] * s);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row-major real matrix with a fixed row length, used for stacks of packed
/// operators.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedRows {
    width: usize,
    data: Vec<f64>,
}

impl PackedRows {
    pub fn zeros(rows: usize, width: usize) -> Self {
        Self {
            width,
            data: vec![0.0; rows * width],
        }
    }

    pub fn rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    /// `out_i = row_i · x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    /// `out = Σ_i w_i row_i`, skipping zero weights.
    pub fn combine(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(self.row(i)) {
                *o += wi * r;
            }
        }
    }
}
