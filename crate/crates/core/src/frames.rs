//! Finite-frame view of a rank-one measurement.
//!
//! State space: the vectors `|y_i⟩` form a frame with frame operator `G` and
//! canonical dual `|ỹ_i⟩ = G⁺|y_i⟩`. Operator space: the projectors `Π_i`
//! form a frame with frame operator `S(A) = Σ Tr(Π_i A) Π_i`, represented as a
//! real symmetric `d² × d²` matrix over an orthonormal Hermitian basis
//! (identity plus generalized Gell-Mann matrices).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, invalid, Error, Result};
use crate::fock::{DensityOperator, StateVector};
use crate::linalg::{self, CMatrix, RMatrix, C64};
use crate::povm::{self, GramAnalysis, PovmSet};

/// Relative pseudo-inverse threshold in operator space.
pub const DEFAULT_OPERATOR_THRESHOLD: f64 = 1e-12;
/// Allowed `‖UΛρ̃ΛU† − GρG‖_max` in [`modal_weighting`].
pub const MODAL_TOLERANCE: f64 = 1e-9;

/// Canonical dual of a state-space frame.
#[derive(Debug, Clone)]
pub struct DualFrame {
    /// `G⁺|y_i⟩`, aligned with the frame.
    pub vectors: Vec<StateVector>,
    /// Rank of `G` (dimension of the frame span).
    pub rank: usize,
    /// Absolute eigenvalue threshold of the pseudo-inverse.
    pub threshold: f64,
}

impl DualFrame {
    pub fn vector(&self, i: usize) -> &[C64] {
        self.vectors[i].amplitudes()
    }
}

/// `G⁺ = Σ_{λ_k > τ} |u_k⟩⟨u_k| / λ_k`.
pub fn gram_pseudo_inverse(analysis: &GramAnalysis) -> CMatrix {
    let u = analysis.eigenvectors.columns(0, analysis.rank);
    let mut scaled = u.into_owned();
    for (k, &lam) in analysis.eigenvalues[..analysis.rank].iter().enumerate() {
        scaled.column_mut(k).unscale_mut(lam);
    }
    scaled * u.adjoint()
}

pub fn dual_frame(povm: &PovmSet, analysis: &GramAnalysis) -> Result<DualFrame> {
    check_dim(povm.dim(), analysis.dim())?;
    if analysis.rank == 0 {
        return Err(Error::EmptyMeasurement("frame spans no subspace".into()));
    }
    let g_plus = gram_pseudo_inverse(analysis);
    let vectors = povm
        .vectors()
        .map(|y| StateVector::new(linalg::mat_vec(&g_plus, y)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DualFrame {
        vectors,
        rank: analysis.rank,
        threshold: analysis.threshold,
    })
}

/// `Σ_i ⟨ỹ_i|ψ⟩ |y_i⟩`: the projection of `ψ` onto the frame span.
pub fn frame_reconstruct(psi: &StateVector, povm: &PovmSet, dual: &DualFrame) -> Result<StateVector> {
    check_dim(povm.dim(), psi.dim())?;
    check_dim(povm.len(), dual.vectors.len())?;
    let mut out = vec![C64::new(0.0, 0.0); povm.dim()];
    for (y, yd) in povm.vectors().zip(&dual.vectors) {
        let c = linalg::inner(yd.amplitudes(), psi.amplitudes());
        for (o, v) in out.iter_mut().zip(y) {
            *o += c * v;
        }
    }
    StateVector::new(out)
}

/// Coordinates of a Hermitian matrix over the orthonormal basis
/// `{I/√d, D_1 … D_{d−1}, symmetric, antisymmetric}`, where
/// `D_l = (Σ_{j<l} E_jj − l E_ll)/√(l(l+1))`.
///
/// Off-diagonal coordinates share the layout of
/// [`linalg::pack_hermitian`]. `Tr(AB)` is the dot product of coordinates.
pub fn hermitian_coordinates(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut v = vec![0.0; linalg::packed_len(d)];
    linalg::pack_hermitian(m, &mut v);
    diagonal_to_gell_mann(&mut v[..d]);
    v
}

pub fn from_hermitian_coordinates(v: &[f64], dim: usize) -> CMatrix {
    let mut packed = v.to_vec();
    diagonal_from_gell_mann(&mut packed[..dim]);
    linalg::unpack_hermitian(&packed, dim)
}

fn diagonal_to_gell_mann(a: &mut [f64]) {
    let d = a.len();
    let diag = a.to_vec();
    a[0] = diag.iter().sum::<f64>() / (d as f64).sqrt();
    let mut prefix = diag[0];
    for l in 1..d {
        let lf = l as f64;
        a[l] = (prefix - lf * diag[l]) / (lf * (lf + 1.0)).sqrt();
        prefix += diag[l];
    }
}

fn diagonal_from_gell_mann(c: &mut [f64]) {
    let d = c.len();
    let coords = c.to_vec();
    let base = coords[0] / (d as f64).sqrt();
    // suffix[j] = Σ_{l > j} c_l / √(l(l+1))
    let mut suffix = 0.0;
    for j in (0..d).rev() {
        let own = if j == 0 {
            0.0
        } else {
            let lf = j as f64;
            -lf * coords[j] / (lf * (lf + 1.0)).sqrt()
        };
        c[j] = base + own + suffix;
        if j > 0 {
            let lf = j as f64;
            suffix += coords[j] / (lf * (lf + 1.0)).sqrt();
        }
    }
}

/// `S(A) = Σ_i ⟨y_i|A|y_i⟩ Π_i`.
pub fn operator_frame_apply(a: &CMatrix, povm: &PovmSet) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(invalid("operator must be square"));
    }
    check_dim(povm.dim(), a.nrows())?;
    let d = povm.dim();
    let mut out = CMatrix::zeros(d, d);
    for y in povm.vectors() {
        let w = linalg::expectation(a, y);
        for j in 0..d {
            for k in 0..d {
                out[(j, k)] += y[j] * y[k].conj() * w;
            }
        }
    }
    Ok(out)
}

/// Operator-space frame: `S` in coordinates, its pseudo-inverse support and
/// the dual effects `Π̃_i = S⁺(Π_i)`.
#[derive(Debug, Clone)]
pub struct OperatorFrame {
    pub dim: usize,
    /// `S` as a `d² × d²` matrix over [`hermitian_coordinates`].
    pub frame_matrix: RMatrix,
    /// `Q_ij = Tr(Π_iΠ_j)`.
    pub gram: RMatrix,
    pub dual_effects: Vec<CMatrix>,
    /// Rank of `S`; `d²` means every Hermitian operator is reachable.
    pub support_rank: usize,
    /// Orthogonal projector onto the range of `S`, in coordinates.
    pub support_projector: RMatrix,
    /// Absolute eigenvalue threshold of the pseudo-inverse.
    pub threshold: f64,
}

pub fn operator_frame(povm: &PovmSet, relative_threshold: f64) -> Result<OperatorFrame> {
    if !(relative_threshold >= 0.0 && relative_threshold < 1.0) {
        return Err(invalid("relative threshold must lie in [0, 1)"));
    }
    let d = povm.dim();
    let m = linalg::packed_len(d);
    let n = povm.len();
    let mut coords = RMatrix::zeros(m, n);
    for (i, e) in povm.effects().iter().enumerate() {
        let v = hermitian_coordinates(&e.vector.projector());
        coords.column_mut(i).copy_from_slice(&v);
    }
    let frame_matrix = &coords * coords.transpose();
    let (values, vectors) = linalg::symmetric_eigen(&frame_matrix);
    let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
    let threshold = relative_threshold * lambda_max;
    let rank = values.iter().filter(|&&v| v > threshold).count();
    if rank == 0 {
        return Err(Error::EmptyMeasurement("operator frame spans no operators".into()));
    }
    let u = vectors.columns(0, rank);
    let mut scaled = u.into_owned();
    for (k, &lam) in values[..rank].iter().enumerate() {
        scaled.column_mut(k).unscale_mut(lam);
    }
    let pinv = &scaled * u.transpose();
    let support_projector = u * u.transpose();
    let duals = &pinv * &coords;
    let dual_effects = (0..n)
        .map(|i| from_hermitian_coordinates(duals.column(i).as_slice(), d))
        .collect();
    Ok(OperatorFrame {
        dim: d,
        frame_matrix,
        gram: povm::gram_matrix_operator_space(povm),
        dual_effects,
        support_rank: rank,
        support_projector,
        threshold,
    })
}

/// Output of [`linear_inversion`]. The estimate is Hermitian but in general
/// not positive semidefinite.
#[derive(Debug, Clone)]
pub struct LinearInversion {
    pub rho: CMatrix,
    pub support_rank: usize,
    /// `d²`.
    pub operator_dim: usize,
    /// Projector onto the recoverable operator subspace, in coordinates.
    pub support_projector: RMatrix,
}

impl LinearInversion {
    /// `true` when some Hermitian directions are invisible to the measurement.
    pub fn is_partial(&self) -> bool {
        self.support_rank < self.operator_dim
    }
}

impl OperatorFrame {
    /// `Σ_i p_i Π̃_i`.
    pub fn invert(&self, probabilities: &[f64]) -> Result<LinearInversion> {
        check_dim(self.dual_effects.len(), probabilities.len())?;
        if probabilities.iter().any(|p| !p.is_finite()) {
            return Err(invalid("probabilities must be finite"));
        }
        let mut rho = CMatrix::zeros(self.dim, self.dim);
        for (p, dual) in probabilities.iter().zip(&self.dual_effects) {
            rho += dual.scale(*p);
        }
        Ok(LinearInversion {
            rho: linalg::hermitian_part(&rho),
            support_rank: self.support_rank,
            operator_dim: linalg::packed_len(self.dim),
            support_projector: self.support_projector.clone(),
        })
    }
}

pub fn linear_inversion(probabilities: &[f64], povm: &PovmSet) -> Result<LinearInversion> {
    operator_frame(povm, DEFAULT_OPERATOR_THRESHOLD)?.invert(probabilities)
}

/// Clips negative eigenvalues to zero and renormalizes the trace.
pub fn clip_to_psd(m: &CMatrix) -> Result<DensityOperator> {
    if !m.is_square() {
        return Err(invalid("operator must be square"));
    }
    let eig = linalg::hermitian_eigen(&linalg::hermitian_part(m));
    let mut scaled = eig.vectors.clone();
    let mut total = 0.0;
    for (k, &lam) in eig.values.iter().enumerate() {
        let w = lam.max(0.0);
        total += w;
        scaled.column_mut(k).scale_mut(w);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateState("no positive eigenvalue to keep".into()));
    }
    let rho = (scaled * eig.vectors.adjoint()).unscale(total);
    DensityOperator::new(linalg::hermitian_part(&rho))
}

/// `‖Q − G∘G*‖_max`, with `Q` from operator space and `G` from state space.
pub fn hadamard_identity_check(povm: &PovmSet) -> f64 {
    let q = povm::gram_matrix_operator_space(povm);
    let g = povm::gram_matrix_state_space(povm);
    let n = povm.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let h = (g[(i, j)] * g[(i, j)].conj()).re;
            worst = worst.max((q[(i, j)] - h).abs());
        }
    }
    worst
}

/// `ρ` in the Gram eigenbasis and its modal weighting.
#[derive(Debug, Clone)]
pub struct ModalWeighting {
    /// `ρ̃ = U†ρU`.
    pub coefficients: CMatrix,
    /// `λ_k λ_l ρ̃_kl`.
    pub weighted: CMatrix,
    /// `‖UΛρ̃ΛU† − GρG‖_max`.
    pub deviation: f64,
}

pub fn modal_weighting(rho: &CMatrix, analysis: &GramAnalysis) -> Result<ModalWeighting> {
    if !rho.is_square() {
        return Err(invalid("operator must be square"));
    }
    check_dim(analysis.dim(), rho.nrows())?;
    let u = &analysis.eigenvectors;
    let coefficients = u.adjoint() * rho * u;
    let lam = &analysis.eigenvalues;
    let weighted = CMatrix::from_fn(lam.len(), lam.len(), |k, l| coefficients[(k, l)] * (lam[k] * lam[l]));
    let g = &analysis.operator;
    let deviation = linalg::max_abs(&(u * &weighted * u.adjoint() - g * rho * g));
    if !(deviation <= MODAL_TOLERANCE) {
        return Err(Error::NumericalConsistency(format!(
            "modal weighting deviates from GρG by {deviation:e}"
        )));
    }
    Ok(ModalWeighting {
        coefficients,
        weighted,
        deviation,
    })
}
