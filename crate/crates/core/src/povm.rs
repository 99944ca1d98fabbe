//! Rank-1 measurement models and their Gram structures.
//!
//! A [`PovmSet`] holds effect vectors `|y_i⟩` with `Π_i = |y_i⟩⟨y_i|`. From it
//! we build the state-space Gram operator `G = Σ Π_i`, the `N × N` Gram matrix
//! `⟨y_i|y_j⟩`, and the operator-space Gram matrix `Q_ij = Tr(Π_i Π_j)`. The
//! spectrum of `G` ([`GramAnalysis`]) sets which Hilbert-space modes the
//! measurement actually reaches.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::fock::{self, StateVector};
use crate::linalg::{self, CMatrix, PackedRows, RMatrix, C64};

/// Support threshold on `λ / λ_max` below which Gram eigenvalues are treated
/// as zero.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-12;
/// Ratio `λ_k / λ_1` above which a Gram mode counts as reliably resolved.
pub const DEFAULT_DROP_RATIO: f64 = 1e-3;
/// Hermiticity tolerance (relative to `max(1, ‖G‖_max)`) for spectral input.
pub const GRAM_HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Where an outcome came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectMeta {
    pub phase_index: usize,
    pub bin_index: usize,
    /// Local-oscillator phase in radians.
    pub phase: f64,
    /// Bin centre in quadrature units.
    pub bin_center: f64,
    pub bin_width: f64,
}

impl EffectMeta {
    /// Metadata for an effect that is not part of a binned quadrature scan.
    pub fn unbinned(index: usize) -> Self {
        Self {
            phase_index: 0,
            bin_index: index,
            phase: 0.0,
            bin_center: 0.0,
            bin_width: 1.0,
        }
    }
}

/// Rank-1 effect `|y⟩⟨y|`; the bin weight is absorbed into `vector`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub vector: StateVector,
    pub meta: EffectMeta,
}

/// Ordered rank-1 POVM on a common ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    dim: usize,
    effects: Vec<Effect>,
}

impl PovmSet {
    pub fn new(dim: usize, effects: Vec<Effect>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("POVM dimension must be positive"));
        }
        if effects.is_empty() {
            return Err(invalid("POVM needs at least one effect"));
        }
        for (i, e) in effects.iter().enumerate() {
            if e.vector.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.vector.dim(),
                });
            }
            if !(e.meta.bin_width > 0.0 && e.meta.bin_width.is_finite()) {
                return Err(invalid(format!("effect {i} has non-positive bin width")));
            }
        }
        Ok(Self { dim, effects })
    }

    /// Effects from bare vectors, metadata numbered by position.
    pub fn from_vectors(vectors: Vec<StateVector>) -> Result<Self> {
        let dim = vectors.first().map(StateVector::dim).unwrap_or(0);
        let effects = vectors
            .into_iter()
            .enumerate()
            .map(|(i, vector)| Effect {
                vector,
                meta: EffectMeta::unbinned(i),
            })
            .collect();
        Self::new(dim, effects)
    }

    /// Projectors onto the Fock basis `|0⟩ … |dim−1⟩`.
    pub fn fock_projectors(dim: usize) -> Result<Self> {
        Self::from_vectors((0..dim).map(|n| StateVector::fock(n, dim)).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of outcomes `N`.
    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn vector(&self, i: usize) -> &[C64] {
        self.effects[i].vector.amplitudes()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[C64]> + '_ {
        self.effects.iter().map(|e| e.vector.amplitudes())
    }

    /// Outcome position of `(phase_index, bin_index)`.
    pub fn position(&self, phase_index: usize, bin_index: usize) -> Option<usize> {
        self.effects
            .iter()
            .position(|e| e.meta.phase_index == phase_index && e.meta.bin_index == bin_index)
    }

    /// The same effects in a different order: `order[k]` is the source index of
    /// output position `k`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(invalid("permutation length differs from outcome count"));
        }
        let mut seen = vec![false; self.len()];
        for &k in order {
            if k >= self.len() || core::mem::replace(&mut seen[k], true) {
                return Err(invalid("not a permutation"));
            }
        }
        Ok(Self {
            dim: self.dim,
            effects: order.iter().map(|&k| self.effects[k].clone()).collect(),
        })
    }

    /// Packed Hermitian coordinates of every `Π_i`, one row per outcome.
    pub(crate) fn packed_projectors(&self) -> PackedRows {
        let mut rows = PackedRows::zeros(self.len(), linalg::packed_len(self.dim));
        for (i, y) in self.vectors().enumerate() {
            linalg::pack_projector(y, rows.row_mut(i));
        }
        rows
    }
}

/// Binned homodyne scan: a set of local-oscillator phases, each read out in
/// uniform quadrature bins over a common range.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneConfig {
    phases: Vec<f64>,
    bins: usize,
    range: (f64, f64),
}

impl HomodyneConfig {
    /// `phase_count` phases `θ_j = jπ/phase_count`.
    pub fn uniform(phase_count: usize, bins: usize, range: (f64, f64)) -> Result<Self> {
        let phases = (0..phase_count).map(|j| j as f64 * PI / phase_count as f64).collect();
        Self::with_phases(phases, bins, range)
    }

    pub fn with_phases(phases: Vec<f64>, bins: usize, range: (f64, f64)) -> Result<Self> {
        if phases.is_empty() {
            return Err(invalid("homodyne scan needs at least one phase"));
        }
        if bins == 0 {
            return Err(invalid("homodyne scan needs at least one bin"));
        }
        if !phases.iter().all(|t| t.is_finite() && (0.0..PI).contains(t)) {
            return Err(invalid("phases must lie in [0, π)"));
        }
        if !phases.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("phases must be strictly increasing"));
        }
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("quadrature range ({lo}, {hi}) must be finite and increasing")));
        }
        Ok(Self { phases, bins, range })
    }

    /// Six phases, 51 bins on `(−5, 5)`.
    pub fn six_phase_default() -> Self {
        Self::uniform(6, 51, (-5.0, 5.0)).expect("valid default")
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn bin_width(&self) -> f64 {
        (self.range.1 - self.range.0) / self.bins as f64
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        self.range.0 + (b as f64 + 0.5) * self.bin_width()
    }

    pub fn outcome_count(&self) -> usize {
        self.phases.len() * self.bins
    }
}

/// Midpoint-rule homodyne POVM: for phase `θ_j` and bin centre `x_b` the
/// effect vector is `√Δx · (⟨x_b, θ_j|n⟩)*`. Outcomes are phase-major.
pub fn build_homodyne_povm(config: &HomodyneConfig, dim: usize) -> Result<PovmSet> {
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let width = config.bin_width();
    let weight = width.sqrt();
    let mut effects = Vec::with_capacity(config.outcome_count());
    for (j, &theta) in config.phases.iter().enumerate() {
        for b in 0..config.bins {
            let x = config.bin_center(b);
            let amplitudes = fock::quadrature_overlaps(x, theta, dim)?
                .into_iter()
                .map(|z| z.conj() * weight)
                .collect();
            effects.push(Effect {
                vector: StateVector::new(amplitudes)?,
                meta: EffectMeta {
                    phase_index: j,
                    bin_index: b,
                    phase: theta,
                    bin_center: x,
                    bin_width: width,
                },
            });
        }
    }
    PovmSet::new(dim, effects)
}

/// `G = Σ_i |y_i⟩⟨y_i|`.
pub fn gram_operator(povm: &PovmSet) -> CMatrix {
    let d = povm.dim();
    let mut g = CMatrix::zeros(d, d);
    for y in povm.vectors() {
        for j in 0..d {
            for k in j..d {
                g[(j, k)] += y[j] * y[k].conj();
            }
        }
    }
    for j in 0..d {
        g[(j, j)].im = 0.0;
        for k in (j + 1)..d {
            g[(k, j)] = g[(j, k)].conj();
        }
    }
    g
}

/// Spectral analysis of a Hermitian positive-semidefinite operator.
#[derive(Debug, Clone)]
pub struct GramAnalysis {
    /// The analysed operator.
    pub operator: CMatrix,
    /// Eigenvalues, descending. Negative rounding noise below the threshold
    /// is clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub eigenvectors: CMatrix,
    /// Number of eigenvalues above `threshold`.
    pub rank: usize,
    /// Absolute support threshold `τ = relative × λ_max`.
    pub threshold: f64,
}

impl GramAnalysis {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn in_support(&self, k: usize) -> bool {
        k < self.rank
    }

    pub fn eigenvector(&self, k: usize) -> StateVector {
        StateVector::new(self.eigenvectors.column(k).iter().copied().collect()).expect("finite eigenvector")
    }

    /// The `d` dominant eigenvectors.
    pub fn top_modes(&self, d: usize) -> Result<Vec<StateVector>> {
        if d == 0 || d > self.dim() {
            return Err(invalid(format!("requested {d} modes of a {}-dimensional spectrum", self.dim())));
        }
        Ok((0..d).map(|k| self.eigenvector(k)).collect())
    }

    /// `U Λ U†`.
    pub fn reassemble(&self) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(lam);
        }
        scaled * u.adjoint()
    }

    /// Projector onto the span of eigenvectors with eigenvalue above `τ`.
    pub fn support_projector(&self) -> CMatrix {
        let u = self.eigenvectors.columns(0, self.rank);
        u * u.adjoint()
    }
}

/// Full eigendecomposition of `g`; `τ = relative_threshold × λ_max`.
pub fn gram_spectrum(g: &CMatrix, relative_threshold: f64) -> Result<GramAnalysis> {
    if !g.is_square() || g.nrows() == 0 {
        return Err(invalid("Gram operator must be a non-empty square matrix"));
    }
    if !(relative_threshold >= 0.0 && relative_threshold < 1.0) {
        return Err(invalid("relative threshold must lie in [0, 1)"));
    }
    let scale = linalg::max_abs(g).max(1.0);
    let defect = linalg::hermiticity_defect(g);
    if !(defect <= GRAM_HERMITIAN_TOLERANCE * scale) {
        return Err(invalid(format!("operator is not Hermitian (defect {defect:e})")));
    }
    let eig = linalg::hermitian_eigen(g);
    let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let threshold = relative_threshold * lambda_max;
    let eigenvalues: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v < 0.0 && v <= threshold { 0.0 } else { v })
        .collect();
    let rank = eigenvalues.iter().filter(|&&v| v > threshold).count();
    Ok(GramAnalysis {
        operator: g.clone(),
        eigenvalues,
        eigenvectors: eig.vectors,
        rank,
        threshold,
    })
}

/// `G_ij = ⟨y_i|y_j⟩`.
pub fn gram_matrix_state_space(povm: &PovmSet) -> CMatrix {
    let n = povm.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = linalg::inner(povm.vector(i), povm.vector(j));
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
        g[(i, i)].im = 0.0;
    }
    g
}

/// `Q_ij = Tr(Π_i Π_j)`, evaluated in operator space from the packed
/// projectors (not from `⟨y_i|y_j⟩`).
pub fn gram_matrix_operator_space(povm: &PovmSet) -> RMatrix {
    let rows = povm.packed_projectors();
    let n = povm.len();
    let mut q = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = linalg::dot(rows.row(i), rows.row(j));
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    q
}

/// Number of leading eigenvalues with `λ_k ≥ drop_ratio × λ_1`.
pub fn effective_rank(analysis: &GramAnalysis, drop_ratio: f64) -> usize {
    let Some(&first) = analysis.eigenvalues.first() else {
        return 0;
    };
    analysis
        .eigenvalues
        .iter()
        .take_while(|&&v| v >= drop_ratio * first)
        .count()
}

/// Descending eigenvalues of a real symmetric matrix such as `Q`.
pub fn symmetric_spectrum(m: &RMatrix) -> Vec<f64> {
    linalg::symmetric_eigen(m).0
}

/// `Σ_i ⟨n|Π_i|n⟩` over the outcomes of one phase; approximates 1 when the
/// bins cover the support of `ψ_n`.
pub fn phase_completeness(povm: &PovmSet, phase_index: usize, n: usize) -> f64 {
    povm.effects()
        .iter()
        .filter(|e| e.meta.phase_index == phase_index)
        .map(|e| e.vector.amplitudes()[n].norm_sqr())
        .sum()
}

/// Largest `⟨y_i|y_i⟩`.
pub fn max_effect_weight(povm: &PovmSet) -> f64 {
    povm.effects().iter().map(|e| e.vector.norm_sqr()).fold(0.0, f64::max)
}
