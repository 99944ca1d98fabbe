//! Normalized maximum-likelihood reconstruction.
//!
//! The likelihood is the conditional one, `log L = Σ n_i log(p_i / Σ_k p_k)`,
//! so incomplete measurements (`G ≠ I`) are handled without an external
//! truncation. The solver maps the problem onto the support of `G` with
//! `Π'_i = G^{-1/2} Π_i G^{-1/2}` (which sums to the identity there) and runs
//! the diluted congruence iteration
//!
//! ```text
//! σ ← N[(I + ε(R' − I)) σ (I + ε(R' − I))],   R' = Σ_i f_i / p'_i Π'_i
//! ```
//!
//! starting from `σ₀ = I/r`. The step size `ε` is halved whenever a step would
//! lower the likelihood. The estimate is mapped back as
//! `ρ ∝ G^{-1/2} σ G^{-1/2}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, invalid, Error, Result};
use crate::fock::{DensityOperator, StateVector};
use crate::linalg::{self, CMatrix, C64};
use crate::povm::{self, Effect, GramAnalysis, PovmSet, DEFAULT_RANK_THRESHOLD};

/// Orthonormality tolerance for subspace bases.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;
/// Width of the band, relative to `|log L|`, in which a log-likelihood change
/// is treated as rounding noise. Near the optimum true gains fall below the
/// noise of the probabilities; a step in the band is accepted only if it
/// lowers the Born residual.
pub const ASCENT_SLACK: f64 = 1e-14;

/// Observed outcome counts aligned with a [`PovmSet`].
///
/// Counts are real so noiseless pseudo-counts (`exposure × p_i`) can be fed
/// through the same path as integer data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    counts: Vec<f64>,
    total: f64,
    frequencies: Vec<f64>,
}

impl Dataset {
    pub fn from_counts(counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(invalid("dataset has no outcomes"));
        }
        if counts.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(invalid("counts must be finite and non-negative"));
        }
        let total: f64 = counts.iter().sum();
        let frequencies = if total > 0.0 {
            counts.iter().map(|n| n / total).collect()
        } else {
            vec![0.0; counts.len()]
        };
        Ok(Self {
            counts,
            total,
            frequencies,
        })
    }

    pub fn from_integer_counts(counts: &[u64]) -> Result<Self> {
        Self::from_counts(counts.iter().map(|&n| n as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0.0
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `f_i = n_i / Σ_k n_k` (all zero for an empty dataset).
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Reordered so that position `k` holds source outcome `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_dim(self.len(), order.len())?;
        Self::from_counts(order.iter().map(|&k| self.counts[k]).collect())
    }
}

fn check_operator(rho: &CMatrix, povm: &PovmSet) -> Result<()> {
    if !rho.is_square() {
        return Err(invalid("operator must be square"));
    }
    check_dim(povm.dim(), rho.nrows())
}

/// `p_i = ⟨y_i|ρ|y_i⟩`, negative rounding clamped to zero.
///
/// `rho` need not be trace-normalized; for an incomplete POVM the sum is
/// `Tr(ρG)`.
pub fn expected_probabilities(rho: &CMatrix, povm: &PovmSet) -> Result<Vec<f64>> {
    check_operator(rho, povm)?;
    Ok(povm
        .vectors()
        .map(|y| linalg::expectation(rho, y).max(0.0))
        .collect())
}

/// Value of the conditional log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    /// `Σ n_i log(p_i / Σ_k p_k)`; `-∞` when an observed outcome is impossible.
    pub value: f64,
    /// Outcomes with `n_i > 0` but `p_i = 0`.
    pub impossible_outcomes: usize,
}

pub fn log_likelihood(rho: &CMatrix, dataset: &Dataset, povm: &PovmSet) -> Result<LogLikelihood> {
    check_dim(povm.len(), dataset.len())?;
    if dataset.is_empty() {
        return Err(Error::EmptyData("log-likelihood needs at least one count".into()));
    }
    let p = expected_probabilities(rho, povm)?;
    let norm: f64 = p.iter().sum();
    let mut value = 0.0;
    let mut impossible = 0;
    for (&n, &pi) in dataset.counts().iter().zip(&p) {
        if n == 0.0 {
            continue;
        }
        if pi <= 0.0 {
            impossible += 1;
        } else {
            value += n * (pi / norm).ln();
        }
    }
    if impossible > 0 {
        value = f64::NEG_INFINITY;
    }
    Ok(LogLikelihood {
        value,
        impossible_outcomes: impossible,
    })
}

/// `R(ρ) = Σ_{f_i > 0} f_i / max(p_i, floor) Π_i`.
#[derive(Debug, Clone)]
pub struct ROperator {
    pub matrix: CMatrix,
    /// Outcomes whose probability was raised to the floor.
    pub floor_activations: usize,
}

/// Builds `R(ρ)` with raw probabilities `p_i = Tr(ρΠ_i)`; the floor is
/// `floor_ratio × max_k p_k`.
pub fn r_operator(rho: &CMatrix, dataset: &Dataset, povm: &PovmSet, floor_ratio: f64) -> Result<ROperator> {
    check_dim(povm.len(), dataset.len())?;
    let p = expected_probabilities(rho, povm)?;
    let p_max = p.iter().copied().fold(0.0, f64::max);
    if p_max <= 0.0 {
        return Err(Error::NumericalConsistency("operator gives zero probability to every outcome".into()));
    }
    let floor = floor_ratio * p_max;
    let d = povm.dim();
    let mut r = CMatrix::zeros(d, d);
    let mut activations = 0;
    for ((y, &f), &pi) in povm.vectors().zip(dataset.frequencies()).zip(&p) {
        if f == 0.0 {
            continue;
        }
        let q = if pi < floor {
            activations += 1;
            floor
        } else {
            pi
        };
        let w = f / q;
        for j in 0..d {
            for k in 0..d {
                r[(j, k)] += y[j] * y[k].conj() * w;
            }
        }
    }
    Ok(ROperator {
        matrix: linalg::hermitian_part(&r),
        floor_activations: activations,
    })
}

/// `‖R(ρ̂)ρ̂ − Gρ̂‖_max` in the gauge `Tr(Gρ̂) = 1`, where the extremal equation
/// `R(ρ)ρ = Gρ` is stated.
pub fn extremal_residual(rho: &CMatrix, dataset: &Dataset, povm: &PovmSet, floor_ratio: f64) -> Result<f64> {
    let g = povm::gram_operator(povm);
    let norm = linalg::trace(&(&g * rho)).re;
    if !(norm > 0.0) {
        return Err(Error::NumericalConsistency("Tr(Gρ) vanishes".into()));
    }
    let r = r_operator(rho, dataset, povm, floor_ratio)?;
    // R(cρ)(cρ) = R(ρ)ρ, so only the Gρ side needs the gauge
    Ok(linalg::max_abs(&(&r.matrix * rho - (&g * rho).unscale(norm))))
}

/// The measurement rescaled onto the support of `G`.
#[derive(Debug, Clone)]
pub struct SupportRescaling {
    /// Effects `Λ^{-1/2} U_s† |y_i⟩` in support coordinates; they resolve the
    /// identity on the support.
    pub povm: PovmSet,
    /// Support isometry `U_s` (ambient × support).
    pub isometry: CMatrix,
    /// `λ_k^{1/2}` for the support eigenvalues.
    pub sqrt_eigenvalues: Vec<f64>,
}

impl SupportRescaling {
    pub fn support_dim(&self) -> usize {
        self.sqrt_eigenvalues.len()
    }

    /// `σ ∝ G^{1/2} ρ G^{1/2}` in support coordinates, unit trace.
    pub fn to_support(&self, rho: &CMatrix) -> Result<CMatrix> {
        let u = &self.isometry;
        let mut s = u.adjoint() * rho * u;
        let r = self.support_dim();
        for j in 0..r {
            for k in 0..r {
                s[(j, k)] *= self.sqrt_eigenvalues[j] * self.sqrt_eigenvalues[k];
            }
        }
        normalize_trace(linalg::hermitian_part(&s))
    }

    /// `ρ ∝ G^{-1/2} σ G^{-1/2}` in the ambient space, unit trace.
    pub fn to_ambient(&self, sigma: &CMatrix) -> Result<CMatrix> {
        let r = self.support_dim();
        check_dim(r, sigma.nrows())?;
        let mut scaled = sigma.clone();
        for j in 0..r {
            for k in 0..r {
                scaled[(j, k)] /= self.sqrt_eigenvalues[j] * self.sqrt_eigenvalues[k];
            }
        }
        let u = &self.isometry;
        normalize_trace(linalg::hermitian_part(&(u * scaled * u.adjoint())))
    }

    /// `G^{-1/2} Π_i G^{-1/2}` as an ambient operator.
    pub fn ambient_effect(&self, i: usize) -> CMatrix {
        let y = linalg::mat_vec(&self.isometry, self.povm.vector(i));
        linalg::outer(&y)
    }
}

fn normalize_trace(m: CMatrix) -> Result<CMatrix> {
    let tr = linalg::trace(&m).re;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::NumericalConsistency(format!("cannot normalize trace {tr}")));
    }
    Ok(m.unscale(tr))
}

/// Builds `Π'_i = G^{-1/2} Π_i G^{-1/2}` on the support of `G` (eigenvalues
/// above the analysis threshold).
pub fn rescale_to_support(povm: &PovmSet, analysis: &GramAnalysis) -> Result<SupportRescaling> {
    check_dim(povm.dim(), analysis.dim())?;
    let r = analysis.rank;
    if r == 0 {
        return Err(Error::EmptyMeasurement("Gram operator has empty support".into()));
    }
    let isometry = analysis.eigenvectors.columns(0, r).into_owned();
    let sqrt_eigenvalues: Vec<f64> = analysis.eigenvalues[..r].iter().map(|&l| l.sqrt()).collect();
    let effects = povm
        .effects()
        .iter()
        .map(|e| {
            let coeffs: Vec<C64> = (0..r)
                .map(|k| {
                    let col = isometry.column(k);
                    let c: C64 = col.iter().zip(e.vector.amplitudes()).map(|(u, y)| u.conj() * y).sum();
                    c / sqrt_eigenvalues[k]
                })
                .collect();
            Ok(Effect {
                vector: StateVector::new(coeffs)?,
                meta: e.meta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SupportRescaling {
        povm: PovmSet::new(r, effects)?,
        isometry,
        sqrt_eigenvalues,
    })
}

/// Stacks an orthonormal basis as the columns of `V`.
pub fn basis_matrix(basis: &[StateVector]) -> Result<CMatrix> {
    let Some(first) = basis.first() else {
        return Err(invalid("subspace basis is empty"));
    };
    let dim = first.dim();
    if basis.len() > dim {
        return Err(invalid(format!("{} basis vectors exceed dimension {dim}", basis.len())));
    }
    for v in basis {
        check_dim(dim, v.dim())?;
    }
    let v = CMatrix::from_fn(dim, basis.len(), |i, k| basis[k].amplitudes()[i]);
    let defect = linalg::max_abs(&(v.adjoint() * &v - CMatrix::identity(basis.len(), basis.len())));
    if !(defect <= ORTHONORMAL_TOLERANCE) {
        return Err(invalid(format!("subspace basis is not orthonormal (defect {defect:e})")));
    }
    Ok(v)
}

/// Effects `V†|y_i⟩` in the coordinates of `basis`; the restricted Gram
/// operator is `V†GV`.
pub fn restrict_to_subspace(povm: &PovmSet, basis: &[StateVector]) -> Result<PovmSet> {
    let v = basis_matrix(basis)?;
    check_dim(povm.dim(), v.nrows())?;
    let vt = v.adjoint();
    let effects = povm
        .effects()
        .iter()
        .map(|e| {
            Ok(Effect {
                vector: StateVector::new(linalg::mat_vec(&vt, e.vector.amplitudes()))?,
                meta: e.meta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PovmSet::new(basis.len(), effects)
}

/// `max_i |p_i/Σ_k p_k − f_i|` for `σ` on a rescaled (complete) measurement.
pub fn born_residual(sigma: &CMatrix, dataset: &Dataset, rescaled: &PovmSet) -> Result<f64> {
    check_dim(rescaled.len(), dataset.len())?;
    let p = expected_probabilities(sigma, rescaled)?;
    let norm: f64 = p.iter().sum();
    if !(norm > 0.0) {
        return Err(Error::NumericalConsistency("state gives zero total probability".into()));
    }
    Ok(p.iter()
        .zip(dataset.frequencies())
        .map(|(pi, f)| (pi / norm - f).abs())
        .fold(0.0, f64::max))
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    /// Orthonormal basis of the reconstruction subspace; `None` reconstructs
    /// in the full ambient space.
    pub subspace: Option<Vec<StateVector>>,
    /// Initial dilution `ε ∈ (0, 1]` tried at every step.
    pub dilution: f64,
    /// Backtracking stops halving `ε` here.
    pub min_dilution: f64,
    /// Probability floor relative to `max_k p_k`, applied to observed outcomes.
    pub probability_floor: f64,
    pub max_iterations: usize,
    /// Stop when the per-count log-likelihood gains less than this…
    pub likelihood_tolerance: f64,
    /// …and the Born residual is below this.
    pub born_tolerance: f64,
    /// Relative support threshold for the Gram spectrum.
    pub rank_threshold: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            subspace: None,
            dilution: 1.0,
            min_dilution: 1.0 / 64.0,
            probability_floor: 1e-14,
            max_iterations: 20_000,
            likelihood_tolerance: 1e-10,
            born_tolerance: 1e-7,
            rank_threshold: DEFAULT_RANK_THRESHOLD,
        }
    }
}

impl ReconstructionConfig {
    pub fn with_subspace(mut self, basis: Vec<StateVector>) -> Self {
        self.subspace = Some(basis);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dilution > 0.0 && self.dilution <= 1.0) {
            return Err(invalid("dilution must lie in (0, 1]"));
        }
        if !(self.min_dilution > 0.0 && self.min_dilution <= self.dilution) {
            return Err(invalid("minimum dilution must lie in (0, dilution]"));
        }
        if !(self.probability_floor > 0.0 && self.probability_floor < 1.0) {
            return Err(invalid("probability floor must lie in (0, 1)"));
        }
        if !(self.likelihood_tolerance >= 0.0 && self.born_tolerance >= 0.0) {
            return Err(invalid("tolerances must be non-negative"));
        }
        if !(self.rank_threshold >= 0.0 && self.rank_threshold < 1.0) {
            return Err(invalid("rank threshold must lie in [0, 1)"));
        }
        if let Some(basis) = &self.subspace {
            basis_matrix(basis)?;
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    /// Both tolerances met.
    Converged,
    MaxIterations,
    /// No step, even at the minimum dilution, raised the likelihood.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// Estimate in the ambient Fock basis.
    pub rho: DensityOperator,
    /// `Σ n_i log(p_i/Σp)` after each accepted step, starting with `σ₀`.
    /// Entries after the first accumulate term-wise step gains.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub born_residual: f64,
    /// `‖R(ρ)ρ − Gρ‖_max` in the reconstruction space (gauge `Tr(Gρ) = 1`).
    pub extremal_residual: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Observed outcomes whose probability hit the floor in the final state.
    pub floor_activations: usize,
    /// Dimension of the reconstruction space (subspace size or ambient).
    pub working_dim: usize,
    /// Rank of `G` on the reconstruction space.
    pub support_dim: usize,
    /// Total number of step-size halvings.
    pub dilution_halvings: usize,
}

struct Evaluation {
    /// Per-count log-likelihood `Σ f_i log q_i`.
    ll: f64,
    born: f64,
    /// `f_i / q_i` on observed outcomes.
    weights: Vec<f64>,
    /// Floored `q_i` on observed outcomes.
    floored: Vec<f64>,
    floor_activations: usize,
}

/// `Σ f_i log(q'_i / q_i)` evaluated term by term, which resolves gains far
/// below the rounding error of two separately summed log-likelihoods.
fn gain(freq: &[f64], from: &Evaluation, to: &Evaluation) -> f64 {
    freq.iter()
        .zip(&from.floored)
        .zip(&to.floored)
        .filter(|((f, _), _)| **f > 0.0)
        .map(|((f, a), b)| f * ((b - a) / a).ln_1p())
        .sum()
}

fn evaluate(p: &[f64], freq: &[f64], floor_ratio: f64) -> Evaluation {
    let norm: f64 = p.iter().map(|v| v.max(0.0)).sum();
    let p_max = p.iter().copied().fold(0.0, f64::max) / norm;
    let floor = floor_ratio * p_max;
    let mut ll = 0.0;
    let mut born = 0.0f64;
    let mut activations = 0;
    let mut weights = vec![0.0; p.len()];
    let mut floored = vec![0.0; p.len()];
    for (i, (&pi, &f)) in p.iter().zip(freq).enumerate() {
        let q = pi.max(0.0) / norm;
        born = born.max((q - f).abs());
        if f > 0.0 {
            let qf = if q < floor {
                activations += 1;
                floor
            } else {
                q
            };
            ll += f * qf.ln();
            weights[i] = f / qf;
            floored[i] = qf;
        }
    }
    Evaluation {
        ll,
        born,
        weights,
        floored,
        floor_activations: activations,
    }
}

/// Order-independent outcome ordering: by count, then effect vector.
fn canonical_order(povm: &PovmSet, dataset: &Dataset) -> Vec<usize> {
    let f = dataset.counts();
    let mut order: Vec<usize> = (0..povm.len()).collect();
    order.sort_by(|&a, &b| {
        f[a].total_cmp(&f[b]).then_with(|| {
            povm.vector(a)
                .iter()
                .zip(povm.vector(b))
                .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    order
}

/// Runs the diluted fixed-point iteration to the conditional MaxLik estimate.
///
/// Non-convergence is reported through [`ReconstructionResult::converged`],
/// not as an error.
pub fn maxlik_solve(dataset: &Dataset, povm: &PovmSet, config: &ReconstructionConfig) -> Result<ReconstructionResult> {
    config.validate()?;
    check_dim(povm.len(), dataset.len())?;
    if dataset.is_empty() {
        return Err(invalid("dataset contains no counts"));
    }

    let order = canonical_order(povm, dataset);
    let povm = povm.permuted(&order)?;
    let dataset = dataset.permuted(&order)?;

    let (working, embedding) = match &config.subspace {
        Some(basis) => (restrict_to_subspace(&povm, basis)?, Some(basis_matrix(basis)?)),
        None => (povm, None),
    };
    let analysis = povm::gram_spectrum(&povm::gram_operator(&working), config.rank_threshold)?;
    let support = rescale_to_support(&working, &analysis)?;
    let r = support.support_dim();

    let rows = support.povm.packed_projectors();
    let freq = dataset.frequencies();
    let floor = config.probability_floor;

    let mut sigma = CMatrix::identity(r, r).unscale(r as f64);
    let mut packed = vec![0.0; linalg::packed_len(r)];
    let mut p = vec![0.0; rows.rows()];
    linalg::pack_hermitian(&sigma, &mut packed);
    rows.apply(&packed, &mut p);
    let mut current = evaluate(&p, freq, floor);

    // accumulated from per-step gains
    let mut ll = current.ll;
    let mut trace = Vec::new();
    trace.push(dataset.total() * ll);
    let mut r_packed = vec![0.0; linalg::packed_len(r)];
    let eye = CMatrix::identity(r, r);
    let mut iterations = 0;
    let mut halvings = 0;
    let mut stop_reason = StopReason::MaxIterations;

    while iterations < config.max_iterations {
        rows.combine(&current.weights, &mut r_packed);
        let r_op = linalg::unpack_hermitian(&r_packed, r);
        let mut eps = config.dilution;
        let step = loop {
            let tilde = eye.scale(1.0 - eps) + r_op.scale(eps);
            let cand = linalg::hermitian_part(&(&tilde * &sigma * &tilde));
            let tr = linalg::trace(&cand).re;
            if tr > 0.0 && tr.is_finite() {
                let cand = cand.unscale(tr);
                linalg::pack_hermitian(&cand, &mut packed);
                rows.apply(&packed, &mut p);
                let eval = evaluate(&p, freq, floor);
                let g = gain(freq, &current, &eval);
                // gains inside the rounding band count only if the Born residual drops
                let slack = ASCENT_SLACK * ll.abs().max(1.0);
                let tied = g >= -slack && eval.born < current.born;
                if g > slack || tied {
                    break Some((cand, eval, g));
                }
            }
            if eps <= config.min_dilution {
                break None;
            }
            eps = (0.5 * eps).max(config.min_dilution);
            halvings += 1;
        };
        let Some((cand, eval, g)) = step else {
            stop_reason = StopReason::Stalled;
            break;
        };
        sigma = cand;
        current = eval;
        iterations += 1;
        ll += g;
        trace.push(dataset.total() * ll);
        if g < config.likelihood_tolerance && current.born < config.born_tolerance {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    let converged = match stop_reason {
        StopReason::Converged => true,
        StopReason::Stalled => current.born < config.born_tolerance,
        StopReason::MaxIterations => false,
    };

    let rho_working = support.to_ambient(&sigma)?;
    let extremal = extremal_residual(&rho_working, &dataset, &working, floor)?;
    let rho = match embedding {
        Some(v) => normalize_trace(linalg::hermitian_part(&(&v * rho_working * v.adjoint())))?,
        None => rho_working,
    };

    Ok(ReconstructionResult {
        rho: DensityOperator::from_trusted(rho),
        log_likelihood: trace,
        iterations,
        born_residual: current.born,
        extremal_residual: extremal,
        converged,
        stop_reason,
        floor_activations: current.floor_activations,
        working_dim: working.dim(),
        support_dim: r,
        dilution_halvings: halvings,
    })
}
