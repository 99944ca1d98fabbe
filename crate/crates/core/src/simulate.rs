//! Synthetic counts and the reconstruction experiments built on them.
//!
//! Randomness comes from ChaCha8 seeded with the experiment seed; trial `t`
//! draws from stream `t`, so trials can run in any order or in parallel and
//! still see the same numbers. Within a trial the same dataset feeds every
//! dimension and basis kind.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{check_dim, invalid, Error, Result};
use crate::fock::{self, DensityOperator, PhaseSpaceGrid, StateVector, WignerGrid};
use crate::maxlik::{self, Dataset, ReconstructionConfig, ReconstructionResult, StopReason};
use crate::povm::{self, GramAnalysis, PovmSet};

/// Expected total counts when none is given.
pub const DEFAULT_EXPOSURE: f64 = 1e5;
/// Trials per setting when none is given.
pub const DEFAULT_TRIALS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// `n_i = exposure × p_i/Σp` as real pseudo-counts.
    Exact,
    /// One multinomial draw of exactly `exposure` events.
    Multinomial,
    /// Independent `Poisson(exposure × p_i/Σp)` per outcome.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub exposure: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, exposure: f64, seed: u64) -> Result<Self> {
        let model = Self { kind, exposure, seed };
        model.validate()?;
        Ok(model)
    }

    pub fn exact() -> Self {
        Self {
            kind: NoiseKind::Exact,
            exposure: DEFAULT_EXPOSURE,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(invalid("exposure must be positive and finite"));
        }
        if self.kind == NoiseKind::Multinomial && (self.exposure.fract() != 0.0 || self.exposure > u64::MAX as f64) {
            return Err(invalid("multinomial exposure must be a whole number of events"));
        }
        Ok(())
    }

    /// Generator for trial `trial`.
    pub fn rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// Counts for trial 0.
pub fn generate_counts(rho: &DensityOperator, povm: &PovmSet, noise: &NoiseModel) -> Result<Dataset> {
    generate_trial_counts(rho, povm, noise, 0)
}

pub fn generate_trial_counts(rho: &DensityOperator, povm: &PovmSet, noise: &NoiseModel, trial: u64) -> Result<Dataset> {
    noise.validate()?;
    let p = maxlik::expected_probabilities(rho.matrix(), povm)?;
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyData("state gives zero probability to every outcome".into()));
    }
    let q: Vec<f64> = p.iter().map(|v| v / total).collect();
    let counts = match noise.kind {
        NoiseKind::Exact => q.iter().map(|v| noise.exposure * v).collect(),
        NoiseKind::Multinomial => multinomial(&q, noise.exposure as u64, &mut noise.rng(trial))?,
        NoiseKind::Poisson => {
            let mut rng = noise.rng(trial);
            q.iter()
                .map(|v| {
                    let mean = noise.exposure * v;
                    if mean > 0.0 {
                        Poisson::new(mean)
                            .map(|d| d.sample(&mut rng))
                            .map_err(|e| invalid(format!("poisson mean {mean}: {e}")))
                    } else {
                        Ok(0.0)
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Dataset::from_counts(counts)
}

/// Sequential conditional binomials.
fn multinomial(q: &[f64], events: u64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut left = events;
    let mut mass = 1.0;
    let mut out = vec![0.0; q.len()];
    for (i, &qi) in q.iter().enumerate() {
        if left == 0 {
            break;
        }
        let n = if i + 1 == q.len() || mass <= qi {
            left
        } else {
            let prob = (qi / mass).clamp(0.0, 1.0);
            Binomial::new(left, prob)
                .map_err(|e| invalid(format!("binomial draw: {e}")))?
                .sample(rng)
        };
        out[i] = n as f64;
        left -= n;
        mass -= qi;
    }
    Ok(out)
}

/// Which subspace a reconstruction is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Dominant eigenvectors of `G`.
    Gram,
    /// `|0⟩ … |d−1⟩`.
    Fock,
}

/// Target, measurement and settings shared by every cell of an experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub target: StateVector,
    pub rho_true: DensityOperator,
    pub povm: PovmSet,
    pub analysis: GramAnalysis,
    pub noise: NoiseModel,
    pub solver: ReconstructionConfig,
}

impl Experiment {
    pub fn new(target: StateVector, povm: PovmSet, noise: NoiseModel, solver: ReconstructionConfig) -> Result<Self> {
        check_dim(povm.dim(), target.dim())?;
        noise.validate()?;
        if solver.subspace.is_some() {
            return Err(invalid("experiment solver settings must not fix a subspace"));
        }
        solver.validate()?;
        let rho_true = DensityOperator::pure(&target)?;
        let analysis = povm::gram_spectrum(&povm::gram_operator(&povm), solver.rank_threshold)?;
        Ok(Self {
            target,
            rho_true,
            povm,
            analysis,
            noise,
            solver,
        })
    }

    pub fn dataset(&self, trial: usize) -> Result<Dataset> {
        generate_trial_counts(&self.rho_true, &self.povm, &self.noise, trial as u64)
    }

    pub fn basis(&self, kind: BasisKind, d: usize) -> Result<Vec<StateVector>> {
        let dim = self.povm.dim();
        if d == 0 || d > dim {
            return Err(invalid(format!("reconstruction dimension {d} outside 1..={dim}")));
        }
        match kind {
            BasisKind::Gram => self.analysis.top_modes(d),
            BasisKind::Fock => (0..d).map(|n| StateVector::fock(n, dim)).collect(),
        }
    }

    pub fn reconstruct(&self, dataset: &Dataset, kind: BasisKind, d: usize) -> Result<ReconstructionResult> {
        let config = self.solver.clone().with_subspace(self.basis(kind, d)?);
        maxlik::maxlik_solve(dataset, &self.povm, &config)
    }

    /// One `(d, trial)` reconstruction.
    pub fn cell(&self, dataset: &Dataset, kind: BasisKind, d: usize, trial: usize) -> Result<TrialRecord> {
        let result = self.reconstruct(dataset, kind, d)?;
        TrialRecord::new(self, d, trial, &result)
    }

    /// One stability trial: the record plus the Wigner function of the
    /// estimate.
    pub fn stability_cell(
        &self,
        dataset: &Dataset,
        kind: BasisKind,
        d: usize,
        trial: usize,
        grid: &PhaseSpaceGrid,
    ) -> Result<(TrialRecord, WignerGrid)> {
        let result = self.reconstruct(dataset, kind, d)?;
        let record = TrialRecord::new(self, d, trial, &result)?;
        Ok((record, fock::wigner(&result.rho, grid)?))
    }
}

/// Outcome of a single reconstruction in a sweep or stability study.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub dim: usize,
    pub trial: usize,
    pub seed: u64,
    pub fidelity: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub born_residual: f64,
    pub extremal_residual: f64,
    pub floor_activations: usize,
}

impl TrialRecord {
    fn new(exp: &Experiment, dim: usize, trial: usize, result: &ReconstructionResult) -> Result<Self> {
        Ok(Self {
            dim,
            trial,
            seed: exp.noise.seed,
            fidelity: fock::fidelity(&exp.target, &result.rho)?,
            converged: result.converged,
            stop_reason: result.stop_reason,
            iterations: result.iterations,
            born_residual: result.born_residual,
            extremal_residual: result.extremal_residual,
            floor_activations: result.floor_activations,
        })
    }
}

/// Fidelity statistics over the trials of one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityStats {
    pub dim: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std: f64,
    pub converged_trials: usize,
    pub trials: usize,
}

impl FidelityStats {
    pub fn from_records<'a>(dim: usize, records: impl IntoIterator<Item = &'a TrialRecord>) -> Result<Self> {
        let rows: Vec<&TrialRecord> = records.into_iter().filter(|r| r.dim == dim).collect();
        if rows.is_empty() {
            return Err(invalid(format!("no trials recorded for dimension {dim}")));
        }
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.fidelity).sum::<f64>() / n;
        let var = if rows.len() > 1 {
            rows.iter().map(|r| (r.fidelity - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            dim,
            mean,
            min: rows.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min),
            max: rows.iter().map(|r| r.fidelity).fold(f64::NEG_INFINITY, f64::max),
            std: var.sqrt(),
            converged_trials: rows.iter().filter(|r| r.converged).count(),
            trials: rows.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub basis: BasisKind,
    pub dims: Vec<usize>,
    pub noise: NoiseModel,
    pub trials: usize,
    /// One entry per dimension, in `dims` order.
    pub stats: Vec<FidelityStats>,
    /// Sorted by dimension position, then trial.
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    /// Assembles a sweep from cell records in any order.
    pub fn aggregate(basis: BasisKind, dims: &[usize], noise: NoiseModel, trials: usize, mut records: Vec<TrialRecord>) -> Result<Self> {
        let position = |d: usize| dims.iter().position(|&x| x == d).unwrap_or(usize::MAX);
        records.sort_by_key(|r| (position(r.dim), r.trial));
        if records.len() != dims.len() * trials || records.iter().any(|r| position(r.dim) == usize::MAX) {
            return Err(invalid("sweep records do not match the requested grid"));
        }
        let stats = dims
            .iter()
            .map(|&d| FidelityStats::from_records(d, &records))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basis,
            dims: dims.to_vec(),
            noise,
            trials,
            stats,
            records,
        })
    }
}

pub fn validate_dims(dims: &[usize], ambient: usize) -> Result<()> {
    if dims.is_empty() {
        return Err(invalid("dimension list is empty"));
    }
    for (i, &d) in dims.iter().enumerate() {
        if d == 0 || d > ambient {
            return Err(invalid(format!("reconstruction dimension {d} outside 1..={ambient}")));
        }
        if dims[..i].contains(&d) {
            return Err(invalid(format!("dimension {d} listed twice")));
        }
    }
    Ok(())
}

/// Fidelity versus reconstruction dimension, sequentially.
pub fn dimension_sweep(exp: &Experiment, basis: BasisKind, dims: &[usize], trials: usize) -> Result<SweepResult> {
    validate_dims(dims, exp.povm.dim())?;
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let mut records = Vec::with_capacity(dims.len() * trials);
    for trial in 0..trials {
        let data = exp.dataset(trial)?;
        for &d in dims {
            records.push(exp.cell(&data, basis, d, trial)?);
        }
    }
    SweepResult::aggregate(basis, dims, exp.noise, trials, records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub basis: BasisKind,
    pub dim: usize,
    pub noise: NoiseModel,
    /// Sorted by trial.
    pub records: Vec<TrialRecord>,
    /// Fidelity spread; `stats.std` is the instability metric.
    pub stats: FidelityStats,
    /// Per-trial Wigner functions, sorted by trial.
    pub wigner: Vec<WignerGrid>,
    pub target_wigner: WignerGrid,
    /// Pointwise mean over trials.
    pub mean_wigner: WignerGrid,
    /// Pointwise sample standard deviation over trials.
    pub spread_wigner: WignerGrid,
}

impl StabilityResult {
    pub fn aggregate(
        exp: &Experiment,
        basis: BasisKind,
        dim: usize,
        grid: &PhaseSpaceGrid,
        mut cells: Vec<(TrialRecord, WignerGrid)>,
    ) -> Result<Self> {
        if cells.len() < 2 {
            return Err(invalid("a stability study needs at least two trials"));
        }
        cells.sort_by_key(|(r, _)| r.trial);
        let (records, wigner): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
        let stats = FidelityStats::from_records(dim, &records)?;
        let n = wigner.len() as f64;
        let points = wigner[0].values.len();
        let mut mean = vec![0.0; points];
        for w in &wigner {
            for (m, v) in mean.iter_mut().zip(&w.values) {
                *m += v / n;
            }
        }
        let mut spread = vec![0.0; points];
        for w in &wigner {
            for ((s, v), m) in spread.iter_mut().zip(&w.values).zip(&mean) {
                *s += (v - m).powi(2) / (n - 1.0);
            }
        }
        spread.iter_mut().for_each(|s| *s = s.sqrt());
        let frame = |values| WignerGrid {
            x: grid.x().to_vec(),
            p: grid.p().to_vec(),
            values,
        };
        Ok(Self {
            basis,
            dim,
            noise: exp.noise,
            records,
            stats,
            target_wigner: fock::wigner(&exp.rho_true, grid)?,
            mean_wigner: frame(mean),
            spread_wigner: frame(spread),
            wigner,
        })
    }
}

/// Repeated reconstructions at one dimension with independent noise.
pub fn stability_study(exp: &Experiment, basis: BasisKind, d: usize, trials: usize, grid: &PhaseSpaceGrid) -> Result<StabilityResult> {
    if trials < 2 {
        return Err(invalid("a stability study needs at least two trials"));
    }
    exp.basis(basis, d)?;
    let cells = (0..trials)
        .map(|t| exp.stability_cell(&exp.dataset(t)?, basis, d, t, grid))
        .collect::<Result<Vec<_>>>()?;
    StabilityResult::aggregate(exp, basis, d, grid, cells)
}
