//! Experiment configuration: a single JSON file, overridden by flags.
//!
//! Unknown keys are rejected at every level. Missing keys take the defaults
//! below, which reproduce the six-phase homodyne experiment on an even cat
//! with `α = 2`. After [`ExperimentConfig::resolve`] every optional field is
//! materialized, and that resolved form is what artifacts embed.

use std::path::{Path, PathBuf};

use gramtomo_core::fock::{self, Parity};
use gramtomo_core::maxlik::ReconstructionConfig;
use gramtomo_core::povm::{self, HomodyneConfig, PovmSet};
use gramtomo_core::simulate::{self, BasisKind, Experiment, NoiseKind, NoiseModel};
use gramtomo_core::{PhaseSpaceGrid, StateVector, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable naming the output directory when neither the flag
/// nor the config file sets one.
pub const OUT_DIR_ENV: &str = "GRAMTOMO_OUT";
pub const DEFAULT_OUT_DIR: &str = "gramtomo-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    /// Fock-space dimension (photon numbers `0..cutoff`).
    pub cutoff: usize,
    pub measurement: MeasurementSpec,
    pub noise: NoiseSpec,
    pub solver: SolverSpec,
    pub analysis: AnalysisSpec,
    pub reconstruct: ReconstructSpec,
    pub sweep: SweepSpec,
    pub stability: StabilitySpec,
    pub wigner: WignerSpec,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: TargetSpec::Cat {
                alpha: [2.0, 0.0],
                parity: ParitySpec::Even,
            },
            cutoff: 15,
            measurement: MeasurementSpec::default(),
            noise: NoiseSpec::default(),
            solver: SolverSpec::default(),
            analysis: AnalysisSpec::default(),
            reconstruct: ReconstructSpec::default(),
            sweep: SweepSpec::default(),
            stability: StabilitySpec::default(),
            wigner: WignerSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParitySpec {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Cat { alpha: [f64; 2], parity: ParitySpec },
    Coherent { alpha: [f64; 2] },
    Fock { n: usize },
}

/// Phase settings: a count of uniform phases `jπ/m`, or explicit angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSpec {
    Uniform(usize),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementSpec {
    Homodyne { phases: PhaseSpec, bins: usize, range: [f64; 2] },
    /// Complete projective measurement onto `|0⟩ … |cutoff−1⟩`.
    FockProjectors,
    /// A PovmSet JSON file.
    File { path: PathBuf },
}

impl Default for MeasurementSpec {
    fn default() -> Self {
        MeasurementSpec::Homodyne {
            phases: PhaseSpec::Uniform(6),
            bins: 51,
            range: [-5.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindSpec {
    Exact,
    Multinomial,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKindSpec,
    pub exposure: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKindSpec::Poisson,
            exposure: simulate::DEFAULT_EXPOSURE,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub max_iterations: usize,
    pub likelihood_tolerance: f64,
    pub born_tolerance: f64,
    pub probability_floor: f64,
    pub dilution: f64,
    pub min_dilution: f64,
    pub rank_threshold: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = ReconstructionConfig::default();
        Self {
            max_iterations: c.max_iterations,
            likelihood_tolerance: c.likelihood_tolerance,
            born_tolerance: c.born_tolerance,
            probability_floor: c.probability_floor,
            dilution: c.dilution,
            min_dilution: c.min_dilution,
            rank_threshold: c.rank_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Relative eigenvalue cutoff for the reliable bandwidth.
    pub drop_ratio: f64,
    /// Relative cutoff for the operator-space support.
    pub operator_threshold: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            drop_ratio: povm::DEFAULT_DROP_RATIO,
            operator_threshold: gramtomo_core::frames::DEFAULT_OPERATOR_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BasisSpec {
    Gram,
    Fock,
}

impl BasisSpec {
    pub fn kind(self) -> BasisKind {
        match self {
            BasisSpec::Gram => BasisKind::Gram,
            BasisSpec::Fock => BasisKind::Fock,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisSpec::Gram => "gram",
            BasisSpec::Fock => "fock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSpec {
    pub basis: BasisSpec,
    /// Subspace dimension; the full cutoff when absent.
    pub dim: Option<usize>,
    /// CSV count file (`phase_index,bin_index,count`); simulated when absent.
    pub counts: Option<PathBuf>,
    /// Trial stream used for simulated counts.
    pub trial: usize,
}

impl Default for ReconstructSpec {
    fn default() -> Self {
        Self {
            basis: BasisSpec::Gram,
            dim: None,
            counts: None,
            trial: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub bases: Vec<BasisSpec>,
    /// Subspace dimensions; `1..=cutoff` when absent.
    pub dims: Option<Vec<usize>>,
    pub trials: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            bases: vec![BasisSpec::Gram, BasisSpec::Fock],
            dims: None,
            trials: simulate::DEFAULT_TRIALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySpec {
    pub basis: BasisSpec,
    pub dim: usize,
    pub trials: usize,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            basis: BasisSpec::Gram,
            dim: 3,
            trials: simulate::DEFAULT_TRIALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerSpec {
    pub x_range: [f64; 2],
    pub p_range: [f64; 2],
    pub x_points: usize,
    pub p_points: usize,
}

impl Default for WignerSpec {
    fn default() -> Self {
        Self {
            x_range: [-5.0, 5.0],
            p_range: [-5.0, 5.0],
            x_points: 81,
            p_points: 81,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub trials: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub basis: Option<BasisSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies flag overrides and the environment default, materializes every
    /// optional field and validates the result.
    ///
    /// `single_dim` marks commands that reconstruct at one dimension; a
    /// `--dims` list with more than one entry is rejected for them.
    pub fn resolve(mut self, flags: &Overrides, env_out: Option<PathBuf>, single_dim: bool) -> CliResult<Self> {
        if let Some(seed) = flags.seed {
            self.noise.seed = seed;
        }
        if let Some(out) = &flags.out {
            self.output.dir = Some(out.clone());
        }
        if let Some(format) = flags.format {
            self.output.formats = vec![format];
        }
        if let Some(trials) = flags.trials {
            self.sweep.trials = trials;
            self.stability.trials = trials;
        }
        if let Some(basis) = flags.basis {
            self.sweep.bases = vec![basis];
            self.reconstruct.basis = basis;
            self.stability.basis = basis;
        }
        if let Some(dims) = &flags.dims {
            if single_dim && dims.len() != 1 {
                return Err(CliError::validation(format!(
                    "this command takes exactly one dimension, --dims gave {}",
                    dims.len()
                )));
            }
            if let [d] = dims[..] {
                self.reconstruct.dim = Some(d);
                self.stability.dim = d;
            }
            self.sweep.dims = Some(dims.clone());
        }
        if self.output.dir.is_none() {
            self.output.dir = Some(env_out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)));
        }
        self.reconstruct.dim.get_or_insert(self.cutoff);
        self.sweep.dims.get_or_insert_with(|| (1..=self.cutoff).collect());
        self.output.formats.sort();
        self.output.formats.dedup();
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> CliResult<()> {
        if self.cutoff == 0 {
            return Err(CliError::validation("cutoff must be at least 1"));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::validation("at least one output format is required"));
        }
        if self.sweep.bases.is_empty() {
            return Err(CliError::validation("sweep needs at least one basis"));
        }
        if self.sweep.trials == 0 {
            return Err(CliError::validation("sweep needs at least one trial"));
        }
        if self.stability.trials < 2 {
            return Err(CliError::validation("stability needs at least two trials"));
        }
        self.solver_config().validate()?;
        self.noise_model()?;
        self.wigner_grid()?;
        let dim = self.cutoff;
        if let Some(d) = self.reconstruct.dim {
            simulate::validate_dims(&[d], dim)?;
        }
        if let Some(dims) = &self.sweep.dims {
            simulate::validate_dims(dims, dim)?;
        }
        simulate::validate_dims(&[self.stability.dim], dim)?;
        for (name, v) in [
            ("analysis.drop_ratio", self.analysis.drop_ratio),
            ("analysis.operator_threshold", self.analysis.operator_threshold),
        ] {
            if !(v.is_finite() && v > 0.0 && v < 1.0) {
                return Err(CliError::validation(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if let MeasurementSpec::Homodyne { .. } = self.measurement {
            self.homodyne_config()?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        self.output.dir.as_deref().unwrap_or(Path::new(DEFAULT_OUT_DIR))
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    pub fn target_state(&self) -> CliResult<StateVector> {
        let dim = self.cutoff;
        Ok(match self.target {
            TargetSpec::Cat { alpha, parity } => {
                let parity = match parity {
                    ParitySpec::Even => Parity::Even,
                    ParitySpec::Odd => Parity::Odd,
                };
                fock::cat_state(C64::new(alpha[0], alpha[1]), parity, dim)?
            }
            TargetSpec::Coherent { alpha } => fock::coherent_state(C64::new(alpha[0], alpha[1]), dim)?,
            TargetSpec::Fock { n } => StateVector::fock(n, dim)?,
        })
    }

    /// Homodyne settings; `None` for other measurement kinds.
    pub fn homodyne_config(&self) -> CliResult<Option<HomodyneConfig>> {
        let MeasurementSpec::Homodyne { phases, bins, range } = &self.measurement else {
            return Ok(None);
        };
        let range = (range[0], range[1]);
        let config = match phases {
            PhaseSpec::Uniform(m) => HomodyneConfig::uniform(*m, *bins, range)?,
            PhaseSpec::Explicit(values) => HomodyneConfig::with_phases(values.clone(), *bins, range)?,
        };
        Ok(Some(config))
    }

    pub fn measurement(&self) -> CliResult<PovmSet> {
        let povm = match &self.measurement {
            MeasurementSpec::Homodyne { .. } => {
                let config = self.homodyne_config()?.expect("homodyne measurement");
                povm::build_homodyne_povm(&config, self.cutoff)?
            }
            MeasurementSpec::FockProjectors => PovmSet::fock_projectors(self.cutoff)?,
            MeasurementSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                crate::formats::povm_from_json(&text)?
            }
        };
        if povm.dim() != self.cutoff {
            return Err(CliError::validation(format!(
                "measurement acts on dimension {}, cutoff is {}",
                povm.dim(),
                self.cutoff
            )));
        }
        Ok(povm)
    }

    pub fn noise_model(&self) -> CliResult<NoiseModel> {
        let kind = match self.noise.kind {
            NoiseKindSpec::Exact => NoiseKind::Exact,
            NoiseKindSpec::Multinomial => NoiseKind::Multinomial,
            NoiseKindSpec::Poisson => NoiseKind::Poisson,
        };
        Ok(NoiseModel::new(kind, self.noise.exposure, self.noise.seed)?)
    }

    pub fn solver_config(&self) -> ReconstructionConfig {
        let s = &self.solver;
        ReconstructionConfig {
            subspace: None,
            dilution: s.dilution,
            min_dilution: s.min_dilution,
            probability_floor: s.probability_floor,
            max_iterations: s.max_iterations,
            likelihood_tolerance: s.likelihood_tolerance,
            born_tolerance: s.born_tolerance,
            rank_threshold: s.rank_threshold,
        }
    }

    pub fn wigner_grid(&self) -> CliResult<PhaseSpaceGrid> {
        let w = &self.wigner;
        Ok(PhaseSpaceGrid::new(
            (w.x_range[0], w.x_range[1]),
            (w.p_range[0], w.p_range[1]),
            w.x_points,
            w.p_points,
        )?)
    }

    pub fn experiment(&self) -> CliResult<Experiment> {
        Ok(Experiment::new(
            self.target_state()?,
            self.measurement()?,
            self.noise_model()?,
            self.solver_config(),
        )?)
    }
}
