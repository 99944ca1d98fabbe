//! JSON and CSV artifact formats.
//!
//! Complex numbers are `[re, im]`, matrices are row-major lists of rows. CSV
//! files open with a `# config: {...}` comment line holding the resolved
//! configuration; JSON documents carry it under `"config"`.

use std::path::{Path, PathBuf};

use gramtomo_core::maxlik::{Dataset, ReconstructionResult, StopReason};
use gramtomo_core::povm::{self, Effect, EffectMeta, GramAnalysis, PovmSet, GRAM_HERMITIAN_TOLERANCE};
use gramtomo_core::simulate::{BasisKind, FidelityStats, NoiseKind, NoiseModel, StabilityResult, SweepResult, TrialRecord};
use gramtomo_core::{linalg, CMatrix, StateVector, WignerGrid, C64};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub type Complex = [f64; 2];

/// A named output file, held in memory until every computation has finished.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Writes every artifact into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

fn complex(z: C64) -> Complex {
    [z.re, z.im]
}

fn matrix(m: &CMatrix) -> Vec<Vec<Complex>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| complex(m[(i, j)])).collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<Complex>], dim: usize, what: &str) -> CliResult<CMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(CliError::validation(format!("{what} must be {dim}×{dim}")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

fn vector(v: &[C64]) -> Vec<Complex> {
    v.iter().map(|&z| complex(z)).collect()
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    format: &'static str,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    payload: T,
}

/// Pretty JSON document `{format, config, ...payload}`.
pub fn json_artifact<T: Serialize>(name: &str, format: &'static str, config: &ExperimentConfig, payload: T) -> Artifact {
    let doc = Document { format, config, payload };
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("artifact payloads serialize");
    bytes.push(b'\n');
    Artifact {
        name: name.to_string(),
        bytes,
    }
}

/// Shortest round-trip decimal form.
pub fn number(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// CSV artifact with the config comment line and a header row.
pub fn csv_artifact(name: &str, config: &ExperimentConfig, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Artifact {
    let mut bytes = config_comment(config);
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(header).expect("in-memory write");
        for row in rows {
            w.write_record(&row).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    Artifact {
        name: name.to_string(),
        bytes,
    }
}

fn config_comment(config: &ExperimentConfig) -> Vec<u8> {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("# config: {json}\n").into_bytes()
}

/// `index,value` rows, one-based.
pub fn spectrum_csv(name: &str, config: &ExperimentConfig, values: &[f64]) -> Artifact {
    csv_artifact(
        name,
        config,
        &["index", "value"],
        values.iter().enumerate().map(|(k, v)| vec![(k + 1).to_string(), number(*v)]),
    )
}

/// Dense grid: a header row `x\p,p_0,…,p_m`, then one row per `x` led by
/// its coordinate.
pub fn wigner_csv(name: &str, config: &ExperimentConfig, grid: &WignerGrid) -> Artifact {
    let mut header = vec![r"x\p".to_string()];
    header.extend(grid.p.iter().map(|&p| number(p)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = grid.x.iter().enumerate().map(|(ix, &x)| {
        let mut row = vec![number(x)];
        row.extend((0..grid.p.len()).map(|ip| number(grid.get(ix, ip))));
        row
    });
    csv_artifact(name, config, &header_refs, rows)
}

// ---------------------------------------------------------------- PovmSet

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EffectWire {
    phase_index: usize,
    bin_index: usize,
    phase: f64,
    bin_center: f64,
    bin_width: f64,
    vector: Vec<Complex>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmWire {
    /// Resolved config of the run that wrote the file; ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
    dim: usize,
    effects: Vec<EffectWire>,
    /// `Σ_i |y_i⟩⟨y_i|`; checked on load when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gram_operator: Option<Vec<Vec<Complex>>>,
}

fn povm_wire(povm: &PovmSet) -> PovmWire {
    PovmWire {
        config: None,
        dim: povm.dim(),
        effects: povm
            .effects()
            .iter()
            .map(|e| EffectWire {
                phase_index: e.meta.phase_index,
                bin_index: e.meta.bin_index,
                phase: e.meta.phase,
                bin_center: e.meta.bin_center,
                bin_width: e.meta.bin_width,
                vector: vector(e.vector.amplitudes()),
            })
            .collect(),
        gram_operator: Some(matrix(&povm::gram_operator(povm))),
    }
}

/// PovmSet JSON, loadable by [`povm_from_json`].
pub fn povm_to_json(povm: &PovmSet, config: Option<&ExperimentConfig>) -> String {
    let mut wire = povm_wire(povm);
    wire.config = config.map(|c| serde_json::to_value(c).expect("config serializes"));
    serde_json::to_string_pretty(&wire).expect("povm serializes") + "\n"
}

/// Parses a PovmSet document. A stored `gram_operator` must be Hermitian and
/// agree with the effects.
pub fn povm_from_json(text: &str) -> CliResult<PovmSet> {
    let wire: PovmWire = serde_json::from_str(text).map_err(|e| CliError::validation(format!("povm file: {e}")))?;
    let effects = wire
        .effects
        .into_iter()
        .map(|e| {
            let amplitudes = e.vector.iter().map(|z| C64::new(z[0], z[1])).collect();
            Ok(Effect {
                vector: StateVector::new(amplitudes)?,
                meta: EffectMeta {
                    phase_index: e.phase_index,
                    bin_index: e.bin_index,
                    phase: e.phase,
                    bin_center: e.bin_center,
                    bin_width: e.bin_width,
                },
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let povm = PovmSet::new(wire.dim, effects)?;
    for (i, a) in povm.effects().iter().enumerate() {
        if povm.effects()[..i]
            .iter()
            .any(|b| (b.meta.phase_index, b.meta.bin_index) == (a.meta.phase_index, a.meta.bin_index))
        {
            return Err(CliError::validation(format!(
                "povm file: outcome (phase {}, bin {}) listed twice",
                a.meta.phase_index, a.meta.bin_index
            )));
        }
    }
    if let Some(rows) = wire.gram_operator {
        let stored = matrix_from_rows(&rows, povm.dim(), "gram_operator")?;
        let scale = linalg::max_abs(&stored).max(1.0);
        let asymmetry = linalg::max_abs(&(&stored - stored.adjoint()));
        if asymmetry > GRAM_HERMITIAN_TOLERANCE * scale {
            return Err(CliError::validation(format!(
                "povm file: gram_operator is not Hermitian (deviation {asymmetry:e})"
            )));
        }
        let mismatch = linalg::max_abs(&(&stored - povm::gram_operator(&povm)));
        if mismatch > GRAM_HERMITIAN_TOLERANCE * scale {
            return Err(CliError::validation(format!(
                "povm file: gram_operator disagrees with the effects (deviation {mismatch:e})"
            )));
        }
    }
    Ok(povm)
}

// ------------------------------------------------------------ GramAnalysis

#[derive(Serialize)]
pub struct OperatorSpectrum {
    pub eigenvalues: Vec<f64>,
    pub threshold: f64,
    pub nonzero: usize,
    pub operator_dim: usize,
}

#[derive(Serialize)]
pub struct GramAnalysisWire {
    dim: usize,
    outcomes: usize,
    threshold: f64,
    rank: usize,
    drop_ratio: f64,
    effective_rank: usize,
    eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the `k`-th Gram mode in the Fock basis.
    eigenvectors: Vec<Vec<Complex>>,
    operator: Vec<Vec<Complex>>,
    operator_space: OperatorSpectrum,
}

impl GramAnalysisWire {
    pub fn new(analysis: &GramAnalysis, outcomes: usize, drop_ratio: f64, operator_space: OperatorSpectrum) -> Self {
        let dim = analysis.dim();
        Self {
            dim,
            outcomes,
            threshold: analysis.threshold,
            rank: analysis.rank,
            drop_ratio,
            effective_rank: povm::effective_rank(analysis, drop_ratio),
            eigenvalues: analysis.eigenvalues.clone(),
            eigenvectors: (0..dim)
                .map(|k| vector(analysis.eigenvector(k).amplitudes()))
                .collect(),
            operator: matrix(&analysis.operator),
            operator_space,
        }
    }
}

// ---------------------------------------------------- ReconstructionResult

#[derive(Serialize)]
pub struct WignerWire<'a> {
    x: &'a [f64],
    p: &'a [f64],
    /// `values[ix][ip]`.
    values: Vec<&'a [f64]>,
}

pub fn wigner_wire(grid: &WignerGrid) -> WignerWire<'_> {
    WignerWire {
        x: &grid.x,
        p: &grid.p,
        values: grid.values.chunks(grid.p.len()).collect(),
    }
}

pub fn stop_reason(reason: StopReason) -> &'static str {
    match reason {
        StopReason::Converged => "converged",
        StopReason::MaxIterations => "max_iterations",
        StopReason::Stalled => "stalled",
    }
}

pub fn basis_name(kind: BasisKind) -> &'static str {
    match kind {
        BasisKind::Gram => "gram",
        BasisKind::Fock => "fock",
    }
}

#[derive(Serialize)]
pub struct ReconstructionWire<'a> {
    basis: &'static str,
    dim: usize,
    counts_source: String,
    fidelity: f64,
    rho: Vec<Vec<Complex>>,
    rho_eigenvalues: Vec<f64>,
    iterations: usize,
    converged: bool,
    stop_reason: &'static str,
    born_residual: f64,
    extremal_residual: f64,
    floor_activations: usize,
    working_dim: usize,
    support_dim: usize,
    dilution_halvings: usize,
    log_likelihood: &'a [f64],
    wigner: WignerWire<'a>,
}

impl<'a> ReconstructionWire<'a> {
    pub fn new(
        basis: BasisKind,
        dim: usize,
        counts_source: String,
        fidelity: f64,
        result: &'a ReconstructionResult,
        wigner: &'a WignerGrid,
    ) -> Self {
        Self {
            basis: basis_name(basis),
            dim,
            counts_source,
            fidelity,
            rho: matrix(result.rho.matrix()),
            rho_eigenvalues: result.rho.eigenvalues(),
            iterations: result.iterations,
            converged: result.converged,
            stop_reason: stop_reason(result.stop_reason),
            born_residual: result.born_residual,
            extremal_residual: result.extremal_residual,
            floor_activations: result.floor_activations,
            working_dim: result.working_dim,
            support_dim: result.support_dim,
            dilution_halvings: result.dilution_halvings,
            log_likelihood: &result.log_likelihood,
            wigner: wigner_wire(wigner),
        }
    }
}

// ------------------------------------------------ SweepResult / stability

#[derive(Serialize)]
pub struct NoiseWire {
    kind: &'static str,
    exposure: f64,
    seed: u64,
}

fn noise_wire(noise: &NoiseModel) -> NoiseWire {
    NoiseWire {
        kind: match noise.kind {
            NoiseKind::Exact => "exact",
            NoiseKind::Multinomial => "multinomial",
            NoiseKind::Poisson => "poisson",
        },
        exposure: noise.exposure,
        seed: noise.seed,
    }
}

#[derive(Serialize)]
pub struct StatsWire {
    dim: usize,
    mean: f64,
    min: f64,
    max: f64,
    std: f64,
    converged_trials: usize,
    trials: usize,
}

fn stats_wire(s: &FidelityStats) -> StatsWire {
    StatsWire {
        dim: s.dim,
        mean: s.mean,
        min: s.min,
        max: s.max,
        std: s.std,
        converged_trials: s.converged_trials,
        trials: s.trials,
    }
}

#[derive(Serialize)]
pub struct RecordWire {
    dim: usize,
    trial: usize,
    seed: u64,
    fidelity: f64,
    converged: bool,
    stop_reason: &'static str,
    iterations: usize,
    born_residual: f64,
    extremal_residual: f64,
    floor_activations: usize,
}

fn record_wire(r: &TrialRecord) -> RecordWire {
    RecordWire {
        dim: r.dim,
        trial: r.trial,
        seed: r.seed,
        fidelity: r.fidelity,
        converged: r.converged,
        stop_reason: stop_reason(r.stop_reason),
        iterations: r.iterations,
        born_residual: r.born_residual,
        extremal_residual: r.extremal_residual,
        floor_activations: r.floor_activations,
    }
}

#[derive(Serialize)]
pub struct SweepWire {
    basis: &'static str,
    dims: Vec<usize>,
    trials: usize,
    noise: NoiseWire,
    stats: Vec<StatsWire>,
    records: Vec<RecordWire>,
}

pub fn sweep_wire(s: &SweepResult) -> SweepWire {
    SweepWire {
        basis: basis_name(s.basis),
        dims: s.dims.clone(),
        trials: s.trials,
        noise: noise_wire(&s.noise),
        stats: s.stats.iter().map(stats_wire).collect(),
        records: s.records.iter().map(record_wire).collect(),
    }
}

pub const RECORD_HEADER: [&str; 11] = [
    "basis",
    "dim",
    "trial",
    "seed",
    "fidelity",
    "converged",
    "stop_reason",
    "iterations",
    "born_residual",
    "extremal_residual",
    "floor_activations",
];

pub fn record_row(basis: BasisKind, r: &TrialRecord) -> Vec<String> {
    vec![
        basis_name(basis).to_string(),
        r.dim.to_string(),
        r.trial.to_string(),
        r.seed.to_string(),
        number(r.fidelity),
        r.converged.to_string(),
        stop_reason(r.stop_reason).to_string(),
        r.iterations.to_string(),
        number(r.born_residual),
        number(r.extremal_residual),
        r.floor_activations.to_string(),
    ]
}

pub const STATS_HEADER: [&str; 8] = ["basis", "dim", "mean", "min", "max", "std", "converged_trials", "trials"];

pub fn stats_row(basis: BasisKind, s: &FidelityStats) -> Vec<String> {
    vec![
        basis_name(basis).to_string(),
        s.dim.to_string(),
        number(s.mean),
        number(s.min),
        number(s.max),
        number(s.std),
        s.converged_trials.to_string(),
        s.trials.to_string(),
    ]
}

#[derive(Serialize)]
pub struct StabilityWire<'a> {
    basis: &'static str,
    dim: usize,
    noise: NoiseWire,
    stats: StatsWire,
    records: Vec<RecordWire>,
    target_wigner: WignerWire<'a>,
    mean_wigner: WignerWire<'a>,
    spread_wigner: WignerWire<'a>,
    /// Per-trial grids, in trial order.
    trial_wigner: Vec<WignerWire<'a>>,
}

pub fn stability_wire(s: &StabilityResult) -> StabilityWire<'_> {
    StabilityWire {
        basis: basis_name(s.basis),
        dim: s.dim,
        noise: noise_wire(&s.noise),
        stats: stats_wire(&s.stats),
        records: s.records.iter().map(record_wire).collect(),
        target_wigner: wigner_wire(&s.target_wigner),
        mean_wigner: wigner_wire(&s.mean_wigner),
        spread_wigner: wigner_wire(&s.spread_wigner),
        trial_wigner: s.wigner.iter().map(wigner_wire).collect(),
    }
}

// ------------------------------------------------------------- count file

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountRow {
    phase_index: usize,
    bin_index: usize,
    count: f64,
}

/// Reads `phase_index,bin_index,count` rows (in any order) into the outcome
/// order of `povm`.
pub fn read_count_file(path: &Path, povm: &PovmSet) -> CliResult<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_counts(&text, povm).map_err(|e| match e {
        CliError::Validation(msg) => CliError::validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_counts(text: &str, povm: &PovmSet) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = reader
        .deserialize::<CountRow>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::validation(format!("count file: {e}")))?;
    if rows.len() != povm.len() {
        return Err(CliError::validation(format!(
            "count file has {} rows but the measurement has {} outcomes",
            rows.len(),
            povm.len()
        )));
    }
    let mut counts = vec![f64::NAN; povm.len()];
    for row in rows {
        let i = povm.position(row.phase_index, row.bin_index).ok_or_else(|| {
            CliError::validation(format!(
                "count file: no outcome with phase_index {} and bin_index {}",
                row.phase_index, row.bin_index
            ))
        })?;
        if !counts[i].is_nan() {
            return Err(CliError::validation(format!(
                "count file: phase_index {} bin_index {} listed twice",
                row.phase_index, row.bin_index
            )));
        }
        counts[i] = row.count;
    }
    Ok(Dataset::from_counts(counts)?)
}

pub fn counts_csv(name: &str, config: &ExperimentConfig, povm: &PovmSet, data: &Dataset) -> Artifact {
    csv_artifact(
        name,
        config,
        &["phase_index", "bin_index", "count"],
        povm.effects()
            .iter()
            .zip(data.counts())
            .map(|(e, &n)| vec![e.meta.phase_index.to_string(), e.meta.bin_index.to_string(), number(n)]),
    )
}
