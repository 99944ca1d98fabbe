//! Subcommand bodies. Each returns its artifacts in memory; nothing is written
//! until the whole command has succeeded.

use gramtomo_core::fock;
use gramtomo_core::frames;
use gramtomo_core::maxlik::expected_probabilities;
use gramtomo_core::povm::{self, PovmSet};
use gramtomo_core::{linalg, CMatrix};

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, CliResult};
use crate::formats::{self, number, Artifact, GramAnalysisWire, OperatorSpectrum, ReconstructionWire};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GramSpectrum,
    Reconstruct,
    Sweep,
    Stability,
    FramesCheck,
}

impl Command {
    /// Commands that reconstruct at a single dimension.
    pub fn single_dim(self) -> bool {
        matches!(self, Command::Reconstruct | Command::Stability)
    }
}

/// Artifacts of a finished command plus any failed consistency checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<String>,
}

impl Report {
    fn ok(artifacts: Vec<Artifact>) -> Self {
        Self {
            artifacts,
            failures: Vec::new(),
        }
    }
}

pub fn execute(command: Command, config: &ExperimentConfig) -> CliResult<Report> {
    match command {
        Command::GramSpectrum => gram_spectrum(config).map(Report::ok),
        Command::Reconstruct => reconstruct(config).map(Report::ok),
        Command::Sweep => sweep(config).map(Report::ok),
        Command::Stability => stability(config).map(Report::ok),
        Command::FramesCheck => frames_check(config),
    }
}

fn operator_spectrum(povm: &PovmSet, relative_threshold: f64) -> OperatorSpectrum {
    let eigenvalues = povm::symmetric_spectrum(&povm::gram_matrix_operator_space(povm));
    let threshold = relative_threshold * eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    OperatorSpectrum {
        nonzero: eigenvalues.iter().filter(|&&m| m > threshold).count(),
        threshold,
        operator_dim: povm.dim() * povm.dim(),
        eigenvalues,
    }
}

pub fn gram_spectrum(config: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let povm = config.measurement()?;
    let analysis = povm::gram_spectrum(&povm::gram_operator(&povm), config.solver.rank_threshold)?;
    let q = operator_spectrum(&povm, config.analysis.operator_threshold);
    let effective = povm::effective_rank(&analysis, config.analysis.drop_ratio);
    let lam = &analysis.eigenvalues;

    let mut out = Vec::new();
    if config.wants(Format::Csv) {
        out.push(formats::spectrum_csv("gram_spectrum.csv", config, lam));
        out.push(formats::spectrum_csv("q_spectrum.csv", config, &q.eigenvalues));
        let ratio = lam[lam.len() - 1] / lam[0];
        let rows = [
            ("dim", povm.dim().to_string()),
            ("outcomes", povm.len().to_string()),
            ("rank", analysis.rank.to_string()),
            ("rank_threshold", number(analysis.threshold)),
            ("effective_rank", effective.to_string()),
            ("drop_ratio", number(config.analysis.drop_ratio)),
            ("smallest_to_largest", number(ratio)),
            ("operator_rank", q.nonzero.to_string()),
            ("operator_dim", q.operator_dim.to_string()),
        ];
        out.push(formats::csv_artifact(
            "rank_report.csv",
            config,
            &["quantity", "value"],
            rows.into_iter().map(|(k, v)| vec![k.to_string(), v]),
        ));
    }
    if config.wants(Format::Json) {
        let wire = GramAnalysisWire::new(&analysis, povm.len(), config.analysis.drop_ratio, q);
        out.push(formats::json_artifact("gram_analysis.json", "GramAnalysis", config, wire));
        out.push(Artifact {
            name: "povm.json".into(),
            bytes: formats::povm_to_json(&povm, Some(config)).into_bytes(),
        });
    }
    Ok(out)
}

pub fn reconstruct(config: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let exp = config.experiment()?;
    let spec = &config.reconstruct;
    let dim = spec.dim.unwrap_or(config.cutoff);
    let (data, source) = match &spec.counts {
        Some(path) => (formats::read_count_file(path, &exp.povm)?, path.display().to_string()),
        None => (exp.dataset(spec.trial)?, format!("simulated trial {}", spec.trial)),
    };
    let basis = spec.basis.kind();
    let result = exp.reconstruct(&data, basis, dim)?;
    let fidelity = fock::fidelity(&exp.target, &result.rho)?;
    let wigner = fock::wigner(&result.rho, &config.wigner_grid()?)?;

    let mut out = Vec::new();
    if config.wants(Format::Csv) {
        out.push(formats::wigner_csv("wigner.csv", config, &wigner));
        out.push(formats::csv_artifact(
            "likelihood.csv",
            config,
            &["iteration", "log_likelihood"],
            result
                .log_likelihood
                .iter()
                .enumerate()
                .map(|(k, v)| vec![k.to_string(), number(*v)]),
        ));
        let rows = [
            ("fidelity", number(fidelity)),
            ("iterations", result.iterations.to_string()),
            ("converged", result.converged.to_string()),
            ("stop_reason", formats::stop_reason(result.stop_reason).to_string()),
            ("born_residual", number(result.born_residual)),
            ("extremal_residual", number(result.extremal_residual)),
            ("floor_activations", result.floor_activations.to_string()),
            ("working_dim", result.working_dim.to_string()),
            ("support_dim", result.support_dim.to_string()),
            ("dilution_halvings", result.dilution_halvings.to_string()),
            ("min_eigenvalue", number(result.rho.min_eigenvalue())),
        ];
        out.push(formats::csv_artifact(
            "diagnostics.csv",
            config,
            &["quantity", "value"],
            rows.into_iter().map(|(k, v)| vec![k.to_string(), v]),
        ));
        out.push(formats::counts_csv("counts.csv", config, &exp.povm, &data));
    }
    if config.wants(Format::Json) {
        let wire = ReconstructionWire::new(basis, dim, source, fidelity, &result, &wigner);
        out.push(formats::json_artifact("reconstruction.json", "ReconstructionResult", config, wire));
    }
    Ok(out)
}

pub fn sweep(config: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let exp = config.experiment()?;
    let bases: Vec<_> = config.sweep.bases.iter().map(|b| b.kind()).collect();
    let dims = config.sweep.dims.clone().unwrap_or_else(|| (1..=config.cutoff).collect());
    let results = parallel::sweeps(&exp, &bases, &dims, config.sweep.trials)?;

    let mut out = Vec::new();
    if config.wants(Format::Csv) {
        out.push(formats::csv_artifact(
            "sweep.csv",
            config,
            &formats::RECORD_HEADER,
            results
                .iter()
                .flat_map(|s| s.records.iter().map(move |r| formats::record_row(s.basis, r))),
        ));
        out.push(formats::csv_artifact(
            "sweep_summary.csv",
            config,
            &formats::STATS_HEADER,
            results
                .iter()
                .flat_map(|s| s.stats.iter().map(move |st| formats::stats_row(s.basis, st))),
        ));
    }
    if config.wants(Format::Json) {
        #[derive(serde::Serialize)]
        struct Sweeps {
            results: Vec<formats::SweepWire>,
        }
        let payload = Sweeps {
            results: results.iter().map(formats::sweep_wire).collect(),
        };
        out.push(formats::json_artifact("sweep.json", "SweepResult", config, payload));
    }
    Ok(out)
}

pub fn stability(config: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let exp = config.experiment()?;
    let spec = &config.stability;
    let grid = config.wigner_grid()?;
    let result = parallel::stability(&exp, spec.basis.kind(), spec.dim, spec.trials, &grid)?;

    let mut out = Vec::new();
    if config.wants(Format::Csv) {
        out.push(formats::csv_artifact(
            "stability.csv",
            config,
            &formats::RECORD_HEADER,
            result.records.iter().map(|r| formats::record_row(result.basis, r)),
        ));
        out.push(formats::csv_artifact(
            "stability_summary.csv",
            config,
            &formats::STATS_HEADER,
            [formats::stats_row(result.basis, &result.stats)],
        ));
        out.push(formats::wigner_csv("wigner_target.csv", config, &result.target_wigner));
        out.push(formats::wigner_csv("wigner_mean.csv", config, &result.mean_wigner));
        out.push(formats::wigner_csv("wigner_spread.csv", config, &result.spread_wigner));
        for (record, grid) in result.records.iter().zip(&result.wigner) {
            out.push(formats::wigner_csv(&format!("wigner_trial_{}.csv", record.trial), config, grid));
        }
    }
    if config.wants(Format::Json) {
        out.push(formats::json_artifact(
            "stability.json",
            "StabilityResult",
            config,
            formats::stability_wire(&result),
        ));
    }
    Ok(out)
}

/// One identity of the frame-theory suite.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, deviation: f64, tolerance: f64) -> Self {
        Self {
            name,
            deviation,
            tolerance,
            passed: deviation <= tolerance,
        }
    }
}

pub const HADAMARD_TOLERANCE: f64 = 1e-14;
pub const DUAL_FRAME_TOLERANCE: f64 = 1e-9;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-8;
pub const FRAME_MATRIX_TOLERANCE: f64 = 1e-10;
pub const SPECTRUM_TOLERANCE: f64 = 1e-10;
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Operator inside the span of the effects: a unit-trace positive
/// combination `Σ w_i Π_i` with fixed weights.
pub fn span_probe(povm: &PovmSet) -> CMatrix {
    let d = povm.dim();
    let mut a = CMatrix::zeros(d, d);
    for (i, y) in povm.vectors().enumerate() {
        let w = 1.0 + (i % 5) as f64 / 4.0;
        a += linalg::outer(y).scale(w);
    }
    let t = linalg::trace(&a).re;
    a.unscale(t)
}

/// Runs the identity suite on `povm`.
pub fn frame_checks(povm: &PovmSet, rank_threshold: f64, operator_threshold: f64) -> CliResult<Vec<Check>> {
    let d = povm.dim();
    let mut checks = Vec::new();

    let q = povm::gram_matrix_operator_space(povm);
    let q_scale = q.amax().max(1.0);
    checks.push(Check::new(
        "hadamard_identity",
        frames::hadamard_identity_check(povm),
        HADAMARD_TOLERANCE * q_scale,
    ));

    let analysis = povm::gram_spectrum(&povm::gram_operator(povm), rank_threshold)?;
    let big = povm::gram_spectrum(&povm::gram_matrix_state_space(povm), rank_threshold)?;
    let lam_scale = analysis.eigenvalues[0].max(1.0);
    let gap = (0..analysis.rank)
        .map(|k| (analysis.eigenvalues[k] - big.eigenvalues[k]).abs())
        .fold(0.0, f64::max);
    let rank_mismatch = if big.rank == analysis.rank { 0.0 } else { f64::INFINITY };
    checks.push(Check::new(
        "gram_spectra_agree",
        gap.max(rank_mismatch),
        SPECTRUM_TOLERANCE * lam_scale,
    ));

    let dual = frames::dual_frame(povm, &analysis)?;
    let mut resolution = CMatrix::zeros(d, d);
    for (i, y) in povm.vectors().enumerate() {
        let yd = dual.vector(i);
        for j in 0..d {
            for k in 0..d {
                resolution[(j, k)] += y[j] * yd[k].conj();
            }
        }
    }
    checks.push(Check::new(
        "dual_frame_projector",
        linalg::max_abs(&(resolution - analysis.support_projector())),
        DUAL_FRAME_TOLERANCE,
    ));

    let frame = frames::operator_frame(povm, operator_threshold)?;
    let s = &frame.frame_matrix;
    let s_scale = s.amax().max(1.0);
    checks.push(Check::new(
        "frame_operator_self_adjoint",
        (s - s.transpose()).amax(),
        SYMMETRY_TOLERANCE * s_scale,
    ));

    let m = linalg::packed_len(d);
    let mut worst = 0.0f64;
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        let basis = frames::from_hermitian_coordinates(&e, d);
        let direct = frames::hermitian_coordinates(&frames::operator_frame_apply(&basis, povm)?);
        for (r, v) in direct.iter().enumerate() {
            worst = worst.max((s[(r, k)] - v).abs());
        }
    }
    checks.push(Check::new("frame_matrix_matches_action", worst, FRAME_MATRIX_TOLERANCE * s_scale));

    let s_spec = povm::symmetric_spectrum(s);
    let q_spec = povm::symmetric_spectrum(&frame.gram);
    let gap = (0..frame.support_rank)
        .map(|k| (s_spec[k] - q_spec[k]).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("frame_and_q_spectra_agree", gap, SPECTRUM_TOLERANCE * s_scale));

    let probe = span_probe(povm);
    let p = expected_probabilities(&probe, povm)?;
    let inv = frame.invert(&p)?;
    checks.push(Check::new(
        "linear_inversion_round_trip",
        linalg::max_abs(&(inv.rho - probe)),
        ROUND_TRIP_TOLERANCE,
    ));
    Ok(checks)
}

pub fn frames_check(config: &ExperimentConfig) -> CliResult<Report> {
    let povm = config.measurement()?;
    let checks = frame_checks(&povm, config.solver.rank_threshold, config.analysis.operator_threshold)?;
    let failures = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: deviation {:e} exceeds {:e}", c.name, c.deviation, c.tolerance))
        .collect();

    let mut out = Vec::new();
    if config.wants(Format::Csv) {
        out.push(formats::csv_artifact(
            "frames_check.csv",
            config,
            &["check", "deviation", "tolerance", "passed"],
            checks.iter().map(|c| {
                vec![
                    c.name.to_string(),
                    number(c.deviation),
                    number(c.tolerance),
                    c.passed.to_string(),
                ]
            }),
        ));
    }
    if config.wants(Format::Json) {
        #[derive(serde::Serialize)]
        struct FrameReport<'a> {
            passed: bool,
            checks: &'a [Check],
        }
        let payload = FrameReport {
            passed: checks.iter().all(|c| c.passed),
            checks: &checks,
        };
        out.push(formats::json_artifact("frames_check.json", "FramesCheck", config, payload));
    }
    Ok(Report { artifacts: out, failures })
}

/// Folds a report's failures into the numerical-consistency error class.
pub fn failure(report: &Report) -> Option<CliError> {
    (!report.failures.is_empty()).then(|| CliError::Numerical(report.failures.join("; ")))
}
