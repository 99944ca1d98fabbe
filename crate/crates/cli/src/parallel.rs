//! Rayon scheduling over the per-cell functions of the simulation harness.
//!
//! Each cell draws from its own trial stream and results are re-sorted by
//! the core aggregators, so output is bit-identical to the sequential path
//! for any thread count.

use gramtomo_core::maxlik::Dataset;
use gramtomo_core::simulate::{self, BasisKind, Experiment, StabilityResult, SweepResult};
use gramtomo_core::{PhaseSpaceGrid, Result};
use rayon::prelude::*;

/// One noisy dataset per trial, shared by every basis and dimension.
pub fn datasets(exp: &Experiment, trials: usize) -> Result<Vec<Dataset>> {
    (0..trials).into_par_iter().map(|t| exp.dataset(t)).collect()
}

/// Dimension sweeps for several bases over the same datasets.
pub fn sweeps(exp: &Experiment, bases: &[BasisKind], dims: &[usize], trials: usize) -> Result<Vec<SweepResult>> {
    simulate::validate_dims(dims, exp.povm.dim())?;
    if trials == 0 {
        return Err(gramtomo_core::Error::InvalidInput("at least one trial is required".into()));
    }
    let data = datasets(exp, trials)?;
    let cells: Vec<(usize, usize, usize)> = (0..bases.len())
        .flat_map(|b| (0..trials).flat_map(move |t| dims.iter().map(move |&d| (b, t, d))))
        .collect();
    let records = cells
        .par_iter()
        .map(|&(b, t, d)| Ok((b, exp.cell(&data[t], bases[b], d, t)?)))
        .collect::<Result<Vec<_>>>()?;
    bases
        .iter()
        .enumerate()
        .map(|(b, &basis)| {
            let own = records.iter().filter(|(k, _)| *k == b).map(|(_, r)| r.clone()).collect();
            SweepResult::aggregate(basis, dims, exp.noise, trials, own)
        })
        .collect()
}

pub fn sweep(exp: &Experiment, basis: BasisKind, dims: &[usize], trials: usize) -> Result<SweepResult> {
    Ok(sweeps(exp, &[basis], dims, trials)?.remove(0))
}

pub fn stability(exp: &Experiment, basis: BasisKind, d: usize, trials: usize, grid: &PhaseSpaceGrid) -> Result<StabilityResult> {
    if trials < 2 {
        return Err(gramtomo_core::Error::InvalidInput("a stability study needs at least two trials".into()));
    }
    exp.basis(basis, d)?;
    let cells = (0..trials)
        .into_par_iter()
        .map(|t| exp.stability_cell(&exp.dataset(t)?, basis, d, t, grid))
        .collect::<Result<Vec<_>>>()?;
    StabilityResult::aggregate(exp, basis, d, grid, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gramtomo_core::fock::{cat_state, Parity};
    use gramtomo_core::maxlik::ReconstructionConfig;
    use gramtomo_core::povm::{build_homodyne_povm, HomodyneConfig};
    use gramtomo_core::simulate::{NoiseKind, NoiseModel};
    use gramtomo_core::C64;

    fn experiment() -> Experiment {
        let povm = build_homodyne_povm(&HomodyneConfig::uniform(3, 11, (-4.0, 4.0)).unwrap(), 4).unwrap();
        let target = cat_state(C64::new(1.0, 0.0), Parity::Even, 4).unwrap();
        let solver = ReconstructionConfig {
            max_iterations: 300,
            ..ReconstructionConfig::default()
        };
        Experiment::new(target, povm, NoiseModel::new(NoiseKind::Poisson, 3000.0, 11).unwrap(), solver).unwrap()
    }

    #[test]
    fn parallel_sweep_matches_sequential_bitwise() {
        let exp = experiment();
        let dims = [3, 1, 4];
        for basis in [BasisKind::Gram, BasisKind::Fock] {
            let seq = simulate::dimension_sweep(&exp, basis, &dims, 3).unwrap();
            let par = sweep(&exp, basis, &dims, 3).unwrap();
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn parallel_stability_matches_sequential_bitwise() {
        let exp = experiment();
        let grid = PhaseSpaceGrid::square((-3.0, 3.0), 7).unwrap();
        let seq = simulate::stability_study(&exp, BasisKind::Gram, 2, 3, &grid).unwrap();
        let par = stability(&exp, BasisKind::Gram, 2, 3, &grid).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let exp = experiment();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sweeps(&exp, &[BasisKind::Gram, BasisKind::Fock], &[2, 4], 4).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
