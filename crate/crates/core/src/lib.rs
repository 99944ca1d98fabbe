//! Maximum-likelihood state tomography for truncated bosonic modes, with the
//! measurement's Gram operator treated as a first-class object.
//!
//! The crate is `no_std` (it needs `alloc`) and purely computational. File
//! formats, configuration and the command-line front end live in the
//! `gramtomo` companion crate.
//!
//! Module map:
//!
//! * [`fock`]: truncated Fock-space states, quadrature wavefunctions, Wigner
//!   functions and fidelity.
//! * [`povm`]: the binned homodyne measurement and both Gram structures
//!   (state-space `G`, operator-space `Q`) with their spectral analysis.
//! * [`maxlik`]: the conditional likelihood, the `R(ρ)` operator, rescaling to
//!   the support of `G` and the diluted fixed-point solver.
//! * [`frames`]: dual frames, the operator frame `S`, linear inversion and the
//!   modal-weighting identities.
//! * [`simulate`]: seeded count generation and the dimension-sweep and
//!   stability studies.
//!
//! Conventions: `ħ = 1`, `x = (a + a†)/√2`, and `⟨x_θ|n⟩ = e^{-inθ} ψ_n(x)`.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod fock;
pub mod frames;
pub mod linalg;
pub mod maxlik;
pub mod povm;
pub mod simulate;

pub use error::{Error, Result};
pub use fock::{DensityOperator, Parity, PhaseSpaceGrid, StateVector, WignerGrid};
pub use linalg::{CMatrix, RMatrix, C64};
pub use maxlik::{Dataset, ReconstructionConfig, ReconstructionResult};
pub use povm::{Effect, EffectMeta, GramAnalysis, HomodyneConfig, PovmSet};
pub use simulate::{BasisKind, NoiseKind, NoiseModel, SweepResult};
