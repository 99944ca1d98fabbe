//! Truncated Fock-space states, quadrature wavefunctions, Wigner functions and
//! fidelity.
//!
//! Quadratures use `ħ = 1` with `x = (a + a†)/√2`, so the vacuum has
//! `⟨x²⟩ = 1/2` and an amplitude-`α` coherent state is centred at
//! `x = √2 Re α`. Rotated quadrature eigenstates carry the phase convention
//! `⟨x_θ|n⟩ = e^{-inθ} ψ_n(x)`, i.e. `x_θ = x cos θ + p sin θ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};

/// Tolerance on `Σ|c_n|² = 1` for normalized state vectors.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;
/// Hermiticity tolerance for density operators.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Trace tolerance for density operators.
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Largest imaginary residue tolerated in a Wigner sum.
pub const WIGNER_IMAG_TOLERANCE: f64 = 1e-8;

/// Pure state in the truncated Fock basis `|0⟩ … |dim−1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(invalid("state vector needs at least one amplitude"));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("state vector has non-finite amplitudes"));
        }
        Ok(Self { amplitudes })
    }

    /// Fock state `|n⟩` in dimension `dim`.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(invalid(format!("Fock index {n} outside dimension {dim}")));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[n] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateState("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            amplitudes: self.amplitudes.iter().map(|z| z / norm).collect(),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(linalg::inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> CMatrix {
        linalg::outer(&self.amplitudes)
    }
}

/// Hermitian, positive-semidefinite, unit-trace operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, positivity and unit trace. The stored matrix is
    /// the exact Hermitian part of the input.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(invalid("density operator must be a non-empty square matrix"));
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if !(defect <= HERMITIAN_TOLERANCE) {
            return Err(invalid(format!("density operator not Hermitian (defect {defect:e})")));
        }
        let matrix = linalg::hermitian_part(&matrix);
        let tr = linalg::trace(&matrix).re;
        if !((tr - 1.0).abs() <= TRACE_TOLERANCE) {
            return Err(invalid(format!("density operator trace {tr} is not 1")));
        }
        let rho = Self { matrix };
        let min = rho.min_eigenvalue();
        if min < -PSD_TOLERANCE {
            return Err(invalid(format!("density operator not positive (min eigenvalue {min:e})")));
        }
        Ok(rho)
    }

    /// Projector onto the normalized `psi`.
    pub fn pure(psi: &StateVector) -> Result<Self> {
        Ok(Self {
            matrix: psi.normalized()?.projector(),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(Self {
            matrix: CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        })
    }

    /// Wraps a matrix the caller has already made Hermitian, PSD and unit trace.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.matrix).values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// `a ρ₁ + (1 − a) ρ₂` for `a ∈ [0, 1]`.
    pub fn mix(a: f64, first: &Self, second: &Self) -> Result<Self> {
        check_dim(first.dim(), second.dim())?;
        if !(0.0..=1.0).contains(&a) {
            return Err(invalid("mixing weight must lie in [0, 1]"));
        }
        Ok(Self {
            matrix: first.matrix.scale(a) + second.matrix.scale(1.0 - a),
        })
    }
}

/// Amplitudes `e^{−|α|²/2} αⁿ/√(n!)` for `n < dim`, left unnormalized so the
/// truncation loss stays visible. Call [`StateVector::normalized`] to
/// renormalize.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<StateVector> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(invalid("coherent amplitude must be finite"));
    }
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let mut amplitudes = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amplitudes.push(c);
    for n in 1..dim {
        c = c * alpha / (n as f64).sqrt();
        amplitudes.push(c);
    }
    StateVector::new(amplitudes)
}

/// Photon-number parity of a cat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn keeps(self, n: usize) -> bool {
        match self {
            Parity::Even => n % 2 == 0,
            Parity::Odd => n % 2 == 1,
        }
    }
}

/// `N(|α⟩ ± |−α⟩)` normalized within the truncated space. Amplitudes of the
/// excluded parity are exactly zero.
pub fn cat_state(alpha: C64, parity: Parity, dim: usize) -> Result<StateVector> {
    let coherent = coherent_state(alpha, dim)?;
    let amplitudes = coherent
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, &c)| if parity.keeps(n) { c } else { ZERO })
        .collect();
    StateVector::new(amplitudes)?.normalized().map_err(|_| {
        Error::DegenerateState(format!(
            "{parity:?} cat with alpha = {alpha} has no support in dimension {dim}"
        ))
    })
}

/// Normalized Hermite functions `ψ_0(x) … ψ_{count−1}(x)` by the three-term
/// recurrence `ψ_{n+1} = x√(2/(n+1)) ψ_n − √(n/(n+1)) ψ_{n−1}`.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let psi0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if count == 1 {
        return out;
    }
    out.push(core::f64::consts::SQRT_2 * x * psi0);
    for n in 1..count - 1 {
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// `⟨x_θ|n⟩ = e^{−inθ} ψ_n(x)`.
pub fn quadrature_overlap(n: usize, x: f64, theta: f64) -> Result<C64> {
    if !x.is_finite() || !theta.is_finite() {
        return Err(invalid("quadrature value and phase must be finite"));
    }
    let psi = hermite_functions(x, n + 1)[n];
    Ok(C64::from_polar(1.0, -(n as f64) * theta) * psi)
}

/// `⟨x_θ|n⟩` for all `n < dim`.
pub fn quadrature_overlaps(x: f64, theta: f64, dim: usize) -> Result<Vec<C64>> {
    if !x.is_finite() || !theta.is_finite() {
        return Err(invalid("quadrature value and phase must be finite"));
    }
    Ok(hermite_functions(x, dim)
        .into_iter()
        .enumerate()
        .map(|(n, psi)| C64::from_polar(1.0, -(n as f64) * theta) * psi)
        .collect())
}

/// Rectangular sampling of phase space, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    x: Vec<f64>,
    p: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn new(x_range: (f64, f64), p_range: (f64, f64), x_points: usize, p_points: usize) -> Result<Self> {
        Ok(Self {
            x: linspace(x_range, x_points)?,
            p: linspace(p_range, p_points)?,
        })
    }

    /// Same range and resolution on both axes.
    pub fn square(range: (f64, f64), points: usize) -> Result<Self> {
        Self::new(range, range, points, points)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }
}

fn linspace((lo, hi): (f64, f64), points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("grid range ({lo}, {hi}) must be finite and increasing")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect())
}

/// Wigner function sampled on a [`PhaseSpaceGrid`], stored row-major with `x`
/// as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn get(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.p.len() + ip]
    }

    /// Trapezoidal estimate of `∫∫ W dx dp` over the grid.
    pub fn integral(&self) -> f64 {
        let wx = trapezoid_weights(&self.x);
        let wp = trapezoid_weights(&self.p);
        let mut acc = 0.0;
        for (ix, a) in wx.iter().enumerate() {
            for (ip, b) in wp.iter().enumerate() {
                acc += a * b * self.get(ix, ip);
            }
        }
        acc
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (points[i + 1] - points[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Phase-space kernels `W_{|m⟩⟨n|}(x, p)` for `m ≥ n`, evaluated with the
/// Laguerre form
/// `(1/π)(−1)ⁿ √(n!/m!) (√2(x − ip))^{m−n} e^{−(x²+p²)} L_n^{(m−n)}(2(x²+p²))`.
struct WignerKernels {
    dim: usize,
    values: Vec<C64>,
}

impl WignerKernels {
    fn at(dim: usize, x: f64, p: f64) -> Self {
        let r2 = x * x + p * p;
        let t = 2.0 * r2;
        let gauss = (-r2).exp() / PI;
        let z = C64::new(x, -p) * core::f64::consts::SQRT_2;
        let mut values = vec![ZERO; dim * dim];
        // z^k / √(m!/n!) is built incrementally along each diagonal m − n = k
        let mut zk = C64::new(1.0, 0.0);
        for k in 0..dim {
            let a = k as f64;
            let mut lag_prev = 0.0;
            let mut lag = 1.0;
            // ratio = √(n!/m!) with m = n + k
            let mut ratio = 1.0;
            for j in 1..=k {
                ratio /= (j as f64).sqrt();
            }
            for n in 0..dim - k {
                let m = n + k;
                if n > 0 {
                    let nf = (n - 1) as f64;
                    let next = ((2.0 * nf + 1.0 + a - t) * lag - (nf + a) * lag_prev) / (nf + 1.0);
                    lag_prev = lag;
                    lag = next;
                    ratio *= ((n as f64) / (m as f64)).sqrt();
                }
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                values[m * dim + n] = zk * (sign * ratio * gauss * lag);
            }
            zk *= z;
        }
        Self { dim, values }
    }

    /// Kernel for `|m⟩⟨n|` with any ordering of `m`, `n`.
    fn get(&self, m: usize, n: usize) -> C64 {
        if m >= n {
            self.values[m * self.dim + n]
        } else {
            self.values[n * self.dim + m].conj()
        }
    }
}

fn wigner_sum(rho: &CMatrix, x: f64, p: f64) -> Result<f64> {
    let dim = rho.nrows();
    let kernels = WignerKernels::at(dim, x, p);
    let mut acc = ZERO;
    for m in 0..dim {
        for n in 0..dim {
            acc += rho[(m, n)] * kernels.get(m, n);
        }
    }
    if acc.im.abs() > WIGNER_IMAG_TOLERANCE {
        return Err(Error::NumericalConsistency(format!(
            "Wigner sum at ({x}, {p}) has imaginary residue {:e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// `W(x, p)` at a single phase-space point, normalized so `∫∫ W dx dp = 1`.
pub fn wigner_point(rho: &DensityOperator, x: f64, p: f64) -> Result<f64> {
    if !x.is_finite() || !p.is_finite() {
        return Err(invalid("phase-space point must be finite"));
    }
    wigner_sum(rho.matrix(), x, p)
}

/// Wigner function of `rho` on `grid`.
pub fn wigner(rho: &DensityOperator, grid: &PhaseSpaceGrid) -> Result<WignerGrid> {
    let mut values = Vec::with_capacity(grid.x.len() * grid.p.len());
    for &x in &grid.x {
        for &p in &grid.p {
            values.push(wigner_sum(rho.matrix(), x, p)?);
        }
    }
    Ok(WignerGrid {
        x: grid.x.clone(),
        p: grid.p.clone(),
        values,
    })
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]` against rounding. For pure `ρ = |φ⟩⟨φ|` this
/// is `|⟨ψ|φ⟩|²`.
pub fn fidelity(psi: &StateVector, rho: &DensityOperator) -> Result<f64> {
    check_dim(rho.dim(), psi.dim())?;
    if !psi.is_normalized() {
        return Err(invalid("fidelity requires a normalized state vector"));
    }
    Ok(linalg::expectation(rho.matrix(), psi.amplitudes()).clamp(0.0, 1.0))
}
