//! Dense density matrices over registers of one to three qubits.
//!
//! Subsystems are addressed by explicit index in tensor order; the protocol
//! code always uses `(A, B, C) = (0, 1, 2)`. All entropies are in bits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Maximum entrywise |ρ − ρ†| accepted for a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Maximum |Tr ρ − 1| accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-12;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; anything lower is an error.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance for orthonormality of measurement bases.
pub const ORTHONORMAL_TOL: f64 = 1e-12;
/// Looser Hermiticity check applied to arbitrary input of the eigensolver.
pub const EIGEN_HERMITIAN_TOL: f64 = 1e-10;

const MAX_SUBSYSTEMS: usize = 3;
// Negative eigenvalues above this are eigensolver roundoff and clamped silently.
const ROUNDOFF_FLOOR: f64 = 1e-13;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn validate_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > MAX_SUBSYSTEMS || dims.iter().any(|&d| d != 2) {
        return Err(Error::UnsupportedRegister { dims: dims.to_vec() });
    }
    Ok(dims.iter().product())
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A Hermitian, unit-trace matrix on a qubit register.
///
/// Construction checks Hermiticity and trace. Positivity is checked on demand
/// with [`DensityMatrix::min_eigenvalue`], because perturbatively evolved
/// states may carry tiny negative eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix, dims: Vec<usize>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let dim = validate_dims(&dims)?;
        if entries.nrows() != dim {
            return Err(Error::DimensionMismatch {
                dim: entries.nrows(),
                dims,
            });
        }
        let deviation = hermitian_deviation(&entries);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = entries.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::TraceNotOne { trace: trace.re });
        }
        Ok(Self { entries, dims })
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn from_pure(amplitudes: &[C64], dims: Vec<usize>) -> Result<Self> {
        let psi = CVector::from_column_slice(amplitudes);
        Self::new(&psi * psi.adjoint(), dims)
    }

    pub fn from_diagonal(diagonal: &[f64], dims: Vec<usize>) -> Result<Self> {
        let d = DVector::from_iterator(diagonal.len(), diagonal.iter().map(|&x| c64(x, 0.0)));
        Self::new(CMatrix::from_diagonal(&d), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let dim = validate_dims(&dims)?;
        Self::new(
            CMatrix::identity(dim, dim) * c64(1.0 / dim as f64, 0.0),
            dims,
        )
    }

    /// Computational basis state `|index⟩⟨index|`.
    pub fn basis_state(index: usize, dims: Vec<usize>) -> Result<Self> {
        let dim = validate_dims(&dims)?;
        let mut m = CMatrix::zeros(dim, dim);
        if index >= dim {
            return Err(Error::DimensionMismatch { dim: index, dims });
        }
        m[(index, index)] = c64(1.0, 0.0);
        Self::new(m, dims)
    }

    /// Wraps a matrix produced by a trace-preserving map of a valid state,
    /// re-symmetrizing away roundoff.
    pub(crate) fn from_map_output(entries: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let sym = (&entries + entries.adjoint()) * c64(0.5, 0.0);
        Self::new(sym, dims)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues_hermitian(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().expect("nonempty matrix"))
    }

    pub fn is_positive(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }

    fn check_subsystem(&self, index: usize) -> Result<()> {
        if index >= self.dims.len() {
            return Err(Error::InvalidSubsystem {
                index,
                count: self.dims.len(),
            });
        }
        Ok(())
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Kronecker product `a ⊗ b` with concatenated subsystem lists.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    let dims: Vec<usize> = a.dims.iter().chain(b.dims.iter()).copied().collect();
    DensityMatrix::new(a.entries.kronecker(&b.entries), dims)
}

/// Bit of subsystem `k` in the basis index `index` (subsystem 0 is most significant).
#[inline]
pub(crate) fn qubit_bit(index: usize, k: usize, n: usize) -> usize {
    (index >> (n - 1 - k)) & 1
}

fn kept_index(index: usize, keep: &[usize], n: usize) -> usize {
    keep.iter()
        .fold(0, |acc, &k| (acc << 1) | qubit_bit(index, k, n))
}

/// Reduced state on the subsystems listed in `keep`, in their original order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_subsystems();
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let before = keep.len();
    keep.dedup();
    if keep.is_empty() || keep.len() != before {
        return Err(Error::InvalidSelection);
    }
    for &k in &keep {
        rho.check_subsystem(k)?;
    }
    let traced: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let out_dim = 1 << keep.len();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    let dim = rho.dim();
    for r in 0..dim {
        for c in 0..dim {
            if traced
                .iter()
                .all(|&k| qubit_bit(r, k, n) == qubit_bit(c, k, n))
            {
                out[(kept_index(r, &keep, n), kept_index(c, &keep, n))] += rho.entries[(r, c)];
            }
        }
    }
    DensityMatrix::from_map_output(out, vec![2; keep.len()])
}

/// Real eigenvalues of a Hermitian matrix, descending.
pub fn eigenvalues_hermitian(m: &CMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let deviation = hermitian_deviation(m);
    if deviation > EIGEN_HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let sym = (m + m.adjoint()) * c64(0.5, 0.0);
    let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// `-x log2 x`, with `0 log 0 = 0`.
pub fn entropy_term(x: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&x) || x.is_nan() {
        return Err(Error::OutOfUnitInterval { value: x });
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2())
}

/// Shannon entropy of a spectrum, clamping perturbative negatives.
pub fn spectrum_entropy(values: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &v in values {
        if v < -PSD_TOL {
            return Err(Error::NegativeEigenvalue { value: v });
        }
        if v < -ROUNDOFF_FLOOR {
            log::warn!("clamping negative eigenvalue {v:e} to zero");
        }
        total += entropy_term(v.max(0.0))?;
    }
    Ok(total)
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    spectrum_entropy(&rho.eigenvalues()?)
}

/// An orthonormal basis for one subsystem, e.g. the eigenbasis of a Pauli
/// observable.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBasis {
    vectors: Vec<CVector>,
    label: String,
}

impl MeasurementBasis {
    pub fn new(vectors: Vec<CVector>, label: impl Into<String>) -> Result<Self> {
        let dim = vectors.len();
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::BasisMismatch {
                basis: dim,
                subsystem: vectors.first().map_or(0, |v| v.len()),
            });
        }
        let mut deviation = 0.0_f64;
        for (i, u) in vectors.iter().enumerate() {
            for (j, v) in vectors.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((u.dotc(v) - c64(expected, 0.0)).norm());
            }
        }
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self {
            vectors,
            label: label.into(),
        })
    }

    fn qubit(a: [C64; 2], b: [C64; 2], label: &str) -> Self {
        Self::new(
            vec![CVector::from_column_slice(&a), CVector::from_column_slice(&b)],
            label,
        )
        .expect("Pauli eigenbases are orthonormal")
    }

    /// `{|0⟩, |1⟩}`.
    pub fn sigma_z() -> Self {
        let (o, z) = (c64(1.0, 0.0), c64(0.0, 0.0));
        Self::qubit([o, z], [z, o], "sigma_z")
    }

    /// `{|+⟩, |−⟩}`.
    pub fn sigma_x() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::qubit([c64(r, 0.0), c64(r, 0.0)], [c64(r, 0.0), c64(-r, 0.0)], "sigma_x")
    }

    /// `{|+i⟩, |−i⟩}`.
    pub fn sigma_y() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::qubit([c64(r, 0.0), c64(0.0, r)], [c64(r, 0.0), c64(0.0, -r)], "sigma_y")
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn projector(&self, j: usize) -> CMatrix {
        let v = &self.vectors[j];
        v * v.adjoint()
    }
}

/// Embeds a single-subsystem operator at `target`, identity elsewhere.
pub(crate) fn embed(op: &CMatrix, target: usize, n: usize) -> CMatrix {
    (0..n).fold(CMatrix::identity(1, 1), |acc, k| {
        if k == target {
            acc.kronecker(op)
        } else {
            acc.kronecker(&CMatrix::identity(2, 2))
        }
    })
}

fn check_basis(rho: &DensityMatrix, basis: &MeasurementBasis, target: usize) -> Result<()> {
    rho.check_subsystem(target)?;
    if basis.dim() != rho.dims[target] {
        return Err(Error::BasisMismatch {
            basis: basis.dim(),
            subsystem: rho.dims[target],
        });
    }
    Ok(())
}

/// Post-measurement state `Σ_j (Π_j ⊗ 1) ρ (Π_j ⊗ 1)`.
pub fn project_measure(
    rho: &DensityMatrix,
    basis: &MeasurementBasis,
    target: usize,
) -> Result<DensityMatrix> {
    check_basis(rho, basis, target)?;
    let n = rho.num_subsystems();
    let mut out = CMatrix::zeros(rho.dim(), rho.dim());
    for j in 0..basis.dim() {
        let p = embed(&basis.projector(j), target, n);
        out += &p * &rho.entries * &p;
    }
    DensityMatrix::from_map_output(out, rho.dims.clone())
}

/// A discrete distribution; entries within `1e-12` below zero are clamped.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbabilityDistribution {
    probs: Vec<f64>,
}

impl ProbabilityDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(&p) = probs.iter().find(|&&p| p < -1e-12 || p.is_nan()) {
            return Err(Error::InvalidDistribution(format!("negative entry {p:e}")));
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| p.max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn shannon_entropy(&self) -> f64 {
        self.probs
            .iter()
            .map(|&p| entropy_term(p).expect("validated distribution"))
            .sum()
    }
}

/// `p_j = Tr[(Π_j ⊗ 1) ρ]`.
pub fn outcome_probs(
    rho: &DensityMatrix,
    basis: &MeasurementBasis,
    target: usize,
) -> Result<ProbabilityDistribution> {
    check_basis(rho, basis, target)?;
    let n = rho.num_subsystems();
    let probs = (0..basis.dim())
        .map(|j| (embed(&basis.projector(j), target, n) * &rho.entries).trace().re)
        .collect();
    ProbabilityDistribution::new(probs)
}

/// One measurement branch: outcome probability and, if it is non-negligible,
/// the normalized state of the remaining subsystems.
#[derive(Clone, Debug)]
pub struct Branch {
    pub probability: f64,
    pub state: Option<DensityMatrix>,
}

/// Outcome probabilities below this have no defined conditional state.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

/// `⟨u_j|ρ|u_j⟩ / p_j` on the subsystems other than `target`, for every outcome.
pub fn condition_on_outcomes(
    rho: &DensityMatrix,
    basis: &MeasurementBasis,
    target: usize,
) -> Result<Vec<Branch>> {
    check_basis(rho, basis, target)?;
    let n = rho.num_subsystems();
    if n < 2 {
        return Err(Error::InvalidSelection);
    }
    let rest: Vec<usize> = (0..n).filter(|&k| k != target).collect();
    let rest_dim = 1 << rest.len();
    let mut branches = Vec::with_capacity(basis.dim());
    for u in basis.vectors() {
        let mut block = CMatrix::zeros(rest_dim, rest_dim);
        for r in 0..rho.dim() {
            for c in 0..rho.dim() {
                let w = u[qubit_bit(r, target, n)].conj() * u[qubit_bit(c, target, n)];
                block[(kept_index(r, &rest, n), kept_index(c, &rest, n))] += w * rho.entries[(r, c)];
            }
        }
        let p = block.trace().re;
        let state = if p > NEGLIGIBLE_PROBABILITY {
            Some(DensityMatrix::from_map_output(
                block * c64(1.0 / p, 0.0),
                vec![2; rest.len()],
            )?)
        } else {
            None
        };
        branches.push(Branch {
            probability: p.max(0.0),
            state,
        });
    }
    Ok(branches)
}

/// Random mixed state `G G† / Tr(G G†)` with complex Gaussian `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>) -> Result<DensityMatrix> {
    let dim = validate_dims(&dims)?;
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_map_output(m * c64(1.0 / tr, 0.0), dims)
}

/// Random orthonormal qubit basis from Gram–Schmidt on a Gaussian vector.
pub fn random_qubit_basis<R: Rng + ?Sized>(rng: &mut R) -> MeasurementBasis {
    let mut draw = || c64(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let v = CVector::from_column_slice(&[draw(), draw()]);
    let v = &v / c64(v.norm(), 0.0);
    // orthogonal complement of (a, b) is (-b*, a*)
    let w = CVector::from_column_slice(&[-v[1].conj(), v[0].conj()]);
    MeasurementBasis::new(vec![v, w], "random").expect("orthonormal by construction")
}
