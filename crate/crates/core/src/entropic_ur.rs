//! Conditional entropies, Holevo quantities and entropic uncertainty bounds
//! with quantum memories.
//!
//! The measured party is always a single qubit. For every memory `E` the
//! decomposition `H(M|E) = H(M) - J(E|M)` holds exactly, which is what turns
//! a state-independent bound `B ≤ Σ H(M_i)` into the state-dependent
//! `Σ H(M_i|E_i) ≥ B - Σ J(E_i|M_i)`. Reports keep the residual of that
//! identity separate from the slack of the inequality, so a numerical
//! problem can be told apart from a violated relation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    condition_on_outcomes, outcome_probs, partial_trace, project_measure, von_neumann_entropy,
    DensityMatrix, MeasurementBasis, ProbabilityDistribution,
};

/// Holevo quantity of a memory about a measurement outcome, with the
/// ensemble it was computed from.
#[derive(Clone, Debug)]
pub struct HolevoReport {
    pub value: f64,
    pub per_outcome_probs: ProbabilityDistribution,
    /// `None` for outcomes whose probability is below
    /// [`NEGLIGIBLE_PROBABILITY`](crate::qstate::NEGLIGIBLE_PROBABILITY).
    pub per_outcome_memory_states: Vec<Option<DensityMatrix>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    /// `H(M_i|E_i)` per measurement.
    pub lhs_terms: Vec<f64>,
    /// `H(M_i)`: entropy of the bare outcome distribution.
    pub outcome_entropies: Vec<f64>,
    pub state_independent_b: f64,
    /// `J(E_i|M_i)`; empty for relations that do not use them.
    pub holevo_terms: Vec<f64>,
    pub bound: f64,
    /// `Σ lhs_terms - bound`.
    pub slack: f64,
    pub overlap_c: f64,
    /// `|Σ H(M_i|E_i) - Σ H(M_i) + Σ J(E_i|M_i)|`.
    pub identity_residual: f64,
}

impl UncertaintyReport {
    pub fn lhs(&self) -> f64 {
        self.lhs_terms.iter().sum()
    }
}

/// Both bipartite right-hand sides for the same left-hand side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteReport {
    /// `log2(1/c) + H(A|B)`.
    pub conditional_entropy_form: UncertaintyReport,
    /// `log2(1/c) + H(A) - J(B|M_1) - J(B|M_2)`.
    pub holevo_form: UncertaintyReport,
}

fn require_pair(rho: &DensityMatrix, measured: usize, memory: usize) -> Result<()> {
    let n = rho.num_subsystems();
    for index in [measured, memory] {
        if index >= n {
            return Err(Error::InvalidSubsystem { index, count: n });
        }
    }
    if measured == memory {
        return Err(Error::InvalidSelection);
    }
    Ok(())
}

/// Restricts `rho` to `{measured, memory}` and returns the state with the
/// position of the measured qubit inside it.
fn reduce_to_pair(rho: &DensityMatrix, measured: usize, memory: usize) -> Result<(DensityMatrix, usize)> {
    require_pair(rho, measured, memory)?;
    let pair = partial_trace(rho, &[measured, memory])?;
    Ok((pair, usize::from(measured > memory)))
}

/// `H(AB) - H(B)` where `B` is `memory`; `rho` must be bipartite.
pub fn conditional_entropy(rho_ab: &DensityMatrix, memory: usize) -> Result<f64> {
    if rho_ab.num_subsystems() != 2 {
        return Err(Error::InvalidSelection);
    }
    require_pair(rho_ab, 1 - memory.min(1), memory)?;
    let rho_b = partial_trace(rho_ab, &[memory])?;
    Ok(von_neumann_entropy(rho_ab)? - von_neumann_entropy(&rho_b)?)
}

/// `H(M|E) = H(ρ_{ME}) - H(ρ_E)` after measuring `basis` on `measured`.
///
/// Subsystems other than `measured` and `memory` are traced out first.
pub fn measured_conditional_entropy(
    rho: &DensityMatrix,
    basis: &MeasurementBasis,
    measured: usize,
    memory: usize,
) -> Result<f64> {
    let (pair, m) = reduce_to_pair(rho, measured, memory)?;
    let post = project_measure(&pair, basis, m)?;
    let rho_e = partial_trace(&pair, &[1 - m])?;
    Ok(von_neumann_entropy(&post)? - von_neumann_entropy(&rho_e)?)
}

/// Largest squared overlap between vectors of the two bases.
pub fn max_overlap(b1: &MeasurementBasis, b2: &MeasurementBasis) -> Result<f64> {
    if b1.dim() != b2.dim() {
        return Err(Error::BasisMismatch {
            basis: b2.dim(),
            subsystem: b1.dim(),
        });
    }
    Ok(b1
        .vectors()
        .iter()
        .flat_map(|u| b2.vectors().iter().map(move |v| u.dotc(v).norm_sqr()))
        .fold(0.0, f64::max))
}

/// `log2(1/c)` for two measurements.
pub fn overlap_bound(b1: &MeasurementBasis, b2: &MeasurementBasis) -> Result<f64> {
    Ok(-max_overlap(b1, b2)?.log2())
}

/// `J(E|M) = H(ρ_E) - Σ_j p_j H(ρ_{E|j})`.
pub fn holevo_quantity(
    rho: &DensityMatrix,
    basis: &MeasurementBasis,
    measured: usize,
    memory: usize,
) -> Result<HolevoReport> {
    let (pair, m) = reduce_to_pair(rho, measured, memory)?;
    let post = project_measure(&pair, basis, m)?;
    let rho_e = partial_trace(&pair, &[1 - m])?;
    let branches = condition_on_outcomes(&post, basis, m)?;
    let mut value = von_neumann_entropy(&rho_e)?;
    for b in &branches {
        if let Some(state) = &b.state {
            value -= b.probability * von_neumann_entropy(state)?;
        }
    }
    let per_outcome_probs =
        ProbabilityDistribution::new(branches.iter().map(|b| b.probability).collect())?;
    Ok(HolevoReport {
        value,
        per_outcome_probs,
        per_outcome_memory_states: branches.into_iter().map(|b| b.state).collect(),
    })
}

/// Evaluates both bipartite relations for measurements on the subsystem that
/// is not `memory`.
pub fn check_bipartite(
    rho_ab: &DensityMatrix,
    basis1: &MeasurementBasis,
    basis2: &MeasurementBasis,
    memory: usize,
) -> Result<BipartiteReport> {
    if rho_ab.num_subsystems() != 2 || memory > 1 {
        return Err(Error::InvalidSelection);
    }
    let measured = 1 - memory;
    let c = max_overlap(basis1, basis2)?;
    let b = -c.log2();
    let bases = [basis1, basis2];

    let mut lhs_terms = Vec::with_capacity(2);
    let mut outcome_entropies = Vec::with_capacity(2);
    let mut holevo_terms = Vec::with_capacity(2);
    for basis in bases {
        lhs_terms.push(measured_conditional_entropy(rho_ab, basis, measured, memory)?);
        outcome_entropies.push(outcome_probs(rho_ab, basis, measured)?.shannon_entropy());
        holevo_terms.push(holevo_quantity(rho_ab, basis, measured, memory)?.value);
    }
    let lhs: f64 = lhs_terms.iter().sum();
    let identity_residual = identity_residual(&lhs_terms, &outcome_entropies, &holevo_terms);

    let h_a_given_b = conditional_entropy(rho_ab, memory)?;
    let h_a = von_neumann_entropy(&partial_trace(rho_ab, &[measured])?)?;
    let first = b + h_a_given_b;
    let second = b + h_a - holevo_terms.iter().sum::<f64>();

    let report = |bound: f64, holevo: Vec<f64>| UncertaintyReport {
        lhs_terms: lhs_terms.clone(),
        outcome_entropies: outcome_entropies.clone(),
        state_independent_b: b,
        holevo_terms: holevo,
        bound,
        slack: lhs - bound,
        overlap_c: c,
        identity_residual,
    };
    Ok(BipartiteReport {
        conditional_entropy_form: report(first, Vec::new()),
        holevo_form: report(second, holevo_terms.clone()),
    })
}

fn identity_residual(lhs: &[f64], outcome: &[f64], holevo: &[f64]) -> f64 {
    let total = |v: &[f64]| v.iter().sum::<f64>();
    (total(lhs) - total(outcome) + total(holevo)).abs()
}

/// One measurement of subsystem `A` (index 0) and the memory guessing it.
#[derive(Clone, Debug)]
pub struct MemoryAssignment {
    pub basis: MeasurementBasis,
    pub memory: usize,
}

impl MemoryAssignment {
    pub fn new(basis: MeasurementBasis, memory: usize) -> Self {
        Self { basis, memory }
    }
}

/// Multi-memory relation `Σ H(M_i|E_i) ≥ B - Σ J(E_i|M_i)`, measurements on
/// subsystem 0.
///
/// `b` is the caller's state-independent bound; for two measurements
/// [`overlap_bound`] gives `log2(1/c)`.
pub fn check_multi(
    rho: &DensityMatrix,
    assignments: &[MemoryAssignment],
    b: f64,
) -> Result<UncertaintyReport> {
    if b.is_nan() || b <= 0.0 {
        return Err(Error::NonPositiveBound(b));
    }
    if assignments.is_empty() {
        return Err(Error::InvalidSelection);
    }
    let mut seen = Vec::with_capacity(assignments.len());
    for a in assignments {
        if seen.contains(&a.memory) {
            return Err(Error::DuplicateMemory(a.memory));
        }
        seen.push(a.memory);
    }

    const MEASURED: usize = 0;
    let mut lhs_terms = Vec::with_capacity(assignments.len());
    let mut outcome_entropies = Vec::with_capacity(assignments.len());
    let mut holevo_terms = Vec::with_capacity(assignments.len());
    for a in assignments {
        lhs_terms.push(measured_conditional_entropy(rho, &a.basis, MEASURED, a.memory)?);
        outcome_entropies.push(outcome_probs(rho, &a.basis, MEASURED)?.shannon_entropy());
        holevo_terms.push(holevo_quantity(rho, &a.basis, MEASURED, a.memory)?.value);
    }

    let mut c: f64 = if assignments.len() == 1 { 1.0 } else { 0.0 };
    for (i, x) in assignments.iter().enumerate() {
        for y in &assignments[i + 1..] {
            c = c.max(max_overlap(&x.basis, &y.basis)?);
        }
    }

    let bound = b - holevo_terms.iter().sum::<f64>();
    let lhs: f64 = lhs_terms.iter().sum();
    Ok(UncertaintyReport {
        identity_residual: identity_residual(&lhs_terms, &outcome_entropies, &holevo_terms),
        lhs_terms,
        outcome_entropies,
        state_independent_b: b,
        holevo_terms,
        bound,
        slack: lhs - bound,
        overlap_c: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{c64, random_density_matrix, random_qubit_basis, tensor};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bell() -> DensityMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let z = c64(0.0, 0.0);
        DensityMatrix::from_pure(&[c64(r, 0.0), z, z, c64(r, 0.0)], vec![2, 2]).unwrap()
    }

    fn product() -> DensityMatrix {
        let a = DensityMatrix::from_diagonal(&[0.8, 0.2], vec![2]).unwrap();
        let b = DensityMatrix::from_diagonal(&[0.3, 0.7], vec![2]).unwrap();
        tensor(&a, &b).unwrap()
    }

    #[test]
    fn conditional_entropy_examples() {
        assert!((conditional_entropy(&bell(), 1).unwrap() + 1.0).abs() < 1e-12);
        let h_a = von_neumann_entropy(&DensityMatrix::from_diagonal(&[0.8, 0.2], vec![2]).unwrap()).unwrap();
        assert!((conditional_entropy(&product(), 1).unwrap() - h_a).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]).unwrap();
        assert!((conditional_entropy(&mixed, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_conditional_entropy_examples() {
        let zero = DensityMatrix::basis_state(0, vec![2]).unwrap();
        let b = DensityMatrix::from_diagonal(&[0.4, 0.6], vec![2]).unwrap();
        let s = tensor(&zero, &b).unwrap();
        let z = MeasurementBasis::sigma_z();
        assert!(measured_conditional_entropy(&s, &z, 0, 1).unwrap().abs() < 1e-12);
        assert!(measured_conditional_entropy(&bell(), &z, 0, 1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn overlaps() {
        let (x, y, z) = (
            MeasurementBasis::sigma_x(),
            MeasurementBasis::sigma_y(),
            MeasurementBasis::sigma_z(),
        );
        assert!((max_overlap(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((max_overlap(&x, &y).unwrap() - 0.5).abs() < 1e-15);
        assert!((max_overlap(&z, &x).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn holevo_examples() {
        let x = MeasurementBasis::sigma_x();
        assert!(holevo_quantity(&product(), &x, 0, 1).unwrap().value.abs() < 1e-12);
        let report = holevo_quantity(&bell(), &MeasurementBasis::sigma_z(), 0, 1).unwrap();
        assert!((report.value - 1.0).abs() < 1e-12);
        assert_eq!(report.per_outcome_memory_states.len(), 2);
    }

    #[test]
    fn holevo_skips_impossible_outcomes() {
        let s = DensityMatrix::basis_state(0, vec![2, 2]).unwrap();
        let report = holevo_quantity(&s, &MeasurementBasis::sigma_z(), 0, 1).unwrap();
        assert!(report.per_outcome_memory_states[1].is_none());
        assert!(report.value.abs() < 1e-12);
    }

    #[test]
    fn bipartite_examples() {
        let (z, x) = (MeasurementBasis::sigma_z(), MeasurementBasis::sigma_x());
        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]).unwrap();
        let r = check_bipartite(&mixed, &z, &x, 1).unwrap();
        assert!((r.conditional_entropy_form.lhs() - 2.0).abs() < 1e-12);
        assert!((r.conditional_entropy_form.bound - 2.0).abs() < 1e-12);
        assert!(r.conditional_entropy_form.slack.abs() < 1e-12);

        let r = check_bipartite(&bell(), &z, &x, 1).unwrap();
        assert!(r.conditional_entropy_form.lhs().abs() < 1e-12);
        assert!(r.conditional_entropy_form.bound.abs() < 1e-12);
        assert!(r.holevo_form.slack.abs() < 1e-12);

        let pure = DensityMatrix::basis_state(0, vec![2, 2]).unwrap();
        let r = check_bipartite(&pure, &z, &x, 1).unwrap();
        assert!((r.conditional_entropy_form.lhs() - 1.0).abs() < 1e-12);
        assert!((r.conditional_entropy_form.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_rejects_bad_input() {
        let rho = DensityMatrix::maximally_mixed(vec![2, 2, 2]).unwrap();
        let a = MemoryAssignment::new(MeasurementBasis::sigma_x(), 1);
        assert!(matches!(
            check_multi(&rho, &[a.clone(), a.clone()], 1.0),
            Err(Error::DuplicateMemory(1))
        ));
        assert!(matches!(
            check_multi(&rho, std::slice::from_ref(&a), 0.0),
            Err(Error::NonPositiveBound(_))
        ));
        let to_alice = MemoryAssignment::new(MeasurementBasis::sigma_x(), 0);
        assert!(check_multi(&rho, &[to_alice], 1.0).is_err());
    }

    #[test]
    fn ghz_like_diagonal_state_satisfies_tripartite_relation() {
        let rho = DensityMatrix::from_diagonal(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5], vec![2, 2, 2]).unwrap();
        let z = MeasurementBasis::sigma_z();
        let r = check_multi(
            &rho,
            &[MemoryAssignment::new(z.clone(), 1), MemoryAssignment::new(z, 2)],
            1.0,
        )
        .unwrap();
        assert!(r.slack >= 0.0);
        assert!(r.identity_residual < 1e-10);
    }

    fn arb_state(dims: Vec<usize>) -> impl Strategy<Value = DensityMatrix> {
        any::<u64>().prop_map(move |seed| {
            random_density_matrix(&mut ChaCha8Rng::seed_from_u64(seed), dims.clone()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn holevo_is_capped_by_memory_entropy(rho in arb_state(vec![2, 2, 2]), seed in any::<u64>()) {
            let basis = random_qubit_basis(&mut ChaCha8Rng::seed_from_u64(seed));
            let j = holevo_quantity(&rho, &basis, 0, 2).unwrap().value;
            let h_mem = von_neumann_entropy(&partial_trace(&rho, &[2]).unwrap()).unwrap();
            prop_assert!(j >= -1e-10 && j <= h_mem + 1e-10);
        }

        #[test]
        fn measured_conditional_entropy_is_nonnegative(rho in arb_state(vec![2, 2]), seed in any::<u64>()) {
            let basis = random_qubit_basis(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(measured_conditional_entropy(&rho, &basis, 0, 1).unwrap() >= -1e-10);
        }

        #[test]
        fn bipartite_memory_relation_holds(rho in arb_state(vec![2, 2]), s1 in any::<u64>(), s2 in any::<u64>()) {
            let b1 = random_qubit_basis(&mut ChaCha8Rng::seed_from_u64(s1));
            let b2 = random_qubit_basis(&mut ChaCha8Rng::seed_from_u64(s2));
            let r = check_bipartite(&rho, &b1, &b2, 1).unwrap();
            prop_assert!(r.conditional_entropy_form.slack >= -1e-9);
            prop_assert!(r.holevo_form.slack >= -1e-9);
        }

        #[test]
        fn tripartite_relation_for_x_and_y(rho in arb_state(vec![2, 2, 2])) {
            let r = check_multi(
                &rho,
                &[
                    MemoryAssignment::new(MeasurementBasis::sigma_x(), 2),
                    MemoryAssignment::new(MeasurementBasis::sigma_y(), 1),
                ],
                1.0,
            ).unwrap();
            prop_assert!(r.lhs() >= 1.0 - 1e-9);
            prop_assert!(r.identity_residual <= 1e-10);
        }
    }
}
