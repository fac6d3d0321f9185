//! Invariant suites behind `cavity-ur check`.

use cavity_uncertainty::cavity::check_fermionic_consistency;
use cavity_uncertainty::entropic_ur::{holevo_quantity, measured_conditional_entropy};
use cavity_uncertainty::protocol::{sweep, Game, GameReport, ALICE};
use cavity_uncertainty::qstate::{
    outcome_probs, partial_trace, random_density_matrix, random_qubit_basis, DensityMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::CliError;

pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn holevo_identity(seed: u64) -> Result<Outcome, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rho = random_density_matrix(&mut rng, vec![2, 2, 2])?;
        let mut total = 0.0;
        for memory in [1, 2] {
            let basis = random_qubit_basis(&mut rng);
            total += measured_conditional_entropy(&rho, &basis, ALICE, memory)?;
            total -= outcome_probs(&rho, &basis, ALICE)?.shannon_entropy();
            total += holevo_quantity(&rho, &basis, ALICE, memory)?.value;
        }
        worst = worst.max(total.abs());
    }
    Ok(outcome(
        "holevo identity",
        worst <= 1e-10,
        format!("max residual {worst:.3e} over 100 random states"),
    ))
}

fn grid_suites(reports: &[GameReport]) -> Vec<Outcome> {
    let min_lhs = reports.iter().map(|r| r.lhs).fold(f64::INFINITY, f64::min);
    let slack0 = reports[0].slack;
    let slack_drift = max_of(reports.iter().map(|r| (r.slack - slack0).abs()));
    let slack_expected = (slack0 - (reports[0].h_sx + reports[0].h_sy - 1.0)).abs();
    let closed = max_of(reports.iter().map(|r| r.closed_form_gap));
    let identity = max_of(reports.iter().map(|r| r.identity_residual));
    vec![
        outcome(
            "tripartite relation",
            min_lhs >= 1.0 - 1e-9,
            format!("min H(sx|C) + H(sy|B) = {min_lhs:.12}"),
        ),
        outcome(
            "slack constancy",
            slack_drift <= 1e-9 && slack_expected <= 1e-9,
            format!("slack {slack0:.12}, drift {slack_drift:.3e}"),
        ),
        outcome(
            "closed form",
            closed <= 1e-10,
            format!("max |pipeline - closed form| = {closed:.3e}"),
        ),
        outcome(
            "multi-memory identity",
            identity <= 1e-10,
            format!("max residual {identity:.3e}"),
        ),
    ]
}

fn periodicity(game: &Game, points: &[(f64, f64)]) -> Result<Outcome, CliError> {
    let mut worst = 0.0f64;
    for &(u_b, u_c) in points {
        let base = game.report(u_b, u_c)?;
        for (db, dc) in [(1.0, 0.0), (0.0, 1.0)] {
            let shifted = game.report(u_b + db, u_c + dc)?;
            worst = worst
                .max((base.h_sx_c - shifted.h_sx_c).abs())
                .max((base.h_sy_b - shifted.h_sy_b).abs())
                .max((base.bound - shifted.bound).abs());
        }
    }
    Ok(outcome(
        "periodicity",
        worst <= 1e-9,
        format!("max drift {worst:.3e} over {} points", points.len()),
    ))
}

fn channels(game: &Game, points: &[(f64, f64)]) -> Result<Outcome, CliError> {
    let mut worst_identity = 0.0f64;
    let mut worst_choi = f64::INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    for &(u_b, u_c) in points {
        let (ch_b, ch_c) = game.channels(u_b, u_c)?;
        for ch in [ch_b, ch_c] {
            worst_identity = worst_identity.max((ch.unitarity_gap() + ch.truncation_overshoot()).abs());
            let choi = ch.choi_min_eigenvalue();
            worst_choi = worst_choi.min(choi);
            worst_excess = worst_excess.max(-choi - ch.truncation_overshoot());
        }
    }
    Ok(outcome(
        "channel",
        worst_identity <= 1e-12 && worst_excess <= 1e-12,
        format!(
            "unitarity residual {worst_identity:.3e}; Choi min {worst_choi:.3e} within truncation overshoot"
        ),
    ))
}

fn states(game: &Game, points: &[(f64, f64)]) -> Result<Vec<Outcome>, CliError> {
    let alice = DensityMatrix::from_diagonal(&[2.0 / 3.0, 1.0 / 3.0], vec![2])?;
    let mut worst_marginal = 0.0f64;
    let mut inconsistent = 0usize;
    for &(u_b, u_c) in points {
        let rho = game.evolve(u_b, u_c)?;
        worst_marginal = worst_marginal.max(partial_trace(&rho, &[ALICE])?.max_abs_diff(&alice));
        if !check_fermionic_consistency(&game.evolve_fermionic(u_b, u_c)?)?.pass {
            inconsistent += 1;
        }
    }
    Ok(vec![
        outcome(
            "alice marginal",
            worst_marginal <= 1e-12,
            format!("max deviation from diag(2/3, 1/3) = {worst_marginal:.3e}"),
        ),
        outcome(
            "fermionic consistency",
            inconsistent == 0,
            format!("{inconsistent} of {} states inconsistent", points.len()),
        ),
    ])
}

/// Runs every suite on the configured game and grid.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Outcome>, CliError> {
    let game = Game::new(&cfg.game)?;
    let points = cfg.grid.points();
    log::info!("checking {} grid points", points.len());
    let reports = sweep(&cfg.game, &cfg.grid)?;

    let mut outcomes = vec![holevo_identity(cfg.seed)?];
    outcomes.extend(grid_suites(&reports));
    let diagonal: Vec<_> = (0..cfg.grid.n_b.min(cfg.grid.n_c))
        .map(|i| (cfg.grid.u_b(i), cfg.grid.u_c(i)))
        .collect();
    outcomes.push(periodicity(&game, &diagonal)?);
    outcomes.push(channels(&game, &points)?);
    outcomes.extend(states(&game, &points)?);
    Ok(outcomes)
}
