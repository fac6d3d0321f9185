//! The W-state uncertainty game with two accelerated memories.
//!
//! A dealer prepares `(|100⟩ + |010⟩ + |001⟩)/√3` over one mode in each of
//! Alice's, Bob's and Charlie's cavities. Alice stays inertial; Bob and
//! Charlie fly a basic-building-block trajectory with acceleration factors
//! `u_b` and `u_c`. Alice then measures `σ_x` (Charlie guesses) or `σ_y`
//! (Bob guesses). Bob's channel only touches `H(σ_y|B)` and Charlie's only
//! `H(σ_x|C)`, while Alice's marginal, and with it `H(σ_x) + H(σ_y)`, is
//! left alone; so the gap between the uncertainty and the Holevo bound does
//! not depend on the motion.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{
    apply_mode_channel, apply_mode_channel_fermionic, load_spectrum, mode_channel,
    BogoliubovSpectrum, CavitySpec, ModeChannel, SpectrumProvider, SyntheticProvider,
};
use crate::entropic_ur::{check_multi, overlap_bound, MemoryAssignment};
use crate::error::{Error, Result};
use crate::qstate::{
    c64, condition_on_outcomes, entropy_term, outcome_probs, partial_trace, project_measure,
    spectrum_entropy, von_neumann_entropy, CMatrix, DensityMatrix, MeasurementBasis, C64,
};

pub const ALICE: usize = 0;
pub const BOB: usize = 1;
pub const CHARLIE: usize = 2;

/// Where the Bogoliubov magnitudes come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumSource {
    Synthetic { l_max: u32, strength: f64 },
    Files { bob: PathBuf, charlie: PathBuf },
}

impl Default for SpectrumSource {
    fn default() -> Self {
        SpectrumSource::Synthetic {
            l_max: 4,
            strength: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Shared `h = aL` of both moving cavities.
    pub h: f64,
    pub k_bob: i64,
    pub k_charlie: i64,
    pub s: f64,
    pub u_b: f64,
    pub u_c: f64,
    pub spectrum: SpectrumSource,
    /// Give `σ_x` to Bob and `σ_y` to Charlie instead of the other way round.
    pub swap_roles: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            h: 0.1,
            k_bob: 2,
            k_charlie: 1,
            s: 0.5,
            u_b: 0.0,
            u_c: 0.0,
            spectrum: SpectrumSource::default(),
            swap_roles: false,
        }
    }
}

impl GameConfig {
    pub fn at(&self, u_b: f64, u_c: f64) -> Self {
        Self {
            u_b,
            u_c,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 2.0) {
            return Err(Error::InvalidH(self.h));
        }
        CavitySpec::new(self.h, self.s, self.u_b)?;
        CavitySpec::new(self.h, self.s, self.u_c)?;
        for k in [self.k_bob, self.k_charlie] {
            if k < 0 {
                return Err(Error::InvalidSpectrum(format!(
                    "mode index must be non-negative, got {k}"
                )));
            }
        }
        Ok(())
    }
}

/// `(|100⟩ + |010⟩ + |001⟩)/√3`.
pub fn w_state() -> DensityMatrix {
    let a = c64(1.0 / 3f64.sqrt(), 0.0);
    let z = c64(0.0, 0.0);
    DensityMatrix::from_pure(&[z, a, a, z, a, z, z, z], vec![2, 2, 2]).expect("W state is valid")
}

/// A configuration with its spectra resolved, ready to evaluate at many
/// `(u_b, u_c)` points.
#[derive(Clone, Debug)]
pub struct Game {
    config: GameConfig,
    bob: BogoliubovSpectrum,
    charlie: BogoliubovSpectrum,
}

fn expect_mode(spectrum: BogoliubovSpectrum, expected: i64) -> Result<BogoliubovSpectrum> {
    if spectrum.mode_k() != expected {
        return Err(Error::SpectrumModeMismatch {
            expected,
            found: spectrum.mode_k(),
        });
    }
    Ok(spectrum)
}

impl Game {
    pub fn new(config: &GameConfig) -> Result<Self> {
        match &config.spectrum {
            SpectrumSource::Synthetic { l_max, strength } => Self::with_provider(
                config,
                &SyntheticProvider {
                    l_max: *l_max,
                    strength: *strength,
                },
            ),
            SpectrumSource::Files { bob, charlie } => {
                config.validate()?;
                Ok(Self {
                    config: config.clone(),
                    bob: expect_mode(load_spectrum(bob)?, config.k_bob)?,
                    charlie: expect_mode(load_spectrum(charlie)?, config.k_charlie)?,
                })
            }
        }
    }

    pub fn with_provider(config: &GameConfig, provider: &dyn SpectrumProvider) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            bob: expect_mode(provider.spectrum(config.k_bob)?, config.k_bob)?,
            charlie: expect_mode(provider.spectrum(config.k_charlie)?, config.k_charlie)?,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn channels(&self, u_b: f64, u_c: f64) -> Result<(ModeChannel, ModeChannel)> {
        let (h, s) = (self.config.h, self.config.s);
        Ok((
            mode_channel(&CavitySpec::new(h, s, u_b)?, &self.bob)?,
            mode_channel(&CavitySpec::new(h, s, u_c)?, &self.charlie)?,
        ))
    }

    /// `ρ_ABC` with the channels applied mode by mode.
    pub fn evolve(&self, u_b: f64, u_c: f64) -> Result<DensityMatrix> {
        let (ch_b, ch_c) = self.channels(u_b, u_c)?;
        apply_mode_channel(&apply_mode_channel(&w_state(), &ch_b, BOB)?, &ch_c, CHARLIE)
    }

    /// `ρ_ABC` as a state of three fermionic modes in Jordan–Wigner order.
    ///
    /// Differs from [`Game::evolve`] only in the signs of coherences that the
    /// parity-flipping part of a channel drags across earlier modes.
    pub fn evolve_fermionic(&self, u_b: f64, u_c: f64) -> Result<DensityMatrix> {
        let (ch_b, ch_c) = self.channels(u_b, u_c)?;
        apply_mode_channel_fermionic(
            &apply_mode_channel_fermionic(&w_state(), &ch_b, BOB)?,
            &ch_c,
            CHARLIE,
        )
    }

    fn memories(&self) -> (usize, usize) {
        if self.config.swap_roles {
            (BOB, CHARLIE)
        } else {
            (CHARLIE, BOB)
        }
    }

    pub fn report(&self, u_b: f64, u_c: f64) -> Result<GameReport> {
        let (ch_b, ch_c) = self.channels(u_b, u_c)?;
        let rho = apply_mode_channel(&apply_mode_channel(&w_state(), &ch_b, BOB)?, &ch_c, CHARLIE)?;
        let (sx_memory, sy_memory) = self.memories();
        let sx_channel = if sx_memory == CHARLIE { ch_c } else { ch_b };

        let sx = MeasurementBasis::sigma_x();
        let sy = MeasurementBasis::sigma_y();
        let log_inv_c = overlap_bound(&sx, &sy)?;
        let multi = check_multi(
            &rho,
            &[
                MemoryAssignment::new(sx, sx_memory),
                MemoryAssignment::new(sy, sy_memory),
            ],
            log_inv_c,
        )?;
        let (h_sx_c, h_sy_b) = (multi.lhs_terms[0], multi.lhs_terms[1]);
        let (h_sx, h_sy) = (multi.outcome_entropies[0], multi.outcome_entropies[1]);
        let lhs = h_sx_c + h_sy_b;
        let bound = h_sx_c + h_sy_b - h_sx - h_sy + log_inv_c;
        let closed = closed_form_conditional_entropy(&sx_channel)?;

        Ok(GameReport {
            u_b,
            u_c,
            h_sx_c,
            h_sy_b,
            h_sx,
            h_sy,
            j_c_sx: multi.holevo_terms[0],
            j_b_sy: multi.holevo_terms[1],
            lhs,
            bound,
            slack: lhs - bound,
            identity_residual: multi.identity_residual,
            lambda: closed_form_eigenvalues(sx_channel.fbar(), sx_channel.f_coh)?,
            fbar: sx_channel.fbar(),
            f_coh_k3: sx_channel.f_coh,
            closed_form_gap: (h_sx_c - closed).abs(),
        })
    }
}

/// Everything computed at one `(u_b, u_c)` point. Entropies in bits.
///
/// With `swap_roles` the `_C` fields belong to the `σ_x` memory (Bob) and
/// the `_B` fields to the `σ_y` memory (Charlie).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub u_b: f64,
    pub u_c: f64,
    #[serde(rename = "H_sx_C")]
    pub h_sx_c: f64,
    #[serde(rename = "H_sy_B")]
    pub h_sy_b: f64,
    #[serde(rename = "H_sx")]
    pub h_sx: f64,
    #[serde(rename = "H_sy")]
    pub h_sy: f64,
    #[serde(rename = "J_C_sx")]
    pub j_c_sx: f64,
    #[serde(rename = "J_B_sy")]
    pub j_b_sy: f64,
    pub lhs: f64,
    /// `H(σ_x|C) + H(σ_y|B) - H(σ_x) - H(σ_y) + log2(1/c)`.
    pub bound: f64,
    pub slack: f64,
    pub identity_residual: f64,
    /// Closed-form spectrum of the post-measurement `σ_x`–memory state, ascending.
    pub lambda: [f64; 4],
    pub fbar: f64,
    #[serde(rename = "F_coh_k3")]
    pub f_coh_k3: C64,
    /// `|H(σ_x|C)` from the generic pipeline minus the closed form`|.
    pub closed_form_gap: f64,
}

impl GameReport {
    pub const CSV_HEADER: &'static str = "u_b,u_c,H_sx_C,H_sy_B,H_sx,H_sy,J_C_sx,J_B_sy,lhs,bound,slack";

    /// One CSV row matching [`GameReport::CSV_HEADER`], 17 significant digits.
    pub fn csv_row(&self) -> String {
        [
            self.u_b, self.u_c, self.h_sx_c, self.h_sy_b, self.h_sx, self.h_sy, self.j_c_sx,
            self.j_b_sy, self.lhs, self.bound, self.slack,
        ]
        .iter()
        .map(|x| format!("{x:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

pub fn evolve_protocol(cfg: &GameConfig) -> Result<DensityMatrix> {
    Game::new(cfg)?.evolve(cfg.u_b, cfg.u_c)
}

pub fn evolve_protocol_fermionic(cfg: &GameConfig) -> Result<DensityMatrix> {
    Game::new(cfg)?.evolve_fermionic(cfg.u_b, cfg.u_c)
}

pub fn game_report(cfg: &GameConfig) -> Result<GameReport> {
    Game::new(cfg)?.report(cfg.u_b, cfg.u_c)
}

/// Measures `σ_x` on Alice and keeps Alice and `memory`.
pub fn sigma_x_memory_state(rho_abc: &DensityMatrix, memory: usize) -> Result<DensityMatrix> {
    let post = project_measure(rho_abc, &MeasurementBasis::sigma_x(), ALICE)?;
    partial_trace(&post, &[ALICE, memory])
}

/// Post-measurement `σ_x`–memory state in the basis `{00, 01, 10, 11}`:
///
/// ```text
///        ⎡2-f̄   0    0    𝓕  ⎤
///  1/6 · ⎢ 0   1+f̄   𝓕*   0  ⎥
///        ⎢ 0    𝓕   2-f̄   0  ⎥
///        ⎣ 𝓕*   0    0   1+f̄ ⎦
/// ```
pub fn closed_form_sigma_x_c(ch: &ModeChannel) -> DensityMatrix {
    let fbar = ch.fbar();
    let f = ch.f_coh;
    let (hi, lo) = (c64(2.0 - fbar, 0.0), c64(1.0 + fbar, 0.0));
    let z = c64(0.0, 0.0);
    #[rustfmt::skip]
    let m = CMatrix::from_row_slice(4, 4, &[
        hi,       z,        z,  f,
        z,        lo, f.conj(), z,
        z,        f,        hi, z,
        f.conj(), z,        z,  lo,
    ]) * c64(1.0 / 6.0, 0.0);
    DensityMatrix::new(m, vec![2, 2]).expect("closed form is Hermitian with unit trace")
}

/// `λ1 = λ2 = (3 - √r)/12`, `λ3 = λ4 = (3 + √r)/12` with
/// `r = 1 - 4f̄ + 4f̄² + 4|𝓕|²`.
pub fn closed_form_eigenvalues(fbar: f64, f_coh: C64) -> Result<[f64; 4]> {
    let radicand = 1.0 - 4.0 * fbar + 4.0 * fbar * fbar + 4.0 * f_coh.norm_sqr();
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand(radicand));
    }
    let root = radicand.sqrt();
    let (low, high) = ((3.0 - root) / 12.0, (3.0 + root) / 12.0);
    Ok([low, low, high, high])
}

/// `H(σ_x|C) = 2H(λ1) + 2H(λ3) - H((2-f̄)/3) - H((1+f̄)/3)` with `H(x) = -x log2 x`.
pub fn closed_form_conditional_entropy(ch: &ModeChannel) -> Result<f64> {
    let fbar = ch.fbar();
    let [l1, _, l3, _] = closed_form_eigenvalues(fbar, ch.f_coh)?;
    Ok(2.0 * entropy_term(l1)? + 2.0 * entropy_term(l3)?
        - entropy_term((2.0 - fbar) / 3.0)?
        - entropy_term((1.0 + fbar) / 3.0)?)
}

/// Uniform grid `u_b, u_c ∈ [0, u_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_b: usize,
    pub n_c: usize,
    pub u_max: f64,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.n_b < 2 || self.n_c < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points per axis, got {}x{}",
                self.n_b, self.n_c
            )));
        }
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("u_max must be positive, got {}", self.u_max)));
        }
        Ok(())
    }

    pub fn u_b(&self, i: usize) -> f64 {
        self.u_max * i as f64 / (self.n_b - 1) as f64
    }

    pub fn u_c(&self, j: usize) -> f64 {
        self.u_max * j as f64 / (self.n_c - 1) as f64
    }

    /// Grid points in row-major order (`u_b` outer).
    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.n_b)
            .flat_map(|i| (0..self.n_c).map(move |j| (i, j)))
            .map(|(i, j)| (self.u_b(i), self.u_c(j)))
            .collect()
    }
}

/// Reports on every grid point, row-major, evaluated in parallel.
pub fn sweep(cfg: &GameConfig, grid: &Grid) -> Result<Vec<GameReport>> {
    grid.validate()?;
    let game = Game::new(cfg)?;
    grid.points()
        .into_par_iter()
        .map(|(u_b, u_c)| game.report(u_b, u_c))
        .collect()
}

/// Outcome of repeated rounds of the game with sampled measurement choices
/// and outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub rounds: u64,
    pub seed: u64,
    pub u_b: f64,
    pub u_c: f64,
    /// Counts of outcomes `(+, -)` per observable.
    pub sigma_x_counts: [u64; 2],
    pub sigma_y_counts: [u64; 2],
    pub sigma_x_freq: [f64; 2],
    pub sigma_y_freq: [f64; 2],
    /// Plug-in estimates; `None` if the observable was never chosen.
    pub h_sx_c_empirical: Option<f64>,
    pub h_sy_b_empirical: Option<f64>,
    pub h_sx_c_analytic: f64,
    pub h_sy_b_analytic: f64,
}

/// Conditional memory states for each outcome and the analytic `H(M|E)`.
struct Ensemble {
    probs: [f64; 2],
    states: [Option<DensityMatrix>; 2],
}

impl Ensemble {
    fn new(rho: &DensityMatrix, basis: &MeasurementBasis, memory: usize) -> Result<Self> {
        let pair = partial_trace(rho, &[ALICE, memory])?;
        let branches = condition_on_outcomes(&pair, basis, 0)?;
        Ok(Self {
            probs: [branches[0].probability, branches[1].probability],
            states: [branches[0].state.clone(), branches[1].state.clone()],
        })
    }

    /// `H(ρ_ME) - H(ρ_E)` for the classical–quantum state with outcome weights `p`.
    fn conditional_entropy(&self, p: [f64; 2]) -> Result<f64> {
        let mut joint = spectrum_entropy(&p)?;
        let mut memory = CMatrix::zeros(2, 2);
        for (w, state) in p.iter().zip(&self.states) {
            if *w > 0.0 {
                let state = state
                    .as_ref()
                    .ok_or_else(|| Error::InvalidDistribution("sampled an impossible outcome".into()))?;
                joint += w * von_neumann_entropy(state)?;
                memory += state.entries() * c64(*w, 0.0);
            }
        }
        Ok(joint - von_neumann_entropy(&DensityMatrix::from_map_output(memory, vec![2])?)?)
    }
}

/// Plays `rounds` rounds: Alice picks `σ_x` or `σ_y` with equal probability
/// and samples her outcome; each outcome hands the guessing memory the
/// matching conditional state. Conditional entropies are then estimated by
/// plugging the empirical outcome frequencies into that ensemble.
pub fn simulate_rounds(cfg: &GameConfig, rounds: u64, seed: u64) -> Result<EmpiricalReport> {
    if rounds == 0 {
        return Err(Error::ZeroRounds);
    }
    let game = Game::new(cfg)?;
    let rho = game.evolve(cfg.u_b, cfg.u_c)?;
    let (sx_memory, sy_memory) = game.memories();
    let sx = MeasurementBasis::sigma_x();
    let sy = MeasurementBasis::sigma_y();
    let px = outcome_probs(&rho, &sx, ALICE)?.probs()[0];
    let py = outcome_probs(&rho, &sy, ALICE)?.probs()[0];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x_counts = [0u64; 2];
    let mut y_counts = [0u64; 2];
    for _ in 0..rounds {
        let measure_x = rng.random_bool(0.5);
        let draw: f64 = rng.random();
        if measure_x {
            x_counts[usize::from(draw >= px)] += 1;
        } else {
            y_counts[usize::from(draw >= py)] += 1;
        }
    }

    let freq = |c: [u64; 2]| {
        let total = (c[0] + c[1]) as f64;
        if total == 0.0 {
            [0.0, 0.0]
        } else {
            [c[0] as f64 / total, c[1] as f64 / total]
        }
    };
    let (fx, fy) = (freq(x_counts), freq(y_counts));
    let ex = Ensemble::new(&rho, &sx, sx_memory)?;
    let ey = Ensemble::new(&rho, &sy, sy_memory)?;
    let estimate = |e: &Ensemble, c: [u64; 2], f: [f64; 2]| -> Result<Option<f64>> {
        if c[0] + c[1] == 0 {
            Ok(None)
        } else {
            e.conditional_entropy(f).map(Some)
        }
    };

    Ok(EmpiricalReport {
        rounds,
        seed,
        u_b: cfg.u_b,
        u_c: cfg.u_c,
        sigma_x_counts: x_counts,
        sigma_y_counts: y_counts,
        sigma_x_freq: fx,
        sigma_y_freq: fy,
        h_sx_c_empirical: estimate(&ex, x_counts, fx)?,
        h_sy_b_empirical: estimate(&ey, y_counts, fy)?,
        h_sx_c_analytic: ex.conditional_entropy(ex.probs)?,
        h_sy_b_analytic: ey.conditional_entropy(ey.probs)?,
    })
}
