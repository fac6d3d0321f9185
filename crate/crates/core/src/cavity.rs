//! Fermionic cavity modes along a basic-building-block trajectory: inertial,
//! one stretch of uniform acceleration lasting Rindler time `eta1`, inertial.
//!
//! The net effect on one mode `k`, restricted to its vacuum/one-particle
//! span and to second order in `h = aL`, is the qubit map
//!
//! ```text
//! |0⟩⟨0| ↦ (1 - f⁻)|0⟩⟨0| + f⁻|1⟩⟨1|
//! |1⟩⟨1| ↦ f⁺|0⟩⟨0| + (1 - f⁺)|1⟩⟨1|
//! |0⟩⟨1| ↦ 𝓕 |0⟩⟨1|,        𝓕 = G_k + 𝔽⁽²⁾_kk h²
//! ```
//!
//! Everything is driven by the first-order Bogoliubov magnitudes
//! `|F⁽¹⁾_lk|²`, supplied by a [`SpectrumProvider`]. The diagonal
//! second-order coefficient is not an input: first-order unitarity fixes
//! `2 Re F⁽²⁾_kk = -Σ_l |F⁽¹⁾_lk|²`, which gives
//! `𝔽⁽²⁾_kk = Σ_l |F⁽¹⁾_lk|² (G_l - G_k)`.
//!
//! The truncated map is trace preserving but only completely positive up to
//! `O(h⁴)`: `(1 - |𝓕|²) - (f⁺ + f⁻) = -|𝔽⁽²⁾_kk|² h⁴` exactly, so the Choi
//! determinant is `f⁺f⁻ - |𝔽⁽²⁾_kk|² h⁴`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{c64, eigenvalues_hermitian, qubit_bit, CMatrix, DensityMatrix, C64};

/// Geometry and motion of one cavity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    h: f64,
    s: f64,
    u: f64,
    walls: Option<(f64, f64)>,
    eta1: Option<f64>,
}

impl CavitySpec {
    /// Builds a cavity from its wall positions (Rindler coordinates at the
    /// start of acceleration) and the acceleration duration.
    pub fn from_walls(x1: f64, x2: f64, s: f64, eta1: f64) -> Result<Self> {
        if !(x1 > 0.0 && x2 > x1 && x2.is_finite()) {
            return Err(Error::InvalidWalls { x1, x2 });
        }
        let length = x2 - x1;
        let acceleration = 2.0 / (x1 + x2);
        let h = acceleration * length;
        check_phase_shift(s)?;
        let u = u_factor(h, eta1)?;
        Ok(Self {
            h,
            s,
            u,
            walls: Some((x1, x2)),
            eta1: Some(eta1),
        })
    }

    /// Builds a cavity directly from `h`, `s` and the acceleration factor `u`.
    pub fn new(h: f64, s: f64, u: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&h) {
            return Err(Error::InvalidH(h));
        }
        check_phase_shift(s)?;
        if !(u.is_finite() && u >= 0.0) {
            return Err(Error::InvalidAccelerationFactor(u));
        }
        Ok(Self {
            h,
            s,
            u,
            walls: None,
            eta1: None,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn eta1(&self) -> Option<f64> {
        self.eta1
    }

    pub fn proper_length(&self) -> Option<f64> {
        self.walls.map(|(x1, x2)| x2 - x1)
    }

    /// Proper acceleration at the cavity centre.
    pub fn acceleration(&self) -> Option<f64> {
        self.walls.map(|(x1, x2)| 2.0 / (x1 + x2))
    }
}

fn check_phase_shift(s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidPhaseShift(s));
    }
    Ok(())
}

/// `u = eta1 / (2 ln[(h + 2)/(2 - h)])`.
pub fn u_factor(h: f64, eta1: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&h) {
        return Err(Error::InvalidH(h));
    }
    if !(eta1 >= 0.0 && eta1.is_finite()) {
        return Err(Error::InvalidDuration(eta1));
    }
    if eta1 == 0.0 {
        return Ok(0.0);
    }
    if h == 0.0 {
        return Err(Error::InertialCavity);
    }
    Ok(eta1 / (2.0 * ((h + 2.0) / (2.0 - h)).ln()))
}

/// Phase `G_n = exp(2πi u (n + s))` picked up by mode `n` during acceleration.
pub fn phase_g(n: i64, u: f64, s: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * u * (n as f64 + s))
}

/// First-order Bogoliubov magnitudes `|F⁽¹⁾_lk|²` for one mode `k`,
/// per unit `h²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovSpectrum {
    mode_k: i64,
    magnitudes: BTreeMap<i64, f64>,
    l_max: u32,
}

impl BogoliubovSpectrum {
    pub fn new(mode_k: i64, magnitudes: BTreeMap<i64, f64>) -> Result<Self> {
        if mode_k < 0 {
            return Err(Error::InvalidSpectrum(format!(
                "mode_k must be a non-negative (particle) mode, got {mode_k}"
            )));
        }
        for (&l, &w) in &magnitudes {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidSpectrum(format!(
                    "magnitude for label {l} must be finite and non-negative, got {w}"
                )));
            }
            if l == mode_k {
                return Err(Error::InvalidSpectrum(format!(
                    "label {l} equals mode_k; the diagonal is fixed by unitarity"
                )));
            }
        }
        let l_max = magnitudes
            .keys()
            .map(|&l| (l - mode_k).unsigned_abs() as u32)
            .max()
            .unwrap_or(0);
        Ok(Self {
            mode_k,
            magnitudes,
            l_max,
        })
    }

    pub fn mode_k(&self) -> i64 {
        self.mode_k
    }

    pub fn magnitudes(&self) -> &BTreeMap<i64, f64> {
        &self.magnitudes
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn total(&self) -> f64 {
        self.magnitudes.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.magnitudes.values().all(|&w| w == 0.0)
    }

    /// True when the largest magnitude sits at the smallest `|l - k|`.
    /// Providers that fail this are probably mislabelled.
    pub fn is_decaying(&self) -> bool {
        let Some((&argmax, _)) = self
            .magnitudes
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
        else {
            return true;
        };
        let nearest = self
            .magnitudes
            .iter()
            .filter(|(_, &w)| w > 0.0)
            .map(|(&l, _)| (l - self.mode_k).abs())
            .min()
            .unwrap_or(0);
        (argmax - self.mode_k).abs() == nearest
    }
}

/// `|F⁽¹⁾_lk|² = strength / (l - k)⁴` on the window `0 < |l - k| ≤ l_max`.
pub fn synthetic_spectrum(mode_k: i64, l_max: u32, strength: f64) -> Result<BogoliubovSpectrum> {
    if l_max == 0 {
        return Err(Error::InvalidSpectrum("l_max must be at least 1".into()));
    }
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::InvalidSpectrum(format!(
            "strength must be finite and non-negative, got {strength}"
        )));
    }
    let radius = i64::from(l_max);
    let magnitudes = (mode_k - radius..=mode_k + radius)
        .filter(|&l| l != mode_k)
        .map(|l| (l, strength / ((l - mode_k) as f64).powi(4)))
        .collect();
    BogoliubovSpectrum::new(mode_k, magnitudes)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumFile {
    mode_k: i64,
    #[serde(default)]
    magnitudes: BTreeMap<String, toml::Value>,
    #[serde(default)]
    #[allow(dead_code)]
    comment: Option<String>,
}

/// Parses the TOML spectrum format:
///
/// ```toml
/// mode_k = 1
/// comment = "optional"
///
/// [magnitudes]
/// "0" = 0.012
/// "2" = 0.012
/// "-1" = 0.004
/// ```
pub fn parse_spectrum(text: &str, origin: &Path) -> Result<BogoliubovSpectrum> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let file: SpectrumFile = toml::from_str(text).map_err(|e| parse_err(e.message().to_string()))?;
    let mut magnitudes = BTreeMap::new();
    for (key, value) in &file.magnitudes {
        let label: i64 = key
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("magnitudes.\"{key}\": label is not an integer")))?;
        let w = match value {
            toml::Value::Float(x) => *x,
            toml::Value::Integer(i) => *i as f64,
            other => {
                return Err(parse_err(format!(
                    "magnitudes.\"{key}\": expected a number, found {}",
                    other.type_str()
                )))
            }
        };
        if !(w >= 0.0 && w.is_finite()) {
            return Err(parse_err(format!(
                "magnitudes.\"{key}\": magnitude must be finite and non-negative, got {w}"
            )));
        }
        if magnitudes.insert(label, w).is_some() {
            return Err(parse_err(format!("magnitudes.\"{key}\": duplicate label {label}")));
        }
    }
    if magnitudes.is_empty() {
        log::warn!(
            "{}: empty magnitudes, mode {} will evolve as the identity channel",
            origin.display(),
            file.mode_k
        );
    }
    let spectrum = BogoliubovSpectrum::new(file.mode_k, magnitudes).map_err(|e| parse_err(e.to_string()))?;
    if !spectrum.is_decaying() {
        log::warn!(
            "{}: largest magnitude is not at the nearest label; check the mode labels",
            origin.display()
        );
    }
    Ok(spectrum)
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<BogoliubovSpectrum> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spectrum(&text, path)
}

/// Source of Bogoliubov magnitudes for a given mode.
pub trait SpectrumProvider: Send + Sync {
    fn spectrum(&self, mode_k: i64) -> Result<BogoliubovSpectrum>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProvider {
    pub l_max: u32,
    pub strength: f64,
}

impl SpectrumProvider for SyntheticProvider {
    fn spectrum(&self, mode_k: i64) -> Result<BogoliubovSpectrum> {
        synthetic_spectrum(mode_k, self.l_max, self.strength)
    }
}

/// Fixed spectra keyed by mode, e.g. loaded from files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableProvider {
    spectra: BTreeMap<i64, BogoliubovSpectrum>,
}

impl TableProvider {
    pub fn new(spectra: impl IntoIterator<Item = BogoliubovSpectrum>) -> Self {
        Self {
            spectra: spectra.into_iter().map(|s| (s.mode_k(), s)).collect(),
        }
    }
}

impl SpectrumProvider for TableProvider {
    fn spectrum(&self, mode_k: i64) -> Result<BogoliubovSpectrum> {
        self.spectra
            .get(&mode_k)
            .cloned()
            .ok_or(Error::MissingSpectrum(mode_k))
    }
}

fn check_perturbative(spec: &CavitySpec, spectrum: &BogoliubovSpectrum) -> Result<()> {
    let leaked = spectrum.total() * spec.h * spec.h;
    if leaked >= 1.0 {
        return Err(Error::PerturbativeValidity(format!(
            "Σ|F⁽¹⁾|² h² = {leaked} must stay below 1"
        )));
    }
    Ok(())
}

/// `|e^{2πiu(k-l)} - 1|² = 4 sin²(πu(k-l))`.
fn leak_factor(u: f64, k: i64, l: i64) -> f64 {
    let s = (PI * u * (k - l) as f64).sin();
    4.0 * s * s
}

/// `(f⁺, f⁻)`: leakage into particle modes `l ≥ 0` and antiparticle modes `l < 0`.
pub fn f_coefficients(spec: &CavitySpec, spectrum: &BogoliubovSpectrum) -> Result<(f64, f64)> {
    check_perturbative(spec, spectrum)?;
    let k = spectrum.mode_k();
    let h2 = spec.h * spec.h;
    let (mut f_plus, mut f_minus) = (0.0, 0.0);
    for (&l, &w) in spectrum.magnitudes() {
        let term = leak_factor(spec.u, k, l) * w * h2;
        if l >= 0 {
            f_plus += term;
        } else {
            f_minus += term;
        }
    }
    if f_plus + f_minus >= 0.5 {
        return Err(Error::PerturbativeValidity(format!(
            "f⁺ + f⁻ = {} is not small; h is too large",
            f_plus + f_minus
        )));
    }
    Ok((f_plus, f_minus))
}

/// `𝔽⁽²⁾_kk = Σ_l |F⁽¹⁾_lk|² (G_l - G_k)`.
pub fn second_order_diag(spec: &CavitySpec, spectrum: &BogoliubovSpectrum) -> Result<C64> {
    check_perturbative(spec, spectrum)?;
    let k = spectrum.mode_k();
    let g_k = phase_g(k, spec.u, spec.s);
    Ok(spectrum
        .magnitudes()
        .iter()
        .map(|(&l, &w)| (phase_g(l, spec.u, spec.s) - g_k) * w)
        .sum())
}

/// Effective qubit channel on one cavity mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeChannel {
    pub f_plus: f64,
    pub f_minus: f64,
    /// Coherence factor `𝓕`.
    pub f_coh: C64,
    /// Zeroth-order phase `G_k`.
    pub g_k: C64,
    /// `𝔽⁽²⁾_kk`.
    pub second_order: C64,
    pub h: f64,
}

impl ModeChannel {
    pub fn identity() -> Self {
        Self {
            f_plus: 0.0,
            f_minus: 0.0,
            f_coh: c64(1.0, 0.0),
            g_k: c64(1.0, 0.0),
            second_order: c64(0.0, 0.0),
            h: 0.0,
        }
    }

    /// `f̄ = -f⁺ + 2f⁻`.
    pub fn fbar(&self) -> f64 {
        -self.f_plus + 2.0 * self.f_minus
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`, input factor first.
    pub fn choi_matrix(&self) -> CMatrix {
        let mut j = CMatrix::zeros(4, 4);
        j[(0, 0)] = c64(1.0 - self.f_minus, 0.0);
        j[(1, 1)] = c64(self.f_minus, 0.0);
        j[(2, 2)] = c64(self.f_plus, 0.0);
        j[(3, 3)] = c64(1.0 - self.f_plus, 0.0);
        j[(0, 3)] = self.f_coh;
        j[(3, 0)] = self.f_coh.conj();
        j
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        *eigenvalues_hermitian(&self.choi_matrix())
            .expect("Choi matrix is Hermitian by construction")
            .last()
            .unwrap()
    }

    /// `|𝔽⁽²⁾_kk|² h⁴`, the fourth-order term by which `|𝓕|²` overshoots
    /// `1 - f⁺ - f⁻`.
    pub fn truncation_overshoot(&self) -> f64 {
        self.second_order.norm_sqr() * self.h.powi(4)
    }

    /// `(1 - |𝓕|²) - (f⁺ + f⁻)`.
    pub fn unitarity_gap(&self) -> f64 {
        (1.0 - self.f_coh.norm_sqr()) - (self.f_plus + self.f_minus)
    }

    /// Applies the channel to a 2×2 operator.
    pub fn apply_qubit(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(2, 2);
        out[(0, 0)] = m[(0, 0)] * (1.0 - self.f_minus) + m[(1, 1)] * self.f_plus;
        out[(1, 1)] = m[(0, 0)] * self.f_minus + m[(1, 1)] * (1.0 - self.f_plus);
        out[(0, 1)] = m[(0, 1)] * self.f_coh;
        out[(1, 0)] = m[(1, 0)] * self.f_coh.conj();
        out
    }
}

/// Builds the mode channel for `spectrum.mode_k()` under `spec`.
///
/// Fails if the Choi matrix is negative beyond the known `O(h⁴)` truncation
/// overshoot; use [`ModeChannel::choi_min_eigenvalue`] for a strict test.
pub fn mode_channel(spec: &CavitySpec, spectrum: &BogoliubovSpectrum) -> Result<ModeChannel> {
    let (f_plus, f_minus) = f_coefficients(spec, spectrum)?;
    let second_order = second_order_diag(spec, spectrum)?;
    let g_k = phase_g(spectrum.mode_k(), spec.u, spec.s);
    let ch = ModeChannel {
        f_plus,
        f_minus,
        f_coh: g_k + second_order * (spec.h * spec.h),
        g_k,
        second_order,
        h: spec.h,
    };
    let min = ch.choi_min_eigenvalue();
    if min < -(ch.truncation_overshoot() + 1e-12) {
        return Err(Error::NotCompletelyPositive(min));
    }
    Ok(ch)
}

fn apply_channel(rho: &DensityMatrix, ch: &ModeChannel, target: usize, fermionic: bool) -> Result<DensityMatrix> {
    let n = rho.num_subsystems();
    if target >= n {
        return Err(Error::InvalidSubsystem { index: target, count: n });
    }
    let bit = 1usize << (n - 1 - target);
    // Jordan–Wigner string of the modes ordered before `target`.
    let string_parity = |index: usize| (0..target).map(|k| qubit_bit(index, k, n)).sum::<usize>() & 1;
    let dim = rho.dim();
    let m = rho.entries();
    let mut out = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let x = m[(r, c)];
            let sign = if fermionic && (string_parity(r) ^ string_parity(c)) == 1 {
                -1.0
            } else {
                1.0
            };
            match (r & bit != 0, c & bit != 0) {
                (false, false) => {
                    out[(r, c)] += x * (1.0 - ch.f_minus);
                    out[(r | bit, c | bit)] += x * (sign * ch.f_minus);
                }
                (true, true) => {
                    out[(r, c)] += x * (1.0 - ch.f_plus);
                    out[(r & !bit, c & !bit)] += x * (sign * ch.f_plus);
                }
                (false, true) => out[(r, c)] += x * ch.f_coh,
                (true, false) => out[(r, c)] += x * ch.f_coh.conj(),
            }
        }
    }
    DensityMatrix::from_map_output(out, rho.dims().to_vec())
}

/// Applies `ch` to the `target` qubit, identity on the others.
pub fn apply_mode_channel(rho: &DensityMatrix, ch: &ModeChannel, target: usize) -> Result<DensityMatrix> {
    apply_channel(rho, ch, target, false)
}

/// Like [`apply_mode_channel`], but for a register of fermionic modes in
/// Jordan–Wigner order: the parity-flipping part of the channel is carried by
/// odd operators, so it drags the parity string of all earlier modes along.
pub fn apply_mode_channel_fermionic(
    rho: &DensityMatrix,
    ch: &ModeChannel,
    target: usize,
) -> Result<DensityMatrix> {
    apply_channel(rho, ch, target, true)
}

/// Populations and coherences of a three-mode state in the occupation basis
/// `|n_A n_B n_C⟩`, with the pair-sign rules for a consistent
/// fermion-to-qubit mapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Diagonal entries in the order `000, 001, 010, 011, 100, 101, 110, 111`.
    pub mu: [f64; 8],
    /// `ν1..ν6` as the matrix elements
    /// `⟨001|ρ|010⟩, ⟨001|ρ|100⟩, ⟨010|ρ|100⟩, ⟨011|ρ|101⟩, ⟨011|ρ|110⟩, ⟨101|ρ|110⟩`.
    pub nu: [C64; 6],
    /// `{ν1, ν6}` same sign, `{ν3, ν4}` same sign, `{ν2, ν5}` opposite sign.
    pub pair_checks: [bool; 3],
    pub pass: bool,
}

const SIGN_TOL: f64 = 1e-12;
const NU_POSITIONS: [(usize, usize); 6] = [(1, 2), (1, 4), (2, 4), (3, 5), (3, 6), (5, 6)];

/// Checks the pair-sign conditions on a three-mode state.
///
/// For complex coherences "same sign" means `Re(ν_a ν_b*) ≥ 0` and
/// "opposite sign" `Re(ν_a ν_b*) ≤ 0`; a zero is compatible with both.
pub fn check_fermionic_consistency(rho_abc: &DensityMatrix) -> Result<ConsistencyReport> {
    if rho_abc.num_subsystems() != 3 {
        return Err(Error::UnsupportedRegister {
            dims: rho_abc.dims().to_vec(),
        });
    }
    let mu: [f64; 8] = std::array::from_fn(|i| rho_abc.get(i, i).re);
    let nu: [C64; 6] = std::array::from_fn(|i| {
        let (r, c) = NU_POSITIONS[i];
        rho_abc.get(r, c)
    });
    let corr = |a: usize, b: usize| (nu[a - 1] * nu[b - 1].conj()).re;
    let pair_checks = [
        corr(1, 6) >= -SIGN_TOL,
        corr(3, 4) >= -SIGN_TOL,
        corr(2, 5) <= SIGN_TOL,
    ];
    let populations_ok =
        mu.iter().all(|&m| m >= -1e-12) && (mu.iter().sum::<f64>() - 1.0).abs() <= 1e-10;
    Ok(ConsistencyReport {
        mu,
        nu,
        pair_checks,
        pass: populations_ok && pair_checks.iter().all(|&ok| ok),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{random_density_matrix, CVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_line(k: i64, l: i64, w: f64) -> BogoliubovSpectrum {
        BogoliubovSpectrum::new(k, BTreeMap::from([(l, w)])).unwrap()
    }

    #[test]
    fn u_factor_examples() {
        assert_eq!(u_factor(0.1, 0.0).unwrap(), 0.0);
        // 2 ln(2.1/1.9) = 0.2001669171139650...
        assert!((u_factor(0.1, 0.200_166_917_113_965_07).unwrap() - 1.0).abs() < 1e-12);
        assert!((u_factor(0.1, 0.100_083_458_556_982_54).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn u_factor_errors() {
        assert!(matches!(u_factor(2.0, 1.0), Err(Error::InvalidH(_))));
        assert!(matches!(u_factor(0.0, 1.0), Err(Error::InertialCavity)));
        assert!(matches!(u_factor(0.1, -1.0), Err(Error::InvalidDuration(_))));
    }

    #[test]
    fn cavity_from_walls_matches_direct_form() {
        // x2/x1 = 2.1/1.9 gives h = 0.1
        let spec = CavitySpec::from_walls(1.9, 2.1, 0.5, 0.2).unwrap();
        assert!((spec.h() - 0.1).abs() < 1e-14);
        assert!((spec.proper_length().unwrap() - 0.2).abs() < 1e-14);
        assert!((spec.acceleration().unwrap() - 0.5).abs() < 1e-14);
        let via_log_ratio = 0.2 / (2.0 * (2.1f64 / 1.9).ln());
        assert!((spec.u() - via_log_ratio).abs() < 1e-12);
        assert!(CavitySpec::from_walls(2.0, 1.0, 0.5, 0.1).is_err());
        assert!(CavitySpec::from_walls(1.0, 2.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn phase_examples() {
        for n in -3..4 {
            assert_eq!(phase_g(n, 0.0, 0.3), c64(1.0, 0.0));
            assert!((phase_g(n, 1.0, 0.5) - c64(-1.0, 0.0)).norm() < 1e-12);
        }
        assert!((phase_g(0, 0.5, 0.5) - c64(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn f_coefficient_examples() {
        let sp = synthetic_spectrum(1, 3, 0.01).unwrap();
        for u in [0.0, 1.0, 2.0] {
            let spec = CavitySpec::new(0.1, 0.5, u).unwrap();
            let (fp, fm) = f_coefficients(&spec, &sp).unwrap();
            assert!(fp.abs() < 1e-28 && fm.abs() < 1e-28);
        }
        let spec = CavitySpec::new(0.1, 0.5, 0.5).unwrap();
        let (fp, fm) = f_coefficients(&spec, &single_line(2, 3, 0.01)).unwrap();
        // 4 sin²(π/2) · 0.01 · 0.1²
        assert!((fp - 4e-4).abs() < 1e-18, "{fp}");
        assert_eq!(fm, 0.0);
    }

    #[test]
    fn f_coefficients_split_by_label_sign() {
        let spec = CavitySpec::new(0.1, 0.5, 0.5).unwrap();
        let (fp, fm) = f_coefficients(&spec, &single_line(0, -1, 0.01)).unwrap();
        assert_eq!(fp, 0.0);
        assert!((fm - 4e-4).abs() < 1e-18);
    }

    #[test]
    fn perturbative_validity_is_enforced() {
        let spec = CavitySpec::new(1.0, 0.5, 0.5).unwrap();
        assert!(matches!(
            f_coefficients(&spec, &single_line(1, 2, 0.2)),
            Err(Error::PerturbativeValidity(_))
        ));
        assert!(matches!(
            f_coefficients(&spec, &single_line(1, 2, 2.0)),
            Err(Error::PerturbativeValidity(_))
        ));
    }

    #[test]
    fn second_order_examples() {
        let sp = synthetic_spectrum(2, 4, 0.01).unwrap();
        let at = |u: f64| second_order_diag(&CavitySpec::new(0.1, 0.5, u).unwrap(), &sp).unwrap();
        assert_eq!(at(0.0), c64(0.0, 0.0));
        assert!(at(1.0).norm() < 1e-12);
        let spec = CavitySpec::new(0.1, 0.5, 0.5).unwrap();
        let line = second_order_diag(&spec, &single_line(2, 3, 0.01)).unwrap();
        let expected = (phase_g(3, 0.5, 0.5) - phase_g(2, 0.5, 0.5)) * 0.01;
        assert!((line - expected).norm() < 1e-16);
    }

    #[test]
    fn channel_at_inertial_and_integer_points() {
        let sp = synthetic_spectrum(1, 4, 0.01).unwrap();
        let id = mode_channel(&CavitySpec::new(0.1, 0.5, 0.0).unwrap(), &sp).unwrap();
        assert_eq!(id.f_plus, 0.0);
        assert_eq!(id.f_minus, 0.0);
        assert_eq!(id.f_coh, c64(1.0, 0.0));
        let flip = mode_channel(&CavitySpec::new(0.1, 0.5, 1.0).unwrap(), &sp).unwrap();
        assert!(flip.f_plus < 1e-28 && flip.f_minus < 1e-28);
        assert!((flip.f_coh - c64(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn choi_deficit_is_exactly_the_truncation_overshoot() {
        let sp = synthetic_spectrum(1, 4, 0.01).unwrap();
        for u in [0.1, 0.25, 0.5, 0.73] {
            let ch = mode_channel(&CavitySpec::new(0.1, 0.5, u).unwrap(), &sp).unwrap();
            let j = ch.choi_matrix();
            let det = (j[(0, 0)] * j[(3, 3)] - j[(0, 3)] * j[(3, 0)]).re;
            let expected = ch.f_plus * ch.f_minus - ch.truncation_overshoot();
            assert!((det - expected).abs() < 1e-15, "u={u}: {det} vs {expected}");
        }
    }

    #[test]
    fn empty_spectrum_gives_identity() {
        let sp = synthetic_spectrum(3, 2, 0.0).unwrap();
        assert!(sp.is_zero());
        let ch = mode_channel(&CavitySpec::new(0.1, 0.5, 0.37).unwrap(), &sp).unwrap();
        assert_eq!(ch.f_plus, 0.0);
        assert_eq!(ch.f_minus, 0.0);
        assert!((ch.f_coh - ch.g_k).norm() < 1e-16);
        assert!((ch.f_coh.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn synthetic_window() {
        let sp = synthetic_spectrum(2, 1, 0.01).unwrap();
        let labels: Vec<i64> = sp.magnitudes().keys().copied().collect();
        assert_eq!(labels, vec![1, 3]);
        assert!(sp.magnitudes().values().all(|&w| w == 0.01));
        let wide = synthetic_spectrum(1, 3, 0.02).unwrap();
        for d in 1..=3i64 {
            assert_eq!(wide.magnitudes()[&(1 + d)], wide.magnitudes()[&(1 - d)]);
        }
        assert!(wide.is_decaying());
        assert!(synthetic_spectrum(1, 0, 0.01).is_err());
    }

    #[test]
    fn spectrum_rejects_diagonal_and_negative() {
        assert!(BogoliubovSpectrum::new(1, BTreeMap::from([(1, 0.1)])).is_err());
        assert!(BogoliubovSpectrum::new(1, BTreeMap::from([(2, -0.1)])).is_err());
        assert!(BogoliubovSpectrum::new(-1, BTreeMap::new()).is_err());
    }

    #[test]
    fn spectrum_file_round_trip() {
        let text = "mode_k = 1\ncomment = \"test\"\n[magnitudes]\n\"0\" = 0.012\n\"2\" = 0.012\n\"-1\" = 0.004\n";
        let sp = parse_spectrum(text, Path::new("t.toml")).unwrap();
        assert_eq!(sp.mode_k(), 1);
        assert_eq!(sp.magnitudes().len(), 3);
        assert_eq!(sp.magnitudes()[&-1], 0.004);
        assert_eq!(sp.l_max(), 2);
    }

    #[test]
    fn spectrum_file_errors_name_the_key() {
        let err = parse_spectrum("mode_k = 1\n[magnitudes]\n\"3\" = -0.5\n", Path::new("t.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("magnitudes.\"3\""), "{err}");
        let err = parse_spectrum("[magnitudes]\n\"3\" = 0.5\n", Path::new("t.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("mode_k"), "{err}");
        let err = parse_spectrum("mode_k = 1\n[magnitudes]\nx = 0.5\n", Path::new("t.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("magnitudes.\"x\""), "{err}");
        let err = parse_spectrum("mode_k = 1\nbogus = 2\n", Path::new("t.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn empty_spectrum_file_is_identity() {
        let sp = parse_spectrum("mode_k = 4\n", Path::new("t.toml")).unwrap();
        assert!(sp.is_zero());
    }

    #[test]
    fn load_spectrum_reports_missing_file() {
        assert!(matches!(
            load_spectrum("/nonexistent/spectrum.toml"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn table_provider_lookup() {
        let p = TableProvider::new([synthetic_spectrum(1, 2, 0.01).unwrap()]);
        assert!(p.spectrum(1).is_ok());
        assert!(matches!(p.spectrum(2), Err(Error::MissingSpectrum(2))));
    }

    #[test]
    fn identity_channel_leaves_state_alone() {
        let rho = random_density_matrix(&mut ChaCha8Rng::seed_from_u64(7), vec![2, 2, 2]).unwrap();
        for t in 0..3 {
            let out = apply_mode_channel(&rho, &ModeChannel::identity(), t).unwrap();
            assert!(out.max_abs_diff(&rho) < 1e-15);
        }
    }

    #[test]
    fn phase_flip_maps_plus_to_minus() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::from_pure(&[c64(r, 0.0), c64(r, 0.0)], vec![2]).unwrap();
        let minus = DensityMatrix::from_pure(&[c64(r, 0.0), c64(-r, 0.0)], vec![2]).unwrap();
        let flip = ModeChannel {
            f_coh: c64(-1.0, 0.0),
            ..ModeChannel::identity()
        };
        assert!(apply_mode_channel(&plus, &flip, 0).unwrap().max_abs_diff(&minus) < 1e-15);
        assert!(apply_mode_channel(&plus, &flip, 1).is_err());
    }

    #[test]
    fn embedded_channel_matches_qubit_action() {
        let ch = mode_channel(
            &CavitySpec::new(0.1, 0.5, 0.3).unwrap(),
            &synthetic_spectrum(1, 3, 0.05).unwrap(),
        )
        .unwrap();
        let rho = random_density_matrix(&mut ChaCha8Rng::seed_from_u64(3), vec![2]).unwrap();
        let out = apply_mode_channel(&rho, &ch, 0).unwrap();
        assert!(crate::qstate::max_abs_diff(out.entries(), &ch.apply_qubit(rho.entries())) < 1e-16);
    }

    #[test]
    fn fermionic_application_agrees_on_first_mode() {
        // no earlier modes means no parity string
        let ch = mode_channel(
            &CavitySpec::new(0.1, 0.5, 0.3).unwrap(),
            &synthetic_spectrum(0, 3, 0.05).unwrap(),
        )
        .unwrap();
        let rho = random_density_matrix(&mut ChaCha8Rng::seed_from_u64(5), vec![2, 2, 2]).unwrap();
        let a = apply_mode_channel(&rho, &ch, 0).unwrap();
        let b = apply_mode_channel_fermionic(&rho, &ch, 0).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-16);
    }

    #[test]
    fn consistency_rejects_same_sign_nu2_nu5() {
        let mut m = CMatrix::from_diagonal(&CVector::from_element(8, c64(0.125, 0.0)));
        for (r, c) in [(1, 4), (3, 6)] {
            m[(r, c)] = c64(0.125, 0.0);
            m[(c, r)] = c64(0.125, 0.0);
        }
        let rho = DensityMatrix::new(m, vec![2, 2, 2]).unwrap();
        let report = check_fermionic_consistency(&rho).unwrap();
        assert_eq!(report.pair_checks, [true, true, false]);
        assert!(!report.pass);
        assert!(check_fermionic_consistency(&DensityMatrix::maximally_mixed(vec![2, 2]).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn channel_is_periodic_up_to_global_phase(u in 0.0f64..1.0, k in 0i64..4, l_max in 1u32..5, strength in 0.0f64..0.05, s in 0.0f64..1.0) {
            let sp = synthetic_spectrum(k, l_max, strength).unwrap();
            let a = mode_channel(&CavitySpec::new(0.1, s, u).unwrap(), &sp).unwrap();
            let b = mode_channel(&CavitySpec::new(0.1, s, u + 1.0).unwrap(), &sp).unwrap();
            let phase = C64::from_polar(1.0, 2.0 * PI * s);
            prop_assert!((a.f_plus - b.f_plus).abs() <= 1e-12);
            prop_assert!((a.f_minus - b.f_minus).abs() <= 1e-12);
            prop_assert!((a.f_coh * phase - b.f_coh).norm() <= 1e-12);
            prop_assert!((a.second_order * phase - b.second_order).norm() <= 1e-12);
        }

        #[test]
        fn leakage_is_symmetric_about_half(u in 0.0f64..1.0, k in 0i64..4, l_max in 1u32..5) {
            let sp = synthetic_spectrum(k, l_max, 0.02).unwrap();
            let a = f_coefficients(&CavitySpec::new(0.1, 0.5, u).unwrap(), &sp).unwrap();
            let b = f_coefficients(&CavitySpec::new(0.1, 0.5, 1.0 - u).unwrap(), &sp).unwrap();
            prop_assert!((a.0 - b.0).abs() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12);
        }

        #[test]
        fn second_order_unitarity_is_exact(u in 0.0f64..2.0, h in 0.0f64..0.2, k in 0i64..4, l_max in 1u32..5, strength in 0.0f64..0.1) {
            let sp = synthetic_spectrum(k, l_max, strength).unwrap();
            let ch = mode_channel(&CavitySpec::new(h, 0.5, u).unwrap(), &sp).unwrap();
            prop_assert!((ch.unitarity_gap() + ch.truncation_overshoot()).abs() <= 1e-14);
            prop_assert!(ch.f_coh.norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn channel_preserves_trace(seed in any::<u64>(), u in 0.0f64..2.0, target in 0usize..3) {
            let ch = mode_channel(
                &CavitySpec::new(0.15, 0.5, u).unwrap(),
                &synthetic_spectrum(1, 4, 0.03).unwrap(),
            ).unwrap();
            let rho = random_density_matrix(&mut ChaCha8Rng::seed_from_u64(seed), vec![2, 2, 2]).unwrap();
            for out in [apply_mode_channel(&rho, &ch, target).unwrap(), apply_mode_channel_fermionic(&rho, &ch, target).unwrap()] {
                prop_assert!((out.trace() - rho.trace()).abs() <= 1e-12);
            }
        }
    }
}
