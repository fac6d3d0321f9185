use std::path::{Path, PathBuf};

use cavity_uncertainty::cavity::CavitySpec;
use cavity_uncertainty::protocol::{GameConfig, Grid, SpectrumSource};
use cavity_uncertainty::Error as CoreError;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to the built-in defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct Options {
    /// TOML file with any of the options below (flags win)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Dimensionless acceleration h = aL, in (0, 2)
    #[arg(long = "h", value_name = "H")]
    pub h: Option<f64>,

    /// Mode index in Bob's cavity
    #[arg(long)]
    pub k_bob: Option<i64>,

    /// Mode index in Charlie's cavity
    #[arg(long)]
    pub k_charlie: Option<i64>,

    /// Phase shift s in [0, 1)
    #[arg(long = "s", value_name = "S")]
    pub s: Option<f64>,

    /// Bob's acceleration factor (report, simulate)
    #[arg(long)]
    pub u_b: Option<f64>,

    /// Charlie's acceleration factor (report, simulate)
    #[arg(long)]
    pub u_c: Option<f64>,

    /// Synthetic spectrum strength
    #[arg(long)]
    pub strength: Option<f64>,

    /// Synthetic spectrum cutoff |l - k| <= L
    #[arg(long)]
    pub l_max: Option<u32>,

    /// Spectrum file for Bob's mode (requires --spectrum-charlie)
    #[arg(long, value_name = "FILE")]
    pub spectrum_bob: Option<PathBuf>,

    /// Spectrum file for Charlie's mode (requires --spectrum-bob)
    #[arg(long, value_name = "FILE")]
    pub spectrum_charlie: Option<PathBuf>,

    /// Give sigma_x to Bob and sigma_y to Charlie
    #[arg(long)]
    pub swap_roles: bool,

    /// Sweep grid as NxM
    #[arg(long, value_name = "NxM")]
    pub grid: Option<String>,

    /// Upper end of both sweep axes
    #[arg(long)]
    pub u_max: Option<f64>,

    /// Output file (stdout if omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Monte Carlo rounds
    #[arg(long)]
    pub rounds: Option<u64>,
}

/// On-disk mirror of [`Options`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    h: Option<f64>,
    k_bob: Option<i64>,
    k_charlie: Option<i64>,
    s: Option<f64>,
    u_b: Option<f64>,
    u_c: Option<f64>,
    strength: Option<f64>,
    l_max: Option<u32>,
    spectrum_bob: Option<PathBuf>,
    spectrum_charlie: Option<PathBuf>,
    swap_roles: Option<bool>,
    grid: Option<String>,
    u_max: Option<f64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
    rounds: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("failed to read {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.spectrum_bob, &mut cfg.spectrum_charlie, &mut cfg.out] {
            if let Some(rel) = p.as_ref().filter(|p| p.is_relative()) {
                *p = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub game: GameConfig,
    pub grid: Grid,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: u64,
    pub rounds: u64,
}

pub const DEFAULT_GRID: (usize, usize) = (101, 101);
pub const DEFAULT_ROUNDS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 0;

pub fn parse_grid(text: &str) -> Result<(usize, usize), String> {
    let (n, m) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NxM, got {text:?}"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("expected NxM with integer N and M, got {text:?}"))
    };
    Ok((parse(n)?, parse(m)?))
}

/// Picks the flag value over the file value and remembers where it came from
/// so errors can name it.
fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, name: &str) -> (Option<T>, String) {
    match (flag, file) {
        (Some(v), _) => (Some(v.clone()), format!("--{}", name.replace('_', "-"))),
        (None, Some(v)) => (Some(v.clone()), format!("`{name}` in config file")),
        (None, None) => (None, format!("--{}", name.replace('_', "-"))),
    }
}

fn invalid(source: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid value for {source}: {reason}"))
}

/// Merges flags over the optional config file over the defaults and
/// validates every field.
pub fn parse_config(opts: &Options) -> Result<RunConfig, CliError> {
    let file = match &opts.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let defaults = GameConfig::default();

    let (h, h_src) = pick(&opts.h, &file.h, "h");
    let h = h.unwrap_or(defaults.h);
    if !(h > 0.0 && h < 2.0) {
        return Err(invalid(&h_src, CoreError::InvalidH(h)));
    }
    let (s, s_src) = pick(&opts.s, &file.s, "s");
    let s = s.unwrap_or(defaults.s);
    CavitySpec::new(h, s, 0.0).map_err(|e| invalid(&s_src, e))?;

    let mut u = [0.0; 2];
    for (slot, (flag, from_file, name)) in u
        .iter_mut()
        .zip([(&opts.u_b, &file.u_b, "u_b"), (&opts.u_c, &file.u_c, "u_c")])
    {
        let (value, src) = pick(flag, from_file, name);
        *slot = value.unwrap_or(0.0);
        CavitySpec::new(h, s, *slot).map_err(|e| invalid(&src, e))?;
    }

    let mut k = [defaults.k_bob, defaults.k_charlie];
    for (slot, (flag, from_file, name)) in k
        .iter_mut()
        .zip([(&opts.k_bob, &file.k_bob, "k_bob"), (&opts.k_charlie, &file.k_charlie, "k_charlie")])
    {
        let (value, src) = pick(flag, from_file, name);
        if let Some(v) = value {
            if v < 0 {
                return Err(invalid(&src, format!("mode index must be non-negative, got {v}")));
            }
            *slot = v;
        }
    }

    let (bob_file, _) = pick(&opts.spectrum_bob, &file.spectrum_bob, "spectrum_bob");
    let (charlie_file, _) = pick(&opts.spectrum_charlie, &file.spectrum_charlie, "spectrum_charlie");
    let spectrum = match (bob_file, charlie_file) {
        (Some(bob), Some(charlie)) => SpectrumSource::Files { bob, charlie },
        (None, None) => {
            let (strength, strength_src) = pick(&opts.strength, &file.strength, "strength");
            let (l_max, l_src) = pick(&opts.l_max, &file.l_max, "l_max");
            let SpectrumSource::Synthetic {
                l_max: default_l,
                strength: default_strength,
            } = SpectrumSource::default()
            else {
                unreachable!("default spectrum is synthetic")
            };
            let strength = strength.unwrap_or(default_strength);
            if !(strength >= 0.0 && strength.is_finite()) {
                return Err(invalid(&strength_src, format!("must be a non-negative number, got {strength}")));
            }
            let l_max = l_max.unwrap_or(default_l);
            if l_max == 0 {
                return Err(invalid(&l_src, "must be at least 1"));
            }
            SpectrumSource::Synthetic { l_max, strength }
        }
        _ => {
            return Err(CliError::Usage(
                "--spectrum-bob and --spectrum-charlie must be given together".into(),
            ))
        }
    };

    let (grid, grid_src) = pick(&opts.grid, &file.grid, "grid");
    let (n_b, n_c) = match grid {
        Some(text) => parse_grid(&text).map_err(|e| invalid(&grid_src, e))?,
        None => DEFAULT_GRID,
    };
    let (u_max, u_max_src) = pick(&opts.u_max, &file.u_max, "u_max");
    let grid = Grid {
        n_b,
        n_c,
        u_max: u_max.unwrap_or(1.0),
    };
    grid.validate().map_err(|e| match e {
        CoreError::InvalidGrid(msg) if msg.starts_with("u_max") => invalid(&u_max_src, msg),
        other => invalid(&grid_src, other),
    })?;

    let (rounds, rounds_src) = pick(&opts.rounds, &file.rounds, "rounds");
    let rounds = rounds.unwrap_or(DEFAULT_ROUNDS);
    if rounds == 0 {
        return Err(invalid(&rounds_src, CoreError::ZeroRounds));
    }

    Ok(RunConfig {
        game: GameConfig {
            h,
            k_bob: k[0],
            k_charlie: k[1],
            s,
            u_b: u[0],
            u_c: u[1],
            spectrum,
            swap_roles: opts.swap_roles || file.swap_roles.unwrap_or(false),
        },
        grid,
        out: opts.out.clone().or(file.out),
        format: opts.format.or(file.format),
        seed: opts.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("101x101"), Ok((101, 101)));
        assert_eq!(parse_grid("3X7"), Ok((3, 7)));
        assert!(parse_grid("10").is_err());
        assert!(parse_grid("axb").is_err());
    }

    #[test]
    fn defaults_are_the_figure_parameters() {
        let cfg = parse_config(&Options::default()).unwrap();
        assert_eq!(cfg.game, GameConfig::default());
        assert_eq!((cfg.grid.n_b, cfg.grid.n_c), DEFAULT_GRID);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "h = 0.15\ns = 0.25\ngrid = \"5x6\"\nout = \"fig.csv\"\n").unwrap();
        let opts = Options {
            config: Some(path),
            h: Some(0.05),
            ..Options::default()
        };
        let cfg = parse_config(&opts).unwrap();
        assert_eq!(cfg.game.h, 0.05);
        assert_eq!(cfg.game.s, 0.25);
        assert_eq!((cfg.grid.n_b, cfg.grid.n_c), (5, 6));
        assert_eq!(cfg.out, Some(dir.path().join("fig.csv")));
    }

    #[test]
    fn errors_name_the_source() {
        let opts = Options {
            h: Some(3.0),
            ..Options::default()
        };
        let msg = parse_config(&opts).unwrap_err().to_string();
        assert!(msg.contains("--h") && msg.contains("h must lie in (0, 2)"), "{msg}");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "s = 1.5\n").unwrap();
        let msg = parse_config(&Options {
            config: Some(path),
            ..Options::default()
        })
        .unwrap_err()
        .to_string();
        assert!(msg.contains("`s` in config file"), "{msg}");
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "acceleration = 1.0\n").unwrap();
        let err = parse_config(&Options {
            config: Some(path),
            ..Options::default()
        })
        .unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn half_a_spectrum_pair_is_rejected() {
        let opts = Options {
            spectrum_bob: Some("bob.toml".into()),
            ..Options::default()
        };
        assert!(matches!(parse_config(&opts), Err(CliError::Usage(_))));
    }
}
