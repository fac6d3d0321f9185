//! Entropic uncertainty with quantum memories carried by accelerated cavities.
//!
//! ```
//! use cavity_uncertainty::protocol::{game_report, GameConfig};
//!
//! let report = game_report(&GameConfig::default().at(0.25, 0.5)).unwrap();
//! assert!((report.slack - 1.0).abs() < 1e-9);
//! ```

pub mod cavity;
pub mod entropic_ur;
pub mod error;
pub mod protocol;
pub mod qstate;

pub use error::{Error, Result};
pub use qstate::{DensityMatrix, MeasurementBasis, C64};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/uncertainty.md")]
    mod uncertainty {}
    #[doc = include_str!("../../../book/src/cavity.md")]
    mod cavity {}
    #[doc = include_str!("../../../book/src/game.md")]
    mod game {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
