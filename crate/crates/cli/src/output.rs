use std::fs;
use std::io::Write;
use std::path::Path;

use cavity_uncertainty::protocol::{EmpiricalReport, GameReport};

use crate::CliError;

pub fn reports_csv(reports: &[GameReport]) -> String {
    let mut out = String::with_capacity(64 + reports.len() * 256);
    out.push_str(GameReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub const SIMULATION_CSV_HEADER: &str =
    "rounds,seed,u_b,u_c,n_sx_plus,n_sx_minus,n_sy_plus,n_sy_minus,H_sx_C_empirical,H_sy_B_empirical,H_sx_C,H_sy_B";

pub fn simulation_csv(r: &EmpiricalReport) -> String {
    let float = |x: f64| format!("{x:.16e}");
    let maybe = |x: Option<f64>| x.map(float).unwrap_or_default();
    let row = [
        r.rounds.to_string(),
        r.seed.to_string(),
        float(r.u_b),
        float(r.u_c),
        r.sigma_x_counts[0].to_string(),
        r.sigma_x_counts[1].to_string(),
        r.sigma_y_counts[0].to_string(),
        r.sigma_y_counts[1].to_string(),
        maybe(r.h_sx_c_empirical),
        maybe(r.h_sy_b_empirical),
        float(r.h_sx_c_analytic),
        float(r.h_sy_b_analytic),
    ];
    format!("{SIMULATION_CSV_HEADER}\n{}\n", row.join(","))
}

pub fn json<T: serde::Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Invariant(format!("failed to serialize output: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes to `path`, or stdout when there is none.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(path) => {
            fs::write(path, contents)
                .map_err(|e| CliError::Io(format!("failed to write {}: {e}", path.display())))?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("failed to write to stdout: {e}")))
        }
    }
}
