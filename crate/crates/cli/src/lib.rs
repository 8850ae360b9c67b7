//! Command-line driver for `heatlayer`: single evaluations, convergence
//! studies and the figure sweeps, written as CSV.

pub mod config;
pub mod experiment;
pub mod presets;

use std::path::Path;

use heatlayer::potentials::PotentialError;
use heatlayer::quadrature::QuadratureError;
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, Ini};
pub use experiment::{run, write_csv, ConvergenceRecord, RunOptions, Status, Study};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_STRICT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid override `{0}`, expected `section.key=value`")]
    BadOverride(String),
    #[error("unknown figure {0}, expected 1, 2 or 3")]
    UnknownFigure(u8),
    #[error("unknown convergence preset `{0}`, expected one of: {list}", list = presets::CONVERGENCE_PRESETS.join(", "))]
    UnknownPreset(String),
    #[error("either --config or --preset is required")]
    NoStudy,
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::ReadConfig { .. }
            | CliError::BadOverride(_)
            | CliError::UnknownFigure(_)
            | CliError::UnknownPreset(_)
            | CliError::NoStudy => EXIT_CONFIG,
            CliError::Potential(_) | CliError::Quadrature(_) => EXIT_NUMERICAL,
            CliError::Io(_) | CliError::Csv(_) | CliError::ThreadPool(_) => 1,
        }
    }
}

/// Reads a config file and applies `section.key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.display().to_string(),
        source,
    })?;
    let mut ini = Ini::parse(&text)?;
    for o in overrides {
        let (lhs, value) = o.split_once('=').ok_or_else(|| CliError::BadOverride(o.clone()))?;
        let (section, key) = lhs.trim().split_once('.').ok_or_else(|| CliError::BadOverride(o.clone()))?;
        ini.set(section.trim(), key.trim(), value.trim());
    }
    Ok(ExperimentConfig::from_ini(ini)?)
}

/// Exit code for a finished run: numerical failures first, then resolution
/// warnings when `strict`.
pub fn outcome(rows: &[ConvergenceRecord], strict: bool) -> i32 {
    if rows
        .iter()
        .any(|r| matches!(r.status, Status::OracleDisagreement | Status::EvalError))
    {
        EXIT_NUMERICAL
    } else if strict && rows.iter().any(|r| r.status == Status::Unresolved) {
        EXIT_STRICT
    } else {
        EXIT_OK
    }
}

/// One human-readable line per evaluation.
pub fn format_eval(row: &ConvergenceRecord, with_oracle: bool) -> String {
    let mut line = match row.n {
        Some(n) => format!("{}({n})", row.method),
        None => row.method.clone(),
    };
    line += &format!("  dt={:.16e}  value={:.16e}", row.dt, row.value);
    if with_oracle {
        line += &format!(
            "  oracle={:.16e}  abs_err={:.3e}  rel_err={:.3e}",
            row.oracle, row.abs_err, row.rel_err
        );
    }
    if row.status != Status::Ok {
        line += &format!("  [{}]", row.status.as_str());
    }
    if let Some(note) = &row.note {
        line += &format!("  {note}");
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::UnknownFigure(7).exit_code(), EXIT_CONFIG);
        assert_eq!(
            CliError::Potential(PotentialError::InvalidRequest("x".into())).exit_code(),
            EXIT_NUMERICAL
        );
    }

    #[test]
    fn run_outcomes() {
        let row = |status| ConvergenceRecord {
            case: "c".into(),
            method: "hybrid".into(),
            n: Some(16),
            dt: 0.01,
            value: 1.0,
            oracle: 1.0,
            abs_err: 0.0,
            rel_err: 0.0,
            status,
            wall_time: 0.0,
            note: None,
        };
        let unresolved = [row(Status::Ok), row(Status::Unresolved), row(Status::Inaccurate)];
        assert_eq!(outcome(&unresolved, false), EXIT_OK);
        assert_eq!(outcome(&unresolved, true), EXIT_STRICT);
        let failed = [row(Status::Unresolved), row(Status::OracleDisagreement)];
        assert_eq!(outcome(&failed, true), EXIT_NUMERICAL);
        assert_eq!(outcome(&[row(Status::EvalError)], false), EXIT_NUMERICAL);
    }

    #[test]
    fn override_syntax() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ini");
        std::fs::write(
            &path,
            "[geometry]\nkind = segment\n[density]\nkind = constant\n[target]\nx = 0\ny = 0\n[time]\ndt = 0.01\n[run]\nmethods = hybrid(16)\n",
        )
        .unwrap();
        let c = load_config(&path, &["time.dt = 0.02".into()]).unwrap();
        assert_eq!(c.dts, vec![0.02]);
        assert!(matches!(
            load_config(&path, &["dt=0.02".into()]),
            Err(CliError::BadOverride(_))
        ));
        assert!(matches!(
            load_config(&dir.path().join("missing.ini"), &[]),
            Err(CliError::ReadConfig { .. })
        ));
    }
}
