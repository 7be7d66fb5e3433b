//! Configured sweeps over scenarios and SNR grids, written out as CSV.

mod config;
mod run;
mod table;

use std::path::PathBuf;

pub use config::{
    from_table, parse_config, BoundsConfig, EnergyMode, ExperimentConfig, OracleConfig, Preset,
    ScenarioConfig, SimulationConfig, SnrGrid, Sweep, SweepValue, SweepVariable, TxShape,
    Violation, DEFAULT_SEED,
};
pub use run::run_experiment;
pub use table::{read_csv, write_csv, ResultRow, ResultTable, COLUMNS, SCHEMA_LINE};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("sweep {sweep_value}, SNR {snr_db} dB: {source}")]
    Compute {
        sweep_value: String,
        snr_db: f64,
        source: crate::Error,
    },
    #[error("CSV: {0}")]
    Csv(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}
