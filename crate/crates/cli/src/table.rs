//! Versioned sweep tables.
//!
//! ```text
//! # kirchhoff-sweep v1
//! # meta {"config":{...}}
//! a,e_total,kinetic,kirchhoff,potential,interaction,mu,epsilon,z,steps,converged
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a table back
//! recovers every value bit for bit.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use kirchhoff_core::minimizer::MinimizerResult;

use crate::config::ExperimentConfig;

pub const VERSION_LINE: &str = "# kirchhoff-sweep v1";
const META_PREFIX: &str = "# meta ";
pub const COLUMNS: [&str; 11] = [
    "a",
    "e_total",
    "kinetic",
    "kirchhoff",
    "potential",
    "interaction",
    "mu",
    "epsilon",
    "z",
    "steps",
    "converged",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    pub e_total: f64,
    pub kinetic: f64,
    pub kirchhoff: f64,
    pub potential: f64,
    pub interaction: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub z: f64,
    pub steps: usize,
    pub converged: bool,
}

impl From<&MinimizerResult> for SweepRow {
    fn from(r: &MinimizerResult) -> Self {
        Self {
            a: r.a,
            e_total: r.energy.total,
            kinetic: r.energy.kinetic,
            kirchhoff: r.energy.kirchhoff,
            potential: r.energy.potential,
            interaction: r.energy.interaction,
            mu: r.multiplier.mu,
            epsilon: r.epsilon,
            z: r.z_scalar(),
            steps: r.steps,
            converged: r.converged,
        }
    }
}

/// Provenance stored in the table header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableMeta {
    pub config: ExperimentConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Format(String),
}

pub fn write_table<W: Write>(mut out: W, meta: &TableMeta, rows: &[SweepRow]) -> Result<(), TableError> {
    let meta_json = serde_json::to_string(meta).map_err(|e| TableError::Format(e.to_string()))?;
    writeln!(out, "{VERSION_LINE}")?;
    writeln!(out, "{META_PREFIX}{meta_json}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<R: BufRead>(mut input: R) -> Result<(TableMeta, Vec<SweepRow>), TableError> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != VERSION_LINE {
        return Err(TableError::Format(format!(
            "expected `{VERSION_LINE}` on the first line, found `{}`",
            line.trim_end()
        )));
    }
    line.clear();
    input.read_line(&mut line)?;
    let meta_json = line
        .trim_end()
        .strip_prefix(META_PREFIX)
        .ok_or_else(|| TableError::Format("second line must hold the `# meta` record".into()))?;
    let meta: TableMeta = serde_json::from_str(meta_json).map_err(|e| TableError::Format(e.to_string()))?;
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(TableError::Format(format!("unexpected columns: {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let rows = r.deserialize().collect::<Result<Vec<SweepRow>, _>>()?;
    Ok((meta, rows))
}
