//! CSV records written by the commands, and readers for them.
//!
//! `results.csv` columns: molecule, mode, lambda, method, layers, state,
//! energy, s_squared, overlap_checks, cumulative_overlap_checks, restart,
//! converged, n_evals, wall_time_s. Rows are sorted by (molecule, mode,
//! lambda, method, layers, state). `wall_time_s` is the only column that
//! varies between identical runs.
//!
//! `plot_data.csv` adds the exact reference energy for each state:
//! molecule, mode, lambda, method, layers, state, energy, reference, error,
//! s_squared.
//!
//! `reference.csv`: molecule, mode, lambda, n_alpha, n_beta, spin, state,
//! energy, complete. An infeasible sector gets one row with an empty energy
//! and `complete = false`.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub molecule: String,
    pub mode: String,
    pub lambda: f64,
    pub method: String,
    pub layers: usize,
    pub state: usize,
    pub energy: f64,
    pub s_squared: f64,
    pub overlap_checks: u64,
    pub cumulative_overlap_checks: u64,
    pub restart: usize,
    pub converged: bool,
    pub n_evals: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub molecule: String,
    pub mode: String,
    pub lambda: f64,
    pub method: String,
    pub layers: usize,
    pub state: usize,
    pub energy: f64,
    pub reference: Option<f64>,
    pub error: Option<f64>,
    pub s_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub molecule: String,
    pub mode: String,
    pub lambda: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub spin: f64,
    pub state: usize,
    pub energy: Option<f64>,
    pub complete: bool,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![ReferenceRow {
            molecule: "lih".into(),
            mode: "bond".into(),
            lambda: -0.5,
            n_alpha: 1,
            n_beta: 1,
            spin: 0.0,
            state: 0,
            energy: Some(-7.873974905343249),
            complete: true,
        }];
        write_csv(&path, &rows).unwrap();
        assert_eq!(read_csv::<ReferenceRow>(&path).unwrap(), rows);
    }
}
