//! Single solves and convergence sweeps.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::Experiment;
use crate::lattice::Lattice;
use crate::manufactured::{exact_coefficients, ManufacturedSource};
use crate::metrics::{final_error, order_kappa};
use crate::operator::{QOperator, SparseCoefficient};
use crate::spectral::SpectralField;
use crate::stepper::{run, RunOptions, StepStats, TimeGrid};

/// One line of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    #[serde(rename = "N")]
    pub n_modes: usize,
    pub tau: f64,
    #[serde(rename = "M")]
    pub steps: usize,
    pub err: f64,
    /// Order against the previous row of a time sweep. `None` on the first
    /// row, `NaN` when an error underflowed to zero.
    #[serde(serialize_with = "serialize_kappa")]
    pub kappa: Option<f64>,
    pub wall_seconds: f64,
    pub iters: usize,
}

fn serialize_kappa<S: serde::Serializer>(k: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match k {
        None => s.serialize_none(),
        Some(x) if x.is_nan() => s.serialize_str("undefined"),
        Some(x) => s.serialize_f64(*x),
    }
}

/// Numerical solution at `t_M` together with its measurements.
#[derive(Clone, Debug)]
pub struct Solved {
    pub solution: SpectralField,
    pub stats: StepStats,
    pub row: ResultRow,
}

/// Builds the lattice, operator and source for `N`, advances to `T` with
/// step `tau`, and measures the final error. Only the stepping loop is
/// timed.
pub fn solve(exp: &Experiment, n_modes: usize, tau: f64) -> Result<Solved> {
    let lattice = Arc::new(Lattice::new(n_modes, exp.projection.clone())?);
    let alpha = SparseCoefficient::from_modes(lattice.clone(), &exp.alpha)?;
    let op = QOperator::new(alpha, exp.convolution);
    let source = ManufacturedSource::new(&exp.solution, &exp.alpha, &lattice)?;
    let u0 = exact_coefficients(&exp.solution, &lattice, 0.0)?;
    let grid = TimeGrid::from_final_time(exp.final_time, tau)?;
    let opts = RunOptions {
        first_step: exp.first_step,
        snapshot_stride: None,
    };

    let start = Instant::now();
    let out = run(&op, &u0, &source, &grid, &exp.solver, &opts)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let err = final_error(&out.solution, &exp.solution, grid.final_time(), exp.error_measure)?;
    let row = ResultRow {
        n_modes,
        tau,
        steps: grid.steps(),
        err,
        kappa: None,
        wall_seconds,
        iters: out.stats.total_iterations(),
    };
    Ok(Solved {
        solution: out.solution,
        stats: out.stats,
        row,
    })
}

pub fn run_single(exp: &Experiment, n_modes: usize, tau: f64) -> Result<ResultRow> {
    Ok(solve(exp, n_modes, tau)?.row)
}

/// One row per `N` at the single configured `tau`.
pub fn space_sweep(exp: &Experiment) -> Result<Vec<ResultRow>> {
    let [tau] = exp.tau_list[..] else {
        return Err(Error::Config(format!(
            "tau_list: a space sweep needs exactly one step size, got {}",
            exp.tau_list.len()
        )));
    };
    if exp.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "N_list: must be strictly increasing for a space sweep".into(),
        ));
    }
    exp.n_list.iter().map(|&n| run_single(exp, n, tau)).collect()
}

/// One row per `tau` at the single configured `N`, with pairwise orders.
pub fn time_sweep(exp: &Experiment) -> Result<Vec<ResultRow>> {
    let [n_modes] = exp.n_list[..] else {
        return Err(Error::Config(format!(
            "N_list: a time sweep needs exactly one N, got {}",
            exp.n_list.len()
        )));
    };
    if exp.tau_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "tau_list: must be strictly decreasing for a time sweep".into(),
        ));
    }
    let mut rows: Vec<ResultRow> = Vec::with_capacity(exp.tau_list.len());
    for &tau in &exp.tau_list {
        let mut row = run_single(exp, n_modes, tau)?;
        if let Some(prev) = rows.last() {
            row.kappa = Some(match order_kappa(prev.err, prev.tau, row.err, row.tau) {
                Ok(k) => k,
                Err(Error::UndefinedOrder(_)) => f64::NAN,
                Err(e) => return Err(e),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}
