//! Time integration: a first step from the initial condition, then the BDF2
//! recurrence `(3I + 2τQ) u^m = 4u^{m-1} - u^{m-2} + 2τ f^m` with one
//! Hermitian positive-definite solve per step.

use nalgebra::{Cholesky, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{QOperator, DENSE_LIMIT};
use crate::spectral::SpectralField;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Uniform time grid `t_m = m τ`, `m = 0..=M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("tau must be positive, got {tau}")));
        }
        if steps == 0 {
            return Err(Error::InvalidTimeGrid("need at least one step".into()));
        }
        Ok(Self { tau, steps })
    }

    /// `M = round(T/τ)`, rejecting grids where `Mτ` misses `T` by more than
    /// `1e-9 T`.
    pub fn from_final_time(final_time: f64, tau: f64) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("tau must be positive, got {tau}")));
        }
        let steps = (final_time / tau).round();
        if steps < 1.0 || (steps * tau - final_time).abs() > 1e-9 * final_time {
            return Err(Error::InvalidTimeGrid(format!(
                "T = {final_time:e} is not an integer multiple of tau = {tau:e}"
            )));
        }
        Self::new(tau, steps as usize)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `M`
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.tau
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.steps)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Conjugate gradients on the shifted system, matrix free.
    #[default]
    Iterative,
    /// Dense Cholesky factorisation, computed once per run.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub method: SolverMethod,
    pub rel_tol: f64,
    /// `None` selects `10 √D`.
    pub max_iter: Option<usize>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Iterative,
            rel_tol: 1e-13,
            max_iter: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self, size: usize) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidSolver(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidSolver("max_iter must be positive".into()));
        }
        if self.method == SolverMethod::Direct && size > DENSE_LIMIT {
            return Err(Error::TooLargeForDense {
                size,
                limit: DENSE_LIMIT,
            });
        }
        Ok(())
    }

    pub fn max_iter_for(&self, size: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((10.0 * (size as f64).sqrt()).ceil() as usize).max(10))
    }
}

/// How `u^1` is obtained from `u^0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStep {
    /// `u^1 = u^0 - τ Q u^0 + τ f^0`.
    #[default]
    #[serde(rename = "paper_explicit", alias = "explicit")]
    Explicit,
    /// `(I + τQ) u^1 = u^0 + τ f^1`.
    Implicit,
}

/// Source coefficients `F(t)` on the operator's lattice.
pub trait SourceProvider: Sync {
    fn source(&self, t: f64) -> SpectralField;
}

impl<F> SourceProvider for F
where
    F: Fn(f64) -> SpectralField + Sync,
{
    fn source(&self, t: f64) -> SpectralField {
        self(t)
    }
}

/// `f = 0`.
pub struct ZeroSource(pub std::sync::Arc<crate::lattice::Lattice>);

impl SourceProvider for ZeroSource {
    fn source(&self, _t: f64) -> SpectralField {
        SpectralField::zeros(self.0.clone())
    }
}

/// Outcome of one linear solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// True relative residual `‖b - Ax‖ / ‖b‖` of the returned solution.
    pub residual: f64,
}

/// Per-step solver statistics of a run. Entry `m - 1` belongs to `u^m`;
/// an explicit first step records zero iterations and zero residual.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

impl StepStats {
    fn push(&mut self, s: &SolveStats) {
        self.iterations.push(s.iterations);
        self.residuals.push(s.residual);
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn check_lattice(op: &QOperator, f: &SpectralField) -> Result<()> {
    let lat = op.lattice();
    if std::sync::Arc::ptr_eq(lat, f.lattice()) || **lat == **f.lattice() {
        Ok(())
    } else {
        Err(Error::LatticeMismatch)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solver for `(shift I + scale Q) x = b`, reusable across steps.
pub struct ShiftedSolver<'a> {
    op: &'a QOperator,
    shift: f64,
    scale: f64,
    cfg: SolveConfig,
    factor: Option<Cholesky<Complex64, Dyn>>,
}

impl<'a> ShiftedSolver<'a> {
    pub fn new(op: &'a QOperator, shift: f64, scale: f64, cfg: SolveConfig) -> Result<Self> {
        cfg.validate(op.size())?;
        if !(shift > 0.0) || !(scale >= 0.0) {
            return Err(Error::InvalidSolver(format!(
                "need shift > 0 and scale >= 0, got {shift} and {scale}"
            )));
        }
        let factor = match cfg.method {
            SolverMethod::Iterative => None,
            SolverMethod::Direct => {
                let mut a = op.assemble_dense()? * Complex64::new(scale, 0.0);
                for i in 0..op.size() {
                    a[(i, i)] += shift;
                }
                Some(Cholesky::new(a).ok_or(Error::NotPositiveDefinite)?)
            }
        };
        Ok(Self {
            op,
            shift,
            scale,
            cfg,
            factor,
        })
    }

    /// `out = (shift I + scale Q) x`
    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.op.apply_into(x, out)?;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = *o * self.scale + xi * self.shift;
        }
        Ok(())
    }

    fn residual_norm(&self, x: &[Complex64], b: &[Complex64], scratch: &mut [Complex64]) -> Result<f64> {
        self.apply(x, scratch)?;
        Ok(b.iter()
            .zip(scratch.iter())
            .map(|(bi, ai)| (bi - ai).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn solve(&self, rhs: &SpectralField, guess: Option<&SpectralField>) -> Result<(SpectralField, SolveStats)> {
        check_lattice(self.op, rhs)?;
        if !rhs.is_finite() {
            return Err(Error::NonFinite("right-hand side"));
        }
        let b = rhs.coeffs();
        let size = b.len();
        let b_norm = norm(b);
        if b_norm == 0.0 {
            return Ok((SpectralField::zeros(rhs.lattice().clone()), SolveStats::default()));
        }
        let mut scratch = vec![ZERO; size];

        if let Some(factor) = &self.factor {
            let x = factor.solve(&DVector::from_column_slice(b));
            let x = x.as_slice().to_vec();
            let residual = self.residual_norm(&x, b, &mut scratch)? / b_norm;
            let field = SpectralField::new(rhs.lattice().clone(), x)?;
            return Ok((
                field,
                SolveStats {
                    iterations: 0,
                    residual,
                },
            ));
        }

        let mut x = match guess {
            Some(g) => {
                check_lattice(self.op, g)?;
                g.coeffs().to_vec()
            }
            None => vec![ZERO; size],
        };
        let (x, stats) = self.conjugate_gradient(b, b_norm, &mut x, &mut scratch)?;
        Ok((SpectralField::new(rhs.lattice().clone(), x)?, stats))
    }

    fn conjugate_gradient(
        &self,
        b: &[Complex64],
        b_norm: f64,
        x: &mut [Complex64],
        ap: &mut [Complex64],
    ) -> Result<(Vec<Complex64>, SolveStats)> {
        let size = b.len();
        let tol = self.cfg.rel_tol;
        let max_iter = self.cfg.max_iter_for(size);
        let mut history = Vec::new();
        let mut iterations = 0;

        // Restart from the true residual whenever the recursive one claims
        // convergence but the true one disagrees.
        loop {
            self.apply(x, ap)?;
            let mut r: Vec<Complex64> = b.iter().zip(ap.iter()).map(|(bi, ai)| bi - ai).collect();
            let mut rr = r.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let true_res = rr.sqrt() / b_norm;
            history.push(true_res);
            if true_res <= tol {
                return Ok((
                    x.to_vec(),
                    SolveStats {
                        iterations,
                        residual: true_res,
                    },
                ));
            }
            if iterations >= max_iter {
                return Err(Error::NotConverged {
                    iterations,
                    residual: true_res,
                    history,
                });
            }
            let mut p = r.clone();
            while iterations < max_iter {
                self.apply(&p, ap)?;
                let pap = dot(&p, ap).re;
                iterations += 1;
                if !(pap > 0.0) || !pap.is_finite() {
                    return Err(Error::Breakdown {
                        iteration: iterations,
                        residual: rr.sqrt() / b_norm,
                        history,
                    });
                }
                let alpha = rr / pap;
                for ((xi, pi), (ri, ai)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(ap.iter())) {
                    *xi += pi * alpha;
                    *ri -= ai * alpha;
                }
                let rr_new = r.iter().map(|z| z.norm_sqr()).sum::<f64>();
                history.push(rr_new.sqrt() / b_norm);
                if rr_new.sqrt() <= tol * b_norm {
                    break;
                }
                let beta = rr_new / rr;
                for (pi, ri) in p.iter_mut().zip(&r) {
                    *pi = ri + *pi * beta;
                }
                rr = rr_new;
            }
        }
    }
}

/// `(shift I + scale Q) x = rhs` for Hermitian positive semidefinite `Q`.
pub fn solve_hpd(
    op: &QOperator,
    shift: f64,
    scale: f64,
    rhs: &SpectralField,
    cfg: &SolveConfig,
) -> Result<(SpectralField, SolveStats)> {
    ShiftedSolver::new(op, shift, scale, *cfg)?.solve(rhs, None)
}

/// Explicit first step `u^1 = u^0 - τ Q u^0 + τ f(0)`.
pub fn step_first(op: &QOperator, u0: &SpectralField, f: &dyn SourceProvider, tau: f64) -> Result<SpectralField> {
    check_lattice(op, u0)?;
    let f0 = f.source(0.0);
    check_lattice(op, &f0)?;
    let qu = op.apply(u0)?;
    let tau_c = Complex64::new(tau, 0.0);
    let coeffs = u0
        .coeffs()
        .iter()
        .zip(qu.coeffs())
        .zip(f0.coeffs())
        .map(|((u, q), s)| u - q * tau_c + s * tau_c)
        .collect();
    SpectralField::new(u0.lattice().clone(), coeffs)
}

/// Implicit first step `(I + τQ) u^1 = u^0 + τ f(τ)`.
pub fn step_first_implicit(
    op: &QOperator,
    u0: &SpectralField,
    f: &dyn SourceProvider,
    tau: f64,
    cfg: &SolveConfig,
) -> Result<(SpectralField, SolveStats)> {
    check_lattice(op, u0)?;
    let f1 = f.source(tau);
    check_lattice(op, &f1)?;
    let rhs = u0.add_scaled(Complex64::new(tau, 0.0), &f1)?;
    ShiftedSolver::new(op, 1.0, tau, *cfg)?.solve(&rhs, Some(u0))
}

fn bdf2_rhs(u_prev: &SpectralField, u_prev2: &SpectralField, f_m: &SpectralField, tau: f64) -> Result<SpectralField> {
    if !u_prev.same_lattice(u_prev2) || !u_prev.same_lattice(f_m) {
        return Err(Error::LatticeMismatch);
    }
    let coeffs = u_prev
        .coeffs()
        .iter()
        .zip(u_prev2.coeffs())
        .zip(f_m.coeffs())
        .map(|((a, b), s)| a * 4.0 - b + s * (2.0 * tau))
        .collect();
    SpectralField::new(u_prev.lattice().clone(), coeffs).map_err(|_| Error::NonFinite("right-hand side"))
}

/// One BDF2 step: solves `(3I + 2τQ) x = 4 u^{m-1} - u^{m-2} + 2τ f^m`,
/// starting the iteration from `u^{m-1}`.
pub fn step_bdf2(
    op: &QOperator,
    u_prev: &SpectralField,
    u_prev2: &SpectralField,
    f_m: &SpectralField,
    tau: f64,
    cfg: &SolveConfig,
) -> Result<(SpectralField, SolveStats)> {
    let rhs = bdf2_rhs(u_prev, u_prev2, f_m, tau)?;
    ShiftedSolver::new(op, 3.0, 2.0 * tau, *cfg)?.solve(&rhs, Some(u_prev))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub first_step: FirstStep,
    /// Keep `u^m` for every `m` divisible by the stride (and `m = M`).
    pub snapshot_stride: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub solution: SpectralField,
    pub stats: StepStats,
    pub snapshots: Vec<(usize, SpectralField)>,
}

/// Advances `u^0` to `u^M`.
pub fn run(
    op: &QOperator,
    u0: &SpectralField,
    f: &dyn SourceProvider,
    grid: &TimeGrid,
    cfg: &SolveConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    check_lattice(op, u0)?;
    cfg.validate(op.size())?;
    let tau = grid.tau();
    let at_step = |step: usize| {
        move |e: Error| Error::Step {
            step,
            source: Box::new(e),
        }
    };
    let mut stats = StepStats::default();
    let mut snapshots = Vec::new();
    let keep = |m: usize, u: &SpectralField, snaps: &mut Vec<(usize, SpectralField)>| {
        if let Some(s) = opts.snapshot_stride {
            if s > 0 && (m % s == 0 || m == grid.steps()) {
                snaps.push((m, u.clone()));
            }
        }
    };
    keep(0, u0, &mut snapshots);

    let u1 = match opts.first_step {
        FirstStep::Explicit => {
            let u1 = step_first(op, u0, f, tau).map_err(at_step(1))?;
            stats.push(&SolveStats::default());
            u1
        }
        FirstStep::Implicit => {
            let (u1, s) = step_first_implicit(op, u0, f, tau, cfg).map_err(at_step(1))?;
            stats.push(&s);
            u1
        }
    };
    if !u1.is_finite() {
        return Err(at_step(1)(Error::NonFinite("solution")));
    }
    keep(1, &u1, &mut snapshots);

    let solver = ShiftedSolver::new(op, 3.0, 2.0 * tau, *cfg)?;
    let mut prev2 = u0.clone();
    let mut prev = u1;
    for m in 2..=grid.steps() {
        let f_m = f.source(grid.time(m));
        check_lattice(op, &f_m).map_err(at_step(m))?;
        let rhs = bdf2_rhs(&prev, &prev2, &f_m, tau).map_err(at_step(m))?;
        let (next, s) = solver.solve(&rhs, Some(&prev)).map_err(at_step(m))?;
        if !next.is_finite() {
            return Err(at_step(m)(Error::NonFinite("solution")));
        }
        stats.push(&s);
        keep(m, &next, &mut snapshots);
        prev2 = std::mem::replace(&mut prev, next);
    }
    Ok(RunOutput {
        solution: prev,
        stats,
        snapshots,
    })
}
