//! Error norms and the temporal convergence order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manufactured::{exact_coefficients, ExactSolution};
use crate::spectral::SpectralField;

/// `‖u‖ = (Σ_k |U_k|^2)^{1/2}`.
pub fn l2qp_norm(s: &SpectralField) -> f64 {
    s.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// What the numerical solution is compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMeasure {
    /// `‖u_N - T_N u‖` over the retained modes only.
    #[default]
    Lattice,
    /// `‖u_N - u‖`: the exact modes outside `K_N^n` are added in quadrature.
    WithTail,
}

pub fn final_error(u_num: &SpectralField, sol: &ExactSolution, t: f64, measure: ErrorMeasure) -> Result<f64> {
    let exact = exact_coefficients(sol, u_num.lattice(), t)?;
    let inside = l2qp_norm(&u_num.sub(&exact)?);
    let err = match measure {
        ErrorMeasure::Lattice => inside,
        ErrorMeasure::WithTail => {
            let tail = sol.tail_norm_sqr(u_num.lattice()) * sol.carrier().at(t).norm_sqr();
            (inside * inside + tail).sqrt()
        }
    };
    if !err.is_finite() {
        return Err(Error::NonFinite("error norm"));
    }
    Ok(err)
}

/// `κ = ln(e1/e2) / ln(τ1/τ2)`.
pub fn order_kappa(err1: f64, tau1: f64, err2: f64, tau2: f64) -> Result<f64> {
    for (name, v) in [("err1", err1), ("tau1", tau1), ("err2", err2), ("tau2", tau2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::UndefinedOrder(format!(
                "{name} = {v:e} must be positive and finite"
            )));
        }
    }
    if tau1 == tau2 {
        return Err(Error::UndefinedOrder("the two step sizes are equal".into()));
    }
    Ok((err1 / err2).ln() / (tau1 / tau2).ln())
}

/// One measured run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub err: f64,
    pub n_modes: usize,
    pub tau: f64,
    pub steps: usize,
    pub wall_seconds: f64,
    pub iterations: usize,
}
