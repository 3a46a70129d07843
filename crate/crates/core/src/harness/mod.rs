//! Experiment runner behind the command-line tool.

pub mod config;
pub mod output;
pub mod runner;

use std::sync::Arc;

use num_complex::Complex64;

use crate::lattice::{Lattice, ProjectionMatrix, VectorIndex};
use crate::operator::{Convolution, QOperator, SparseCoefficient};
use crate::spectral::{forward_dft, GridField, Mode, SpectralField};
use crate::stepper::{step_bdf2, SolveConfig, SolverMethod};

pub use config::{Experiment, ExperimentConfig};
pub use output::{parse_csv, to_csv, to_json, ParsedRow, TableKind};
pub use runner::{run_single, solve, space_sweep, time_sweep, ResultRow, Solved};

#[derive(Clone, Debug, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

// Deterministic, non-trivial test data.
fn probe(len: usize, seed: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| {
            let x = i as f64 + seed;
            Complex64::new((1.3 * x).sin(), (0.7 * x + 0.2).cos())
        })
        .collect()
}

fn one_d_operator(n_modes: usize) -> crate::Result<QOperator> {
    let p = ProjectionMatrix::new(
        1,
        2,
        vec![2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI * 5f64.sqrt()],
    )?;
    let lat = Arc::new(Lattice::new(n_modes, p)?);
    let modes = vec![
        Mode::real(vec![0, 0], 6.0),
        Mode::real(vec![1, 0], 0.5),
        Mode::real(vec![-1, 0], 0.5),
        Mode::real(vec![0, 1], 0.5),
        Mode::real(vec![0, -1], 0.5),
    ];
    Ok(QOperator::new(
        SparseCoefficient::from_modes(lat, &modes)?,
        Convolution::Truncated,
    ))
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Fast internal consistency checks for an installed binary.
pub fn selftest() -> Vec<SelfCheck> {
    let mut out = Vec::new();
    let mut check = |name: &'static str, f: &dyn Fn() -> crate::Result<(bool, String)>| {
        let (passed, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
        out.push(SelfCheck { name, passed, detail });
    };

    check("index bijection", &|| {
        let lat = Lattice::new(8, ProjectionMatrix::identity(3))?;
        for i in 0..lat.size() {
            let k = lat.vector_to_tensor(VectorIndex(i))?;
            if lat.tensor_to_vector(&k)?.0 != i {
                return Ok((false, format!("round trip fails at {i}")));
            }
        }
        Ok((true, format!("{} indices", lat.size())))
    });

    check("fft against direct transform", &|| {
        let lat = Arc::new(Lattice::new(6, ProjectionMatrix::identity(2))?);
        let g = GridField::new(lat.clone(), probe(lat.size(), 0.5))?;
        let fast = forward_dft(&g);
        let direct: Vec<Complex64> = lat
            .indices()
            .map(|k| {
                g.values()
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let y = lat.grid_point(j);
                        let ph: f64 = k.iter().zip(&y).map(|(a, b)| *a as f64 * b).sum();
                        v * Complex64::from_polar(1.0, -ph)
                    })
                    .sum::<Complex64>()
                    / lat.size() as f64
            })
            .collect();
        let d = rel_diff(fast.coeffs(), &direct);
        Ok((d < 1e-12, format!("relative difference {d:.1e}")))
    });

    check("matrix-free operator against dense", &|| {
        let q = one_d_operator(4)?;
        let v = probe(q.size(), 1.0);
        let dense = q.assemble_dense()?;
        let slow = dense * nalgebra::DVector::from_column_slice(&v);
        let fast = q.apply(&SpectralField::new(q.lattice().clone(), v)?)?;
        let d = rel_diff(fast.coeffs(), slow.as_slice());
        Ok((d < 1e-12, format!("relative difference {d:.1e}")))
    });

    check("conjugate gradients against Cholesky", &|| {
        let q = one_d_operator(8)?;
        let lat = q.lattice().clone();
        let up = SpectralField::new(lat.clone(), probe(lat.size(), 2.0))?;
        let up2 = SpectralField::new(lat.clone(), probe(lat.size(), 3.0))?;
        let f = SpectralField::new(lat, probe(q.size(), 4.0))?;
        let (a, _) = step_bdf2(&q, &up, &up2, &f, 1e-5, &SolveConfig::default())?;
        let direct = SolveConfig {
            method: SolverMethod::Direct,
            ..Default::default()
        };
        let (b, _) = step_bdf2(&q, &up, &up2, &f, 1e-5, &direct)?;
        let d = rel_diff(a.coeffs(), b.coeffs());
        Ok((d < 1e-10, format!("relative difference {d:.1e}")))
    });

    out
}
