//! JSON experiment configuration.
//!
//! Real-valued fields accept either a JSON number or an expression string
//! such as `"2*pi"` or `"2*sqrt(5)*pi"`, evaluated in double precision so
//! irrational projection entries are not truncated to a printed decimal.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lattice::ProjectionMatrix;
use crate::manufactured::{decay_box, Carrier, ExactSolution};
use crate::metrics::ErrorMeasure;
use crate::operator::Convolution;
use crate::spectral::Mode;
use crate::stepper::{FirstStep, SolveConfig, TimeGrid};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn value(&self, field: &str) -> Result<f64> {
        let v = match self {
            Scalar::Number(x) => *x,
            Scalar::Expr(e) => {
                meval::eval_str(e).map_err(|err| Error::Config(format!("{field}: cannot evaluate {e:?}: {err}")))?
            }
        };
        if !v.is_finite() {
            return Err(Error::Config(format!("{field}: value {v} is not finite")));
        }
        Ok(v)
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Number(x)
    }
}

/// `[k, re]` or `[k, re, im]`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModeSpec {
    Complex(Vec<i64>, Scalar, Scalar),
    Real(Vec<i64>, Scalar),
}

impl ModeSpec {
    fn resolve(&self, field: &str, n: usize) -> Result<Mode> {
        let (k, re, im) = match self {
            ModeSpec::Complex(k, re, im) => (k, re.value(field)?, im.value(field)?),
            ModeSpec::Real(k, re) => (k, re.value(field)?, 0.0),
        };
        if k.len() != n {
            return Err(Error::Config(format!(
                "{field}: frequency vector {k:?} has length {}, expected n = {n}",
                k.len()
            )));
        }
        Ok(Mode::new(k.clone(), Complex64::new(re, im)))
    }
}

fn zero() -> Scalar {
    Scalar::Number(0.0)
}

fn minus_one() -> Scalar {
    Scalar::Number(-1.0)
}

fn one() -> Scalar {
    Scalar::Number(1.0)
}

/// Time factor `e^{(re + i im) t}`; defaults to `e^{-it}`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSpec {
    #[serde(default = "zero")]
    pub re: Scalar,
    #[serde(default = "minus_one")]
    pub im: Scalar,
}

impl Default for CarrierSpec {
    fn default() -> Self {
        Self {
            re: zero(),
            im: minus_one(),
        }
    }
}

/// All `k ∈ [-S, S)^n` with amplitude `e^{-rate |k|_1}`. With `axes`, the
/// box spans only those torus axes and the other components are zero.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayBoxSpec {
    pub half_width: i64,
    #[serde(default = "one")]
    pub rate: Scalar,
    #[serde(default)]
    pub axes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSolutionSpec {
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
    #[serde(default)]
    pub decay_box: Option<DecayBoxSpec>,
    #[serde(default)]
    pub carrier: CarrierSpec,
}

/// The configuration document as written on disk.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub d: usize,
    pub n: usize,
    pub projection: Vec<Vec<Scalar>>,
    pub alpha: Vec<ModeSpec>,
    pub exact_solution: ExactSolutionSpec,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub tau_list: Vec<Scalar>,
    #[serde(rename = "T")]
    pub final_time: Scalar,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub first_step: FirstStep,
    #[serde(default)]
    pub convolution: Convolution,
    #[serde(default)]
    pub error_measure: ErrorMeasure,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A validated experiment with every expression evaluated.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: Option<String>,
    pub projection: ProjectionMatrix,
    pub alpha: Vec<Mode>,
    pub solution: ExactSolution,
    pub n_list: Vec<usize>,
    pub tau_list: Vec<f64>,
    pub final_time: f64,
    pub solver: SolveConfig,
    pub first_step: FirstStep,
    pub convolution: Convolution,
    pub error_measure: ErrorMeasure,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self) -> Result<Experiment> {
        let (d, n) = (self.d, self.n);
        if d == 0 || n == 0 {
            return Err(Error::Config("d and n must be positive".into()));
        }
        if self.projection.len() != d {
            return Err(Error::Config(format!(
                "projection: expected {d} rows, got {}",
                self.projection.len()
            )));
        }
        let mut entries = Vec::with_capacity(d * n);
        for (r, row) in self.projection.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "projection[{r}]: expected {n} entries, got {}",
                    row.len()
                )));
            }
            for (c, x) in row.iter().enumerate() {
                entries.push(x.value(&format!("projection[{r}][{c}]"))?);
            }
        }
        let projection = ProjectionMatrix::new(d, n, entries).map_err(|e| Error::Config(format!("projection: {e}")))?;

        let alpha = self
            .alpha
            .iter()
            .enumerate()
            .map(|(i, m)| m.resolve(&format!("alpha[{i}]"), n))
            .collect::<Result<Vec<_>>>()?;

        let spec = &self.exact_solution;
        let mut modes = spec
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| m.resolve(&format!("exact_solution.modes[{i}]"), n))
            .collect::<Result<Vec<_>>>()?;
        if let Some(b) = &spec.decay_box {
            if b.half_width < 1 {
                return Err(Error::Config(format!(
                    "exact_solution.decay_box.half_width: must be at least 1, got {}",
                    b.half_width
                )));
            }
            let rate = b.rate.value("exact_solution.decay_box.rate")?;
            let axes = b.axes.clone().unwrap_or_else(|| (0..n).collect());
            if axes.is_empty() || axes.iter().any(|&a| a >= n) {
                return Err(Error::Config(format!(
                    "exact_solution.decay_box.axes: must be a non-empty subset of 0..{n}, got {axes:?}"
                )));
            }
            for m in decay_box(axes.len(), b.half_width, rate) {
                let mut k = vec![0; n];
                for (&axis, &c) in axes.iter().zip(&m.k) {
                    k[axis] = c;
                }
                modes.push(Mode::new(k, m.amplitude));
            }
        }
        if modes.is_empty() {
            return Err(Error::Config("exact_solution: no modes given".into()));
        }
        let rate = Complex64::new(
            spec.carrier.re.value("exact_solution.carrier.re")?,
            spec.carrier.im.value("exact_solution.carrier.im")?,
        );
        let solution =
            ExactSolution::new(Carrier::new(rate), modes).map_err(|e| Error::Config(format!("exact_solution: {e}")))?;

        if self.n_list.is_empty() {
            return Err(Error::Config("N_list: must not be empty".into()));
        }
        for (i, &nm) in self.n_list.iter().enumerate() {
            if nm < 2 || nm % 2 != 0 {
                return Err(Error::Config(format!(
                    "N_list[{i}]: N must be even and at least 2, got {nm}"
                )));
            }
        }
        if self.tau_list.is_empty() {
            return Err(Error::Config("tau_list: must not be empty".into()));
        }
        let final_time = self.final_time.value("T")?;
        let tau_list = self
            .tau_list
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let field = format!("tau_list[{i}]");
                let tau = t.value(&field)?;
                TimeGrid::from_final_time(final_time, tau).map_err(|e| Error::Config(format!("{field}: {e}")))?;
                Ok(tau)
            })
            .collect::<Result<Vec<_>>>()?;
        let largest = self.n_list.iter().copied().max().unwrap_or(2);
        let size = largest.checked_pow(n as u32).unwrap_or(usize::MAX);
        self.solver
            .validate(size)
            .map_err(|e| Error::Config(format!("solver: {e}")))?;

        Ok(Experiment {
            name: self.name.clone(),
            projection,
            alpha,
            solution,
            n_list: self.n_list.clone(),
            tau_list,
            final_time,
            solver: self.solver,
            first_step: self.first_step,
            convolution: self.convolution,
            error_measure: self.error_measure,
            output: self.output.clone(),
        })
    }
}

impl Experiment {
    pub fn from_path(path: &Path) -> Result<Self> {
        ExperimentConfig::from_path(path)?.resolve()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ExperimentConfig::from_json(text)?.resolve()
    }
}
