//! Manufactured solutions `u(x, t) = e^{σt} v(x)` with `v` a finite
//! trigonometric sum, and the matching source `f = u_t + Lu` where
//! `L = -div(α ∇ ·)`.
//!
//! `Lv` is formed by exact integer convolution of the mode lists, so its
//! support is `supp α + supp v` with nothing folded or dropped until a
//! particular lattice truncates it.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, ProjectionMatrix};
use crate::spectral::{truncate, Mode, SpectralField};
use crate::stepper::SourceProvider;
use num_complex::Complex64;

/// Time factor `e^{σt}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Carrier {
    pub rate: Complex64,
}

impl Default for Carrier {
    /// `e^{-it}`
    fn default() -> Self {
        Self::new(Complex64::new(0.0, -1.0))
    }
}

impl Carrier {
    pub fn new(rate: Complex64) -> Self {
        Self { rate }
    }

    pub fn at(&self, t: f64) -> Complex64 {
        (self.rate * t).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    carrier: Carrier,
    modes: Vec<Mode>,
}

fn validate_modes(modes: &[Mode], what: &'static str) -> Result<()> {
    let mut seen = HashSet::with_capacity(modes.len());
    let dim = modes.first().map(|m| m.k.len());
    for m in modes {
        if Some(m.k.len()) != dim {
            return Err(Error::DimensionMismatch {
                expected: dim.unwrap_or(0),
                got: m.k.len(),
            });
        }
        if !seen.insert(m.k.as_slice()) {
            return Err(Error::DuplicateMode(m.k.clone()));
        }
        if !m.amplitude.re.is_finite() || !m.amplitude.im.is_finite() {
            return Err(Error::NonFinite(what));
        }
    }
    Ok(())
}

impl ExactSolution {
    pub fn new(carrier: Carrier, modes: Vec<Mode>) -> Result<Self> {
        validate_modes(&modes, "exact solution amplitude")?;
        Ok(Self { carrier, modes })
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// `Σ |b_k|^2` over the modes that `lattice` drops, before the time factor.
    pub fn tail_norm_sqr(&self, lattice: &Lattice) -> f64 {
        self.modes
            .iter()
            .filter(|m| !lattice.contains(&m.k))
            .map(|m| m.amplitude.norm_sqr())
            .sum()
    }
}

/// `T_N u(·, t)`.
pub fn exact_coefficients(sol: &ExactSolution, lattice: &Arc<Lattice>, t: f64) -> Result<SpectralField> {
    Ok(truncate(&sol.modes, lattice)?.scaled(sol.carrier.at(t)))
}

/// Modes of `-div(α ∇v)`: `c_k = Σ_m a_{k-m} (Pk)·(Pm) b_m`, over exact
/// integer indices, sorted by `k`. Zero outputs are kept so the support is
/// exactly `supp α + supp v`.
pub fn exact_convolution_lu(alpha: &[Mode], v: &[Mode], p: &ProjectionMatrix) -> Result<Vec<Mode>> {
    validate_modes(alpha, "coefficient amplitude")?;
    validate_modes(v, "solution amplitude")?;
    let n = p.torus_dim();
    if let Some(m) = alpha.iter().chain(v).find(|m| m.k.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.k.len(),
        });
    }
    let v_freq: Vec<Vec<f64>> = v.iter().map(|m| p.apply_int(&m.k)).collect();
    let mut out: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
    for a in alpha {
        for (b, lam_m) in v.iter().zip(&v_freq) {
            let k: Vec<i64> = a.k.iter().zip(&b.k).map(|(x, y)| x + y).collect();
            let lam_k = p.apply_int(&k);
            let w: f64 = lam_k.iter().zip(lam_m).map(|(x, y)| x * y).sum();
            *out.entry(k).or_default() += a.amplitude * b.amplitude * w;
        }
    }
    Ok(out.into_iter().map(|(k, amplitude)| Mode { k, amplitude }).collect())
}

/// `F(t) = e^{σt} (T_N Lv + σ T_N v)`, with the spatial part computed once.
#[derive(Clone, Debug)]
pub struct ManufacturedSource {
    carrier: Carrier,
    spatial: SpectralField,
}

impl ManufacturedSource {
    pub fn new(sol: &ExactSolution, alpha: &[Mode], lattice: &Arc<Lattice>) -> Result<Self> {
        let lv = exact_convolution_lu(alpha, &sol.modes, lattice.projection())?;
        let lv = truncate(&lv, lattice)?;
        let v = truncate(&sol.modes, lattice)?;
        let spatial = lv.add_scaled(sol.carrier.rate, &v)?;
        Ok(Self {
            carrier: sol.carrier,
            spatial,
        })
    }

    pub fn spatial(&self) -> &SpectralField {
        &self.spatial
    }
}

impl SourceProvider for ManufacturedSource {
    fn source(&self, t: f64) -> SpectralField {
        self.spatial.scaled(self.carrier.at(t))
    }
}

/// The `(2S)^n` modes `k ∈ [-S, S)^n` with amplitude `e^{-rate Σ|k_l|}`.
pub fn decay_box(torus_dim: usize, half_width: i64, rate: f64) -> Vec<Mode> {
    let side = (2 * half_width) as usize;
    let count = side.pow(torus_dim as u32);
    (0..count)
        .map(|mut idx| {
            let mut k = vec![0i64; torus_dim];
            for slot in k.iter_mut().rev() {
                *slot = (idx % side) as i64 - half_width;
                idx /= side;
            }
            let l1: i64 = k.iter().map(|c| c.abs()).sum();
            Mode::real(k, (-rate * l1 as f64).exp())
        })
        .collect()
}
