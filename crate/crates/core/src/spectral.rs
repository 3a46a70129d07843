//! Discrete Fourier-Bohr transforms between collocation samples and Fourier
//! coefficients, plus truncation and pointwise evaluation of trigonometric
//! sums.
//!
//! Normalisation: the forward transform carries the `1/D` factor, so
//! coefficients are Fourier-Bohr amplitudes directly and the inverse
//! transform is a plain sum.

use std::collections::HashSet;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// A single Fourier mode `amplitude * e^{i (Pk) . x}` with an exact integer
/// frequency vector. `k` may lie outside any particular `K_N^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub k: Vec<i64>,
    pub amplitude: Complex64,
}

impl Mode {
    pub fn new(k: Vec<i64>, amplitude: Complex64) -> Self {
        Self { k, amplitude }
    }

    pub fn real(k: Vec<i64>, amplitude: f64) -> Self {
        Self::new(k, Complex64::new(amplitude, 0.0))
    }
}

/// Fourier coefficients `U_k` indexed by vector index.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    lattice: Arc<Lattice>,
    coeffs: Vec<Complex64>,
}

/// Samples `U(y_j)` on the torus grid, in collocation-point order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    lattice: Arc<Lattice>,
    values: Vec<Complex64>,
}

fn check_values(len: usize, expected: usize, values: &[Complex64], what: &'static str) -> Result<()> {
    if len != expected {
        return Err(Error::DimensionMismatch { expected, got: len });
    }
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

impl SpectralField {
    pub fn new(lattice: Arc<Lattice>, coeffs: Vec<Complex64>) -> Result<Self> {
        check_values(coeffs.len(), lattice.size(), &coeffs, "spectral field")?;
        Ok(Self { lattice, coeffs })
    }

    pub fn zeros(lattice: Arc<Lattice>) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); lattice.size()];
        Self { lattice, coeffs }
    }

    /// A single in-lattice mode.
    pub fn delta(lattice: Arc<Lattice>, k: &[i64], amplitude: Complex64) -> Result<Self> {
        let i = lattice.tensor_to_vector(k)?;
        let mut f = Self::zeros(lattice);
        f.coeffs[i.0] = amplitude;
        Ok(f)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of frequency `k`.
    pub fn get(&self, k: &[i64]) -> Result<Complex64> {
        Ok(self.coeffs[self.lattice.tensor_to_vector(k)?.0])
    }

    pub fn same_lattice(&self, other: &SpectralField) -> bool {
        Arc::ptr_eq(&self.lattice, &other.lattice) || *self.lattice == *other.lattice
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: Complex64, other: &SpectralField) -> Result<Self> {
        if !self.same_lattice(other) {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + c * b).collect(),
        })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.add_scaled(Complex64::new(-1.0, 0.0), other)
    }
}

impl GridField {
    pub fn new(lattice: Arc<Lattice>, values: Vec<Complex64>) -> Result<Self> {
        check_values(values.len(), lattice.size(), &values, "grid field")?;
        Ok(Self { lattice, values })
    }

    /// Samples a parent function `U(y)` at every torus grid point.
    pub fn from_parent<F>(lattice: Arc<Lattice>, parent: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let values = (0..lattice.size()).map(|j| parent(&lattice.grid_point(j))).collect();
        Self::new(lattice, values)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// In-place unnormalised multidimensional FFT over a row-major `[N; n]` array.
fn fft_nd(data: &mut [Complex64], n_modes: usize, dims: usize, direction: FftDirection) {
    let fft = FftPlanner::new().plan_fft(n_modes, direction);
    let total = data.len();
    let mut lines = vec![Complex64::new(0.0, 0.0); total];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..dims {
        let stride = n_modes.pow((dims - 1 - axis) as u32);
        let block = stride * n_modes;
        // Gather every line along `axis` into contiguous chunks of length N.
        let mut pos = 0;
        for base in (0..total).step_by(block) {
            for inner in 0..stride {
                for t in 0..n_modes {
                    lines[pos + t] = data[base + inner + t * stride];
                }
                pos += n_modes;
            }
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        let mut pos = 0;
        for base in (0..total).step_by(block) {
            for inner in 0..stride {
                for t in 0..n_modes {
                    data[base + inner + t * stride] = lines[pos + t];
                }
                pos += n_modes;
            }
        }
    }
}

/// `U_k = (1/D) sum_j U(y_j) e^{-i k . y_j}` via a fast transform.
pub fn forward_dft(g: &GridField) -> SpectralField {
    let lat = g.lattice.clone();
    let mut data = g.values.clone();
    fft_nd(&mut data, lat.n_modes(), lat.torus_dim(), FftDirection::Forward);
    let scale = 1.0 / lat.size() as f64;
    for z in &mut data {
        *z *= scale;
    }
    SpectralField {
        lattice: lat,
        coeffs: data,
    }
}

/// `U(y_j) = sum_k U_k e^{i k . y_j}`.
pub fn inverse_dft(s: &SpectralField) -> GridField {
    let lat = s.lattice.clone();
    let mut data = s.coeffs.clone();
    fft_nd(&mut data, lat.n_modes(), lat.torus_dim(), FftDirection::Inverse);
    GridField {
        lattice: lat,
        values: data,
    }
}

/// Parent-function sum `sum_k U_k e^{i k . y}` at a torus point `y`.
pub fn evaluate_parent_at(s: &SpectralField, y: &[f64]) -> Complex64 {
    let lat = &s.lattice;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, c) in s.coeffs.iter().enumerate() {
        if *c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let phase: f64 = lat
            .residue_digits(i)
            .into_iter()
            .zip(y)
            .map(|(r, t)| lat.signed(r) as f64 * t)
            .sum();
        acc += c * Complex64::from_polar(1.0, phase);
    }
    acc
}

/// Trigonometric interpolant `I_N u(x) = sum_k U_k e^{i (Pk) . x}` at an
/// arbitrary physical point, by direct summation. Equivalent to
/// [`evaluate_parent_at`] at `y = P^T x`.
pub fn evaluate_at(s: &SpectralField, x: &[f64]) -> Complex64 {
    let lat = &s.lattice;
    let p = lat.projection();
    let ptx: Vec<f64> = (0..lat.torus_dim())
        .map(|c| (0..lat.spatial_dim()).map(|r| p.entry(r, c) * x[r]).sum())
        .collect();
    evaluate_parent_at(s, &ptx)
}

/// Truncation `T_N`: keeps exactly the modes inside `K_N^n` and drops the
/// rest, without aliasing.
pub fn truncate(modes: &[Mode], lattice: &Arc<Lattice>) -> Result<SpectralField> {
    let mut seen = HashSet::with_capacity(modes.len());
    let mut field = SpectralField::zeros(lattice.clone());
    for m in modes {
        if m.k.len() != lattice.torus_dim() {
            return Err(Error::DimensionMismatch {
                expected: lattice.torus_dim(),
                got: m.k.len(),
            });
        }
        if !seen.insert(m.k.as_slice()) {
            return Err(Error::DuplicateMode(m.k.clone()));
        }
        if lattice.contains(&m.k) {
            field.coeffs[lattice.fold_index(&m.k)] = m.amplitude;
        }
    }
    if !field.is_finite() {
        return Err(Error::NonFinite("mode amplitudes"));
    }
    Ok(field)
}
