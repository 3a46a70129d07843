//! Frequency lattice bookkeeping.
//!
//! A [`Lattice`] fixes the number of modes `N` per torus direction, the torus
//! dimension `n` and the projection matrix `P` (`d x n`). Integer frequency
//! vectors `k` live in the box `K_N^n = {-N/2, ..., N/2 - 1}^n` and are stored
//! in flat vectors at the row-major index built from their nonnegative
//! residues `k mod N`. This is exactly the bin layout of a multidimensional
//! FFT, so transforms never permute data.

use std::fmt;
use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported mode count `D = N^n`.
pub const MAX_MODES: usize = 1 << 31;

/// The `d x n` matrix mapping integer frequencies `k` to physical
/// frequencies `Pk`. Stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    spatial_dim: usize,
    torus_dim: usize,
    entries: Vec<f64>,
}

impl ProjectionMatrix {
    /// Builds a projection from row-major entries. Requires `d <= n`, finite
    /// entries and full row rank (smallest singular value above `1e-12` times
    /// the largest).
    pub fn new(spatial_dim: usize, torus_dim: usize, entries: Vec<f64>) -> Result<Self> {
        if spatial_dim == 0 || torus_dim == 0 {
            return Err(Error::InvalidProjection("dimensions must be positive".into()));
        }
        if spatial_dim > torus_dim {
            return Err(Error::InvalidProjection(format!(
                "spatial dimension {spatial_dim} exceeds torus dimension {torus_dim}"
            )));
        }
        if entries.len() != spatial_dim * torus_dim {
            return Err(Error::InvalidProjection(format!(
                "expected {} entries, got {}",
                spatial_dim * torus_dim,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidProjection("non-finite entry".into()));
        }
        let m = DMatrix::from_row_slice(spatial_dim, torus_dim, &entries);
        let sv = m.singular_values();
        let largest = sv.max();
        let smallest = sv.min();
        if largest == 0.0 || smallest <= 1e-12 * largest {
            return Err(Error::InvalidProjection(format!(
                "matrix is rank deficient (singular values {smallest:e} .. {largest:e})"
            )));
        }
        Ok(Self {
            spatial_dim,
            torus_dim,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidProjection("ragged rows".into()));
        }
        Self::new(d, n, rows.concat())
    }

    /// The identity on `R^n`, i.e. the periodic case.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::new(n, n, entries).expect("identity has full rank")
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn torus_dim(&self) -> usize {
        self.torus_dim
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.torus_dim + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `P k` for an integer vector.
    pub fn apply_int(&self, k: &[i64]) -> Vec<f64> {
        debug_assert_eq!(k.len(), self.torus_dim);
        (0..self.spatial_dim)
            .map(|r| {
                let row = &self.entries[r * self.torus_dim..(r + 1) * self.torus_dim];
                row.iter().zip(k).map(|(p, &kk)| p * kk as f64).sum()
            })
            .collect()
    }

    /// `P y` for a real vector.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.torus_dim);
        (0..self.spatial_dim)
            .map(|r| {
                let row = &self.entries[r * self.torus_dim..(r + 1) * self.torus_dim];
                row.iter().zip(y).map(|(p, yy)| p * yy).sum()
            })
            .collect()
    }
}

/// An integer frequency vector `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrequencyIndex(pub Vec<i64>);

impl Deref for FrequencyIndex {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for FrequencyIndex {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl From<&[i64]> for FrequencyIndex {
    fn from(v: &[i64]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Display for FrequencyIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Flat position in `[0, D)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VectorIndex(pub usize);

/// Discretisation context: `N` modes per torus direction, projection `P`,
/// `D = N^n` total modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    n_modes: usize,
    projection: ProjectionMatrix,
    size: usize,
}

impl Lattice {
    pub fn new(n_modes: usize, projection: ProjectionMatrix) -> Result<Self> {
        if n_modes < 2 || n_modes % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "N must be even and at least 2, got {n_modes}"
            )));
        }
        let mut size: u128 = 1;
        for _ in 0..projection.torus_dim() {
            size *= n_modes as u128;
            if size > MAX_MODES as u128 {
                return Err(Error::InvalidLattice(format!(
                    "N^n = {n_modes}^{} exceeds {MAX_MODES} modes",
                    projection.torus_dim()
                )));
            }
        }
        Ok(Self {
            n_modes,
            projection,
            size: size as usize,
        })
    }

    /// `N`
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `n`
    pub fn torus_dim(&self) -> usize {
        self.projection.torus_dim()
    }

    /// `d`
    pub fn spatial_dim(&self) -> usize {
        self.projection.spatial_dim()
    }

    /// `D = N^n`
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.projection
    }

    fn half(&self) -> i64 {
        (self.n_modes / 2) as i64
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        let h = self.half();
        k.len() == self.torus_dim() && k.iter().all(|&c| -h <= c && c < h)
    }

    /// Folds a residue in `[0, N)` back to its signed representative in
    /// `[-N/2, N/2)`.
    pub fn signed(&self, residue: usize) -> i64 {
        if residue < self.n_modes / 2 {
            residue as i64
        } else {
            residue as i64 - self.n_modes as i64
        }
    }

    /// `k mod N` in `[0, N)`.
    pub fn residue(&self, component: i64) -> usize {
        component.rem_euclid(self.n_modes as i64) as usize
    }

    /// Row-major index of the residue vector `k mod N`; accepts any integer
    /// vector of the right length.
    pub fn fold_index(&self, k: &[i64]) -> usize {
        k.iter().fold(0usize, |acc, &c| acc * self.n_modes + self.residue(c))
    }

    /// `i = sum_l (k_l mod N) N^(n-l)`.
    pub fn tensor_to_vector(&self, k: &[i64]) -> Result<VectorIndex> {
        if k.len() != self.torus_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.torus_dim(),
                got: k.len(),
            });
        }
        if !self.contains(k) {
            return Err(Error::IndexOutOfRange {
                k: k.to_vec(),
                n_modes: self.n_modes,
            });
        }
        Ok(VectorIndex(self.fold_index(k)))
    }

    /// Inverse of [`Lattice::tensor_to_vector`].
    pub fn vector_to_tensor(&self, i: VectorIndex) -> Result<FrequencyIndex> {
        if i.0 >= self.size {
            return Err(Error::VectorIndexOutOfRange {
                index: i.0,
                size: self.size,
            });
        }
        Ok(FrequencyIndex(
            self.residue_digits(i.0).into_iter().map(|r| self.signed(r)).collect(),
        ))
    }

    /// Base-`N` digits of `i`, most significant first.
    pub fn residue_digits(&self, mut i: usize) -> Vec<usize> {
        let n = self.torus_dim();
        let mut digits = vec![0; n];
        for slot in digits.iter_mut().rev() {
            *slot = i % self.n_modes;
            i /= self.n_modes;
        }
        digits
    }

    /// `lambda_k = P k`.
    pub fn frequency_of(&self, k: &[i64]) -> Result<Vec<f64>> {
        self.tensor_to_vector(k)?;
        Ok(self.projection.apply_int(k))
    }

    /// Physical frequencies of every vector index, flattened as `D x d`.
    pub fn frequency_table(&self) -> Vec<f64> {
        let d = self.spatial_dim();
        let mut out = Vec::with_capacity(self.size * d);
        for i in 0..self.size {
            let k: Vec<i64> = self.residue_digits(i).into_iter().map(|r| self.signed(r)).collect();
            out.extend(self.projection.apply_int(&k));
        }
        out
    }

    /// Torus grid point `y_j = 2 pi j / N` for flat index `j`.
    pub fn grid_point(&self, j: usize) -> Vec<f64> {
        let h = 2.0 * std::f64::consts::PI / self.n_modes as f64;
        self.residue_digits(j).into_iter().map(|r| h * r as f64).collect()
    }

    /// Collocation points `x_j = P y_j`, in flat index order.
    pub fn collocation_points(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|j| self.projection.apply(&self.grid_point(j)))
            .collect()
    }

    /// All frequency indices in vector-index order.
    pub fn indices(&self) -> impl Iterator<Item = FrequencyIndex> + '_ {
        (0..self.size).map(|i| FrequencyIndex(self.residue_digits(i).into_iter().map(|r| self.signed(r)).collect()))
    }
}
