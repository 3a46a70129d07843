//! The discrete elliptic operator `Q = B ∘ W` in compressed form.
//!
//! `B` multiplies by the coefficient in frequency space (a convolution with
//! the sparse coefficient modes) and `W_ij = λ_i · λ_j`. Each output row
//! touches at most `g` inputs, so the operator is stored as a `g`-wide
//! stencil: one column index and one precomputed weight per (row, mode).

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FrequencyIndex, Lattice};
use crate::spectral::{forward_dft, GridField, Mode, SpectralField};

/// Amplitudes below this are treated as structural zeros.
pub const AMPLITUDE_FLOOR: f64 = 1e-15;

/// Largest `D` for which [`QOperator::assemble_dense`] is allowed.
pub const DENSE_LIMIT: usize = 65536;

/// Rows per parallel work item in [`QOperator::apply_into`].
const PAR_CHUNK: usize = 4096;

/// How `k_i - m` is resolved when it leaves `K_N^n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convolution {
    /// Drop the contribution (Galerkin product; `B` is multilevel Toeplitz).
    #[default]
    Truncated,
    /// Fold back modulo `N` (`B` is multilevel block circulant).
    Wrapped,
}

/// The `g` nonzero Fourier modes of the coefficient's parent function.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCoefficient {
    lattice: Arc<Lattice>,
    modes: Vec<(FrequencyIndex, Complex64)>,
}

impl SparseCoefficient {
    /// Validates analytically specified modes.
    ///
    /// Components may reach `+N/2`, which folds onto `-N/2`; two modes that
    /// fold onto the same residue are rejected rather than summed.
    pub fn from_modes(lattice: Arc<Lattice>, modes: &[Mode]) -> Result<Self> {
        let n = lattice.torus_dim();
        let half = (lattice.n_modes() / 2) as i64;
        let mut by_residue: HashMap<usize, &[i64]> = HashMap::with_capacity(modes.len());
        let mut kept = Vec::with_capacity(modes.len());
        for m in modes {
            if m.k.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.k.len(),
                });
            }
            if m.k.iter().any(|c| c.abs() > half) {
                return Err(Error::IndexOutOfRange {
                    k: m.k.clone(),
                    n_modes: lattice.n_modes(),
                });
            }
            if !m.amplitude.re.is_finite() || !m.amplitude.im.is_finite() {
                return Err(Error::NonFinite("coefficient amplitude"));
            }
            if let Some(prev) = by_residue.insert(lattice.fold_index(&m.k), &m.k) {
                return Err(if prev == m.k.as_slice() {
                    Error::DuplicateMode(m.k.clone())
                } else {
                    Error::ModeCollision {
                        first: prev.to_vec(),
                        second: m.k.clone(),
                        n_modes: lattice.n_modes(),
                    }
                });
            }
            if m.amplitude.norm() >= AMPLITUDE_FLOOR {
                kept.push((FrequencyIndex(m.k.clone()), m.amplitude));
            }
        }
        Ok(Self { lattice, modes: kept })
    }

    /// Transforms samples of the parent function and keeps every mode with
    /// `|amplitude| > threshold`.
    pub fn from_samples(samples: &GridField, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) {
            return Err(Error::Config(format!(
                "threshold must be non-negative, got {threshold}"
            )));
        }
        let s = forward_dft(samples);
        let lattice = s.lattice().clone();
        let modes: Vec<_> = s
            .coeffs()
            .iter()
            .zip(lattice.indices())
            .filter(|(a, _)| a.norm() > threshold && a.norm() >= AMPLITUDE_FLOOR)
            .map(|(a, k)| (k, *a))
            .collect();
        if modes.is_empty() {
            return Err(Error::AllModesFiltered(threshold));
        }
        Ok(Self { lattice, modes })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn modes(&self) -> &[(FrequencyIndex, Complex64)] {
        &self.modes
    }

    /// `g`
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Whether the parent function is real valued: `(-k, conj a)` is present
    /// for every `(k, a)`, comparing residues.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let by_residue: HashMap<usize, Complex64> = self
            .modes
            .iter()
            .map(|(k, a)| (self.lattice.fold_index(k), *a))
            .collect();
        self.modes.iter().all(|(k, a)| {
            let neg: Vec<i64> = k.iter().map(|c| -c).collect();
            let partner = by_residue
                .get(&self.lattice.fold_index(&neg))
                .copied()
                .unwrap_or_default();
            (partner - a.conj()).norm() <= tol * a.norm().max(1.0)
        })
    }
}

/// Matrix-free `Q = B ∘ W`.
#[derive(Clone, Debug)]
pub struct QOperator {
    lattice: Arc<Lattice>,
    alpha: SparseCoefficient,
    convolution: Convolution,
    freq: Vec<f64>,
    width: usize,
    cols: Vec<u32>,
    weights: Vec<Complex64>,
}

impl QOperator {
    pub fn new(alpha: SparseCoefficient, convolution: Convolution) -> Self {
        let lattice = alpha.lattice.clone();
        let size = lattice.size();
        let d = lattice.spatial_dim();
        let n = lattice.torus_dim();
        let n_modes = lattice.n_modes();
        let half = (n_modes / 2) as i64;
        let freq = lattice.frequency_table();
        let width = alpha.len().max(1);
        let mut cols = vec![0u32; size * width];
        let mut weights = vec![Complex64::new(0.0, 0.0); size * width];

        let rows_cols = cols.par_chunks_mut(width);
        let rows_w = weights.par_chunks_mut(width);
        rows_cols.zip(rows_w).enumerate().for_each(|(i, (c_row, w_row))| {
            let ki: Vec<i64> = lattice
                .residue_digits(i)
                .into_iter()
                .map(|r| lattice.signed(r))
                .collect();
            let lam_i = &freq[i * d..(i + 1) * d];
            let mut target = vec![0i64; n];
            for (slot, (m, a)) in alpha.modes.iter().enumerate() {
                let mut inside = true;
                for l in 0..n {
                    target[l] = ki[l] - m[l];
                    if target[l] < -half || target[l] >= half {
                        inside = false;
                    }
                }
                if !inside && convolution == Convolution::Truncated {
                    c_row[slot] = i as u32;
                    continue;
                }
                let j = lattice.fold_index(&target);
                let lam_j = &freq[j * d..(j + 1) * d];
                let dot: f64 = lam_i.iter().zip(lam_j).map(|(x, y)| x * y).sum();
                c_row[slot] = j as u32;
                w_row[slot] = a * dot;
            }
        });

        Self {
            lattice,
            alpha,
            convolution,
            freq,
            width,
            cols,
            weights,
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn alpha(&self) -> &SparseCoefficient {
        &self.alpha
    }

    pub fn convolution(&self) -> Convolution {
        self.convolution
    }

    /// `λ_i` for vector index `i`.
    pub fn frequency(&self, i: usize) -> &[f64] {
        let d = self.lattice.spatial_dim();
        &self.freq[i * d..(i + 1) * d]
    }

    pub fn size(&self) -> usize {
        self.lattice.size()
    }

    /// `out = Q v` on raw coefficient slices.
    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let size = self.size();
        if v.len() != size || out.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                got: if v.len() != size { v.len() } else { out.len() },
            });
        }
        let w = self.width;
        let row = |i: usize| -> Complex64 {
            let base = i * w;
            let mut acc = Complex64::new(0.0, 0.0);
            for s in base..base + w {
                acc += self.weights[s] * v[self.cols[s] as usize];
            }
            acc
        };
        if size >= 2 * PAR_CHUNK {
            out.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(c, chunk)| {
                let start = c * PAR_CHUNK;
                for (off, o) in chunk.iter_mut().enumerate() {
                    *o = row(start + off);
                }
            });
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = row(i);
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        if !(Arc::ptr_eq(v.lattice(), &self.lattice) || **v.lattice() == *self.lattice) {
            return Err(Error::LatticeMismatch);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.size()];
        self.apply_into(v.coeffs(), &mut out)?;
        SpectralField::new(self.lattice.clone(), out)
    }

    /// Dense `D x D` matrix, for testing only.
    pub fn assemble_dense(&self) -> Result<DMatrix<Complex64>> {
        let size = self.size();
        if size > DENSE_LIMIT {
            return Err(Error::TooLargeForDense {
                size,
                limit: DENSE_LIMIT,
            });
        }
        let mut q = DMatrix::zeros(size, size);
        for i in 0..size {
            for s in i * self.width..(i + 1) * self.width {
                q[(i, self.cols[s] as usize)] += self.weights[s];
            }
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ProjectionMatrix;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_d_lattice(n_modes: usize) -> Arc<Lattice> {
        let p = ProjectionMatrix::new(1, 2, vec![2.0 * PI, 2.0 * PI * 5f64.sqrt()]).unwrap();
        Arc::new(Lattice::new(n_modes, p).unwrap())
    }

    fn one_d_alpha() -> Vec<Mode> {
        vec![
            Mode::real(vec![0, 0], 6.0),
            Mode::real(vec![1, 0], 0.5),
            Mode::real(vec![-1, 0], 0.5),
            Mode::real(vec![0, 1], 0.5),
            Mode::real(vec![0, -1], 0.5),
        ]
    }

    fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..len)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn dense_apply(q: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
        (q * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    #[test]
    fn builds_the_reference_coefficients() {
        let a = SparseCoefficient::from_modes(one_d_lattice(4), &one_d_alpha()).unwrap();
        assert_eq!(a.len(), 5);
        assert!(a.is_conjugate_symmetric(1e-15));

        let p = ProjectionMatrix::new(2, 3, vec![2.0 * PI, 2.0 * PI * 5f64.sqrt(), 0.0, 0.0, 0.0, 2.0 * PI]).unwrap();
        let lat = Arc::new(Lattice::new(4, p).unwrap());
        let mut modes = vec![Mode::real(vec![0, 0, 0], 12.0)];
        for e in 0..3 {
            for s in [1, -1] {
                let mut k = vec![0; 3];
                k[e] = s;
                modes.push(Mode::real(k, 0.5));
            }
        }
        assert_eq!(SparseCoefficient::from_modes(lat, &modes).unwrap().len(), 7);
    }

    #[test]
    fn construction_errors() {
        let lat = one_d_lattice(4);
        let dup = vec![Mode::real(vec![1, 0], 1.0), Mode::real(vec![1, 0], 2.0)];
        assert!(matches!(
            SparseCoefficient::from_modes(lat.clone(), &dup),
            Err(Error::DuplicateMode(_))
        ));
        let far = vec![Mode::real(vec![3, 0], 1.0)];
        assert!(matches!(
            SparseCoefficient::from_modes(lat.clone(), &far),
            Err(Error::IndexOutOfRange { .. })
        ));
        let short = vec![Mode::real(vec![1], 1.0)];
        assert!(SparseCoefficient::from_modes(lat, &short).is_err());

        // On N = 2 the residues of +1 and -1 coincide.
        let lat = Arc::new(Lattice::new(2, ProjectionMatrix::identity(1)).unwrap());
        let modes = vec![
            Mode::real(vec![0], 3.0),
            Mode::real(vec![1], 0.5),
            Mode::real(vec![-1], 0.5),
        ];
        assert!(matches!(
            SparseCoefficient::from_modes(lat, &modes),
            Err(Error::ModeCollision { .. })
        ));
    }

    #[test]
    fn tiny_amplitudes_are_dropped() {
        let modes = vec![Mode::real(vec![0, 0], 6.0), Mode::real(vec![1, 0], 1e-16)];
        let a = SparseCoefficient::from_modes(one_d_lattice(4), &modes).unwrap();
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn from_samples_examples() {
        let lat = Arc::new(Lattice::new(4, ProjectionMatrix::identity(2)).unwrap());
        let g = GridField::from_parent(lat.clone(), |_| c(6.0, 0.0)).unwrap();
        let a = SparseCoefficient::from_samples(&g, 1e-12).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a.modes()[0].1 - c(6.0, 0.0)).norm() < 1e-13);

        let g = GridField::from_parent(lat, |y| c(y[0].cos() + y[1].cos() + 6.0, 0.0)).unwrap();
        let a = SparseCoefficient::from_samples(&g, 1e-12).unwrap();
        assert_eq!(a.len(), 5);
        for (k, amp) in a.modes() {
            let expect = if k.iter().all(|&x| x == 0) { 6.0 } else { 0.5 };
            assert!((amp - c(expect, 0.0)).norm() < 1e-13, "{k}");
        }
        assert!(matches!(
            SparseCoefficient::from_samples(&g, 10.0),
            Err(Error::AllModesFiltered(_))
        ));
    }

    #[test]
    fn constant_coefficient_is_diagonal() {
        let lat = Arc::new(Lattice::new(4, ProjectionMatrix::identity(1)).unwrap());
        let a = SparseCoefficient::from_modes(lat.clone(), &[Mode::real(vec![0], 2.0)]).unwrap();
        for conv in [Convolution::Truncated, Convolution::Wrapped] {
            let q = QOperator::new(a.clone(), conv);
            let v = SpectralField::new(lat.clone(), vec![c(1.0, 0.0); 4]).unwrap();
            let out = q.apply(&v).unwrap();
            let expect = [(-2, 8.0), (-1, 2.0), (0, 0.0), (1, 2.0)];
            for (k, val) in expect {
                assert_eq!(out.get(&[k]).unwrap(), c(val, 0.0));
            }
            let dense = q.assemble_dense().unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert_eq!(dense[(i, j)], c(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_input_and_empty_coefficient() {
        let lat = one_d_lattice(4);
        let q = QOperator::new(
            SparseCoefficient::from_modes(lat.clone(), &one_d_alpha()).unwrap(),
            Convolution::Truncated,
        );
        let out = q.apply(&SpectralField::zeros(lat.clone())).unwrap();
        assert!(out.coeffs().iter().all(|z| *z == c(0.0, 0.0)));

        let empty = SparseCoefficient::from_modes(lat.clone(), &[]).unwrap();
        let q = QOperator::new(empty, Convolution::Wrapped);
        let dense = q.assemble_dense().unwrap();
        assert!(dense.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn lattice_mismatch_is_rejected() {
        let q = QOperator::new(
            SparseCoefficient::from_modes(one_d_lattice(4), &one_d_alpha()).unwrap(),
            Convolution::Truncated,
        );
        assert!(matches!(
            q.apply(&SpectralField::zeros(one_d_lattice(8))),
            Err(Error::LatticeMismatch)
        ));
    }

    #[test]
    fn zero_frequency_row_and_column_vanish() {
        let lat = one_d_lattice(8);
        let q = QOperator::new(
            SparseCoefficient::from_modes(lat, &one_d_alpha()).unwrap(),
            Convolution::Wrapped,
        );
        assert!(q.frequency(0).iter().all(|&x| x == 0.0));
        let dense = q.assemble_dense().unwrap();
        for j in 0..q.size() {
            assert_eq!(dense[(0, j)], c(0.0, 0.0));
            assert_eq!(dense[(j, 0)], c(0.0, 0.0));
        }
    }

    // Definitional construction: B = sum_m a_m S^{m_1} ⊗ ... ⊗ S^{m_n}, where S
    // is the cycling permutation (wrapped) or the shift with no wrap
    // (truncated), followed by the Hadamard product with W.
    fn kronecker_oracle(q: &QOperator) -> DMatrix<Complex64> {
        let lat = q.lattice();
        let n_modes = lat.n_modes();
        let shift = |m: i64| -> DMatrix<Complex64> {
            DMatrix::from_fn(n_modes, n_modes, |r, s| {
                let hit = match q.convolution() {
                    Convolution::Wrapped => (r as i64 - s as i64 - m).rem_euclid(n_modes as i64) == 0,
                    Convolution::Truncated => lat.signed(r) - lat.signed(s) == m,
                };
                if hit {
                    c(1.0, 0.0)
                } else {
                    c(0.0, 0.0)
                }
            })
        };
        let size = lat.size();
        let mut b = DMatrix::zeros(size, size);
        for (k, a) in q.alpha().modes() {
            let mut t = shift(k[0]);
            for &m in &k[1..] {
                t = t.kronecker(&shift(m));
            }
            b += t * *a;
        }
        DMatrix::from_fn(size, size, |i, j| {
            let w: f64 = q.frequency(i).iter().zip(q.frequency(j)).map(|(x, y)| x * y).sum();
            b[(i, j)] * w
        })
    }

    fn random_real_coefficient(lat: &Arc<Lattice>, rng: &mut ChaCha8Rng) -> Vec<Mode> {
        let n = lat.torus_dim();
        let h = (lat.n_modes() / 2) as i64;
        let mut modes = vec![Mode::real(vec![0; n], rng.gen_range(1.0..5.0))];
        let mut used: std::collections::HashSet<usize> = [lat.fold_index(&vec![0; n])].into();
        for _ in 0..4 {
            let k: Vec<i64> = (0..n).map(|_| rng.gen_range(-h + 1..h)).collect();
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            if used.contains(&lat.fold_index(&k)) || lat.fold_index(&k) == lat.fold_index(&neg) {
                continue;
            }
            used.insert(lat.fold_index(&k));
            used.insert(lat.fold_index(&neg));
            let a = c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            modes.push(Mode::new(k, a));
            modes.push(Mode::new(neg, a.conj()));
        }
        modes
    }

    #[test]
    fn dense_matches_kronecker_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=3 {
            for n_modes in [2, 4, 6] {
                let lat = Arc::new(Lattice::new(n_modes, ProjectionMatrix::identity(n)).unwrap());
                let modes = random_real_coefficient(&lat, &mut rng);
                let a = SparseCoefficient::from_modes(lat, &modes).unwrap();
                for conv in [Convolution::Truncated, Convolution::Wrapped] {
                    let q = QOperator::new(a.clone(), conv);
                    let diff = (q.assemble_dense().unwrap() - kronecker_oracle(&q)).norm();
                    assert!(diff < 1e-12, "n={n} N={n_modes} {conv:?}: {diff}");
                }
            }
        }
    }

    #[test]
    fn reference_coefficient_matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lat = one_d_lattice(4);
        let a = SparseCoefficient::from_modes(lat.clone(), &one_d_alpha()).unwrap();
        for conv in [Convolution::Truncated, Convolution::Wrapped] {
            let q = QOperator::new(a.clone(), conv);
            let dense = q.assemble_dense().unwrap();
            let v = random_vec(16, &mut rng);
            let fast = q.apply(&SpectralField::new(lat.clone(), v.clone()).unwrap()).unwrap();
            let slow = dense_apply(&dense, &v);
            let scale: f64 = slow.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for (x, y) in fast.coeffs().iter().zip(&slow) {
                assert!((x - y).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn hermitian_and_positive_semidefinite() {
        let lat = Arc::new(Lattice::new(4, ProjectionMatrix::identity(2)).unwrap());
        let modes = vec![
            Mode::real(vec![0, 0], 3.0),
            Mode::new(vec![1, 1], c(0.2, 0.1)),
            Mode::new(vec![-1, -1], c(0.2, -0.1)),
            Mode::real(vec![0, 1], 0.3),
            Mode::real(vec![0, -1], 0.3),
        ];
        let a = SparseCoefficient::from_modes(lat, &modes).unwrap();
        assert!(a.is_conjugate_symmetric(1e-15));
        for conv in [Convolution::Truncated, Convolution::Wrapped] {
            let q = QOperator::new(a.clone(), conv).assemble_dense().unwrap();
            assert!((&q - q.adjoint()).norm() < 1e-12);
            let eig = q.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e >= -1e-10), "{conv:?}: {eig}");
        }
    }

    #[test]
    fn truncated_and_wrapped_agree_away_from_the_boundary() {
        let lat = one_d_lattice(8);
        let a = SparseCoefficient::from_modes(lat.clone(), &one_d_alpha()).unwrap();
        let t = QOperator::new(a.clone(), Convolution::Truncated);
        let w = QOperator::new(a, Convolution::Wrapped);
        let v = SpectralField::delta(lat, &[1, -2], c(1.0, 0.0)).unwrap();
        assert_eq!(t.apply(&v).unwrap(), w.apply(&v).unwrap());
    }

    #[test]
    fn dense_guard() {
        let lat = Arc::new(Lattice::new(512, ProjectionMatrix::identity(2)).unwrap());
        let a = SparseCoefficient::from_modes(lat, &[Mode::real(vec![0, 0], 1.0)]).unwrap();
        assert!(matches!(
            QOperator::new(a, Convolution::Truncated).assemble_dense(),
            Err(Error::TooLargeForDense { .. })
        ));
    }

    #[test]
    fn parallel_path_matches_sequential_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lat = one_d_lattice(128);
        let a = SparseCoefficient::from_modes(lat.clone(), &one_d_alpha()).unwrap();
        let q = QOperator::new(a, Convolution::Truncated);
        let v = random_vec(lat.size(), &mut rng);
        let mut out = vec![c(0.0, 0.0); lat.size()];
        q.apply_into(&v, &mut out).unwrap();
        for i in (0..lat.size()).step_by(97) {
            let mut acc = c(0.0, 0.0);
            for s in i * q.width..(i + 1) * q.width {
                acc += q.weights[s] * v[q.cols[s] as usize];
            }
            assert_eq!(out[i], acc);
        }
    }
}
