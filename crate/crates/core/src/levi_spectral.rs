//! The quadric's vector-valued Levi form and its directional spectral data.
//!
//! A quadric `Im w = φ(z, z)` in `ℂⁿ × ℂᵐ` is stored as the `m` Hermitian
//! matrices `A¹, …, Aᵐ` with `φ_j(z, z') = z^* A^j z'`. Contracting with a
//! direction `λ ∈ ℝᵐ` gives `A^λ = Σ λ_j A^j`, whose eigen-decomposition
//! drives every kernel in this crate.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, JACOBI_MAX_SWEEPS};

/// Relative tolerance below which an eigenvalue counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

/// Relative Hermitian defect accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadricForm {
    n: usize,
    matrices: Vec<CMatrix>,
}

impl QuadricForm {
    /// Builds a form from `m ≥ 1` Hermitian `n × n` matrices.
    pub fn new(matrices: Vec<CMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidArgument("a quadric needs at least one matrix".into()))?;
        let n = first.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        for (index, a) in matrices.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::dim("matrix side", n, a.nrows().max(a.ncols())));
            }
            let defect = linalg::hermitian_defect(a);
            let scale = linalg::max_abs(a);
            if defect > HERMITIAN_TOL * scale {
                return Err(Error::NotHermitian {
                    index,
                    max_asymmetry: defect,
                });
            }
        }
        Ok(Self { n, matrices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    /// `A^λ = Σ_j λ_j A^j`.
    pub fn assemble_directional(&self, lambda: &[f64]) -> Result<CMatrix> {
        if lambda.len() != self.m() {
            return Err(Error::dim("direction length", self.m(), lambda.len()));
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("direction must be finite".into()));
        }
        let mut out = CMatrix::zeros(self.n, self.n);
        for (a, &l) in self.matrices.iter().zip(lambda) {
            if l != 0.0 {
                out += a * Complex64::new(l, 0.0);
            }
        }
        Ok(out)
    }

    /// Spectral data of `A^α` for a unit direction `α`.
    pub fn spectral(&self, alpha: &[f64], zero_tol: f64) -> Result<SpectralData> {
        let norm = alpha.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "direction must be a unit vector (|α| = {norm})"
            )));
        }
        let a = self.assemble_directional(alpha)?;
        let eig = linalg::jacobi_hermitian(&a, JACOBI_MAX_SWEEPS)?;
        Ok(SpectralData::from_parts(
            alpha.to_vec(),
            eig.values,
            eig.vectors,
            linalg::max_abs(&a),
            zero_tol,
        ))
    }

    /// Simultaneous conjugation `A^j ↦ V^* A^j V`.
    pub fn conjugated(&self, v: &CMatrix) -> Result<Self> {
        if v.nrows() != self.n || v.ncols() != self.n {
            return Err(Error::dim("conjugating matrix side", self.n, v.nrows()));
        }
        let mats = self
            .matrices
            .iter()
            .map(|a| v.adjoint() * a * v)
            .collect();
        Ok(Self {
            n: self.n,
            matrices: mats,
        })
    }
}

/// Normalizes a nonzero direction; returns `(|λ|, λ/|λ|)`.
pub fn unit_direction(lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
    let norm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain("λ must be nonzero and finite".into()));
    }
    Ok((norm, lambda.iter().map(|x| x / norm).collect()))
}

/// Eigen-decomposition of `A^α` under the crate's labeling: eigenvalues
/// descending, eigenvector phases fixed so the largest entry is real positive.
#[derive(Debug, Clone)]
pub struct SpectralData {
    alpha: Vec<f64>,
    mu: Vec<f64>,
    u: CMatrix,
    scale: f64,
    zero_tol: f64,
    nu: usize,
    n_plus: usize,
    n_minus: usize,
}

impl SpectralData {
    pub(crate) fn from_parts(
        alpha: Vec<f64>,
        mu: Vec<f64>,
        u: CMatrix,
        scale: f64,
        zero_tol: f64,
    ) -> Self {
        let cut = zero_tol * scale;
        let n_plus = mu.iter().filter(|&&x| x > cut).count();
        let n_minus = mu.iter().filter(|&&x| x < -cut).count();
        Self {
            alpha,
            mu,
            u,
            scale,
            zero_tol,
            nu: n_plus + n_minus,
            n_plus,
            n_minus,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn u(&self) -> &CMatrix {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    pub fn n_minus(&self) -> usize {
        self.n_minus
    }

    pub fn signature(&self) -> (usize, usize) {
        (self.n_plus, self.n_minus)
    }

    /// `‖A^α‖_max`, the scale the zero tolerance is relative to.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Sign of eigenvalue slot `j` (0-based): `0` inside the zero band.
    pub fn sign(&self, j: usize) -> i8 {
        let cut = self.zero_tol * self.scale;
        let x = self.mu[j];
        if x > cut {
            1
        } else if x < -cut {
            -1
        } else {
            0
        }
    }

    /// `z^α = (U^α)^* z`.
    pub fn eigen_coordinates(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        if z.len() != n {
            return Err(Error::dim("point dimension", n, z.len()));
        }
        Ok((0..n)
            .map(|j| (0..n).map(|k| self.u[(k, j)].conj() * z[k]).sum())
            .collect())
    }

    /// `C_{K,L}(α)`: the minor of `conj(U^α)` with rows `K` and columns `L`,
    /// so that `dz̄^K = Σ_L C_{K,L} dZ̄^L`. Equal to 1 for `q = 0` and `q = n`.
    pub fn minor_coefficient(&self, k: &MultiIndex, l: &MultiIndex) -> Result<Complex64> {
        self.check_pair(k, l)?;
        let q = k.q();
        if q == 0 || q == self.n() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let rows: Vec<usize> = k.slots().collect();
        let cols: Vec<usize> = l.slots().collect();
        Ok(linalg::sub_determinant(&self.u, &rows, &cols).conj())
    }

    /// `M_{K',L}(α)`: the minor of `U^α` with rows `K'` and columns `L`, so
    /// that `dZ̄^L = Σ_{K'} M_{K',L} dz̄^{K'}`. Same `q ∈ {0, n}` convention.
    pub fn inverse_minor(&self, l: &MultiIndex, k_out: &MultiIndex) -> Result<Complex64> {
        self.check_pair(k_out, l)?;
        let q = l.q();
        if q == 0 || q == self.n() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let rows: Vec<usize> = k_out.slots().collect();
        let cols: Vec<usize> = l.slots().collect();
        Ok(linalg::sub_determinant(&self.u, &rows, &cols))
    }

    fn check_pair(&self, a: &MultiIndex, b: &MultiIndex) -> Result<()> {
        if a.q() != b.q() {
            return Err(Error::dim("multi-index length", a.q(), b.q()));
        }
        let n = self.n();
        for idx in [a, b] {
            if idx.entries().last().is_some_and(|&e| e > n) {
                return Err(Error::InvalidMultiIndex {
                    entries: idx.entries().to_vec(),
                    reason: format!("entries must lie in 1..={n}"),
                });
            }
        }
        Ok(())
    }
}

/// A strictly increasing tuple `(ℓ₁ < … < ℓ_q)` of 1-based slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>, n: usize) -> Result<Self> {
        if entries.len() > n {
            return Err(Error::InvalidMultiIndex {
                entries,
                reason: format!("length exceeds n = {n}"),
            });
        }
        if let Some(&bad) = entries.iter().find(|&&e| e == 0 || e > n) {
            return Err(Error::InvalidMultiIndex {
                reason: format!("entry {bad} outside 1..={n}"),
                entries,
            });
        }
        if entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMultiIndex {
                entries,
                reason: "not strictly increasing".into(),
            });
        }
        Ok(Self(entries))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(n: usize) -> Self {
        Self((1..=n).collect())
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// 0-based slots.
    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|e| e - 1)
    }

    pub fn contains_slot(&self, slot: usize) -> bool {
        self.0.binary_search(&(slot + 1)).is_ok()
    }

    /// All of `I_q` for the given `n`, lexicographically ordered.
    pub fn all(n: usize, q: usize) -> Vec<MultiIndex> {
        (1..=n).combinations(q).map(MultiIndex).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.iter().join("|"))
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    /// Parses the pipe-joined form; the bound on entries is checked later
    /// against the quadric via [`MultiIndex::new`].
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::empty());
        }
        let entries = s
            .split('|')
            .map(|p| {
                p.trim().parse::<usize>().map_err(|_| Error::InvalidMultiIndex {
                    entries: vec![],
                    reason: format!("cannot parse {p:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, usize::MAX)
    }
}
