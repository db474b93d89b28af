//! Dense complex matrices.
//!
//! [`CMatrix`] is a thin newtype over `nalgebra::DMatrix<Complex64>` that owns
//! the numerical conventions used across the crate: the hermitian
//! eigensolver is the single primitive from which the PSD square root and the
//! spectral norm are derived, and all entries are kept finite.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Relative asymmetry accepted by [`CMatrix::herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-8;
/// Condition-number ceiling for [`CMatrix::inverse`].
pub const MAX_CONDITION: f64 = 1e14;
/// Default clipping window for [`CMatrix::psd_sqrt`].
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

/// Eigendecomposition of a hermitian matrix: `A = V diag(λ) V*`, with `λ`
/// ascending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl CMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("matrix dimensions must be positive"));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Builds a matrix from real rows. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let m = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        Self(DMatrix::from_fn(n, m, |i, j| cr(rows[i][j])))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| cr(x)).collect();
        Self::from_diagonal(&d)
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(&self, other: &CMatrix) -> CMatrix {
        let (a, b) = (self.nrows(), other.nrows());
        let (ac, bc) = (self.ncols(), other.ncols());
        let mut m = DMatrix::zeros(a + b, ac + bc);
        m.view_mut((0, 0), (a, ac)).copy_from(&self.0);
        m.view_mut((a, ac), (b, bc)).copy_from(&other.0);
        Self(m)
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    /// Row-major copy of the entries.
    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.nrows() * self.ncols());
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(cr(s))
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        &self.0 * x
    }

    /// `A^n` for `n ≥ 0` by binary powering.
    pub fn pow(&self, mut n: u32) -> CMatrix {
        let mut base = self.0.clone();
        let mut acc = DMatrix::identity(self.nrows(), self.ncols());
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        Self(acc)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        Self(self.0.kronecker(&other.0))
    }

    /// `(A + A*) / 2`.
    pub fn symmetrized(&self) -> CMatrix {
        Self((&self.0 + self.0.adjoint()) * cr(0.5))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `Re x* A x`.
    pub fn quad_form(&self, x: &CVector) -> f64 {
        x.dotc(&(&self.0 * x)).re
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Spectral norm, computed as `√λ_max(A*A)`.
    pub fn opnorm(&self) -> f64 {
        if self.nrows() == 0 || self.ncols() == 0 {
            return 0.0;
        }
        if self.nrows() == 1 && self.ncols() == 1 {
            return self.0[(0, 0)].norm();
        }
        let gram = if self.nrows() >= self.ncols() {
            self.0.adjoint() * &self.0
        } else {
            &self.0 * self.0.adjoint()
        };
        match eigh(&gram) {
            Ok((vals, _)) => vals.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
            // The Frobenius norm bounds the spectral norm; fall back rather
            // than fail for a norm query.
            Err(_) => self.frobenius(),
        }
    }

    /// `‖A − A*‖₂`.
    pub fn hermitian_defect(&self) -> f64 {
        Self(&self.0 - self.0.adjoint()).opnorm()
    }

    /// Hermitian eigendecomposition with ascending eigenvalues.
    pub fn herm_eig(&self) -> Result<HermEig> {
        if !self.is_square() {
            return Err(invalid("herm_eig requires a square matrix"));
        }
        let asym = self.hermitian_defect();
        if asym > HERMITIAN_TOL * self.opnorm().max(1.0) {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let (eigenvalues, vecs) = eigh(&self.0)?;
        Ok(HermEig {
            eigenvalues,
            eigenvectors: Self(vecs),
        })
    }

    /// Non-negative square root of a hermitian PSD matrix.
    ///
    /// Eigenvalues in `[−tol·max(1,‖A‖₂), 0)` are clipped to zero; anything
    /// more negative is rejected.
    pub fn psd_sqrt(&self, tol: f64) -> Result<CMatrix> {
        let eig = self.herm_eig()?;
        let scale = eig
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
            .max(1.0);
        let threshold = tol * scale;
        let min = eig.eigenvalues.first().copied().unwrap_or(0.0);
        if min < -threshold {
            return Err(Error::NotPsd {
                min_eig: min,
                threshold,
            });
        }
        let roots: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
        Ok(eig.reconstruct_with(&roots).symmetrized())
    }

    /// Inverse, rejecting matrices whose condition estimate exceeds
    /// [`MAX_CONDITION`].
    pub fn inverse(&self) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(invalid("inverse requires a square matrix"));
        }
        let inv = self
            .0
            .clone()
            .try_inverse()
            .ok_or(Error::Singular {
                condition: f64::INFINITY,
            })?;
        let inv = Self(inv);
        if !inv.is_finite() {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        let condition = self.opnorm() * inv.opnorm();
        // written to reject NaN as well
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { condition });
        }
        Ok(inv)
    }

    /// Eigenvalues of a general square matrix, sorted by modulus then
    /// argument.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        if !self.is_square() {
            return Err(invalid("eigenvalues requires a square matrix"));
        }
        let n = self.nrows();
        let mut vals: Vec<C64> = if self.is_triangular() {
            (0..n).map(|i| self.0[(i, i)]).collect()
        } else {
            let schur = Schur::try_new(self.0.clone(), f64::EPSILON, 100_000 * n.max(1)).ok_or(
                Error::NoConvergence {
                    what: "Schur decomposition",
                    iterations: 100_000 * n.max(1),
                    residual: f64::NAN,
                },
            )?;
            let (_, t) = schur.unpack();
            (0..n).map(|i| t[(i, i)]).collect()
        };
        vals.sort_by(|a, b| {
            a.norm()
                .total_cmp(&b.norm())
                .then(a.arg().total_cmp(&b.arg()))
        });
        Ok(vals)
    }

    fn is_triangular(&self) -> bool {
        let n = self.nrows();
        let zero = |i: usize, j: usize| self.0[(i, j)] == C64::new(0.0, 0.0);
        let lower = (0..n).all(|i| (i + 1..n).all(|j| zero(i, j)));
        let upper = (0..n).all(|i| (0..i).all(|j| zero(i, j)));
        lower || upper
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> CVector {
        self.0.column(j).into_owned()
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, cols: &[CVector]) -> CMatrix {
        Self(DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]))
    }
}

impl HermEig {
    /// `V diag(values) V*`.
    pub fn reconstruct_with(&self, values: &[f64]) -> CMatrix {
        let v = &self.eigenvectors.0;
        let mut scaled = v.clone();
        for (j, &lam) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        CMatrix(scaled * v.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of the hermitian part of `m`, ascending.
fn eigh(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = m.nrows();
    let sym = (m + m.adjoint()) * cr(0.5);
    let max_iter = 10_000 * n.max(1);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, max_iter).ok_or(Error::NoConvergence {
        what: "hermitian eigensolver",
        iterations: max_iter,
        residual: f64::NAN,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Largest singular value of a small matrix. Closed forms for sizes up to
/// 3×3, the eigensolver otherwise.
pub fn sigma_max(a: &DMatrix<C64>) -> f64 {
    match (a.nrows(), a.ncols()) {
        (1, 1) => a[(0, 0)].norm(),
        (2, 2) => {
            let h = a.adjoint() * a;
            let p = h[(0, 0)].re;
            let q = h[(1, 1)].re;
            let off = h[(0, 1)].norm();
            let mean = 0.5 * (p + q);
            let half = 0.5 * (p - q);
            (mean + (half * half + off * off).sqrt()).max(0.0).sqrt()
        }
        (3, 3) => herm3_max_eig(&(a.adjoint() * a)).max(0.0).sqrt(),
        _ => CMatrix(a.clone()).opnorm(),
    }
}

/// Largest eigenvalue of a 3×3 hermitian matrix by the trigonometric
/// formula for the characteristic cubic.
fn herm3_max_eig(h: &DMatrix<C64>) -> f64 {
    let d = [h[(0, 0)].re, h[(1, 1)].re, h[(2, 2)].re];
    let (h01, h02, h12) = (h[(0, 1)], h[(0, 2)], h[(1, 2)]);
    let p1 = h01.norm_sqr() + h02.norm_sqr() + h12.norm_sqr();
    let q = (d[0] + d[1] + d[2]) / 3.0;
    let b = [d[0] - q, d[1] - q, d[2] - q];
    let p2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2] + 2.0 * p1;
    if p2 <= f64::MIN_POSITIVE {
        return q;
    }
    let p = (p2 / 6.0).sqrt();
    let det = b[0] * b[1] * b[2] + 2.0 * (h01 * h12 * h02.conj()).re
        - b[0] * h12.norm_sqr()
        - b[1] * h02.norm_sqr()
        - b[2] * h01.norm_sqr();
    let half = (det / (p * p * p) / 2.0).clamp(-1.0, 1.0);
    q + 2.0 * p * (half.acos() / 3.0).cos()
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            rows: self.nrows(),
            cols: self.ncols(),
            entries: self.row_major().iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let entries = raw.entries.iter().map(|e| c(e[0], e[1])).collect();
        CMatrix::from_row_major(raw.rows, raw.cols, entries).map_err(serde::de::Error::custom)
    }
}

impl CMatrix {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

/// Vector squared norm, `‖x‖²`.
pub fn norm2(x: &CVector) -> f64 {
    x.norm_squared()
}

/// Builds a vector from real entries.
pub fn real_vector(xs: &[f64]) -> CVector {
    CVector::from_iterator(xs.len(), xs.iter().map(|&x| cr(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_hermitian, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adjoint_examples() {
        let i2 = CMatrix::identity(2);
        assert_eq!(i2.adjoint(), i2);
        let n = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(n.adjoint(), CMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]));
        let i = CMatrix::from_diagonal(&[c(0.0, 1.0)]);
        assert_eq!(i.adjoint(), CMatrix::from_diagonal(&[c(0.0, -1.0)]));
    }

    #[test]
    fn herm_eig_examples() {
        let e = CMatrix::from_real_diagonal(&[2.0, 1.0]).herm_eig().unwrap();
        assert_eq!(e.eigenvalues.len(), 2);
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 2.0).abs() < 1e-14);

        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let e = x.herm_eig().unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let a = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(a.herm_eig(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn herm_eig_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 5);
            let e = a.herm_eig().unwrap();
            let v = &e.eigenvectors;
            let lam = CMatrix::from_real_diagonal(&e.eigenvalues);
            let residual = (&(&a * v) - &(v * &lam)).opnorm();
            assert!(residual <= 1e-10 * a.opnorm().max(1.0), "residual {residual}");
            let ortho = (&(&v.adjoint() * v) - &CMatrix::identity(5)).opnorm();
            assert!(ortho <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn psd_sqrt_examples() {
        let r = CMatrix::from_real_diagonal(&[4.0, 9.0]).psd_sqrt(DEFAULT_PSD_TOL).unwrap();
        assert!(r.max_abs_diff(&CMatrix::from_real_diagonal(&[2.0, 3.0])) < 1e-14);
        let z = CMatrix::zeros(3, 3).psd_sqrt(DEFAULT_PSD_TOL).unwrap();
        assert!(z.max_abs_diff(&CMatrix::zeros(3, 3)) == 0.0);
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        let a = CMatrix::from_real_diagonal(&[1.0, -1e-3]);
        assert!(matches!(a.psd_sqrt(1e-10), Err(Error::NotPsd { .. })));
        // Inside the clipping window.
        let b = CMatrix::from_real_diagonal(&[1.0, -1e-12]);
        let s = b.psd_sqrt(1e-10).unwrap();
        assert!(s.get(1, 1).norm() == 0.0);
    }

    #[test]
    fn opnorm_inverse_examples() {
        let r = 0.3;
        let d = CMatrix::from_real_diagonal(&[1.0, r]);
        assert!((d.opnorm() - 1.0).abs() < 1e-15);
        let inv = d.inverse().unwrap();
        assert!(inv.max_abs_diff(&CMatrix::from_real_diagonal(&[1.0, 1.0 / r])) < 1e-14);
    }

    #[test]
    fn inverse_rejects_singular() {
        let a = CMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(a.inverse(), Err(Error::Singular { .. })));
        let b = CMatrix::from_real_diagonal(&[1.0, 1e-15]);
        assert!(matches!(b.inverse(), Err(Error::Singular { .. })));
    }

    #[test]
    fn eigenvalues_of_general_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 4);
        let vals = a.eigenvalues().unwrap();
        let sum: C64 = vals.iter().sum();
        assert!((sum - a.trace()).norm() < 1e-10);
        for lam in vals {
            let shifted = &a - &CMatrix::identity(4).scale(lam);
            let det = shifted.inner().determinant();
            assert!(det.norm() < 1e-9, "det {det}");
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let a = CMatrix::from_row_major(1, 2, vec![c(1.0, -2.0), c(0.5, 0.0)]).unwrap();
        let s = a.to_json();
        assert_eq!(s, r#"{"rows":1,"cols":2,"entries":[[1.0,-2.0],[0.5,0.0]]}"#);
        assert_eq!(CMatrix::from_json(&s).unwrap(), a);
        assert!(CMatrix::from_json(r#"{"rows":2,"cols":2,"entries":[[1,0]]}"#).is_err());
        assert!(CMatrix::from_json(r#"{"rows":0,"cols":0,"entries":[]}"#).is_err());
    }

    #[test]
    fn sigma_max_matches_opnorm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            for n in 1..=4 {
                let a = random_matrix(&mut rng, n);
                assert!((sigma_max(a.inner()) - a.opnorm()).abs() < 1e-12);
            }
        }
        let d = CMatrix::from_real_diagonal(&[0.5, 0.5, 0.5]);
        assert!((sigma_max(d.inner()) - 0.5).abs() < 1e-15);
        let d = CMatrix::from_real_diagonal(&[0.2, 0.9, 0.9]);
        assert!((sigma_max(d.inner()) - 0.9).abs() < 1e-14);
    }
}
