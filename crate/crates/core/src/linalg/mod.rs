//! Dense complex linear algebra used by every other module.
//!
//! Matrices are small (the largest operator in a superdense-coding experiment
//! at d = 7 is 49×49), so everything here is a plain row-major `Vec` with
//! straightforward loops. Decompositions live in submodules:
//!
//! - [`eigen`]: Hermitian eigendecomposition through the real symmetric
//!   embedding `[[Re, −Im], [Im, Re]]`, Householder tridiagonalization and
//!   implicit QL.
//! - [`svd`]: one-sided Jacobi SVD and the unitary polar factor.
//! - [`real`]: the real dense kernel shared with the SDP solver.

pub mod eigen;
pub mod real;
pub mod svd;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::policy::NumericPolicy;

pub use eigen::{herm_eig, HermitianEig};
pub use svd::{polar_unitary, svd, Svd};

pub type C64 = Complex64;

/// Largest row or column count accepted by the validating constructors.
pub const MAX_DIM: usize = 256;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Which tensor factor of a bipartite space `H_A ⊗ H_B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Validating constructor: checks length, finiteness and the dimension cap.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("matrix dimensions must be positive".into()));
        }
        if rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::DimensionTooLarge { rows, cols, max: MAX_DIM });
        }
        if data.len() != rows * cols {
            return Err(Error::dims(rows * cols, data.len()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Builds a matrix from real row slices (test and constant helper).
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    /// `|v⟩⟨w|`.
    pub fn outer(ket: &[C64], bra: &[C64]) -> Self {
        Self::from_fn(ket.len(), bra.len(), |i, j| ket[i] * bra[j].conj())
    }

    /// `|v⟩⟨v|`.
    pub fn projector(ket: &[C64]) -> Self {
        Self::outer(ket, ket)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for (i, &z) in v.iter().enumerate() {
            self[(i, j)] = z;
        }
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖H − H†‖_F`; infinite for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `(H + H†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Fallible product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(
                format!("{} rows", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[l * m..(l + 1) * m];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { rows: n, cols: m, data: out })
    }

    /// `tr(A·B)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert!(self.cols == other.rows && self.rows == other.cols, "trace_product dimension");
        let mut acc = ZERO;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += self[(i, j)] * other[(j, i)];
            }
        }
        acc
    }

    /// `Re tr(A·B)` for Hermitian operands, i.e. the Hilbert–Schmidt inner product.
    pub fn inner_re(&self, other: &Self) -> f64 {
        self.trace_product(other).re
    }

    /// `max_{i,j} |A_ij − δ_ij|`-style check collapsed to the operator norm
    /// bound used for completeness checks: the spectral norm of `self − I`.
    pub fn distance_from_identity(&self) -> f64 {
        let n = self.rows;
        let diff = Self::from_fn(n, n, |i, j| {
            let d = if i == j { ONE } else { ZERO };
            self[(i, j)] - d
        });
        spectral_norm_hermitian(&diff)
    }
}

/// Largest absolute eigenvalue of a (nearly) Hermitian matrix.
pub fn spectral_norm_hermitian(h: &ComplexMatrix) -> f64 {
    let sym = h.hermitian_part();
    match eigen::herm_eig_unchecked(&sym) {
        Ok(eig) => eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Err(_) => f64::INFINITY,
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum dimension");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference dimension");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows.saturating_mul(b.rows);
    let cols = a.cols.saturating_mul(b.cols);
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::DimensionTooLarge { rows, cols, max: MAX_DIM });
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    }))
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

fn check_bipartite(x: &ComplexMatrix, dims: (usize, usize)) -> Result<()> {
    let n = dims.0 * dims.1;
    if !x.is_square() || x.rows != n {
        return Err(Error::dims(
            format!("{n}x{n} for dims ({}, {})", dims.0, dims.1),
            format!("{}x{}", x.rows, x.cols),
        ));
    }
    Ok(())
}

/// Partial trace over one factor of `H_A ⊗ H_B`; `keep` names the factor
/// that survives.
pub fn partial_trace(x: &ComplexMatrix, dims: (usize, usize), keep: Subsystem) -> Result<ComplexMatrix> {
    check_bipartite(x, dims)?;
    let (da, db) = dims;
    Ok(match keep {
        Subsystem::A => ComplexMatrix::from_fn(da, da, |a, c| {
            (0..db).map(|b| x[(a * db + b, c * db + b)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(db, db, |b, e| {
            (0..da).map(|a| x[(a * db + b, a * db + e)]).sum()
        }),
    })
}

/// Transpose on one tensor factor only.
pub fn partial_transpose(x: &ComplexMatrix, dims: (usize, usize), subsystem: Subsystem) -> Result<ComplexMatrix> {
    check_bipartite(x, dims)?;
    let (_, db) = dims;
    let n = x.rows;
    Ok(ComplexMatrix::from_fn(n, n, |r, c| {
        let (a, b) = (r / db, r % db);
        let (cc, e) = (c / db, c % db);
        match subsystem {
            Subsystem::A => x[(cc * db + b, a * db + e)],
            Subsystem::B => x[(a * db + e, cc * db + b)],
        }
    }))
}

/// `‖x‖₁` for a Hermitian matrix: the sum of absolute eigenvalues.
pub fn trace_norm(x: &ComplexMatrix, policy: &NumericPolicy) -> Result<f64> {
    let eig = herm_eig(x, policy)?;
    Ok(eig.values.iter().map(|v| v.abs()).sum())
}

/// `½‖ρ − σ‖₁` on raw matrices.
pub fn trace_distance_matrices(rho: &ComplexMatrix, sigma: &ComplexMatrix, policy: &NumericPolicy) -> Result<f64> {
    if rho.rows != sigma.rows || rho.cols != sigma.cols {
        return Err(Error::dims(
            format!("{}x{}", rho.rows, rho.cols),
            format!("{}x{}", sigma.rows, sigma.cols),
        ));
    }
    Ok(0.5 * trace_norm(&(rho - sigma), policy)?)
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a|b⟩`.
pub fn vec_inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    fn phi_plus_projector() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::projector(&[c(s, 0.0), ZERO, ZERO, c(s, 0.0)])
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2).unwrap(), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_block_structure() {
        let k = kron(&sigma_x(), &sigma_z()).unwrap();
        let z = sigma_z();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(k[(i, j)], ZERO);
                assert_eq!(k[(i + 2, j + 2)], ZERO);
                assert_eq!(k[(i, j + 2)], z[(i, j)]);
                assert_eq!(k[(i + 2, j)], z[(i, j)]);
            }
        }
    }

    #[test]
    fn kron_of_diagonals() {
        let k = kron(
            &ComplexMatrix::from_real_diag(&[1.0, 2.0]),
            &ComplexMatrix::from_real_diag(&[3.0, 4.0]),
        )
        .unwrap();
        assert_eq!(k, ComplexMatrix::from_real_diag(&[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn kron_rejects_oversized_result() {
        let big = ComplexMatrix::identity(17);
        let err = kron(&big, &big).unwrap_err();
        assert!(matches!(err, Error::DimensionTooLarge { rows: 289, .. }));
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let r = partial_trace(&phi_plus_projector(), (2, 2), Subsystem::B).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_index_bookkeeping() {
        let x = ComplexMatrix::from_real_diag(&[1.0, 0.0, 0.0, 0.0]);
        let r = partial_trace(&x, (2, 2), Subsystem::A).unwrap();
        assert_eq!(r, ComplexMatrix::from_real_diag(&[1.0, 0.0]));
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let x = ComplexMatrix::identity(4);
        assert!(partial_trace(&x, (2, 3), Subsystem::A).is_err());
        assert!(partial_transpose(&x, (3, 2), Subsystem::A).is_err());
    }

    #[test]
    fn partial_transpose_of_bell_state_is_half_swap() {
        let pt = partial_transpose(&phi_plus_projector(), (2, 2), Subsystem::A).unwrap();
        let swap = ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        assert!(pt.max_abs_diff(&swap.scale(0.5)) < 1e-15);
    }

    #[test]
    fn partial_transpose_identity_and_factorized() {
        let i4 = ComplexMatrix::identity(4);
        assert_eq!(partial_transpose(&i4, (2, 2), Subsystem::A).unwrap(), i4);
        let a = ComplexMatrix::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64 - 0.5));
        let b = ComplexMatrix::from_fn(2, 2, |i, j| c(0.3 * j as f64, i as f64));
        let pt = partial_transpose(&kron(&a, &b).unwrap(), (2, 2), Subsystem::A).unwrap();
        assert_eq!(pt, kron(&a.transpose(), &b).unwrap());
    }

    #[test]
    fn trace_distance_examples() {
        let p = NumericPolicy::default();
        let zero = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        let one = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let mixed = ComplexMatrix::identity(2).scale(0.5);
        assert!((trace_distance_matrices(&zero, &one, &p).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance_matrices(&zero, &zero, &p).unwrap().abs() < 1e-14);
        assert!((trace_distance_matrices(&mixed, &zero, &p).unwrap() - 0.5).abs() < 1e-14);
        assert!(trace_distance_matrices(&mixed, &ComplexMatrix::identity(3), &p).is_err());
    }

    #[test]
    fn constructor_validates() {
        assert!(ComplexMatrix::new(2, 2, vec![ZERO; 3]).is_err());
        assert!(ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(ComplexMatrix::new(300, 1, vec![ZERO; 300]).is_err());
        assert!(ComplexMatrix::new(1, 2, vec![ONE, ZERO]).is_ok());
    }
}
