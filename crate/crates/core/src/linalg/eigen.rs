//! Hermitian eigendecomposition.
//!
//! `H = A + iB` is embedded as the real symmetric matrix `[[A, −B], [B, A]]`,
//! whose spectrum is that of `H` with every eigenvalue doubled. A real
//! eigenvector `(u, v)` maps to the complex eigenvector `u + iv`; the pair
//! partner `(−v, u)` maps to `i(u + iv)`. Within each cluster of (numerically)
//! equal eigenvalues the complex candidates are reduced to an orthonormal set
//! by pivoted Gram–Schmidt.

use super::real::{sym_eig, RealMatrix};
use super::{vec_inner, vec_norm, ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};
use crate::policy::NumericPolicy;

/// Eigenpairs of a Hermitian matrix with eigenvalues in descending order;
/// eigenvector `k` is column `k` of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.rows();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = ZERO;
            for (k, &w) in fv.iter().enumerate() {
                if w != 0.0 {
                    acc += self.vectors[(i, k)] * self.vectors[(j, k)].conj() * w;
                }
            }
            acc
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|v| v)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of a Hermitian matrix. Input whose relative asymmetry
/// `‖H − H†‖_F / ‖H‖_F` exceeds `policy.symmetry_tol` is rejected; otherwise
/// the Hermitian part is decomposed.
pub fn herm_eig(h: &ComplexMatrix, policy: &NumericPolicy) -> Result<HermitianEig> {
    if !h.is_square() {
        return Err(Error::dims(
            "square matrix",
            format!("{}x{}", h.rows(), h.cols()),
        ));
    }
    let norm = h.frobenius_norm();
    let asym = h.asymmetry();
    let rel = if norm > 0.0 { asym / norm } else { 0.0 };
    if rel > policy.symmetry_tol {
        return Err(Error::NotHermitian { asymmetry: rel, tolerance: policy.symmetry_tol });
    }
    herm_eig_unchecked(&h.hermitian_part())
}

/// Eigendecomposition without the Hermiticity check; only the Hermitian part
/// of the input matters.
pub fn herm_eig_unchecked(h: &ComplexMatrix) -> Result<HermitianEig> {
    let n = h.rows();
    if h.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let embed = RealMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = 0.5 * (h[(i % n, j % n)] + h[(j % n, i % n)].conj());
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = sym_eig(&embed)?;
    // descending order
    let values: Vec<f64> = eig.values.iter().rev().copied().collect();
    let candidate = |k: usize| -> Vec<C64> {
        let col = 2 * n - 1 - k;
        (0..n)
            .map(|i| C64::new(eig.vectors[(i, col)], eig.vectors[(i + n, col)]))
            .collect()
    };

    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let gap_tol = 1e-11 * scale;

    let mut pairs: Vec<(f64, Vec<C64>)> = Vec::with_capacity(n);
    let mut start = 0;
    while start < 2 * n {
        let mut end = start + 1;
        loop {
            while end < 2 * n && values[end - 1] - values[end] <= gap_tol {
                end += 1;
            }
            if (end - start) % 2 == 0 || end >= 2 * n {
                break;
            }
            end += 1;
        }
        let k = (end - start) / 2;
        let mut chosen: Vec<Vec<C64>> = Vec::with_capacity(k);
        let mut residuals: Vec<Vec<C64>> = (start..end).map(candidate).collect();
        for _ in 0..k {
            let (best, _) = residuals
                .iter()
                .enumerate()
                .map(|(i, r)| (i, vec_norm(r)))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let r = residuals.swap_remove(best);
            let norm = vec_norm(&r);
            let mut q: Vec<C64> = r.iter().map(|z| z / norm).collect();
            // re-orthogonalize once for stability
            for prev in &chosen {
                let ov = vec_inner(prev, &q);
                for (qi, pi) in q.iter_mut().zip(prev) {
                    *qi -= ov * pi;
                }
            }
            let norm = vec_norm(&q);
            q.iter_mut().for_each(|z| *z /= norm);
            for res in residuals.iter_mut() {
                let ov = vec_inner(&q, res);
                for (ri, qi) in res.iter_mut().zip(&q) {
                    *ri -= ov * qi;
                }
            }
            chosen.push(q);
        }
        for q in chosen {
            let hq = h.mul_vec(&q);
            let rayleigh = vec_inner(&q, &hq).re;
            pairs.push((rayleigh, q));
        }
        start = end;
    }

    // Vectors from neighbouring clusters are only orthogonal up to
    // eps/gap; a global pass restores orthonormality at a cost of order
    // eps·‖H‖ in the decomposition.
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    for k in 0..pairs.len() {
        let (done, rest) = pairs.split_at_mut(k);
        let q = &mut rest[0].1;
        for _ in 0..2 {
            for (_, prev) in done.iter() {
                let ov = vec_inner(prev, q);
                for (qi, pi) in q.iter_mut().zip(prev) {
                    *qi -= ov * pi;
                }
            }
            let norm = vec_norm(q);
            q.iter_mut().for_each(|z| *z /= norm);
        }
        let hq = h.mul_vec(q);
        rest[0].0 = vec_inner(q, &hq).re;
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, (v, q)) in pairs.into_iter().enumerate() {
        vals.push(v);
        vectors.set_column(k, &q);
    }
    Ok(HermitianEig { values: vals, vectors })
}

/// `H^{1/2}` of a PSD matrix, negative eigenvalues clipped to zero.
pub fn psd_sqrt(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(herm_eig_unchecked(h)?.map(|v| v.max(0.0).sqrt()))
}

/// `H^{-1/2}` of a positive definite matrix.
pub fn inv_sqrt(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig_unchecked(h)?;
    let min = eig.min_value();
    if min <= 0.0 {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(eig.map(|v| 1.0 / v.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_matrix() {
        let h = ComplexMatrix::from_real_diag(&[1.0, 3.0]);
        let eig = herm_eig(&h, &NumericPolicy::default()).unwrap();
        assert_eq!(eig.values.len(), 2);
        assert!((eig.values[0] - 3.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
        assert!((eig.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_x() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let eig = herm_eig(&h, &NumericPolicy::default()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        let v0 = eig.vectors.column(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let overlap = vec_inner(&[c(s, 0.0), c(s, 0.0)], &v0).norm();
        assert!((overlap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_y_complex_eigenvectors() {
        let h = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(0.0, -1.0),
            (1, 0) => c(0.0, 1.0),
            _ => ZERO,
        });
        let eig = herm_eig(&h, &NumericPolicy::default()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!(eig.reconstruct().max_abs_diff(&h) < 1e-14);
    }

    #[test]
    fn degenerate_spectrum_gives_orthonormal_basis() {
        let h = ComplexMatrix::identity(5).scale(2.0);
        let eig = herm_eig(&h, &NumericPolicy::default()).unwrap();
        let vv = &eig.vectors.dagger() * &eig.vectors;
        assert!(vv.max_abs_diff(&ComplexMatrix::identity(5)) < 1e-13);
        assert!(eig.values.iter().all(|v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            herm_eig(&h, &NumericPolicy::default()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn matrix_functions() {
        let h = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(3.0, 0.0),
            (0, 1) => c(0.5, 0.5),
            _ => c(0.5, -0.5),
        });
        let r = psd_sqrt(&h).unwrap();
        assert!((&r * &r).max_abs_diff(&h) < 1e-13);
        let ir = inv_sqrt(&h).unwrap();
        assert!((&(&ir * &h) * &ir).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-13);
    }

    #[test]
    fn nearly_degenerate_spectrum_keeps_orthonormal_vectors() {
        let mut rng = crate::sampling::rng_for(3, 0);
        for _ in 0..20 {
            let u = crate::sampling::haar_unitary(6, &mut rng).unwrap();
            let d = ComplexMatrix::from_real_diag(&[1.0 + 3e-11, 1.0 + 1.3e-11, 1.0, 1.0 - 2e-11, 0.5, 1e-3]);
            let h = (&(&u * &d) * &u.dagger()).hermitian_part();
            let eig = herm_eig(&h, &NumericPolicy::default()).unwrap();
            let gram = &eig.vectors.dagger() * &eig.vectors;
            assert!(gram.max_abs_diff(&ComplexMatrix::identity(6)) < 1e-13);
            let r = eig.reconstruct().max_abs_diff(&h); assert!(r < 1e-13, "{r:e}");
            let s = inv_sqrt(&h).unwrap();
            let e = (&(&s * &h) * &s).max_abs_diff(&ComplexMatrix::identity(6)); assert!(e < 1e-9, "{e:e}");
        }
    }
}
