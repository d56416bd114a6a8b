//! One-sided (Hestenes) Jacobi SVD for complex matrices.
//!
//! Jacobi rotations compute small singular values to high relative accuracy,
//! which matters when counting Schmidt coefficients against a fixed cutoff.

use super::{vec_inner, vec_norm, ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U·diag(σ)·V†` with `k = min(m, n)` singular values in
/// descending order; `U` is `m×k` and `V` is `n×k`, both with orthonormal columns.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let us = ComplexMatrix::from_fn(self.u.rows(), self.u.cols(), |i, j| {
            self.u[(i, j)] * self.singular_values[j]
        });
        &us * &self.v.dagger()
    }
}

pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    if a.rows() < a.cols() {
        let t = svd_tall(&a.dagger())?;
        return Ok(Svd { u: t.v, singular_values: t.singular_values, v: t.u });
    }
    svd_tall(a)
}

fn svd_tall(a: &ComplexMatrix) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { ONE } else { ZERO }).collect())
        .collect();

    // inner products carry rounding error of order m·eps·|a_p|·|a_q|
    let rel_tol = (m.max(1) as f64) * f64::EPSILON;
    let abs_floor = f64::EPSILON * f64::EPSILON * cols.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = vec_inner(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g <= rel_tol * (alpha * beta).sqrt() || g <= abs_floor {
                    continue;
                }
                rotated = true;
                let phi = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s, phi);
                rotate(&mut vcols, p, q, c, s, phi);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { algorithm: "Jacobi SVD", iterations: MAX_SWEEPS });
    }

    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (vec_norm(c), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let smax = order.first().map_or(0.0, |x| x.0);

    let mut u = ComplexMatrix::zeros(m, n);
    let mut v = ComplexMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (k, &(s, j)) in order.iter().enumerate() {
        sigma.push(s);
        v.set_column(k, &vcols[j]);
        if s > smax * 1e-300 && s > 0.0 {
            let uc: Vec<C64> = cols[j].iter().map(|z| z / s).collect();
            basis.push(uc.clone());
            u.set_column(k, &uc);
        } else {
            pending.push(k);
        }
    }
    // complete U for zero singular values
    let mut e = 0;
    for k in pending {
        loop {
            let mut w: Vec<C64> = (0..m).map(|i| if i == e { ONE } else { ZERO }).collect();
            e += 1;
            for b in &basis {
                let ov = vec_inner(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= ov * bi;
                }
            }
            let norm = vec_norm(&w);
            if norm > 1e-8 {
                let w: Vec<C64> = w.iter().map(|z| z / norm).collect();
                u.set_column(k, &w);
                basis.push(w);
                break;
            }
        }
    }
    Ok(Svd { u, singular_values: sigma, v })
}

fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phi: C64) {
    let (left, right) = cols.split_at_mut(q);
    let ap = &mut left[p];
    let aq = &mut right[0];
    for (x, y) in ap.iter_mut().zip(aq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = xp * c - phi.conj() * yq * s;
        *y = phi * xp * s + yq * c;
    }
}

/// Unitary polar factor `W = U·V†` of a square matrix, the unitary closest
/// to `a` in Frobenius norm.
pub fn polar_unitary(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    let s = svd(a)?;
    Ok(&s.u * &s.v.dagger())
}
