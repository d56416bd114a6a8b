//! Choi operators of channels `D(H_A) → D(H_A')` with `dim H_A = dim H_A'`.
//!
//! Index convention: `L` acts on `H_A ⊗ H_A'`, row index `a·d + a'`, and
//! `Λ(X)_{a'c'} = Σ_{a,c} X_{ac} L_{(a,a'),(c,c')}`.

use crate::error::{Error, Result};
use crate::linalg::eigen::inv_sqrt;
use crate::linalg::{herm_eig, kron, partial_trace, partial_transpose, ComplexMatrix, Subsystem, ZERO};
use crate::policy::NumericPolicy;
use crate::states::DensityOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    matrix: ComplexMatrix,
    d: usize,
}

impl ChoiOperator {
    /// Validates complete positivity and `tr_{A'} L = I_A`.
    pub fn new(matrix: ComplexMatrix, d: usize, policy: &NumericPolicy) -> Result<Self> {
        if matrix.rows() != d * d || matrix.cols() != d * d {
            return Err(Error::dims(
                format!("{0}x{0}", d * d),
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        let eig = herm_eig(&matrix, policy)?;
        if eig.min_value() < -policy.psd_tol {
            return Err(Error::NotPsd { min_eigenvalue: eig.min_value() });
        }
        let t = partial_trace(&matrix, (d, d), Subsystem::A)?;
        let dev = t.distance_from_identity();
        if dev > policy.completeness_tol {
            return Err(Error::NotTracePreserving { deviation: dev });
        }
        Ok(Self { matrix: matrix.hermitian_part(), d })
    }

    /// Projects an approximately valid Choi matrix (e.g. an SDP iterate) onto
    /// exact trace preservation: `L ↦ (T^{-1/2}⊗I) L (T^{-1/2}⊗I)` with
    /// `T = tr_{A'} L`. Negative eigenvalues are clipped first.
    pub fn repaired(matrix: &ComplexMatrix, d: usize) -> Result<Self> {
        let eig = herm_eig(&matrix.hermitian_part(), &NumericPolicy::default())?;
        let l = if eig.min_value() < 0.0 { eig.map(|v| v.max(0.0)) } else { matrix.hermitian_part() };
        let t = partial_trace(&l, (d, d), Subsystem::A)?;
        let s = kron(&inv_sqrt(&t)?, &ComplexMatrix::identity(d))?;
        let fixed = (&(&s * &l) * &s).hermitian_part();
        Ok(Self { matrix: fixed, d })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `‖tr_{A'} L − I‖` in operator norm.
    pub fn trace_preservation_error(&self) -> f64 {
        partial_trace(&self.matrix, (self.d, self.d), Subsystem::A)
            .map(|t| t.distance_from_identity())
            .unwrap_or(f64::INFINITY)
    }

    /// Applies `Λ ⊗ id` to a bipartite state whose first factor has dimension `d`.
    pub fn apply_to_first(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let d = self.d;
        let (da, db) = rho.dims();
        if da != d {
            return Err(Error::dims(format!("d_A = {d}"), format!("d_A = {da}")));
        }
        let x = rho.matrix();
        let l = &self.matrix;
        let n = d * db;
        let mut out = ComplexMatrix::zeros(n, n);
        for a in 0..d {
            for c in 0..d {
                for ap in 0..d {
                    for cp in 0..d {
                        let w = l[(a * d + ap, c * d + cp)];
                        if w == ZERO {
                            continue;
                        }
                        for b in 0..db {
                            for e in 0..db {
                                out[(ap * db + b, cp * db + e)] += w * x[(a * db + b, c * db + e)];
                            }
                        }
                    }
                }
            }
        }
        Ok(DensityOperator::from_parts(out.hermitian_part(), d, db))
    }
}

/// `Λ(ρ) = tr_A[(ρᵀ ⊗ I_{A'}) L]`.
pub fn apply_choi(choi: &ChoiOperator, rho_a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = choi.d;
    if rho_a.rows() != d || rho_a.cols() != d {
        return Err(Error::dims(format!("{d}x{d}"), format!("{}x{}", rho_a.rows(), rho_a.cols())));
    }
    let lifted = kron(&rho_a.transpose(), &ComplexMatrix::identity(d))?;
    let prod = lifted.matmul(&choi.matrix)?;
    partial_trace(&prod, (d, d), Subsystem::B)
}

/// `(I ⊗ U) (Σ_{ij} |ii⟩⟨jj|) (I ⊗ U†)`.
pub fn unitary_choi(u: &ComplexMatrix) -> ChoiOperator {
    let d = u.rows();
    let m = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (a, ap) = (r / d, r % d);
        let (cc, cp) = (c / d, c % d);
        u[(ap, a)] * u[(cp, cc)].conj()
    });
    ChoiOperator { matrix: m, d }
}

/// Choi matrix of the identity channel, `Σ_{ij} |ii⟩⟨jj|`.
pub fn identity_choi(d: usize) -> ChoiOperator {
    unitary_choi(&ComplexMatrix::identity(d))
}

/// Choi matrix of the completely depolarizing channel, `I/d`.
pub fn depolarizing_choi(d: usize) -> ChoiOperator {
    ChoiOperator { matrix: ComplexMatrix::identity(d * d).scale(1.0 / d as f64), d }
}

/// `tr[(L ⊗ I_B)(ρ^{T_A} ⊗ I_{A'})(I_A ⊗ M)]`, the preparation-program
/// objective written on `H_A ⊗ H_A' ⊗ H_B`.
pub fn choi_objective_term(
    choi: &ChoiOperator,
    rho: &DensityOperator,
    effect: &ComplexMatrix,
) -> Result<f64> {
    let d = choi.d;
    let (_, db) = rho.dims();
    let id_b = ComplexMatrix::identity(db);
    let id_a = ComplexMatrix::identity(d);
    let l_ib = kron(&choi.matrix, &id_b)?;
    let rho_ta = partial_transpose(rho.matrix(), rho.dims(), Subsystem::A)?;
    // ρ^{T_A} lives on A⊗B; insert A' in the middle
    let n = d * d * db;
    let rho_mid = ComplexMatrix::from_fn(n, n, |r, c| {
        let (a, ap, b) = (r / (d * db), (r / db) % d, r % db);
        let (cc, cp, e) = (c / (d * db), (c / db) % d, c % db);
        if ap == cp {
            rho_ta[(a * db + b, cc * db + e)]
        } else {
            ZERO
        }
    });
    let i_m = kron(&id_a, effect)?;
    let prod = &(&l_ib * &rho_mid) * &i_m;
    Ok(prod.trace().re)
}
