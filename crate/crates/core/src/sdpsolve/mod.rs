//! Small dense SDPs over Hermitian PSD blocks.
//!
//! A complex problem `max Σ_i Re tr(C_i X_i)` subject to
//! `Σ_i Re tr(A_{j,i} X_i) = b_j`, `X_i ⪰ 0` is mapped to a real symmetric
//! problem through `X ↦ [[Re X, −Im X], [Im X, Re X]]`, which doubles traces.
//! The real problem is solved by the primal-dual interior-point method in
//! [`ipm`] and the complex solution is read back from the embedded blocks.

pub mod choi;
mod ipm;
pub mod programs;

use crate::error::{Error, Result};
use crate::linalg::real::RealMatrix;
use crate::linalg::{ComplexMatrix, C64};

pub use choi::{apply_choi, unitary_choi, ChoiOperator};
pub use ipm::IterationRecord;
pub use programs::{optimize_povm, optimize_preparations, PovmOptimum, PreparationOptimum};

/// Hermitian matrix given by its upper-triangle entries `(i, j, v)`, `i ≤ j`;
/// the lower triangle is implied by `H_ji = conj(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseHermitian {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Adds `v` at `(i, j)` and `conj(v)` at `(j, i)`; diagonal values must be real.
    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        let (i, j, v) = if i <= j { (i, j, v) } else { (j, i, v.conj()) };
        self.entries.push((i, j, v));
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            if i == j {
                m[(i, i)] += C64::new(v.re, 0.0);
            } else {
                m[(i, j)] += v;
                m[(j, i)] += v.conj();
            }
        }
        m
    }

    /// Entries of the real embedding, listing both `(p, q)` and `(q, p)`.
    fn embed(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dim;
        let mut out = Vec::with_capacity(self.entries.len() * 8);
        for &(i, j, v) in &self.entries {
            if i == j {
                if v.re != 0.0 {
                    out.push((i, i, v.re));
                    out.push((i + n, i + n, v.re));
                }
                continue;
            }
            if v.re != 0.0 {
                for (p, q) in [(i, j), (j, i), (i + n, j + n), (j + n, i + n)] {
                    out.push((p, q, v.re));
                }
            }
            if v.im != 0.0 {
                // Im block of A: (Im A)_ij = v.im, (Im A)_ji = −v.im
                out.push((i + n, j, v.im));
                out.push((j, i + n, v.im));
                out.push((j + n, i, -v.im));
                out.push((i, j + n, -v.im));
            }
        }
        out
    }
}

/// One equality constraint `Σ_i Re tr(A_i X_{block_i}) = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, SparseHermitian)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<ComplexMatrix>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return Err(Error::InvalidParameter("SDP needs at least one nonempty block".into()));
        }
        if self.objective.len() != self.blocks.len() {
            return Err(Error::dims(format!("{} objective blocks", self.blocks.len()), self.objective.len()));
        }
        for (c, &n) in self.objective.iter().zip(&self.blocks) {
            if c.rows() != n || c.cols() != n {
                return Err(Error::dims(format!("{n}x{n} objective"), format!("{}x{}", c.rows(), c.cols())));
            }
            let norm = c.frobenius_norm().max(1.0);
            if c.asymmetry() > 1e-10 * norm {
                return Err(Error::NotHermitian { asymmetry: c.asymmetry() / norm, tolerance: 1e-10 });
            }
        }
        for con in &self.constraints {
            if !con.rhs.is_finite() {
                return Err(Error::NonFinite);
            }
            for (blk, a) in &con.terms {
                let n = *self.blocks.get(*blk).ok_or_else(|| {
                    Error::InvalidParameter(format!("constraint refers to missing block {blk}"))
                })?;
                if a.dim != n || a.entries.iter().any(|&(i, j, _)| j >= n || i > j) {
                    return Err(Error::dims(format!("entries inside {n}x{n}"), "out-of-range entry"));
                }
                if a.entries.iter().any(|&(i, j, v)| i == j && v.im.abs() > 1e-10) {
                    return Err(Error::NotHermitian { asymmetry: 1.0, tolerance: 1e-10 });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub primal_blocks: Vec<ComplexMatrix>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal − dual| / max(1, |primal|)`.
    pub gap: f64,
    /// Largest constraint violation `|A(X) − b|`.
    pub primal_residual: f64,
    /// Smallest eigenvalue over the primal blocks.
    pub min_eigenvalue: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

impl SdpSolution {
    /// Iteration log as CSV with a header row.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iteration,mu,primal_value,dual_value,primal_residual,dual_residual,step,sigma\n");
        for r in &self.log {
            s.push_str(&format!(
                "{},{:.6e},{:.12e},{:.12e},{:.3e},{:.3e},{:.6},{:.6}\n",
                r.iteration, r.mu, r.primal_value, r.dual_value, r.primal_residual, r.dual_residual, r.step, r.sigma
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: 100 }
    }
}

/// Solves the problem; `Infeasible` is reported as an error, an exhausted
/// iteration budget as `SdpStatus::MaxIterations` with the last iterate.
pub fn solve_sdp(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let real = embed_problem(problem);
    let sol = ipm::solve(&real, opts)?;
    if sol.status == SdpStatus::Infeasible {
        return Err(Error::Infeasible("constraints are inconsistent".into()));
    }

    let primal_blocks: Vec<ComplexMatrix> = sol
        .x
        .iter()
        .zip(&problem.blocks)
        .map(|(x, &n)| extract_complex(x, n))
        .collect();
    let primal_value: f64 = primal_blocks.iter().zip(&problem.objective).map(|(x, c)| c.inner_re(x)).sum();
    let dual_value = 0.5 * sol.dual_value;
    let mut primal_residual = 0.0_f64;
    for con in &problem.constraints {
        let lhs: f64 = con.terms.iter().map(|(b, a)| a.to_dense().inner_re(&primal_blocks[*b])).sum();
        primal_residual = primal_residual.max((lhs - con.rhs).abs());
    }
    let mut min_eigenvalue = f64::INFINITY;
    for x in &primal_blocks {
        let e = crate::linalg::eigen::herm_eig_unchecked(x)?;
        min_eigenvalue = min_eigenvalue.min(e.min_value());
    }
    Ok(SdpSolution {
        gap: (primal_value - dual_value).abs() / primal_value.abs().max(1.0),
        primal_blocks,
        primal_value,
        dual_value,
        primal_residual,
        min_eigenvalue,
        status: sol.status,
        iterations: sol.iterations,
        log: sol.log,
    })
}

pub(crate) struct RealConstraint {
    pub terms: Vec<(usize, Vec<(usize, usize, f64)>)>,
    pub rhs: f64,
}

pub(crate) struct RealProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<RealMatrix>,
    pub constraints: Vec<RealConstraint>,
}

fn embed_matrix(c: &ComplexMatrix) -> RealMatrix {
    let n = c.rows();
    RealMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let h = 0.5 * (c[(i % n, j % n)] + c[(j % n, i % n)].conj());
        match (i < n, j < n) {
            (true, true) | (false, false) => h.re,
            (true, false) => -h.im,
            (false, true) => h.im,
        }
    })
}

fn embed_problem(p: &SdpProblem) -> RealProblem {
    RealProblem {
        blocks: p.blocks.iter().map(|n| 2 * n).collect(),
        objective: p.objective.iter().map(embed_matrix).collect(),
        constraints: p
            .constraints
            .iter()
            .map(|c| RealConstraint {
                terms: c.terms.iter().map(|(b, a)| (*b, a.embed())).collect(),
                rhs: 2.0 * c.rhs,
            })
            .collect(),
    }
}

/// Complex block from an embedded real block, averaging the redundant copies.
fn extract_complex(x: &RealMatrix, n: usize) -> ComplexMatrix {
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        C64::new(re, im)
    });
    m.hermitian_part()
}
