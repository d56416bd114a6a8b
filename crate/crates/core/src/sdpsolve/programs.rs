//! The two half-steps of the see-saw as SDPs.
//!
//! Measurement step: with the prepared states fixed, maximize
//! `Σ_x tr(ρ_x M_x)` over POVMs. Preparation step: with the POVM fixed,
//! maximize `Σ_x tr(L_x Q_x)` over Choi operators with `tr_{A'} L_x = I`,
//! where `Q_x` collects the shared state and the effect `M_x`. The
//! preparation step splits into one independent SDP per `x`.

use super::choi::ChoiOperator;
use super::{solve_sdp, Constraint, SdpOptions, SdpProblem, SdpSolution, SdpStatus, SparseHermitian};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, ONE};
use crate::protocol::Povm;
use crate::states::DensityOperator;

#[derive(Debug, Clone)]
pub struct PovmOptimum {
    pub povm: Povm,
    /// `(1/N) Σ_x tr(ρ_x M_x)` evaluated on the repaired POVM.
    pub p_suc: f64,
    /// Solver value before repair, same normalization.
    pub solver_value: f64,
    pub solution: SdpSolution,
}

#[derive(Debug, Clone)]
pub struct PreparationOptimum {
    pub chois: Vec<ChoiOperator>,
    /// `(1/N) Σ_x tr(L_x Q_x)` evaluated on the repaired Choi operators.
    pub p_suc: f64,
    pub solver_value: f64,
    pub solutions: Vec<SdpSolution>,
}

/// Constraints `Σ_{blocks} X_block = I` (or `tr_{A'} X = I`) expressed
/// entrywise: one real constraint per diagonal entry and two per
/// off-diagonal pair.
fn identity_constraints(n: usize, entries_for: impl Fn(usize, usize) -> Vec<(usize, SparseHermitianSpec)>) -> Vec<Constraint> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            let kinds: &[(C64, f64)] = if i == j {
                &[(ONE, 1.0)]
            } else {
                &[(ONE, 0.0), (C64::new(0.0, 1.0), 0.0)]
            };
            for &(v, rhs) in kinds {
                let terms = entries_for(i, j)
                    .into_iter()
                    .map(|(blk, spec)| {
                        let mut a = SparseHermitian::new(spec.dim);
                        for (p, q) in spec.positions {
                            a.push(p, q, v);
                        }
                        (blk, a)
                    })
                    .collect();
                out.push(Constraint { terms, rhs });
            }
        }
    }
    out
}

struct SparseHermitianSpec {
    dim: usize,
    positions: Vec<(usize, usize)>,
}

fn check_status(sol: &SdpSolution, what: &str) -> Result<()> {
    if log::log_enabled!(log::Level::Trace) {
        log::trace!("{what} iteration log:\n{}", sol.log_csv());
    }
    match sol.status {
        SdpStatus::Optimal => Ok(()),
        SdpStatus::MaxIterations => {
            log::warn!("{what}: iteration cap reached, gap {:.3e}", sol.gap);
            Ok(())
        }
        SdpStatus::Infeasible => Err(Error::Solver(format!("{what}: infeasible"))),
    }
}

/// Optimal POVM for discriminating the given equiprobable states.
pub fn optimize_povm(prepared: &[DensityOperator], opts: &SdpOptions) -> Result<PovmOptimum> {
    let n_states = prepared.len();
    if n_states == 0 {
        return Err(Error::InvalidParameter("need at least one state".into()));
    }
    let dims = prepared[0].dims();
    if let Some(bad) = prepared.iter().find(|r| r.dims() != dims) {
        return Err(Error::dims(format!("{dims:?}"), format!("{:?}", bad.dims())));
    }
    let n = prepared[0].dim();
    let problem = SdpProblem {
        blocks: vec![n; n_states],
        objective: prepared.iter().map(|r| r.matrix().clone()).collect(),
        constraints: identity_constraints(n, |i, j| {
            (0..n_states)
                .map(|x| (x, SparseHermitianSpec { dim: n, positions: vec![(i, j)] }))
                .collect()
        }),
    };
    let solution = solve_sdp(&problem, opts)?;
    check_status(&solution, "measurement SDP")?;
    let povm = Povm::repaired(&solution.primal_blocks)?;
    let p_suc = prepared
        .iter()
        .zip(povm.effects())
        .map(|(r, m)| r.matrix().inner_re(m))
        .sum::<f64>()
        / n_states as f64;
    Ok(PovmOptimum { povm, p_suc, solver_value: solution.primal_value / n_states as f64, solution })
}

/// `Q_{(c,c'),(a,a')} = Σ_{b,e} ρ_{(a,b),(c,e)} M_{(c',e),(a',b)}`, so that
/// `tr(L Q) = tr[((Λ⊗id)ρ) M]` for the channel `Λ` with Choi matrix `L`.
pub fn preparation_objective(shared: &DensityOperator, effect: &ComplexMatrix) -> ComplexMatrix {
    let (d, db) = shared.dims();
    let rho = shared.matrix();
    ComplexMatrix::from_fn(d * d, d * d, |r, col| {
        let (c, cp) = (r / d, r % d);
        let (a, ap) = (col / d, col % d);
        let mut acc = C64::new(0.0, 0.0);
        for b in 0..db {
            for e in 0..db {
                acc += rho[(a * db + b, c * db + e)] * effect[(cp * db + e, ap * db + b)];
            }
        }
        acc
    })
    .hermitian_part()
}

/// Optimal local channels on the first factor of `shared` for a fixed POVM.
pub fn optimize_preparations(shared: &DensityOperator, povm: &Povm, opts: &SdpOptions) -> Result<PreparationOptimum> {
    let (d, db) = shared.dims();
    let n = d * db;
    if let Some(e) = povm.effects().iter().find(|e| e.rows() != n) {
        return Err(Error::dims(format!("{n}x{n} effects"), format!("{}x{}", e.rows(), e.cols())));
    }
    let n_prep = povm.effects().len();
    let mut chois = Vec::with_capacity(n_prep);
    let mut solutions = Vec::with_capacity(n_prep);
    let mut p_suc = 0.0;
    let mut solver_value = 0.0;
    let constraints = identity_constraints(d, |i, j| {
        vec![(0, SparseHermitianSpec { dim: d * d, positions: (0..d).map(|k| (i * d + k, j * d + k)).collect() })]
    });
    for effect in povm.effects() {
        let q = preparation_objective(shared, effect);
        let problem = SdpProblem { blocks: vec![d * d], objective: vec![q.clone()], constraints: constraints.clone() };
        let sol = solve_sdp(&problem, opts)?;
        check_status(&sol, "preparation SDP")?;
        let choi = ChoiOperator::repaired(&sol.primal_blocks[0], d)?;
        p_suc += choi.matrix().inner_re(&q);
        solver_value += sol.primal_value;
        chois.push(choi);
        solutions.push(sol);
    }
    Ok(PreparationOptimum {
        chois,
        p_suc: p_suc / n_prep as f64,
        solver_value: solver_value / n_prep as f64,
        solutions,
    })
}
