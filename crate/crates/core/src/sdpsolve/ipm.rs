//! Primal-dual interior-point method for real block-diagonal SDPs
//!
//! ```text
//! max ⟨C, X⟩  s.t.  A(X) = b,  X ⪰ 0        min bᵀy  s.t.  A*(y) − Z = C,  Z ⪰ 0
//! ```
//!
//! Search directions use Nesterov–Todd scaling with a Mehrotra
//! predictor-corrector step. With the scaling `G`, `X = G D Gᵀ` and
//! `Z = G⁻ᵀ D G⁻¹` for a diagonal `D`, and the Newton system reduces to the
//! Schur complement `M_ij = tr(A_i W A_j W)` with `W = G Gᵀ`.

use std::collections::BTreeMap;

use super::{RealProblem, SdpOptions, SdpStatus};
use crate::error::{Error, Result};
use crate::linalg::real::{cholesky, cholesky_solve, sym_eig, sym_eigenvalues, RealMatrix};

/// Fraction of the distance to the cone boundary taken per step.
const STEP_FRACTION: f64 = 0.98;

/// One line of the solver's diagnostic log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mu: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub step: f64,
    pub sigma: f64,
}

pub(crate) struct RealSolution {
    pub x: Vec<RealMatrix>,
    pub dual_value: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

/// Constraint rows in canonical sparse form: sorted, merged `(block, p, q, v)`
/// with both triangles present.
struct Rows {
    rows: Vec<Vec<(usize, usize, usize, f64)>>,
    rhs: Vec<f64>,
    /// For each block, the rows touching it with their entries in that block.
    by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
}

impl Rows {
    fn apply(&self, x: &[RealMatrix]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(b, p, q, v)| v * x[b][(p, q)]).sum())
            .collect()
    }

    fn adjoint(&self, y: &[f64], blocks: &[usize]) -> Vec<RealMatrix> {
        let mut out: Vec<RealMatrix> = blocks.iter().map(|&n| RealMatrix::zeros(n, n)).collect();
        for (row, &yj) in self.rows.iter().zip(y) {
            for &(b, p, q, v) in row {
                out[b][(p, q)] += yj * v;
            }
        }
        out
    }
}

fn canonical_rows(p: &RealProblem) -> Vec<Vec<(usize, usize, usize, f64)>> {
    p.constraints
        .iter()
        .map(|c| {
            let mut map: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
            for (b, entries) in &c.terms {
                for &(i, j, v) in entries {
                    *map.entry((*b, i, j)).or_insert(0.0) += v;
                }
            }
            map.into_iter().filter(|(_, v)| *v != 0.0).map(|((b, i, j), v)| (b, i, j, v)).collect()
        })
        .collect()
}

fn sparse_dot(a: &[(usize, usize, usize, f64)], b: &[(usize, usize, usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let ka = (a[i].0, a[i].1, a[i].2);
        let kb = (b[j].0, b[j].1, b[j].2);
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].3 * b[j].3;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Drops linearly dependent rows, checking that they are consistent.
/// Returns `None` when some dependent row contradicts the others.
fn independent_rows(p: &RealProblem) -> Option<Rows> {
    let rows = canonical_rows(p);
    let rhs: Vec<f64> = p.constraints.iter().map(|c| c.rhs).collect();
    let mut kept: Vec<usize> = Vec::new();
    // Cholesky factor of the Gram matrix of kept rows, row-major lower triangle
    let mut l: Vec<Vec<f64>> = Vec::new();
    for j in 0..rows.len() {
        let gjj = sparse_dot(&rows[j], &rows[j]);
        let g: Vec<f64> = kept.iter().map(|&k| sparse_dot(&rows[k], &rows[j])).collect();
        let mut z = vec![0.0; kept.len()];
        for i in 0..kept.len() {
            let mut s = g[i];
            for k in 0..i {
                s -= l[i][k] * z[k];
            }
            z[i] = s / l[i][i];
        }
        let resid = gjj - z.iter().map(|v| v * v).sum::<f64>();
        if gjj > 0.0 && resid > 1e-10 * gjj {
            let mut row = z.clone();
            row.push(resid.sqrt());
            l.push(row);
            kept.push(j);
        } else {
            // coefficients c with row_j = Σ c_k row_k: solve Lᵀ c = z
            let mut c = z.clone();
            for i in (0..kept.len()).rev() {
                let mut s = c[i];
                for k in (i + 1)..kept.len() {
                    s -= l[k][i] * c[k];
                }
                c[i] = s / l[i][i];
            }
            let implied: f64 = c.iter().zip(&kept).map(|(ci, &k)| ci * rhs[k]).sum();
            if (implied - rhs[j]).abs() > 1e-9 * (1.0 + rhs[j].abs()) {
                return None;
            }
        }
    }
    let rows: Vec<_> = kept.iter().map(|&k| rows[k].clone()).collect();
    let rhs: Vec<f64> = kept.iter().map(|&k| rhs[k]).collect();
    let mut by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = vec![Vec::new(); p.blocks.len()];
    for (j, row) in rows.iter().enumerate() {
        let mut per: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for &(b, pp, q, v) in row {
            per.entry(b).or_default().push((pp, q, v));
        }
        for (b, e) in per {
            by_block[b].push((j, e));
        }
    }
    Some(Rows { rows, rhs, by_block })
}

fn dot_blocks(a: &[RealMatrix], b: &[RealMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm_blocks(a: &[RealMatrix]) -> f64 {
    dot_blocks(a, a).sqrt()
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Nesterov–Todd scaling of one block.
struct Scaling {
    g: RealMatrix,
    g_inv: RealMatrix,
    w: RealMatrix,
    d: Vec<f64>,
}

fn nt_scaling(x: &RealMatrix, z: &RealMatrix) -> Option<Scaling> {
    let ex = sym_eig(x).ok()?;
    if ex.values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let p = ex.map(f64::sqrt);
    let p_inv = ex.map(|v| 1.0 / v.sqrt());
    let pzp = p.matmul(z).matmul(&p).symmetrized();
    let el = sym_eig(&pzp).ok()?;
    if el.values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let n = x.rows();
    let q = &el.vectors;
    // G = P Q Λ^{-1/4},  G⁻¹ = Λ^{1/4} Qᵀ P⁻¹
    let pq = p.matmul(q);
    let g = RealMatrix::from_fn(n, n, |i, j| pq[(i, j)] * el.values[j].powf(-0.25));
    let qtpi = q.transpose().matmul(&p_inv);
    let g_inv = RealMatrix::from_fn(n, n, |i, j| el.values[i].powf(0.25) * qtpi[(i, j)]);
    let w = g.matmul(&g.transpose()).symmetrized();
    let d = el.values.iter().map(|v| v.sqrt()).collect();
    Some(Scaling { g, g_inv, w, d })
}

/// Largest step `α` keeping `D + α Δ ⪰ 0`, via the eigenvalues of `D^{-1/2} Δ D^{-1/2}`.
fn max_step(d: &[f64], delta: &RealMatrix) -> Result<f64> {
    let n = d.len();
    let s = RealMatrix::from_fn(n, n, |i, j| delta[(i, j)] / (d[i] * d[j]).sqrt()).symmetrized();
    let min = sym_eigenvalues(&s)?[0];
    Ok(if min < 0.0 { -1.0 / min } else { f64::INFINITY })
}

struct Workspace<'a> {
    rows: &'a Rows,
    blocks: &'a [usize],
    scalings: Vec<Scaling>,
    chol: RealMatrix,
}

impl Workspace<'_> {
    /// Direction for complementarity target `R_c` (given in scaled form per block).
    fn direction(
        &self,
        rc_scaled: &[RealMatrix],
        r_p: &[f64],
        r_d: &[RealMatrix],
    ) -> (Vec<RealMatrix>, Vec<f64>, Vec<RealMatrix>) {
        let rc: Vec<RealMatrix> = rc_scaled
            .iter()
            .zip(&self.scalings)
            .map(|(r, s)| s.g.matmul(r).matmul(&s.g.transpose()))
            .collect();
        let mut t = Vec::with_capacity(rc.len());
        for ((r, s), rd) in rc.iter().zip(&self.scalings).zip(r_d) {
            let mut m = s.w.matmul(rd).matmul(&s.w);
            m.add_scaled(r, 1.0);
            t.push(m);
        }
        let mut rhs = self.rows.apply(&t);
        for (v, rp) in rhs.iter_mut().zip(r_p) {
            *v -= rp;
        }
        let dy = cholesky_solve(&self.chol, &rhs);
        let mut dz = self.rows.adjoint(&dy, self.blocks);
        for (z, rd) in dz.iter_mut().zip(r_d) {
            z.add_scaled(rd, -1.0);
        }
        let dx: Vec<RealMatrix> = rc
            .iter()
            .zip(&self.scalings)
            .zip(&dz)
            .map(|((r, s), z)| {
                let mut m = r.clone();
                m.add_scaled(&s.w.matmul(z).matmul(&s.w), -1.0);
                m.symmetrized()
            })
            .collect();
        (dx, dy, dz.into_iter().map(|z| z.symmetrized()).collect())
    }

    fn scaled(&self, dx: &[RealMatrix], dz: &[RealMatrix]) -> (Vec<RealMatrix>, Vec<RealMatrix>) {
        let sx = dx
            .iter()
            .zip(&self.scalings)
            .map(|(m, s)| s.g_inv.matmul(m).matmul(&s.g_inv.transpose()).symmetrized())
            .collect();
        let sz = dz
            .iter()
            .zip(&self.scalings)
            .map(|(m, s)| s.g.transpose().matmul(m).matmul(&s.g).symmetrized())
            .collect();
        (sx, sz)
    }

    fn step_bound(&self, sx: &[RealMatrix], sz: &[RealMatrix]) -> Result<f64> {
        let mut alpha = f64::INFINITY;
        for ((s, x), z) in self.scalings.iter().zip(sx).zip(sz) {
            alpha = alpha.min(max_step(&s.d, x)?).min(max_step(&s.d, z)?);
        }
        Ok(alpha)
    }
}

fn schur_complement(rows: &Rows, scalings: &[Scaling], blocks: &[usize]) -> RealMatrix {
    let m = rows.rows.len();
    let mut out = RealMatrix::zeros(m, m);
    for (b, touching) in rows.by_block.iter().enumerate() {
        let n = blocks[b];
        let w = &scalings[b].w;
        for (idx, (i, entries)) in touching.iter().enumerate() {
            // B = W A_i W
            let mut bm = RealMatrix::zeros(n, n);
            for &(p, q, v) in entries {
                for r in 0..n {
                    let wrp = v * w[(r, p)];
                    if wrp == 0.0 {
                        continue;
                    }
                    for s in 0..n {
                        bm[(r, s)] += wrp * w[(q, s)];
                    }
                }
            }
            for (j, entries_j) in touching.iter().skip(idx) {
                let val: f64 = entries_j.iter().map(|&(r, s, c)| c * bm[(r, s)]).sum();
                out[(*i, *j)] += val;
                if i != j {
                    out[(*j, *i)] += val;
                }
            }
        }
    }
    out
}

fn factor_schur(m: &RealMatrix, iteration: usize) -> Result<RealMatrix> {
    if let Some(l) = cholesky(m) {
        return Ok(l);
    }
    let scale = (0..m.rows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut reg = 1e-14 * scale;
    for _ in 0..6 {
        let mut shifted = m.clone();
        for i in 0..m.rows() {
            shifted[(i, i)] += reg;
        }
        if let Some(l) = cholesky(&shifted) {
            return Ok(l);
        }
        reg *= 100.0;
    }
    Err(Error::SingularSystem { iteration })
}

pub(crate) fn solve(p: &RealProblem, opts: &SdpOptions) -> Result<RealSolution> {
    let Some(rows) = independent_rows(p) else {
        return Ok(RealSolution {
            x: Vec::new(),
            dual_value: f64::NAN,
            status: SdpStatus::Infeasible,
            iterations: 0,
            log: Vec::new(),
        });
    };
    let blocks = &p.blocks;
    let n_total: usize = blocks.iter().sum();
    let b = &rows.rhs;
    let c = &p.objective;
    let b_norm = vec_norm(b);
    let c_norm = norm_blocks(c);

    // primal start: the multiple of I closest to satisfying A(X) = b
    let eye: Vec<RealMatrix> = blocks.iter().map(|&n| RealMatrix::identity(n)).collect();
    let a_eye = rows.apply(&eye);
    let a_eye_sq: f64 = a_eye.iter().map(|v| v * v).sum();
    let mut tau = if a_eye_sq > 0.0 { a_eye.iter().zip(b).map(|(u, v)| u * v).sum::<f64>() / a_eye_sq } else { 1.0 };
    if !(tau > 0.0) {
        tau = 1.0;
    }
    let mut x: Vec<RealMatrix> = eye.iter().map(|e| e.scaled(tau)).collect();

    // dual start: Z = tI − C is dual feasible whenever I = A*(y_I) for some y_I
    let m = rows.rows.len();
    let mut y = vec![0.0; m];
    let mut z: Vec<RealMatrix> = eye.clone();
    if m > 0 {
        let gram = RealMatrix::from_fn(m, m, |i, j| sparse_dot(&rows.rows[i], &rows.rows[j]));
        if let Some(lg) = cholesky(&gram) {
            let y_eye = cholesky_solve(&lg, &a_eye);
            let back = rows.adjoint(&y_eye, blocks);
            let mut diff = back;
            for (d, e) in diff.iter_mut().zip(&eye) {
                d.add_scaled(e, -1.0);
            }
            if norm_blocks(&diff) <= 1e-10 * (n_total as f64).sqrt() {
                let mut lmax = f64::NEG_INFINITY;
                for cb in c {
                    lmax = lmax.max(*sym_eigenvalues(cb)?.last().unwrap_or(&0.0));
                }
                let t = lmax.max(0.0) + 1.0;
                y = y_eye.iter().map(|v| v * t).collect();
                z = c
                    .iter()
                    .zip(&eye)
                    .map(|(cb, e)| {
                        let mut zb = e.scaled(t);
                        zb.add_scaled(cb, -1.0);
                        zb
                    })
                    .collect();
            }
        }
    }

    let mut log = Vec::new();
    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    for iter in 0..=opts.max_iterations {
        iterations = iter;
        let pobj = dot_blocks(c, &x);
        let dobj: f64 = b.iter().zip(&y).map(|(u, v)| u * v).sum();
        let ax = rows.apply(&x);
        let r_p: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let aty = rows.adjoint(&y, blocks);
        let r_d: Vec<RealMatrix> = c
            .iter()
            .zip(&z)
            .zip(&aty)
            .map(|((cb, zb), ab)| {
                let mut r = cb.clone();
                r.add_scaled(zb, 1.0);
                r.add_scaled(ab, -1.0);
                r
            })
            .collect();
        let xz = dot_blocks(&x, &z);
        let mu = xz / n_total as f64;
        let p_res = vec_norm(&r_p) / (1.0 + b_norm);
        let d_res = norm_blocks(&r_d) / (1.0 + c_norm);
        let rel_gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
        let comp = xz / pobj.abs().max(1.0);
        log.push(IterationRecord {
            iteration: iter,
            mu,
            primal_value: pobj,
            dual_value: dobj,
            primal_residual: p_res,
            dual_residual: d_res,
            step: f64::NAN,
            sigma: f64::NAN,
        });
        let feas_tol = opts.tol.min(1e-9);
        if rel_gap <= opts.tol && comp <= opts.tol && p_res <= feas_tol && d_res <= feas_tol {
            status = SdpStatus::Optimal;
            break;
        }
        if iter == opts.max_iterations {
            break;
        }

        let Some(scalings) = x.iter().zip(&z).map(|(xb, zb)| nt_scaling(xb, zb)).collect::<Option<Vec<_>>>()
        else {
            log::debug!("interior lost at iteration {iter}; returning last iterate");
            break;
        };
        let schur = schur_complement(&rows, &scalings, blocks);
        let chol = factor_schur(&schur, iter)?;
        let ws = Workspace { rows: &rows, blocks, scalings, chol };

        // predictor
        let rc_aff: Vec<RealMatrix> = ws
            .scalings
            .iter()
            .map(|s| {
                let n = s.d.len();
                RealMatrix::from_fn(n, n, |i, j| if i == j { -s.d[i] } else { 0.0 })
            })
            .collect();
        let (dx_a, _, dz_a) = ws.direction(&rc_aff, &r_p, &r_d);
        let (sx_a, sz_a) = ws.scaled(&dx_a, &dz_a);
        let alpha_aff = ws.step_bound(&sx_a, &sz_a)?.min(1.0);
        let mut xz_aff = 0.0;
        for k in 0..x.len() {
            let mut xa = x[k].clone();
            xa.add_scaled(&dx_a[k], alpha_aff);
            let mut za = z[k].clone();
            za.add_scaled(&dz_a[k], alpha_aff);
            xz_aff += xa.dot(&za);
        }
        let mu_aff = (xz_aff / n_total as f64).max(0.0);
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };

        // corrector
        let rc: Vec<RealMatrix> = ws
            .scalings
            .iter()
            .zip(sx_a.iter().zip(&sz_a))
            .map(|(s, (ax, az))| {
                let n = s.d.len();
                let prod = ax.matmul(az);
                RealMatrix::from_fn(n, n, |i, j| {
                    let h = 0.5 * (prod[(i, j)] + prod[(j, i)]);
                    let mut v = -2.0 * h / (s.d[i] + s.d[j]);
                    if i == j {
                        v += sigma * mu / s.d[i] - s.d[i];
                    }
                    v
                })
            })
            .collect();
        let (dx, dy, dz) = ws.direction(&rc, &r_p, &r_d);
        let (sx, sz) = ws.scaled(&dx, &dz);
        let alpha = (STEP_FRACTION * ws.step_bound(&sx, &sz)?).min(1.0);
        if let Some(last) = log.last_mut() {
            last.step = alpha;
            last.sigma = sigma;
        }
        for k in 0..x.len() {
            x[k].add_scaled(&dx[k], alpha);
            x[k] = x[k].symmetrized();
            z[k].add_scaled(&dz[k], alpha);
            z[k] = z[k].symmetrized();
        }
        for (yj, d) in y.iter_mut().zip(&dy) {
            *yj += alpha * d;
        }
        if alpha < 1e-12 {
            log::debug!("step length collapsed at iteration {iter}");
            break;
        }
    }
    let dual_value: f64 = b.iter().zip(&y).map(|(u, v)| u * v).sum();
    Ok(RealSolution { x, dual_value, status, iterations, log })
}
