//! Bipartite states on `H_A ⊗ H_B`: validated density operators and pure
//! states, the standard families, Schmidt decomposition and singlet fraction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    herm_eig, kron_vec, partial_trace, polar_unitary, svd, trace_distance_matrices, vec_inner, vec_norm,
    ComplexMatrix, Subsystem, C64, MAX_DIM, ONE, ZERO,
};
use crate::policy::NumericPolicy;
use crate::sampling::{haar_unitary, rng_for};

/// Tolerance on the trace of a state file before it is renormalized.
const FILE_TRACE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    d_a: usize,
    d_b: usize,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity under `policy`. The
    /// stored matrix is the exact Hermitian part of the input.
    pub fn new(matrix: ComplexMatrix, d_a: usize, d_b: usize, policy: &NumericPolicy) -> Result<Self> {
        check_dims(d_a, d_b)?;
        let n = d_a * d_b;
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::dims(
                format!("{n}x{n}"),
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        let eig = herm_eig(&matrix, policy)?;
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > policy.trace_tol {
            return Err(Error::InvalidTrace { trace: tr, expected: 1.0 });
        }
        let min = eig.min_value();
        if min < -policy.psd_tol {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self { matrix: matrix.hermitian_part(), d_a, d_b })
    }

    /// Skips validation; for matrices that are states by construction.
    pub(crate) fn from_parts(matrix: ComplexMatrix, d_a: usize, d_b: usize) -> Self {
        debug_assert_eq!(matrix.rows(), d_a * d_b);
        Self { matrix, d_a, d_b }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.d_b
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Spectrum, descending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(herm_eig(&self.matrix, &NumericPolicy::default())?.values)
    }

    /// Reduced state on the kept factor.
    pub fn reduced(&self, keep: Subsystem) -> ComplexMatrix {
        partial_trace(&self.matrix, self.dims(), keep).expect("dims are consistent by construction")
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// Conjugation by a unitary on the whole space.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<Self> {
        let m = (&u.matmul(&self.matrix)? * &u.dagger()).hermitian_part();
        Ok(Self::from_parts(m, self.d_a, self.d_b))
    }

    pub fn to_file(&self) -> StateFile {
        StateFile::from_matrix(&self.matrix, self.d_a, self.d_b)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str, policy: &NumericPolicy) -> Result<Self> {
        let file: StateFile = serde_json::from_str(text)?;
        file.into_state(policy)
    }
}

fn check_dims(d_a: usize, d_b: usize) -> Result<()> {
    if d_a == 0 || d_b == 0 {
        return Err(Error::InvalidParameter("local dimensions must be positive".into()));
    }
    if d_a * d_b > MAX_DIM {
        return Err(Error::DimensionTooLarge { rows: d_a * d_b, cols: d_a * d_b, max: MAX_DIM });
    }
    Ok(())
}

/// JSON form of a density operator, row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub d_a: usize,
    pub d_b: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateFile {
    pub fn from_matrix(m: &ComplexMatrix, d_a: usize, d_b: usize) -> Self {
        let (re, im) = matrix_to_parts(m);
        Self { d_a, d_b, re, im }
    }

    /// Loads with trace renormalization. Traces further than 1e-6 from one
    /// are rejected rather than silently rescaled.
    pub fn into_state(self, policy: &NumericPolicy) -> Result<DensityOperator> {
        check_dims(self.d_a, self.d_b)?;
        let m = matrix_from_parts(&self.re, &self.im)?;
        let tr = m.trace().re;
        if (tr - 1.0).abs() > FILE_TRACE_TOL {
            return Err(Error::InvalidTrace { trace: tr, expected: 1.0 });
        }
        DensityOperator::new(m.scale(1.0 / tr), self.d_a, self.d_b, policy)
    }
}

pub(crate) fn matrix_to_parts(m: &ComplexMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)].re).collect()).collect();
    let im = (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)].im).collect()).collect();
    (re, im)
}

pub(crate) fn matrix_from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<ComplexMatrix> {
    let rows = re.len();
    let cols = re.first().map_or(0, Vec::len);
    if im.len() != rows {
        return Err(Error::dims(format!("{rows} imaginary rows"), im.len()));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (r, i) in re.iter().zip(im) {
        if r.len() != cols || i.len() != cols {
            return Err(Error::dims(format!("{cols} columns"), format!("{}/{}", r.len(), i.len())));
        }
        data.extend(r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)));
    }
    ComplexMatrix::new(rows, cols, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    d_a: usize,
    d_b: usize,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, d_a: usize, d_b: usize, policy: &NumericPolicy) -> Result<Self> {
        check_dims(d_a, d_b)?;
        if amplitudes.len() != d_a * d_b {
            return Err(Error::dims(d_a * d_b, amplitudes.len()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > policy.norm_tol {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amplitudes, d_a, d_b })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(amplitudes: Vec<C64>, d_a: usize, d_b: usize) -> Result<Self> {
        let norm = vec_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        let amps = amplitudes.iter().map(|z| z / norm).collect();
        Self::new(amps, d_a, d_b, &NumericPolicy::default())
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_parts(ComplexMatrix::projector(&self.amplitudes), self.d_a, self.d_b)
    }

    /// Amplitudes as the `d_A × d_B` coefficient matrix `ψ_{ab}`.
    pub fn coefficient_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.d_a, self.d_b, |a, b| self.amplitudes[a * self.d_b + b])
    }
}

/// `Σ_j η_j |ψ_j⟩⊗|φ_j⟩` with strictly positive coefficients, descending.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub left_vectors: Vec<Vec<C64>>,
    pub right_vectors: Vec<Vec<C64>>,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    pub fn reconstruct(&self) -> Vec<C64> {
        let n = self.left_vectors[0].len() * self.right_vectors[0].len();
        let mut psi = vec![ZERO; n];
        for ((eta, l), r) in self.coefficients.iter().zip(&self.left_vectors).zip(&self.right_vectors) {
            for (p, t) in psi.iter_mut().zip(kron_vec(l, r)) {
                *p += t * *eta;
            }
        }
        psi
    }
}

/// Schmidt decomposition via the SVD of the coefficient matrix; coefficients
/// at or below `policy.schmidt_tol` are dropped.
pub fn schmidt_decompose(psi: &PureState, policy: &NumericPolicy) -> Result<SchmidtDecomposition> {
    let s = svd(&psi.coefficient_matrix())?;
    let mut out = SchmidtDecomposition { coefficients: vec![], left_vectors: vec![], right_vectors: vec![] };
    for (j, &sigma) in s.singular_values.iter().enumerate() {
        if sigma > policy.schmidt_tol {
            out.coefficients.push(sigma);
            out.left_vectors.push(s.u.column(j));
            out.right_vectors.push(s.v.column(j).iter().map(|z| z.conj()).collect());
        }
    }
    // a unit vector always has a coefficient above any sensible threshold
    if out.coefficients.is_empty() {
        return Err(Error::NotNormalized { norm: vec_norm(psi.amplitudes()) });
    }
    Ok(out)
}

/// `(1/√d) Σ_i |ii⟩`.
pub fn max_entangled(d: usize) -> Result<PureState> {
    check_dims(d, d)?;
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        v[i * d + i] = amp;
    }
    Ok(PureState { amplitudes: v, d_a: d, d_b: d })
}

/// `(1/√s) Σ_{j<s} |jj⟩` on `d ⊗ d`.
pub fn partially_entangled(d: usize, s: usize) -> Result<PureState> {
    if s == 0 || s > d {
        return Err(Error::InvalidParameter(format!("need 1 <= s <= d, got s={s}, d={d}")));
    }
    check_dims(d, d)?;
    let amp = C64::new(1.0 / (s as f64).sqrt(), 0.0);
    let mut v = vec![ZERO; d * d];
    for j in 0..s {
        v[j * d + j] = amp;
    }
    Ok(PureState { amplitudes: v, d_a: d, d_b: d })
}

/// `(1−χ)/d² · I + χ |Φ⁺⟩⟨Φ⁺|`, valid for `χ ∈ [−1/(d²−1), 1]`.
pub fn isotropic(d: usize, chi: f64) -> Result<DensityOperator> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("isotropic states need d >= 2, got {d}")));
    }
    let n = (d * d) as f64;
    let lower = -1.0 / (n - 1.0);
    if !chi.is_finite() || chi < lower - 1e-15 || chi > 1.0 + 1e-15 {
        return Err(Error::InvalidParameter(format!("chi={chi} outside [{lower}, 1]")));
    }
    let phi = max_entangled(d)?;
    let proj = ComplexMatrix::projector(phi.amplitudes());
    let m = &ComplexMatrix::identity(d * d).scale((1.0 - chi) / n) + &proj.scale(chi);
    Ok(DensityOperator::from_parts(m, d, d))
}

/// Swap operator `Σ |ij⟩⟨ji|` on `d ⊗ d`.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (r / d, r % d);
        if c == j * d + i {
            ONE
        } else {
            ZERO
        }
    })
}

/// `(I − α S)/(d² − α d)` for `α ∈ [−1, 1]`.
pub fn werner(d: usize, alpha: f64) -> Result<DensityOperator> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("Werner states need d >= 2, got {d}")));
    }
    if !alpha.is_finite() || !(-1.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha={alpha} outside [-1, 1]")));
    }
    let df = d as f64;
    let m = (&ComplexMatrix::identity(d * d) - &swap_operator(d).scale(alpha)).scale(1.0 / (df * df - alpha * df));
    Ok(DensityOperator::from_parts(m, d, d))
}

fn require_square_bipartite(rho: &DensityOperator) -> Result<usize> {
    if rho.d_a != rho.d_b {
        return Err(Error::dims(format!("d_B = d_A = {}", rho.d_a), format!("d_B = {}", rho.d_b)));
    }
    Ok(rho.d_a)
}

/// `⟨Φ⁺|ρ|Φ⁺⟩`.
pub fn fidelity_phi_plus(rho: &DensityOperator) -> Result<f64> {
    let d = require_square_bipartite(rho)?;
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += rho.matrix[(i * d + i, j * d + j)];
        }
    }
    Ok(acc.re / d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingletFractionOptions {
    /// Stop a restart once one update gains less than this.
    pub tol: f64,
    /// Number of starting points; the first is the identity.
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for SingletFractionOptions {
    fn default() -> Self {
        Self { tol: 1e-10, restarts: 20, seed: 0, max_iterations: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct SingletFraction {
    /// Best overlap found; a lower bound on the maximal singlet fraction.
    pub value: f64,
    /// Whether the best restart met the tolerance before the iteration cap.
    pub converged: bool,
    pub u1: ComplexMatrix,
    pub u2: ComplexMatrix,
}

/// Lower bound on `max ⟨Φ|ρ|Φ⟩` over `|Φ⟩ = (U₁⊗U₂)|Φ⁺⟩`.
///
/// Since `(U₁⊗U₂)|Φ⁺⟩ = (U₁U₂ᵀ⊗I)|Φ⁺⟩` the search runs over a single
/// unitary `U`. The overlap is a convex quadratic in `vec(U)`, so maximizing
/// its linearization at the current point, which is the polar factor of the
/// reshaped `ρ (U⊗I)|Φ⁺⟩`, never decreases it.
pub fn singlet_fraction(rho: &DensityOperator, opts: &SingletFractionOptions) -> Result<SingletFraction> {
    let d = require_square_bipartite(rho)?;
    let restarts = opts.restarts.max(1);
    let mut best: Option<(f64, bool, ComplexMatrix)> = None;
    for r in 0..restarts {
        let start = if r == 0 {
            ComplexMatrix::identity(d)
        } else {
            let mut rng = rng_for(opts.seed, r as u64);
            haar_unitary(d, &mut rng)?
        };
        let (value, converged, u) = ascend_overlap(rho, start, opts)?;
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, converged, u));
        }
    }
    let (value, converged, u) = best.expect("at least one restart");
    Ok(SingletFraction { value, converged, u1: u, u2: ComplexMatrix::identity(d) })
}

fn overlap(rho: &ComplexMatrix, u: &ComplexMatrix) -> (f64, Vec<C64>) {
    let d = u.rows();
    let scale = 1.0 / (d as f64).sqrt();
    let ket: Vec<C64> = u.data().iter().map(|z| z * scale).collect();
    let rk = rho.mul_vec(&ket);
    (vec_inner(&ket, &rk).re, rk)
}

fn ascend_overlap(
    rho: &DensityOperator,
    start: ComplexMatrix,
    opts: &SingletFractionOptions,
) -> Result<(f64, bool, ComplexMatrix)> {
    let d = rho.d_a;
    let mut u = start;
    let (mut value, mut grad) = overlap(&rho.matrix, &u);
    for _ in 0..opts.max_iterations {
        let g = ComplexMatrix::from_fn(d, d, |a, b| grad[a * d + b]);
        if g.frobenius_norm() < 1e-300 {
            return Ok((value, true, u));
        }
        let next = polar_unitary(&g)?;
        let (next_value, next_grad) = overlap(&rho.matrix, &next);
        if next_value <= value + opts.tol {
            if next_value > value {
                return Ok((next_value, true, next));
            }
            return Ok((value, true, u));
        }
        u = next;
        value = next_value;
        grad = next_grad;
    }
    Ok((value, false, u))
}

/// Projection onto the isotropic family preserving `⟨Φ⁺|ρ|Φ⁺⟩`.
pub fn twirl_to_isotropic(rho: &DensityOperator) -> Result<DensityOperator> {
    let d = require_square_bipartite(rho)?;
    let f = fidelity_phi_plus(rho)?;
    let n = (d * d) as f64;
    let chi = (f * n - 1.0) / (n - 1.0);
    assert!(chi >= -1.0 / (n - 1.0) - 1e-12, "fidelity of a valid state is nonnegative");
    isotropic(d, chi.max(-1.0 / (n - 1.0)))
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return Err(Error::dims(format!("{:?}", rho.dims()), format!("{:?}", sigma.dims())));
    }
    trace_distance_matrices(&rho.matrix, &sigma.matrix, &NumericPolicy::default())
}

/// `(U₁ ⊗ U₂) ρ (U₁ ⊗ U₂)†`.
pub fn local_unitary(rho: &DensityOperator, u1: &ComplexMatrix, u2: &ComplexMatrix) -> Result<DensityOperator> {
    let u = crate::linalg::kron(u1, u2)?;
    if u.rows() != rho.dim() {
        return Err(Error::dims(rho.dim(), u.rows()));
    }
    rho.conjugate(&u)
}

/// Random pure state with Haar-random local unitaries applied to `(1/√d)Σ|ii⟩`
/// at a random Schmidt spectrum of the requested rank.
pub fn random_pure_state<R: Rng + ?Sized>(d_a: usize, d_b: usize, rank: usize, rng: &mut R) -> Result<PureState> {
    if rank == 0 || rank > d_a.min(d_b) {
        return Err(Error::InvalidParameter(format!("Schmidt rank {rank} impossible on {d_a}x{d_b}")));
    }
    let psi = crate::sampling::random_pure_with_rank(d_a, d_b, rank, rng)?;
    PureState::normalized(psi, d_a, d_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn basis_state(d: usize, a: usize, b: usize) -> DensityOperator {
        let mut v = vec![ZERO; d * d];
        v[a * d + b] = ONE;
        DensityOperator::from_parts(ComplexMatrix::projector(&v), d, d)
    }

    #[test]
    fn max_entangled_examples() {
        assert_eq!(max_entangled(1).unwrap().amplitudes(), &[ONE]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = max_entangled(2).unwrap();
        for (a, e) in bell.amplitudes().iter().zip([c(s), ZERO, ZERO, c(s)]) {
            assert!((a - e).norm() < 1e-15);
        }
        let sd = schmidt_decompose(&max_entangled(3).unwrap(), &NumericPolicy::default()).unwrap();
        assert_eq!(sd.rank(), 3);
        for eta in sd.coefficients {
            assert!((eta - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn isotropic_examples() {
        let p = NumericPolicy::default();
        let mixed = isotropic(2, 0.0).unwrap();
        assert!(mixed.matrix().max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) < 1e-15);
        let pure = isotropic(2, 1.0).unwrap();
        let phi = max_entangled(2).unwrap().to_density();
        assert!(pure.matrix().max_abs_diff(phi.matrix()) < 1e-15);
        let third = isotropic(2, 1.0 / 3.0).unwrap();
        assert!((fidelity_phi_plus(&third).unwrap() - 0.5).abs() < 1e-15);
        assert!(isotropic(2, -0.34).is_err());
        assert!(isotropic(2, 1.01).is_err());
        // boundary of the PSD range is still a state
        let edge = isotropic(3, -1.0 / 8.0).unwrap();
        DensityOperator::new(edge.matrix().clone(), 3, 3, &p).unwrap();
    }

    #[test]
    fn werner_examples() {
        let p = NumericPolicy::default();
        let w0 = werner(2, 0.0).unwrap();
        assert!(w0.matrix().max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = ComplexMatrix::projector(&[ZERO, c(s), c(-s), ZERO]);
        assert!(werner(2, 1.0).unwrap().matrix().max_abs_diff(&singlet) < 1e-15);
        let w3 = werner(3, 1.0).unwrap();
        let eig = herm_eig(w3.matrix(), &p).unwrap();
        let third = eig.values.iter().filter(|v| (*v - 1.0 / 3.0).abs() < 1e-12).count();
        let zero = eig.values.iter().filter(|v| v.abs() < 1e-12).count();
        assert_eq!((third, zero), (3, 6));
        assert!(werner(2, 1.5).is_err());
    }

    #[test]
    fn schmidt_examples() {
        let p = NumericPolicy::default();
        let prod = PureState::new(vec![ONE, ZERO, ZERO, ZERO], 2, 2, &p).unwrap();
        assert_eq!(schmidt_decompose(&prod, &p).unwrap().coefficients, vec![1.0]);
        let psi = PureState::new(vec![c(0.9f64.sqrt()), ZERO, ZERO, c(0.1f64.sqrt())], 2, 2, &p).unwrap();
        let sd = schmidt_decompose(&psi, &p).unwrap();
        assert_eq!(sd.rank(), 2);
        assert!((sd.coefficients[0] - 0.9f64.sqrt()).abs() < 1e-14);
        assert!((sd.coefficients[1] - 0.1f64.sqrt()).abs() < 1e-14);
        let back = sd.reconstruct();
        assert!((vec_inner(&back, psi.amplitudes()).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_state_validation() {
        let p = NumericPolicy::default();
        assert!(PureState::new(vec![ONE, ONE, ZERO, ZERO], 2, 2, &p).is_err());
        assert!(PureState::new(vec![ONE, ZERO, ZERO], 2, 2, &p).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let phi = max_entangled(2).unwrap().to_density();
        assert!((fidelity_phi_plus(&phi).unwrap() - 1.0).abs() < 1e-15);
        let chi = 0.42;
        let iso = isotropic(2, chi).unwrap();
        assert!((fidelity_phi_plus(&iso).unwrap() - (chi + (1.0 - chi) / 4.0)).abs() < 1e-15);
        assert!(fidelity_phi_plus(&basis_state(2, 0, 1)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn singlet_fraction_examples() {
        let opts = SingletFractionOptions { seed: 5, ..Default::default() };
        let mut rng = rng_for(11, 0);
        let u1 = haar_unitary(2, &mut rng).unwrap();
        let u2 = haar_unitary(2, &mut rng).unwrap();
        let rotated = local_unitary(&max_entangled(2).unwrap().to_density(), &u1, &u2).unwrap();
        assert!((singlet_fraction(&rotated, &opts).unwrap().value - 1.0).abs() < 1e-8);

        let iso = isotropic(3, 0.5).unwrap();
        let sf = singlet_fraction(&iso, &opts).unwrap();
        assert!((sf.value - (0.5 + 0.5 / 9.0)).abs() < 1e-10);
        assert!(sf.converged);

        let prod = singlet_fraction(&basis_state(2, 0, 1), &opts).unwrap();
        assert!((prod.value - 0.5).abs() < 1e-8);
    }

    #[test]
    fn singlet_fraction_of_product_state_by_sampling() {
        // dense sampling of U never beats 1/d for a product state
        let rho = basis_state(2, 0, 1);
        let mut rng = rng_for(3, 0);
        let mut best = 0.0_f64;
        for _ in 0..2000 {
            let u = haar_unitary(2, &mut rng).unwrap();
            best = best.max(overlap(rho.matrix(), &u).0);
        }
        assert!(best <= 0.5 + 1e-12);
        assert!(best > 0.49);
    }

    #[test]
    fn twirl_examples() {
        let iso = isotropic(2, 0.7).unwrap();
        assert!(twirl_to_isotropic(&iso).unwrap().matrix().max_abs_diff(iso.matrix()) < 1e-15);
        let phi = max_entangled(3).unwrap().to_density();
        assert!(twirl_to_isotropic(&phi).unwrap().matrix().max_abs_diff(isotropic(3, 1.0).unwrap().matrix()) < 1e-15);
        let tw = twirl_to_isotropic(&basis_state(2, 0, 1)).unwrap();
        assert!(tw.matrix().max_abs_diff(isotropic(2, -1.0 / 3.0).unwrap().matrix()) < 1e-15);
        let eig = tw.eigenvalues().unwrap();
        assert!(eig.last().unwrap().abs() < 1e-14);
        assert!(eig.iter().all(|v| *v > -1e-14));
    }

    #[test]
    fn json_round_trip_and_renormalization() {
        let p = NumericPolicy::default();
        let w = werner(2, 0.3).unwrap();
        let back = DensityOperator::from_json(&w.to_json().unwrap(), &p).unwrap();
        assert!(back.matrix().max_abs_diff(w.matrix()) < 1e-15);
        let mut f = w.to_file();
        f.re[0][0] += 5e-7;
        let renorm = f.clone().into_state(&p).unwrap();
        assert!((renorm.matrix().trace().re - 1.0).abs() < 1e-15);
        f.re[0][0] += 1e-3;
        assert!(f.into_state(&p).is_err());
    }

    #[test]
    fn density_validation() {
        let p = NumericPolicy::default();
        assert!(DensityOperator::new(ComplexMatrix::identity(4), 2, 2, &p).is_err());
        assert!(DensityOperator::new(ComplexMatrix::from_real_diag(&[1.5, -0.5]), 1, 2, &p).is_err());
        assert!(DensityOperator::new(ComplexMatrix::identity(4).scale(0.25), 2, 3, &p).is_err());
    }
}
