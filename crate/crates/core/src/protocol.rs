//! Prepare-and-measure scenarios built on a shared bipartite state.
//!
//! Alice encodes `x` by a local operation on her half of the shared state
//! and sends it; Bob measures the joint system with setting `y` and reports
//! `b`. Behaviors are stored as `p[b][x][y]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigen::{herm_eig_unchecked, inv_sqrt};
use crate::linalg::{
    herm_eig, kron, partial_trace, trace_norm, ComplexMatrix, Subsystem, C64, ONE,
};
use crate::policy::NumericPolicy;
use crate::sdpsolve::choi::{unitary_choi, ChoiOperator};
use crate::states::{
    matrix_from_parts, matrix_to_parts, max_entangled, partially_entangled, DensityOperator, StateFile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioShape {
    pub n_preparations: usize,
    pub n_settings: usize,
    pub n_outcomes: usize,
}

impl ScenarioShape {
    pub fn new(n_preparations: usize, n_settings: usize, n_outcomes: usize) -> Result<Self> {
        if n_preparations == 0 || n_settings == 0 || n_outcomes == 0 {
            return Err(Error::InvalidParameter("scenario sizes must be positive".into()));
        }
        Ok(Self { n_preparations, n_settings, n_outcomes })
    }

    /// Shape of the success-probability game: one setting, one outcome per message.
    pub fn is_psuc(&self) -> bool {
        self.n_settings == 1 && self.n_outcomes == self.n_preparations
    }

    /// Shape of the pairwise-discrimination game behind `V_N`.
    pub fn is_vn(&self) -> bool {
        let n = self.n_preparations;
        n >= 2 && self.n_outcomes == 2 && self.n_settings == n * (n - 1) / 2
    }
}

/// Index of the `V_N` setting for the pair `(x, x')`, `x > x'`, in
/// lexicographic order `(1,0), (2,0), (2,1), (3,0), …`.
pub fn pair_setting(x: usize, x_prime: usize) -> usize {
    debug_assert!(x > x_prime);
    x * (x - 1) / 2 + x_prime
}

/// Local operation on Alice's factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    Unitary(ComplexMatrix),
    Choi(ChoiOperator),
}

impl Encoding {
    pub fn dim(&self) -> usize {
        match self {
            Encoding::Unitary(u) => u.rows(),
            Encoding::Choi(c) => c.dim(),
        }
    }

    pub fn to_choi(&self) -> ChoiOperator {
        match self {
            Encoding::Unitary(u) => unitary_choi(u),
            Encoding::Choi(c) => c.clone(),
        }
    }

    fn validate(&self, policy: &NumericPolicy) -> Result<()> {
        match self {
            Encoding::Unitary(u) => {
                if !u.is_square() {
                    return Err(Error::dims("square unitary", format!("{}x{}", u.rows(), u.cols())));
                }
                let dev = (&u.dagger() * u).max_abs_diff(&ComplexMatrix::identity(u.rows()));
                if dev > policy.unitary_tol {
                    return Err(Error::NotUnitary { deviation: dev });
                }
                Ok(())
            }
            Encoding::Choi(c) => {
                ChoiOperator::new(c.matrix().clone(), c.dim(), policy)?;
                Ok(())
            }
        }
    }

    /// `(Λ ⊗ id)(ρ)`.
    pub fn apply(&self, shared: &DensityOperator) -> Result<DensityOperator> {
        match self {
            Encoding::Unitary(u) => {
                let full = kron(u, &ComplexMatrix::identity(shared.d_b()))?;
                shared.conjugate(&full)
            }
            Encoding::Choi(c) => c.apply_to_first(shared),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparationFamily {
    shared: DensityOperator,
    encodings: Vec<Encoding>,
}

impl PreparationFamily {
    /// Validates every encoding and the no-signalling marginal condition.
    pub fn new(shared: DensityOperator, encodings: Vec<Encoding>, policy: &NumericPolicy) -> Result<Self> {
        if encodings.is_empty() {
            return Err(Error::InvalidParameter("need at least one encoding".into()));
        }
        for e in &encodings {
            if e.dim() != shared.d_a() {
                return Err(Error::dims(format!("encodings on d_A = {}", shared.d_a()), e.dim()));
            }
            e.validate(policy)?;
        }
        let family = Self { shared, encodings };
        let dev = family.marginal_deviation(policy)?;
        if dev > policy.marginal_tol {
            return Err(Error::MarginalViolation { deviation: dev });
        }
        Ok(family)
    }

    pub(crate) fn from_parts(shared: DensityOperator, encodings: Vec<Encoding>) -> Self {
        Self { shared, encodings }
    }

    /// The `d²` Weyl encodings `W_{x1,x2}`, `x = x1·d + x2`, on the given state.
    pub fn weyl(shared: DensityOperator, d: usize) -> Result<Self> {
        if shared.d_a() != d {
            return Err(Error::dims(format!("d_A = {d}"), shared.d_a()));
        }
        let encodings = (0..d * d).map(|x| weyl(d, d, x / d, x % d).map(Encoding::Unitary)).collect::<Result<_>>()?;
        Ok(Self { shared, encodings })
    }

    pub fn shared(&self) -> &DensityOperator {
        &self.shared
    }

    pub fn encodings(&self) -> &[Encoding] {
        &self.encodings
    }

    pub fn len(&self) -> usize {
        self.encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encodings.is_empty()
    }

    pub fn prepare(&self, x: usize) -> Result<DensityOperator> {
        let e = self.encodings.get(x).ok_or_else(|| {
            Error::InvalidParameter(format!("preparation {x} out of range 0..{}", self.encodings.len()))
        })?;
        e.apply(&self.shared)
    }

    pub fn prepared_states(&self) -> Result<Vec<DensityOperator>> {
        (0..self.len()).map(|x| self.prepare(x)).collect()
    }

    /// `max_{x,x'} ‖tr_A ρ_x − tr_A ρ_{x'}‖₁`.
    pub fn marginal_deviation(&self, policy: &NumericPolicy) -> Result<f64> {
        let marginals: Vec<ComplexMatrix> =
            self.prepared_states()?.iter().map(|r| r.reduced(Subsystem::B)).collect();
        let mut worst = 0.0_f64;
        for i in 0..marginals.len() {
            for j in 0..i {
                worst = worst.max(trace_norm(&(&marginals[i] - &marginals[j]), policy)?);
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>, policy: &NumericPolicy) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::InvalidParameter("a POVM needs at least one effect".into()));
        };
        let n = first.rows();
        let mut sum = ComplexMatrix::zeros(n, n);
        for e in &effects {
            if e.rows() != n || e.cols() != n {
                return Err(Error::dims(format!("{n}x{n} effect"), format!("{}x{}", e.rows(), e.cols())));
            }
            let eig = herm_eig(e, policy)?;
            if eig.min_value() < -policy.psd_tol {
                return Err(Error::NotPsd { min_eigenvalue: eig.min_value() });
            }
            sum = &sum + e;
        }
        let dev = sum.distance_from_identity();
        if dev > policy.completeness_tol {
            return Err(Error::Incomplete { deviation: dev });
        }
        Ok(Self { effects: effects.iter().map(|e| e.hermitian_part()).collect() })
    }

    pub(crate) fn from_effects_unchecked(effects: Vec<ComplexMatrix>) -> Self {
        Self { effects }
    }

    /// Makes nearly complete PSD effects exactly complete:
    /// `M_b ↦ S^{-1/2} M_b S^{-1/2}` with `S = Σ_b M_b`, after clipping
    /// negative eigenvalues.
    pub fn repaired(effects: &[ComplexMatrix]) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::InvalidParameter("a POVM needs at least one effect".into()));
        };
        let n = first.rows();
        let mut clipped = Vec::with_capacity(effects.len());
        let mut sum = ComplexMatrix::zeros(n, n);
        for e in effects {
            let eig = herm_eig_unchecked(e)?;
            let m = if eig.min_value() < 0.0 { eig.map(|v| v.max(0.0)) } else { e.hermitian_part() };
            sum = &sum + &m;
            clipped.push(m);
        }
        let s = inv_sqrt(&sum)?;
        Ok(Self { effects: clipped.iter().map(|m| (&(&s * m) * &s).hermitian_part()).collect() })
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }

    /// Operator-norm distance of `Σ_b M_b` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let n = self.dim();
        let mut sum = ComplexMatrix::zeros(n, n);
        for e in &self.effects {
            sum = &sum + e;
        }
        sum.distance_from_identity()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    shape: ScenarioShape,
    p: Vec<f64>,
}

impl Behavior {
    pub fn new(shape: ScenarioShape, p: Vec<f64>) -> Result<Self> {
        let (n, m, k) = (shape.n_preparations, shape.n_settings, shape.n_outcomes);
        if p.len() != n * m * k {
            return Err(Error::dims(n * m * k, p.len()));
        }
        let b = Self { shape, p };
        for x in 0..n {
            for y in 0..m {
                let mut total = 0.0;
                for o in 0..k {
                    let v = b.get(o, x, y);
                    if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                        return Err(Error::InvalidParameter(format!("p({o}|{x},{y}) = {v} outside [0, 1]")));
                    }
                    total += v;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!("Σ_b p(b|{x},{y}) = {total}")));
                }
            }
        }
        Ok(b)
    }

    pub fn shape(&self) -> ScenarioShape {
        self.shape
    }

    /// `p(b|x,y)`.
    pub fn get(&self, b: usize, x: usize, y: usize) -> f64 {
        let s = &self.shape;
        self.p[(b * s.n_preparations + x) * s.n_settings + y]
    }

    /// Rows `(b, x, y, p)` in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let s = self.shape;
        (0..s.n_outcomes).flat_map(move |b| {
            (0..s.n_preparations)
                .flat_map(move |x| (0..s.n_settings).map(move |y| (b, x, y, self.get(b, x, y))))
        })
    }
}

/// `p(b|x,y) = tr(ρ_x M_b^{(y)})`.
pub fn behavior(family: &PreparationFamily, povms: &[Povm]) -> Result<Behavior> {
    let Some(first) = povms.first() else {
        return Err(Error::InvalidParameter("need at least one measurement".into()));
    };
    let k = first.len();
    let dim = family.shared.dim();
    for m in povms {
        if m.len() != k {
            return Err(Error::ShapeMismatch(format!("all measurements need {k} outcomes, got {}", m.len())));
        }
        if m.dim() != dim {
            return Err(Error::dims(format!("{dim}x{dim} effects"), format!("{0}x{0}", m.dim())));
        }
    }
    let shape = ScenarioShape::new(family.len(), povms.len(), k)?;
    let states = family.prepared_states()?;
    let mut p = vec![0.0; shape.n_preparations * shape.n_settings * k];
    for b in 0..k {
        for (x, rho) in states.iter().enumerate() {
            for (y, m) in povms.iter().enumerate() {
                p[(b * shape.n_preparations + x) * shape.n_settings + y] = rho.matrix().inner_re(&m.effects[b]);
            }
        }
    }
    Behavior::new(shape, p)
}

/// `(1/N) Σ_x p(b = x | x)`.
pub fn p_suc(behavior: &Behavior) -> Result<f64> {
    let s = behavior.shape;
    if !s.is_psuc() {
        return Err(Error::ShapeMismatch(format!(
            "p_suc needs one setting and N outcomes, got N={}, m={}, k={}",
            s.n_preparations, s.n_settings, s.n_outcomes
        )));
    }
    let n = s.n_preparations;
    Ok((0..n).map(|x| behavior.get(x, x, 0)).sum::<f64>() / n as f64)
}

/// `Σ_{x>x'} |p(1|x,(x,x')) − p(1|x',(x,x'))|²`.
pub fn v_n(behavior: &Behavior) -> Result<f64> {
    let s = behavior.shape;
    if !s.is_vn() {
        return Err(Error::ShapeMismatch(format!(
            "V_N needs k=2 and N(N-1)/2 settings, got N={}, m={}, k={}",
            s.n_preparations, s.n_settings, s.n_outcomes
        )));
    }
    let mut total = 0.0;
    for x in 1..s.n_preparations {
        for xp in 0..x {
            let y = pair_setting(x, xp);
            let diff = behavior.get(1, x, y) - behavior.get(1, xp, y);
            total += diff * diff;
        }
    }
    Ok(total)
}

/// `W^{(K)}_{x1,x2} = Σ_j exp(2πi·j·x2/K) |j⊕x1⟩⟨j|` on `C^d`.
pub fn weyl(d: usize, k: usize, x1: usize, x2: usize) -> Result<ComplexMatrix> {
    if d == 0 || k == 0 || x1 >= d || x2 >= k {
        return Err(Error::InvalidParameter(format!("Weyl index ({x1}, {x2}) outside {d}x{k}")));
    }
    let mut w = ComplexMatrix::zeros(d, d);
    for j in 0..d {
        let phase = 2.0 * std::f64::consts::PI * (j * x2) as f64 / k as f64;
        w[((j + x1) % d, j)] = C64::from_polar(1.0, phase);
    }
    Ok(w)
}

/// Shared state `(1/√s)Σ_{j<s}|jj⟩`, the `N = d·K` encodings `W^{(K)}` and
/// the measurement
/// `M_x = (s/K)|Ψ_x⟩⟨Ψ_x| + (1/N) Σ_{j≥s} I ⊗ |j⟩⟨j|`, which attains
/// `p_suc = s/K`.
pub fn canonical_sdc_protocol(d: usize, s: usize, k: usize) -> Result<(PreparationFamily, Povm)> {
    if s == 0 || s > d {
        return Err(Error::InvalidParameter(format!("need 1 <= s <= d, got s={s}, d={d}")));
    }
    if k < s {
        return Err(Error::InvalidParameter(format!("need K >= s, got K={k}, s={s}")));
    }
    let psi = partially_entangled(d, s)?;
    let shared = psi.to_density();
    let n = d * k;
    let mut encodings = Vec::with_capacity(n);
    let mut effects = Vec::with_capacity(n);
    let mut tail = ComplexMatrix::zeros(d, d);
    for j in s..d {
        tail[(j, j)] = ONE;
    }
    let tail = kron(&ComplexMatrix::identity(d), &tail)?.scale(1.0 / n as f64);
    for x1 in 0..d {
        for x2 in 0..k {
            let w = weyl(d, k, x1, x2)?;
            let full = kron(&w, &ComplexMatrix::identity(d))?;
            let ket = full.mul_vec(psi.amplitudes());
            effects.push(&ComplexMatrix::projector(&ket).scale(s as f64 / k as f64) + &tail);
            encodings.push(Encoding::Unitary(w));
        }
    }
    Ok((PreparationFamily::from_parts(shared, encodings), Povm::from_effects_unchecked(effects)))
}

/// Dichotomic measurement with `M_1` the projector onto the eigenvectors of
/// `ρ − σ` with eigenvalue `≥ −1e-10`, so `p(1|ρ) − p(1|σ) = D(ρ, σ)`.
pub fn helstrom_povm(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Povm> {
    if rho.dims() != sigma.dims() {
        return Err(Error::dims(format!("{:?}", rho.dims()), format!("{:?}", sigma.dims())));
    }
    let eig = herm_eig_unchecked(&(rho.matrix() - sigma.matrix()))?;
    let m1 = eig.map(|v| if v >= -1e-10 { 1.0 } else { 0.0 });
    let m0 = &ComplexMatrix::identity(rho.dim()) - &m1;
    Ok(Povm::from_effects_unchecked(vec![m0, m1]))
}

/// Pairwise Helstrom measurements for every `(x, x')`, in setting order.
pub fn vn_helstrom_povms(family: &PreparationFamily) -> Result<Vec<Povm>> {
    let states = family.prepared_states()?;
    let mut out = Vec::with_capacity(states.len() * states.len().saturating_sub(1) / 2);
    for x in 1..states.len() {
        for xp in 0..x {
            out.push(helstrom_povm(&states[x], &states[xp])?);
        }
    }
    Ok(out)
}

/// Sizes of the Weyl groups: `N mod d²` groups of `⌊N/d²⌋ + 1` followed by
/// groups of `⌊N/d²⌋`, empty groups dropped.
pub fn weyl_group_sizes(d: usize, n: usize) -> Vec<usize> {
    let g = d * d;
    let (c, extra) = (n / g, n % g);
    (0..g).map(|i| if i < extra { c + 1 } else { c }).filter(|&s| s > 0).collect()
}

/// `|Φ⁺_d⟩` with the `N` preparations split into contiguous groups, group
/// `g = g1·d + g2` encoded by `W_{g1,g2}`.
pub fn vn_weyl_preparations(d: usize, n: usize) -> Result<PreparationFamily> {
    if d < 2 || n < 2 {
        return Err(Error::InvalidParameter(format!("need d >= 2 and N >= 2, got d={d}, N={n}")));
    }
    let shared = max_entangled(d)?.to_density();
    let mut encodings = Vec::with_capacity(n);
    for (g, &size) in weyl_group_sizes(d, n).iter().enumerate() {
        let w = weyl(d, d, g / d, g % d)?;
        encodings.extend(std::iter::repeat_n(Encoding::Unitary(w), size));
    }
    Ok(PreparationFamily::from_parts(shared, encodings))
}

/// `tr(Ω²)` for `Ω = (1/N) Σ_x ρ_x`.
pub fn omega_purity(family: &PreparationFamily) -> Result<f64> {
    let states = family.prepared_states()?;
    let n = family.shared.dim();
    let mut omega = ComplexMatrix::zeros(n, n);
    for r in &states {
        omega = &omega + r.matrix();
    }
    let omega = omega.scale(1.0 / states.len() as f64);
    Ok(omega.trace_product(&omega).re)
}

/// Closed form `(𝒩 + cN)/N²` with `c = ⌊N/d²⌋`, `𝒩 = N mod d²`.
pub fn weyl_group_purity_formula(d: usize, n: usize) -> f64 {
    let g = d * d;
    let (c, rem) = (n / g, n % g);
    (rem + c * n) as f64 / (n * n) as f64
}

/// `Σ_g n_g² / N²` over the Weyl group sizes; `Ω` is a mixture of
/// orthogonal Bell-type projectors with weights `n_g/N`.
pub fn weyl_group_purity_exact(d: usize, n: usize) -> f64 {
    let sum: usize = weyl_group_sizes(d, n).iter().map(|s| s * s).sum();
    sum as f64 / (n * n) as f64
}

/// JSON form of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let (re, im) = matrix_to_parts(m);
        Self { re, im }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        matrix_from_parts(&self.re, &self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Unitary,
    Choi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingFile {
    #[serde(rename = "type")]
    pub kind: EncodingKind,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// JSON protocol: shared state, encodings and one or more measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub shared_state: StateFile,
    pub encodings: Vec<EncodingFile>,
    pub povms: Vec<Vec<MatrixFile>>,
}

impl ProtocolFile {
    pub fn new(family: &PreparationFamily, povms: &[Povm]) -> Self {
        let encodings = family
            .encodings
            .iter()
            .map(|e| {
                let (kind, m) = match e {
                    Encoding::Unitary(u) => (EncodingKind::Unitary, u),
                    Encoding::Choi(c) => (EncodingKind::Choi, c.matrix()),
                };
                let (re, im) = matrix_to_parts(m);
                EncodingFile { kind, re, im }
            })
            .collect();
        Self {
            shared_state: family.shared.to_file(),
            encodings,
            povms: povms.iter().map(|p| p.effects.iter().map(MatrixFile::from_matrix).collect()).collect(),
        }
    }

    /// Validates everything under `policy`.
    pub fn load(&self, policy: &NumericPolicy) -> Result<(PreparationFamily, Vec<Povm>)> {
        let shared = self.shared_state.clone().into_state(policy)?;
        let encodings = self
            .encodings
            .iter()
            .map(|e| {
                let m = matrix_from_parts(&e.re, &e.im)?;
                Ok(match e.kind {
                    EncodingKind::Unitary => Encoding::Unitary(m),
                    EncodingKind::Choi => {
                        let d = (m.rows() as f64).sqrt().round() as usize;
                        if d * d != m.rows() {
                            return Err(Error::dims("d²xd² Choi matrix", format!("{}x{}", m.rows(), m.cols())));
                        }
                        Encoding::Choi(ChoiOperator::new(m, d, policy)?)
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let family = PreparationFamily::new(shared, encodings, policy)?;
        let povms = self
            .povms
            .iter()
            .map(|p| Povm::new(p.iter().map(MatrixFile::to_matrix).collect::<Result<_>>()?, policy))
            .collect::<Result<Vec<_>>>()?;
        if povms.is_empty() {
            return Err(Error::InvalidParameter("protocol has no measurements".into()));
        }
        Ok((family, povms))
    }
}

/// Reduced state of the shared state on Alice's side.
pub fn alice_marginal(family: &PreparationFamily) -> ComplexMatrix {
    partial_trace(family.shared.matrix(), family.shared.dims(), Subsystem::A).expect("consistent dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::states::{trace_distance, DensityOperator};

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }

    fn bell_povm() -> Povm {
        let fam = PreparationFamily::weyl(max_entangled(2).unwrap().to_density(), 2).unwrap();
        let effects = fam.prepared_states().unwrap().into_iter().map(|r| r.into_matrix()).collect();
        Povm::new(effects, &NumericPolicy::default()).unwrap()
    }

    #[test]
    fn weyl_examples() {
        assert!(weyl(2, 2, 0, 0).unwrap().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        assert!(weyl(2, 2, 1, 0).unwrap().max_abs_diff(&sigma_x()) < 1e-15);
        assert!(weyl(2, 2, 0, 1).unwrap().max_abs_diff(&sigma_z()) < 1e-15);
        assert!(weyl(2, 2, 2, 0).is_err());
    }

    #[test]
    fn weyl_operators_are_orthogonal() {
        for d in 2..=4 {
            for x in 0..d * d {
                let wx = weyl(d, d, x / d, x % d).unwrap();
                for xp in 0..d * d {
                    let wxp = weyl(d, d, xp / d, xp % d).unwrap();
                    let t = wx.dagger().trace_product(&wxp);
                    let expected = if x == xp { d as f64 } else { 0.0 };
                    assert!((t - C64::new(expected, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn prepare_examples() {
        let phi = max_entangled(2).unwrap().to_density();
        let id = PreparationFamily::from_parts(phi.clone(), vec![Encoding::Unitary(ComplexMatrix::identity(2))]);
        assert!(id.prepare(0).unwrap().matrix().max_abs_diff(phi.matrix()) < 1e-15);
        let flip = PreparationFamily::from_parts(phi.clone(), vec![Encoding::Unitary(sigma_x())]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi_plus = ComplexMatrix::projector(&[ZERO, C64::new(s, 0.0), C64::new(s, 0.0), ZERO]);
        assert!(flip.prepare(0).unwrap().matrix().max_abs_diff(&psi_plus) < 1e-15);
        assert!(flip.prepare(1).is_err());
    }

    #[test]
    fn behavior_examples() {
        let fam = PreparationFamily::weyl(max_entangled(2).unwrap().to_density(), 2).unwrap();
        let trivial = Povm::new(vec![ComplexMatrix::identity(4)], &NumericPolicy::default()).unwrap();
        let b = behavior(&fam, &[trivial]).unwrap();
        assert!((0..4).all(|x| (b.get(0, x, 0) - 1.0).abs() < 1e-14));

        let b = behavior(&fam, &[bell_povm()]).unwrap();
        assert!((0..4).all(|x| (b.get(x, x, 0) - 1.0).abs() < 1e-14));
        assert!((p_suc(&b).unwrap() - 1.0).abs() < 1e-14);

        let mixed = PreparationFamily::weyl(crate::states::isotropic(2, 0.0).unwrap(), 2).unwrap();
        let b = behavior(&mixed, &[bell_povm()]).unwrap();
        for o in 0..4 {
            for x in 1..4 {
                assert!((b.get(o, x, 0) - b.get(o, 0, 0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn p_suc_examples_and_shape_errors() {
        let shape = ScenarioShape::new(3, 1, 3).unwrap();
        let perfect: Vec<f64> = (0..3).flat_map(|b| (0..3).map(move |x| if b == x { 1.0 } else { 0.0 })).collect();
        assert_eq!(p_suc(&Behavior::new(shape, perfect).unwrap()).unwrap(), 1.0);
        let uniform = Behavior::new(shape, vec![1.0 / 3.0; 9]).unwrap();
        assert!((p_suc(&uniform).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(v_n(&uniform).is_err());
        assert!(Behavior::new(shape, vec![0.5; 9]).is_err());
    }

    #[test]
    fn v_n_examples() {
        let shape = ScenarioShape::new(2, 1, 2).unwrap();
        // p[b][x][y]: outcome 1 for x=1 only
        let b = Behavior::new(shape, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(v_n(&b).unwrap(), 1.0);
        let flat = Behavior::new(ScenarioShape::new(3, 3, 2).unwrap(), vec![0.5; 18]).unwrap();
        assert_eq!(v_n(&flat).unwrap(), 0.0);
    }

    #[test]
    fn pair_settings_are_lexicographic() {
        let mut expected = 0;
        for x in 1..6 {
            for xp in 0..x {
                assert_eq!(pair_setting(x, xp), expected);
                expected += 1;
            }
        }
    }

    #[test]
    fn canonical_protocol_examples() {
        for (d, s, k, value) in [(2, 2, 2, 1.0), (2, 1, 2, 0.5), (2, 2, 3, 2.0 / 3.0)] {
            let (fam, povm) = canonical_sdc_protocol(d, s, k).unwrap();
            assert_eq!(fam.len(), d * k);
            assert!(povm.completeness_error() < 1e-12);
            Povm::new(povm.effects().to_vec(), &NumericPolicy::default()).unwrap();
            let p = p_suc(&behavior(&fam, &[povm]).unwrap()).unwrap();
            assert!((p - value).abs() < 1e-12, "({d},{s},{k}) -> {p}");
        }
        assert!(canonical_sdc_protocol(3, 2, 1).is_err());
    }

    #[test]
    fn helstrom_examples() {
        let p = NumericPolicy::default();
        let zero = DensityOperator::new(ComplexMatrix::from_real_diag(&[1.0, 0.0]), 1, 2, &p).unwrap();
        let one = DensityOperator::new(ComplexMatrix::from_real_diag(&[0.0, 1.0]), 1, 2, &p).unwrap();
        let mixed = DensityOperator::new(ComplexMatrix::identity(2).scale(0.5), 1, 2, &p).unwrap();
        for (r, s, expected) in [(&zero, &one, 1.0), (&zero, &zero, 0.0), (&mixed, &zero, 0.5)] {
            let m = helstrom_povm(r, s).unwrap();
            let diff = r.matrix().inner_re(&m.effects()[1]) - s.matrix().inner_re(&m.effects()[1]);
            assert!((diff - expected).abs() < 1e-14);
            assert!((diff - trace_distance(r, s).unwrap()).abs() < 1e-14);
        }
        let m = helstrom_povm(&zero, &one).unwrap();
        assert!(m.effects()[1].max_abs_diff(zero.matrix()) < 1e-14);
    }

    #[test]
    fn vn_construction_examples() {
        for (d, n, purity) in [(2, 3, 1.0 / 3.0), (2, 4, 0.25), (2, 8, 0.25)] {
            let fam = vn_weyl_preparations(d, n).unwrap();
            assert_eq!(fam.len(), n);
            assert!((omega_purity(&fam).unwrap() - purity).abs() < 1e-12);
            assert!((weyl_group_purity_formula(d, n) - purity).abs() < 1e-15);
        }
        let fam = vn_weyl_preparations(2, 3).unwrap();
        let b = behavior(&fam, &vn_helstrom_povms(&fam).unwrap()).unwrap();
        assert!((v_n(&b).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn group_purity_formula_versus_exact() {
        // the closed form agrees with Σ n_g²/N² when N < d² or d² divides N
        for d in 2..=3 {
            for n in 2..=3 * d * d {
                let exact = weyl_group_purity_exact(d, n);
                let g = d * d;
                if n < g || n % g == 0 {
                    assert!((weyl_group_purity_formula(d, n) - exact).abs() < 1e-15);
                }
                assert!((omega_purity(&vn_weyl_preparations(d, n).unwrap()).unwrap() - exact).abs() < 1e-12);
            }
        }
        // d=2, N=5: groups (2,1,1,1) give 7/25 while the closed form gives 6/25
        assert!((weyl_group_purity_exact(2, 5) - 7.0 / 25.0).abs() < 1e-15);
        assert!((weyl_group_purity_formula(2, 5) - 6.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn protocol_file_round_trip() {
        let (fam, povm) = canonical_sdc_protocol(2, 2, 2).unwrap();
        let file = ProtocolFile::new(&fam, std::slice::from_ref(&povm));
        let text = serde_json::to_string(&file).unwrap();
        let back: ProtocolFile = serde_json::from_str(&text).unwrap();
        let (fam2, povms2) = back.load(&NumericPolicy::default()).unwrap();
        let p = p_suc(&behavior(&fam2, &povms2).unwrap()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(text.contains("\"type\":\"unitary\""));
    }

    #[test]
    fn marginal_condition_rejects_nothing_for_local_operations() {
        let fam = vn_weyl_preparations(3, 9).unwrap();
        assert!(fam.marginal_deviation(&NumericPolicy::default()).unwrap() < 1e-12);
        let shared = fam.shared().clone();
        let encodings = fam.encodings().to_vec();
        PreparationFamily::new(shared, encodings, &NumericPolicy::default()).unwrap();
    }

    #[test]
    fn rejects_non_unitary_encoding() {
        let shared = max_entangled(2).unwrap().to_density();
        let bad = Encoding::Unitary(ComplexMatrix::identity(2).scale(1.1));
        assert!(matches!(
            PreparationFamily::new(shared, vec![bad], &NumericPolicy::default()),
            Err(Error::NotUnitary { .. })
        ));
    }
}
