//! Bounds on success probability and the verdicts drawn from them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::herm_eig;
use crate::policy::NumericPolicy;
use crate::protocol::{alice_marginal, behavior, canonical_sdc_protocol, p_suc, Povm, PreparationFamily, ProtocolFile};
use crate::states::{twirl_to_isotropic, DensityOperator};

/// Largest instance accepted by [`classical_optimum_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 9;
pub const BRUTEFORCE_MAX_D: usize = 3;

const BOUND_SLACK: f64 = 1e-12;

fn check_bound_args(d_a: usize, s: usize, n: usize) -> Result<()> {
    if d_a == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!("need d_A >= 1 and N >= 1, got d_A={d_a}, N={n}")));
    }
    if s == 0 || s > d_a {
        return Err(Error::InvalidParameter(format!("Schmidt number {s} outside 1..={d_a}")));
    }
    Ok(())
}

/// `min(d_A·s/N, 1)`.
pub fn psuc_bound(d_a: usize, s: usize, n: usize) -> Result<f64> {
    check_bound_args(d_a, s, n)?;
    Ok((d_a as f64 * s as f64 / n as f64).min(1.0))
}

/// `(N²/2)(1 − 1/min(d_A·s, N))`.
pub fn vn_bound(d_a: usize, s: usize, n: usize) -> Result<f64> {
    check_bound_args(d_a, s, n)?;
    let m = (d_a * s).min(n) as f64;
    let nf = n as f64;
    Ok(nf * nf * (m - 1.0) / (2.0 * m))
}

/// `(1 + Γ)/d_A` with `Γ = Σ_{j≠k} η_j η_k`, attained with `d_A²` Weyl
/// encodings on a pure state with Schmidt coefficients `η`.
pub fn pure_state_psuc_lower(coefficients: &[f64], d_a: usize) -> Result<f64> {
    if coefficients.is_empty() || coefficients.len() > d_a {
        return Err(Error::InvalidParameter(format!(
            "need between 1 and {d_a} Schmidt coefficients, got {}",
            coefficients.len()
        )));
    }
    if coefficients.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidParameter("Schmidt coefficients must be nonnegative".into()));
    }
    if coefficients.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("Schmidt coefficients must be descending".into()));
    }
    let norm_sq: f64 = coefficients.iter().map(|c| c * c).sum();
    if (norm_sq - 1.0).abs() > NumericPolicy::default().norm_tol {
        return Err(Error::NotNormalized { norm: norm_sq.sqrt() });
    }
    let sum: f64 = coefficients.iter().sum();
    let gamma = sum * sum - norm_sq;
    Ok((1.0 + gamma) / d_a as f64)
}

/// Deterministic classical strategy: message `encoder[x]`, guess
/// `decoder[a][y]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalStrategy {
    pub encoder: Vec<usize>,
    pub decoder: Vec<Vec<usize>>,
}

impl ClassicalStrategy {
    /// Success probability in the single-setting task.
    pub fn p_suc(&self) -> f64 {
        let n = self.encoder.len();
        let hits = self.encoder.iter().enumerate().filter(|&(x, &a)| self.decoder[a][0] == x).count();
        hits as f64 / n as f64
    }
}

/// Exact best classical `p_suc` with a `d_A`-level message, together with
/// a strategy attaining it.
///
/// Shared randomness only mixes deterministic strategies and `p_suc` is
/// linear in the strategy, so the maximum over deterministic pairs is the
/// classical optimum. For a fixed encoder the best decoder answers, for each
/// message, some `x` mapped to it, so the search runs over encoders only.
pub fn classical_optimum_bruteforce(n: usize, d_a: usize) -> Result<(f64, ClassicalStrategy)> {
    if n == 0 || d_a == 0 {
        return Err(Error::InvalidParameter(format!("need N >= 1 and d_A >= 1, got N={n}, d_A={d_a}")));
    }
    if n > BRUTEFORCE_MAX_N || d_a > BRUTEFORCE_MAX_D {
        return Err(Error::InvalidParameter(format!(
            "enumeration capped at N <= {BRUTEFORCE_MAX_N}, d_A <= {BRUTEFORCE_MAX_D}; got N={n}, d_A={d_a}"
        )));
    }
    let total = d_a.pow(n as u32);
    let mut best: Option<ClassicalStrategy> = None;
    let mut best_hits = 0;
    let mut encoder = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for slot in encoder.iter_mut() {
            *slot = c % d_a;
            c /= d_a;
        }
        let decoder: Vec<Vec<usize>> = (0..d_a)
            .map(|a| vec![encoder.iter().position(|&e| e == a).unwrap_or(0)])
            .collect();
        let strategy = ClassicalStrategy { encoder: encoder.clone(), decoder };
        let hits = (0..n).filter(|&x| strategy.decoder[strategy.encoder[x]][0] == x).count();
        if best.is_none() || hits > best_hits {
            best_hits = hits;
            best = Some(strategy);
        }
    }
    Ok((best_hits as f64 / n as f64, best.expect("at least one encoder")))
}

/// Smallest `s` with `min(d_A·s/N, 1) ≥ p − 1e-12`, clamped to `[1, d_A]`.
pub fn schmidt_number_lower_bound(p_suc_observed: f64, d_a: usize, n: usize) -> usize {
    let d_a = d_a.max(1);
    for s in 1..=d_a {
        if (d_a as f64 * s as f64 / n as f64).min(1.0) >= p_suc_observed - BOUND_SLACK {
            return s;
        }
    }
    d_a
}

/// Twirls `rho` to the isotropic state with the same `⟨Φ⁺|ρ|Φ⁺⟩`, encodes
/// with the `d²` Weyl unitaries and decodes in the maximally entangled
/// basis. Returns the protocol and its simulated `p_suc`.
pub fn build_zeta_protocol(rho: &DensityOperator) -> Result<(PreparationFamily, Povm, f64)> {
    let (d_a, d_b) = rho.dims();
    if d_a != d_b {
        return Err(Error::dims(format!("d_B = d_A = {d_a}"), format!("d_B = {d_b}")));
    }
    let twirled = twirl_to_isotropic(rho)?;
    let family = PreparationFamily::weyl(twirled, d_a)?;
    let (_, povm) = canonical_sdc_protocol(d_a, d_a, d_a)?;
    let value = p_suc(&behavior(&family, std::slice::from_ref(&povm))?)?;
    Ok((family, povm, value))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelftestTolerances {
    /// Applied to `p_suc` and to the pairwise overlaps.
    pub probability: f64,
    /// Applied to the eigenvalues of Alice's marginal.
    pub spectrum: f64,
}

impl Default for SelftestTolerances {
    fn default() -> Self {
        Self { probability: 1e-6, spectrum: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub name: String,
    pub sha256: String,
}

impl InputHash {
    fn of(name: &str, bytes: &[u8]) -> Self {
        Self { name: name.to_string(), sha256: sha256_hex(bytes) }
    }
}

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationVerdict {
    pub p_suc: f64,
    pub d_a: usize,
    pub n_preparations: usize,
    pub schmidt_lower_bound: usize,
    pub entangled: bool,
    pub maximally_entangled_selftest: bool,
    /// Distance from `p_suc` to the nearest of the bounds `min(d_A·s/N, 1)`.
    pub margin: f64,
    pub inputs: Vec<InputHash>,
}

fn nearest_bound_distance(p: f64, d_a: usize, n: usize) -> f64 {
    (1..=d_a)
        .map(|s| ((d_a as f64 * s as f64 / n as f64).min(1.0) - p).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Verdict from an observed success probability alone; never claims a
/// self-test.
pub fn certify(p_suc_observed: f64, d_a: usize, n: usize) -> Result<CertificationVerdict> {
    if d_a == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!("need d_A >= 1 and N >= 1, got d_A={d_a}, N={n}")));
    }
    if !(0.0..=1.0).contains(&p_suc_observed) {
        return Err(Error::InvalidParameter(format!("p_suc {p_suc_observed} outside [0, 1]")));
    }
    let s = schmidt_number_lower_bound(p_suc_observed, d_a, n);
    let record = serde_json::json!({ "p_suc": p_suc_observed, "d_a": d_a, "n": n });
    Ok(CertificationVerdict {
        p_suc: p_suc_observed,
        d_a,
        n_preparations: n,
        schmidt_lower_bound: s,
        entangled: s >= 2,
        maximally_entangled_selftest: false,
        margin: nearest_bound_distance(p_suc_observed, d_a, n),
        inputs: vec![InputHash::of("observation", record.to_string().as_bytes())],
    })
}

/// Checks whether a protocol with `N = d_A²` preparations saturates
/// `p_suc = 1` in the way that pins the shared state to a maximally
/// entangled one: success within tolerance, pairwise non-overlapping
/// preparations and a uniform marginal on Alice's side.
pub fn selftest_check(family: &PreparationFamily, povm: &Povm, tol: &SelftestTolerances) -> Result<CertificationVerdict> {
    let d_a = family.shared().d_a();
    let n = d_a * d_a;
    if family.len() != n {
        return Err(Error::ShapeMismatch(format!("self-test needs {n} preparations, got {}", family.len())));
    }
    if povm.len() != n {
        return Err(Error::ShapeMismatch(format!("self-test needs {n} outcomes, got {}", povm.len())));
    }
    let p = p_suc(&behavior(family, std::slice::from_ref(povm))?)?.clamp(0.0, 1.0);

    let states = family.prepared_states()?;
    let mut max_overlap = 0.0f64;
    for x in 1..n {
        for xp in 0..x {
            max_overlap = max_overlap.max(states[x].matrix().inner_re(states[xp].matrix()));
        }
    }
    let marginal = herm_eig(&alice_marginal(family), &NumericPolicy::default())?;
    let uniform = 1.0 / d_a as f64;
    let spectrum_dev = marginal.values.iter().map(|l| (l - uniform).abs()).fold(0.0, f64::max);

    let passes = p >= 1.0 - tol.probability && max_overlap <= tol.probability && spectrum_dev <= tol.spectrum;
    let s = schmidt_number_lower_bound(p, d_a, n);
    let protocol = serde_json::to_vec(&ProtocolFile::new(family, std::slice::from_ref(povm)))?;
    let tolerances = serde_json::to_vec(tol)?;
    Ok(CertificationVerdict {
        p_suc: p,
        d_a,
        n_preparations: n,
        schmidt_lower_bound: s,
        entangled: s >= 2,
        maximally_entangled_selftest: passes,
        margin: nearest_bound_distance(p, d_a, n),
        inputs: vec![InputHash::of("protocol", &protocol), InputHash::of("tolerances", &tolerances)],
    })
}

/// Reference critical visibilities for `d`-dimensional isotropic and
/// Werner states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConstants {
    pub d: usize,
    pub sdc_isotropic: f64,
    pub steering_isotropic: f64,
    pub steering_werner: f64,
    pub werner_sdc_observed: f64,
}

pub fn comparison_constants(d: usize) -> Result<ComparisonConstants> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    let df = d as f64;
    let harmonic: f64 = (1..=d).map(|k| 1.0 / k as f64).sum();
    Ok(ComparisonConstants {
        d,
        sdc_isotropic: 1.0 / (df + 1.0),
        steering_isotropic: (harmonic - 1.0) / (df - 1.0),
        steering_werner: df / (df + 1.0),
        werner_sdc_observed: (df - 1.0) / df,
    })
}
