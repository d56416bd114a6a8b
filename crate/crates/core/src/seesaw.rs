//! See-saw lower bounds on the best success probability for a shared state.
//!
//! Starting from a measurement, the preparation SDP and the measurement SDP
//! are solved alternately. Restart 0 starts from the maximally entangled
//! basis measurement when `d_A = d_B` and `N = d_A²`; every other restart
//! starts from a random measurement. Both half-steps return valid
//! (repaired) protocols and values are obtained by simulating them, so every
//! recorded value is attained by an explicit protocol.

use crate::error::{Error, Result};
use crate::protocol::{behavior, canonical_sdc_protocol, p_suc, Encoding, Povm, PreparationFamily};
use crate::sampling::{random_povm_effects, rng_for};
use crate::sdpsolve::choi::ChoiOperator;
use crate::sdpsolve::{optimize_povm, optimize_preparations, SdpOptions};
use crate::states::DensityOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeesawConfig {
    pub n_preparations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Stop once a full round improves the value by less than this.
    pub tol: f64,
    pub max_rounds: usize,
    pub sdp: SdpOptions,
}

impl SeesawConfig {
    /// Defaults for `N` preparations on a `d`-dimensional sender.
    pub fn for_dimension(d: usize, n_preparations: usize) -> Self {
        Self {
            n_preparations,
            restarts: default_restarts(d),
            seed: 0,
            tol: 1e-7,
            max_rounds: 200,
            sdp: SdpOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_preparations < 2 {
            return Err(Error::InvalidParameter("see-saw needs N >= 2".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("see-saw needs at least one restart".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidParameter("max_rounds must be positive".into()));
        }
        Ok(())
    }
}

pub fn default_restarts(d: usize) -> usize {
    if d <= 3 {
        10
    } else {
        20
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartTrace {
    pub restart: usize,
    /// Value after each full round; non-decreasing.
    pub values: Vec<f64>,
    /// Set when an SDP failure aborted the restart.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SeesawResult {
    pub best_value: f64,
    pub best_restart: usize,
    pub chois: Vec<ChoiOperator>,
    pub povm: Povm,
    pub rounds_used: usize,
    pub traces: Vec<RestartTrace>,
}

impl SeesawResult {
    /// The best protocol as a preparation family on the given shared state.
    pub fn family(&self, shared: &DensityOperator) -> PreparationFamily {
        PreparationFamily::from_parts(shared.clone(), self.chois.iter().cloned().map(Encoding::Choi).collect())
    }

    /// Trace as CSV rows `restart,round,value` with a header.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("restart,round,value\n");
        for t in &self.traces {
            for (round, v) in t.values.iter().enumerate() {
                s.push_str(&format!("{},{},{}\n", t.restart, round + 1, v));
            }
        }
        s
    }
}

struct RestartOutcome {
    value: f64,
    chois: Vec<ChoiOperator>,
    povm: Povm,
    values: Vec<f64>,
}

fn run_restart(shared: &DensityOperator, cfg: &SeesawConfig, restart: usize) -> Result<RestartOutcome> {
    let n = cfg.n_preparations;
    let (d_a, d_b) = shared.dims();
    let mut povm = if restart == 0 && d_a == d_b && n == d_a * d_a {
        canonical_sdc_protocol(d_a, d_a, d_a)?.1
    } else {
        let mut rng = rng_for(cfg.seed, restart as u64);
        Povm::repaired(&random_povm_effects(shared.dim(), n, &mut rng)?)?
    };

    let mut chois: Option<Vec<ChoiOperator>> = None;
    let mut value = f64::NEG_INFINITY;
    let mut values = Vec::new();
    for _ in 0..cfg.max_rounds {
        let previous = value;

        let prep = optimize_preparations(shared, &povm, &cfg.sdp)?;
        if chois.is_none() || prep.p_suc >= value {
            value = prep.p_suc;
            chois = Some(prep.chois);
        }
        let family = PreparationFamily::from_parts(
            shared.clone(),
            chois.as_ref().expect("set above").iter().cloned().map(Encoding::Choi).collect(),
        );

        let meas = optimize_povm(&family.prepared_states()?, &cfg.sdp)?;
        if meas.p_suc >= value {
            value = meas.p_suc;
            povm = meas.povm;
        }
        values.push(value);
        if value - previous < cfg.tol {
            break;
        }
    }
    let chois = chois.expect("at least one round");
    Ok(RestartOutcome { value, chois, povm, values })
}

/// Best success probability found over all restarts, with the protocol
/// attaining it.
pub fn seesaw_psuc(shared: &DensityOperator, config: &SeesawConfig) -> Result<SeesawResult> {
    config.validate()?;
    let mut traces = Vec::with_capacity(config.restarts);
    let mut best: Option<(usize, RestartOutcome)> = None;
    let mut rounds_used = 0;
    for r in 0..config.restarts {
        match run_restart(shared, config, r) {
            Ok(out) => {
                rounds_used += out.values.len();
                traces.push(RestartTrace { restart: r, values: out.values.clone(), error: None });
                if best.as_ref().is_none_or(|(_, b)| out.value > b.value) {
                    best = Some((r, out));
                }
            }
            Err(e) => {
                log::warn!("see-saw restart {r} aborted: {e}");
                traces.push(RestartTrace { restart: r, values: Vec::new(), error: Some(e.to_string()) });
            }
        }
    }
    let Some((best_restart, out)) = best else {
        return Err(Error::Solver("every see-saw restart failed".into()));
    };
    // final value from an independent simulation of the stored protocol
    let family = PreparationFamily::from_parts(
        shared.clone(),
        out.chois.iter().cloned().map(Encoding::Choi).collect(),
    );
    let best_value = p_suc(&behavior(&family, std::slice::from_ref(&out.povm))?)?;
    Ok(SeesawResult { best_value, best_restart, chois: out.chois, povm: out.povm, rounds_used, traces })
}
