use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use sdc_core::protocol::{
    behavior, omega_purity, p_suc, v_n, vn_helstrom_povms, vn_weyl_preparations, weyl_group_purity_exact,
    weyl_group_purity_formula, ProtocolFile,
};
use sdc_core::seesaw::{default_restarts, seesaw_psuc, SeesawConfig};
use sdc_core::states::{
    isotropic, max_entangled, partially_entangled, singlet_fraction, werner, DensityOperator,
    SingletFractionOptions,
};
use sdc_core::witness::{
    certify, classical_optimum_bruteforce, comparison_constants, psuc_bound, selftest_check, vn_bound,
    SelftestTolerances, BRUTEFORCE_MAX_D, BRUTEFORCE_MAX_N,
};
use sdc_core::{Error, NumericPolicy};

use crate::output::{emit, fmt_float, Format, Metadata, Report, Table};
use crate::{Family, GlobalArgs, StateArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Invariant,
    Solver,
}

impl ErrorKind {
    pub fn code(self) -> u8 {
        match self {
            ErrorKind::Input => 2,
            ErrorKind::Invariant => 3,
            ErrorKind::Solver => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub source: anyhow::Error,
}

type CliResult<T> = Result<T, CliError>;

fn input_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError { kind: ErrorKind::Input, source: e.into() }
}

fn invariant_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError { kind: ErrorKind::Invariant, source: e.into() }
}

/// Classifies a failure raised while computing (not while reading input).
fn compute_err(e: Error) -> CliError {
    let kind = match e {
        Error::Solver(_) | Error::NoConvergence { .. } | Error::SingularSystem { .. } | Error::Infeasible(_) => {
            ErrorKind::Solver
        }
        _ => ErrorKind::Invariant,
    };
    CliError { kind, source: e.into() }
}

fn load_policy(global: &GlobalArgs) -> CliResult<NumericPolicy> {
    match &global.policy {
        None => Ok(NumericPolicy::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(input_err)?;
            serde_json::from_str(&text).with_context(|| format!("parsing policy {}", p.display())).map_err(input_err)
        }
    }
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(input_err)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(input_err)
}

fn finish(global: &GlobalArgs, report: Report, default: Format) -> CliResult<()> {
    let text = report.render(global.format.unwrap_or(default));
    emit(&text, global.output.as_deref()).map_err(input_err)
}

/// Accepts a bare protocol or a `seesaw` result with a `protocol` field.
fn protocol_file(value: &Value) -> CliResult<ProtocolFile> {
    let inner = value.get("protocol").unwrap_or(value);
    serde_json::from_value(inner.clone()).context("not a protocol file").map_err(input_err)
}

pub fn simulate(global: &GlobalArgs, path: &Path) -> CliResult<()> {
    let policy = load_policy(global)?;
    let raw = read_json(path)?;
    let file = protocol_file(&raw)?;
    let (family, povms) = file.load(&policy).map_err(invariant_err)?;
    let beh = behavior(&family, &povms).map_err(invariant_err)?;
    let shape = beh.shape();
    let (d_a, d_b) = family.shared().dims();
    let n = shape.n_preparations;
    let s_max = d_a.min(d_b);

    let mut summary = Map::new();
    summary.insert("d_a".into(), json!(d_a));
    summary.insert("d_b".into(), json!(d_b));
    summary.insert("n_preparations".into(), json!(n));
    summary.insert("n_settings".into(), json!(shape.n_settings));
    summary.insert("n_outcomes".into(), json!(shape.n_outcomes));
    if shape.is_psuc() {
        let p = p_suc(&beh).map_err(invariant_err)?;
        let verdict = certify(p.clamp(0.0, 1.0), d_a, n).map_err(invariant_err)?;
        summary.insert("p_suc".into(), json!(p));
        summary.insert("bound".into(), json!(psuc_bound(d_a, s_max, n).map_err(invariant_err)?));
        summary.insert("classical_bound".into(), json!(psuc_bound(d_a, 1, n).map_err(invariant_err)?));
        summary.insert("schmidt_lower_bound".into(), json!(verdict.schmidt_lower_bound));
        summary.insert("entangled".into(), json!(verdict.entangled));
    } else if shape.is_vn() {
        let v = v_n(&beh).map_err(invariant_err)?;
        summary.insert("v_n".into(), json!(v));
        summary.insert("bound".into(), json!(vn_bound(d_a, s_max, n).map_err(invariant_err)?));
        summary.insert("classical_bound".into(), json!(vn_bound(d_a, 1, n).map_err(invariant_err)?));
    } else {
        log::warn!("scenario shape fits neither p_suc nor V_N; reporting the behavior only");
    }

    let mut table = Table::new(&["b", "x", "y", "p"]);
    for (b, x, y, p) in beh.rows() {
        table.push(vec![b.to_string(), x.to_string(), y.to_string(), fmt_float(p)]);
    }
    let inputs = json!({ "protocol": raw });
    let report = Report {
        metadata: Metadata::new("simulate", global.seed, policy, &inputs),
        summary,
        table: Some(table),
        extra: Map::new(),
    };
    finish(global, report, Format::Csv)
}

fn require<T: Copy>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| input_err(anyhow!("missing --{flag}")))
}

fn named_state(family: Family, d: usize, args: &StateArgs) -> CliResult<(DensityOperator, Value)> {
    let (state, params) = match family {
        Family::Isotropic => {
            let chi = require(args.chi, "chi")?;
            (isotropic(d, chi), json!({ "family": "isotropic", "d": d, "chi": chi }))
        }
        Family::Werner => {
            let alpha = require(args.alpha, "alpha")?;
            (werner(d, alpha), json!({ "family": "werner", "d": d, "alpha": alpha }))
        }
        Family::MaxEntangled => {
            (max_entangled(d).map(|p| p.to_density()), json!({ "family": "max-entangled", "d": d }))
        }
        Family::Partial => {
            let s = require(args.s, "s")?;
            (partially_entangled(d, s).map(|p| p.to_density()), json!({ "family": "partial", "d": d, "s": s }))
        }
    };
    Ok((state.map_err(input_err)?, params))
}

fn load_state(args: &StateArgs, policy: &NumericPolicy) -> CliResult<(DensityOperator, Value)> {
    match (&args.state, args.family) {
        (Some(path), _) => {
            let raw = read_json(path)?;
            let state = DensityOperator::from_json(&raw.to_string(), policy).map_err(|e| match e {
                Error::Json(_) => input_err(e),
                other => invariant_err(other),
            })?;
            Ok((state, json!({ "state": raw })))
        }
        (None, Some(family)) => named_state(family, require(args.d, "d")?, args),
        (None, None) => Err(input_err(anyhow!("give either --state FILE or --family"))),
    }
}

fn seesaw_config(global: &GlobalArgs, d_a: usize, n: usize, max_rounds: usize) -> SeesawConfig {
    let base = SeesawConfig::for_dimension(d_a, n);
    SeesawConfig {
        restarts: global.restarts.unwrap_or_else(|| default_restarts(d_a)),
        seed: global.seed,
        tol: global.tol.unwrap_or(base.tol),
        max_rounds,
        ..base
    }
}

fn config_json(cfg: &SeesawConfig) -> Value {
    json!({
        "n_preparations": cfg.n_preparations,
        "restarts": cfg.restarts,
        "seed": cfg.seed,
        "tol": cfg.tol,
        "max_rounds": cfg.max_rounds,
    })
}

pub fn seesaw(
    global: &GlobalArgs,
    state_args: &StateArgs,
    n: Option<usize>,
    max_rounds: usize,
    trace: Option<&Path>,
) -> CliResult<()> {
    let policy = load_policy(global)?;
    let (shared, state_inputs) = load_state(state_args, &policy)?;
    let d_a = shared.d_a();
    let n = n.unwrap_or(d_a * d_a);
    let cfg = seesaw_config(global, d_a, n, max_rounds);
    let result = seesaw_psuc(&shared, &cfg).map_err(|e| match e {
        Error::InvalidParameter(_) => input_err(e),
        other => compute_err(other),
    })?;
    let verdict = certify(result.best_value.clamp(0.0, 1.0), d_a, n).map_err(invariant_err)?;

    let mut summary = Map::new();
    summary.insert("best_value".into(), json!(result.best_value));
    summary.insert("best_restart".into(), json!(result.best_restart));
    summary.insert("rounds_used".into(), json!(result.rounds_used));
    summary.insert("restarts".into(), json!(cfg.restarts));
    summary.insert("failed_restarts".into(), json!(result.traces.iter().filter(|t| t.error.is_some()).count()));
    summary.insert("classical_bound".into(), json!(psuc_bound(d_a, 1, n).map_err(invariant_err)?));
    summary.insert("schmidt_lower_bound".into(), json!(verdict.schmidt_lower_bound));
    summary.insert("entangled".into(), json!(verdict.entangled));

    let restarts: Vec<Value> = result
        .traces
        .iter()
        .map(|t| {
            json!({
                "restart": t.restart,
                "rounds": t.values.len(),
                "final_value": t.values.last().copied().map(crate::output::round12),
                "error": t.error,
            })
        })
        .collect();
    let protocol = ProtocolFile::new(&result.family(&shared), std::slice::from_ref(&result.povm));
    let mut extra = Map::new();
    extra.insert("config".into(), config_json(&cfg));
    extra.insert("restart_summary".into(), Value::Array(restarts));
    extra.insert("protocol".into(), serde_json::to_value(&protocol).map_err(invariant_err)?);

    let inputs = json!({ "command": "seesaw", "state": state_inputs, "config": config_json(&cfg) });
    let metadata = Metadata::new("seesaw", global.seed, policy, &inputs);
    if let Some(path) = trace {
        let mut table = Table::new(&["restart", "round", "value"]);
        for t in &result.traces {
            for (round, v) in t.values.iter().enumerate() {
                table.push(vec![t.restart.to_string(), (round + 1).to_string(), fmt_float(*v)]);
            }
        }
        let text = format!("{}{}", metadata.csv_lines(), table.to_csv());
        emit(&text, Some(path)).map_err(input_err)?;
    }
    finish(global, Report { metadata, summary, table: None, extra }, Format::Json)
}

fn grid(from: f64, to: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() || to < from {
        return Err(input_err(anyhow!("need finite from <= to and step > 0")));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| crate::output::round12(from + i as f64 * step)).collect())
}

pub fn sweep(
    global: &GlobalArgs,
    family: Family,
    d: usize,
    (from, to, step): (f64, f64, f64),
    n: Option<usize>,
    max_rounds: usize,
) -> CliResult<()> {
    if !matches!(family, Family::Isotropic | Family::Werner) {
        return Err(input_err(anyhow!("sweeps are defined for the isotropic and Werner families")));
    }
    let policy = load_policy(global)?;
    let points = grid(from, to, step)?;
    let make_state = |x: f64| match family {
        Family::Isotropic => isotropic(d, x),
        _ => werner(d, x),
    };
    // reject out-of-range grids before spending time on any point
    for &x in &points {
        make_state(x).map_err(input_err)?;
    }
    let n = n.unwrap_or(d * d);
    let cfg = seesaw_config(global, d, n, max_rounds);
    let classical = psuc_bound(d, 1, n).map_err(input_err)?;

    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&x| {
            let state = make_state(x).expect("validated above");
            let zeta = singlet_fraction(&state, &SingletFractionOptions { seed: global.seed, ..Default::default() })
                .map(|s| fmt_float(s.value))
                .unwrap_or_default();
            match seesaw_psuc(&state, &cfg) {
                Ok(res) => {
                    let s = sdc_core::witness::schmidt_number_lower_bound(res.best_value, d, n);
                    vec![
                        fmt_float(x),
                        fmt_float(res.best_value),
                        fmt_float(d as f64 * res.best_value),
                        fmt_float(classical),
                        zeta,
                        s.to_string(),
                        (s >= 2).to_string(),
                        "ok".to_string(),
                    ]
                }
                Err(e) => {
                    log::warn!("sweep point {x}: {e}");
                    let status = format!("failed: {e}").replace([',', '\n'], ";");
                    vec![fmt_float(x), String::new(), String::new(), fmt_float(classical), zeta, String::new(), String::new(), status]
                }
            }
        })
        .collect();

    let mut table = Table::new(&[
        "param",
        "p_suc_lower",
        "rescaled",
        "classical_bound",
        "singlet_fraction",
        "schmidt_lower_bound",
        "entangled",
        "status",
    ]);
    rows.into_iter().for_each(|r| table.push(r));

    let constants = comparison_constants(d).map_err(input_err)?;
    let mut summary = Map::new();
    summary.insert("family".into(), json!(if family == Family::Isotropic { "isotropic" } else { "werner" }));
    summary.insert("d".into(), json!(d));
    summary.insert("n_preparations".into(), json!(n));
    summary.insert("sdc_isotropic".into(), json!(constants.sdc_isotropic));
    summary.insert("steering_isotropic".into(), json!(constants.steering_isotropic));
    summary.insert("steering_werner".into(), json!(constants.steering_werner));
    summary.insert("werner_sdc_observed".into(), json!(constants.werner_sdc_observed));
    let inputs = json!({
        "command": "sweep",
        "family": summary["family"],
        "d": d,
        "grid": [from, to, step],
        "config": config_json(&cfg),
    });
    let report = Report {
        metadata: Metadata::new("sweep", global.seed, policy, &inputs),
        summary,
        table: Some(table),
        extra: Map::new(),
    };
    finish(global, report, Format::Csv)
}

pub fn witness(
    global: &GlobalArgs,
    d: usize,
    s: Option<usize>,
    n: Option<usize>,
    p: Option<f64>,
    protocol: Option<&Path>,
) -> CliResult<()> {
    let policy = load_policy(global)?;
    let s = s.unwrap_or(d);
    let n = n.unwrap_or(d * d);
    let mut summary = Map::new();
    summary.insert("d".into(), json!(d));
    summary.insert("s".into(), json!(s));
    summary.insert("n".into(), json!(n));
    summary.insert("psuc_bound".into(), json!(psuc_bound(d, s, n).map_err(input_err)?));
    summary.insert("classical_psuc_bound".into(), json!(psuc_bound(d, 1, n).map_err(input_err)?));
    summary.insert("vn_bound".into(), json!(vn_bound(d, s, n).map_err(input_err)?));
    summary.insert("classical_vn_bound".into(), json!(vn_bound(d, 1, n).map_err(input_err)?));
    if n <= BRUTEFORCE_MAX_N && d <= BRUTEFORCE_MAX_D {
        let (v, _) = classical_optimum_bruteforce(n, d).map_err(input_err)?;
        summary.insert("classical_optimum_enumerated".into(), json!(v));
    }
    if d >= 2 {
        let c = comparison_constants(d).map_err(input_err)?;
        summary.insert("sdc_isotropic".into(), json!(c.sdc_isotropic));
        summary.insert("steering_isotropic".into(), json!(c.steering_isotropic));
        summary.insert("steering_werner".into(), json!(c.steering_werner));
        summary.insert("werner_sdc_observed".into(), json!(c.werner_sdc_observed));
    }

    let mut extra = Map::new();
    let mut inputs = json!({ "command": "witness", "d": d, "s": s, "n": n, "p": p });
    if let Some(p) = p {
        let v = certify(p, d, n).map_err(input_err)?;
        summary.insert("observed_p_suc".into(), json!(p));
        summary.insert("schmidt_lower_bound".into(), json!(v.schmidt_lower_bound));
        summary.insert("entangled".into(), json!(v.entangled));
        summary.insert("margin".into(), json!(v.margin));
        extra.insert("verdict".into(), serde_json::to_value(&v).map_err(invariant_err)?);
    }
    if let Some(path) = protocol {
        let raw = read_json(path)?;
        let (family, povms) = protocol_file(&raw)?.load(&policy).map_err(invariant_err)?;
        let [povm] = povms.as_slice() else {
            return Err(input_err(anyhow!("self-test needs exactly one measurement, got {}", povms.len())));
        };
        let v = selftest_check(&family, povm, &SelftestTolerances::default()).map_err(|e| match e {
            Error::ShapeMismatch(_) => input_err(e),
            other => compute_err(other),
        })?;
        summary.insert("selftest_p_suc".into(), json!(v.p_suc));
        summary.insert("maximally_entangled_selftest".into(), json!(v.maximally_entangled_selftest));
        extra.insert("selftest".into(), serde_json::to_value(&v).map_err(invariant_err)?);
        inputs["protocol"] = raw;
    }
    let report = Report { metadata: Metadata::new("witness", global.seed, policy, &inputs), summary, table: None, extra };
    finish(global, report, Format::Json)
}

pub fn vn(global: &GlobalArgs, d: usize, n: usize) -> CliResult<()> {
    let policy = load_policy(global)?;
    let family = vn_weyl_preparations(d, n).map_err(input_err)?;
    let povms = vn_helstrom_povms(&family).map_err(compute_err)?;
    let v = v_n(&behavior(&family, &povms).map_err(compute_err)?).map_err(compute_err)?;
    let mut summary = Map::new();
    summary.insert("d".into(), json!(d));
    summary.insert("n".into(), json!(n));
    summary.insert("v_n".into(), json!(v));
    summary.insert("bound".into(), json!(vn_bound(d, d, n).map_err(input_err)?));
    summary.insert("classical_bound".into(), json!(vn_bound(d, 1, n).map_err(input_err)?));
    summary.insert("omega_purity".into(), json!(omega_purity(&family).map_err(compute_err)?));
    summary.insert("omega_purity_group_sizes".into(), json!(weyl_group_purity_exact(d, n)));
    summary.insert("omega_purity_closed_form".into(), json!(weyl_group_purity_formula(d, n)));
    let inputs = json!({ "command": "vn", "d": d, "n": n });
    let report =
        Report { metadata: Metadata::new("vn", global.seed, policy, &inputs), summary, table: None, extra: Map::new() };
    finish(global, report, Format::Json)
}
