//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use sdc_core::linalg::{vec_inner, ComplexMatrix, C64};
use sdc_core::protocol::{
    behavior, canonical_sdc_protocol, omega_purity, p_suc, v_n, vn_helstrom_povms, vn_weyl_preparations,
    weyl_group_purity_formula, Encoding, Povm, PreparationFamily,
};
use sdc_core::sampling::{haar_unitary, random_density_matrix, random_povm_effects, random_pure_with_rank, rng_for, random_unit_vector};
use sdc_core::sdpsolve::{apply_choi, optimize_povm, optimize_preparations, SdpOptions, SdpSolution};
use sdc_core::seesaw::{seesaw_psuc, SeesawConfig};
use sdc_core::states::{isotropic, max_entangled, werner, DensityOperator, PureState};
use sdc_core::witness::{
    build_zeta_protocol, certify, classical_optimum_bruteforce, comparison_constants, psuc_bound, selftest_check,
    SelftestTolerances,
};
use sdc_core::NumericPolicy;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn simulate(family: &PreparationFamily, povm: &Povm) -> Result<f64, String> {
    behavior(family, std::slice::from_ref(povm)).and_then(|b| p_suc(&b)).map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for d in 2..=5 {
        let (fam, povm) = canonical_sdc_protocol(d, d, d).map_err(|e| e.to_string())?;
        let p = simulate(&fam, &povm)?;
        worst = worst.max((p - 1.0).abs());
        ensure((p - 1.0).abs() <= 1e-9, || format!("d={d}: p_suc={p}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("max |p_suc - 1| = {worst:.2e}, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for d in 2..=3 {
        for s in 1..=d {
            for k in s..=s + 2 {
                let (fam, povm) = canonical_sdc_protocol(d, s, k).map_err(|e| e.to_string())?;
                let p = simulate(&fam, &povm)?;
                let target = s as f64 / k as f64;
                worst = worst.max((p - target).abs());
                ensure((p - target).abs() <= 1e-9, || format!("d={d} s={s} K={k}: p_suc={p}, want {target}"))?;
            }
        }
    }

    let policy = NumericPolicy::default();
    let mut rng = rng_for(2024, 2);
    let mut max_excess = f64::NEG_INFINITY;
    for sample in 0..200 {
        let d = 2 + sample % 2;
        let s = 1 + (sample / 2) % d;
        let n = 2 + (sample / 6) % (d * d + 2);
        let psi = random_pure_with_rank(d, d, s, &mut rng).map_err(|e| e.to_string())?;
        let shared = PureState::new(psi, d, d, &policy).map_err(|e| e.to_string())?.to_density();
        let encodings = (0..n)
            .map(|_| haar_unitary(d, &mut rng).map(Encoding::Unitary))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let fam = PreparationFamily::new(shared, encodings, &policy).map_err(|e| e.to_string())?;
        let povm = Povm::repaired(&random_povm_effects(d * d, n, &mut rng).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let bound = psuc_bound(d, s, n).map_err(|e| e.to_string())?;
        let p_random = simulate(&fam, &povm)?;
        // the best measurement for these encodings must respect the bound too
        let states = fam.prepared_states().map_err(|e| e.to_string())?;
        let p_opt = optimize_povm(&states, &SdpOptions::default()).map_err(|e| e.to_string())?.p_suc;
        let excess = p_random.max(p_opt) - bound;
        max_excess = max_excess.max(excess);
        ensure(excess <= 1e-9, || format!("sample {sample} (d={d}, s={s}, N={n}): p_suc exceeds bound by {excess:.3e}"))?;
    }
    Ok(format!("tightness max error {worst:.2e}; 200 random protocols, max excess over bound {max_excess:.3e}"))
}

fn criterion_3() -> Outcome {
    let mut parts = Vec::new();
    for (n, d) in [(2, 2), (4, 2), (6, 2), (9, 3)] {
        let (v, _) = classical_optimum_bruteforce(n, d).map_err(|e| e.to_string())?;
        let expected = (d as f64 / n as f64).min(1.0);
        ensure(v == expected, || format!("(N={n}, d={d}): {v} != {expected}"))?;
        parts.push(format!("({n},{d})={v:.6}"));
    }
    Ok(parts.join(" "))
}

fn seesaw_value(rho: &DensityOperator, d: usize, restarts: usize, seed: u64) -> Result<f64, String> {
    let cfg = SeesawConfig { restarts, seed, ..SeesawConfig::for_dimension(d, d * d) };
    seesaw_psuc(rho, &cfg).map(|r| r.best_value).map_err(|e| e.to_string())
}

fn isotropic_verdict(d: usize, chi: f64) -> Result<(f64, bool), String> {
    let rho = isotropic(d, chi).map_err(|e| e.to_string())?;
    let v = seesaw_value(&rho, d, 2, 7)?;
    let verdict = certify(v.clamp(0.0, 1.0), d, d * d).map_err(|e| e.to_string())?;
    Ok((v, verdict.entangled))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    for d in 2..=3 {
        let mut worst_slack = f64::INFINITY;
        let mut verdicts = Vec::new();
        for i in 0..=20 {
            let chi = i as f64 * 0.05;
            let (v, entangled) = isotropic_verdict(d, chi)?;
            let zeta = chi + (1.0 - chi) / (d * d) as f64;
            worst_slack = worst_slack.min(v - zeta);
            ensure(v >= zeta - 1e-5, || format!("d={d} chi={chi:.2}: see-saw {v:.9} < zeta {zeta:.9}"))?;
            verdicts.push((chi, entangled));
        }
        let first = verdicts.iter().position(|&(_, e)| e).ok_or_else(|| format!("d={d}: no entangled verdict"))?;
        ensure(first > 0 && verdicts[first..].iter().all(|&(_, e)| e), || format!("d={d}: verdict not a single flip"))?;
        let (mut lo, mut hi) = (verdicts[first - 1].0, verdicts[first].0);
        while hi - lo > 0.005 {
            let mid = 0.5 * (lo + hi);
            if isotropic_verdict(d, mid)?.1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let flip = 0.5 * (lo + hi);
        let crit = 1.0 / (d as f64 + 1.0);
        ensure((flip - crit).abs() <= 0.01, || format!("d={d}: flip at {flip:.4}, chi_crit {crit:.4}"))?;
        details.push(format!("d={d}: min slack {worst_slack:.2e}, flip {flip:.4} (crit {crit:.4})"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    details.push(format!("{elapsed:.1?}"));
    Ok(details.join("; "))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    for d in 2..=3 {
        let classical = 1.0 / d as f64;
        let restarts = 3;
        let mut threshold = None;
        for i in 0..=50 {
            let alpha = i as f64 * 0.02;
            let rho = werner(d, alpha).map_err(|e| e.to_string())?;
            if seesaw_value(&rho, d, restarts, 11)? > classical + 1e-4 {
                threshold = Some(alpha);
                break;
            }
        }
        let threshold = threshold.ok_or_else(|| format!("d={d}: no detection on the grid"))?;
        let expected = (d as f64 - 1.0) / d as f64;
        ensure((threshold - expected).abs() <= 0.05, || format!("d={d}: threshold {threshold:.2}, expected {expected:.3}"))?;
        let top = seesaw_value(&werner(d, 1.0).map_err(|e| e.to_string())?, d, restarts, 11)?;
        ensure(top > classical + 1e-4, || format!("d={d}: p_suc(alpha=1) = {top:.6}"))?;
        details.push(format!("d={d}: threshold {threshold:.2} (expected {expected:.3}), p_suc(1) = {top:.6}"));
    }
    details.push(format!("{:.1?}", start.elapsed()));
    Ok(details.join("; "))
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_purity = 0.0f64;
    for (d, n) in [(2, 3), (2, 4), (2, 8), (3, 8), (3, 9)] {
        let fam = vn_weyl_preparations(d, n).map_err(|e| e.to_string())?;
        let povms = vn_helstrom_povms(&fam).map_err(|e| e.to_string())?;
        let v = behavior(&fam, &povms).and_then(|b| v_n(&b)).map_err(|e| e.to_string())?;
        let nf = n as f64;
        let m = (d * d).min(n) as f64;
        let target = nf * nf / 2.0 * (1.0 - 1.0 / m);
        worst = worst.max((v - target).abs());
        ensure((v - target).abs() <= 1e-8, || format!("(d={d}, N={n}): V_N={v}, bound {target}"))?;
        let purity = omega_purity(&fam).map_err(|e| e.to_string())?;
        let formula = weyl_group_purity_formula(d, n);
        worst_purity = worst_purity.max((purity - formula).abs());
        ensure((purity - formula).abs() <= 1e-12, || format!("(d={d}, N={n}): tr(Omega^2)={purity}, formula {formula}"))?;
    }
    Ok(format!("max V_N error {worst:.2e}, max purity error {worst_purity:.2e}"))
}

fn solution_quality(sol: &SdpSolution) -> Result<(), String> {
    let dual_residual = sol.log.last().map_or(0.0, |r| r.dual_residual);
    ensure(sol.gap <= 1e-7, || format!("relative gap {:.3e}", sol.gap))?;
    ensure(sol.primal_residual <= 1e-8, || format!("primal residual {:.3e}", sol.primal_residual))?;
    ensure(dual_residual <= 1e-8, || format!("dual residual {dual_residual:.3e}"))?;
    ensure(sol.min_eigenvalue >= -1e-8, || format!("primal min eigenvalue {:.3e}", sol.min_eigenvalue))
}

fn criterion_7() -> Outcome {
    let policy = NumericPolicy::default();
    let mut rng = rng_for(2024, 7);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let dim = 2 + i % 3;
        let a = random_unit_vector(dim, &mut rng);
        let b = random_unit_vector(dim, &mut rng);
        let to_state = |v: Vec<C64>| {
            DensityOperator::new(ComplexMatrix::projector(&v), 1, dim, &policy).map_err(|e| e.to_string())
        };
        let overlap = vec_inner(&a, &b).norm_sqr();
        let expected = 0.5 * (1.0 + (1.0 - overlap).max(0.0).sqrt());
        let opt = optimize_povm(&[to_state(a)?, to_state(b)?], &SdpOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max((opt.p_suc - expected).abs());
        ensure((opt.p_suc - expected).abs() <= 1e-7, || format!("pair {i}: {} vs {expected}", opt.p_suc))?;
        solution_quality(&opt.solution).map_err(|e| format!("pair {i}: {e}"))?;
    }
    Ok(format!("50 pairs, max deviation from (1+D)/2 {worst:.2e}"))
}

/// `tr[((Λ⊗id)ρ) M]` with `Λ` applied block by block through `apply_choi`.
fn resimulate(choi: &sdc_core::sdpsolve::ChoiOperator, shared: &DensityOperator, effect: &ComplexMatrix) -> Result<f64, String> {
    let (da, db) = shared.dims();
    let rho = shared.matrix();
    let mut out = ComplexMatrix::zeros(da * db, da * db);
    for b in 0..db {
        for bp in 0..db {
            let block = ComplexMatrix::from_fn(da, da, |a, ap| rho[(a * db + b, ap * db + bp)]);
            let mapped = apply_choi(choi, &block).map_err(|e| e.to_string())?;
            for c in 0..da {
                for cp in 0..da {
                    out[(c * db + b, cp * db + bp)] = mapped[(c, cp)];
                }
            }
        }
    }
    Ok(out.inner_re(effect))
}

fn criterion_8() -> Outcome {
    let policy = NumericPolicy::default();
    let mut rng = rng_for(2024, 8);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let shared = DensityOperator::new(random_density_matrix(4, &mut rng), 2, 2, &policy).map_err(|e| e.to_string())?;
        let povm = Povm::repaired(&random_povm_effects(4, 4, &mut rng).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let opt = optimize_preparations(&shared, &povm, &SdpOptions::default()).map_err(|e| e.to_string())?;
        let mut total = 0.0;
        for (choi, effect) in opt.chois.iter().zip(povm.effects()) {
            total += resimulate(choi, &shared, effect)?;
        }
        let total = total / povm.len() as f64;
        worst = worst.max((total - opt.p_suc).abs());
        ensure((total - opt.p_suc).abs() <= 1e-8, || format!("instance {i}: objective {} vs re-simulated {total}", opt.p_suc))?;
        for sol in &opt.solutions {
            solution_quality(sol).map_err(|e| format!("instance {i}: {e}"))?;
        }
    }
    Ok(format!("50 instances, max |objective - re-simulation| {worst:.2e}"))
}

fn criterion_9() -> Outcome {
    let tol = SelftestTolerances::default();
    let policy = NumericPolicy::default();
    for d in 2..=3 {
        let (fam, povm) = canonical_sdc_protocol(d, d, d).map_err(|e| e.to_string())?;
        let v = selftest_check(&fam, &povm, &tol).map_err(|e| e.to_string())?;
        ensure(v.maximally_entangled_selftest, || format!("d={d}: canonical protocol rejected"))?;
    }

    let eps: f64 = 1e-2;
    let amps = vec![C64::new((0.5 + eps).sqrt(), 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new((0.5 - eps).sqrt(), 0.0)];
    let tilted = PureState::new(amps, 2, 2, &policy).map_err(|e| e.to_string())?.to_density();
    let (_, povm2) = canonical_sdc_protocol(2, 2, 2).map_err(|e| e.to_string())?;
    let fam = PreparationFamily::weyl(tilted, 2).map_err(|e| e.to_string())?;
    let p = simulate(&fam, &povm2)?;
    ensure(p < 1.0 - 1e-4, || format!("tilted spectrum: p_suc={p}"))?;
    let mut rejected = 0;
    let mut check_rejects = |name: &str, fam: &PreparationFamily, povm: &Povm| -> Result<(), String> {
        let v = selftest_check(fam, povm, &tol).map_err(|e| e.to_string())?;
        ensure(!v.maximally_entangled_selftest, || format!("{name}: perturbation accepted"))?;
        rejected += 1;
        Ok(())
    };
    check_rejects("tilted spectrum", &fam, &povm2)?;

    let (_, povm3) = canonical_sdc_protocol(3, 3, 3).map_err(|e| e.to_string())?;
    let tilted3 = PureState::normalized(
        (0..9)
            .map(|i| match i {
                0 => C64::new((1.0 / 3.0 + eps).sqrt(), 0.0),
                4 => C64::new((1.0f64 / 3.0).sqrt(), 0.0),
                8 => C64::new((1.0 / 3.0 - eps).sqrt(), 0.0),
                _ => C64::new(0.0, 0.0),
            })
            .collect(),
        3,
        3,
    )
    .map_err(|e| e.to_string())?;
    let fam3 = PreparationFamily::weyl(tilted3.to_density(), 3).map_err(|e| e.to_string())?;
    check_rejects("tilted spectrum d=3", &fam3, &povm3)?;

    for d in 2..=3 {
        let (fam, povm, _) = build_zeta_protocol(&isotropic(d, 0.99).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check_rejects("isotropic 0.99", &fam, &povm)?;

        let (fam, povm) = canonical_sdc_protocol(d, d, d).map_err(|e| e.to_string())?;
        let n = povm.len();
        let noisy: Vec<ComplexMatrix> = povm
            .effects()
            .iter()
            .map(|m| &m.scale(1.0 - eps) + &ComplexMatrix::identity(d * d).scale(eps / n as f64))
            .collect();
        let noisy = Povm::new(noisy, &policy).map_err(|e| e.to_string())?;
        check_rejects("noisy measurement", &fam, &noisy)?;

        let mut encodings = fam.encodings().to_vec();
        encodings[1] = encodings[0].clone();
        let repeated = PreparationFamily::new(fam.shared().clone(), encodings, &policy).map_err(|e| e.to_string())?;
        check_rejects("repeated encoding", &repeated, &povm)?;

        let shared = max_entangled(d).map_err(|e| e.to_string())?.to_density();
        let mut rng = rng_for(2024, 9 + d as u64);
        let u = haar_unitary(d * d, &mut rng).map_err(|e| e.to_string())?;
        let rotated = shared.conjugate(&u).map_err(|e| e.to_string())?;
        let fam = PreparationFamily::weyl(rotated, d).map_err(|e| e.to_string())?;
        check_rejects("globally rotated state", &fam, &povm)?;
    }
    Ok(format!("canonical d=2,3 accepted; {rejected} perturbations rejected; tilted p_suc = {p:.8}"))
}

fn criterion_10() -> Outcome {
    let c = comparison_constants(2).map_err(|e| e.to_string())?;
    ensure(c.sdc_isotropic == 1.0 / 3.0, || format!("sdc isotropic {}", c.sdc_isotropic))?;
    ensure(c.steering_isotropic == 0.5, || format!("steering isotropic {}", c.steering_isotropic))?;
    ensure(c.steering_werner == 2.0 / 3.0, || format!("steering Werner {}", c.steering_werner))?;
    Ok(format!(
        "d=2: sdc {} steering {} Werner steering {} Werner observed {}",
        c.sdc_isotropic, c.steering_isotropic, c.steering_werner, c.werner_sdc_observed
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("perfect superdense coding", criterion_1),
        ("bound tightness and random protocols", criterion_2),
        ("classical optimum by enumeration", criterion_3),
        ("isotropic benchmark", criterion_4),
        ("Werner threshold", criterion_5),
        ("V_N saturation and purity", criterion_6),
        ("measurement SDP against Helstrom", criterion_7),
        ("preparation SDP against apply_choi", criterion_8),
        ("self-test verdicts", criterion_9),
        ("comparison constants", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.2?}]", i + 1, start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{:.2?}]", i + 1, start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
