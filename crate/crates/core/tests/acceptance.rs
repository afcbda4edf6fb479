//! Acceptance suite. Each test prints one `criterion N ...: PASS|FAIL` line
//! before asserting. Run with `--nocapture` to see them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robustmv_core::ambiguity::contains;
use robustmv_core::market::{
    covariance_from, is_positive_definite, min_pivot, risk_premium, risk_premium_gradients, sharpe_profile,
    variance_risk_ratio,
};
use robustmv_core::simulator::{
    assess_weak_principle, counterexample_f, counterexample_limit, default_probes, estimate_objective,
    remark_counterexample, simulate_optimal_exact, simulate_wealth, verify_weak_principle, ProbeSchedule,
};
use robustmv_core::solver::{
    grid_oracle, numeric_minimize, solve, solve_full_ambiguity, verify_saddle, NumericOptions,
};
use robustmv_core::strategy::{classical_strategy, classical_value, classify, robust_strategy, value_v0, TradeMode};
use robustmv_core::*;

fn verdict(n: u32, name: &str, ok: bool, detail: &str) -> bool {
    println!("criterion {n} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    ok
}

struct Instance {
    params: MarketParams,
    spec: AmbiguitySpec,
    solution: WorstCaseSolution,
}

fn anchor(spec: &AmbiguitySpec) -> (&[f64], f64) {
    match &spec.drift {
        DriftSet::Ellipsoidal { b_hat, delta } => (b_hat, *delta),
        DriftSet::Product { .. } => unreachable!("generators only build ellipsoidal sets"),
    }
}

fn market(sigmas: Vec<f64>) -> MarketParams {
    MarketParams::new(sigmas, 1.0, 1.0, 1.0).unwrap()
}

fn reference() -> (MarketParams, AmbiguitySpec) {
    let params = MarketParams::new(vec![1.0, 1.0], 1.0, 0.5, 1.0).unwrap();
    let spec = AmbiguitySpec::ellipsoidal(vec![0.4, 0.2], 0.1, GammaBox::new(vec![-0.5], vec![0.8]));
    (params, spec)
}

fn two_asset_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut out = Vec::new();
    while out.len() < 200 {
        let sigmas: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..1.5)).collect();
        let b: Vec<f64> = sigmas.iter().map(|s| s * rng.random_range(-0.6..0.6)).collect();
        let delta = rng.random_range(0.0..0.1);
        let (a, c): (f64, f64) = (rng.random_range(-0.95..0.95), rng.random_range(-0.95..0.95));
        if (a - c).abs() < 0.02 {
            continue;
        }
        let params = market(sigmas);
        let spec = AmbiguitySpec::ellipsoidal(b, delta, GammaBox::new(vec![a.min(c)], vec![a.max(c)]));
        let solution = solve(&spec, &params).unwrap();
        out.push(Instance { params, spec, solution });
    }
    out
}

/// Random boxes, kept until every case number has ten instances.
fn three_asset_instances() -> Vec<Instance> {
    const PER_CASE: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut buckets: Vec<Vec<Instance>> = (0..5).map(|_| Vec::new()).collect();
    for _ in 0..1_000_000 {
        if buckets.iter().all(|b| b.len() >= PER_CASE) {
            break;
        }
        let sigmas: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..1.5)).collect();
        let b: Vec<f64> = sigmas.iter().map(|s| s * rng.random_range(-0.6..0.6)).collect();
        let delta = rng.random_range(0.0..0.1);
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for _ in 0..3 {
            let c: f64 = rng.random_range(-0.7..0.9);
            let w: f64 = rng.random_range(0.02..0.4);
            lo.push((c - w).max(-0.99));
            hi.push((c + w).min(0.99));
        }
        let params = market(sigmas);
        let spec = AmbiguitySpec::ellipsoidal(b, delta, GammaBox::new(lo, hi));
        let Ok(solution) = solve(&spec, &params) else {
            continue;
        };
        let Some(case) = solution.case_label.three_asset_case() else {
            continue;
        };
        let bucket = &mut buckets[case as usize - 1];
        if bucket.len() < PER_CASE {
            bucket.push(Instance { params, spec, solution });
        }
    }
    let out: Vec<Instance> = buckets.into_iter().flatten().collect();
    assert_eq!(out.len(), 5 * PER_CASE, "generator did not reach every case");
    out
}

/// Strictly ordered Sharpe ratios with every proximity at most 0.9, solved
/// under full correlation ambiguity.
fn full_ambiguity_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut out = Vec::new();
    let mut k = 0;
    while out.len() < 50 {
        let d = 2 + k % 3;
        k += 1;
        let lead: f64 = rng.random_range(0.2..0.8);
        let mut mags = vec![lead];
        for _ in 1..d {
            let prev = *mags.last().unwrap();
            mags.push(rng.random_range(0.05..0.9) * prev.min(0.9 * lead));
        }
        if mags.windows(2).any(|w| w[0] - w[1] < 1e-3) {
            continue;
        }
        // shuffle ranks into input order and draw signs
        let mut slots: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            slots.swap(i, rng.random_range(0..=i));
        }
        let sigmas: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut b = vec![0.0; d];
        for (rank, &slot) in slots.iter().enumerate() {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            b[slot] = sign * mags[rank] * sigmas[slot];
        }
        let delta = rng.random_range(0.0..1.2 * lead);
        let params = market(sigmas);
        let solution = solve_full_ambiguity(&b, delta, &params).unwrap();
        let spec = AmbiguitySpec::ellipsoidal(b, delta, GammaBox::full());
        out.push(Instance { params, spec, solution });
    }
    out
}

fn wide_box(spec: &AmbiguitySpec, d: usize) -> AmbiguitySpec {
    let (b, delta) = anchor(spec);
    let m = d * (d - 1) / 2;
    AmbiguitySpec::ellipsoidal(b.to_vec(), delta, GammaBox::new(vec![-0.95; m], vec![0.95; m]))
}

#[test]
fn criterion_01_gradient_identity() {
    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    let mut points = 0;
    while points < 100 {
        let d = 2 + points % 3;
        let m = d * (d - 1) / 2;
        let rho = RhoVector((0..m).map(|_| rng.random_range(-0.6..0.6)).collect());
        if min_pivot(&rho, d).is_none_or(|p| p < 0.05) {
            continue;
        }
        let sigmas: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = market(sigmas);
        let theta = ThetaPoint::new(b, rho);
        let grad = risk_premium_gradients(&theta, &params).unwrap();
        let r = |t: &ThetaPoint| risk_premium(t, &params).unwrap();

        let mut analytic = grad.b.clone();
        analytic.extend(&grad.rho);
        let mut numeric = Vec::with_capacity(d + m);
        for i in 0..d {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up.b[i] += H;
            dn.b[i] -= H;
            numeric.push((r(&up) - r(&dn)) / (2.0 * H));
        }
        for k in 0..m {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up.rho.0[k] += H;
            dn.rho.0[k] -= H;
            numeric.push((r(&up) - r(&dn)) / (2.0 * H));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
        points += 1;
    }
    let ok = verdict(1, "gradient identity", worst < 1e-6, &format!("100 points, max relative error {worst:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_02_two_asset_closed_form_vs_oracle() {
    let mut worst = 0.0_f64;
    let (mut compared, mut mismatches) = (0, Vec::new());
    for (k, inst) in two_asset_instances().iter().enumerate() {
        let oracle = grid_oracle(&inst.spec, &inst.params, 2001).unwrap();
        worst = worst.max((inst.solution.r_star - oracle.r_star).abs());

        let (lo, hi) = (inst.spec.gamma.lower.0[0], inst.spec.gamma.upper.0[0]);
        let (b_hat, _) = anchor(&inst.spec);
        let proximity = sharpe_profile(b_hat, &inst.params).unwrap().proximity(0, 1);
        if inst.solution.no_trade || (proximity - lo).abs().min((proximity - hi).abs()) < 1e-3 {
            continue;
        }
        compared += 1;
        let at = oracle.theta_star.rho.0[0];
        let location = if at == lo {
            CaseLabel::TwoAssetLower
        } else if at == hi {
            CaseLabel::TwoAssetUpper
        } else {
            CaseLabel::TwoAssetInterior
        };
        if location != inst.solution.case_label {
            mismatches.push(k);
        }
    }
    let ok = worst <= 1e-3 && mismatches.is_empty();
    let detail = format!(
        "200 instances, max |r* - oracle| {worst:.2e}, labels compared {compared}, mismatches {mismatches:?}"
    );
    assert!(verdict(2, "two-asset closed form vs oracle", ok, &detail));
}

#[test]
fn criterion_03_three_asset_closed_form_vs_oracle() {
    let instances = three_asset_instances();
    let mut counts = [0usize; 5];
    let mut worst_gap = 0.0_f64;
    let mut worst_root = 0.0_f64;
    for inst in &instances {
        let case = inst.solution.case_label.three_asset_case().unwrap();
        counts[case as usize - 1] += 1;
        let oracle = grid_oracle(&inst.spec, &inst.params, 51).unwrap();
        worst_gap = worst_gap.max((inst.solution.r_star - oracle.r_star).abs());
        if (2..=4).contains(&case) {
            let (b_hat, _) = anchor(&inst.spec);
            let at = ThetaPoint::new(b_hat.to_vec(), inst.solution.theta_star.rho.clone());
            let kappa = variance_risk_ratio(&at, &inst.params).unwrap();
            let zeroed = inst.solution.diagnostics.zeroed_asset.expect("zeroed asset");
            worst_root = worst_root.max(kappa[zeroed].abs());
        }
    }
    let ok = counts.iter().all(|c| *c >= 5) && worst_gap <= 5e-3 && worst_root < 1e-8;
    let detail = format!(
        "per-case counts {counts:?}, max |r* - oracle| {worst_gap:.2e}, max zeroed |kappa| {worst_root:.2e}"
    );
    assert!(verdict(3, "three-asset closed form vs oracle", ok, &detail));
}

#[test]
fn criterion_04_full_ambiguity_formula() {
    let opts = NumericOptions::default();
    let mut worst = 0.0_f64;
    let mut formula = 0.0_f64;
    let mut not_pd = 0;
    for inst in &full_ambiguity_instances() {
        let d = inst.params.dim();
        let (b_hat, delta) = anchor(&inst.spec);
        let lead = sharpe_profile(b_hat, &inst.params).unwrap().ranked_beta(0).abs();
        let expected = if lead > delta { (lead - delta).powi(2) } else { 0.0 };
        formula = formula.max((inst.solution.r_star - expected).abs());
        let numeric = numeric_minimize(&wide_box(&inst.spec, d), &inst.params, &opts).unwrap();
        worst = worst.max((inst.solution.r_star - numeric.r_star).abs());
        if !is_positive_definite(&inst.solution.theta_star.rho, d) {
            not_pd += 1;
        }
    }
    let ok = worst <= 1e-4 && formula < 1e-12 && not_pd == 0;
    let detail = format!(
        "50 instances, max |r* - numeric| {worst:.2e}, max |r* - formula| {formula:.2e}, non-PD optima {not_pd}"
    );
    assert!(verdict(4, "full-ambiguity formula", ok, &detail));
}

#[test]
fn criterion_05_saddle_inequalities() {
    let mut checked = 0;
    let mut violations = Vec::new();
    let (mut upper, mut lower) = (f64::NEG_INFINITY, f64::INFINITY);
    let groups = [
        ("two-asset", two_asset_instances()),
        ("three-asset", three_asset_instances()),
        ("full", full_ambiguity_instances()),
    ];
    for (name, instances) in &groups {
        for (k, inst) in instances.iter().enumerate() {
            checked += 1;
            match verify_saddle(&inst.solution, &inst.spec, &inst.params, 1000, 500 + k as u64) {
                Ok(rep) => {
                    upper = upper.max(rep.worst_upper_margin);
                    lower = lower.min(rep.worst_lower_margin);
                }
                Err(e) => violations.push(format!("{name} #{k}: {e}")),
            }
        }
    }
    let detail = format!(
        "{checked} instances x 1000 samples, max upper margin {upper:.2e}, min lower margin {lower:.2e}, violations {}",
        violations.len()
    );
    let ok = verdict(5, "saddle inequalities", violations.is_empty(), &detail);
    assert!(ok, "{violations:?}");
}

#[test]
fn criterion_06_value_reproduction() {
    let (params, spec) = reference();
    let solution = solve(&spec, &params).unwrap();
    let v0 = value_v0(&solution, &params);
    let strategy = robust_strategy(&solution, &params).unwrap();
    let worst = ThetaProcessSchedule::constant(solution.theta_star.clone());
    let cfg = SimConfig {
        record_every: 16,
        ..SimConfig::new(100_000, 256, 42)
    };
    let euler = estimate_objective(&simulate_wealth(&strategy, &worst, &params, &cfg).unwrap(), params.lambda).unwrap();
    let exact =
        estimate_objective(&simulate_optimal_exact(&solution, &worst, &params, &cfg).unwrap(), params.lambda).unwrap();
    let combined = euler.std_error_j.hypot(exact.std_error_j);

    let formula_ok = (v0 - 1.047087).abs() < 5e-7;
    let mc_ok = (euler.j - v0).abs() <= 3.0 * euler.std_error_j;
    let agree_ok = (euler.j - exact.j).abs() <= 3.0 * combined;
    let detail = format!(
        "V0 {v0:.7}, Euler J {:.6} se {:.2e}, exact J {:.6} se {:.2e}",
        euler.j, euler.std_error_j, exact.j, exact.std_error_j
    );
    assert!(verdict(6, "value reproduction", formula_ok && mc_ok && agree_ok, &detail));
}

#[test]
fn criterion_07_weak_optimality_principle() {
    let (params, spec) = reference();
    let solution = solve(&spec, &params).unwrap();
    let (strategies, schedules) = default_probes(&solution, &spec, &params).unwrap();
    let cfg = SimConfig {
        record_every: 16,
        ..SimConfig::new(100_000, 256, 42)
    };
    let extreme = schedules
        .iter()
        .filter(|s| !["center", "worst case"].contains(&s.name.as_str()))
        .filter(|s| !s.name.starts_with("switch") && !s.name.starts_with("sample"))
        .count();
    let result = verify_weak_principle(&solution, &spec, &params, &cfg, &strategies, &schedules);
    let detail = match &result {
        Ok(rep) => {
            let mono = rep.strategies.iter().map(|s| s.monotonicity_margin).fold(f64::NEG_INFINITY, f64::max);
            let opt = rep.strategies.iter().map(|s| s.optimality_margin).fold(f64::INFINITY, f64::min);
            let sched = rep.schedules.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
            format!(
                "{} strategies, {} schedules ({extreme} extreme points), max monotonicity margin {mono:.2e}, \
                 min J(alpha, theta*) margin {opt:.2e}, min J(alpha*, theta) margin {sched:.2e}",
                rep.strategies.len(),
                rep.schedules.len()
            )
        }
        Err(e) => e.to_string(),
    };
    let ok = result.is_ok() && strategies.len() == 8 && schedules.len() == 8 && extreme >= 2;
    assert!(verdict(7, "weak optimality principle", ok, &detail));
}

#[test]
fn criterion_08_no_trade_threshold() {
    let three = {
        let params = market(vec![0.8, 1.1, 1.3]);
        let spec = AmbiguitySpec::ellipsoidal(
            vec![0.32, 0.22, -0.13],
            0.0,
            GammaBox::new(vec![-0.2, 0.1, -0.3], vec![0.4, 0.6, 0.2]),
        );
        (params, spec)
    };
    let cases = [
        reference(),
        three,
        (
            market(vec![1.0, 0.7, 1.2, 0.9]),
            AmbiguitySpec::ellipsoidal(vec![0.5, 0.21, -0.24, 0.09], 0.0, GammaBox::full()),
        ),
    ];
    let mut failures = Vec::new();
    let mut thresholds = Vec::new();
    for (params, base) in &cases {
        let (b_hat, _) = anchor(base);
        let with_radius = |delta: f64| AmbiguitySpec {
            drift: DriftSet::Ellipsoidal {
                b_hat: b_hat.to_vec(),
                delta,
            },
            gamma: base.gamma.clone(),
        };
        let n = solve(&with_radius(0.0), params).unwrap().r_star.sqrt();
        thresholds.push(n);
        let mut radii: Vec<f64> = (0..=40).map(|k| n * (0.5 + k as f64 / 40.0)).collect();
        radii.extend([n - 1e-9, n + 1e-9]);
        for delta in radii {
            // the grid passes through n itself, where rounding decides
            if (delta - n).abs() < 1e-12 {
                continue;
            }
            let sol = solve(&with_radius(delta), params).unwrap();
            if sol.no_trade != (delta > n) {
                failures.push(format!("d={} delta={delta} no_trade={}", params.dim(), sol.no_trade));
            }
            if delta > n {
                let alpha = robust_strategy(&sol, params).unwrap();
                for (t, x) in [(0.0, params.x0), (0.5, 0.3), (1.0, 4.0)] {
                    if alpha.evaluate_alpha(t, x).iter().any(|v| *v != 0.0) {
                        failures.push(format!("d={} delta={delta} alpha nonzero", params.dim()));
                    }
                }
            }
        }
    }
    let detail = format!("thresholds {thresholds:.6?}, failures {}", failures.len());
    let ok = verdict(8, "no-trade threshold", failures.is_empty(), &detail);
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_09_monotonicity_counterexample() {
    let (b_low, theta) = (0.2, 5.0);
    let params = MarketParams::new(vec![1.0], 1.0, 1.0, 1.0).unwrap();
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let table = remark_counterexample(b_low, theta, &params, &grid).unwrap();

    // limit over the interior of the grid, where the decay term has died out
    let c = 1e4;
    let limit_gap = grid
        .iter()
        .filter(|t| **t >= 0.01)
        .map(|&t| (counterexample_f(t, c, table.r_star, &params) - counterexample_limit(t, table.r_star, &params)).abs())
        .fold(0.0_f64, f64::max);
    let limit_ok = limit_gap < 1e-3 && table.limit_checks.last().is_some_and(|l| l.gap < 1e-3);

    let spec = AmbiguitySpec::product(vec![b_low], vec![theta], GammaBox::new(vec![], vec![]));
    let solution = solve(&spec, &params).unwrap();
    let (_, mut schedules) = default_probes(&solution, &spec, &params).unwrap();
    schedules.push(ProbeSchedule {
        name: "counterexample drift".into(),
        schedule: ThetaProcessSchedule::constant(ThetaPoint::new(vec![theta], RhoVector(vec![]))),
    });
    let cfg = SimConfig {
        record_every: 16,
        ..SimConfig::new(100_000, 256, 42)
    };
    let report = assess_weak_principle(&solution, &spec, &params, &cfg, &[], &schedules).unwrap();
    let min_margin = report.schedules.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    let condition_ok = report.passed && (solution.theta_star.b[0] - b_low).abs() < 1e-12;

    let detail = format!(
        "c = {:.2}, min f on [0, T] {:.4} (strictly negative: {}), limit gap at c = 1e4 {limit_gap:.2e}, \
         value condition min margin {min_margin:.2e} over {} schedules",
        table.c,
        table.min_f,
        table.has_negative,
        report.schedules.len()
    );
    let ok = table.has_negative && limit_ok && condition_ok;
    assert!(verdict(9, "monotonicity counterexample", ok, &detail));
}

#[test]
fn criterion_10_singleton_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = Vec::new();
    let mut checked = 0;
    while checked < 40 {
        let d = 1 + checked % 4;
        let m = d * (d - 1) / 2;
        let rho = RhoVector((0..m).map(|_| rng.random_range(-0.7..0.7)).collect());
        if !is_positive_definite(&rho, d) {
            continue;
        }
        let sigmas: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        let params = MarketParams::new(sigmas, rng.random_range(0.5..3.0), rng.random_range(0.2..2.0), 1.0).unwrap();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let point = ThetaPoint::new(b.clone(), rho.clone());
        let classical = classical_strategy(&point, &params).unwrap();
        let classical_v = classical_value(&point, &params).unwrap();
        let forms = [
            AmbiguitySpec::singleton(&point),
            AmbiguitySpec::ellipsoidal(b.clone(), 0.0, GammaBox::point(rho.clone())),
            AmbiguitySpec::product(b.clone(), b.clone(), GammaBox::point(rho.clone())),
        ];
        for spec in &forms {
            let sol = solve(spec, &params).unwrap();
            let robust = robust_strategy(&sol, &params).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            let same = bits(&robust.allocation_direction) == bits(&classical.allocation_direction)
                && robust.r_star.to_bits() == classical.r_star.to_bits()
                && robust.target_wealth().to_bits() == classical.target_wealth().to_bits()
                && [0.0, 0.7, 2.5].iter().all(|x| {
                    bits(&robust.evaluate_alpha(0.3, *x)) == bits(&classical.evaluate_alpha(0.3, *x))
                })
                && value_v0(&sol, &params).to_bits() == classical_v.to_bits();
            if !same {
                mismatches.push(format!("d={d} {:?}", sol.case_label));
            }
        }
        checked += 1;
    }
    let detail = format!("{checked} points x 3 set encodings, mismatches {}", mismatches.len());
    let ok = verdict(10, "singleton reduction", mismatches.is_empty(), &detail);
    assert!(ok, "{mismatches:?}");
}

#[test]
fn criterion_11_classification_conformance() {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (k, inst) in two_asset_instances().iter().enumerate() {
        if inst.solution.no_trade {
            continue;
        }
        let report = classify(&inst.solution, &inst.params).unwrap();
        let expected = match inst.solution.case_label {
            CaseLabel::TwoAssetUpper => Some(TradeMode::Directional),
            CaseLabel::TwoAssetLower => Some(TradeMode::Spread),
            _ => None,
        };
        if let Some(mode) = expected {
            checked += 1;
            if report.trade_mode != Some(mode) {
                failures.push(format!("two-asset #{k} {}: {}", inst.solution.case_label, report.summary));
            }
        }
    }
    for (k, inst) in three_asset_instances().iter().enumerate() {
        if inst.solution.no_trade {
            continue;
        }
        checked += 1;
        let (b_hat, _) = anchor(&inst.spec);
        let order = sharpe_profile(b_hat, &inst.params).unwrap().order;
        let report = classify(&inst.solution, &inst.params).unwrap();
        let kappa = variance_risk_ratio(&inst.solution.theta_star, &inst.params).unwrap();
        let ranked: Vec<f64> = order.iter().map(|&i| kappa[i]).collect();
        use CaseLabel::*;
        use DiversificationClass as C;
        let under = |rank: usize, mode| C::UnderDiversification {
            excluded_asset: order[rank] + 1,
            mode,
        };
        let ok = match inst.solution.case_label {
            ThreeAssetCase1 => report.class == C::AntiDiversification { asset: order[0] + 1 },
            ThreeAssetCase2i => report.class == under(2, TradeMode::Directional),
            ThreeAssetCase2ii => report.class == under(2, TradeMode::Spread),
            ThreeAssetCase3i => report.class == under(1, TradeMode::Directional),
            ThreeAssetCase3ii => report.class == under(1, TradeMode::Spread),
            ThreeAssetCase4i => report.class == under(0, TradeMode::Directional),
            ThreeAssetCase4ii => report.class == under(0, TradeMode::Spread),
            label => {
                let (second, third) = (ranked[0] * ranked[1] > 0.0, ranked[0] * ranked[2] > 0.0);
                let pattern = match label {
                    ThreeAssetCase5i => (true, true),
                    ThreeAssetCase5ii => (false, false),
                    ThreeAssetCase5iii => (true, false),
                    _ => (false, true),
                };
                matches!(report.class, C::WellDiversified { .. }) && (second, third) == pattern
            }
        };
        if !ok {
            failures.push(format!("three-asset #{k} {}: {}", inst.solution.case_label, report.summary));
        }
    }
    let detail = format!("{checked} trading instances checked, failures {}", failures.len());
    let ok = verdict(11, "classification conformance", failures.is_empty(), &detail);
    assert!(ok, "{failures:?}");
}

#[test]
fn reference_instance_is_in_its_own_set() {
    let (params, spec) = reference();
    let solution = solve(&spec, &params).unwrap();
    assert!(contains(&spec, &solution.theta_star, &params));
    assert!(covariance_from(&solution.theta_star.rho, &params).is_ok());
}
