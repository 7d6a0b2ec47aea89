//! Acceptance run: one PASS/FAIL line per criterion, with its runtime budget.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use matchmaking::charfn::CharacteristicFunction;
use matchmaking::experiment::{run_experiment_compare, ExperimentConfig};
use matchmaking::hardness::{
    build_hard_instance, marginal_growth_table, power3_sums, witness_marginals, GrowthMode,
};
use matchmaking::harsanyi::{harsanyi_dividends, reconstruct_nu, NuTable};
use matchmaking::instance::worked_example;
use matchmaking::rsyp::{hoeffding_sample_size, rsyp_phi};
use matchmaking::shapley::{shapley_additive_closed_form, shapley_subset};
use matchmaking::{
    exact_shapley, run_icasm, AuctionInstance, CoalitionMask, Money, PaymentRule, Rational,
    RstGame, ShapleyMethod, TableGame, ValuationMode,
};

use common::{oracle_shapley, random_instance, size_for};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn m(s: &str) -> Money {
    s.parse().unwrap()
}

fn worked_auction() -> Outcome {
    let inst = worked_example();
    let out = run_icasm(&inst, PaymentRule::FirstConflict).map_err(|e| e.to_string())?;
    check(out.winner_set() == vec![0, 1], || {
        format!("winners {:?}", out.winner_set())
    })?;
    check(
        out.payment_of(0) == m("8") && out.payment_of(1) == m("8"),
        || format!("payments {} {}", out.payment_of(0), out.payment_of(1)),
    )?;
    check(out.revenue == m("16"), || {
        format!("revenue {}", out.revenue)
    })?;
    Ok("winners {s0, s1}, payments (8, 8), revenue 16".into())
}

fn worked_gamma() -> Outcome {
    let inst = worked_example();
    let rule = PaymentRule::FirstConflict;
    let game = RstGame::new(&inst, rule).map_err(|e| e.to_string())?;
    let phi = shapley_subset(&game).map_err(|e| e.to_string())?;
    let res = exact_shapley(&inst, ShapleyMethod::Subset, rule).map_err(|e| e.to_string())?;
    let gamma = res.gamma.ok_or("gamma undefined")?;
    let expected: Vec<Money> = ["1/6", "1/3", "1/6", "1/3"].iter().map(|s| m(s)).collect();
    check(gamma == expected, || format!("gamma {gamma:?}"))?;
    check(res.phi == phi, || "entry points disagree".into())?;
    let oracle = oracle_shapley(&inst, rule);
    for (a, b) in phi.iter().zip(&oracle) {
        check((a.to_f64() - b).abs() < 1e-9, || {
            format!("oracle {oracle:?} vs {phi:?}")
        })?;
    }
    // Neither rule reproduces the 0.154 / 0.346 split.
    let strict = exact_shapley(&inst, ShapleyMethod::Subset, PaymentRule::Strict)
        .map_err(|e| e.to_string())?;
    check(strict.gamma.is_none(), || {
        "strict gamma unexpectedly defined".into()
    })?;
    Ok("gamma = (1/6, 1/3, 1/6, 1/3), oracle agrees; strict gives sum phi = 0".into())
}

fn additive_closed_form() -> Outcome {
    for i in 0..200u64 {
        let n = size_for(i, 1, 6);
        let mm = size_for(i, 2, 6);
        let inst = random_instance(ValuationMode::Additive, n, mm, 3, i);
        let closed = shapley_additive_closed_form(&inst).map_err(|e| e.to_string())?;
        let brute = exact_shapley(&inst, ShapleyMethod::Permutation, PaymentRule::Strict)
            .map_err(|e| e.to_string())?;
        check(closed.phi == brute.phi, || {
            format!("instance {i}: {:?} vs {:?}", closed.phi, brute.phi)
        })?;
    }
    Ok("200 additive instances, closed form = permutation average".into())
}

fn triple_equality() -> Outcome {
    let mut count = 0;
    for i in 0..300u64 {
        let n = size_for(i, 3, 7);
        let mm = size_for(i, 4, 7);
        let inst = random_instance(ValuationMode::SingleMinded, n, mm, 4, i);
        for rule in PaymentRule::ALL {
            let phis: Vec<Vec<Money>> = [
                ShapleyMethod::Subset,
                ShapleyMethod::Permutation,
                ShapleyMethod::Dividends,
            ]
            .into_iter()
            .map(|method| exact_shapley(&inst, method, rule).map(|r| r.phi))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
            check(phis[0] == phis[1] && phis[1] == phis[2], || {
                format!("instance {i} {rule}: {phis:?}")
            })?;
            count += 1;
        }
    }
    Ok(format!(
        "{count} (instance, rule) pairs, subset = permutation = dividends"
    ))
}

fn axioms() -> Outcome {
    let scale = Rational::new(7.into(), 3.into());
    let mut idle_checks = 0;
    for i in 0..500u64 {
        let n = size_for(i, 5, 6);
        let mm = size_for(i, 6, 6);
        let rule = PaymentRule::ALL[i as usize % 2];
        let inst = random_instance(ValuationMode::SingleMinded, n, mm, 5, i);
        let res = exact_shapley(&inst, ShapleyMethod::Subset, rule).map_err(|e| e.to_string())?;
        let total: Money = res.phi.iter().sum();
        check(total == res.nu_grand, || {
            format!("efficiency, instance {i}")
        })?;

        let perm: Vec<usize> = (0..n).map(|j| (j + 1 + i as usize) % n).collect();
        let moved = exact_shapley(&inst.relabeled(&perm), ShapleyMethod::Subset, rule)
            .map_err(|e| e.to_string())?;
        check((0..n).all(|j| moved.phi[perm[j]] == res.phi[j]), || {
            format!("symmetry, instance {i}")
        })?;

        // One extra transaction nobody bids on.
        let wider = AuctionInstance {
            n: n + 1,
            ..inst.clone()
        };
        let wide = exact_shapley(&wider, ShapleyMethod::Subset, rule).map_err(|e| e.to_string())?;
        check(
            wide.phi[n].is_zero() && wide.phi[..n] == res.phi[..],
            || format!("null player, instance {i}"),
        )?;
        for j in 0..n {
            if matchmaking::instance::is_idle_transaction(&inst, j) {
                check(res.phi[j].is_zero(), || {
                    format!("idle transaction {j}, instance {i}")
                })?;
                idle_checks += 1;
            }
        }

        let scaled = exact_shapley(&inst.scaled(&scale), ShapleyMethod::Subset, rule)
            .map_err(|e| e.to_string())?;
        check(
            scaled
                .phi
                .iter()
                .zip(&res.phi)
                .all(|(a, b)| *a == b.scale(&scale)),
            || format!("scaling covariance, instance {i}"),
        )?;
        check(scaled.gamma == res.gamma, || {
            format!("gamma invariance, instance {i}")
        })?;
    }
    Ok(format!(
        "500 instances: efficiency, symmetry, null player (+{idle_checks} idle), scaling"
    ))
}

fn rsyp_accuracy() -> Outcome {
    let mut parts = Vec::new();
    for rule in PaymentRule::ALL {
        let cfg = ExperimentConfig {
            rule,
            ..Default::default()
        };
        let report = run_experiment_compare(&cfg, None).map_err(|e| e.to_string())?;
        let s = &report.summary;
        check(s.mean_abs_err <= 0.02 && s.max_abs_err <= 0.15, || {
            format!(
                "{rule}: mean {:.4} max {:.4}",
                s.mean_abs_err, s.max_abs_err
            )
        })?;
        parts.push(format!(
            "{rule}: mean {:.4} max {:.4} ({} skipped)",
            s.mean_abs_err, s.max_abs_err, s.skipped
        ));
    }
    let cfg = ExperimentConfig {
        instance_count: 50,
        exhaustive: true,
        ..Default::default()
    };
    let report = run_experiment_compare(&cfg, None).map_err(|e| e.to_string())?;
    check(report.rows.iter().all(|r| r.abs_err == 0.0), || {
        "exhaustive error non-zero".into()
    })?;
    parts.push("exhaustive error 0".into());
    Ok(format!("k = 900; {}", parts.join("; ")))
}

fn hoeffding() -> Outcome {
    let k0 = hoeffding_sample_size(100.0, 1.0, 0.95).map_err(|e| e.to_string())?;
    check(k0 == 59915, || format!("(100, 1, 0.95) -> {k0}"))?;

    let inst = AuctionInstance::single_minded(
        5,
        [
            (vec![0, 1], 9),
            (vec![1, 2], 7),
            (vec![2, 3, 4], 8),
            (vec![0, 4], 5),
            (vec![3], 4),
        ]
        .map(|(b, x)| (b, Rational::from_integer(x.into()))),
    )
    .map_err(|e| e.to_string())?;
    let rule = PaymentRule::FirstConflict;
    let game = RstGame::new(&inst, rule).map_err(|e| e.to_string())?;
    let table = game.value_table().map_err(|e| e.to_string())?;
    // Revenue never exceeds the sum of bids, which bounds every marginal.
    let r_star = Money::from_rational(inst.total_bids()).to_f64();
    let (t, delta) = (3.0, 0.9);
    let k = hoeffding_sample_size(r_star, t, delta).map_err(|e| e.to_string())?;
    let phi: Vec<f64> = shapley_subset(&game)
        .map_err(|e| e.to_string())?
        .iter()
        .map(Money::to_f64)
        .collect();
    // Sampling against a precomputed table keeps 2000 runs cheap.
    let table_game = TableGame::new(5, table).map_err(|e| e.to_string())?;
    let seeds = 2000u64;
    let mut violations = [0u64; 5];
    for seed in 0..seeds {
        let est = rsyp_phi(&table_game, k, seed).map_err(|e| e.to_string())?;
        for j in 0..5 {
            if est[j].to_f64() - phi[j] >= t {
                violations[j] += 1;
            }
        }
    }
    let worst = violations
        .iter()
        .map(|&v| v as f64 / seeds as f64)
        .fold(0.0, f64::max);
    check(worst <= 1.0 - delta, || {
        format!("violation rate {worst} > {}", 1.0 - delta)
    })?;
    Ok(format!(
        "59915; R* = {r_star}, k = {k}, worst violation rate {worst:.4} <= 0.1"
    ))
}

fn marginal_growth() -> Outcome {
    let mut parts = Vec::new();
    for rule in PaymentRule::ALL {
        let rows = marginal_growth_table(&[4, 9, 16], GrowthMode::Full, rule)
            .map_err(|e| e.to_string())?;
        let counts: Vec<usize> = rows.iter().map(|r| r.unique_count).collect();
        check(
            rows.iter().all(|r| r.unique_count as u64 >= r.floor),
            || format!("full {rule}: counts {counts:?} below floors (3, 7, 15)"),
        )?;
        parts.push(format!("full {rule} {counts:?}"));
    }
    let t = Instant::now();
    let mut exact = Vec::new();
    for n in [4, 9, 16, 25, 100] {
        let h = build_hard_instance(n).map_err(|e| e.to_string())?;
        let rep = witness_marginals(&h, PaymentRule::FirstConflict).map_err(|e| e.to_string())?;
        let floor = (1usize << h.sqrt_n) - 1;
        check(rep.distinct_count == floor && rep.closed_form_holds, || {
            format!(
                "targeted n = {n}: {} distinct, floor {floor}",
                rep.distinct_count
            )
        })?;
        exact.push(rep.distinct_count);
    }
    let targeted = t.elapsed();
    check(targeted < Duration::from_secs(10), || {
        format!("targeted took {targeted:?}")
    })?;
    parts.push(format!(
        "targeted first_conflict {exact:?} in {targeted:.2?}"
    ));
    Ok(parts.join("; "))
}

fn power3() -> Outcome {
    for n in 0..=10 {
        let rep = power3_sums(n).map_err(|e| e.to_string())?;
        check(rep.distinct && rep.count == 3usize.pow(n as u32), || {
            format!("n = {n}: {rep:?}")
        })?;
    }
    Ok("3^n distinct sums for n = 0..=10".into())
}

fn harsanyi_round_trip() -> Outcome {
    for i in 0..100u64 {
        let n = size_for(i, 7, 7);
        let mm = size_for(i, 8, 7);
        let inst = random_instance(ValuationMode::SingleMinded, n, mm, 10, i);
        let game =
            RstGame::new(&inst, PaymentRule::ALL[i as usize % 2]).map_err(|e| e.to_string())?;
        let table = NuTable::from_game(&game).map_err(|e| e.to_string())?;
        let div = harsanyi_dividends(&table).map_err(|e| e.to_string())?;
        for bits in 0u64..1 << n {
            let mask = CoalitionMask::from_bits(n, bits);
            check(reconstruct_nu(&div, &mask) == *table.get(&mask), || {
                format!("instance {i}, coalition {mask:?}")
            })?;
        }
    }
    Ok("100 instances, every coalition reconstructed exactly".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "worked example auction",
            Duration::from_millis(1),
            worked_auction,
        ),
        (
            "worked example gamma",
            Duration::from_millis(10),
            worked_gamma,
        ),
        (
            "additive closed form",
            Duration::from_secs(5),
            additive_closed_form,
        ),
        (
            "method triple equality",
            Duration::from_secs(60),
            triple_equality,
        ),
        ("axiom suite", Duration::from_secs(60), axioms),
        ("rsyp accuracy", Duration::from_secs(300), rsyp_accuracy),
        ("hoeffding calculator", Duration::from_secs(120), hoeffding),
        ("marginal growth", Duration::from_secs(300), marginal_growth),
        ("power-of-three sums", Duration::from_secs(10), power3),
        (
            "harsanyi round trip",
            Duration::from_secs(30),
            harsanyi_round_trip,
        ),
    ];
    let mut failed = 0;
    for (idx, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let verdict = match result {
            Ok(detail) if took <= budget => Ok(detail),
            Ok(detail) => Err(format!("{detail}; over budget {budget:?}")),
            Err(e) => Err(e),
        };
        match verdict {
            Ok(detail) => println!("PASS {:>2} {name} [{took:.2?}] {detail}", idx + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{took:.2?}] {detail}", idx + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
