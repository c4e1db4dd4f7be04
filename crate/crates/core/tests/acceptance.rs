//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `--nocapture --test-threads=1` for ordered output.

use contractlab::manipulation::{
    is_manipulation_proof, monotone_envelope, slope_diagnostic, solve_manipulation,
};
use contractlab::model::{
    ConditionalDistribution, EffortGrid, FeasibilityMode, ManipulationTech, Objective, ProfitGrid,
    Scenario, Utility, PAYOFF_TOL,
};
use contractlab::optimizer::{
    brute_force_oracle, evaluate_contract, fit_generalized_debt, optimize_financier, ContractFamily,
};
use contractlab::orders::{check_fosd, check_mlrp};
use contractlab::report::to_csv;
use contractlab::sweeps::{
    crossover_qstar, default_gamma_grid, default_q_grid, run_crossover_sweep, run_steepness_sweep,
    table2_rows,
};
use contractlab::templates::{crossover_template, steepness_scenario};
use contractlab::verify::random_contract;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn within(elapsed: Duration, budget_s: u64) -> bool {
    elapsed <= Duration::from_secs(budget_s)
}

// ---------------------------------------------------------------------------
// shared generators
// ---------------------------------------------------------------------------

fn random_rows(rng: &mut ChaCha8Rng, efforts: usize, n: usize, grid: &ProfitGrid) -> Vec<Vec<f64>> {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..efforts)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect()
            })
            .collect();
        let mean =
            |row: &Vec<f64>| -> f64 { row.iter().zip(&grid.points).map(|(p, x)| p * x).sum() };
        rows.sort_by(|a, b| mean(a).partial_cmp(&mean(b)).unwrap());
        if rows.windows(2).all(|w| mean(&w[1]) - mean(&w[0]) > 1e-3) {
            return rows;
        }
    }
}

/// Random three-state instance on an integer grid. When `commensurate`
/// the maximal profit divides the lattice so value-function replacements
/// stay on the payoff lattice at a zero interest rate.
fn random_scenario3(rng: &mut ChaCha8Rng, rate: f64, commensurate: bool) -> Scenario {
    let points = if commensurate {
        [
            vec![0.0, 1.0, 2.0],
            vec![0.0, 2.0, 4.0],
            vec![0.0, 1.0, 4.0],
            vec![0.0, 3.0, 4.0],
        ][rng.random_range(0..4)]
        .clone()
    } else {
        let a = rng.random_range(1..=2) as f64;
        let b = a + rng.random_range(1..=2) as f64;
        vec![0.0, a, b]
    };
    let grid = ProfitGrid::new(points).unwrap();
    let rows = random_rows(rng, 2, 3, &grid);
    let utility = if rng.random_bool(0.5) {
        Utility::RiskNeutral
    } else {
        Utility::Crra { rho: 0.5 }
    };
    Scenario {
        effort: EffortGrid {
            levels: vec![0.0, 1.0],
            costs: vec![0.0, rng.random_range(0.05..0.4)],
        },
        dist: ConditionalDistribution::new(rows),
        tech: ManipulationTech::Linear { rate },
        utility,
        capital: rng.random_range(0.0..0.3),
        market_rate: rate,
        outside_utility: rng.random_range(0.0..0.3),
        feasibility_mode: FeasibilityMode::PayBoundM,
        objective: Objective::Financier,
        grid,
    }
}

fn random_wide_scenario(rng: &mut ChaCha8Rng, tech: ManipulationTech) -> Scenario {
    let n = rng.random_range(3..=5usize);
    let mut points = vec![0.0];
    for _ in 1..n {
        points.push(points.last().unwrap() + rng.random_range(1..=2) as f64);
    }
    let grid = ProfitGrid::new(points).unwrap();
    let rows = random_rows(rng, 2, n, &grid);
    Scenario {
        effort: EffortGrid {
            levels: vec![0.0, 1.0],
            costs: vec![0.0, rng.random_range(0.05..0.4)],
        },
        dist: ConditionalDistribution::new(rows),
        tech,
        utility: Utility::RiskNeutral,
        capital: 0.1,
        market_rate: 0.0,
        outside_utility: 0.0,
        feasibility_mode: FeasibilityMode::PayBoundM,
        objective: Objective::Financier,
        grid,
    }
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_order_checks_on_the_input_tables() {
    let start = Instant::now();
    let table1 = ConditionalDistribution::new(vec![
        vec![0.5, 0.49995, 0.00005],
        vec![0.5, 0.00005, 0.49995],
    ]);
    let mut ok =
        check_fosd(&table1, 0, 1).unwrap().holds && !check_mlrp(&table1, 0, 1).unwrap().holds;
    for q in [0.05, 0.1, 0.4] {
        let d = ConditionalDistribution::new(table2_rows(q));
        ok &= check_fosd(&d, 0, 1).unwrap().holds;
        ok &= !check_mlrp(&d, 0, 1).unwrap().holds;
    }
    let elapsed = start.elapsed();
    ok &= within(elapsed, 1);
    report(
        "1 (table order checks)",
        ok,
        &format!("elapsed {elapsed:?}"),
    );
}

#[test]
fn criterion_2_value_function_monotonicity_and_dominance() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let techs = [
        ManipulationTech::Linear { rate: 0.0 },
        ManipulationTech::Linear { rate: 0.05 },
        ManipulationTech::Linear { rate: 0.2 },
        ManipulationTech::ConvexPower { gamma: 0.3 },
        ManipulationTech::ConvexPower { gamma: 2.0 },
    ];
    let scenarios: Vec<Scenario> = (0..20)
        .map(|i| random_wide_scenario(&mut rng, techs[i % techs.len()].clone()))
        .collect();
    let mut failures = 0usize;
    for t in 0..10_000 {
        let s = &scenarios[t % scenarios.len()];
        let tech = &techs[t % techs.len()];
        let contract = random_contract(&mut rng, s);
        let (_, value) = solve_manipulation(&contract, tech, &s.grid);
        let monotone = value.v.windows(2).all(|w| w[1] >= w[0] - PAYOFF_TOL);
        let dominates = value
            .v
            .iter()
            .zip(&contract.y)
            .all(|(v, y)| *v >= y - PAYOFF_TOL);
        if !(monotone && dominates) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        "2 (value-function monotonicity, 10000 contracts)",
        failures == 0 && within(elapsed, 30),
        &format!("failures {failures}, elapsed {elapsed:?}"),
    );
}

#[test]
fn criterion_3_slope_bound_and_lattice_optima() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let rates = [0.0, 0.05, 0.2];

    // (a) slope bound over 1000 random contracts
    let mut slope_failures = 0usize;
    for t in 0..1000 {
        let rate = rates[t % rates.len()];
        let s = random_wide_scenario(&mut rng, ManipulationTech::Linear { rate });
        let contract = random_contract(&mut rng, &s);
        let (_, value) = solve_manipulation(&contract, &s.tech, &s.grid);
        if slope_diagnostic(&value.v, &s.grid) > 1.0 + rate + PAYOFF_TOL {
            slope_failures += 1;
        }
    }

    // (b) brute-force optima on three-state lattices are truthful,
    // non-decreasing and slope-bounded
    let mut oracle_failures = 0usize;
    let mut solved = 0usize;
    for t in 0..18 {
        let rate = rates[t % rates.len()];
        let s = random_scenario3(&mut rng, rate, rate == 0.0);
        let levels = [21, 41][t % 2];
        match brute_force_oracle(&s, levels) {
            Err(_) => {}
            Ok(opt) => {
                solved += 1;
                let (mp, _) = is_manipulation_proof(&opt.contract, &s.tech, &s.grid);
                let monotone = opt.contract.y.windows(2).all(|w| w[1] >= w[0] - PAYOFF_TOL);
                let slope = slope_diagnostic(&opt.contract.y, &s.grid);
                if !(mp && monotone && slope >= -PAYOFF_TOL && slope <= 1.0 + rate + PAYOFF_TOL) {
                    oracle_failures += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        "3 (slope bound and truthful lattice optima)",
        slope_failures == 0 && oracle_failures == 0 && solved >= 15 && within(elapsed, 300),
        &format!(
            "slope failures {slope_failures}, oracle failures {oracle_failures}, solved {solved}, elapsed {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_4_envelope_replacement() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let techs = [
        ManipulationTech::Linear { rate: 0.0 },
        ManipulationTech::Linear { rate: 0.2 },
        ManipulationTech::ConvexPower { gamma: 0.5 },
        ManipulationTech::ConvexPower { gamma: 3.0 },
    ];
    let mut failures = 0usize;
    for t in 0..1000 {
        let s = random_wide_scenario(&mut rng, techs[t % techs.len()].clone());
        let contract = random_contract(&mut rng, &s);
        let base = evaluate_contract(&contract, &s);
        let env = evaluate_contract(&monotone_envelope(&contract), &s);
        let same_value = base
            .value_fn
            .v
            .iter()
            .zip(&env.value_fn.v)
            .all(|(a, b)| (a - b).abs() <= PAYOFF_TOL);
        let same_effort = base.effort_index == env.effort_index;
        let weakly_up = env.principal_payoff >= base.principal_payoff - PAYOFF_TOL;
        let burn_mass: f64 = base
            .plan
            .z
            .iter()
            .zip(&s.dist.rows[base.effort_index])
            .filter(|(&z, _)| z < -PAYOFF_TOL)
            .map(|(_, &p)| p)
            .sum();
        let strict_ok =
            burn_mass <= PAYOFF_TOL || env.principal_payoff > base.principal_payoff + PAYOFF_TOL;
        if !(same_value && same_effort && weakly_up && strict_ok) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        "4 (monotone-envelope replacement)",
        failures == 0 && within(elapsed, 60),
        &format!("failures {failures}, elapsed {elapsed:?}"),
    );
}

#[test]
fn criterion_5_crossover_in_q() {
    let start = Instant::now();
    let template = crossover_template();
    let qs = default_q_grid();
    let rows = run_crossover_sweep(&template, &qs).expect("sweep runs");
    let rows_again = run_crossover_sweep(&template, &qs).expect("sweep runs");
    let reproducible = to_csv(&rows) == to_csv(&rows_again);

    let qstar = crossover_qstar(&rows);
    let pattern = match qstar {
        None => false,
        Some(qstar) => {
            let below_all_dominant = rows
                .iter()
                .filter(|r| r.parameter <= qstar)
                .all(|r| r.gap.is_some_and(|g| g > 1e-6));
            let some_above_not = rows
                .iter()
                .filter(|r| r.parameter > qstar)
                .any(|r| !r.gap.is_some_and(|g| g > 1e-6));
            let in_range = qstar > 0.0 && qstar < 0.45;
            below_all_dominant && some_above_not && in_range
        }
    };
    let elapsed = start.elapsed();
    report(
        "5 (crossover sweep in q)",
        pattern && reproducible && within(elapsed, 60),
        &format!("qstar {qstar:?}, reproducible {reproducible}, elapsed {elapsed:?}"),
    );
}

#[test]
fn criterion_6_steepness_pipeline() {
    let start = Instant::now();
    let s = steepness_scenario();
    let bonus = ContractFamily::Bonus {
        resolution: 8,
        dprime_range: None,
    };
    let out = run_steepness_sweep(&s, &default_gamma_grid(), &bonus).expect("hypotheses hold");
    let ok = out.e_mp < out.e_second
        && out.mass_non_increasing
        && out.waste_non_increasing
        && out.final_waste < 1e-3
        && out
            .rows
            .first()
            .map(|r| r.expected_waste > 0.0)
            .unwrap_or(false)
        && out.top_gap > 0.0
        && out.domination_margin > 0.0;
    let elapsed = start.elapsed();
    report(
        "6 (steepness sweep in gamma)",
        ok && within(elapsed, 120),
        &format!(
            "e_mp {} e_2nd {} mass_noninc {} waste_noninc {} final_waste {} top_gap {} domination {} elapsed {elapsed:?}",
            out.e_mp,
            out.e_second,
            out.mass_non_increasing,
            out.waste_non_increasing,
            out.final_waste,
            out.top_gap,
            out.domination_margin
        ),
    );
}

#[test]
fn criterion_7_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    let rates = [0.0, 0.05, 0.2];
    let mut checked = 0usize;
    let mut failures = 0usize;
    for t in 0..21 {
        let rate = rates[t % rates.len()];
        let s = random_scenario3(&mut rng, rate, rate == 0.0);
        let levels = [21, 33, 41][t % 3];
        let oracle = brute_force_oracle(&s, levels);
        let family = optimize_financier(&s, &ContractFamily::FreeGrid { levels });
        match (oracle, family) {
            (Ok(a), Ok(b)) => {
                checked += 1;
                if (a.outcome.principal_payoff - b.outcome.principal_payoff).abs() > 1e-9 {
                    failures += 1;
                }
            }
            (Err(_), Err(_)) => checked += 1,
            _ => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    report(
        "7 (free-grid optimizer equals the oracle)",
        failures == 0 && checked >= 20 && within(elapsed, 300),
        &format!("checked {checked}, failures {failures}, elapsed {elapsed:?}"),
    );
}

#[test]
fn criterion_8_generalized_debt_representation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    let rates = [0.0, 0.05, 0.2];
    let mut checked = 0usize;
    let mut failures = 0usize;
    for t in 0..15 {
        let rate = rates[t % rates.len()];
        let s = random_scenario3(&mut rng, rate, rate == 0.0);
        if let Ok(opt) = optimize_financier(&s, &ContractFamily::FreeGrid { levels: 21 }) {
            checked += 1;
            let fit = fit_generalized_debt(&opt.contract, &s.grid, rate);
            let ok = fit.residual < 1e-9
                && fit.alpha_slope_max <= 1.0 + rate + PAYOFF_TOL
                && fit.alpha.iter().all(|&a| a >= -PAYOFF_TOL)
                && fit.debt >= 0.0
                && fit.wage >= 0.0;
            if !ok {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        "8 (generalized-debt fit of truthful optima)",
        failures == 0 && checked >= 10 && within(elapsed, 120),
        &format!("checked {checked}, failures {failures}, elapsed {elapsed:?}"),
    );
}
