//! The two headline experiments: the crossover sweep in the middle-state
//! probability `q` on the three-state template, and the steepness sweep in
//! the convexity parameter `gamma` on a likelihood-ratio-ordered scenario.
//!
//! Crossover calibration follows the three-state construction: the
//! truthful contract binds both short upward constraints, the
//! manipulation contract binds the long one, and each low-state pay level
//! is set by bisecting the financier's participation constraint to
//! equality on the targeted (highest) effort row. A calibration that
//! cannot implement its target effort, or cannot meet the constraint at
//! all, is flagged and the sweep continues; the gap then compares against
//! the entrepreneur's outside option.

use crate::model::{ConditionalDistribution, Contract, ManipulationTech, Scenario, PAYOFF_TOL};
use crate::optimizer::{
    evaluate_contract, optimize_entrepreneur, revenue_at_effort, ContractFamily, Optimum,
    SolveError,
};
use crate::orders::check_mlrp;

/// One sweep row; utilities are absent when the corresponding calibration
/// failed for that parameter value.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: f64,
    pub mp_utility: Option<f64>,
    pub manip_utility: Option<f64>,
    pub gap: Option<f64>,
    pub expected_waste: f64,
    pub middle_mass: f64,
    pub effort_mp: Option<f64>,
    pub effort_manip: Option<f64>,
}

/// Default q grid: 0.44 down to 0.0025, forty log-spaced points, reported
/// in ascending order.
pub fn default_q_grid() -> Vec<f64> {
    let (hi, lo, n) = (0.44f64, 0.0025f64, 40usize);
    let mut qs: Vec<f64> = (0..n)
        .map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64))
        .collect();
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    qs
}

/// Default steepness grid `2^0 .. 2^20`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=20).map(|k| (2.0f64).powi(k)).collect()
}

/// Upward-cost wall used to disable ex-post manipulation when computing
/// the ex-ante-only benchmark effort.
pub fn prohibitive_tech() -> ManipulationTech {
    ManipulationTech::Tabulated {
        points: vec![(1e-9, 1e12)],
    }
}

fn with_dist(s: &Scenario, rows: Vec<Vec<f64>>) -> Scenario {
    let mut out = s.clone();
    out.dist = ConditionalDistribution {
        rows,
        allow_zeros: s.dist.allow_zeros,
    };
    out
}

fn with_tech(s: &Scenario, tech: ManipulationTech) -> Scenario {
    let mut out = s.clone();
    out.tech = tech;
    out
}

/// Three-state family rows for a given middle-state probability.
pub fn table2_rows(q: f64) -> Vec<Vec<f64>> {
    vec![vec![0.1, 0.9 - q, q], vec![0.1, q, 0.9 - q]]
}

/// Probability mass of states with an upward equilibrium shift. The `+ 0.0`
/// folds a signed zero from empty sums into plain zero.
fn manipulated_mass(z: &[f64], row: &[f64]) -> f64 {
    z.iter()
        .zip(row)
        .filter(|(&z, _)| z > PAYOFF_TOL)
        .map(|(_, &p)| p)
        .sum::<f64>()
        + 0.0
}

// ---------------------------------------------------------------------------
// Crossover sweep
// ---------------------------------------------------------------------------

struct Calibrated {
    outcome: crate::optimizer::EquilibriumOutcome,
}

/// Bisects the base-pay parameter of a one-parameter contract family to
/// put the financier's revenue at the required return on the target
/// effort row, then checks that the contract actually implements the
/// target effort and stays feasible.
fn calibrate_target_effort(
    s: &Scenario,
    build: &dyn Fn(f64) -> Contract,
    p_max: f64,
    target_effort: usize,
) -> Option<Calibrated> {
    if p_max < 0.0 {
        return None;
    }
    let required = s.required_return();
    let surplus = |p: f64| revenue_at_effort(&build(p), s, target_effort) - required;
    if surplus(0.0) < -PAYOFF_TOL {
        return None;
    }
    let p_star = if surplus(p_max) >= 0.0 {
        p_max
    } else {
        let (mut lo, mut hi) = (0.0f64, p_max);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if surplus(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let contract = build(p_star);
    if !contract.is_feasible(s) {
        return None;
    }
    let outcome = evaluate_contract(&contract, s);
    if outcome.effort_index != target_effort {
        return None;
    }
    Some(Calibrated { outcome })
}

/// Runs the crossover experiment on a three-state, two-effort template.
/// For each `q` the distribution follows the template family, both
/// contract constructions are calibrated toward the highest effort, and
/// the row records their utilities and the domination gap.
pub fn run_crossover_sweep(
    template: &Scenario,
    q_values: &[f64],
) -> Result<Vec<SweepResult>, SolveError> {
    if template.grid.len() != 3 || template.effort.len() != 2 {
        return Err(SolveError::InvalidInput(
            "crossover template needs a 3-point grid and 2 efforts".into(),
        ));
    }
    if q_values.is_empty() || q_values.iter().any(|&q| !(q > 0.0 && q < 0.45)) {
        return Err(SolveError::InvalidInput(
            "q values must lie in (0, 0.45)".into(),
        ));
    }
    let x = &template.grid.points;
    let g_short_low = template.tech.cost(x[1] - x[0]);
    let g_short_high = template.tech.cost(x[2] - x[1]);
    let g_long = template.tech.cost(x[2] - x[0]);
    let m = template.grid.max_profit();
    let target = template.effort.len() - 1;

    let mut qs: Vec<f64> = q_values.to_vec();
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out = Vec::with_capacity(qs.len());
    for &q in &qs {
        let s_q = with_dist(template, table2_rows(q));
        let mp = calibrate_target_effort(
            &s_q,
            &|p| Contract::new(vec![p, p + g_short_low, p + g_short_low + g_short_high]),
            m - g_short_low - g_short_high,
            target,
        );
        let manip = calibrate_target_effort(
            &s_q,
            &|p| Contract::new(vec![p, p, p + g_long]),
            m - g_long,
            target,
        );

        let mp_utility = mp.as_ref().map(|c| c.outcome.agent_utility);
        let manip_utility = manip.as_ref().map(|c| c.outcome.agent_utility);
        let gap = manip_utility.map(|mu| mu - mp_utility.unwrap_or(template.outside_utility));
        let (waste, mass) = manip
            .as_ref()
            .map(|c| {
                let row = &s_q.dist.rows[c.outcome.effort_index];
                (
                    c.outcome.expected_waste,
                    manipulated_mass(&c.outcome.plan.z, row),
                )
            })
            .unwrap_or((0.0, 0.0));

        out.push(SweepResult {
            parameter: q,
            mp_utility,
            manip_utility,
            gap,
            expected_waste: waste,
            middle_mass: mass,
            effort_mp: mp.as_ref().map(|c| c.outcome.effort),
            effort_manip: manip.as_ref().map(|c| c.outcome.effort),
        });
    }
    Ok(out)
}

/// Largest swept `q` whose gap exceeds the domination tolerance.
pub fn crossover_qstar(rows: &[SweepResult]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.gap.is_some_and(|g| g > 1e-6))
        .map(|r| r.parameter)
        .fold(None, |acc, q| Some(acc.map_or(q, |a: f64| a.max(q))))
}

// ---------------------------------------------------------------------------
// Steepness sweep
// ---------------------------------------------------------------------------

/// Output of the steepness experiment: per-gamma rows for a bonus contract
/// frozen at the steepest technology, the truthful debt benchmark, and the
/// hypothesis/assertion summary.
#[derive(Debug, Clone)]
pub struct SteepnessOutcome {
    pub rows: Vec<SweepResult>,
    pub debt_params: Vec<f64>,
    pub bonus_params: Vec<f64>,
    /// Highest effort implementable with a truthful contract (the debt
    /// optimum's effort).
    pub e_mp: f64,
    /// Effort of the optimal bonus contract with upward manipulation
    /// disabled (the ex-ante-only benchmark).
    pub e_second: f64,
    pub mass_non_increasing: bool,
    pub waste_non_increasing: bool,
    pub final_waste: f64,
    pub top_gap: f64,
    /// Domination margin at the steepest technology:
    /// `E[Y_bonus] - E[Y_debt] - (c(e_bonus) - c(e_debt)) - E[g(z)]`.
    pub domination_margin: f64,
}

/// Verifies the likelihood-ratio and effort-gap hypotheses, freezes the
/// best bonus contract at the steepest technology, then evaluates it
/// across the whole `gamma` grid against the debt benchmark.
pub fn run_steepness_sweep(
    s: &Scenario,
    gammas: &[f64],
    bonus: &ContractFamily,
) -> Result<SteepnessOutcome, SolveError> {
    if gammas.is_empty() || gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolveError::InvalidInput(
            "gamma grid must be non-empty and increasing".into(),
        ));
    }
    if !matches!(bonus, ContractFamily::Bonus { .. }) {
        return Err(SolveError::InvalidInput(
            "steepness sweep needs a bonus family".into(),
        ));
    }
    for hi in 1..s.effort.len() {
        for lo in 0..hi {
            let report =
                check_mlrp(&s.dist, lo, hi).map_err(|e| SolveError::InvalidInput(e.to_string()))?;
            if !report.holds {
                return Err(SolveError::HypothesisFailed(format!(
                    "distribution is not likelihood-ratio ordered between efforts {lo} and {hi}"
                )));
            }
        }
    }

    // truthful benchmark: the debt optimum is manipulation-proof, so its
    // outcome does not depend on gamma
    let s_first = with_tech(s, ManipulationTech::ConvexPower { gamma: gammas[0] });
    let debt: Optimum =
        optimize_entrepreneur(&s_first, &ContractFamily::Debt { resolution: 4097 })?;
    let e_mp = debt.outcome.effort;

    // ex-ante-only benchmark over the same bonus family
    let s_walled = with_tech(s, prohibitive_tech());
    let second = optimize_entrepreneur(&s_walled, bonus)?;
    let e_second = second.outcome.effort;
    if e_mp + PAYOFF_TOL >= e_second {
        return Err(SolveError::HypothesisFailed(format!(
            "needs e_mp < e_2nd, got e_mp = {e_mp}, e_2nd = {e_second}"
        )));
    }

    // freeze the bonus member at the steepest technology
    let top_gamma = *gammas.last().expect("non-empty");
    let s_top = with_tech(s, ManipulationTech::ConvexPower { gamma: top_gamma });
    let frozen = optimize_entrepreneur(&s_top, bonus)?;

    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let s_g = with_tech(s, ManipulationTech::ConvexPower { gamma });
        let outcome = evaluate_contract(&frozen.contract, &s_g);
        let row_probs = &s_g.dist.rows[outcome.effort_index];
        let mass = manipulated_mass(&outcome.plan.z, row_probs);
        rows.push(SweepResult {
            parameter: gamma,
            mp_utility: Some(debt.outcome.agent_utility),
            manip_utility: Some(outcome.agent_utility),
            gap: Some(outcome.agent_utility - debt.outcome.agent_utility),
            expected_waste: outcome.expected_waste,
            middle_mass: mass,
            effort_mp: Some(e_mp),
            effort_manip: Some(outcome.effort),
        });
    }

    let mass_non_increasing = rows
        .windows(2)
        .all(|w| w[1].middle_mass <= w[0].middle_mass + PROB_EPS);
    let waste_non_increasing = rows
        .windows(2)
        .all(|w| w[1].expected_waste <= w[0].expected_waste + PROB_EPS);
    let final_waste = rows.last().map_or(0.0, |r| r.expected_waste);
    let top_gap = rows.last().and_then(|r| r.gap).unwrap_or(f64::NEG_INFINITY);

    let top_outcome = evaluate_contract(&frozen.contract, &s_top);
    let row = &s.dist.rows[top_outcome.effort_index];
    let mp_row = &s.dist.rows[debt.outcome.effort_index];
    let expected_pay_bonus: f64 = (0..s.grid.len())
        .map(|j| {
            let t = top_outcome.plan.targets[j];
            row[j] * frozen.contract.y[t]
        })
        .sum();
    let expected_pay_debt: f64 = (0..s.grid.len())
        .map(|j| {
            let t = debt.outcome.plan.targets[j];
            mp_row[j] * debt.contract.y[t]
        })
        .sum();
    let cost_diff =
        s.effort.costs[top_outcome.effort_index] - s.effort.costs[debt.outcome.effort_index];
    let domination_margin =
        expected_pay_bonus - expected_pay_debt - cost_diff - top_outcome.expected_waste;

    Ok(SteepnessOutcome {
        rows,
        debt_params: debt.params,
        bonus_params: frozen.params,
        e_mp,
        e_second,
        mass_non_increasing,
        waste_non_increasing,
        final_waste,
        top_gap,
        domination_margin,
    })
}

const PROB_EPS: f64 = 1e-12;
