//! Backward-induction evaluation and outer contract optimization.
//!
//! A contract is evaluated by solving the manipulation stage once (the
//! stage-two plan depends only on the realized grid point, not on effort),
//! then picking the effort that maximizes expected utility of the value
//! function net of effort cost, ties resolved to the highest effort.
//!
//! The outer search runs over finite contract families. Ties in the
//! objective are broken first toward the contract with less expected
//! manipulation waste (the Pareto selection implied by letting the agent
//! act in the financier's favour when indifferent), then lexicographically
//! by parameter vector.

use crate::manipulation::{solve_manipulation, ManipulationPlan, ValueFunction};
use crate::model::{Contract, Scenario, PAYOFF_TOL};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("instance too large: {0}")]
    SizeExceeded(String),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Full backward-induction outcome of one contract in one scenario.
#[derive(Debug, Clone)]
pub struct EquilibriumOutcome {
    pub effort_index: usize,
    pub effort: f64,
    pub plan: ManipulationPlan,
    pub value_fn: ValueFunction,
    /// Expected utility of the value function net of effort cost.
    pub agent_utility: f64,
    pub per_effort_utilities: Vec<f64>,
    /// Expected observed profit kept by the financier, `E[x + z - Y(x+z)]`.
    pub principal_revenue: f64,
    /// Revenue net of the upfront payment `Q`.
    pub principal_payoff: f64,
    /// Expected manipulation cost `E[g(z)]` at the equilibrium effort.
    pub expected_waste: f64,
    pub ir_agent: bool,
    pub ir_financier: bool,
}

/// Stage-one effort choice given a contract: returns the chosen effort
/// index and the per-effort expected utilities. Ties within `PAYOFF_TOL`
/// resolve to the highest effort.
pub fn best_effort(contract: &Contract, s: &Scenario) -> (usize, Vec<f64>) {
    let (_, value) = solve_manipulation(contract, &s.tech, &s.grid);
    best_effort_given_value(&value, s)
}

fn best_effort_given_value(value: &ValueFunction, s: &Scenario) -> (usize, Vec<f64>) {
    let utilities: Vec<f64> = s
        .dist
        .rows
        .iter()
        .zip(&s.effort.costs)
        .map(|(row, &cost)| {
            let expected: f64 = row
                .iter()
                .zip(&value.v)
                .map(|(p, &v)| p * s.utility.eval(v))
                .sum();
            expected - cost
        })
        .collect();
    let best = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let chosen = (0..utilities.len())
        .rev()
        .find(|&i| utilities[i] >= best - PAYOFF_TOL)
        .expect("non-empty effort grid");
    (chosen, utilities)
}

/// Evaluates a contract end to end at its equilibrium effort and plan.
pub fn evaluate_contract(contract: &Contract, s: &Scenario) -> EquilibriumOutcome {
    let (plan, value_fn) = solve_manipulation(contract, &s.tech, &s.grid);
    let (effort_index, per_effort_utilities) = best_effort_given_value(&value_fn, s);
    outcome_at_effort(
        contract,
        s,
        effort_index,
        per_effort_utilities,
        plan,
        value_fn,
    )
}

fn outcome_at_effort(
    contract: &Contract,
    s: &Scenario,
    effort_index: usize,
    per_effort_utilities: Vec<f64>,
    plan: ManipulationPlan,
    value_fn: ValueFunction,
) -> EquilibriumOutcome {
    let row = &s.dist.rows[effort_index];
    let mut revenue = 0.0;
    let mut waste = 0.0;
    for (j, &p) in row.iter().enumerate() {
        let target = plan.targets[j];
        revenue += p * (s.grid.points[target] - contract.y[target]);
        waste += p * s.tech.cost(plan.z[j]);
    }
    let agent_utility = per_effort_utilities[effort_index];
    EquilibriumOutcome {
        effort_index,
        effort: s.effort.levels[effort_index],
        agent_utility,
        per_effort_utilities,
        principal_revenue: revenue,
        principal_payoff: revenue - s.capital,
        expected_waste: waste,
        ir_agent: agent_utility >= s.outside_utility - PAYOFF_TOL,
        ir_financier: revenue >= s.required_return() - PAYOFF_TOL,
        plan,
        value_fn,
    }
}

/// Expected financier revenue of a contract when the effort row is fixed
/// exogenously (calibration helper; ignores the equilibrium effort).
pub fn revenue_at_effort(contract: &Contract, s: &Scenario, effort_index: usize) -> f64 {
    let (plan, _) = solve_manipulation(contract, &s.tech, &s.grid);
    let row = &s.dist.rows[effort_index];
    (0..s.grid.len())
        .map(|j| {
            let target = plan.targets[j];
            row[j] * (s.grid.points[target] - contract.y[target])
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Contract families
// ---------------------------------------------------------------------------

/// Finite, sweepable contract families.
#[derive(Debug, Clone, PartialEq)]
pub enum ContractFamily {
    /// `y = max(0, x - d)`, `d` on a uniform grid over `[0, M]`.
    Debt { resolution: usize },
    /// Zero below a threshold `d'`, `x - beta` at or above it, with
    /// `0 < beta < d'`. Optional explicit threshold range.
    Bonus {
        resolution: usize,
        dprime_range: Option<(f64, f64)>,
    },
    /// `min(cap, max(0, alpha x - d) + w)` with constant `alpha`.
    GeneralizedDebt { resolution: usize },
    /// Every payoff independently on a uniform lattice over its feasible
    /// range.
    FreeGrid { levels: usize },
}

/// One enumerated member of a family: the parameter vector used for
/// lexicographic tie-breaking plus the realized contract.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub params: Vec<f64>,
    pub contract: Contract,
}

/// Optimization result: the winning member and its evaluation.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub contract: Contract,
    pub params: Vec<f64>,
    pub outcome: EquilibriumOutcome,
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn debt_contract(grid: &crate::model::ProfitGrid, d: f64) -> Contract {
    Contract::new(grid.points.iter().map(|&x| (x - d).max(0.0)).collect())
}

pub fn bonus_contract(grid: &crate::model::ProfitGrid, dprime: f64, beta: f64) -> Contract {
    Contract::new(
        grid.points
            .iter()
            .map(|&x| if x < dprime { 0.0 } else { x - beta })
            .collect(),
    )
}

fn gdebt_contract(s: &Scenario, alpha: f64, d: f64, w: f64) -> Contract {
    Contract::new(
        s.grid
            .points
            .iter()
            .enumerate()
            .map(|(j, &x)| ((alpha * x - d).max(0.0) + w).min(s.payoff_cap(j)))
            .collect(),
    )
}

impl ContractFamily {
    /// Enumerates the family against a scenario, in deterministic order.
    pub fn members(&self, s: &Scenario) -> Result<Vec<FamilyMember>, SolveError> {
        let m = s.grid.max_profit();
        let mut out = Vec::new();
        match *self {
            Self::Debt { resolution } => {
                if resolution < 2 {
                    return Err(SolveError::InvalidInput(
                        "debt resolution must be >= 2".into(),
                    ));
                }
                for d in linspace(0.0, m, resolution) {
                    out.push(FamilyMember {
                        params: vec![d],
                        contract: debt_contract(&s.grid, d),
                    });
                }
            }
            Self::Bonus {
                resolution,
                dprime_range,
            } => {
                if resolution < 2 {
                    return Err(SolveError::InvalidInput(
                        "bonus resolution must be >= 2".into(),
                    ));
                }
                let (lo, hi) = dprime_range.unwrap_or((0.0, m));
                for dprime in linspace(lo, hi, resolution.min(64)) {
                    if dprime <= 0.0 || dprime > m {
                        continue;
                    }
                    for k in 1..resolution {
                        let beta = dprime * k as f64 / resolution as f64;
                        out.push(FamilyMember {
                            params: vec![dprime, beta],
                            contract: bonus_contract(&s.grid, dprime, beta),
                        });
                    }
                }
            }
            Self::GeneralizedDebt { resolution } => {
                if resolution < 2 {
                    return Err(SolveError::InvalidInput(
                        "gdebt resolution must be >= 2".into(),
                    ));
                }
                let r = s.market_rate;
                for alpha in linspace(0.0, 1.0 + r, resolution) {
                    for d in linspace(0.0, m, resolution) {
                        for w in linspace(0.0, m / 2.0, resolution) {
                            out.push(FamilyMember {
                                params: vec![alpha, d, w],
                                contract: gdebt_contract(s, alpha, d, w),
                            });
                        }
                    }
                }
            }
            Self::FreeGrid { levels } => {
                let n = s.grid.len();
                if levels == 0 {
                    return Err(SolveError::InvalidInput("lattice needs >= 1 level".into()));
                }
                if n > 5 || levels > 64 {
                    return Err(SolveError::SizeExceeded(format!(
                        "free-grid lattice {levels}^{n} too large"
                    )));
                }
                let lattices: Vec<Vec<f64>> = (0..n)
                    .map(|j| linspace(0.0, s.payoff_cap(j), levels))
                    .collect();
                let mut idx = vec![0usize; n];
                loop {
                    let y: Vec<f64> = (0..n).map(|j| lattices[j][idx[j]]).collect();
                    out.push(FamilyMember {
                        params: y.clone(),
                        contract: Contract::new(y),
                    });
                    let mut j = n;
                    loop {
                        if j == 0 {
                            return Ok(out);
                        }
                        j -= 1;
                        idx[j] += 1;
                        if idx[j] < lattices[j].len() {
                            break;
                        }
                        idx[j] = 0;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() < b.len()
}

struct Incumbent {
    objective: f64,
    optimum: Optimum,
}

fn consider(
    best: &mut Option<Incumbent>,
    objective: f64,
    member: FamilyMember,
    outcome: EquilibriumOutcome,
) {
    let replace = match best {
        None => true,
        Some(inc) => {
            if objective > inc.objective + PAYOFF_TOL {
                true
            } else if objective < inc.objective - PAYOFF_TOL {
                false
            } else if outcome.expected_waste < inc.optimum.outcome.expected_waste - PAYOFF_TOL {
                true
            } else if outcome.expected_waste > inc.optimum.outcome.expected_waste + PAYOFF_TOL {
                false
            } else {
                lex_less(&member.params, &inc.optimum.params)
            }
        }
    };
    if replace {
        *best = Some(Incumbent {
            objective,
            optimum: Optimum {
                contract: member.contract,
                params: member.params,
                outcome,
            },
        });
    }
}

// ---------------------------------------------------------------------------
// Outer optimization
// ---------------------------------------------------------------------------

/// Maximizes the financier's expected payoff over the family subject to
/// the agent's participation constraint; the financier's own break-even
/// condition is reported as a post-check flag, not imposed.
pub fn optimize_financier(s: &Scenario, family: &ContractFamily) -> Result<Optimum, SolveError> {
    let mut best: Option<Incumbent> = None;
    for member in family.members(s)? {
        if !member.contract.is_feasible(s) {
            continue;
        }
        let outcome = evaluate_contract(&member.contract, s);
        if !outcome.ir_agent {
            continue;
        }
        let objective = outcome.principal_payoff;
        consider(&mut best, objective, member, outcome);
    }
    best.map(|b| b.optimum).ok_or_else(|| {
        SolveError::Infeasible(
            "no family member satisfies the agent's participation constraint".into(),
        )
    })
}

/// Maximizes the agent's expected utility over the family subject to the
/// financier's break-even constraint. For the threshold families the
/// binding parameter is refined by bisection so the constraint holds with
/// equality up to the bisection tolerance.
pub fn optimize_entrepreneur(s: &Scenario, family: &ContractFamily) -> Result<Optimum, SolveError> {
    if s.feasibility_mode != crate::model::FeasibilityMode::PayBoundX {
        return Err(SolveError::InvalidInput(
            "entrepreneur problem requires the state-by-state payoff bound".into(),
        ));
    }
    let target = s.required_return();
    match family {
        ContractFamily::Debt { resolution } => {
            let m = s.grid.max_profit();
            let ds = linspace(0.0, m, (*resolution).max(2));
            let feasible_at = |d: f64| {
                let c = debt_contract(&s.grid, d);
                evaluate_contract(&c, s).principal_revenue >= target - PAYOFF_TOL
            };
            let first = ds.iter().position(|&d| feasible_at(d)).ok_or_else(|| {
                SolveError::Infeasible("required return exceeds attainable revenue".into())
            })?;
            let d_star = if first == 0 {
                0.0
            } else {
                let mut lo = ds[first - 1];
                let mut hi = ds[first];
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if feasible_at(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            let contract = debt_contract(&s.grid, d_star);
            let outcome = evaluate_contract(&contract, s);
            Ok(Optimum {
                contract,
                params: vec![d_star],
                outcome,
            })
        }
        ContractFamily::Bonus {
            resolution,
            dprime_range,
        } => {
            let m = s.grid.max_profit();
            let res = (*resolution).max(2);
            let (lo_d, hi_d) = dprime_range.unwrap_or((0.0, m));
            let mut best: Option<Incumbent> = None;
            for dprime in linspace(lo_d, hi_d, res.min(64)) {
                if dprime <= 0.0 || dprime > m {
                    continue;
                }
                let feasible_at = |beta: f64| {
                    let c = bonus_contract(&s.grid, dprime, beta);
                    c.is_feasible(s)
                        && evaluate_contract(&c, s).principal_revenue >= target - PAYOFF_TOL
                };
                let betas: Vec<f64> = (1..res).map(|k| dprime * k as f64 / res as f64).collect();
                let Some(first) = betas.iter().position(|&b| feasible_at(b)) else {
                    continue;
                };
                let beta_star = if first == 0 {
                    betas[0]
                } else {
                    let mut lo = betas[first - 1];
                    let mut hi = betas[first];
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if feasible_at(mid) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi
                };
                let contract = bonus_contract(&s.grid, dprime, beta_star);
                let outcome = evaluate_contract(&contract, s);
                let objective = outcome.agent_utility;
                consider(
                    &mut best,
                    objective,
                    FamilyMember {
                        params: vec![dprime, beta_star],
                        contract,
                    },
                    outcome,
                );
            }
            best.map(|b| b.optimum).ok_or_else(|| {
                SolveError::Infeasible("required return exceeds attainable revenue".into())
            })
        }
        _ => {
            let mut best: Option<Incumbent> = None;
            for member in family.members(s)? {
                if !member.contract.is_feasible(s) {
                    continue;
                }
                let outcome = evaluate_contract(&member.contract, s);
                if outcome.principal_revenue < target - PAYOFF_TOL {
                    continue;
                }
                let objective = outcome.agent_utility;
                consider(&mut best, objective, member, outcome);
            }
            best.map(|b| b.optimum).ok_or_else(|| {
                SolveError::Infeasible("required return exceeds attainable revenue".into())
            })
        }
    }
}

/// Exhaustive lattice enumeration on tiny instances; independent check of
/// the family optimizers. Each payoff ranges over a uniform lattice on its
/// feasible interval.
pub fn brute_force_oracle(s: &Scenario, payoff_levels: usize) -> Result<Optimum, SolveError> {
    let n = s.grid.len();
    if n > 5 {
        return Err(SolveError::SizeExceeded(format!("{n} grid points > 5")));
    }
    if payoff_levels == 0 || payoff_levels > 64 {
        return Err(SolveError::SizeExceeded(format!(
            "{payoff_levels} payoff levels outside 1..=64"
        )));
    }
    let target = s.required_return();
    let mut best: Option<Incumbent> = None;
    for member in (ContractFamily::FreeGrid {
        levels: payoff_levels,
    })
    .members(s)?
    {
        let outcome = evaluate_contract(&member.contract, s);
        let objective = match s.objective {
            crate::model::Objective::Financier => {
                if !outcome.ir_agent {
                    continue;
                }
                outcome.principal_payoff
            }
            crate::model::Objective::Entrepreneur => {
                if outcome.principal_revenue < target - PAYOFF_TOL {
                    continue;
                }
                outcome.agent_utility
            }
        };
        consider(&mut best, objective, member, outcome);
    }
    best.map(|b| b.optimum)
        .ok_or_else(|| SolveError::Infeasible("no feasible lattice contract".into()))
}

// ---------------------------------------------------------------------------
// Generalized-debt representation
// ---------------------------------------------------------------------------

/// Constructive fit of `y = max(0, alpha(x) x - d) + w` for a
/// non-decreasing slope-bounded contract.
#[derive(Debug, Clone)]
pub struct GeneralizedDebtFit {
    pub alpha: Vec<f64>,
    pub debt: f64,
    pub wage: f64,
    /// Maximal absolute reconstruction error.
    pub residual: f64,
    /// Maximal adjacent slope of the fitted alpha.
    pub alpha_slope_max: f64,
}

/// Fits the generalized-debt form to a contract. The fit reconstructs
/// exactly whenever the contract is non-decreasing; the caller checks the
/// residual and the slope bound `1 + r`.
pub fn fit_generalized_debt(
    contract: &Contract,
    grid: &crate::model::ProfitGrid,
    market_rate: f64,
) -> GeneralizedDebtFit {
    let n = grid.len();
    let wage = contract.y[0];
    let t: Vec<f64> = contract.y.iter().map(|y| y - wage).collect();
    let rate = 1.0 + market_rate;

    // choose d so that alpha_j = (t_j + d) / x_j has adjacent slopes <= 1+r
    let mut debt = 0.0;
    for j in 0..n - 1 {
        let (xa, xb) = (grid.points[j], grid.points[j + 1]);
        if xa <= 0.0 {
            continue;
        }
        let dx = xb - xa;
        let needed = (t[j + 1] / xb - t[j] / xa - rate * dx) * xa * xb / dx;
        if needed > debt {
            debt = needed;
        }
    }

    let mut alpha = vec![0.0; n];
    for (j, a) in alpha.iter_mut().enumerate() {
        if grid.points[j] > 0.0 {
            *a = (t[j] + debt) / grid.points[j];
        }
    }
    if grid.points[0] <= 0.0 && n > 1 {
        alpha[0] = alpha[1];
    }

    let mut residual = 0.0f64;
    for (j, &a) in alpha.iter().enumerate() {
        let rebuilt = (a * grid.points[j] - debt).max(0.0) + wage;
        residual = residual.max((rebuilt - contract.y[j]).abs());
    }
    let alpha_slope_max = crate::manipulation::slope_diagnostic(&alpha, grid);
    GeneralizedDebtFit {
        alpha,
        debt,
        wage,
        residual,
        alpha_slope_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manipulation::{is_manipulation_proof, monotone_envelope};
    use crate::model::*;
    use crate::testkit::table1_scenario;

    #[test]
    fn flat_pay_gives_no_incentive() {
        let s = table1_scenario();
        let (e, _) = best_effort(&Contract::new(vec![1.0, 1.0, 1.0]), &s);
        assert_eq!(e, 0);
    }

    #[test]
    fn free_effort_ties_resolve_upward() {
        let mut s = table1_scenario();
        s.effort.costs = vec![0.0, 0.0];
        let (e, _) = best_effort(&Contract::new(vec![0.5, 0.5, 2.0]), &s);
        assert_eq!(e, 1);
        // even a flat contract picks the top effort when effort is free
        let (e_flat, _) = best_effort(&Contract::new(vec![1.0, 1.0, 1.0]), &s);
        assert_eq!(e_flat, 1);
    }

    #[test]
    fn table1_two_row_arithmetic() {
        // borrowing at 200% interest makes the jump contract truthful, so
        // the effort choice reduces to plain two-row expectations
        let mut s = table1_scenario();
        s.tech = ManipulationTech::Linear { rate: 2.0 };
        let (e, utils) = best_effort(&Contract::new(vec![0.0, 0.0, 4.0]), &s);
        assert_eq!(e, 1);
        assert!((utils[0] - 0.0002).abs() < 1e-12);
        assert!((utils[1] - 1.4998).abs() < 1e-12);
    }

    #[test]
    fn manipulation_proof_contract_has_zero_waste() {
        let s = table1_scenario();
        let outcome = evaluate_contract(&Contract::new(vec![0.1, 0.5, 1.0]), &s);
        assert!(outcome.plan.is_truthful());
        assert_eq!(outcome.expected_waste, 0.0);
    }

    #[test]
    fn figure_one_contract_uses_the_value_function() {
        let s = table1_scenario();
        let outcome = evaluate_contract(&Contract::new(vec![0.7, 0.2, 1.5]), &s);
        assert_eq!(outcome.value_fn.v, vec![0.7, 0.7, 1.5]);
        let row = &s.dist.rows[outcome.effort_index];
        let by_hand: f64 = row
            .iter()
            .zip(&outcome.value_fn.v)
            .map(|(p, v)| p * v)
            .sum::<f64>()
            - s.effort.costs[outcome.effort_index];
        assert!((outcome.agent_utility - by_hand).abs() < 1e-12);
    }

    #[test]
    fn bonus_waste_matches_direct_summation() {
        // convex tech; manipulation only inside the inverse-cost window
        let mut s = table1_scenario();
        s.grid = ProfitGrid::new(vec![0.0, 1.0, 2.0, 2.75, 3.0, 4.0]).unwrap();
        s.dist = ConditionalDistribution::new(vec![
            vec![0.3, 0.2, 0.2, 0.1, 0.1, 0.1],
            vec![0.1, 0.1, 0.2, 0.2, 0.2, 0.2],
        ]);
        let gamma = 0.5;
        s.tech = ManipulationTech::ConvexPower { gamma };
        let dprime = 3.0;
        let beta = 1.5;
        let contract = bonus_contract(&s.grid, dprime, beta);
        let outcome = evaluate_contract(&contract, &s);
        let window = convex_power_inverse(gamma, dprime - beta);
        let row = &s.dist.rows[outcome.effort_index];
        let mut expected = 0.0;
        for (j, &x) in s.grid.points.iter().enumerate() {
            // the left endpoint is exactly indifferent and the tie rule
            // keeps it truthful, so the grid sum is strict there
            if x > dprime - window && x < dprime {
                let z = dprime - x;
                expected += row[j] * (z + gamma * z * z);
            }
        }
        assert!(expected > 0.0);
        assert!((outcome.expected_waste - expected).abs() < 1e-12);
    }

    #[test]
    fn envelope_never_hurts_the_financier() {
        // Monotone-envelope replacement: same value function, same effort,
        // weakly better principal payoff, strictly when money was burned.
        let s = table1_scenario();
        let c = Contract::new(vec![0.7, 0.2, 1.5]);
        let base = evaluate_contract(&c, &s);
        let env = evaluate_contract(&monotone_envelope(&c), &s);
        assert_eq!(base.effort_index, env.effort_index);
        for (a, b) in base.value_fn.v.iter().zip(&env.value_fn.v) {
            assert!((a - b).abs() <= PAYOFF_TOL);
        }
        assert!(env.principal_payoff > base.principal_payoff + PAYOFF_TOL);
    }

    #[test]
    fn financier_optimum_on_a_small_lattice_is_manipulation_proof() {
        let mut s = table1_scenario();
        s.grid = ProfitGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        s.dist = ConditionalDistribution::new(vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]]);
        s.outside_utility = 0.3;
        s.capital = 0.2;
        let opt = optimize_financier(&s, &ContractFamily::FreeGrid { levels: 9 }).unwrap();
        let (mp, _) = is_manipulation_proof(&opt.contract, &s.tech, &s.grid);
        assert!(mp);
        let slope = crate::manipulation::slope_diagnostic(&opt.contract.y, &s.grid);
        assert!(slope <= 1.0 + s.market_rate + PAYOFF_TOL);
        assert!(opt.contract.y.windows(2).all(|w| w[1] >= w[0] - PAYOFF_TOL));
        assert!(opt.outcome.ir_agent);
    }

    #[test]
    fn impossible_reservation_utility_is_infeasible() {
        let mut s = table1_scenario();
        s.outside_utility = 100.0;
        match optimize_financier(&s, &ContractFamily::FreeGrid { levels: 5 }) {
            Err(SolveError::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    fn entrepreneur_scenario() -> Scenario {
        let grid = ProfitGrid::new(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let effort = EffortGrid {
            levels: vec![0.0, 0.5, 1.0],
            costs: vec![0.0, 0.1, 0.3],
        };
        let dist = crate::orders::make_mlrp_family(&grid, &effort, 2.0, None).unwrap();
        Scenario {
            grid,
            effort,
            dist,
            tech: ManipulationTech::ConvexPower { gamma: 0.5 },
            utility: Utility::RiskNeutral,
            capital: 1.0,
            market_rate: 0.0,
            outside_utility: 0.0,
            feasibility_mode: FeasibilityMode::PayBoundX,
            objective: Objective::Entrepreneur,
        }
    }

    #[test]
    fn debt_calibration_binds_the_financier_constraint() {
        let s = entrepreneur_scenario();
        let opt = optimize_entrepreneur(&s, &ContractFamily::Debt { resolution: 65 }).unwrap();
        let target = s.required_return();
        assert!(opt.outcome.principal_revenue >= target - PAYOFF_TOL);
        // binding: reducing d by a hair breaks the constraint
        let d = opt.params[0];
        let lower = evaluate_contract(&debt_contract(&s.grid, d - 1e-6), &s);
        assert!(lower.principal_revenue < target - PAYOFF_TOL);
        let (mp, _) = is_manipulation_proof(&opt.contract, &s.tech, &s.grid);
        assert!(mp);
    }

    #[test]
    fn zero_capital_debt_threshold_is_zero() {
        let mut s = entrepreneur_scenario();
        s.capital = 0.0;
        let opt = optimize_entrepreneur(&s, &ContractFamily::Debt { resolution: 33 }).unwrap();
        assert_eq!(opt.params[0], 0.0);
        // the entrepreneur keeps the whole profit state by state
        for (y, x) in opt.contract.y.iter().zip(&s.grid.points) {
            assert!((y - x).abs() < 1e-12);
        }
    }

    #[test]
    fn entrepreneur_requires_state_bound() {
        let mut s = entrepreneur_scenario();
        s.feasibility_mode = FeasibilityMode::PayBoundM;
        assert!(matches!(
            optimize_entrepreneur(&s, &ContractFamily::Debt { resolution: 9 }),
            Err(SolveError::InvalidInput(_))
        ));
    }

    #[test]
    fn oracle_guards_and_degenerate_lattice() {
        let s = table1_scenario();
        assert!(matches!(
            brute_force_oracle(&s, 100),
            Err(SolveError::SizeExceeded(_))
        ));
        let mut wide = s.clone();
        wide.grid = ProfitGrid::new((0..7).map(|i| i as f64).collect()).unwrap();
        wide.dist = ConditionalDistribution::new(vec![
            vec![0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
            vec![0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.4],
        ]);
        assert!(matches!(
            brute_force_oracle(&wide, 5),
            Err(SolveError::SizeExceeded(_))
        ));
        // singleton lattice: only the zero contract exists
        let opt = brute_force_oracle(&s, 1).unwrap();
        assert!(opt.contract.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oracle_matches_hand_enumeration_on_two_points() {
        // two-point grid, 11 levels, prohibitive upward costs: the classic
        // ex-ante-only problem, enumerated by hand below
        let grid = ProfitGrid::new(vec![0.0, 2.0]).unwrap();
        let effort = EffortGrid {
            levels: vec![0.0, 1.0],
            costs: vec![0.0, 0.25],
        };
        let dist = ConditionalDistribution::new(vec![vec![0.7, 0.3], vec![0.3, 0.7]]);
        let s = Scenario {
            grid,
            effort,
            dist,
            tech: ManipulationTech::Tabulated {
                points: vec![(1e-6, 1e9)],
            },
            utility: Utility::RiskNeutral,
            capital: 0.4,
            market_rate: 0.0,
            outside_utility: 0.0,
            feasibility_mode: FeasibilityMode::PayBoundX,
            objective: Objective::Financier,
        };
        let oracle = brute_force_oracle(&s, 11).unwrap();

        // independent loop over the 121 contracts
        let mut best_value = f64::NEG_INFINITY;
        for a in 0..11 {
            for b in 0..11 {
                let y0 = 0.0 * a as f64; // cap at x_0 = 0 forces y0 = 0
                let y1 = 2.0 * b as f64 / 10.0;
                // burning from the top state if it pays
                let v1 = y1.max(y0);
                let (util0, util1) = {
                    let u0 = 0.7 * y0 + 0.3 * v1;
                    let u1 = 0.3 * y0 + 0.7 * v1 - 0.25;
                    (u0, u1)
                };
                let (e, util) = if util1 >= util0 - 1e-9 {
                    (1, util1)
                } else {
                    (0, util0)
                };
                if util < -1e-9 {
                    continue;
                }
                let row: [f64; 2] = if e == 1 { [0.3, 0.7] } else { [0.7, 0.3] };
                let burn = v1 > y1 + 1e-9;
                let top_keep = if burn { 0.0 - y0 } else { 2.0 - y1 };
                let payoff = row[0] * (0.0 - y0) + row[1] * top_keep - 0.4;
                if payoff > best_value {
                    best_value = payoff;
                }
            }
        }
        assert!((oracle.outcome.principal_payoff - best_value).abs() < 1e-9);
    }

    #[test]
    fn unrestricted_lattice_optimum_matches_the_gentle_class() {
        // on the three-state reference instance the free-lattice optimum
        // equals the best truthful, non-decreasing, slope-bounded lattice
        // contract (41 levels keep replacements on the lattice)
        let mut s = table1_scenario();
        s.outside_utility = 0.2;
        let levels = 41;
        let free = brute_force_oracle(&s, levels).unwrap();
        let mut best_restricted = f64::NEG_INFINITY;
        for member in (ContractFamily::FreeGrid { levels }).members(&s).unwrap() {
            let monotone = member.contract.y.windows(2).all(|w| w[1] >= w[0]);
            if !monotone {
                continue;
            }
            let slope = crate::manipulation::slope_diagnostic(&member.contract.y, &s.grid);
            if slope > 1.0 + s.market_rate + PAYOFF_TOL {
                continue;
            }
            let outcome = evaluate_contract(&member.contract, &s);
            if outcome.ir_agent && outcome.principal_payoff > best_restricted {
                best_restricted = outcome.principal_payoff;
            }
        }
        assert!((free.outcome.principal_payoff - best_restricted).abs() < 1e-9);
    }

    #[test]
    fn generalized_debt_fit_reconstructs_monotone_contracts() {
        let grid = ProfitGrid::new(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = 0.05;
        for y in [
            vec![0.0, 0.0, 0.5, 1.5, 2.5],
            vec![0.2, 0.2, 0.2, 0.2, 0.2],
            vec![0.0, 1.05, 2.1, 3.15, 4.2],
        ] {
            let fit = fit_generalized_debt(&Contract::new(y.clone()), &grid, r);
            assert!(fit.residual < 1e-9, "residual {} for {:?}", fit.residual, y);
            assert!(fit.alpha_slope_max <= 1.0 + r + PAYOFF_TOL);
            assert!(fit.alpha.iter().all(|&a| a >= -PAYOFF_TOL));
            assert!(fit.debt >= 0.0 && fit.wage >= 0.0);
        }
        // a decreasing contract cannot be represented
        let bad = fit_generalized_debt(&Contract::new(vec![1.0, 0.5, 0.2, 0.1, 0.0]), &grid, r);
        assert!(bad.residual > 1e-3);
    }

    #[test]
    fn iic_binding_calibrations_order_low_state_pay() {
        // max-spread truthful contract vs the contract binding the long
        // jump constraint: with the financier held to the same revenue at
        // a fixed effort row, the truthful contract pays more in the low
        // state, over a grid of technology parameters
        let grid = [1.0, 2.5, 4.0];
        let (d1, d2) = (grid[1] - grid[0], grid[2] - grid[1]);
        let dd = grid[2] - grid[0];
        for gamma in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let g = |z: f64| z + gamma * z * z;
            for q in [0.05, 0.1, 0.3] {
                for row in [[0.1, 0.9 - q, q], [0.1, q, 0.9 - q]] {
                    let required = 0.4;
                    let mean: f64 = row.iter().zip(&grid).map(|(p, x)| p * x).sum();
                    let y_l = mean - required - row[1] * g(d1) - row[2] * (g(d1) + g(d2));
                    let mean_shifted = row[0] * grid[0] + (row[1] + row[2]) * grid[2];
                    let y_l_m = mean_shifted - required - (row[1] + row[2]) * g(dd);
                    assert!(y_l >= y_l_m - 1e-12, "gamma={gamma} q={q}: {y_l} < {y_l_m}");
                }
            }
        }
    }
}
