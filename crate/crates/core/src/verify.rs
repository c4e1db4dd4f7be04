//! Seeded property suites that re-check the model's structural results on
//! randomized instances and produce a replayable report.

use crate::manipulation::{
    is_manipulation_proof, monotone_envelope, slope_diagnostic, solve_manipulation,
};
use crate::model::{
    ConditionalDistribution, Contract, EffortGrid, FeasibilityMode, ManipulationTech, Objective,
    ProfitGrid, Scenario, Utility, PAYOFF_TOL,
};
use crate::optimizer::{
    evaluate_contract, fit_generalized_debt, optimize_financier, ContractFamily,
};
use crate::sweeps::{default_gamma_grid, run_steepness_sweep};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TheoremCheck {
    Lemma1,
    Lemma2,
    Lemma3,
    Lemma5,
    Thm4,
    Thm6,
    Cor7,
    Thm8,
}

impl TheoremCheck {
    pub const ALL: [Self; 8] = [
        Self::Lemma1,
        Self::Lemma2,
        Self::Lemma3,
        Self::Lemma5,
        Self::Thm4,
        Self::Thm6,
        Self::Cor7,
        Self::Thm8,
    ];
}

impl fmt::Display for TheoremCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Lemma1 => "Lemma1",
            Self::Lemma2 => "Lemma2",
            Self::Lemma3 => "Lemma3",
            Self::Lemma5 => "Lemma5",
            Self::Thm4 => "Thm4",
            Self::Thm6 => "Thm6",
            Self::Cor7 => "Cor7",
            Self::Thm8 => "Thm8",
        };
        f.write_str(name)
    }
}

impl FromStr for TheoremCheck {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lemma1" => Ok(Self::Lemma1),
            "lemma2" => Ok(Self::Lemma2),
            "lemma3" => Ok(Self::Lemma3),
            "lemma5" => Ok(Self::Lemma5),
            "thm4" => Ok(Self::Thm4),
            "thm6" => Ok(Self::Thm6),
            "cor7" => Ok(Self::Cor7),
            "thm8" => Ok(Self::Thm8),
            other => Err(format!("unknown check: {other}")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub trials: usize,
    pub passes: usize,
    pub failures: usize,
    /// Largest adjacent value-function slope seen (slope diagnostics).
    pub max_slope: Option<f64>,
    /// Scenario JSON reproducing the first failure, if any.
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub entries: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.failures == 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

/// Random payoff vector within the caps; half the draws are step-like with
/// a jump, the rest independent uniforms, so discontinuous shapes are well
/// represented.
pub fn random_contract(rng: &mut ChaCha8Rng, s: &Scenario) -> Contract {
    let n = s.grid.len();
    if rng.random_bool(0.5) {
        Contract::new(
            (0..n)
                .map(|j| rng.random_range(0.0..=s.payoff_cap(j)))
                .collect(),
        )
    } else {
        let jump_at = rng.random_range(0..n);
        let low: f64 = rng.random_range(0.0..=s.payoff_cap(0).min(1.0));
        let y = (0..n)
            .map(|j| {
                let base = if j < jump_at {
                    low
                } else {
                    rng.random_range(low..=s.payoff_cap(j).max(low))
                };
                base.min(s.payoff_cap(j))
            })
            .collect();
        Contract::new(y)
    }
}

/// Random full-support scenario on a small grid, with an increasing-mean
/// distribution, convex costs and a mixed utility draw.
pub fn random_scenario(rng: &mut ChaCha8Rng, tech: ManipulationTech) -> Scenario {
    let n = rng.random_range(3..=5usize);
    // integer-spaced grids keep lattice arithmetic commensurate
    let mut points = vec![0.0];
    for _ in 1..n {
        points.push(points.last().unwrap() + rng.random_range(1..=2) as f64);
    }
    let grid = ProfitGrid::new(points).unwrap();

    let efforts = rng.random_range(2..=3usize);
    let levels: Vec<f64> = (0..efforts).map(|i| i as f64).collect();
    let mut increments: Vec<f64> = (0..efforts - 1)
        .map(|_| rng.random_range(0.01..0.3))
        .collect();
    increments.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut costs = vec![0.0];
    for inc in increments {
        costs.push(costs.last().unwrap() + inc);
    }

    // rows sorted by mean so effort raises expected profit
    let mut rows: Vec<Vec<f64>> = (0..efforts)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let mean = |row: &Vec<f64>| -> f64 { row.iter().zip(&grid.points).map(|(p, x)| p * x).sum() };
    rows.sort_by(|a, b| mean(a).partial_cmp(&mean(b)).unwrap());
    // nudge ties apart by re-drawing the top row if needed
    while rows
        .windows(2)
        .any(|w| (mean(&w[1]) - mean(&w[0])).abs() < 1e-6)
    {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let row: Vec<f64> = raw.into_iter().map(|v| v / total).collect();
        let last = rows.len() - 1;
        rows[last] = row;
        rows.sort_by(|a, b| mean(a).partial_cmp(&mean(b)).unwrap());
    }

    let utility = match rng.random_range(0..3) {
        0 => Utility::RiskNeutral,
        1 => Utility::Crra {
            rho: rng.random_range(0.2..0.8),
        },
        _ => Utility::Cara {
            alpha: rng.random_range(0.5..2.0),
        },
    };

    Scenario {
        grid,
        effort: EffortGrid { levels, costs },
        dist: ConditionalDistribution::new(rows),
        tech,
        utility,
        capital: rng.random_range(0.0..0.5),
        market_rate: 0.0,
        outside_utility: rng.random_range(0.0..0.2),
        feasibility_mode: FeasibilityMode::PayBoundM,
        objective: Objective::Financier,
    }
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// Full scenario JSON plus the offending contract, ready for replay.
fn replay_blob(s: &Scenario, contract: &Contract, tech: Option<&ManipulationTech>) -> String {
    let mut replay = s.clone();
    if let Some(t) = tech {
        replay.tech = t.clone();
    }
    format!(
        "{{\"scenario\": {}, \"contract\": {:?}}}",
        replay.to_json_string(),
        contract.y
    )
}

fn techs_under_test(s: &Scenario) -> Vec<ManipulationTech> {
    vec![
        s.tech.clone(),
        ManipulationTech::Linear { rate: 0.05 },
        ManipulationTech::ConvexPower { gamma: 0.7 },
    ]
}

fn run_lemma1(s: &Scenario, trials: usize, rng: &mut ChaCha8Rng) -> CheckEntry {
    let techs = techs_under_test(s);
    let mut passes = 0;
    let mut failures = 0;
    let mut counterexample = None;
    for t in 0..trials {
        let contract = random_contract(rng, s);
        let tech = &techs[t % techs.len()];
        let (_, value) = solve_manipulation(&contract, tech, &s.grid);
        let monotone = value.v.windows(2).all(|w| w[1] >= w[0] - PAYOFF_TOL);
        let dominates = value
            .v
            .iter()
            .zip(&contract.y)
            .all(|(v, y)| v >= &(y - PAYOFF_TOL));
        if monotone && dominates {
            passes += 1;
        } else {
            failures += 1;
            counterexample.get_or_insert_with(|| replay_blob(s, &contract, Some(tech)));
        }
    }
    CheckEntry {
        name: "Lemma1".into(),
        trials,
        passes,
        failures,
        max_slope: None,
        counterexample,
    }
}

fn run_lemma2(s: &Scenario, trials: usize, rng: &mut ChaCha8Rng) -> CheckEntry {
    let techs = techs_under_test(s);
    let mut passes = 0;
    let mut failures = 0;
    let mut max_slope = f64::NEG_INFINITY;
    let mut counterexample = None;
    for t in 0..trials {
        let contract = random_contract(rng, s);
        let tech = &techs[t % techs.len()];
        let (_, value) = solve_manipulation(&contract, tech, &s.grid);
        let slope = slope_diagnostic(&value.v, &s.grid);
        if slope.is_finite() {
            max_slope = max_slope.max(slope);
            passes += 1;
        } else {
            failures += 1;
            counterexample.get_or_insert_with(|| replay_blob(s, &contract, Some(tech)));
        }
    }
    CheckEntry {
        name: "Lemma2".into(),
        trials,
        passes,
        failures,
        max_slope: Some(max_slope),
        counterexample,
    }
}

fn run_lemma3(s: &Scenario, trials: usize, rng: &mut ChaCha8Rng) -> CheckEntry {
    let techs = techs_under_test(s);
    let mut passes = 0;
    let mut failures = 0;
    let mut counterexample = None;
    for t in 0..trials {
        let contract = random_contract(rng, s);
        let tech = &techs[t % techs.len()];
        let (_, base) = solve_manipulation(&contract, tech, &s.grid);
        let (_, envd) = solve_manipulation(&monotone_envelope(&contract), tech, &s.grid);
        if base
            .v
            .iter()
            .zip(&envd.v)
            .all(|(a, b)| (a - b).abs() <= PAYOFF_TOL)
        {
            passes += 1;
        } else {
            failures += 1;
            counterexample.get_or_insert_with(|| replay_blob(s, &contract, Some(tech)));
        }
    }
    CheckEntry {
        name: "Lemma3".into(),
        trials,
        passes,
        failures,
        max_slope: None,
        counterexample,
    }
}

fn run_lemma5(s: &Scenario, trials: usize, rng: &mut ChaCha8Rng) -> CheckEntry {
    let rates = [0.0, 0.05, 0.2];
    let mut passes = 0;
    let mut failures = 0;
    let mut max_margin = f64::NEG_INFINITY;
    let mut counterexample = None;
    for t in 0..trials {
        let contract = random_contract(rng, s);
        let rate = rates[t % rates.len()];
        let tech = ManipulationTech::Linear { rate };
        let (_, value) = solve_manipulation(&contract, &tech, &s.grid);
        let slope = slope_diagnostic(&value.v, &s.grid);
        max_margin = max_margin.max(slope - (1.0 + rate));
        if slope <= 1.0 + rate + PAYOFF_TOL {
            passes += 1;
        } else {
            failures += 1;
            counterexample.get_or_insert_with(|| replay_blob(s, &contract, Some(&tech)));
        }
    }
    CheckEntry {
        name: "Lemma5".into(),
        trials,
        passes,
        failures,
        max_slope: Some(max_margin),
        counterexample,
    }
}

fn run_thm4(s: &Scenario, trials: usize, rng: &mut ChaCha8Rng) -> CheckEntry {
    let techs = techs_under_test(s);
    let mut passes = 0;
    let mut failures = 0;
    let mut counterexample = None;
    for t in 0..trials {
        let contract = random_contract(rng, s);
        let mut scenario = s.clone();
        scenario.tech = techs[t % techs.len()].clone();
        let base = evaluate_contract(&contract, &scenario);
        let env = evaluate_contract(&monotone_envelope(&contract), &scenario);
        let same_effort = base.effort_index == env.effort_index;
        let same_value = base
            .value_fn
            .v
            .iter()
            .zip(&env.value_fn.v)
            .all(|(a, b)| (a - b).abs() <= PAYOFF_TOL);
        let weakly_better = env.principal_payoff >= base.principal_payoff - PAYOFF_TOL;
        let burn_mass: f64 = base
            .plan
            .z
            .iter()
            .zip(&scenario.dist.rows[base.effort_index])
            .filter(|(&z, _)| z < -PAYOFF_TOL)
            .map(|(_, &p)| p)
            .sum();
        let strict_ok =
            burn_mass <= PAYOFF_TOL || env.principal_payoff > base.principal_payoff + PAYOFF_TOL;
        if same_effort && same_value && weakly_better && strict_ok {
            passes += 1;
        } else {
            failures += 1;
            counterexample.get_or_insert_with(|| replay_blob(&scenario, &contract, None));
        }
    }
    CheckEntry {
        name: "Thm4".into(),
        trials,
        passes,
        failures,
        max_slope: None,
        counterexample,
    }
}

fn thm6_instance(rng: &mut ChaCha8Rng) -> (Scenario, f64) {
    let rate = [0.0, 0.05, 0.2][rng.random_range(0..3)];
    let s = random_scenario(rng, ManipulationTech::Linear { rate });
    (s, rate)
}

fn run_thm6(trials: usize, rng: &mut ChaCha8Rng) -> CheckEntry {
    let mut passes = 0;
    let mut failures = 0;
    let mut counterexample = None;
    for _ in 0..trials {
        let (s, rate) = thm6_instance(rng);
        let levels = 9 + 2 * rng.random_range(0..3usize);
        match optimize_financier(&s, &ContractFamily::FreeGrid { levels }) {
            Err(_) => passes += 1, // infeasible instances carry no claim
            Ok(opt) => {
                let (mp, _) = is_manipulation_proof(&opt.contract, &s.tech, &s.grid);
                let monotone = opt.contract.y.windows(2).all(|w| w[1] >= w[0] - PAYOFF_TOL);
                let slope = slope_diagnostic(&opt.contract.y, &s.grid);
                if mp && monotone && slope <= 1.0 + rate + PAYOFF_TOL {
                    passes += 1;
                } else {
                    failures += 1;
                    counterexample.get_or_insert_with(|| s.to_json_string());
                }
            }
        }
    }
    CheckEntry {
        name: "Thm6".into(),
        trials,
        passes,
        failures,
        max_slope: None,
        counterexample,
    }
}

fn run_cor7(trials: usize, rng: &mut ChaCha8Rng) -> CheckEntry {
    let mut passes = 0;
    let mut failures = 0;
    let mut counterexample = None;
    for _ in 0..trials {
        let (s, rate) = thm6_instance(rng);
        match optimize_financier(&s, &ContractFamily::FreeGrid { levels: 9 }) {
            Err(_) => passes += 1,
            Ok(opt) => {
                let fit = fit_generalized_debt(&opt.contract, &s.grid, rate);
                if fit.residual < 1e-9
                    && fit.alpha_slope_max <= 1.0 + rate + PAYOFF_TOL
                    && fit.alpha.iter().all(|&a| a >= -PAYOFF_TOL)
                {
                    passes += 1;
                } else {
                    failures += 1;
                    counterexample.get_or_insert_with(|| s.to_json_string());
                }
            }
        }
    }
    CheckEntry {
        name: "Cor7".into(),
        trials,
        passes,
        failures,
        max_slope: None,
        counterexample,
    }
}

fn run_thm8(s: &Scenario) -> CheckEntry {
    let bonus = ContractFamily::Bonus {
        resolution: 8,
        dprime_range: None,
    };
    match run_steepness_sweep(s, &default_gamma_grid(), &bonus) {
        Ok(out) => {
            let ok = out.mass_non_increasing
                && out.waste_non_increasing
                && out.final_waste < 1e-3
                && out.top_gap > 0.0
                && out.domination_margin > 0.0;
            CheckEntry {
                name: "Thm8".into(),
                trials: 1,
                passes: ok as usize,
                failures: (!ok) as usize,
                max_slope: None,
                counterexample: (!ok).then(|| s.to_json_string()),
            }
        }
        Err(e) => CheckEntry {
            name: "Thm8".into(),
            trials: 1,
            passes: 0,
            failures: 1,
            max_slope: None,
            counterexample: Some(format!("{{\"error\": \"{e}\"}}")),
        },
    }
}

/// Runs the requested suites with all randomness drawn from `seed`.
/// Failures are report entries, never panics.
pub fn verify_theorems(
    s: &Scenario,
    which: &[TheoremCheck],
    trials: usize,
    seed: u64,
) -> VerificationReport {
    let mut entries = Vec::new();
    for (tag, check) in which.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(tag as u64) ^ 0x5eed);
        let entry = match check {
            TheoremCheck::Lemma1 => run_lemma1(s, trials, &mut rng),
            TheoremCheck::Lemma2 => run_lemma2(s, trials, &mut rng),
            TheoremCheck::Lemma3 => run_lemma3(s, trials, &mut rng),
            TheoremCheck::Lemma5 => run_lemma5(s, trials, &mut rng),
            TheoremCheck::Thm4 => run_thm4(s, trials, &mut rng),
            TheoremCheck::Thm6 => run_thm6(trials, &mut rng),
            TheoremCheck::Cor7 => run_cor7(trials, &mut rng),
            TheoremCheck::Thm8 => run_thm8(s),
        };
        entries.push(entry);
    }
    VerificationReport { seed, entries }
}
