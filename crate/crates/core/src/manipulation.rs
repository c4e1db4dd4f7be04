//! Stage-two positioning choice: given a contract, find the optimal
//! manipulation at every realized grid point, the induced value function,
//! its monotone envelope, and manipulation-proofness diagnostics.
//!
//! Every manipulation moves the realization to another grid point, so the
//! stage-two problem is an exact finite argmax. Ties within `PAYOFF_TOL`
//! are resolved in the financier's favour: first maximize the financier's
//! interim payoff `x + z - Y(x + z)`, then prefer the smallest `|z|`, then
//! the smallest `z`. The rule is order-free, so results do not depend on
//! evaluation order.

use crate::model::{Contract, ManipulationTech, ProfitGrid, PAYOFF_TOL};

/// Chosen shift per grid point; `x_j + z[j]` is always a grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulationPlan {
    pub z: Vec<f64>,
    /// Grid index of the target `x_j + z[j]`.
    pub targets: Vec<usize>,
}

impl ManipulationPlan {
    pub fn is_truthful(&self) -> bool {
        self.z.iter().all(|&z| z == 0.0)
    }
}

/// Stage-two maximized payoff per grid point, `v[j] = max_k y_k - g(x_k - x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub v: Vec<f64>,
}

/// Witness of a profitable deviation on a non-manipulation-proof contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpWitness {
    /// Lowest grid index with a strict deviation.
    pub index: usize,
    /// The deviating shift.
    pub z: f64,
    /// Strict improvement over truth-telling at that point.
    pub gain: f64,
}

/// Solves the manipulation stage by exhaustive search over grid targets.
///
/// `v[j]` is the exact maximum; the plan attains it within the tie
/// tolerance and follows the financier-favoured tie rule.
pub fn solve_manipulation(
    contract: &Contract,
    tech: &ManipulationTech,
    grid: &ProfitGrid,
) -> (ManipulationPlan, ValueFunction) {
    let n = grid.len();
    debug_assert_eq!(contract.y.len(), n, "contract aligned with grid");
    let mut z = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);

    for j in 0..n {
        let xj = grid.points[j];
        let mut best = f64::NEG_INFINITY;
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let a = contract.y[k] - tech.cost(grid.points[k] - xj);
                if a > best {
                    best = a;
                }
                a
            })
            .collect();

        // among targets tied with the maximum, take the financier's best;
        // residual ties go to the smallest |z|, then the smallest z
        let tied = |k: usize| values[k] >= best - PAYOFF_TOL;
        let fin_best = (0..n)
            .filter(|&k| tied(k))
            .map(|k| grid.points[k] - contract.y[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = (0..n)
            .filter(|&k| tied(k) && grid.points[k] - contract.y[k] >= fin_best - PAYOFF_TOL)
            .min_by(|&a, &b| {
                let za = grid.points[a] - xj;
                let zb = grid.points[b] - xj;
                (za.abs(), za)
                    .partial_cmp(&(zb.abs(), zb))
                    .expect("finite shifts")
            })
            .expect("candidate set non-empty");
        z.push(grid.points[chosen] - xj);
        targets.push(chosen);
        v.push(best);
    }

    (ManipulationPlan { z, targets }, ValueFunction { v })
}

/// Smallest non-decreasing contract dominating the input: the running
/// maximum from the left. Idempotent.
pub fn monotone_envelope(contract: &Contract) -> Contract {
    let mut out = Vec::with_capacity(contract.y.len());
    let mut running = f64::NEG_INFINITY;
    for &y in &contract.y {
        running = running.max(y);
        out.push(running);
    }
    Contract::new(out)
}

/// True iff truth-telling attains the stage-two maximum at every grid
/// point (within `PAYOFF_TOL`). On failure returns the lowest-index
/// witness with its deviation.
pub fn is_manipulation_proof(
    contract: &Contract,
    tech: &ManipulationTech,
    grid: &ProfitGrid,
) -> (bool, Option<MpWitness>) {
    let (plan, value) = solve_manipulation(contract, tech, grid);
    for j in 0..grid.len() {
        let gain = value.v[j] - contract.y[j];
        if gain > PAYOFF_TOL {
            return (
                false,
                Some(MpWitness {
                    index: j,
                    z: plan.z[j],
                    gain,
                }),
            );
        }
    }
    (true, None)
}

/// Maximum adjacent difference quotient of `values` over the grid.
pub fn slope_diagnostic(values: &[f64], grid: &ProfitGrid) -> f64 {
    debug_assert!(grid.len() >= 2);
    values
        .windows(2)
        .zip(grid.points.windows(2))
        .map(|(v, x)| (v[1] - v[0]) / (x[1] - x[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}
