//! Domain types for the two-stage hidden-action contracting model.
//!
//! A scenario bundles a discretized profit support, an effort grid with
//! costs, a conditional output distribution, a manipulation technology,
//! a utility function and the financing parameters. All types are
//! immutable after construction and all operations on them are pure, so
//! they can be shared freely across workers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for payoff comparisons.
pub const PAYOFF_TOL: f64 = 1e-9;

/// Absolute tolerance for probability arithmetic (row normalization,
/// survival-function comparisons).
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("manipulation size {z} outside [-{bound}, {bound}]")]
    ShiftOutOfRange { z: f64, bound: f64 },
    #[error("scenario file error: {0}")]
    Io(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario invalid: {0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Discretized support of the stochastic profit. Points are strictly
/// increasing and non-negative; the last point is the maximal profit `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitGrid {
    pub points: Vec<f64>,
}

impl ProfitGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, ModelError> {
        let grid = Self { points };
        let issues = grid.issues();
        if issues.is_empty() {
            Ok(grid)
        } else {
            Err(ModelError::InvalidGrid(issues.join("; ")))
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Maximal profit `M` (the last grid point).
    pub fn max_profit(&self) -> f64 {
        *self.points.last().expect("grid has at least two points")
    }

    /// Index of the grid point equal to `x` within `PAYOFF_TOL`, if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|&p| (p - x).abs() <= PAYOFF_TOL)
    }

    fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.points.len() < 2 {
            out.push("grid needs at least 2 points".to_string());
        }
        if self.points.iter().any(|p| !p.is_finite()) {
            out.push("grid points must be finite".to_string());
        }
        if self.points.first().is_some_and(|&p| p < 0.0) {
            out.push("grid points must be non-negative".to_string());
        }
        for j in 1..self.points.len() {
            if self.points[j] <= self.points[j - 1] {
                out.push(format!("grid not strictly increasing at index {j}"));
            }
        }
        if self.points.last().is_some_and(|&p| p <= 0.0) {
            out.push("maximal profit must be positive".to_string());
        }
        out
    }
}

/// Effort levels with their (non-decreasing, weakly convex) costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortGrid {
    pub levels: Vec<f64>,
    pub costs: Vec<f64>,
}

impl EffortGrid {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Uniform spacing check; convexity of the cost sequence is only
    /// meaningful through second differences on a uniform grid.
    pub fn is_uniform(&self) -> bool {
        if self.levels.len() < 3 {
            return true;
        }
        let h = self.levels[1] - self.levels[0];
        self.levels
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0))
    }
}

// ---------------------------------------------------------------------------
// Conditional distribution
// ---------------------------------------------------------------------------

/// Matrix of `P[x_j | e_i]`, one row per effort level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    pub rows: Vec<Vec<f64>>,
    /// Relaxed mode: zero cells are tolerated (full support is the default
    /// assumption and zero cells are reported as warnings).
    #[serde(default, rename = "allowZeros")]
    pub allow_zeros: bool,
}

impl ConditionalDistribution {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self {
            rows,
            allow_zeros: false,
        }
    }

    pub fn efforts(&self) -> usize {
        self.rows.len()
    }

    pub fn outcomes(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Expected profit for effort row `i` on `grid`.
    pub fn mean_profit(&self, i: usize, grid: &ProfitGrid) -> f64 {
        self.rows[i]
            .iter()
            .zip(&grid.points)
            .map(|(p, x)| p * x)
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Manipulation technology
// ---------------------------------------------------------------------------

/// Cost `g(z)` of shifting the observed profit by `z`. Reducing the profit
/// (burning) is free for every kind except the two-sided falsification
/// variant; inflating costs at least the injected amount for the kinds that
/// satisfy the marginal-cost-at-least-one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ManipulationTech {
    /// `g(z) = (1+rate) * max(0, z)` — frictionless hidden borrowing at
    /// interest `rate`.
    Linear { rate: f64 },
    /// `g(z) = z + gamma * z^2` for `z > 0` — strictly convex for
    /// `gamma > 0`, marginal cost tending to 1 as `z` goes to 0.
    ConvexPower { gamma: f64 },
    /// `g(z) = z^2` for `z > 0`; the two-sided variant also charges `z^2`
    /// for downward shifts (no free burning).
    #[serde(rename_all = "camelCase")]
    QuadraticFalsification { two_sided: bool },
    /// Piecewise-linear interpolation through `(z, cost)` pairs with
    /// `z > 0`; extended to the right with the final segment slope.
    /// Burning stays free.
    Tabulated { points: Vec<(f64, f64)> },
}

impl ManipulationTech {
    /// Raw cost of a shift `z`; no range check.
    pub fn cost(&self, z: f64) -> f64 {
        match self {
            Self::Linear { rate } => {
                if z > 0.0 {
                    (1.0 + rate) * z
                } else {
                    0.0
                }
            }
            Self::ConvexPower { gamma } => {
                if z > 0.0 {
                    z + gamma * z * z
                } else {
                    0.0
                }
            }
            Self::QuadraticFalsification { two_sided } => {
                if z > 0.0 || (*two_sided && z < 0.0) {
                    z * z
                } else {
                    0.0
                }
            }
            Self::Tabulated { points } => {
                if z <= 0.0 {
                    return 0.0;
                }
                tabulated_cost(points, z)
            }
        }
    }

    /// Whether downward shifts are free (the standard assumption).
    pub fn free_burning(&self) -> bool {
        !matches!(self, Self::QuadraticFalsification { two_sided: true })
    }

    fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Self::Linear { rate } => {
                if !rate.is_finite() || *rate < 0.0 {
                    out.push("linear tech rate must be >= 0".into());
                }
            }
            Self::ConvexPower { gamma } => {
                if !gamma.is_finite() || *gamma < 0.0 {
                    out.push("convex-power gamma must be >= 0".into());
                }
            }
            Self::QuadraticFalsification { .. } => {}
            Self::Tabulated { points } => {
                if points.is_empty() {
                    out.push("tabulated tech needs at least one point".into());
                }
                let mut prev_z = 0.0;
                let mut prev_c = 0.0;
                for (k, &(z, c)) in points.iter().enumerate() {
                    if !(z.is_finite() && c.is_finite()) || z <= prev_z || c < prev_c {
                        out.push(format!(
                            "tabulated point {k} must have increasing z > 0 and non-decreasing cost"
                        ));
                        break;
                    }
                    prev_z = z;
                    prev_c = c;
                }
            }
        }
        out
    }
}

fn tabulated_cost(points: &[(f64, f64)], z: f64) -> f64 {
    let mut prev = (0.0, 0.0);
    for &(zk, ck) in points {
        if z <= zk {
            let t = (z - prev.0) / (zk - prev.0);
            return prev.1 + t * (ck - prev.1);
        }
        prev = (zk, ck);
    }
    // extrapolate with the last segment slope
    let (z_last, c_last) = *points.last().expect("validated non-empty");
    let (z_prev, c_prev) = if points.len() >= 2 {
        points[points.len() - 2]
    } else {
        (0.0, 0.0)
    };
    let slope = (c_last - c_prev) / (z_last - z_prev);
    c_last + slope * (z - z_last)
}

/// Inverse of the upward branch `z + gamma z^2` of the convex-power
/// technology, in the numerically stable form `2b / (1 + sqrt(1 + 4 gamma b))`.
pub fn convex_power_inverse(gamma: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    2.0 * b / (1.0 + (1.0 + 4.0 * gamma * b).sqrt())
}

/// Cost of a shift `z`, checked against the support bound `m`.
pub fn eval_cost(tech: &ManipulationTech, z: f64, m: f64) -> Result<f64, ModelError> {
    if z.abs() > m + PAYOFF_TOL {
        return Err(ModelError::ShiftOutOfRange { z, bound: m });
    }
    Ok(tech.cost(z))
}

// ---------------------------------------------------------------------------
// Utility
// ---------------------------------------------------------------------------

/// Bernoulli utility of the entrepreneur, evaluated on the net payoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Utility {
    RiskNeutral,
    /// Constant relative risk aversion, `u(w) = w^(1-rho) / (1-rho)`,
    /// `rho` in `[0, 1)`.
    Crra {
        rho: f64,
    },
    /// Constant absolute risk aversion, `u(w) = (1 - exp(-alpha w)) / alpha`.
    Cara {
        alpha: f64,
    },
}

impl Utility {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            Self::RiskNeutral => w,
            Self::Crra { rho } => {
                if *rho == 0.0 {
                    w
                } else if w < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    w.powf(1.0 - rho) / (1.0 - rho)
                }
            }
            Self::Cara { alpha } => (1.0 - (-alpha * w).exp()) / alpha,
        }
    }

    fn issues(&self) -> Vec<String> {
        match self {
            Self::RiskNeutral => Vec::new(),
            Self::Crra { rho } => {
                if !rho.is_finite() || *rho < 0.0 || *rho >= 1.0 {
                    vec!["CRRA rho must lie in [0, 1)".into()]
                } else {
                    Vec::new()
                }
            }
            Self::Cara { alpha } => {
                if !alpha.is_finite() || *alpha <= 0.0 {
                    vec!["CARA alpha must be positive".into()]
                } else {
                    Vec::new()
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Upper bound regime for payoffs: the full-model bound `Y <= M` or the
/// state-by-state bound `Y <= X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FeasibilityMode {
    PayBoundM,
    PayBoundX,
}

/// Which party's objective the outer optimization maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Objective {
    Financier,
    Entrepreneur,
}

/// Complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: ProfitGrid,
    pub effort: EffortGrid,
    pub dist: ConditionalDistribution,
    pub tech: ManipulationTech,
    pub utility: Utility,
    /// Capital the entrepreneur must raise.
    #[serde(rename = "Q")]
    pub capital: f64,
    /// Market interest rate, the financier's opportunity cost is `(1+r)Q`.
    #[serde(rename = "marketRate")]
    pub market_rate: f64,
    /// Reservation utility of the entrepreneur.
    #[serde(rename = "outsideUtility")]
    pub outside_utility: f64,
    #[serde(rename = "feasibilityMode")]
    pub feasibility_mode: FeasibilityMode,
    pub objective: Objective,
}

impl Scenario {
    /// Upper payoff bound at grid index `j` under the scenario's
    /// feasibility mode.
    pub fn payoff_cap(&self, j: usize) -> f64 {
        match self.feasibility_mode {
            FeasibilityMode::PayBoundM => self.grid.max_profit(),
            FeasibilityMode::PayBoundX => self.grid.points[j],
        }
    }

    /// Financier's required return `(1+r)Q`.
    pub fn required_return(&self) -> f64 {
        (1.0 + self.market_rate) * self.capital
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let scenario: Scenario =
            serde_json::from_str(s).map_err(|e| ModelError::Parse(e.to_string()))?;
        let report = validate_scenario(&scenario);
        if report.ok {
            Ok(scenario)
        } else {
            Err(ModelError::Invalid(report.violations.join("; ")))
        }
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

// ---------------------------------------------------------------------------
// Contract
// ---------------------------------------------------------------------------

/// Payoff vector aligned with the profit grid: `y[j]` is paid when the
/// financier observes grid point `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub y: Vec<f64>,
}

impl Contract {
    pub fn new(y: Vec<f64>) -> Self {
        Self { y }
    }

    /// Limited liability plus the scenario's payoff cap, within tolerance.
    pub fn is_feasible(&self, s: &Scenario) -> bool {
        self.y.len() == s.grid.len()
            && self
                .y
                .iter()
                .enumerate()
                .all(|(j, &v)| v >= -PAYOFF_TOL && v <= s.payoff_cap(j) + PAYOFF_TOL)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Report-style validation result; never an error, never mutates input.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

/// Checks every structural invariant of a scenario and returns the list of
/// violations (with indices) and soft warnings.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    violations.extend(s.grid.issues());
    violations.extend(s.tech.issues());
    violations.extend(s.utility.issues());

    // effort grid
    if s.effort.levels.is_empty() {
        violations.push("effort grid is empty".into());
    }
    if s.effort.levels.len() != s.effort.costs.len() {
        violations.push(format!(
            "effort levels ({}) and costs ({}) differ in length",
            s.effort.levels.len(),
            s.effort.costs.len()
        ));
    }
    for i in 1..s.effort.levels.len() {
        if s.effort.levels[i] <= s.effort.levels[i - 1] {
            violations.push(format!(
                "effort levels not strictly increasing at index {i}"
            ));
        }
    }
    if s.effort.levels.first().is_some_and(|&e| e < 0.0) {
        violations.push("effort levels must be non-negative".into());
    }
    for (i, &c) in s.effort.costs.iter().enumerate() {
        let decreasing = i > 0 && c < s.effort.costs[i - 1] - PAYOFF_TOL;
        if !c.is_finite() || c < 0.0 || decreasing {
            violations.push(format!("cost not non-negative/non-decreasing at index {i}"));
        }
    }
    if s.effort.levels.first().is_some_and(|&e| e == 0.0)
        && s.effort.costs.first().is_some_and(|&c| c != 0.0)
    {
        violations.push("cost at zero effort must be zero".into());
    }
    if s.effort.levels.len() >= 3 {
        if s.effort.is_uniform() {
            for i in 1..s.effort.costs.len() - 1 {
                let second =
                    s.effort.costs[i + 1] - 2.0 * s.effort.costs[i] + s.effort.costs[i - 1];
                if second < -PAYOFF_TOL {
                    violations.push(format!("cost sequence not convex at index {i}"));
                }
            }
        } else {
            warnings.push("non-uniform effort grid: convexity check skipped".into());
        }
    }

    // distribution
    if s.dist.efforts() != s.effort.levels.len() {
        violations.push(format!(
            "distribution has {} rows but {} effort levels",
            s.dist.efforts(),
            s.effort.levels.len()
        ));
    }
    for (i, row) in s.dist.rows.iter().enumerate() {
        if row.len() != s.grid.len() {
            violations.push(format!(
                "row {i} has {} entries but grid has {} points",
                row.len(),
                s.grid.len()
            ));
            continue;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            violations.push(format!("row {i} not normalized (sums to {sum})"));
        }
        for (j, &p) in row.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                violations.push(format!("row {i} entry {j} is not a probability"));
            } else if p == 0.0 {
                if s.dist.allow_zeros {
                    warnings.push(format!("row {i} entry {j} is zero (relaxed support mode)"));
                } else {
                    violations.push(format!("row {i} entry {j} violates full support"));
                }
            }
        }
    }
    if s.dist.efforts() == s.effort.levels.len() && s.dist.outcomes() == s.grid.len() {
        for i in 1..s.dist.efforts() {
            let lo = s.dist.mean_profit(i - 1, &s.grid);
            let hi = s.dist.mean_profit(i, &s.grid);
            if hi <= lo + PROB_TOL {
                violations.push(format!(
                    "expected profit not strictly increasing between efforts {} and {i}",
                    i - 1
                ));
            }
        }
    }

    // financing parameters
    if !s.capital.is_finite() || s.capital < 0.0 {
        violations.push("required capital Q must be finite and >= 0".into());
    }
    if !s.market_rate.is_finite() || s.market_rate < 0.0 {
        violations.push("market rate must be finite and >= 0".into());
    }
    if !s.outside_utility.is_finite() {
        violations.push("outside utility must be finite".into());
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
        warnings,
    }
}
