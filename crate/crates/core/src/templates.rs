//! Burned-in experiment templates. The numbers are calibrated so the
//! default runs exercise the interesting regimes: the crossover template
//! admits a band of small `q` where only the manipulation contract can
//! implement the high effort, and the steepness scenario has a strictly
//! higher ex-ante-only benchmark effort than the debt benchmark.

use crate::model::{
    ConditionalDistribution, EffortGrid, FeasibilityMode, ManipulationTech, Objective, ProfitGrid,
    Scenario, Utility,
};
use crate::orders::make_mlrp_family;
use crate::sweeps::table2_rows;

/// Three-state, two-effort template for the crossover sweep in `q`.
///
/// The distribution rows are the `q`-family placeholders at `q = 0.1`;
/// the sweep replaces them per parameter value. The effort-cost gap sits
/// just above the truthful construction's maximal incentive power at the
/// smallest swept `q`, and just below the manipulation construction's.
pub fn crossover_template() -> Scenario {
    Scenario {
        grid: ProfitGrid::new(vec![1.0, 1.01, 2.81]).expect("static grid"),
        effort: EffortGrid {
            levels: vec![0.0, 1.0],
            costs: vec![0.0, CROSSOVER_EFFORT_COST],
        },
        dist: ConditionalDistribution::new(table2_rows(0.1)),
        tech: ManipulationTech::ConvexPower { gamma: 0.06 },
        utility: Utility::Crra { rho: 0.9 },
        capital: 0.8155,
        market_rate: 0.0,
        outside_utility: 0.0,
        feasibility_mode: FeasibilityMode::PayBoundM,
        objective: Objective::Entrepreneur,
    }
}

/// High-effort cost of the crossover template.
pub const CROSSOVER_EFFORT_COST: f64 = 3.5477;

/// Likelihood-ratio-ordered scenario for the steepness sweep in `gamma`.
pub fn steepness_scenario() -> Scenario {
    let grid = ProfitGrid::new((0..9).map(|i| 0.5 * i as f64).collect()).expect("static grid");
    let effort = EffortGrid {
        levels: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        costs: vec![0.0, 0.05, 0.15, 0.31, 0.48],
    };
    let dist = make_mlrp_family(&grid, &effort, 3.0, None).expect("static family");
    Scenario {
        grid,
        effort,
        dist,
        tech: ManipulationTech::ConvexPower { gamma: 1.0 },
        utility: Utility::RiskNeutral,
        capital: 1.52,
        market_rate: 0.0,
        outside_utility: 0.0,
        feasibility_mode: FeasibilityMode::PayBoundX,
        objective: Objective::Entrepreneur,
    }
}
