//! First-order stochastic dominance and likelihood-ratio order checks on
//! conditional distributions, with witnesses, plus a generator of
//! likelihood-ratio-ordered families for experiments.
//!
//! The likelihood-ratio check uses the cross-product form
//! `f(y|e) f(x|e') >= f(y|e') f(x|e)` for `x > y`, which needs no division
//! and therefore honours the `a/0 = inf` convention for zero cells.

use crate::model::{ConditionalDistribution, EffortGrid, ProfitGrid, PROB_TOL};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrdersError {
    #[error("effort indices ({lo}, {hi}) invalid for {count} rows (need lo < hi)")]
    BadIndices { lo: usize, hi: usize, count: usize },
    #[error("tilt must be positive, got {0}")]
    BadTilt(f64),
    #[error("overflow guard: tilt * e_max = {0} must stay below 700")]
    Overflow(f64),
    #[error("base weights must be positive and aligned with the grid")]
    BadWeights,
}

/// Where an order check succeeded or failed.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderWitness {
    /// Survival-function dominance fails at this grid index.
    SurvivalViolation {
        index: usize,
        lo_survival: f64,
        hi_survival: f64,
    },
    /// Cross-product inequality fails for this grid index pair.
    CrossProduct {
        lower: usize,
        upper: usize,
        lhs: f64,
        rhs: f64,
    },
    /// Site backing the strict part of a dominance result.
    StrictSite {
        index: usize,
        lo_survival: f64,
        hi_survival: f64,
    },
    /// The weak order holds everywhere with equality; no strict site.
    NoStrictSite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub holds: bool,
    pub strict_somewhere: bool,
    pub witness: Option<OrderWitness>,
}

fn check_indices(dist: &ConditionalDistribution, lo: usize, hi: usize) -> Result<(), OrdersError> {
    if lo >= hi || hi >= dist.efforts() {
        return Err(OrdersError::BadIndices {
            lo,
            hi,
            count: dist.efforts(),
        });
    }
    Ok(())
}

/// First-order stochastic dominance of effort row `hi` over row `lo`:
/// the survival function of the higher effort dominates everywhere, with
/// strict dominance somewhere.
pub fn check_fosd(
    dist: &ConditionalDistribution,
    lo: usize,
    hi: usize,
) -> Result<OrderReport, OrdersError> {
    check_indices(dist, lo, hi)?;
    let n = dist.outcomes();
    let mut s_lo = 1.0;
    let mut s_hi = 1.0;
    let mut strict: Option<(usize, f64, f64)> = None;
    // survival values P[X > x_j] for j = 0..n-1; the last is 0 for both rows
    for j in 0..n {
        s_lo -= dist.rows[lo][j];
        s_hi -= dist.rows[hi][j];
        if s_hi < s_lo - PROB_TOL {
            return Ok(OrderReport {
                holds: false,
                strict_somewhere: strict.is_some(),
                witness: Some(OrderWitness::SurvivalViolation {
                    index: j,
                    lo_survival: s_lo,
                    hi_survival: s_hi,
                }),
            });
        }
        if strict.is_none() && s_hi > s_lo + PROB_TOL {
            strict = Some((j, s_lo, s_hi));
        }
    }
    match strict {
        Some((index, lo_survival, hi_survival)) => Ok(OrderReport {
            holds: true,
            strict_somewhere: true,
            witness: Some(OrderWitness::StrictSite {
                index,
                lo_survival,
                hi_survival,
            }),
        }),
        None => Ok(OrderReport {
            holds: false,
            strict_somewhere: false,
            witness: Some(OrderWitness::NoStrictSite),
        }),
    }
}

/// Weak likelihood-ratio order between effort rows `lo < hi` via the
/// cross-product condition over all grid point pairs.
pub fn check_mlrp(
    dist: &ConditionalDistribution,
    lo: usize,
    hi: usize,
) -> Result<OrderReport, OrdersError> {
    check_indices(dist, lo, hi)?;
    let n = dist.outcomes();
    let mut strict = false;
    for upper in 1..n {
        for lower in 0..upper {
            let lhs = dist.rows[lo][lower] * dist.rows[hi][upper];
            let rhs = dist.rows[lo][upper] * dist.rows[hi][lower];
            if lhs < rhs - PROB_TOL {
                return Ok(OrderReport {
                    holds: false,
                    strict_somewhere: strict,
                    witness: Some(OrderWitness::CrossProduct {
                        lower,
                        upper,
                        lhs,
                        rhs,
                    }),
                });
            }
            if lhs > rhs + PROB_TOL {
                strict = true;
            }
        }
    }
    Ok(OrderReport {
        holds: true,
        strict_somewhere: strict,
        witness: None,
    })
}

/// Strict likelihood-ratio order: every cross-product strictly greater.
pub fn check_mlrp_strict(
    dist: &ConditionalDistribution,
    lo: usize,
    hi: usize,
) -> Result<OrderReport, OrdersError> {
    check_indices(dist, lo, hi)?;
    let n = dist.outcomes();
    for upper in 1..n {
        for lower in 0..upper {
            let lhs = dist.rows[lo][lower] * dist.rows[hi][upper];
            let rhs = dist.rows[lo][upper] * dist.rows[hi][lower];
            if lhs <= rhs + PROB_TOL {
                return Ok(OrderReport {
                    holds: false,
                    strict_somewhere: false,
                    witness: Some(OrderWitness::CrossProduct {
                        lower,
                        upper,
                        lhs,
                        rhs,
                    }),
                });
            }
        }
    }
    Ok(OrderReport {
        holds: true,
        strict_somewhere: true,
        witness: None,
    })
}

/// The implication `likelihood-ratio order => stochastic dominance`,
/// evaluated as a boolean on the given effort pair.
pub fn check_mlrp_implies_fosd(
    dist: &ConditionalDistribution,
    lo: usize,
    hi: usize,
) -> Result<bool, OrdersError> {
    let mlrp = check_mlrp(dist, lo, hi)?;
    if !mlrp.holds {
        return Ok(true);
    }
    Ok(check_fosd(dist, lo, hi)?.holds)
}

/// Monotone likelihood ratio via the ratio sequence `f(x_j|hi)/f(x_j|lo)`;
/// valid only on strictly positive rows. Internal oracle for the
/// cross-product implementation.
pub fn likelihood_ratio_monotone(
    dist: &ConditionalDistribution,
    lo: usize,
    hi: usize,
) -> Result<bool, OrdersError> {
    check_indices(dist, lo, hi)?;
    let ratios: Vec<f64> = dist.rows[hi]
        .iter()
        .zip(&dist.rows[lo])
        .map(|(h, l)| h / l)
        .collect();
    Ok(ratios.windows(2).all(|w| w[1] >= w[0] - PROB_TOL))
}

/// Exponential-tilt family: row for effort `e` proportional to
/// `base[j] * exp(tilt * e * x_j / M)`. Strictly likelihood-ratio ordered
/// for `tilt > 0`.
pub fn make_mlrp_family(
    grid: &ProfitGrid,
    effort_grid: &EffortGrid,
    tilt: f64,
    base_weights: Option<&[f64]>,
) -> Result<ConditionalDistribution, OrdersError> {
    if !tilt.is_finite() || tilt <= 0.0 {
        return Err(OrdersError::BadTilt(tilt));
    }
    let e_max = *effort_grid.levels.last().expect("non-empty effort grid");
    if tilt * e_max >= 700.0 {
        return Err(OrdersError::Overflow(tilt * e_max));
    }
    let n = grid.len();
    let base: Vec<f64> = match base_weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return Err(OrdersError::BadWeights);
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let m = grid.max_profit();
    let rows = effort_grid
        .levels
        .iter()
        .map(|&e| {
            let raw: Vec<f64> = grid
                .points
                .iter()
                .zip(&base)
                .map(|(&x, &w)| w * (tilt * e * x / m).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    Ok(ConditionalDistribution::new(rows))
}

/// Discrete second divided differences of the CDF ratio `G_j / F_j`
/// between two effort rows; a non-negative sequence is the discrete
/// counterpart of the convexity criterion for the likelihood-ratio order.
/// Diagnostic only; requires full support.
pub fn cdf_ratio_second_differences(
    dist: &ConditionalDistribution,
    lo: usize,
    hi: usize,
    grid: &ProfitGrid,
) -> Result<Vec<f64>, OrdersError> {
    check_indices(dist, lo, hi)?;
    let n = dist.outcomes();
    let mut f = 0.0;
    let mut g = 0.0;
    let mut ratio = Vec::with_capacity(n);
    for j in 0..n {
        f += dist.rows[lo][j];
        g += dist.rows[hi][j];
        ratio.push(g / f);
    }
    let mut out = Vec::new();
    for j in 1..n.saturating_sub(1) {
        let left = (ratio[j] - ratio[j - 1]) / (grid.points[j] - grid.points[j - 1]);
        let right = (ratio[j + 1] - ratio[j]) / (grid.points[j + 1] - grid.points[j]);
        out.push(right - left);
    }
    Ok(out)
}
