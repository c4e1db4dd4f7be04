//! Python bindings: a `Scenario` class wrapping the core types plus
//! module-level helpers, all exchanging plain lists, tuples and dicts.

use contractlab::manipulation;
use contractlab::model::{self, Contract};
use contractlab::optimizer::{self, ContractFamily, Optimum, SolveError};
use contractlab::orders;
use contractlab::report::format_sig12;
use contractlab::sweeps::{self, SweepResult};
use contractlab::templates;
use contractlab::verify::{verify_theorems, TheoremCheck};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

/// Witness of a profitable deviation: (grid index, shift, gain).
type MpWitnessTuple = (usize, f64, f64);

fn solve_err(e: SolveError) -> PyErr {
    match e {
        SolveError::Infeasible(msg) => PyRuntimeError::new_err(format!("infeasible: {msg}")),
        SolveError::HypothesisFailed(msg) => {
            PyRuntimeError::new_err(format!("hypothesis failed: {msg}"))
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn family_by_name(name: &str, resolution: usize) -> PyResult<ContractFamily> {
    match name {
        "debt" => Ok(ContractFamily::Debt { resolution }),
        "bonus" => Ok(ContractFamily::Bonus {
            resolution,
            dprime_range: None,
        }),
        "gdebt" => Ok(ContractFamily::GeneralizedDebt { resolution }),
        "grid" => Ok(ContractFamily::FreeGrid { levels: resolution }),
        other => Err(PyValueError::new_err(format!(
            "unknown family '{other}' (expected debt, bonus, gdebt or grid)"
        ))),
    }
}

fn outcome_dict<'py>(
    py: Python<'py>,
    outcome: &optimizer::EquilibriumOutcome,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("effort", outcome.effort)?;
    d.set_item("effortIndex", outcome.effort_index)?;
    d.set_item("agentUtility", outcome.agent_utility)?;
    d.set_item("principalRevenue", outcome.principal_revenue)?;
    d.set_item("principalPayoff", outcome.principal_payoff)?;
    d.set_item("expectedWaste", outcome.expected_waste)?;
    d.set_item("irAgent", outcome.ir_agent)?;
    d.set_item("irFinancier", outcome.ir_financier)?;
    d.set_item("z", outcome.plan.z.clone())?;
    d.set_item("v", outcome.value_fn.v.clone())?;
    Ok(d)
}

fn optimum_dict<'py>(py: Python<'py>, opt: &Optimum) -> PyResult<Bound<'py, PyDict>> {
    let d = outcome_dict(py, &opt.outcome)?;
    d.set_item("y", opt.contract.y.clone())?;
    d.set_item("params", opt.params.clone())?;
    Ok(d)
}

fn row_dict<'py>(py: Python<'py>, row: &SweepResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("sweep_param", row.parameter)?;
    d.set_item("mp_utility", row.mp_utility)?;
    d.set_item("manip_utility", row.manip_utility)?;
    d.set_item("gap", row.gap)?;
    d.set_item("waste", row.expected_waste)?;
    d.set_item("middle_mass", row.middle_mass)?;
    d.set_item("effort_mp", row.effort_mp)?;
    d.set_item("effort_manip", row.effort_manip)?;
    Ok(d)
}

/// A complete problem instance, constructed from scenario JSON.
#[pyclass]
struct Scenario {
    inner: model::Scenario,
}

#[pymethods]
impl Scenario {
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        model::Scenario::from_json_str(json)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        model::Scenario::from_path(std::path::Path::new(path))
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    /// (ok, violations, warnings)
    fn validate(&self) -> (bool, Vec<String>, Vec<String>) {
        let report = model::validate_scenario(&self.inner);
        (report.ok, report.violations, report.warnings)
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid.points.clone()
    }

    #[getter]
    fn efforts(&self) -> Vec<f64> {
        self.inner.effort.levels.clone()
    }

    /// Manipulation cost of a shift, checked against the support bound.
    fn eval_cost(&self, z: f64) -> PyResult<f64> {
        model::eval_cost(&self.inner.tech, z, self.inner.grid.max_profit())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Stage-two solution for a payoff vector: (plan z, value function v).
    fn solve_manipulation(&self, y: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.check_len(&y)?;
        let (plan, value) =
            manipulation::solve_manipulation(&Contract::new(y), &self.inner.tech, &self.inner.grid);
        Ok((plan.z, value.v))
    }

    /// True plus None, or False plus the witnessing (index, shift, gain).
    fn is_manipulation_proof(&self, y: Vec<f64>) -> PyResult<(bool, Option<MpWitnessTuple>)> {
        self.check_len(&y)?;
        let (ok, witness) = manipulation::is_manipulation_proof(
            &Contract::new(y),
            &self.inner.tech,
            &self.inner.grid,
        );
        Ok((ok, witness.map(|w| (w.index, w.z, w.gain))))
    }

    /// (lo, hi, fosd, mlrp) for every effort pair.
    fn check_orders(&self) -> PyResult<Vec<(usize, usize, bool, bool)>> {
        let mut out = Vec::new();
        for hi in 1..self.inner.effort.len() {
            for lo in 0..hi {
                let fosd = orders::check_fosd(&self.inner.dist, lo, hi)
                    .map_err(|e| PyValueError::new_err(e.to_string()))?;
                let mlrp = orders::check_mlrp(&self.inner.dist, lo, hi)
                    .map_err(|e| PyValueError::new_err(e.to_string()))?;
                out.push((lo, hi, fosd.holds, mlrp.holds));
            }
        }
        Ok(out)
    }

    /// Full backward-induction evaluation of a payoff vector.
    fn evaluate<'py>(&self, py: Python<'py>, y: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        self.check_len(&y)?;
        let outcome = optimizer::evaluate_contract(&Contract::new(y), &self.inner);
        outcome_dict(py, &outcome)
    }

    /// Optimize a named family ("debt", "bonus", "gdebt", "grid") for the
    /// scenario's objective.
    #[pyo3(signature = (family, resolution = 33))]
    fn optimize<'py>(
        &self,
        py: Python<'py>,
        family: &str,
        resolution: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let fam = family_by_name(family, resolution)?;
        let opt = match self.inner.objective {
            model::Objective::Financier => optimizer::optimize_financier(&self.inner, &fam),
            model::Objective::Entrepreneur => optimizer::optimize_entrepreneur(&self.inner, &fam),
        }
        .map_err(solve_err)?;
        optimum_dict(py, &opt)
    }

    /// Exhaustive lattice search on tiny instances.
    #[pyo3(signature = (payoff_levels = 21))]
    fn brute_force_oracle<'py>(
        &self,
        py: Python<'py>,
        payoff_levels: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opt = optimizer::brute_force_oracle(&self.inner, payoff_levels).map_err(solve_err)?;
        optimum_dict(py, &opt)
    }

    /// Crossover sweep rows; uses the default q grid when none is given.
    #[pyo3(signature = (q_values = None))]
    fn sweep_q<'py>(
        &self,
        py: Python<'py>,
        q_values: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyList>> {
        let qs = q_values.unwrap_or_else(sweeps::default_q_grid);
        let rows = sweeps::run_crossover_sweep(&self.inner, &qs).map_err(solve_err)?;
        let list = PyList::empty(py);
        for row in &rows {
            list.append(row_dict(py, row)?)?;
        }
        Ok(list)
    }

    /// Steepness sweep; returns (rows, summary dict).
    #[pyo3(signature = (resolution = 8))]
    fn sweep_gamma<'py>(
        &self,
        py: Python<'py>,
        resolution: usize,
    ) -> PyResult<(Bound<'py, PyList>, Bound<'py, PyDict>)> {
        let bonus = ContractFamily::Bonus {
            resolution,
            dprime_range: None,
        };
        let out = sweeps::run_steepness_sweep(&self.inner, &sweeps::default_gamma_grid(), &bonus)
            .map_err(solve_err)?;
        let list = PyList::empty(py);
        for row in &out.rows {
            list.append(row_dict(py, row)?)?;
        }
        let summary = PyDict::new(py);
        summary.set_item("e_mp", out.e_mp)?;
        summary.set_item("e_2nd", out.e_second)?;
        summary.set_item("bonus_params", out.bonus_params.clone())?;
        summary.set_item("debt_params", out.debt_params.clone())?;
        summary.set_item("mass_non_increasing", out.mass_non_increasing)?;
        summary.set_item("waste_non_increasing", out.waste_non_increasing)?;
        summary.set_item("final_waste", out.final_waste)?;
        summary.set_item("top_gap", out.top_gap)?;
        summary.set_item("domination_margin", out.domination_margin)?;
        Ok((list, summary))
    }

    /// Seeded verification suites; returns the JSON report.
    #[pyo3(signature = (which = "all", trials = 100, seed = 42))]
    fn verify(&self, which: &str, trials: usize, seed: u64) -> PyResult<String> {
        let checks: Vec<TheoremCheck> = if which.eq_ignore_ascii_case("all") {
            TheoremCheck::ALL.to_vec()
        } else {
            which
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<TheoremCheck>()
                        .map_err(PyValueError::new_err)
                })
                .collect::<PyResult<_>>()?
        };
        Ok(verify_theorems(&self.inner, &checks, trials, seed).to_json())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(points={}, efforts={}, objective={:?})",
            self.inner.grid.len(),
            self.inner.effort.len(),
            self.inner.objective
        )
    }
}

impl Scenario {
    fn check_len(&self, y: &[f64]) -> PyResult<()> {
        if y.len() != self.inner.grid.len() {
            return Err(PyValueError::new_err(format!(
                "contract has {} payoffs but the grid has {} points",
                y.len(),
                self.inner.grid.len()
            )));
        }
        Ok(())
    }
}

/// Running maximum from the left.
#[pyfunction]
fn monotone_envelope(y: Vec<f64>) -> Vec<f64> {
    manipulation::monotone_envelope(&Contract::new(y)).y
}

/// Exponential-tilt family rows over the given grid points and efforts.
#[pyfunction]
#[pyo3(signature = (points, levels, tilt, base_weights = None))]
fn make_mlrp_family(
    points: Vec<f64>,
    levels: Vec<f64>,
    tilt: f64,
    base_weights: Option<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let grid = model::ProfitGrid::new(points).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let costs = vec![0.0; levels.len()];
    let effort = model::EffortGrid { levels, costs };
    orders::make_mlrp_family(&grid, &effort, tilt, base_weights.as_deref())
        .map(|d| d.rows)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Twelve-significant-digit rendering used by the report files.
#[pyfunction]
fn format_sig(v: f64) -> String {
    format_sig12(v)
}

#[pyfunction]
fn default_q_grid() -> Vec<f64> {
    sweeps::default_q_grid()
}

#[pyfunction]
fn crossover_template_json() -> String {
    templates::crossover_template().to_json_string()
}

#[pyfunction]
fn steepness_scenario_json() -> String {
    templates::steepness_scenario().to_json_string()
}

#[pymodule]
fn contractlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(monotone_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(make_mlrp_family, m)?)?;
    m.add_function(wrap_pyfunction!(format_sig, m)?)?;
    m.add_function(wrap_pyfunction!(default_q_grid, m)?)?;
    m.add_function(wrap_pyfunction!(crossover_template_json, m)?)?;
    m.add_function(wrap_pyfunction!(steepness_scenario_json, m)?)?;
    Ok(())
}
