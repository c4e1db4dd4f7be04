//! Command-line front end: stochastic-order checks, manipulation-stage
//! solving, contract optimization, the two paper sweeps and the theorem
//! verification harness.
//!
//! Exit codes: 0 on success, 1 when a problem is infeasible or an
//! experiment hypothesis fails, 2 on I/O or validation errors.

use clap::{Args, Parser, Subcommand};
use contractlab::manipulation::solve_manipulation;
use contractlab::model::{Contract, Scenario};
use contractlab::optimizer::{
    evaluate_contract, optimize_entrepreneur, optimize_financier, ContractFamily, Optimum,
    SolveError,
};
use contractlab::orders::{check_fosd, check_mlrp, OrderWitness};
use contractlab::report::{emit_report, format_sig12, to_csv, to_json, ReportFormat};
use contractlab::sweeps::{
    crossover_qstar, default_gamma_grid, default_q_grid, run_crossover_sweep, run_steepness_sweep,
    SweepResult,
};
use contractlab::verify::{verify_theorems, TheoremCheck};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "contractlab",
    version,
    about = "contract design under two-stage moral hazard"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario JSON file (positional).
    scenario_pos: Option<PathBuf>,
    /// Scenario JSON file (flag form).
    #[arg(long)]
    scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn load(&self) -> Result<Scenario, CliError> {
        let path = self
            .scenario
            .as_ref()
            .or(self.scenario_pos.as_ref())
            .ok_or_else(|| CliError::usage("a scenario file is required"))?;
        Scenario::from_path(path).map_err(CliError::from_model)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check stochastic orders between all effort pairs of a scenario.
    CheckOrders(CheckOrdersCmd),
    /// Solve the manipulation stage of one contract and dump (x, y, z, v).
    SolveManipulation(SolveManipulationCmd),
    /// Optimize a contract family for the scenario's objective.
    Optimize(OptimizeCmd),
    /// Crossover sweep in the middle-state probability q.
    SweepQ(SweepQCmd),
    /// Steepness sweep in the convexity parameter gamma.
    SweepGamma(SweepGammaCmd),
    /// Run seeded theorem-verification suites.
    Verify(VerifyCmd),
}

#[derive(Args)]
struct CheckOrdersCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
}

#[derive(Args)]
struct SolveManipulationCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Comma-separated payoffs aligned with the grid.
    #[arg(long)]
    payoffs: Option<String>,
    /// JSON file with {"y": [...]}.
    #[arg(long)]
    contract: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Contract family to sweep.
    #[arg(long, value_parser = ["debt", "bonus", "gdebt", "grid"])]
    family: String,
    /// Parameter grid resolution (lattice levels for the free grid).
    #[arg(long, default_value_t = 33)]
    resolution: usize,
    /// Write the optimal contract as JSON here (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the sweep surface (parameters, objective, feasibility) as CSV.
    #[arg(long)]
    sweep_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepQCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Comma-separated q values (defaults to the 40-point log grid).
    #[arg(long)]
    q_values: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct SweepGammaCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Largest exponent k in the grid 2^0..2^k.
    #[arg(long, default_value_t = 20)]
    max_exp: i32,
    /// Bonus family resolution.
    #[arg(long, default_value_t = 8)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct VerifyCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// "all" or a comma-separated subset of
    /// Lemma1,Lemma2,Lemma3,Lemma5,Thm4,Thm6,Cor7,Thm8.
    #[arg(long, default_value = "all")]
    which: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(msg: &str) -> Self {
        Self {
            message: msg.to_string(),
            code: 2,
        }
    }

    fn from_model(e: contractlab::model::ModelError) -> Self {
        Self {
            message: e.to_string(),
            code: 2,
        }
    }

    fn from_solve(e: SolveError) -> Self {
        let code = match e {
            SolveError::Infeasible(_) | SolveError::HypothesisFailed(_) => 1,
            _ => 2,
        };
        Self {
            message: e.to_string(),
            code,
        }
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Self {
            message: e.to_string(),
            code: 2,
        }
    }
}

fn write_or_print(path: &Option<PathBuf>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn witness_text(w: &Option<OrderWitness>) -> String {
    match w {
        None => "-".into(),
        Some(OrderWitness::SurvivalViolation {
            index,
            lo_survival,
            hi_survival,
        }) => {
            format!("survival violated at index {index} (lo {lo_survival:.6}, hi {hi_survival:.6})")
        }
        Some(OrderWitness::CrossProduct {
            lower,
            upper,
            lhs,
            rhs,
        }) => {
            format!("cross-product violated at pair ({lower}, {upper}): {lhs:.6} < {rhs:.6}")
        }
        Some(OrderWitness::StrictSite { index, .. }) => format!("strict site at index {index}"),
        Some(OrderWitness::NoStrictSite) => "no strict site".into(),
    }
}

fn cmd_check_orders(cmd: &CheckOrdersCmd) -> Result<(), CliError> {
    let s = cmd.scenario.load()?;
    println!("pair      FOSD   MLRP   witness");
    for hi in 1..s.effort.len() {
        for lo in 0..hi {
            let fosd = check_fosd(&s.dist, lo, hi).map_err(|e| CliError::usage(&e.to_string()))?;
            let mlrp = check_mlrp(&s.dist, lo, hi).map_err(|e| CliError::usage(&e.to_string()))?;
            let witness = if !mlrp.holds {
                witness_text(&mlrp.witness)
            } else {
                witness_text(&fosd.witness)
            };
            println!(
                "({lo}, {hi})    {:<6} {:<6} {witness}",
                fosd.holds, mlrp.holds
            );
        }
    }
    Ok(())
}

fn parse_payoffs(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::usage(&format!("bad payoff '{t}': {e}")))
        })
        .collect()
}

fn cmd_solve_manipulation(cmd: &SolveManipulationCmd) -> Result<(), CliError> {
    let s = cmd.scenario.load()?;
    let y = if let Some(text) = &cmd.payoffs {
        parse_payoffs(text)?
    } else if let Some(path) = &cmd.contract {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::usage(&e.to_string()))?;
        value["y"]
            .as_array()
            .ok_or_else(|| CliError::usage("contract file needs a \"y\" array"))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| CliError::usage("payoffs must be numbers"))
            })
            .collect::<Result<Vec<f64>, CliError>>()?
    } else {
        return Err(CliError::usage("provide --payoffs or --contract"));
    };
    if y.len() != s.grid.len() {
        return Err(CliError::usage(&format!(
            "contract has {} payoffs but the grid has {} points",
            y.len(),
            s.grid.len()
        )));
    }
    let contract = Contract::new(y);
    let (plan, value) = solve_manipulation(&contract, &s.tech, &s.grid);
    let mut body = String::from("x,y,z,v\n");
    for j in 0..s.grid.len() {
        body.push_str(&format!(
            "{},{},{},{}\n",
            format_sig12(s.grid.points[j]),
            format_sig12(contract.y[j]),
            format_sig12(plan.z[j]),
            format_sig12(value.v[j]),
        ));
    }
    write_or_print(&cmd.out, &body)
}

fn family_from_name(name: &str, resolution: usize) -> ContractFamily {
    match name {
        "debt" => ContractFamily::Debt { resolution },
        "bonus" => ContractFamily::Bonus {
            resolution,
            dprime_range: None,
        },
        "gdebt" => ContractFamily::GeneralizedDebt { resolution },
        _ => ContractFamily::FreeGrid { levels: resolution },
    }
}

fn optimum_json(opt: &Optimum) -> String {
    let y: Vec<String> = opt.contract.y.iter().map(|v| format_sig12(*v)).collect();
    let params: Vec<String> = opt.params.iter().map(|v| format_sig12(*v)).collect();
    format!(
        "{{\n  \"y\": [{}],\n  \"params\": [{}],\n  \"effort\": {},\n  \"agentUtility\": {},\n  \"principalRevenue\": {},\n  \"principalPayoff\": {},\n  \"expectedWaste\": {},\n  \"irAgent\": {},\n  \"irFinancier\": {}\n}}\n",
        y.join(", "),
        params.join(", "),
        format_sig12(opt.outcome.effort),
        format_sig12(opt.outcome.agent_utility),
        format_sig12(opt.outcome.principal_revenue),
        format_sig12(opt.outcome.principal_payoff),
        format_sig12(opt.outcome.expected_waste),
        opt.outcome.ir_agent,
        opt.outcome.ir_financier,
    )
}

fn cmd_optimize(cmd: &OptimizeCmd) -> Result<(), CliError> {
    let s = cmd.scenario.load()?;
    let family = family_from_name(&cmd.family, cmd.resolution);

    if let Some(path) = &cmd.sweep_csv {
        let mut body = String::from("params,objective,feasible\n");
        let members = family.members(&s).map_err(CliError::from_solve)?;
        for member in members {
            if !member.contract.is_feasible(&s) {
                continue;
            }
            let outcome = evaluate_contract(&member.contract, &s);
            let (objective, feasible) = match s.objective {
                contractlab::model::Objective::Financier => {
                    (outcome.principal_payoff, outcome.ir_agent)
                }
                contractlab::model::Objective::Entrepreneur => {
                    (outcome.agent_utility, outcome.ir_financier)
                }
            };
            let params: Vec<String> = member.params.iter().map(|v| format_sig12(*v)).collect();
            body.push_str(&format!(
                "{},{},{}\n",
                params.join(";"),
                format_sig12(objective),
                feasible
            ));
        }
        std::fs::write(path, body)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    }

    let optimum = match s.objective {
        contractlab::model::Objective::Financier => optimize_financier(&s, &family),
        contractlab::model::Objective::Entrepreneur => optimize_entrepreneur(&s, &family),
    }
    .map_err(CliError::from_solve)?;
    write_or_print(&cmd.out, &optimum_json(&optimum))
}

fn emit_rows(rows: &[SweepResult], out: &Option<PathBuf>, format: &str) -> Result<(), CliError> {
    let format: ReportFormat = format.parse().map_err(|e: String| CliError::usage(&e))?;
    match out {
        Some(path) => emit_report(rows, Path::new(path), format).map_err(CliError::io),
        None => {
            let body = match format {
                ReportFormat::Csv => to_csv(rows),
                ReportFormat::Json => to_json(rows),
            };
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_sweep_q(cmd: &SweepQCmd) -> Result<(), CliError> {
    let s = cmd.scenario.load()?;
    let qs = match &cmd.q_values {
        Some(text) => parse_payoffs(text)?,
        None => default_q_grid(),
    };
    let rows = run_crossover_sweep(&s, &qs).map_err(CliError::from_solve)?;
    emit_rows(&rows, &cmd.out, &cmd.format)?;
    match crossover_qstar(&rows) {
        Some(qstar) => eprintln!("q* = {qstar} (largest q with gap > 1e-6)"),
        None => eprintln!("no q with a positive domination gap"),
    }
    Ok(())
}

fn cmd_sweep_gamma(cmd: &SweepGammaCmd) -> Result<(), CliError> {
    let s = cmd.scenario.load()?;
    let gammas: Vec<f64> = if cmd.max_exp == 20 {
        default_gamma_grid()
    } else {
        (0..=cmd.max_exp).map(|k| (2.0f64).powi(k)).collect()
    };
    let bonus = ContractFamily::Bonus {
        resolution: cmd.resolution,
        dprime_range: None,
    };
    let outcome = run_steepness_sweep(&s, &gammas, &bonus).map_err(CliError::from_solve)?;
    emit_rows(&outcome.rows, &cmd.out, &cmd.format)?;
    eprintln!(
        "e_mp = {}, e_2nd = {}, bonus (d', beta) = ({}, {}), mass non-increasing: {}, \
         waste non-increasing: {}, final waste = {}, top gap = {}, domination margin = {}",
        outcome.e_mp,
        outcome.e_second,
        format_sig12(outcome.bonus_params[0]),
        format_sig12(outcome.bonus_params[1]),
        outcome.mass_non_increasing,
        outcome.waste_non_increasing,
        format_sig12(outcome.final_waste),
        format_sig12(outcome.top_gap),
        format_sig12(outcome.domination_margin),
    );
    Ok(())
}

fn cmd_verify(cmd: &VerifyCmd) -> Result<(), CliError> {
    let s = cmd.scenario.load()?;
    let which: Vec<TheoremCheck> = if cmd.which.eq_ignore_ascii_case("all") {
        TheoremCheck::ALL.to_vec()
    } else {
        cmd.which
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<TheoremCheck>()
                    .map_err(|e| CliError::usage(&e))
            })
            .collect::<Result<_, _>>()?
    };
    let report = verify_theorems(&s, &which, cmd.trials, cmd.seed);
    for entry in &report.entries {
        println!(
            "{:<8} trials {:<6} passes {:<6} failures {}",
            entry.name, entry.trials, entry.passes, entry.failures
        );
    }
    if let Some(path) = &cmd.out {
        std::fs::write(path, report.to_json())
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::CheckOrders(cmd) => cmd_check_orders(cmd),
        Command::SolveManipulation(cmd) => cmd_solve_manipulation(cmd),
        Command::Optimize(cmd) => cmd_optimize(cmd),
        Command::SweepQ(cmd) => cmd_sweep_q(cmd),
        Command::SweepGamma(cmd) => cmd_sweep_gamma(cmd),
        Command::Verify(cmd) => cmd_verify(cmd),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
