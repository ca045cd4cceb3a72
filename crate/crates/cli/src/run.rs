//! Command implementations: each writes its artifacts under the
//! configured output directory, every file prefixed with the
//! configuration echo.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use poisson_bandit_core as core;
use poisson_bandit_core::{
    evaluate_exact, find_worst_prior, normalize_v2, residual_audit, simulate,
    simulate_prior_mixed, solve_linearized, solve_v1, solve_v2, LinearizedConfig, ParameterPoint,
    Prior, RecursionKind, Solution, SolverConfig,
};

use crate::config::{render_echo, Command, Recursion, RunConfig};

/// One diagnostic line per failure class.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
    Solver(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

fn solver_err(e: core::Error) -> CliError {
    CliError::Solver(e.to_string())
}

fn validation_err(e: core::Error) -> CliError {
    CliError::Validation(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// 12 significant digits, the precision every report uses.
fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

fn load_prior(config: &RunConfig) -> Result<Prior, CliError> {
    let path = config
        .prior_path
        .as_ref()
        .ok_or_else(|| CliError::Validation("prior_path is required".into()))?;
    Prior::parse(&read(path)?).map_err(validation_err)
}

fn load_grid(path: &Path) -> Result<Vec<ParameterPoint>, CliError> {
    let mut grid = Vec::new();
    for (i, raw) in read(path)?.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(CliError::Validation(format!(
                "{}: line {}: expected `lambda1 lambda2`",
                path.display(),
                i + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| {
                CliError::Validation(format!("{}: line {}: {e}", path.display(), i + 1))
            })
        };
        grid.push(ParameterPoint::new(parse(fields[0])?, parse(fields[1])?)
            .map_err(validation_err)?);
    }
    Ok(grid)
}

fn solver_config(config: &RunConfig) -> Result<SolverConfig, CliError> {
    SolverConfig::new(config.horizon_t, config.steps_n, config.xmax)
        .and_then(|c| c.with_tail_eps(config.tail_eps))
        .map_err(validation_err)
}

fn linearized_config(config: &RunConfig) -> Result<LinearizedConfig, CliError> {
    let mut lin = LinearizedConfig::new(config.horizon_t, config.steps_n, config.xmax)
        .and_then(|c| c.with_tail_eps(config.tail_eps))
        .map_err(validation_err)?;
    if let Some(t_floor) = config.t_floor {
        lin = lin.with_t_floor(t_floor).map_err(validation_err)?;
    }
    Ok(lin)
}

fn solve_with_recursion(
    prior: &Prior,
    config: &RunConfig,
    solver: &SolverConfig,
) -> Result<(Solution, RecursionKind), CliError> {
    match config.recursion {
        Recursion::V1 => solve_v1(prior, solver).map(|s| (s, RecursionKind::V1)),
        Recursion::V2 => solve_v2(prior, solver).map(|s| (s, RecursionKind::V2)),
    }
    .map_err(solver_err)
}

fn write_tables(
    dir: &Path,
    echo: &str,
    solution: &Solution,
    kind: RecursionKind,
) -> Result<(), CliError> {
    write(&dir.join("risk_table.txt"), &format!("{echo}{}", solution.risk.to_text()))?;
    write(
        &dir.join("strategy_table.txt"),
        &format!("{echo}{}", solution.strategy.to_text(kind)),
    )
}

pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", config.output_dir.display())))?;
    let echo = render_echo(config);
    let dir = config.output_dir.clone();

    match config.command {
        Command::Solve => {
            let prior = load_prior(config)?;
            let solver = solver_config(config)?;
            let (solution, kind) = solve_with_recursion(&prior, config, &solver)?;
            write_tables(&dir, &echo, &solution, kind)?;
            let summary = format!(
                "{echo}recursion = {}\nroot_risk = {}\ntruncation_budget = {}\n",
                kind.as_str(),
                sig(solution.root_risk),
                sig(solution.truncation_budget)
            );
            write(&dir.join("summary.txt"), &summary)?;
            Ok(vec![dir.join("risk_table.txt"), dir.join("strategy_table.txt"), dir.join("summary.txt")])
        }
        Command::Linearized => {
            let prior = load_prior(config)?;
            let lin = linearized_config(config)?;
            let solution = solve_linearized(&prior, &lin).map_err(solver_err)?;
            let audit = residual_audit(&solution.risk, &solution.strategy, &prior, &lin)
                .map_err(solver_err)?;
            write_tables(&dir, &echo, &solution, RecursionKind::Linearized)?;
            let summary = format!(
                "{echo}recursion = linearized\nroot_risk = {}\ntruncation_budget = {}\n\
                 residual_max_abs = {}\nresidual_states_checked = {}\nresidual_excluded_switch = {}\n",
                sig(solution.root_risk),
                sig(solution.truncation_budget),
                sig(audit.max_abs),
                audit.states_checked,
                audit.excluded_switch
            );
            write(&dir.join("summary.txt"), &summary)?;
            Ok(vec![dir.join("risk_table.txt"), dir.join("strategy_table.txt"), dir.join("summary.txt")])
        }
        Command::Evaluate => {
            let prior = load_prior(config)?;
            let solver = solver_config(config)?;
            let (solution, kind) = solve_with_recursion(&prior, config, &solver)?;
            let thetas: Vec<(ParameterPoint, f64)> = match config.theta {
                Some(theta) => vec![(theta, 1.0)],
                None => prior.atoms().to_vec(),
            };
            let mut csv = format!("{echo}theta1,theta2,mean,std_error,replications,seed\n");
            let mut weighted = 0.0;
            let mut budget_max = 0.0f64;
            for (theta, w) in &thetas {
                let exact = evaluate_exact(&solution.strategy, theta, &solver).map_err(solver_err)?;
                weighted += w * exact.regret;
                budget_max = budget_max.max(exact.truncation_budget);
                csv.push_str(&format!(
                    "{},{},{},0,0,{}\n",
                    theta.lambda1,
                    theta.lambda2,
                    sig(exact.regret),
                    config.seed
                ));
            }
            write(&dir.join("evaluate.csv"), &csv)?;
            let summary = format!(
                "{echo}recursion = {}\nprior_weighted_regret = {}\nroot_risk = {}\n\
                 max_truncation_budget = {}\n",
                kind.as_str(),
                sig(weighted),
                sig(solution.root_risk),
                sig(budget_max)
            );
            write(&dir.join("summary.txt"), &summary)?;
            Ok(vec![dir.join("evaluate.csv"), dir.join("summary.txt")])
        }
        Command::Simulate => {
            let prior = load_prior(config)?;
            let solver = solver_config(config)?;
            let (solution, kind) = solve_with_recursion(&prior, config, &solver)?;
            let mut csv = format!("{echo}theta1,theta2,mean,std_error,replications,seed\n");
            let mut summary = format!("{echo}recursion = {}\n", kind.as_str());
            match config.theta {
                Some(theta) => {
                    let est = simulate(
                        &solution.strategy,
                        &theta,
                        &solver,
                        config.replications,
                        config.seed,
                    )
                    .map_err(solver_err)?;
                    csv.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        theta.lambda1,
                        theta.lambda2,
                        sig(est.mean),
                        sig(est.std_error),
                        est.replications,
                        est.seed
                    ));
                    summary.push_str(&format!("clamp_rate = {}\n", sig(est.clamp_rate)));
                }
                None => {
                    for (theta, _) in prior.atoms() {
                        let est = simulate(
                            &solution.strategy,
                            theta,
                            &solver,
                            config.replications,
                            config.seed,
                        )
                        .map_err(solver_err)?;
                        csv.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            theta.lambda1,
                            theta.lambda2,
                            sig(est.mean),
                            sig(est.std_error),
                            est.replications,
                            est.seed
                        ));
                    }
                    let mixed = simulate_prior_mixed(
                        &solution.strategy,
                        &prior,
                        &solver,
                        config.replications,
                        config.seed,
                    )
                    .map_err(solver_err)?;
                    summary.push_str(&format!(
                        "prior_mixed_mean = {}\nprior_mixed_std_error = {}\nroot_risk = {}\nclamp_rate = {}\n",
                        sig(mixed.mean),
                        sig(mixed.std_error),
                        sig(solution.root_risk),
                        sig(mixed.clamp_rate)
                    ));
                }
            }
            write(&dir.join("simulate.csv"), &csv)?;
            write(&dir.join("summary.txt"), &summary)?;
            Ok(vec![dir.join("simulate.csv"), dir.join("summary.txt")])
        }
        Command::Minimax => {
            let grid_path = config
                .grid_path
                .as_ref()
                .ok_or_else(|| CliError::Validation("grid_path is required".into()))?;
            let grid = load_grid(grid_path)?;
            let solver = solver_config(config)?;
            let result = find_worst_prior(&grid, &solver, config.max_iterations, config.gap_tol)
                .map_err(solver_err)?;
            let json = serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Solver(format!("serializing game result: {e}")))?;
            write(&dir.join("minimax.json"), &format!("{echo}{json}\n"))?;
            Ok(vec![dir.join("minimax.json")])
        }
        Command::Audit => {
            let prior = load_prior(config)?;
            let solver = solver_config(config)?;
            let v1 = solve_v1(&prior, &solver).map_err(solver_err)?;
            let v2 = solve_v2(&prior, &solver).map_err(solver_err)?;
            let normalized = normalize_v2(&v2.risk, &prior).map_err(solver_err)?;
            let shape = solver.shape();
            let dt = solver.dt();
            let mut max_rel = 0.0f64;
            let mut compared = 0usize;
            for n in 0..=solver.steps {
                for s in shape.states_in_layer(n) {
                    let state = s.to_state(dt);
                    let marginal: f64 = prior
                        .atoms()
                        .iter()
                        .map(|(th, w)| w * core::likelihood(&state, th).unwrap_or(0.0))
                        .sum();
                    if marginal <= 1e-12 {
                        continue;
                    }
                    let a = v1.risk.value(s);
                    let b = normalized.risk.value(s);
                    let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
                    max_rel = max_rel.max(rel);
                    compared += 1;
                }
            }
            let root_rel = (v1.root_risk - v2.root_risk).abs()
                / v1.root_risk.abs().max(v2.root_risk.abs()).max(1e-300);
            let report = format!(
                "{echo}states_compared = {compared}\nmax_relative_discrepancy = {}\n\
                 root_risk_v1 = {}\nroot_risk_v2 = {}\nroot_relative_discrepancy = {}\n\
                 skipped_states = {}\n",
                sig(max_rel),
                sig(v1.root_risk),
                sig(v2.root_risk),
                sig(root_rel),
                normalized.skipped.len()
            );
            write(&dir.join("audit.txt"), &report)?;
            Ok(vec![dir.join("audit.txt")])
        }
    }
}
