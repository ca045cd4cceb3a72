//! Worst-case prior search on a finite parameter grid. The Bayesian risk
//! is concave in the prior, and for a fixed strategy the risk is linear
//! in the prior weights, so conditional-gradient ascent applies: each
//! iteration solves for the Bayesian strategy, evaluates its exact
//! regret at every grid point (the linearization), and steps toward the
//! maximizing vertex of the simplex.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluate::evaluate_exact;
use crate::model::{ParameterPoint, Prior};
use crate::solver::{solve_v2, SolverConfig};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationRecord {
    pub iteration: u32,
    /// Best lower certificate so far: Bayesian risk of some iterate prior.
    pub lower_bound: f64,
    /// Best upper certificate so far: worst-case exact regret of some
    /// iterate strategy.
    pub upper_bound: f64,
}

/// Certified approximation of the grid minimax risk.
#[derive(Debug, Clone, Serialize)]
pub struct GameResult {
    pub grid: Vec<ParameterPoint>,
    pub worst_prior: Prior,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub iterations: u32,
    pub history: Vec<IterationRecord>,
}

/// Frank-Wolfe ascent on the concave map prior -> Bayesian risk, started
/// from the uniform prior, step 2/(k+2). Every iterate yields a valid
/// lower bound (its Bayesian risk). Upper bounds come from two
/// certificates, both valid for the randomized-strategy game value: the
/// iterate strategy's worst-case regret over the grid, and the worst-case
/// regret of the uniform mixture of all iterate strategies (regret is
/// linear in the mixture, so the per-point regrets just average). The
/// mixture certificate is essential: in these discrete games no pure
/// strategy equalizes the grid points, so per-iterate certificates alone
/// stall at a positive gap. The returned bounds are the best of each side.
pub fn find_worst_prior(
    grid: &[ParameterPoint],
    config: &SolverConfig,
    max_iterations: u32,
    gap_tol: f64,
) -> Result<GameResult> {
    if grid.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            if grid[i] == grid[j] {
                return Err(Error::Config(format!(
                    "grid points {i} and {j} coincide at ({}, {})",
                    grid[i].lambda1, grid[i].lambda2
                )));
            }
        }
    }
    if max_iterations == 0 {
        return Err(Error::Config("max_iterations must be positive".into()));
    }
    if !gap_tol.is_finite() || gap_tol < 0.0 {
        return Err(Error::Config(format!("gap_tol must be non-negative, got {gap_tol}")));
    }
    let max_rate = grid.iter().map(ParameterPoint::max_rate).fold(0.0, f64::max);
    config.validate_for_rate(max_rate)?;

    let n = grid.len();
    let mut weights = vec![1.0 / n as f64; n];
    let mut best_lower = f64::NEG_INFINITY;
    let mut best_upper = f64::INFINITY;
    let mut best_weights = weights.clone();
    let mut regret_sums = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for k in 1..=max_iterations {
        iterations = k;
        let prior = Prior::with_tolerance(
            grid.iter().copied().zip(weights.iter().copied()).collect(),
            1e-9,
        )?;
        let sol = solve_v2(&prior, config)?;
        if sol.root_risk > best_lower {
            best_lower = sol.root_risk;
            best_weights = weights.clone();
        }

        let regrets: Vec<f64> = grid
            .iter()
            .map(|theta| evaluate_exact(&sol.strategy, theta, config).map(|e| e.regret))
            .collect::<Result<_>>()?;
        let (argmax, worst_regret) = regrets
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        for (sum, r) in regret_sums.iter_mut().zip(&regrets) {
            *sum += r;
        }
        let mixture_worst = regret_sums
            .iter()
            .map(|sum| sum / f64::from(k))
            .fold(f64::NEG_INFINITY, f64::max);
        best_upper = best_upper.min(worst_regret).min(mixture_worst);

        history.push(IterationRecord {
            iteration: k,
            lower_bound: best_lower,
            upper_bound: best_upper,
        });
        if best_upper - best_lower <= gap_tol {
            break;
        }

        let gamma = 2.0 / (f64::from(k) + 2.0);
        for (i, w) in weights.iter_mut().enumerate() {
            *w *= 1.0 - gamma;
            if i == argmax {
                *w += gamma;
            }
        }
    }

    let worst_prior = Prior::with_tolerance(
        grid.iter().copied().zip(best_weights.iter().copied()).collect(),
        1e-9,
    )?;
    Ok(GameResult {
        grid: grid.to_vec(),
        worst_prior,
        lower_bound: best_lower,
        upper_bound: best_upper,
        iterations,
        history,
    })
}
