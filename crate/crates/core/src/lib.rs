//! Solvers for the continuous-time Poissonian two-armed bandit: Bayesian
//! piece-wise constant strategies by backward induction (two equivalent
//! recursions), a first-order small-step scheme with a residual audit of
//! its limiting differential equation, exact and Monte Carlo strategy
//! evaluation, and worst-case prior search approximating the minimax
//! risk on a finite grid.

pub mod error;
pub mod evaluate;
pub mod lattice;
pub mod linearized;
pub mod minimax;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use evaluate::{
    constant_strategy, evaluate_exact, simulate, simulate_prior_mixed, simulate_trajectory,
    ExactRegret, RegretEstimate, Trajectory,
};
pub use lattice::{LatticeState, RecursionKind, RiskTable, StrategyTable, TableShape};
pub use linearized::{
    pde_residual, residual_audit, solve_linearized, LinearizedConfig, ResidualAudit,
};
pub use minimax::{find_worst_prior, GameResult, IterationRecord};
pub use model::{
    likelihood, loss_integrand, poisson_pmf, poisson_tail_above, posterior, predictive_weight,
    Arm, ParameterPoint, Posterior, Prior, State,
};
pub use solver::{normalize_v2, solve_v1, solve_v2, Normalized, Solution, SolverConfig, TieRule};
