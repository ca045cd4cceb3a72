//! First-order small-step solver for the unnormalized recursion and an
//! a-posteriori residual audit of the limiting differential equation.
//!
//! The one-step coefficients divide by t_l, so the scheme cannot be used
//! on the whole lattice: wherever t_l < t_floor, or the drift coefficient
//! 1 - x_l*dt/t_l would go negative, the arm falls back to the exact
//! predictive-weight sum, which is well defined everywhere.

use crate::error::{Error, Result};
use crate::lattice::{LatticeState, RecursionKind, RiskTable, StrategyTable, TableShape};
use crate::model::{Arm, Prior};
use crate::solver::{successor, Precomp, Solution, SolverConfig, TieRule};

/// Lattice parameters for the linearized scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedConfig {
    pub horizon: f64,
    pub steps: u32,
    pub xmax: u32,
    /// Below this time the exact recursion is used for the arm.
    pub t_floor: f64,
    pub tail_eps: f64,
}

impl LinearizedConfig {
    pub fn new(horizon: f64, steps: u32, xmax: u32) -> Result<Self> {
        let base = SolverConfig::new(horizon, steps, xmax)?;
        Ok(LinearizedConfig {
            horizon,
            steps,
            xmax,
            t_floor: base.dt(),
            tail_eps: 1e-10,
        })
    }

    pub fn with_t_floor(mut self, t_floor: f64) -> Result<Self> {
        if !t_floor.is_finite() || t_floor <= 0.0 {
            return Err(Error::Config(format!("t_floor must be positive, got {t_floor}")));
        }
        self.t_floor = t_floor;
        Ok(self)
    }

    pub fn with_tail_eps(mut self, tail_eps: f64) -> Result<Self> {
        self.as_solver_config()?.with_tail_eps(tail_eps)?;
        self.tail_eps = tail_eps;
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / f64::from(self.steps)
    }

    pub fn shape(&self) -> TableShape {
        TableShape { horizon: self.horizon, steps: self.steps, xmax: self.xmax }
    }

    fn as_solver_config(&self) -> Result<SolverConfig> {
        SolverConfig::new(self.horizon, self.steps, self.xmax)?.with_tail_eps(self.tail_eps)
    }

    pub fn validate_for(&self, prior: &Prior) -> Result<()> {
        if !self.t_floor.is_finite() || self.t_floor <= 0.0 {
            return Err(Error::Config(format!("t_floor must be positive, got {}", self.t_floor)));
        }
        self.as_solver_config()?.validate_for(prior)
    }
}

/// Backward induction with the linearized one-step values
/// g*dt + R(x, t+dt)(1 - x dt/t) + R(x+1, t+dt)(x+1) dt/t
/// wherever the arm's time coordinate admits them.
pub fn solve_linearized(prior: &Prior, config: &LinearizedConfig) -> Result<Solution> {
    config.validate_for(prior)?;
    let shape = config.shape();
    let pre = Precomp::build(prior, shape);
    let dt = config.dt();
    const CONSECUTIVE_SMALL: u32 = 5;

    let mut risk = RiskTable::zeroed(shape, RecursionKind::Linearized);
    let mut strategy = StrategyTable::empty(shape);

    for n in (0..shape.steps).rev() {
        for s in shape.states_in_layer(n) {
            if pre.marginal(s) <= 0.0 {
                continue;
            }
            let mut vals = [0.0f64; 2];
            for (ai, arm) in [Arm::One, Arm::Two].into_iter().enumerate() {
                let (x, nl) = match arm {
                    Arm::One => (s.x1, s.n1),
                    Arm::Two => (s.x2, s.n2),
                };
                let t = f64::from(nl) * dt;
                let g = pre.loss_integrand(ai, s) * dt;
                let linear_ok = t >= config.t_floor && f64::from(x) * dt <= t;
                vals[ai] = if linear_ok {
                    let drift = 1.0 - f64::from(x) * dt / t;
                    assert!(drift >= 0.0, "negative one-step coefficient at {s:?}");
                    let mut v = g + risk.value(successor(s, arm, 0)) * drift;
                    if x < shape.xmax {
                        v += risk.value(successor(s, arm, 1)) * f64::from(x + 1) * dt / t;
                    }
                    v
                } else {
                    // Exact predictive-weight sum near the boundary.
                    let weights = pre.pred_row(nl, x);
                    let mut partial = 0.0;
                    let mut consec = 0;
                    for j in 0..=(shape.xmax - x) {
                        let summand = weights[j as usize] * risk.value(successor(s, arm, j));
                        partial += summand;
                        if summand <= config.tail_eps * partial {
                            consec += 1;
                            if consec >= CONSECUTIVE_SMALL {
                                break;
                            }
                        } else {
                            consec = 0;
                        }
                    }
                    g + partial
                };
            }

            let TieRule::PreferArm1 = TieRule::PreferArm1;
            let (best, arm) = if vals[0] <= vals[1] {
                (vals[0], Arm::One)
            } else {
                (vals[1], Arm::Two)
            };
            risk.set(s, best);
            strategy.set(s, arm);
        }
    }

    let root_risk = risk.value(LatticeState::root());
    let budget = crate::solver::truncation_budget(prior, &config.as_solver_config()?);
    Ok(Solution { risk, strategy, root_risk, truncation_budget: budget })
}

fn is_interior(s: LatticeState, config: &LinearizedConfig) -> bool {
    let dt = config.dt();
    let t1 = f64::from(s.n1) * dt;
    let t2 = f64::from(s.n2) * dt;
    t1 >= config.t_floor + dt
        && t2 >= config.t_floor + dt
        && s.x1 + 1 <= config.xmax
        && s.x2 + 1 <= config.xmax
        && s.layer() + 1 <= config.steps
}

/// Residual of the limiting equation
/// min_l ( dR/dt_l + D^(l) R + g^(l) ) = 0
/// at an interior state, with the time derivative taken as the forward
/// difference on the table's lattice. Near zero on a converged table.
pub fn pde_residual(
    risk: &RiskTable,
    prior: &Prior,
    config: &LinearizedConfig,
    state: LatticeState,
) -> Result<f64> {
    if risk.shape() != config.shape() {
        return Err(Error::Config("risk table shape does not match config".into()));
    }
    if !is_interior(state, config) {
        return Err(Error::Domain(format!(
            "state {state:?} is not interior (need t_l >= t_floor + dt, x_l + 1 <= xmax)"
        )));
    }
    let pre = Precomp::build(prior, risk.shape());
    Ok(residual_at(risk, &pre, config, state))
}

fn residual_at(
    risk: &RiskTable,
    pre: &Precomp,
    config: &LinearizedConfig,
    s: LatticeState,
) -> f64 {
    let dt = config.dt();
    let here = risk.value(s);
    let mut best = f64::INFINITY;
    for (ai, arm) in [Arm::One, Arm::Two].into_iter().enumerate() {
        let (x, nl) = match arm {
            Arm::One => (s.x1, s.n1),
            Arm::Two => (s.x2, s.n2),
        };
        let t = f64::from(nl) * dt;
        let dt_term = (risk.value(successor(s, arm, 0)) - here) / dt;
        let up = match arm {
            Arm::One => LatticeState { x1: s.x1 + 1, ..s },
            Arm::Two => LatticeState { x2: s.x2 + 1, ..s },
        };
        let drift = -here * f64::from(x) / t + risk.value(up) * f64::from(x + 1) / t;
        let term = dt_term + drift + pre.loss_integrand(ai, s);
        best = best.min(term);
    }
    best
}

/// Summary of a residual sweep over the interior lattice.
#[derive(Debug, Clone, Copy)]
pub struct ResidualAudit {
    pub max_abs: f64,
    pub states_checked: usize,
    /// Interior states skipped because they sit within one cell of an
    /// action switch, where the limit equation need not hold pointwise.
    pub excluded_switch: usize,
}

/// Sweeps every interior state, excluding a one-cell band around action
/// switches detected in the strategy table.
pub fn residual_audit(
    risk: &RiskTable,
    strategy: &StrategyTable,
    prior: &Prior,
    config: &LinearizedConfig,
) -> Result<ResidualAudit> {
    if risk.shape() != config.shape() {
        return Err(Error::Config("risk table shape does not match config".into()));
    }
    let shape = config.shape();
    let pre = Precomp::build(prior, shape);
    let mut max_abs = 0.0f64;
    let mut states_checked = 0;
    let mut excluded_switch = 0;
    for n in 0..shape.steps {
        for s in shape.states_in_layer(n) {
            if !is_interior(s, config) {
                continue;
            }
            if near_action_switch(strategy, s, shape) {
                excluded_switch += 1;
                continue;
            }
            max_abs = max_abs.max(residual_at(risk, &pre, config, s).abs());
            states_checked += 1;
        }
    }
    Ok(ResidualAudit { max_abs, states_checked, excluded_switch })
}

fn near_action_switch(strategy: &StrategyTable, s: LatticeState, shape: TableShape) -> bool {
    let Some(here) = strategy.action(s) else {
        return true;
    };
    let mut neighbors = Vec::with_capacity(8);
    if s.x1 > 0 {
        neighbors.push(LatticeState { x1: s.x1 - 1, ..s });
    }
    if s.x1 < shape.xmax {
        neighbors.push(LatticeState { x1: s.x1 + 1, ..s });
    }
    if s.x2 > 0 {
        neighbors.push(LatticeState { x2: s.x2 - 1, ..s });
    }
    if s.x2 < shape.xmax {
        neighbors.push(LatticeState { x2: s.x2 + 1, ..s });
    }
    // Same-layer time neighbors and the two forward-time neighbors.
    if s.n1 > 0 {
        neighbors.push(LatticeState { n1: s.n1 - 1, n2: s.n2 + 1, ..s });
    }
    if s.n2 > 0 {
        neighbors.push(LatticeState { n1: s.n1 + 1, n2: s.n2 - 1, ..s });
    }
    if s.layer() + 1 < shape.steps {
        neighbors.push(LatticeState { n1: s.n1 + 1, ..s });
        neighbors.push(LatticeState { n2: s.n2 + 1, ..s });
    }
    neighbors
        .into_iter()
        .any(|v| strategy.action(v).map(|a| a != here).unwrap_or(false))
}
