//! Backward-induction solvers for the two recursions governing the
//! Bayesian risk: the normalized form (posterior-weighted transition
//! probabilities) and the unnormalized form (predictive weights).

use crate::error::{Error, Result};
use crate::lattice::{LatticeState, RecursionKind, RiskTable, StrategyTable, TableShape};
use crate::model::{self, Arm, Prior};

/// Resolution of exact draws between the two one-step values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    PreferArm1,
}

/// Lattice and truncation parameters for the discrete solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub horizon: f64,
    pub steps: u32,
    pub xmax: u32,
    pub tail_eps: f64,
    pub tie_rule: TieRule,
}

impl SolverConfig {
    pub fn new(horizon: f64, steps: u32, xmax: u32) -> Result<Self> {
        let config = SolverConfig {
            horizon,
            steps,
            xmax,
            tail_eps: 1e-10,
            tie_rule: TieRule::PreferArm1,
        };
        config.check_basic()?;
        Ok(config)
    }

    pub fn with_tail_eps(mut self, tail_eps: f64) -> Result<Self> {
        self.tail_eps = tail_eps;
        self.check_basic()?;
        Ok(self)
    }

    fn check_basic(&self) -> Result<()> {
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::Config(format!("horizon_T must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps_N must be positive".into()));
        }
        if self.xmax == 0 {
            return Err(Error::Config("xmax must be at least 1".into()));
        }
        if !self.tail_eps.is_finite() || self.tail_eps <= 0.0 || self.tail_eps >= 1.0 {
            return Err(Error::Config(format!("tail_eps must lie in (0,1), got {}", self.tail_eps)));
        }
        Ok(())
    }

    /// The count truncation must leave less than tail_eps of pmf mass
    /// beyond xmax under the largest rate over the whole horizon.
    pub fn validate_for_rate(&self, max_rate: f64) -> Result<()> {
        self.check_basic()?;
        let tail = model::poisson_tail_above(self.xmax, max_rate * self.horizon);
        if tail >= self.tail_eps {
            return Err(Error::Config(format!(
                "xmax={} leaves pmf tail {tail:.3e} >= tail_eps {:.3e} at rate {max_rate} over horizon {}",
                self.xmax, self.tail_eps, self.horizon
            )));
        }
        Ok(())
    }

    pub fn validate_for(&self, prior: &Prior) -> Result<()> {
        self.validate_for_rate(prior.max_rate())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / f64::from(self.steps)
    }

    pub fn shape(&self) -> TableShape {
        TableShape { horizon: self.horizon, steps: self.steps, xmax: self.xmax }
    }
}

/// Output of one backward-induction solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub risk: RiskTable,
    pub strategy: StrategyTable,
    pub root_risk: f64,
    /// Upper bound on the root-risk error introduced by the xmax count
    /// truncation.
    pub truncation_budget: f64,
}

/// Per-solve precomputed pmf/weight tables; everything downstream is
/// mul-adds over these.
pub(crate) struct Precomp {
    pub weights: Vec<f64>,
    /// gaps[arm][k] = (lambda_other - lambda_arm)^+ for atom k.
    pub gaps: [Vec<f64>; 2],
    /// pmf_time[arm][k][n * (xmax+1) + x] = p(x, n*dt; lambda_{arm,k}).
    pub pmf_time: [Vec<Vec<f64>>; 2],
    /// pmf_step[arm][k][j] = p(j, dt; lambda_{arm,k}), j = 0..=xmax.
    pub pmf_step: [Vec<Vec<f64>>; 2],
    /// cdf_step[arm][k][j] = sum of pmf_step up to j.
    pub cdf_step: [Vec<Vec<f64>>; 2],
    /// pred[n * (xmax+1) + x][j] = predictive weight w(x, n*dt, j, dt).
    pub pred: Vec<Vec<f64>>,
    side: usize,
}

impl Precomp {
    pub fn build(prior: &Prior, shape: TableShape) -> Precomp {
        let dt = shape.dt();
        let side = shape.xmax as usize + 1;
        let atoms = prior.atoms();
        let weights: Vec<f64> = atoms.iter().map(|(_, w)| *w).collect();

        let mut gaps = [Vec::new(), Vec::new()];
        let mut pmf_time = [Vec::new(), Vec::new()];
        let mut pmf_step = [Vec::new(), Vec::new()];
        let mut cdf_step = [Vec::new(), Vec::new()];
        for (ai, arm) in [Arm::One, Arm::Two].into_iter().enumerate() {
            for (theta, _) in atoms {
                let rate = theta.rate(arm);
                gaps[ai].push(theta.loss_rate(arm));
                let mut by_time = vec![0.0; (shape.steps as usize + 1) * side];
                for n in 0..=shape.steps as usize {
                    for x in 0..side {
                        by_time[n * side + x] = model::pmf_raw(x as u32, rate * n as f64 * dt);
                    }
                }
                pmf_time[ai].push(by_time);
                let step: Vec<f64> =
                    (0..side).map(|j| model::pmf_raw(j as u32, rate * dt)).collect();
                let mut cum = 0.0;
                let cdf: Vec<f64> = step
                    .iter()
                    .map(|p| {
                        cum += p;
                        cum
                    })
                    .collect();
                pmf_step[ai].push(step);
                cdf_step[ai].push(cdf);
            }
        }

        let mut pred = Vec::with_capacity((shape.steps as usize + 1) * side);
        for n in 0..=shape.steps as usize {
            for x in 0..side {
                let t = n as f64 * dt;
                let row: Vec<f64> = (0..side)
                    .map(|j| {
                        model::predictive_weight(x as u32, t, j as u32, dt)
                            .expect("dt > 0 by config validation")
                    })
                    .collect();
                pred.push(row);
            }
        }

        Precomp { weights, gaps, pmf_time, pmf_step, cdf_step, pred, side }
    }

    pub fn likelihood(&self, k: usize, s: LatticeState) -> f64 {
        self.pmf_time[0][k][s.n1 as usize * self.side + s.x1 as usize]
            * self.pmf_time[1][k][s.n2 as usize * self.side + s.x2 as usize]
    }

    pub fn pred_row(&self, n: u32, x: u32) -> &[f64] {
        &self.pred[n as usize * self.side + x as usize]
    }

    pub fn marginal(&self, s: LatticeState) -> f64 {
        (0..self.weights.len()).map(|k| self.weights[k] * self.likelihood(k, s)).sum()
    }

    /// Unnormalized loss term g^(arm) at a lattice state.
    pub fn loss_integrand(&self, arm_idx: usize, s: LatticeState) -> f64 {
        (0..self.weights.len())
            .map(|k| self.weights[k] * self.gaps[arm_idx][k] * self.likelihood(k, s))
            .sum()
    }
}

pub(crate) fn successor(s: LatticeState, arm: Arm, j: u32) -> LatticeState {
    match arm {
        Arm::One => LatticeState { n1: s.n1 + 1, x1: s.x1 + j, n2: s.n2, x2: s.x2 },
        Arm::Two => LatticeState { n1: s.n1, x1: s.x1, n2: s.n2 + 1, x2: s.x2 + j },
    }
}

pub(crate) fn truncation_budget(prior: &Prior, config: &SolverConfig) -> f64 {
    let tail = model::poisson_tail_above(config.xmax, prior.max_rate() * config.horizon);
    2.0 * tail * config.horizon * prior.max_loss_rate()
}

fn pick(vals: [f64; 2], tie_rule: TieRule) -> (f64, Arm) {
    // PreferArm1 is the only rule: arm 1 wins draws.
    let TieRule::PreferArm1 = tie_rule;
    if vals[0] <= vals[1] {
        (vals[0], Arm::One)
    } else {
        (vals[1], Arm::Two)
    }
}

/// Backward induction on the normalized recursion: one-step values mix
/// posterior-weighted transition probabilities with the posterior
/// expected loss rate.
pub fn solve_v1(prior: &Prior, config: &SolverConfig) -> Result<Solution> {
    config.validate_for(prior)?;
    let shape = config.shape();
    let pre = Precomp::build(prior, shape);
    let dt = config.dt();
    let n_atoms = pre.weights.len();

    let mut risk = RiskTable::zeroed(shape, RecursionKind::V1);
    let mut strategy = StrategyTable::empty(shape);
    let mut post = vec![0.0; n_atoms];

    for n in (0..shape.steps).rev() {
        for s in shape.states_in_layer(n) {
            let mut marginal = 0.0;
            for k in 0..n_atoms {
                post[k] = pre.weights[k] * pre.likelihood(k, s);
                marginal += post[k];
            }
            if marginal <= 0.0 {
                // Impossible observation: risk 0, no strategy entry.
                continue;
            }
            for p in &mut post {
                *p /= marginal;
            }

            let mut vals = [0.0f64; 2];
            for (ai, arm) in [Arm::One, Arm::Two].into_iter().enumerate() {
                let mut val = 0.0;
                for k in 0..n_atoms {
                    val += post[k] * pre.gaps[ai][k];
                }
                val *= dt;
                let x = match arm {
                    Arm::One => s.x1,
                    Arm::Two => s.x2,
                };
                for j in 0..=(shape.xmax - x) {
                    let mut mix = 0.0;
                    let mut max_tail = 0.0f64;
                    for k in 0..n_atoms {
                        mix += post[k] * pre.pmf_step[ai][k][j as usize];
                        max_tail = max_tail.max(1.0 - pre.cdf_step[ai][k][j as usize]);
                    }
                    val += mix * risk.value(successor(s, arm, j));
                    if max_tail < config.tail_eps {
                        break;
                    }
                }
                vals[ai] = val;
            }

            let (best, arm) = pick(vals, config.tie_rule);
            risk.set(s, best);
            strategy.set(s, arm);
        }
    }

    let root_risk = risk.value(LatticeState::root());
    Ok(Solution { risk, strategy, root_risk, truncation_budget: truncation_budget(prior, config) })
}

/// Backward induction on the unnormalized recursion: prior-only loss
/// terms plus predictive-weight sums. The j-sum stops once the summand
/// has stayed below tail_eps times the running partial sum for five
/// consecutive terms; the weights themselves are not a distribution, so
/// stopping on weight mass would be wrong.
pub fn solve_v2(prior: &Prior, config: &SolverConfig) -> Result<Solution> {
    config.validate_for(prior)?;
    let shape = config.shape();
    let pre = Precomp::build(prior, shape);
    let dt = config.dt();
    const CONSECUTIVE_SMALL: u32 = 5;

    let mut risk = RiskTable::zeroed(shape, RecursionKind::V2);
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
                vals[ai] = pre.loss_integrand(ai, s) * dt + partial;
            }

            let (best, arm) = pick(vals, config.tie_rule);
            risk.set(s, best);
            strategy.set(s, arm);
        }
    }

    let root_risk = risk.value(LatticeState::root());
    Ok(Solution { risk, strategy, root_risk, truncation_budget: truncation_budget(prior, config) })
}

/// Normalized view of an unnormalized risk table: each entry divided by
/// the marginal likelihood of its state, for audit against solve_v1.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub risk: RiskTable,
    /// States whose marginal fell below the division floor and were left
    /// at zero.
    pub skipped: Vec<LatticeState>,
}

pub fn normalize_v2(risk_v2: &RiskTable, prior: &Prior) -> Result<Normalized> {
    if risk_v2.kind() == RecursionKind::V1 {
        return Err(Error::Config("normalize_v2 expects an unnormalized table".into()));
    }
    const MARGINAL_FLOOR: f64 = 1e-300;
    let shape = risk_v2.shape();
    let pre = Precomp::build(prior, shape);
    let mut out = RiskTable::zeroed(shape, RecursionKind::V2);
    out.set_kind(RecursionKind::V1);
    let mut skipped = Vec::new();
    for n in 0..=shape.steps {
        for s in shape.states_in_layer(n) {
            let m = pre.marginal(s);
            if m < MARGINAL_FLOOR {
                skipped.push(s);
            } else {
                out.set(s, risk_v2.value(s) / m);
            }
        }
    }
    Ok(Normalized { risk: out, skipped })
}
