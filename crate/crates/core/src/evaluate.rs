//! Exact and Monte Carlo evaluation of strategy tables: the regret of a
//! fixed strategy under a known parameter, and its prior-mixed average.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{LatticeState, StrategyTable};
use crate::model::{self, Arm, ParameterPoint, Prior};
use crate::solver::{successor, SolverConfig};

/// Exact regret of a lattice strategy under a known parameter, with an
/// upper bound on the error introduced by count truncation.
#[derive(Debug, Clone, Copy)]
pub struct ExactRegret {
    pub regret: f64,
    pub truncation_budget: f64,
}

/// Monte Carlo regret estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: u32,
    pub seed: u64,
    /// Fraction of interval lookups where a count had to be clamped to
    /// the strategy table's xmax.
    pub clamp_rate: f64,
}

/// One simulated path: per-interval actions and increments plus final
/// totals.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub intervals: Vec<IntervalRecord>,
    pub total_x1: u64,
    pub total_x2: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct IntervalRecord {
    pub interval: u32,
    pub action: Arm,
    pub increment: u32,
}

/// Exact regret by a forward sweep over the lattice: propagate the
/// reaching probability of every state under (strategy, theta) and
/// accumulate per-interval expected loss. Mass pushed beyond xmax (or
/// below the pmf tail cutoff) is dropped and its worst-case future loss
/// reported as the truncation budget.
pub fn evaluate_exact(
    strategy: &StrategyTable,
    theta: &ParameterPoint,
    config: &SolverConfig,
) -> Result<ExactRegret> {
    config.validate_for_rate(theta.max_rate())?;
    if strategy.shape() != config.shape() {
        return Err(Error::Config("strategy table shape does not match config".into()));
    }
    let shape = config.shape();
    let dt = config.dt();
    let side = shape.xmax as usize + 1;
    let gap_max = (theta.lambda1 - theta.lambda2).abs();

    // Step pmf and cdf per arm at the known rates.
    let pmf_step: Vec<Vec<f64>> = [Arm::One, Arm::Two]
        .iter()
        .map(|arm| (0..side).map(|j| model::pmf_raw(j as u32, theta.rate(*arm) * dt)).collect())
        .collect();

    let layer_len = |n: u32| (n as usize + 1) * side * side;
    let idx = |s: LatticeState| -> usize {
        (s.n1 as usize * side + s.x1 as usize) * side + s.x2 as usize
    };

    let mut mass = vec![0.0f64; layer_len(0)];
    mass[0] = 1.0;
    let mut regret = 0.0;
    let mut budget = 0.0;

    for n in 0..shape.steps {
        let mut next = vec![0.0f64; layer_len(n + 1)];
        for s in shape.states_in_layer(n) {
            let m = mass[idx(s)];
            if m <= 0.0 {
                continue;
            }
            let arm = strategy.action(s).ok_or(Error::MissingStrategy {
                n1: s.n1,
                x1: s.x1,
                n2: s.n2,
                x2: s.x2,
            })?;
            regret += m * theta.loss_rate(arm) * dt;

            let (ai, x) = match arm {
                Arm::One => (0usize, s.x1),
                Arm::Two => (1usize, s.x2),
            };
            let mut carried = 0.0;
            let mut cdf = 0.0;
            for j in 0..=(shape.xmax - x) {
                let p = pmf_step[ai][j as usize];
                next[idx(successor(s, arm, j))] += m * p;
                carried += p;
                cdf += p;
                if 1.0 - cdf < config.tail_eps {
                    break;
                }
            }
            let lost = (1.0 - carried).max(0.0);
            let time_left = config.horizon - f64::from(n + 1) * dt;
            budget += m * lost * gap_max * time_left.max(0.0);
        }
        mass = next;
    }

    Ok(ExactRegret { regret, truncation_budget: budget })
}

/// Poisson draw: inversion for small means, rejection (via rand_distr)
/// for large ones.
fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean <= 10.0 {
        let u: f64 = rng.gen();
        let mut p = (-mean).exp();
        let mut cum = p;
        let mut k = 0u64;
        while u > cum && k < 100_000 {
            k += 1;
            p *= mean / k as f64;
            cum += p;
        }
        k
    } else {
        let dist = rand_distr::Poisson::new(mean).expect("positive mean");
        dist.sample(rng) as u64
    }
}

fn replication_rng(seed: u64, replication: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(replication) + 1);
    rng
}

struct PathOutcome {
    regret_sample: f64,
    clamps: u32,
    trajectory: Option<Trajectory>,
}

fn run_path(
    strategy: &StrategyTable,
    theta: &ParameterPoint,
    config: &SolverConfig,
    rng: &mut ChaCha8Rng,
    record: bool,
) -> Result<PathOutcome> {
    let shape = config.shape();
    let dt = config.dt();
    let (mut x1, mut x2) = (0u64, 0u64);
    let (mut n1, mut n2) = (0u32, 0u32);
    let mut clamps = 0u32;
    let mut intervals = record.then(Vec::new);

    for n in 0..shape.steps {
        let cx1 = (x1.min(u64::from(shape.xmax))) as u32;
        let cx2 = (x2.min(u64::from(shape.xmax))) as u32;
        if u64::from(cx1) != x1 || u64::from(cx2) != x2 {
            clamps += 1;
        }
        let s = LatticeState { n1, x1: cx1, n2, x2: cx2 };
        let arm = strategy.action(s).ok_or(Error::MissingStrategy {
            n1: s.n1,
            x1: s.x1,
            n2: s.n2,
            x2: s.x2,
        })?;
        let j = sample_poisson(rng, theta.rate(arm) * dt);
        match arm {
            Arm::One => {
                x1 += j;
                n1 += 1;
            }
            Arm::Two => {
                x2 += j;
                n2 += 1;
            }
        }
        if let Some(records) = intervals.as_mut() {
            records.push(IntervalRecord { interval: n, action: arm, increment: j as u32 });
        }
    }

    let income = (x1 + x2) as f64;
    Ok(PathOutcome {
        regret_sample: config.horizon * theta.max_rate() - income,
        clamps,
        trajectory: intervals.map(|intervals| Trajectory {
            intervals,
            total_x1: x1,
            total_x2: x2,
        }),
    })
}

fn summarize(
    samples: &[(f64, u32)],
    steps: u32,
    replications: u32,
    seed: u64,
) -> RegretEstimate {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|(r, _)| r).sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|(r, _)| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let clamp_rate = samples.iter().map(|(_, c)| f64::from(*c)).sum::<f64>()
        / (n * f64::from(steps));
    RegretEstimate {
        mean,
        std_error: (var / n).sqrt(),
        replications,
        seed,
        clamp_rate,
    }
}

/// Monte Carlo regret under a fixed parameter. Replication r draws from
/// an independent stream derived from (seed, r), so the estimate is
/// identical across runs and thread counts.
pub fn simulate(
    strategy: &StrategyTable,
    theta: &ParameterPoint,
    config: &SolverConfig,
    replications: u32,
    seed: u64,
) -> Result<RegretEstimate> {
    config.validate_for_rate(theta.max_rate())?;
    if strategy.shape() != config.shape() {
        return Err(Error::Config("strategy table shape does not match config".into()));
    }
    if replications == 0 {
        return Err(Error::Config("replications must be positive".into()));
    }
    let samples: Vec<(f64, u32)> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r);
            run_path(strategy, theta, config, &mut rng, false)
                .map(|o| (o.regret_sample, o.clamps))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(&samples, config.steps, replications, seed))
}

/// Monte Carlo regret with the parameter redrawn from the prior for each
/// replication; estimates the Bayesian risk of the strategy.
pub fn simulate_prior_mixed(
    strategy: &StrategyTable,
    prior: &Prior,
    config: &SolverConfig,
    replications: u32,
    seed: u64,
) -> Result<RegretEstimate> {
    config.validate_for(prior)?;
    if strategy.shape() != config.shape() {
        return Err(Error::Config("strategy table shape does not match config".into()));
    }
    if replications == 0 {
        return Err(Error::Config("replications must be positive".into()));
    }
    let samples: Vec<(f64, u32)> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut theta = prior.atoms()[prior.atoms().len() - 1].0;
            for (point, w) in prior.atoms() {
                acc += w;
                if u < acc {
                    theta = *point;
                    break;
                }
            }
            run_path(strategy, &theta, config, &mut rng, false)
                .map(|o| (o.regret_sample, o.clamps))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(&samples, config.steps, replications, seed))
}

/// Single recorded trajectory, for inspection and tests.
pub fn simulate_trajectory(
    strategy: &StrategyTable,
    theta: &ParameterPoint,
    config: &SolverConfig,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = replication_rng(seed, 0);
    let outcome = run_path(strategy, theta, config, &mut rng, true)?;
    Ok(outcome.trajectory.expect("recording enabled"))
}

/// Strategy table that plays one arm everywhere; useful as a baseline.
pub fn constant_strategy(config: &SolverConfig, arm: Arm) -> StrategyTable {
    let shape = config.shape();
    let mut strategy = StrategyTable::empty(shape);
    for n in 0..shape.steps {
        for s in shape.states_in_layer(n) {
            strategy.set(s, arm);
        }
    }
    strategy
}
