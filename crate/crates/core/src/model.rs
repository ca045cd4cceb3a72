//! Probability kernel of the two-armed Poisson bandit: pmf, priors,
//! likelihoods, posteriors, per-state loss integrands and the predictive
//! transition weights of the unnormalized recursion.
//!
//! All pmf/weight arithmetic runs in log space with one final
//! exponentiation so that counts in the hundreds stay representable.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// One of the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Arm {
    One,
    Two,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::One => Arm::Two,
            Arm::Two => Arm::One,
        }
    }

    /// 1-based label used in table exports.
    pub fn label(self) -> u8 {
        match self {
            Arm::One => 1,
            Arm::Two => 2,
        }
    }

    pub fn from_label(label: u8) -> Option<Arm> {
        match label {
            1 => Some(Arm::One),
            2 => Some(Arm::Two),
            _ => None,
        }
    }
}

/// A pair of Poisson rates describing one bandit instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterPoint {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ParameterPoint {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(ParameterPoint { lambda1, lambda2 })
    }

    pub fn rate(&self, arm: Arm) -> f64 {
        match arm {
            Arm::One => self.lambda1,
            Arm::Two => self.lambda2,
        }
    }

    /// Per-unit-time loss of holding `arm`: (lambda_other - lambda_arm)^+.
    pub fn loss_rate(&self, arm: Arm) -> f64 {
        (self.rate(arm.other()) - self.rate(arm)).max(0.0)
    }

    pub fn max_rate(&self) -> f64 {
        self.lambda1.max(self.lambda2)
    }
}

/// Finite weighted atom set over parameter points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prior {
    atoms: Vec<(ParameterPoint, f64)>,
}

impl Prior {
    /// Strict constructor: weights must already sum to 1 within 1e-12.
    pub fn new(atoms: Vec<(ParameterPoint, f64)>) -> Result<Self> {
        Self::with_tolerance(atoms, 1e-12)
    }

    /// Accepts weights whose sum deviates from 1 by at most `tol` and
    /// renormalizes them.
    pub fn with_tolerance(mut atoms: Vec<(ParameterPoint, f64)>, tol: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Prior("atom list is empty".into()));
        }
        let mut sum = 0.0;
        for (theta, w) in &atoms {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::Prior(format!("weight {w} is not a probability")));
            }
            ParameterPoint::new(theta.lambda1, theta.lambda2)?;
            sum += w;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::Prior(format!(
                "weights sum to {sum}, outside tolerance {tol} of 1"
            )));
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if atoms[i].0 == atoms[j].0 {
                    return Err(Error::Prior(format!(
                        "duplicate atom ({}, {})",
                        atoms[i].0.lambda1, atoms[i].0.lambda2
                    )));
                }
            }
        }
        for (_, w) in &mut atoms {
            *w /= sum;
        }
        Ok(Prior { atoms })
    }

    pub fn uniform(points: Vec<ParameterPoint>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Prior("atom list is empty".into()));
        }
        let w = 1.0 / n as f64;
        Self::with_tolerance(points.into_iter().map(|p| (p, w)).collect(), 1e-9)
    }

    pub fn atoms(&self) -> &[(ParameterPoint, f64)] {
        &self.atoms
    }

    pub fn max_rate(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(t, _)| t.max_rate())
            .fold(0.0, f64::max)
    }

    /// Largest per-unit-time loss over atoms and arms.
    pub fn max_loss_rate(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(t, _)| (t.lambda1 - t.lambda2).abs())
            .fold(0.0, f64::max)
    }

    /// Parses the prior file format: one `lambda1 lambda2 weight` per line,
    /// `#` starts a comment. Weights within 1e-6 of summing to 1 are
    /// renormalized, anything further off is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Prior(format!(
                    "line {}: expected `lambda1 lambda2 weight`, got {:?}",
                    lineno + 1,
                    raw
                )));
            }
            let mut nums = [0.0; 3];
            for (slot, field) in nums.iter_mut().zip(&fields) {
                *slot = field.parse::<f64>().map_err(|e| {
                    Error::Prior(format!("line {}: bad number {field:?}: {e}", lineno + 1))
                })?;
            }
            atoms.push((ParameterPoint::new(nums[0], nums[1])?, nums[2]));
        }
        Self::with_tolerance(atoms, 1e-6)
    }

    /// Renders the prior in the same format `parse` accepts. Floats use
    /// shortest round-trip formatting so the file re-parses to an
    /// identical atom list.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# lambda1 lambda2 weight\n");
        for (theta, w) in &self.atoms {
            out.push_str(&format!("{} {} {}\n", theta.lambda1, theta.lambda2, w));
        }
        out
    }
}

/// Sufficient statistic of the observed history: per-arm cumulative
/// counts and application times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x1: u32,
    pub t1: f64,
    pub x2: u32,
    pub t2: f64,
}

impl State {
    pub fn new(x1: u32, t1: f64, x2: u32, t2: f64) -> Result<Self> {
        for (name, t, x) in [("t1", t1, x1), ("t2", t2, x2)] {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Domain(format!(
                    "{name} must be finite and non-negative, got {t}"
                )));
            }
            if t == 0.0 && x > 0 {
                return Err(Error::Domain(format!(
                    "{x} events in zero elapsed time ({name} = 0)"
                )));
            }
        }
        Ok(State { x1, t1, x2, t2 })
    }

    pub fn root() -> State {
        State { x1: 0, t1: 0.0, x2: 0, t2: 0.0 }
    }
}

/// Posterior atom weights together with the marginal likelihood that
/// normalized them.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub atoms: Vec<(ParameterPoint, f64)>,
    pub marginal: f64,
}

/// Poisson pmf `(lambda t)^i e^{-lambda t} / i!` with the 0^0 = 1
/// convention: zero elapsed time (or zero rate) puts all mass on i = 0.
pub fn poisson_pmf(i: u32, t: f64, lambda: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Domain(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    Ok(pmf_raw(i, lambda * t))
}

/// pmf of Poisson(mean) at i, log-space, no input validation.
pub(crate) fn pmf_raw(i: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    (f64::from(i) * mean.ln() - mean - ln_gamma(f64::from(i) + 1.0)).exp()
}

/// Upper tail P(Poisson(mean) > xmax).
pub fn poisson_tail_above(xmax: u32, mean: f64) -> f64 {
    let mut cdf = 0.0;
    for i in 0..=xmax {
        cdf += pmf_raw(i, mean);
    }
    (1.0 - cdf).max(0.0)
}

/// Product likelihood p(x1,t1;lambda1) p(x2,t2;lambda2).
pub fn likelihood(state: &State, theta: &ParameterPoint) -> Result<f64> {
    Ok(poisson_pmf(state.x1, state.t1, theta.lambda1)?
        * poisson_pmf(state.x2, state.t2, theta.lambda2)?)
}

/// Posterior over prior atoms given the observed state, plus the marginal
/// likelihood normalizer.
pub fn posterior(state: &State, prior: &Prior) -> Result<Posterior> {
    let mut weighted: Vec<(ParameterPoint, f64)> = Vec::with_capacity(prior.atoms().len());
    let mut marginal = 0.0;
    for (theta, w) in prior.atoms() {
        let lw = w * likelihood(state, theta)?;
        marginal += lw;
        weighted.push((*theta, lw));
    }
    if marginal <= 0.0 {
        return Err(Error::ImpossibleObservation);
    }
    for (_, w) in &mut weighted {
        *w /= marginal;
    }
    Ok(Posterior { atoms: weighted, marginal })
}

/// Unnormalized loss term g^(arm): prior-weighted product of the loss
/// rate and the state likelihood. Equals marginal * posterior expectation
/// of (lambda_other - lambda_arm)^+.
pub fn loss_integrand(state: &State, prior: &Prior, arm: Arm) -> Result<f64> {
    let mut g = 0.0;
    for (theta, w) in prior.atoms() {
        g += w * theta.loss_rate(arm) * likelihood(state, theta)?;
    }
    Ok(g)
}

/// Predictive transition weight `t^x delta^j (x+j)! / ((t+delta)^{x+j} x! j!)`
/// coupling adjacent states in the unnormalized recursion. Satisfies
/// pmf(x,t;l) pmf(j,delta;l) = pmf(x+j,t+delta;l) * weight for every rate l.
/// Not a probability distribution over j: for t > 0 the weights sum to
/// (t+delta)/t, and at t = 0 every weight is 1.
pub fn predictive_weight(x: u32, t: f64, j: u32, delta: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if t == 0.0 {
        // 0^0 = 1; for x > 0 the t^x factor kills the weight.
        return Ok(if x == 0 { 1.0 } else { 0.0 });
    }
    if x == 0 && j == 0 {
        return Ok(1.0);
    }
    let (x, j) = (f64::from(x), f64::from(j));
    let ln_w = x * t.ln() + j * delta.ln() + ln_gamma(x + j + 1.0)
        - (x + j) * (t + delta).ln()
        - ln_gamma(x + 1.0)
        - ln_gamma(j + 1.0);
    Ok(ln_w.exp())
}
