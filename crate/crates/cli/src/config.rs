//! Run configuration: strict `key = value` parsing, defaults, and the
//! reproducibility echo written at the top of every output file.

use std::fmt;
use std::path::PathBuf;

use poisson_bandit_core::ParameterPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Linearized,
    Evaluate,
    Simulate,
    Minimax,
    Audit,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Linearized => "linearized",
            Command::Evaluate => "evaluate",
            Command::Simulate => "simulate",
            Command::Minimax => "minimax",
            Command::Audit => "audit",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        Some(match s {
            "solve" => Command::Solve,
            "linearized" => Command::Linearized,
            "evaluate" => Command::Evaluate,
            "simulate" => Command::Simulate,
            "minimax" => Command::Minimax,
            "audit" => Command::Audit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recursion {
    V1,
    V2,
}

impl Recursion {
    pub fn as_str(self) -> &'static str {
        match self {
            Recursion::V1 => "v1",
            Recursion::V2 => "v2",
        }
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub prior_path: Option<PathBuf>,
    pub grid_path: Option<PathBuf>,
    pub horizon_t: f64,
    pub steps_n: u32,
    pub xmax: u32,
    pub tail_eps: f64,
    pub t_floor: Option<f64>,
    pub recursion: Recursion,
    pub theta: Option<ParameterPoint>,
    pub replications: u32,
    pub seed: u64,
    pub max_iterations: u32,
    pub gap_tol: f64,
    pub output_dir: PathBuf,
}

#[derive(Debug)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "command",
    "prior_path",
    "grid_path",
    "horizon_T",
    "steps_N",
    "xmax",
    "tail_eps",
    "t_floor",
    "tie_rule",
    "recursion",
    "theta",
    "replications",
    "seed",
    "max_iterations",
    "gap_tol",
    "output_dir",
];

struct RawEntry {
    line: usize,
    value: String,
}

/// Parses the documented `key = value` format: one pair per line, `#`
/// starts a comment, unknown and duplicate keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    let mut entries: Vec<(String, RawEntry)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParseError(format!("line {line_no}: expected `key = value`, got {raw:?}")));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ParseError(format!("line {line_no}: unknown key `{key}`")));
        }
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(ParseError(format!("line {line_no}: duplicate key `{key}`")));
        }
        entries.push((key, RawEntry { line: line_no, value }));
    }

    let take = |key: &str| entries.iter().find(|(k, _)| k == key).map(|(_, e)| e);
    let required = |key: &str| {
        take(key).ok_or_else(|| ParseError(format!("missing required key `{key}`")))
    };
    fn number<T: std::str::FromStr>(entry: &RawEntry, key: &str) -> Result<T, ParseError>
    where
        T::Err: fmt::Display,
    {
        entry.value.parse::<T>().map_err(|e| {
            ParseError(format!("line {}: bad value for `{key}`: {e}", entry.line))
        })
    }

    let command_entry = required("command")?;
    let command = Command::parse(&command_entry.value).ok_or_else(|| {
        ParseError(format!(
            "line {}: unknown command `{}`",
            command_entry.line, command_entry.value
        ))
    })?;

    let horizon_t: f64 = number(required("horizon_T")?, "horizon_T")?;
    let steps_n: u32 = number(required("steps_N")?, "steps_N")?;
    let xmax: u32 = number(required("xmax")?, "xmax")?;
    if !horizon_t.is_finite() || horizon_t <= 0.0 {
        return Err(ParseError(format!("horizon_T must be positive, got {horizon_t}")));
    }
    if steps_n == 0 {
        return Err(ParseError("steps_N must be positive".into()));
    }
    if xmax == 0 {
        return Err(ParseError("xmax must be at least 1".into()));
    }

    let tail_eps = match take("tail_eps") {
        Some(e) => number(e, "tail_eps")?,
        None => 1e-10,
    };
    let t_floor = match take("t_floor") {
        Some(e) => Some(number(e, "t_floor")?),
        None => None,
    };
    if let Some(e) = take("tie_rule") {
        if e.value != "prefer-arm-1" {
            return Err(ParseError(format!(
                "line {}: unknown tie_rule `{}` (only prefer-arm-1 is defined)",
                e.line, e.value
            )));
        }
    }
    let recursion = match take("recursion") {
        Some(e) => match e.value.as_str() {
            "v1" => Recursion::V1,
            "v2" => Recursion::V2,
            other => {
                return Err(ParseError(format!(
                    "line {}: unknown recursion `{other}`",
                    e.line
                )))
            }
        },
        None => Recursion::V2,
    };
    let theta = match take("theta") {
        Some(e) => {
            let parts: Vec<&str> = e.value.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(ParseError(format!(
                    "line {}: theta expects two rates, got `{}`",
                    e.line, e.value
                )));
            }
            let l1: f64 = parts[0]
                .parse()
                .map_err(|err| ParseError(format!("line {}: bad theta: {err}", e.line)))?;
            let l2: f64 = parts[1]
                .parse()
                .map_err(|err| ParseError(format!("line {}: bad theta: {err}", e.line)))?;
            Some(
                ParameterPoint::new(l1, l2)
                    .map_err(|err| ParseError(format!("line {}: {err}", e.line)))?,
            )
        }
        None => None,
    };
    let replications = match take("replications") {
        Some(e) => number(e, "replications")?,
        None => 100_000,
    };
    let seed = match take("seed") {
        Some(e) => number(e, "seed")?,
        None => 0,
    };
    let max_iterations = match take("max_iterations") {
        Some(e) => number(e, "max_iterations")?,
        None => 200,
    };
    let gap_tol = match take("gap_tol") {
        Some(e) => number(e, "gap_tol")?,
        None => 0.0,
    };

    let prior_path = take("prior_path").map(|e| PathBuf::from(&e.value));
    let grid_path = take("grid_path").map(|e| PathBuf::from(&e.value));
    let output_dir = PathBuf::from(&required("output_dir")?.value);

    if command == Command::Minimax {
        if grid_path.is_none() {
            return Err(ParseError("minimax requires `grid_path`".into()));
        }
    } else if prior_path.is_none() {
        return Err(ParseError(format!(
            "command `{}` requires `prior_path`",
            command.as_str()
        )));
    }

    Ok(RunConfig {
        command,
        prior_path,
        grid_path,
        horizon_t,
        steps_n,
        xmax,
        tail_eps,
        t_floor,
        recursion,
        theta,
        replications,
        seed,
        max_iterations,
        gap_tol,
        output_dir,
    })
}

/// Configuration echo placed at the top of every output file: comment
/// lines that strip back to a config document reproducing the run.
pub fn render_echo(config: &RunConfig) -> String {
    let mut lines = Vec::new();
    lines.push(format!("command = {}", config.command.as_str()));
    if let Some(p) = &config.prior_path {
        lines.push(format!("prior_path = {}", p.display()));
    }
    if let Some(p) = &config.grid_path {
        lines.push(format!("grid_path = {}", p.display()));
    }
    lines.push(format!("horizon_T = {}", config.horizon_t));
    lines.push(format!("steps_N = {}", config.steps_n));
    lines.push(format!("xmax = {}", config.xmax));
    lines.push(format!("tail_eps = {}", config.tail_eps));
    if let Some(t) = config.t_floor {
        lines.push(format!("t_floor = {t}"));
    }
    lines.push("tie_rule = prefer-arm-1".to_string());
    lines.push(format!("recursion = {}", config.recursion.as_str()));
    if let Some(theta) = &config.theta {
        lines.push(format!("theta = {} {}", theta.lambda1, theta.lambda2));
    }
    lines.push(format!("replications = {}", config.replications));
    lines.push(format!("seed = {}", config.seed));
    lines.push(format!("max_iterations = {}", config.max_iterations));
    lines.push(format!("gap_tol = {}", config.gap_tol));
    lines.push(format!("output_dir = {}", config.output_dir.display()));
    let mut out = String::new();
    for line in lines {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Recovers a config document from an output file's echo header.
#[cfg(test)]
pub fn extract_echo(text: &str) -> String {
    text.lines()
        .take_while(|l| l.starts_with("# "))
        .map(|l| &l[2..])
        .filter(|l| l.contains('='))
        .collect::<Vec<_>>()
        .join("\n")
}
