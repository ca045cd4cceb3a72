//! Acceptance suite: one test per criterion, each printing a single
//! PASS line on success (run with `--nocapture` to see them).
//!
//! Criteria:
//!  1. the two Bayesian recursions agree entrywise after normalization
//!  2. the dynamic program matches an independent brute-force oracle at N=2
//!  3. the N=1 value matches its closed form
//!  4. Monte Carlo agrees with the dynamic program within 4 standard errors
//!  5. prior-weighted exact regret of the optimal strategy equals the root risk
//!  6. Bayesian risk is concave in the prior
//!  7. the linearized scheme converges to the exact recursion with vanishing
//!     interior PDE residual
//!  8. Frank-Wolfe certifies the minimax value of a symmetric game
//!  9. repeated CLI runs with identical configs are byte-identical

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use poisson_bandit_core::{
    evaluate_exact, find_worst_prior, normalize_v2, residual_audit, simulate_prior_mixed,
    solve_linearized, solve_v1, solve_v2, LinearizedConfig, ParameterPoint, Prior, SolverConfig,
};

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn point(l1: f64, l2: f64) -> ParameterPoint {
    ParameterPoint::new(l1, l2).unwrap()
}

/// Random prior with 2-3 atoms, rates in [0.3, 2], at least one atom
/// favoring each arm so the decision problem is non-degenerate.
fn random_prior(rng: &mut ChaCha8Rng) -> Prior {
    loop {
        let n = rng.gen_range(2..=3usize);
        let mut atoms = Vec::with_capacity(n);
        let mut raw = Vec::with_capacity(n);
        for _ in 0..n {
            raw.push((rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0)));
        }
        if !raw.iter().any(|(a, b)| a > b) || !raw.iter().any(|(a, b)| a < b) {
            continue;
        }
        let mut rest = 1.0;
        for (i, (l1, l2)) in raw.iter().enumerate() {
            let w = if i + 1 == n { rest } else { rng.gen_range(0.1..0.9) * rest };
            rest -= w;
            atoms.push((point(*l1, *l2), w));
        }
        if let Ok(prior) = Prior::new(atoms) {
            return prior;
        }
    }
}

/// Horizon capped so the count lattice `xmax = 25` holds essentially all
/// Poisson mass at `tail_eps = 1e-12`.
fn random_config(rng: &mut ChaCha8Rng, prior: &Prior, steps: u32) -> SolverConfig {
    let horizon = rng.gen_range(0.5..2.0f64).min(4.0 / prior.max_rate());
    SolverConfig::new(horizon, steps, 25)
        .unwrap()
        .with_tail_eps(1e-12)
        .unwrap()
}

#[test]
fn criterion_1_dual_recursion_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_root = 0.0f64;
    let mut worst_entry = 0.0f64;
    for _ in 0..20 {
        let prior = random_prior(&mut rng);
        let steps = rng.gen_range(2..=5);
        let config = random_config(&mut rng, &prior, steps);
        let v1 = solve_v1(&prior, &config).unwrap();
        let v2 = solve_v2(&prior, &config).unwrap();
        let normalized = normalize_v2(&v2.risk, &prior).unwrap();
        assert!(normalized.skipped.is_empty());

        worst_root = worst_root.max(rel_diff(v1.root_risk, v2.root_risk));
        let shape = config.shape();
        let dt = config.dt();
        for n in 0..=config.steps {
            for s in shape.states_in_layer(n) {
                let state = s.to_state(dt);
                let marginal: f64 = prior
                    .atoms()
                    .iter()
                    .map(|(th, w)| w * poisson_bandit_core::likelihood(&state, th).unwrap())
                    .sum();
                if marginal <= 1e-12 {
                    continue;
                }
                let a = v1.risk.value(s);
                let b = normalized.risk.value(s);
                if a.abs().max(b.abs()) > 1e-12 {
                    worst_entry = worst_entry.max(rel_diff(a, b));
                }
            }
        }
    }
    assert!(worst_root <= 1e-10, "worst root discrepancy {worst_root:e}");
    assert!(worst_entry <= 1e-9, "worst entry discrepancy {worst_entry:e}");
    println!(
        "criterion 1 dual recursion equivalence: PASS (root {worst_root:.2e}, entry {worst_entry:.2e})"
    );
}

/// Brute-force two-step value computed independently of the solver: naive
/// pmf arithmetic, explicit minimization over the two-interval decision tree.
fn brute_force_two_step(prior: &Prior, dt: f64) -> f64 {
    fn pmf(j: usize, mean: f64) -> f64 {
        if mean == 0.0 {
            return if j == 0 { 1.0 } else { 0.0 };
        }
        let mut factorial = 1.0;
        for i in 1..=j {
            factorial *= i as f64;
        }
        mean.powi(j as i32) * (-mean).exp() / factorial
    }
    let gap = |theta: &ParameterPoint, arm: usize| -> f64 {
        let (own, other) = if arm == 0 {
            (theta.lambda1, theta.lambda2)
        } else {
            (theta.lambda2, theta.lambda1)
        };
        (other - own).max(0.0)
    };
    let mut best = f64::INFINITY;
    for first in 0..2usize {
        let mut total: f64 = prior.atoms().iter().map(|(th, w)| w * gap(th, first) * dt).sum();
        for j in 0..200usize {
            let mut second_best = f64::INFINITY;
            for second in 0..2usize {
                let v: f64 = prior
                    .atoms()
                    .iter()
                    .map(|(th, w)| {
                        let rate = if first == 0 { th.lambda1 } else { th.lambda2 };
                        w * pmf(j, rate * dt) * gap(th, second) * dt
                    })
                    .sum();
                second_best = second_best.min(v);
            }
            total += second_best;
        }
        best = best.min(total);
    }
    best
}

#[test]
fn criterion_2_two_step_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let prior = random_prior(&mut rng);
        let config = random_config(&mut rng, &prior, 2);
        let solved = solve_v1(&prior, &config).unwrap();
        let oracle = brute_force_two_step(&prior, config.dt());
        worst = worst.max((solved.root_risk - oracle).abs());
    }
    assert!(worst <= 1e-9, "worst deviation from oracle {worst:e}");
    println!("criterion 2 two-step brute-force oracle: PASS (max abs dev {worst:.2e})");
}

#[test]
fn criterion_3_single_step_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let prior = random_prior(&mut rng);
        let config = random_config(&mut rng, &prior, 1);
        let solved = solve_v1(&prior, &config).unwrap();
        let loss = |arm: usize| -> f64 {
            prior
                .atoms()
                .iter()
                .map(|(th, w)| {
                    let (own, other) = if arm == 0 {
                        (th.lambda1, th.lambda2)
                    } else {
                        (th.lambda2, th.lambda1)
                    };
                    w * (other - own).max(0.0)
                })
                .sum()
        };
        let closed_form = config.dt() * loss(0).min(loss(1));
        worst = worst.max((solved.root_risk - closed_form).abs());
    }
    assert!(worst <= 1e-12, "worst deviation from closed form {worst:e}");
    println!("criterion 3 single-step closed form: PASS (max abs dev {worst:.2e})");
}

#[test]
fn criterion_4_monte_carlo_agreement() {
    let prior = Prior::new(vec![(point(1.0, 2.0), 0.5), (point(2.0, 1.0), 0.5)]).unwrap();
    let config = SolverConfig::new(1.0, 10, 25).unwrap();
    let solved = solve_v2(&prior, &config).unwrap();
    let estimate =
        simulate_prior_mixed(&solved.strategy, &prior, &config, 100_000, 77).unwrap();
    let deviation = (estimate.mean - solved.root_risk).abs();
    assert!(
        deviation <= 4.0 * estimate.std_error,
        "MC mean {} vs DP root {} exceeds 4 SE ({})",
        estimate.mean,
        solved.root_risk,
        estimate.std_error
    );
    println!(
        "criterion 4 Monte Carlo agreement: PASS (|dev| {:.2e} <= 4 SE {:.2e})",
        deviation,
        4.0 * estimate.std_error
    );
}

#[test]
fn criterion_5_exact_evaluation_matches_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let prior = random_prior(&mut rng);
        let steps = rng.gen_range(3..=6);
        let config = random_config(&mut rng, &prior, steps);
        let solved = solve_v2(&prior, &config).unwrap();
        let weighted: f64 = prior
            .atoms()
            .iter()
            .map(|(th, w)| w * evaluate_exact(&solved.strategy, th, &config).unwrap().regret)
            .sum();
        worst = worst.max(rel_diff(weighted, solved.root_risk));
    }
    assert!(worst <= 1e-9, "worst relative deviation {worst:e}");
    println!("criterion 5 exact evaluation matches root: PASS (max rel dev {worst:.2e})");
}

#[test]
fn criterion_6_concavity_in_the_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut min_slack = f64::INFINITY;
    let mut cases = 0;
    for _ in 0..10 {
        let p = random_prior(&mut rng);
        let q = random_prior(&mut rng);
        let horizon = 1.0f64.min(4.0 / p.max_rate().max(q.max_rate()));
        let config = SolverConfig::new(horizon, 4, 25)
            .unwrap()
            .with_tail_eps(1e-12)
            .unwrap();
        let risk_p = solve_v1(&p, &config).unwrap().root_risk;
        let risk_q = solve_v1(&q, &config).unwrap().root_risk;
        for alpha in [0.25, 0.5, 0.75] {
            let atoms: Vec<_> = p
                .atoms()
                .iter()
                .map(|(th, w)| (*th, alpha * w))
                .chain(q.atoms().iter().map(|(th, w)| (*th, (1.0 - alpha) * w)))
                .collect();
            // Atom collisions between the two random priors are possible in
            // principle; skip those mixtures rather than merge weights.
            let Ok(mixture) = Prior::with_tolerance(atoms, 1e-9) else { continue };
            let risk_mix = solve_v1(&mixture, &config).unwrap().root_risk;
            let slack = risk_mix - (alpha * risk_p + (1.0 - alpha) * risk_q);
            min_slack = min_slack.min(slack);
            cases += 1;
        }
    }
    assert!(cases >= 20, "too few concavity cases ran: {cases}");
    assert!(min_slack >= -1e-9, "concavity violated by {min_slack:e}");
    println!("criterion 6 concavity in the prior: PASS (min slack {min_slack:.2e})");
}

#[test]
fn criterion_7_linearized_convergence() {
    let prior = Prior::new(vec![(point(1.0, 2.0), 0.5), (point(2.0, 1.0), 0.5)]).unwrap();
    let mut gaps = Vec::new();
    let mut residuals = Vec::new();
    for steps in [8u32, 16, 32, 64] {
        let solver = SolverConfig::new(1.0, steps, 20).unwrap();
        let exact = solve_v1(&prior, &solver).unwrap();
        // A refinement-independent floor keeps the audited interior
        // comparable across grids.
        let lin_config = LinearizedConfig::new(1.0, steps, 20)
            .unwrap()
            .with_t_floor(0.25)
            .unwrap();
        let lin = solve_linearized(&prior, &lin_config).unwrap();
        let audit = residual_audit(&lin.risk, &lin.strategy, &prior, &lin_config).unwrap();
        gaps.push((lin.root_risk - exact.root_risk).abs());
        residuals.push(audit.max_abs);
        assert!(audit.states_checked > 0);
    }
    for pair in gaps.windows(2) {
        assert!(pair[0] > 0.0, "gap unexpectedly zero: {gaps:?}");
        assert!(
            pair[1] <= 0.75 * pair[0],
            "root gap not shrinking fast enough: {gaps:?}"
        );
    }
    for pair in residuals.windows(2) {
        assert!(pair[1] < pair[0], "residual not decreasing: {residuals:?}");
    }
    println!(
        "criterion 7 linearized convergence: PASS (gaps {gaps:?}, residual max {residuals:?})"
    );
}

#[test]
fn criterion_8_minimax_symmetric_game() {
    let grid = vec![point(1.0, 2.0), point(2.0, 1.0)];
    let config = SolverConfig::new(1.0, 10, 25).unwrap();
    let result = find_worst_prior(&grid, &config, 200, 0.0).unwrap();
    assert!(result.lower_bound > 0.0);
    let gap = result.upper_bound - result.lower_bound;
    assert!(
        gap <= 0.02 * result.lower_bound,
        "duality gap {gap:e} exceeds 2% of lower bound {:e}",
        result.lower_bound
    );
    for (_, w) in result.worst_prior.atoms() {
        assert!(
            (w - 0.5).abs() <= 0.05,
            "worst prior far from symmetric: {:?}",
            result.worst_prior
        );
    }
    for pair in result.history.windows(2) {
        assert!(
            pair[1].lower_bound >= pair[0].lower_bound,
            "lower bound regressed in history"
        );
    }
    println!(
        "criterion 8 minimax symmetric game: PASS (bounds [{:.6}, {:.6}], {} iterations)",
        result.lower_bound, result.upper_bound, result.iterations
    );
}

fn run_cli(subcommand: &str, config_path: &Path) {
    let output = Command::new(env!("CARGO_BIN_EXE_poisson-bandit"))
        .arg(subcommand)
        .arg("--config")
        .arg(config_path)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "{subcommand} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect()
}

#[test]
fn criterion_9_byte_identical_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let prior_path = tmp.path().join("prior.txt");
    fs::write(&prior_path, "1.0 2.0 0.5\n2.0 1.0 0.5\n").unwrap();
    let grid_path = tmp.path().join("grid.txt");
    fs::write(&grid_path, "1.0 2.0\n2.0 1.0\n").unwrap();

    let commands: [(&str, String); 6] = [
        ("solve", String::new()),
        ("linearized", "t_floor = 0.25\n".into()),
        ("evaluate", String::new()),
        ("simulate", "replications = 2000\nseed = 5\n".into()),
        ("minimax", "max_iterations = 5\n".into()),
        ("audit", String::new()),
    ];
    for (name, extra) in &commands {
        let out = tmp.path().join(name);
        let source = if *name == "minimax" {
            format!("grid_path = {}\n", grid_path.display())
        } else {
            format!("prior_path = {}\n", prior_path.display())
        };
        let config_path = tmp.path().join(format!("{name}.cfg"));
        fs::write(
            &config_path,
            format!(
                "command = {name}\n{source}horizon_T = 1.0\nsteps_N = 6\nxmax = 25\n{extra}output_dir = {}\n",
                out.display()
            ),
        )
        .unwrap();
        run_cli(name, &config_path);
        let first = snapshot(&out);
        run_cli(name, &config_path);
        let second = snapshot(&out);
        assert_eq!(first, second, "{name} outputs differ between identical runs");
    }
    println!("criterion 9 byte-identical reruns: PASS (all 6 commands)");
}
