use std::path::{Path, PathBuf};

use obfuscation_game::config::{default_config, load_config, DEFAULT_DATA_DIM, DEFAULT_DP_DELTA};
use obfuscation_game::dp_mechanism::{effective_sigma, epsilon_from_sigma, norm_bound_probability, sigma_from_epsilon};
use obfuscation_game::game_model::user_utility;
use obfuscation_game::oracle::brute_force_equilibrium_refined;
use obfuscation_game::response_solver::GameSolver;
use obfuscation_game::validation::{run_suite, Cell, Suite, SuiteReport};
use obfuscation_game::{GameConfig, StrategyProfile, Threshold};

use crate::output::{ensure_dir, fmt_num, write_file, Csv, Record, RunManifest};
use crate::{Cli, CliError, Command, DpArgs, SweepArgs, ValidateArgs};

/// Oracle refinement used by `solve --oracle`.
const ORACLE_FINE_STEP: f64 = 0.01;
const ORACLE_ZOOM_LEVELS: usize = 6;
/// The oracle pins each user's noise to about 1e-7; on large games the
/// learner's utility turns that into errors of order 1e-6, so agreement is
/// judged at 1e-4.
const ORACLE_UTILITY_TOLERANCE: f64 = 1e-4;

const MAX_SWEEP_POINTS: usize = 1_000_000;
const DEFAULT_OUT: &str = "out";

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve => solve(cli),
        Command::Sweep(args) => sweep(cli, args),
        Command::Dp(args) => dp(cli, args),
        Command::Validate(args) => validate(cli, args),
    }
}

fn config(cli: &Cli) -> Result<(GameConfig, String), CliError> {
    match &cli.config {
        Some(path) => Ok((load_config(path)?, path.display().to_string())),
        None => Ok((default_config(), "<built-in default>".into())),
    }
}

fn manifest(cli: &Cli, command: &str, config: &str, out_dir: &Path) -> RunManifest {
    RunManifest {
        command: command.into(),
        args: std::env::args().skip(1).collect(),
        config: config.into(),
        seed: cli.seed,
        out_dir: out_dir.to_path_buf(),
        version: env!("CARGO_PKG_VERSION"),
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn threshold_csv(thresholds: &[Threshold]) -> Csv {
    let mut csv = Csv::new(&["user", "threshold", "kind"]);
    for (i, t) in thresholds.iter().enumerate() {
        csv.row(&[i.to_string(), fmt_num(t.location()), t.kind().into()]);
    }
    csv
}

// ----------------------------------------------------------------- solve

fn solve(cli: &Cli) -> Result<(), CliError> {
    let (config, origin) = config(cli)?;
    let solver = GameSolver::new(&config)?;
    let eq = solver.solve()?;

    let mut rec = Record::default();
    rec.num("sigma_L_star", eq.sigma_l_star);
    rec.num("U_L", eq.learner_utility);
    for (i, (s, u)) in eq.sigma_s_star.iter().zip(&eq.user_utilities).enumerate() {
        rec.num(format!("sigma_S_star_{i}"), *s);
        rec.num(format!("U_S_{i}"), *u);
        let total = effective_sigma(eq.sigma_l_star, *s);
        rec.num(format!("epsilon_{i}"), epsilon_from_sigma(total, config.dp_delta)?.epsilon);
    }
    rec.num("delta", config.dp_delta);

    let dir = out_dir(cli);
    ensure_dir(&dir)?;
    write_file(&dir.join("equilibrium.txt"), rec.as_str())?;
    write_file(&dir.join("thresholds.csv"), &threshold_csv(&eq.per_user_thresholds).into_string())?;
    print!("{}", rec.as_str());

    let mut verdict = Ok(());
    if cli.oracle {
        let brute = brute_force_equilibrium_refined(&config, ORACLE_FINE_STEP, ORACLE_ZOOM_LEVELS)?;
        let sigma_diff = (eq.sigma_l_star - brute.sigma_l_star).abs();
        let utility_diff = (eq.learner_utility - brute.learner_utility).abs();
        let agree = sigma_diff <= config.solver.grid_step && utility_diff <= ORACLE_UTILITY_TOLERANCE;
        let mut rec = Record::default();
        rec.num("oracle_fine_step", ORACLE_FINE_STEP);
        rec.put("oracle_zoom_levels", ORACLE_ZOOM_LEVELS.to_string());
        rec.num("oracle_sigma_L_star", brute.sigma_l_star);
        rec.num("oracle_U_L", brute.learner_utility);
        rec.num("sigma_L_diff", sigma_diff);
        rec.num("U_L_diff", utility_diff);
        rec.num("sigma_L_tolerance", config.solver.grid_step);
        rec.num("U_L_tolerance", ORACLE_UTILITY_TOLERANCE);
        rec.put("agree", agree.to_string());
        write_file(&dir.join("oracle.txt"), rec.as_str())?;
        print!("{}", rec.as_str());
        if !agree {
            verdict = Err(CliError::Validation(format!(
                "solver and oracle disagree: |d sigma_L| = {}, |d U_L| = {}",
                fmt_num(sigma_diff),
                fmt_num(utility_diff)
            )));
        }
    }
    manifest(cli, "solve", &origin, &dir).write_to(&dir)?;
    verdict
}

// ----------------------------------------------------------------- sweep

/// `min, min + step, ...` up to `max`, computed by multiplication so the
/// points carry no accumulated rounding.
fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    for (name, v) in [("--sigma-min", min), ("--sigma-max", max), ("--step", step)] {
        if !v.is_finite() {
            return Err(CliError::Usage(format!("{name} must be finite, got {v}")));
        }
    }
    if min < 0.0 {
        return Err(CliError::Usage(format!("--sigma-min must be nonnegative, got {min}")));
    }
    if min > max {
        return Err(CliError::Usage(format!("--sigma-min ({min}) exceeds --sigma-max ({max})")));
    }
    if step <= 0.0 {
        return Err(CliError::Usage(format!("--step must be positive, got {step}")));
    }
    let intervals = ((max - min) / step * (1.0 + 1e-12)).floor();
    if intervals >= MAX_SWEEP_POINTS as f64 {
        return Err(CliError::Usage(format!("--step {step} gives more than {MAX_SWEEP_POINTS} points")));
    }
    Ok((0..=intervals as usize).map(|k| min + k as f64 * step).collect())
}

fn sweep(cli: &Cli, args: &SweepArgs) -> Result<(), CliError> {
    let (base, origin) = config(cli)?;
    let max = args.sigma_max.unwrap_or(base.solver.sigma_max);
    let step = args.step.unwrap_or(base.solver.grid_step);
    let sigma_l = grid(args.sigma_min, max, step)?;
    let sigma_s = grid(0.0, max, step)?;
    let levels = if args.levels.is_empty() {
        (0..5).map(|k| args.sigma_min + k as f64 * (max - args.sigma_min) / 4.0).collect()
    } else {
        args.levels.clone()
    };
    if let Some(bad) = levels.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(CliError::Usage(format!("--levels entries must be finite and nonnegative, got {bad}")));
    }

    let root = out_dir(cli);
    let variants: Vec<(GameConfig, PathBuf)> = if args.user_cost.is_empty() {
        vec![(base, root.clone())]
    } else {
        args.user_cost
            .iter()
            .map(|&c| (base.with_user_cost(c), root.join(format!("nbar_{}", fmt_num(c)))))
            .collect()
    };
    for (config, dir) in &variants {
        config.validate().map_err(|e| CliError::Usage(format!("--user-cost: {e}")))?;
        ensure_dir(dir)?;
        write_variant(config, dir, &sigma_l, &sigma_s, &levels)?;
        manifest(cli, "sweep", &origin, dir).write_to(dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn write_variant(config: &GameConfig, dir: &Path, sigma_l: &[f64], sigma_s: &[f64], levels: &[f64]) -> Result<(), CliError> {
    let solver = GameSolver::new(config)?;
    let n = config.n_users();

    // Row 1: each user's utility against their own noise, the others
    // playing their best responses to the same σ_L.
    let mut row1 = Csv::new(&["sigma_L", "user", "sigma_S", "U_S"]);
    for &l in levels {
        let responses = solver.best_responses(l);
        for i in 0..n {
            let mut profile = StrategyProfile::new(l, responses.clone());
            for &s in sigma_s {
                profile.sigma_s[i] = s;
                let u = user_utility(config, i, &profile)?;
                row1.row(&[fmt_num(l), i.to_string(), fmt_num(s), fmt_num(u)]);
            }
        }
    }

    let mut header2 = vec!["sigma_L".to_string()];
    header2.extend((0..n).map(|i| format!("br_user_{i}")));
    let mut header3 = vec!["sigma_L".to_string(), "U_L".to_string()];
    header3.extend((0..n).map(|i| format!("U_S_{i}")));
    let mut row2 = Csv::new(&header2);
    let mut row3 = Csv::new(&header3);
    for &l in sigma_l {
        let profile = solver.induced_profile(l);
        let mut cells = vec![fmt_num(l)];
        cells.extend(profile.sigma_s.iter().map(|&s| fmt_num(s)));
        row2.row(&cells);

        let mut cells = vec![fmt_num(l), fmt_num(solver.leader_objective(l)?)];
        for i in 0..n {
            cells.push(fmt_num(user_utility(config, i, &profile)?));
        }
        row3.row(&cells);
    }

    write_file(&dir.join("row1_user_utility.csv"), &row1.into_string())?;
    write_file(&dir.join("row2_best_response.csv"), &row2.into_string())?;
    write_file(&dir.join("row3_leader_utility.csv"), &row3.into_string())?;
    write_file(&dir.join("thresholds.csv"), &threshold_csv(&solver.thresholds()).into_string())?;
    Ok(())
}

// -------------------------------------------------------------------- dp

fn dp(cli: &Cli, args: &DpArgs) -> Result<(), CliError> {
    let (delta_default, d_default, origin) = match &cli.config {
        Some(path) => {
            let c = load_config(path)?;
            (c.dp_delta, c.data_dim, path.display().to_string())
        }
        None => (DEFAULT_DP_DELTA, DEFAULT_DATA_DIM, "<none>".to_string()),
    };
    let delta = args.delta.unwrap_or(delta_default);
    let d = args.d.unwrap_or(d_default);
    if d == 0 {
        return Err(CliError::Usage("--d must be at least 1".into()));
    }
    let named = |flag: &str, e: obfuscation_game::Error| CliError::Usage(format!("{flag}: {e}"));

    let mut rows: Vec<(&str, String)> = Vec::new();
    let total = match (args.sigma, args.epsilon) {
        (Some(s), _) => Some(s),
        (None, Some(eps)) => Some(sigma_from_epsilon(eps, delta).map_err(|e| named("--epsilon/--delta", e))?),
        (None, None) if args.sigma_l.is_some() || args.sigma_s.is_some() => {
            Some(effective_sigma(args.sigma_l.unwrap_or(0.0), args.sigma_s.unwrap_or(0.0)))
        }
        _ => None,
    };
    if let Some(total) = total {
        let g = epsilon_from_sigma(total, delta).map_err(|e| named("--sigma/--delta", e))?;
        rows.push(("sigma", fmt_num(g.total_sigma)));
        rows.push(("delta", fmt_num(g.delta)));
        rows.push(("epsilon", fmt_num(g.epsilon)));
        rows.push(("in_stated_range", g.in_stated_range.to_string()));
    }
    if let Some(zeta) = args.zeta {
        let r = norm_bound_probability(d, zeta, args.sigma_l.unwrap_or(0.0), args.sigma_s.unwrap_or(0.0), delta)
            .map_err(|e| named("--zeta/--sigma-l/--sigma-s/--delta", e))?;
        if total.is_none() {
            rows.push(("delta", fmt_num(delta)));
        }
        rows.push(("d", r.dimension.to_string()));
        rows.push(("zeta", fmt_num(r.zeta)));
        rows.push(("radius_sq", fmt_num(r.radius_sq)));
        rows.push(("probability", fmt_num(r.probability)));
        rows.push(("combined_success", fmt_num(r.combined_success)));
        rows.push(("union_bound_success", fmt_num(r.union_bound_success)));
    }
    if rows.is_empty() {
        return Err(CliError::Usage(
            "nothing to compute: give --sigma, --epsilon, --sigma-l/--sigma-s or --zeta".into(),
        ));
    }

    let mut csv = Csv::new(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    csv.row(&rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>());
    let csv = csv.into_string();
    if args.csv {
        print!("{csv}");
    } else {
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        for (k, v) in &rows {
            println!("{k:<width$}  {v}");
        }
    }
    if let Some(dir) = &cli.out {
        ensure_dir(dir)?;
        write_file(&dir.join("dp.csv"), &csv)?;
        manifest(cli, "dp", &origin, dir).write_to(dir)?;
    }
    Ok(())
}

// -------------------------------------------------------------- validate

fn cell(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Num(v) => fmt_num(*v),
        Cell::Flag(v) => v.to_string(),
    }
}

fn summary(report: &SuiteReport, seed: u64, trials: usize) -> Record {
    let mut rec = Record::default();
    rec.put("suite", report.suite.name());
    rec.put("seed", seed.to_string());
    rec.put("trials", trials.to_string());
    rec.put("passed", report.passed.to_string());
    rec.put("total", report.total.to_string());
    rec.num("worst_slack", report.worst_slack);
    let seeds: Vec<String> = report.failing_seeds.iter().map(u64::to_string).collect();
    rec.put("failing_seeds", seeds.join(" "));
    let mut seen: Vec<&str> = Vec::new();
    for (k, v) in &report.notes {
        let repeats = report.notes.iter().filter(|(n, _)| n == k).count();
        if repeats > 1 {
            let idx = seen.iter().filter(|s| *s == k).count();
            rec.num(format!("{k}_{idx}"), *v);
        } else {
            rec.num(*k, *v);
        }
        seen.push(k);
    }
    rec
}

fn validate(cli: &Cli, args: &ValidateArgs) -> Result<(), CliError> {
    let suite: Suite = args.suite.parse()?;
    let trials = args.trials.unwrap_or(suite.default_trials());
    let report = run_suite(suite, Some(trials), cli.seed)?;

    let mut csv = Csv::new(&report.header);
    for row in &report.rows {
        csv.row(&row.iter().map(cell).collect::<Vec<_>>());
    }
    let rec = summary(&report, cli.seed, trials);
    let dir = out_dir(cli);
    ensure_dir(&dir)?;
    write_file(&dir.join(format!("{}.csv", suite.name())), &csv.into_string())?;
    write_file(&dir.join(format!("{}_summary.txt", suite.name())), rec.as_str())?;
    manifest(cli, "validate", "<none>", &dir).write_to(&dir)?;
    print!("{}", rec.as_str());

    if report.all_passed() {
        Ok(())
    } else {
        let replay = match suite {
            Suite::Lemma1 | Suite::Lemma2 | Suite::Oracle => "replay one with --seed <s> --trials 1",
            Suite::Chi2 | Suite::Scaling => "replay with the same --seed and --trials",
        };
        Err(CliError::Validation(format!(
            "{}: {}/{} passed; failing seeds: {:?}; {replay}",
            suite.name(),
            report.passed,
            report.total,
            report.failing_seeds
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_the_end_point_without_drift() {
        let g = grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 1.0);
        assert_eq!(g[3], 0.30000000000000004);
        assert_eq!(grid(2.0, 2.0, 0.5).unwrap(), vec![2.0]);
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        for (lo, hi, st, flag) in [
            (1.0, 0.5, 0.1, "--sigma-min"),
            (0.0, 1.0, 0.0, "--step"),
            (-1.0, 1.0, 0.1, "--sigma-min"),
            (0.0, f64::NAN, 0.1, "--sigma-max"),
            (0.0, 1.0, 1e-9, "--step"),
        ] {
            match grid(lo, hi, st) {
                Err(CliError::Usage(m)) => assert!(m.contains(flag), "{m}"),
                other => panic!("{other:?}"),
            }
        }
    }
}
