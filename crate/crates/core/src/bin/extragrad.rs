use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use extragrad::harness::{
    parse_config, read_trajectory_csv, run_checks, run_experiment, summarize,
    CheckSelection, ExperimentConfig, RunOptions,
};
use extragrad::optimizers::{stage_probabilities, StagewiseConfig};
use extragrad::Error;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "extragrad", version, about = "Gradient descent with extrapolation: runs and bound checks")]
struct Cli {
    /// Worker threads for multi-seed runs (EXTRAGRAD_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its trajectory CSV and ledger.
    Run {
        config: PathBuf,
        /// Base directory for relative output paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        record_every: Option<usize>,
        /// Comma-separated seeds replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
    },
    /// Run one randomized check against a config's problem.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
    },
    /// Summarize a trajectory CSV across runs.
    Summarize {
        records: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Print the stagewise schedule for a given L, c and S.
    Schedule {
        #[arg(long = "L")]
        lipschitz: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long = "S")]
        stages: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Lemma31,
    Moreau,
    Grad,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var("EXTRAGRAD_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| format!("EXTRAGRAD_THREADS must be a positive integer, got `{v}`")),
        _ => Ok(flag),
    }
}

fn load(path: &PathBuf, seeds: Option<Vec<u64>>, record_every: Option<usize>) -> Result<ExperimentConfig, ExitCode> {
    let configure = || -> extragrad::Result<ExperimentConfig> {
        let mut cfg = parse_config(path)?;
        if let Some(s) = seeds {
            cfg.set_seeds(s)?;
        }
        if let Some(r) = record_every {
            cfg.set_record_every(r)?;
        }
        Ok(cfg)
    };
    configure().map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match threads(cli.threads) {
        Ok(t) => t,
        Err(m) => {
            eprintln!("error: {m}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match cli.command {
        Command::Run {
            config,
            out_dir,
            record_every,
            seed_override,
        } => {
            let cfg = match load(&config, seed_override, record_every) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if cfg.eta_admissible == Some(false) {
                eprintln!(
                    "warning: eta exceeds 1/(12L) = {:e}; bounds do not apply",
                    1.0 / (12.0 * cfg.spec().lipschitz_l)
                );
            }
            let opts = RunOptions { threads, out_dir };
            let (outcome, files) = match run_experiment(&cfg, &opts) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_RUNTIME);
                }
            };
            for run in &outcome.runs {
                match run {
                    Ok(r) => println!(
                        "run {} seed {}: T = {}, min grad norm {:e}, grad evals {}, {:.3}s",
                        r.run_id,
                        r.seed,
                        r.summary.iterations,
                        r.summary.min_grad_norm,
                        r.summary.grad_evals.unwrap_or(0),
                        r.summary.wall_time_s.unwrap_or(0.0)
                    ),
                    Err(f) => println!("run {} seed {}: FAILED: {}", f.run_id, f.seed, f.message),
                }
            }
            for b in &outcome.bounds {
                match &b.report {
                    Some(r) => println!(
                        "bound {} [{}]: {} (lhs {:e}, rhs {:e}, tolerance {:e})",
                        b.theorem_id,
                        b.scope,
                        if r.pass { "PASS" } else { "FAIL" },
                        r.lhs,
                        r.rhs,
                        r.tolerance
                    ),
                    None => println!(
                        "bound {} [{}]: FAIL ({})",
                        b.theorem_id,
                        b.scope,
                        b.error.as_deref().unwrap_or("unavailable")
                    ),
                }
            }
            for c in &outcome.checks {
                println!("check {}: {}", c.check, if c.pass { "PASS" } else { "FAIL" });
            }
            println!("trajectory: {}", files.trajectory.display());
            println!("ledger: {}", files.ledger.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Command::Check {
            which,
            config,
            seed_override,
        } => {
            let cfg = match load(&config, seed_override, None) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let configured = CheckSelection::configured(&cfg.checks);
            let mut sel = CheckSelection::default();
            match which {
                CheckKind::Lemma31 => sel.lemma31 = Some(configured.lemma31.unwrap_or_default()),
                CheckKind::Moreau => sel.moreau = Some(configured.moreau.unwrap_or_default()),
                CheckKind::Grad => sel.grad = Some(configured.grad.unwrap_or_default()),
            }
            let outcomes = run_checks(&cfg, &sel);
            let mut pass = true;
            for c in &outcomes {
                println!("{}", serde_json::to_string(c).expect("serializable"));
                println!("check {}: {}", c.check, if c.pass { "PASS" } else { "FAIL" });
                pass &= c.pass;
            }
            if !pass && outcomes.iter().any(|c| c.error.is_some()) {
                return ExitCode::from(EXIT_RUNTIME);
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Command::Summarize { records, json } => {
            let recs = match read_trajectory_csv(&records) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {}: {e}", records.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match summarize(&recs) {
                Ok(s) if json => println!("{}", serde_json::to_string_pretty(&s).expect("serializable")),
                Ok(s) => print!("{}", s.render()),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            ExitCode::SUCCESS
        }
        Command::Schedule {
            lipschitz,
            c,
            stages,
            alpha,
        } => {
            if !(lipschitz > 0.0) {
                eprintln!("error: L must be positive");
                return ExitCode::from(EXIT_CONFIG);
            }
            let cfg = StagewiseConfig::for_lipschitz(lipschitz, c, alpha, stages);
            let probs = match cfg.validate(lipschitz).and_then(|_| stage_probabilities(alpha, stages)) {
                Ok(p) => p,
                Err(Error::Argument(m)) => {
                    eprintln!("error: {m}");
                    return ExitCode::from(EXIT_CONFIG);
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            println!("gamma = {:e}", cfg.gamma);
            println!("s\teta_s\tT_s\tw_s\tp_s");
            for s in 1..=stages {
                println!(
                    "{s}\t{:e}\t{}\t{:e}\t{:.6}",
                    cfg.stage_eta(s),
                    cfg.stage_iterations(s),
                    cfg.stage_weight(s),
                    probs[s - 1]
                );
            }
            ExitCode::SUCCESS
        }
    }
}
