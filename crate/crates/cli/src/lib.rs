//! The `fairmatch` command line.
//!
//! Every subcommand reads instances in the JSON format of [`fairmatch::io`]
//! and matchings as `paper,reviewer` CSV. Files are written atomically;
//! without `--out`, results go to stdout. Logs are line-delimited JSON on
//! stderr, filtered by the `FAIRMATCH_LOG` environment variable (default
//! `warn`).

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fairmatch::generator::{generate, AffinityModel, GeneratorSpec, LoadBound};
use fairmatch::io::{
    bench_row, matching_to_csv, read_instance, read_matching, to_json_pretty, write_atomic,
    write_instance, BENCH_HEADER,
};
use fairmatch::oracle::{brute_force_optimal, search_space, MAX_SEARCH_SPACE};
use fairmatch::{
    compute_profile, compute_stats, heuristic_t, objective, paper_scores, search_t_fairflow,
    search_t_fairir, solve_assignment, solve_fairflow, solve_fairir, solve_tpms, validate,
    FairFlowConfig, Instance, Matching, ScalingConfig,
};
use tracing_subscriber::EnvFilter;

pub const LOG_ENV: &str = "FAIRMATCH_LOG";

#[derive(Debug, Parser)]
#[command(name = "fairmatch", version, about = "Fair reviewer assignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Alg {
    Tpms,
    Fairir,
    Fairflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Uniform,
    BlockExpert,
    Midl,
    Cvpr,
    Cvpr18,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Midl,
    Cvpr,
    Cvpr18,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Threshold {
    Value(f64),
    Auto,
    Heuristic,
}

fn parse_threshold(s: &str) -> Result<Threshold, String> {
    match s {
        "auto" => Ok(Threshold::Auto),
        "heuristic" => Ok(Threshold::Heuristic),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(Threshold::Value)
            .ok_or_else(|| format!("expected a finite number, `auto` or `heuristic`, got {s:?}")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic instance.
    Generate {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long, default_value_t = 20)]
        reviewers: usize,
        #[arg(long, default_value_t = 30)]
        papers: usize,
        #[arg(long, default_value_t = 3)]
        coverage: u32,
        #[arg(long, default_value_t = 6)]
        load_ub: u32,
        #[arg(long)]
        load_lb: Option<u32>,
        #[arg(long, value_enum, default_value = "uniform")]
        model: Model,
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        #[arg(long, default_value_t = 1)]
        experts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a matching.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        alg: Alg,
        /// Fairness threshold: a number, `auto` (binary search) or `heuristic`.
        #[arg(long, value_parser = parse_threshold, default_value = "auto")]
        t: Threshold,
        /// `off` drops the instance's load lower bounds.
        #[arg(long, value_enum, default_value = "on")]
        lb: Switch,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// Matching CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Statistics JSON of the result.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Run the threshold search and print its probes as JSON.
    SearchT {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        alg: Alg,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, value_enum, default_value = "on")]
        lb: Switch,
    },
    /// Statistics of a matching as JSON.
    Stats {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        matching: PathBuf,
    },
    /// Quintile profile of a matching's paper scores as JSON.
    Profile {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        matching: PathBuf,
    },
    /// Check a matching against the constraints; exits 1 on any violation.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        matching: PathBuf,
        #[arg(long, default_value_t = 0)]
        load_slack: u32,
        /// Also require every paper score to reach this threshold.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        fairness_slack: f64,
    },
    /// Run every algorithm on one instance and print one CSV row each.
    Bench {
        #[arg(long)]
        instance: PathBuf,
        /// Value of the `Data` column; the file stem by default.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, value_enum, default_value = "on")]
        lb: Switch,
    },
}

fn init_logging() {
    let filter = EnvFilter::try_from_env(LOG_ENV).unwrap_or_else(|_| EnvFilter::new("warn"));
    // A second call (tests run the CLI in-process) keeps the first subscriber.
    let _ = tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn load(path: &Path, lb: Switch) -> Result<Instance> {
    let inst = read_instance(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(match lb {
        Switch::On => inst,
        Switch::Off => inst.without_lower_bounds(),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Generate {
            preset,
            reviewers,
            papers,
            coverage,
            load_ub,
            load_lb,
            model,
            blocks,
            experts,
            seed,
            out,
        } => {
            let spec = match preset {
                Some(Preset::Midl) => GeneratorSpec::midl_like(seed),
                Some(Preset::Cvpr) => GeneratorSpec::cvpr_like(seed),
                Some(Preset::Cvpr18) => GeneratorSpec::cvpr18_like(seed),
                None => GeneratorSpec {
                    num_reviewers: reviewers,
                    num_papers: papers,
                    coverage,
                    load_ub: LoadBound::Fixed(load_ub),
                    load_lb,
                    model: match model {
                        Model::Uniform => AffinityModel::Uniform { lo: 0.0, hi: 1.0 },
                        Model::BlockExpert => AffinityModel::BlockExpert { blocks, experts },
                        Model::Midl => AffinityModel::MidlLike,
                        Model::Cvpr => AffinityModel::CvprLike,
                        Model::Cvpr18 => AffinityModel::Cvpr18Like,
                    },
                    seed,
                },
            };
            let inst = generate(&spec)?;
            write_instance(&inst, &out).with_context(|| format!("writing {}", out.display()))?;
            Ok(0)
        }
        Command::Solve {
            instance,
            alg,
            t,
            lb,
            iterations,
            out,
            stats,
        } => {
            let inst = load(&instance, lb)?;
            let start = Instant::now();
            let m = solve(&inst, alg, t, iterations)?;
            let wall = start.elapsed().as_secs_f64();
            emit(out.as_deref(), &matching_to_csv(&m))?;
            if let Some(p) = stats {
                let s = compute_stats(&inst, &m, wall)?;
                emit(Some(&p), &to_json_pretty(&s)?)?;
            }
            Ok(0)
        }
        Command::SearchT {
            instance,
            alg,
            iterations,
            lb,
        } => {
            let inst = load(&instance, lb)?;
            let result = match alg {
                Alg::Fairir => search_t_fairir(&inst, iterations)?,
                Alg::Fairflow => search_t_fairflow(&inst, iterations, &FairFlowConfig::default())?,
                Alg::Tpms => bail!("search-t needs --alg fairir or --alg fairflow"),
            };
            emit(None, &to_json_pretty(&result)?)?;
            Ok(0)
        }
        Command::Stats { instance, matching } => {
            let (inst, m) = load_pair(&instance, &matching)?;
            emit(None, &to_json_pretty(&compute_stats(&inst, &m, 0.0)?)?)?;
            Ok(0)
        }
        Command::Profile { instance, matching } => {
            let (inst, m) = load_pair(&instance, &matching)?;
            let profile = compute_profile(&paper_scores(&inst, &m)?)?;
            emit(None, &to_json_pretty(&profile)?)?;
            Ok(0)
        }
        Command::Verify {
            instance,
            matching,
            load_slack,
            t,
            fairness_slack,
        } => {
            let (inst, m) = load_pair(&instance, &matching)?;
            verify(&inst, &m, load_slack, t, fairness_slack)
        }
        Command::Bench {
            instance,
            name,
            iterations,
            lb,
        } => {
            let inst = load(&instance, lb)?;
            let data = name.unwrap_or_else(|| {
                instance
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let bounds = if inst.load_lb().is_some() { "L+U" } else { "U" };
            let mut text = format!("{BENCH_HEADER}\n");
            for (alg, label) in [
                (Alg::Tpms, "TPMS"),
                (Alg::Fairir, "FairIR"),
                (Alg::Fairflow, "FairFlow"),
            ] {
                let start = Instant::now();
                let m = solve(&inst, alg, Threshold::Auto, iterations)?;
                let s = compute_stats(&inst, &m, start.elapsed().as_secs_f64())?;
                text.push_str(&bench_row(&data, bounds, label, &s));
                text.push('\n');
            }
            emit(None, &text)?;
            Ok(0)
        }
    }
}

fn load_pair(instance: &Path, matching: &Path) -> Result<(Instance, Matching)> {
    let inst = load(instance, Switch::On)?;
    let (nr, np) = inst.shape();
    let m = read_matching(matching, nr, np)
        .with_context(|| format!("reading {}", matching.display()))?;
    Ok((inst, m))
}

fn solve(inst: &Instance, alg: Alg, t: Threshold, iterations: usize) -> Result<Matching> {
    let cfg = FairFlowConfig::default();
    let scaling = ScalingConfig::default();
    let m = match (alg, t) {
        (Alg::Tpms, _) if inst.load_lb().is_some() => solve_assignment(inst, scaling)?,
        (Alg::Tpms, _) => solve_tpms(inst, scaling)?,
        (Alg::Fairir, Threshold::Auto) => {
            let t = search_t_fairir(inst, iterations)?.t_star;
            solve_fairir(inst, t)?.0
        }
        (Alg::Fairflow, Threshold::Auto) => search_t_fairflow(inst, iterations, &cfg)?
            .best_matching
            .context("threshold search returned no matching")?,
        (Alg::Fairir, Threshold::Heuristic) => solve_fairir(inst, heuristic_t(inst, &cfg)?)?.0,
        (Alg::Fairflow, Threshold::Heuristic) => {
            solve_fairflow(inst, heuristic_t(inst, &cfg)?, &cfg)?.0
        }
        (Alg::Fairir, Threshold::Value(t)) => solve_fairir(inst, t)?.0,
        (Alg::Fairflow, Threshold::Value(t)) => solve_fairflow(inst, t, &cfg)?.0,
    };
    Ok(m)
}

fn verify(
    inst: &Instance,
    m: &Matching,
    load_slack: u32,
    t: Option<f64>,
    fairness_slack: f64,
) -> Result<i32> {
    let violations = validate(inst, m, load_slack, t, fairness_slack)?;
    for v in &violations {
        println!("violation: {v}");
    }
    if search_space(inst) <= MAX_SEARCH_SPACE {
        if let Ok((best, _)) = brute_force_optimal(inst) {
            let got = objective(inst, m)?;
            println!(
                "objective {got} (exhaustive optimum {best}, gap {})",
                best - got
            );
        }
    }
    if violations.is_empty() {
        println!("ok");
        Ok(0)
    } else {
        Ok(1)
    }
}
