use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prszz_cli::config::ProjectConfig;
use prszz_cli::error::CliError;
use prszz_cli::fixture::{self, scenarios, FixtureScript};
use prszz_cli::pipeline::{self, RunOptions};

#[derive(Parser)]
#[command(name = "prszz", version, about = "Pull-request aware SZZ pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Project configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, short, default_value_t = 1)]
    jobs: usize,
    /// Variants to trace, overriding the configured ones (comma separated).
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    /// Selection keeps only secured suspects when any exist.
    #[arg(long)]
    secured_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch tracker data into the snapshot directory.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Query the live platforms, recording into replay directories when
        /// configured. Tokens come from PRSZZ_GITHUB_TOKEN and
        /// PRSZZ_JIRA_TOKEN.
        #[arg(long)]
        live: bool,
    },
    /// Match bugs to fixing commits.
    Match {
        #[command(flatten)]
        common: Common,
    },
    /// Trace bug-inducing commits and write datasets.
    Trace {
        #[command(flatten)]
        common: Common,
    },
    /// Score fixing and inducing commits against ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// All stages in order.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        live: bool,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Generate a synthetic fixture project.
    Fixture {
        /// Built-in scenario name.
        #[arg(long, conflicts_with = "script")]
        scenario: Option<String>,
        /// Fixture script (JSON).
        #[arg(long)]
        script: Option<PathBuf>,
        /// Seed of the `random` scenario.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Empty or missing output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<ProjectConfig, CliError> {
    let mut cfg = ProjectConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if !common.variants.is_empty() {
        cfg.variants = common.variants.clone();
    }
    cfg.secured_only |= common.secured_only;
    cfg.validate()?;
    Ok(cfg)
}

fn options(common: &Common, live: bool, truth: Option<PathBuf>) -> RunOptions {
    RunOptions {
        jobs: common.jobs.max(1),
        live,
        truth,
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { common, live } => {
            let cfg = load(&common)?;
            let s = pipeline::ingest(&cfg, &options(&common, live, None))?;
            log::info!("snapshot has {} issues and {} pull requests", s.issues.len(), s.pulls.len());
        }
        Command::Match { common } => {
            let cfg = load(&common)?;
            pipeline::match_stage(&cfg, &options(&common, false, None))?;
            pipeline::write_manifest(&cfg)?;
        }
        Command::Trace { common } => {
            let cfg = load(&common)?;
            pipeline::trace_stage(&cfg, &options(&common, false, None))?;
            pipeline::write_manifest(&cfg)?;
        }
        Command::Evaluate { common, truth } => {
            let cfg = load(&common)?;
            let eval = pipeline::evaluate_stage(&cfg, &options(&common, false, truth))?;
            pipeline::write_manifest(&cfg)?;
            print_summary(&eval);
        }
        Command::Run { common, live, truth } => {
            let cfg = load(&common)?;
            if let Some(eval) = pipeline::run(&cfg, &options(&common, live, truth))? {
                print_summary(&eval);
            }
        }
        Command::Fixture {
            scenario,
            script,
            seed,
            out,
        } => {
            let script: FixtureScript = match (scenario, script) {
                (Some(name), None) => scenarios::by_name(&name, seed).ok_or_else(|| {
                    CliError::Usage(format!("unknown scenario {name}; known: {}", scenarios::NAMES.join(", ")))
                })?,
                (None, Some(path)) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                _ => return Err(CliError::Usage("give --scenario or --script".into())),
            };
            let generated = fixture::generate(&script, &out)?;
            println!("{}", generated.config_path.display());
        }
    }
    Ok(())
}

fn print_summary(eval: &pipeline::Evaluation) {
    let f = &eval.fixing;
    println!(
        "fixing  PR-SZZ P={:.3} R={:.3} F={:.3}  B-SZZ* P={:.3} R={:.3} F={:.3}",
        f.pr_szz.precision, f.pr_szz.recall, f.pr_szz.f_score, f.b_szz.precision, f.b_szz.recall, f.b_szz.f_score
    );
    for (name, m) in &eval.inducing {
        let r = &m.reported;
        println!("{name:<10} P={:.3} R={:.3} F={:.3}", r.precision, r.recall, r.f_score);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code() as u8)
        }
    }
}
