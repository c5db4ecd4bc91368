//! Monte-Carlo benchmark of grasp ranking modes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use grasp_select::harness::{self, Fixture, RankChoice, ScenarioConfig, TaskKind};
use grasp_select::metrics::RankMode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    PickPlace,
    Pour,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Start,
    Goal,
    Average,
    All,
}

#[derive(Debug, Parser)]
#[command(
    name = "grasp-bench",
    version,
    about = "Randomized grasp-ranking benchmark"
)]
struct Args {
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Trials per object (or per pourer/receiver pair).
    #[arg(long, default_value_t = harness::DEFAULT_TRIALS)]
    trials: usize,

    #[arg(long, value_enum, default_value_t = TaskArg::PickPlace)]
    task: TaskArg,

    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,

    /// Ranked grasp to execute: best, worst or index:<k>.
    #[arg(long, default_value = "best")]
    rank: RankChoice,

    /// Fixture file; the bundled scene is used when omitted.
    #[arg(long)]
    fixtures: Option<PathBuf>,

    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Elbow-angle samples per IK query.
    #[arg(long)]
    phi_samples: Option<usize>,

    /// Planner node budget per query.
    #[arg(long)]
    budget: Option<usize>,

    /// Comma-separated object (or pourer+receiver) names to run.
    #[arg(long, value_delimiter = ',')]
    objects: Vec<String>,

    /// Shortcut planned paths.
    #[arg(long)]
    shortcut: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

fn build_config(args: &Args) -> grasp_select::Result<ScenarioConfig> {
    let fixture = match &args.fixtures {
        Some(p) => Fixture::load(p)?,
        None => Fixture::default_fixture(),
    };
    let kind = match args.task {
        TaskArg::PickPlace => TaskKind::PickPlace,
        TaskArg::Pour => TaskKind::Pour,
    };
    let mut config = ScenarioConfig::new(fixture, kind, args.seed)?;
    config.trials = args.trials;
    config.modes = match args.mode {
        ModeArg::Start => vec![RankMode::Start],
        ModeArg::Goal => vec![RankMode::Goal],
        ModeArg::Average => vec![RankMode::Average],
        ModeArg::All => RankMode::ALL.to_vec(),
    };
    config.rank = args.rank;
    if let Some(n) = args.phi_samples {
        config.exec.phi_samples = n;
    }
    if let Some(b) = args.budget {
        config.exec.rrt.budget = b;
    }
    config.exec.rrt.shortcut = args.shortcut;
    if !args.objects.is_empty() {
        let names: Vec<&str> = args.objects.iter().map(String::as_str).collect();
        config.retain_subjects(&names);
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let report = harness::run_suite(&config);

    let written = match &args.out {
        Some(p) => File::create(p)
            .map_err(grasp_select::Error::from)
            .and_then(|f| harness::write_csv(&report.rows, BufWriter::new(f))),
        None => harness::write_csv(&report.rows, io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }

    let mut err = io::stderr().lock();
    let _ = writeln!(
        err,
        "{:<24} {:<8} {:>8} {:>10} {:>10} {:>10}",
        "object", "mode", "success", "disp_m", "nodes", "wall_s"
    );
    for s in &report.summary {
        let _ = writeln!(
            err,
            "{:<24} {:<8} {:>7.1}% {:>10} {:>10.1} {:>10.3}",
            s.object,
            s.mode.label(),
            100.0 * s.success_rate,
            s.mean_hand_disp_m
                .map(|d| format!("{d:.3}"))
                .unwrap_or_else(|| "-".into()),
            s.mean_plan_nodes,
            s.mean_plan_wall_s
        );
    }

    if report.all_infeasible() {
        eprintln!("every trial was infeasible");
        return ExitCode::from(EXIT_INFEASIBLE);
    }
    ExitCode::SUCCESS
}
