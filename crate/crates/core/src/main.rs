use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use aoi_mec::baselines::{freeze, oracle_schedule, run_policy, PolicyKind, PolicySpec};
use aoi_mec::bench::{overhead, report_params, run_plan, Algo, BackhaulMode, BenchError, ExperimentPlan};
use aoi_mec::env::World;
use aoi_mec::learn::{Framework, Trainer, TrainerConfig};
use aoi_mec::scenario::ScenarioConfig;

#[derive(Parser)]
#[command(name = "aoi-mec", version, about = "Age-of-information experiments for UAV-assisted edge computing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trainer JSON.
    #[arg(long)]
    trainer: Option<PathBuf>,
    /// Number of seeds, 0..N.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    backhaul: Option<BackhaulMode>,
    /// Devices upload straight to the BS.
    #[arg(long)]
    no_uav: bool,
    /// Training episodes, overriding the trainer config.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One algorithm on one scenario over several seeds.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Algo::Greedy)]
        algo: Algo,
    },
    /// A grid of runs, from a plan file and/or axis flags.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Plan JSON; flags given here override it.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',')]
        algo: Vec<Algo>,
        #[arg(long, value_delimiter = ',')]
        devices: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        subcarriers: Vec<usize>,
    },
    /// Exhaustive optimum against the baselines on frozen tiny instances.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Signalling volume and parameter counts of both frameworks.
    Overhead {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("oracle check failed: {0}")]
    Oracle(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Bench(e) => e.kind(),
            CliError::Oracle(_) => "oracle",
        }
    }
}

fn load_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, BenchError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| BenchError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn base_plan(common: &Common, algos: Vec<Algo>) -> Result<ExperimentPlan, BenchError> {
    let scenario: ScenarioConfig = load_json(common.config.as_deref())?;
    let mut trainer: TrainerConfig = load_json(common.trainer.as_deref())?;
    if let Some(e) = common.episodes {
        trainer.episodes = e;
    }
    let mut plan = ExperimentPlan::single(scenario, trainer, algos[0], common.seeds);
    plan.algos = algos;
    apply_flags(&mut plan, common);
    Ok(plan)
}

fn apply_flags(plan: &mut ExperimentPlan, common: &Common) {
    if let Some(b) = common.backhaul {
        plan.backhaul = Some(vec![b]);
    }
    if common.no_uav {
        plan.no_uav = Some(vec![true]);
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<(), BenchError> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    seed: u64,
    oracle: f64,
    replayed: f64,
    greedy: f64,
    round_robin: f64,
    random: f64,
}

fn oracle_check(common: &Common) -> Result<(), CliError> {
    let base: ScenarioConfig = load_json(common.config.as_deref())?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for seed in 0..common.seeds {
        let cfg = freeze(&ScenarioConfig { seed, ..base.clone() });
        let res = oracle_schedule(&cfg).map_err(BenchError::from)?;
        let mut w = World::new(cfg.clone()).map_err(BenchError::from)?;
        for a in &res.schedule {
            w.step(a).map_err(BenchError::from)?;
        }
        let score = |kind| -> Result<f64, BenchError> { Ok(run_policy(PolicySpec { kind, seed }, &cfg)?.0.objective) };
        let row = OracleRow {
            seed,
            oracle: res.objective,
            replayed: w.summary().objective,
            greedy: score(PolicyKind::GreedyMaxAge)?,
            round_robin: score(PolicyKind::RoundRobin)?,
            random: score(PolicyKind::Random)?,
        };
        if row.replayed != row.oracle {
            failures.push(format!("seed {seed}: replay {} != oracle {}", row.replayed, row.oracle));
        }
        if row.oracle > row.greedy.min(row.round_robin).min(row.random) {
            failures.push(format!("seed {seed}: a baseline beat the oracle"));
        }
        rows.push(row);
    }
    std::fs::create_dir_all(&common.out).map_err(|source| BenchError::Io {
        path: common.out.display().to_string(),
        source,
    })?;
    let mut w = csv::Writer::from_path(common.out.join("oracle.csv")).map_err(BenchError::from)?;
    for r in &rows {
        w.serialize(r).map_err(BenchError::from)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: "oracle.csv".into(), source })?;
    print_json(&rows)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Oracle(failures.join("; ")))
    }
}

#[derive(Serialize)]
struct OverheadOut {
    maddpg: aoi_mec::bench::OverheadReport,
    frl: aoi_mec::bench::OverheadReport,
    params: aoi_mec::bench::ParamReport,
}

fn overhead_cmd(common: &Common) -> Result<(), CliError> {
    let plan = base_plan(common, vec![Algo::Maddpg])?;
    let cfg = plan.cells()[0].scenario(&plan.scenario, 0);
    let trainer = Trainer::new(cfg.clone(), plan.trainer.clone()).map_err(BenchError::from)?;
    let out = OverheadOut {
        maddpg: overhead(&cfg, &plan.trainer, Framework::Maddpg),
        frl: overhead(&cfg, &plan.trainer, Framework::Frl),
        params: report_params(&trainer),
    };
    std::fs::create_dir_all(&common.out).map_err(|source| BenchError::Io {
        path: common.out.display().to_string(),
        source,
    })?;
    let mut w = csv::Writer::from_path(common.out.join("params.csv")).map_err(BenchError::from)?;
    for r in &out.params.rows {
        w.serialize(r).map_err(BenchError::from)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: "params.csv".into(), source })?;
    let mut w = csv::Writer::from_path(common.out.join("overhead.csv")).map_err(BenchError::from)?;
    w.serialize(&out.maddpg).map_err(BenchError::from)?;
    w.serialize(&out.frl).map_err(BenchError::from)?;
    w.flush().map_err(|source| BenchError::Io { path: "overhead.csv".into(), source })?;
    print_json(&out)?;
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, algo } => {
            let plan = base_plan(&common, vec![algo])?;
            print_json(&run_plan(&plan, &common.out, "run")?)?;
        }
        Command::Sweep { common, plan, algo, devices, subcarriers } => {
            let mut p = match &plan {
                Some(path) => {
                    let mut p = ExperimentPlan::load(path)?;
                    if common.config.is_some() {
                        p.scenario = load_json(common.config.as_deref())?;
                    }
                    if common.trainer.is_some() {
                        p.trainer = load_json(common.trainer.as_deref())?;
                    }
                    if let Some(e) = common.episodes {
                        p.trainer.episodes = e;
                    }
                    if common.seeds > 1 {
                        p.seeds = (0..common.seeds).collect();
                    }
                    apply_flags(&mut p, &common);
                    p
                }
                None => base_plan(&common, if algo.is_empty() { vec![Algo::Greedy] } else { algo.clone() })?,
            };
            if !algo.is_empty() {
                p.algos = algo;
            }
            if !devices.is_empty() {
                p.devices = Some(devices);
            }
            if !subcarriers.is_empty() {
                p.access_subcarriers = Some(subcarriers);
            }
            print_json(&run_plan(&p, &common.out, "sweep")?)?;
        }
        Command::OracleCheck { common } => oracle_check(&common)?,
        Command::Overhead { common } => overhead_cmd(&common)?,
    }
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": message, "kind": kind });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string()),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
