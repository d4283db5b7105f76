use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, overhead, Algo, BenchError, Cell, ExperimentPlan, OverheadReport};
use crate::baselines::{Policy, PolicyKind, PolicySpec};
use crate::env::{MetricsRecord, World};
use crate::fedavg::FedEvent;
use crate::learn::{EpisodeStats, Framework, Trainer};
use crate::scenario::ScenarioConfig;

/// Everything one (cell, seed) run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub cell: Cell,
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub curve: Vec<EpisodeStats>,
    pub fed_events: Vec<FedEvent>,
    pub tidy: TidyRow,
}

/// One row per (grid point, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub algo: Algo,
    pub devices: usize,
    pub access_subcarriers: usize,
    pub backhaul: String,
    pub no_uav: bool,
    pub seed: u64,
    /// First episode counted in the score.
    pub scored_from_episode: usize,
    pub mean_delta_m: f64,
    pub mean_delta_b: f64,
    pub objective: f64,
    pub violations: usize,
}

/// Mean and sample standard deviation over the seeds of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: Algo,
    pub devices: usize,
    pub access_subcarriers: usize,
    pub backhaul: String,
    pub no_uav: bool,
    pub runs: usize,
    pub mean_delta_m: f64,
    pub std_delta_m: f64,
    pub mean_delta_b: f64,
    pub std_delta_b: f64,
    pub objective: f64,
    pub std_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the plan's canonical JSON.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<String>,
    pub plan: ExperimentPlan,
}

pub fn config_hash(plan: &ExperimentPlan) -> String {
    let json = serde_json::to_string(plan).expect("plan serializes");
    format!("{:x}", Sha256::digest(json.as_bytes()))
}

/// Per-hop and objective means of the per-slot values, in record order.
fn slot_means<'a>(records: impl Iterator<Item = &'a MetricsRecord>) -> (f64, f64, f64, usize) {
    let (mut m, mut b, mut o, mut n) = (0.0, 0.0, 0.0, 0usize);
    for r in records {
        m += r.mean_delta_m;
        b += r.mean_delta_b;
        o += r.objective;
        n += 1;
    }
    let d = n.max(1) as f64;
    (m / d, b / d, o / d, n)
}

/// Recomputes a run's score from its per-slot CSV, counting episodes from
/// `from_episode` on.
pub fn read_slot_means(path: &Path, from_episode: usize) -> Result<(f64, f64, f64), BenchError> {
    let mut rd = csv::Reader::from_path(path)?;
    let (mut m, mut b, mut o, mut n) = (0.0, 0.0, 0.0, 0usize);
    for row in rd.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64, BenchError> {
            row[i].parse().map_err(|_| BenchError::Plan(format!("bad number {:?} in {}", &row[i], path.display())))
        };
        if (num(0)? as usize) < from_episode {
            continue;
        }
        m += num(2)?;
        b += num(3)?;
        o += num(4)?;
        n += 1;
    }
    let d = n.max(1) as f64;
    Ok((m / d, b / d, o / d))
}

fn framework(algo: Algo) -> Option<Framework> {
    match algo {
        Algo::Maddpg => Some(Framework::Maddpg),
        Algo::Frl => Some(Framework::Frl),
        _ => None,
    }
}

fn policy_kind(algo: Algo, no_uav: bool) -> PolicyKind {
    match algo {
        Algo::Random => PolicyKind::Random,
        Algo::RoundRobin => PolicyKind::RoundRobin,
        _ if no_uav => PolicyKind::NoUav,
        _ => PolicyKind::GreedyMaxAge,
    }
}

/// Plays one grid point for one seed.
pub fn run_cell(plan: &ExperimentPlan, cell: Cell, seed: u64) -> Result<RunResult, BenchError> {
    let scenario: ScenarioConfig = cell.scenario(&plan.scenario, seed);
    let mut records = Vec::new();
    let mut curve = Vec::new();
    let mut fed_events = Vec::new();
    let scored_from = if let Some(fw) = framework(cell.algo) {
        let tc = crate::learn::TrainerConfig { seed, ..plan.trainer.clone() };
        let report = overhead(&scenario, &tc, fw);
        let per_exchange_bytes = report.bits_per_exchange / 8;
        let mut trainer = Trainer::new(scenario.clone(), tc.clone())?;
        let rep = trainer.train_with(fw, |stats, recs| {
            let mut recs = recs.to_vec();
            if let Some(last) = recs.last_mut() {
                last.bytes_overhead = match fw {
                    Framework::Maddpg => per_exchange_bytes * scenario.slots as u64,
                    Framework::Frl if stats.aggregated => per_exchange_bytes,
                    Framework::Frl => 0,
                };
            }
            records.extend(recs);
        })?;
        curve = rep.curve;
        fed_events = rep.fed_events;
        tc.episodes.saturating_sub(plan.eval_window) + 1
    } else {
        for e in 1..=plan.baseline_episodes {
            let spec = PolicySpec {
                kind: policy_kind(cell.algo, cell.no_uav),
                seed: seed.wrapping_mul(1_000_003).wrapping_add(e as u64),
            };
            let mut world = World::new(scenario.clone())?;
            let mut policy = Policy::new(spec, &scenario)?;
            while !world.is_done() {
                let act = policy.act(&world)?;
                let mut rec = world.step(&act)?.record;
                rec.episode = e;
                records.push(rec);
            }
        }
        1
    };
    let (m, b, o, _) = slot_means(records.iter().filter(|r| r.episode >= scored_from));
    let tidy = TidyRow {
        algo: cell.algo,
        devices: cell.devices,
        access_subcarriers: cell.access_subcarriers,
        backhaul: cell.backhaul.to_string(),
        no_uav: cell.no_uav,
        seed,
        scored_from_episode: scored_from,
        mean_delta_m: m,
        mean_delta_b: b,
        objective: o,
        violations: records.iter().map(|r| r.violations).sum(),
    };
    Ok(RunResult { cell, seed, records, curve, fed_events, tidy })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Aggregates tidy rows per grid point, in order of first appearance.
pub fn summarize(rows: &[TidyRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<usize, Vec<&TidyRow>> = BTreeMap::new();
    let mut order: Vec<(Algo, usize, usize, String, bool)> = Vec::new();
    for r in rows {
        let key = (r.algo, r.devices, r.access_subcarriers, r.backhaul.clone(), r.no_uav);
        let i = order.iter().position(|k| *k == key).unwrap_or_else(|| {
            order.push(key);
            order.len() - 1
        });
        groups.entry(i).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(i, g)| {
            let (algo, devices, access_subcarriers, backhaul, no_uav) = order[i].clone();
            let col = |f: fn(&TidyRow) -> f64| mean_std(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mm, sm) = col(|r| r.mean_delta_m);
            let (mb, sb) = col(|r| r.mean_delta_b);
            let (mo, so) = col(|r| r.objective);
            SummaryRow {
                algo,
                devices,
                access_subcarriers,
                backhaul,
                no_uav,
                runs: g.len(),
                mean_delta_m: mm,
                std_delta_m: sm,
                mean_delta_b: mb,
                std_delta_b: sb,
                objective: mo,
                std_objective: so,
            }
        })
        .collect()
}

fn create_dir(path: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn write_records(path: &Path, uavs: usize, records: &[MetricsRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MetricsRecord::header(uavs))?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(io_err(path))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Serialize)]
struct FedRow<'a> {
    cell: &'a str,
    seed: u64,
    epoch: usize,
    w: f64,
    period: usize,
    spread_before: f64,
    spread_after: f64,
}

#[derive(Serialize)]
struct OverheadRow {
    scenario: String,
    framework: Framework,
    uavs: usize,
    uav_state_len: usize,
    global_state_len: usize,
    actor_params: usize,
    bits_per_exchange: u64,
    exchanges: u64,
    episodes: usize,
    total_bits: u64,
    bits_per_episode: f64,
    bytes_per_episode: f64,
}

impl OverheadRow {
    fn new(scenario: String, r: OverheadReport) -> Self {
        Self {
            scenario,
            framework: r.framework,
            uavs: r.uavs,
            uav_state_len: r.uav_state_len,
            global_state_len: r.global_state_len,
            actor_params: r.actor_params,
            bits_per_exchange: r.bits_per_exchange,
            exchanges: r.exchanges,
            episodes: r.episodes,
            total_bits: r.total_bits,
            bits_per_episode: r.bits_per_episode,
            bytes_per_episode: r.bytes_per_episode,
        }
    }
}

/// Writes every artifact of a finished plan under `out`.
pub fn write_outputs(out: &Path, plan: &ExperimentPlan, command: &str, results: &[RunResult]) -> Result<Vec<SummaryRow>, BenchError> {
    create_dir(out)?;
    for r in results {
        let id = r.cell.id();
        let dir = out.join("runs").join(&id);
        create_dir(&dir)?;
        let uavs = r.cell.scenario(&plan.scenario, r.seed).uavs;
        write_records(&dir.join(format!("seed_{}.csv", r.seed)), uavs, &r.records)?;
        if r.cell.algo.is_learner() {
            let dir = out.join("curves").join(&id);
            create_dir(&dir)?;
            write_rows(&dir.join(format!("seed_{}.csv", r.seed)), &r.curve)?;
        }
    }

    let fed: Vec<(String, &RunResult)> = results
        .iter()
        .filter(|r| !r.fed_events.is_empty())
        .map(|r| (r.cell.id(), r))
        .collect();
    if !fed.is_empty() {
        let rows: Vec<FedRow> = fed
            .iter()
            .flat_map(|(id, r)| {
                r.fed_events.iter().map(move |e| FedRow {
                    cell: id,
                    seed: r.seed,
                    epoch: e.epoch,
                    w: e.w,
                    period: e.period,
                    spread_before: e.spread_before,
                    spread_after: e.spread_after,
                })
            })
            .collect();
        write_rows(&out.join("fed_events.csv"), &rows)?;
    }

    let tidy: Vec<TidyRow> = results.iter().map(|r| r.tidy.clone()).collect();
    write_rows(&out.join("tidy.csv"), &tidy)?;
    let summary = summarize(&tidy);
    write_rows(&out.join("summary.csv"), &summary)?;

    let mut seen = Vec::new();
    let mut overhead_rows = Vec::new();
    for cell in plan.cells() {
        let cfg = cell.scenario(&plan.scenario, 0);
        let name = format!(
            "k{}_f{}_{}{}",
            cell.devices,
            cell.access_subcarriers,
            cell.backhaul,
            if cell.no_uav { "_nouav" } else { "" }
        );
        if seen.contains(&name) {
            continue;
        }
        seen.push(name.clone());
        for fw in [Framework::Maddpg, Framework::Frl] {
            overhead_rows.push(OverheadRow::new(name.clone(), overhead(&cfg, &plan.trainer, fw)));
        }
    }
    write_rows(&out.join("overhead.csv"), &overhead_rows)?;

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_hash: config_hash(plan),
        seeds: plan.seeds.clone(),
        cells: plan.cells().iter().map(Cell::id).collect(),
        plan: plan.clone(),
    };
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&path))?;
    Ok(summary)
}

/// Validates `plan`, runs every grid point and seed, and writes the results.
pub fn run_plan(plan: &ExperimentPlan, out: &Path, command: &str) -> Result<Vec<SummaryRow>, BenchError> {
    plan.validate()?;
    create_dir(out)?;
    let jobs: Vec<(Cell, u64)> = plan
        .cells()
        .into_iter()
        .flat_map(|c| plan.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, s)| run_cell(plan, c, s))
        .collect::<Result<Vec<_>, _>>()?;
    write_outputs(out, plan, command, &results)
}
