//! Exhaustive minimum-age schedules for tiny frozen instances.
//!
//! Every slot each task can make at most one move (upload to some covering
//! receiver, process, forward, complete), so a slot's outcome is a choice
//! of moving devices. The search enumerates those outcomes, realizes each
//! with a witness joint action (full UAV CPU, BS CPU split by demand,
//! backhaul power split evenly over the subcarriers a UAV holds), keeps the
//! ones the simulator accepts without violations, and memoizes the optimal
//! cost-to-go by state.

use std::collections::HashMap;

use super::BaselineError;
use crate::age::AoiSummary;
use crate::env::{bs_groups, JointAction, Receiver, Selection, World};
use crate::scenario::{BackhaulChannel, ScenarioConfig, Stage};

pub const ORACLE_MAX_DEVICES: usize = 3;
pub const ORACLE_MAX_UAVS: usize = 2;
pub const ORACLE_MAX_SLOTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    /// Integer per-tier age totals over the episode.
    pub age_sums: (u64, u64),
    /// One joint action per slot.
    pub schedule: Vec<JointAction>,
}

/// The instance with static UAVs and fading switched off.
pub fn freeze(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        static_uavs: true,
        backhaul_channel: BackhaulChannel::Los,
        ..config.clone()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Move {
    Stay,
    Upload(usize),
    Advance,
}

#[derive(Clone, Copy)]
struct Best {
    cost: f64,
    sum_m: u64,
    sum_b: u64,
}

type Key = (usize, Vec<(u64, Stage, usize, u64)>);

/// State identity for memoization. Live ages follow from the slot and the
/// generation slot; the one remembered age is the UAV-tier age a task
/// carried when it left its UAV.
fn key(w: &World) -> Key {
    let tasks = w
        .tasks
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let kept = match t.stage {
                Stage::AtBs { via: Some(_) } => w.ages.delta_m[k],
                _ => 0,
            };
            (t.index, t.stage, t.generated_at, kept)
        })
        .collect();
    (w.slot, tasks)
}

/// Minimum-objective schedule of a frozen tiny scenario from its first slot.
pub fn oracle_schedule(config: &ScenarioConfig) -> Result<OracleResult, BaselineError> {
    if config.devices == 0 {
        return Ok(OracleResult {
            objective: 0.0,
            age_sums: (0, 0),
            schedule: vec![JointAction::idle(config); config.slots],
        });
    }
    check_limits(config)?;
    oracle_from_world(&World::new(config.clone())?)
}

/// Like [`oracle_schedule`], but from an arbitrary world state; the
/// objective covers the remaining slots.
pub fn oracle_from_world(world: &World) -> Result<OracleResult, BaselineError> {
    let config = &world.config;
    check_limits(config)?;
    let mut memo = HashMap::new();
    let best = solve(world, &mut memo)?;

    let mut schedule = Vec::with_capacity(config.slots - world.slot);
    let mut w = world.clone();
    while !w.is_done() {
        let (_, act) = memo.get(&key(&w)).expect("solved state").clone();
        let act = act.expect("live state has an action");
        w.step(&act)?;
        schedule.push(act);
    }
    let (sm0, sb0) = world.age_sums();
    let (sm, sb) = w.age_sums();
    debug_assert_eq!((sm - sm0, sb - sb0), (best.sum_m, best.sum_b), "replay disagrees with the search");
    let samples = (config.slots - world.slot) * config.devices;
    let objective = AoiSummary::from_sums(best.sum_m, best.sum_b, samples, config.k1, config.k2).objective;
    Ok(OracleResult {
        objective,
        age_sums: (best.sum_m, best.sum_b),
        schedule,
    })
}

fn check_limits(config: &ScenarioConfig) -> Result<(), BaselineError> {
    for (what, got, limit) in [
        ("devices", config.devices, ORACLE_MAX_DEVICES),
        ("uavs", config.uavs, ORACLE_MAX_UAVS),
        ("slots", config.slots, ORACLE_MAX_SLOTS),
    ] {
        if got > limit {
            return Err(BaselineError::SearchSpace { what, limit, got });
        }
    }
    if !config.static_uavs && config.uavs > 0 {
        return Err(BaselineError::NotFrozen("UAVs must be static"));
    }
    if config.backhaul_channel != BackhaulChannel::Los && config.uavs > 0 {
        return Err(BaselineError::NotFrozen("backhaul fading must be off"));
    }
    Ok(())
}

fn solve(w: &World, memo: &mut HashMap<Key, (Best, Option<JointAction>)>) -> Result<Best, BaselineError> {
    if w.is_done() {
        return Ok(Best { cost: 0.0, sum_m: 0, sum_b: 0 });
    }
    let k = key(w);
    if let Some((b, _)) = memo.get(&k) {
        return Ok(*b);
    }
    let (k1, k2) = (w.config.k1, w.config.k2);
    let mut best: Option<(Best, JointAction)> = None;
    for moves in outcomes(w) {
        let Some((next, act, (sm, sb))) = realize(w, &moves)? else { continue };
        let rest = solve(&next, memo)?;
        let cand = Best {
            cost: k1 * sm as f64 + k2 * sb as f64 + rest.cost,
            sum_m: sm + rest.sum_m,
            sum_b: sb + rest.sum_b,
        };
        if best.as_ref().is_none_or(|(b, _)| cand.cost < b.cost) {
            best = Some((cand, act));
        }
    }
    let (b, act) = best.expect("staying idle is always feasible");
    memo.insert(k, (b, Some(act)));
    Ok(b)
}

/// Every combination of per-device moves.
fn outcomes(w: &World) -> Vec<Vec<Move>> {
    let receivers = w.config.access_receivers();
    let mut all = vec![Vec::new()];
    for (k, t) in w.tasks.iter().enumerate() {
        let mut opts = vec![Move::Stay];
        match t.stage {
            Stage::AtDevice => opts.extend((0..receivers).filter(|&r| w.covers(r, k)).map(Move::Upload)),
            Stage::Done => {}
            _ => opts.push(Move::Advance),
        }
        all = all
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    all
}

/// Non-empty subsets of `0..n` as bit masks.
fn nonempty_masks(n: usize) -> impl Iterator<Item = usize> {
    1..(1usize << n)
}

/// Backhaul allocations for the forwarding UAVs: each holds a non-empty set
/// of subcarriers, within the per-subcarrier sharing limit.
fn backhaul_options(cfg: &ScenarioConfig, senders: &[usize]) -> Vec<Vec<Vec<bool>>> {
    let (m_n, l_n) = (cfg.uavs, cfg.backhaul_subcarriers);
    let mut all = vec![vec![vec![false; l_n]; m_n]];
    for &m in senders {
        let mut grown = Vec::new();
        for z in &all {
            for mask in nonempty_masks(l_n) {
                let mut z = z.clone();
                for (l, cell) in z[m].iter_mut().enumerate() {
                    *cell = mask & (1 << l) != 0;
                }
                if (0..l_n).all(|l| z.iter().filter(|row| row[l]).count() <= cfg.uavs_per_backhaul_subcarrier) {
                    grown.push(z);
                }
            }
        }
        all = grown;
    }
    all
}

type Realized = (World, JointAction, (u64, u64));

fn realize(w: &World, moves: &[Move]) -> Result<Option<Realized>, BaselineError> {
    let cfg = &w.config;
    let mut act = JointAction::idle(cfg);
    act.process_uav = vec![Selection::Explicit(Vec::new()); cfg.uavs];
    act.forward = vec![Selection::Explicit(Vec::new()); cfg.uavs];
    let groups = bs_groups(cfg);
    act.process_bs = vec![Selection::Explicit(Vec::new()); groups];
    let mut demand = vec![0.0; groups];
    let mut used = vec![0usize; cfg.access_receivers()];
    let mut senders = Vec::new();

    let push = |sel: &mut Selection, k: usize| {
        if let Selection::Explicit(v) = sel {
            v.push(k);
        }
    };
    for (k, (&mv, t)) in moves.iter().zip(&w.tasks).enumerate() {
        match (mv, t.stage) {
            (Move::Stay, _) => {}
            (Move::Upload(r), _) => {
                if used[r] >= cfg.access_subcarriers {
                    return Ok(None);
                }
                let rx = if cfg.no_uav { Receiver::Bs } else { Receiver::Uav(r) };
                act.uploads[k] = Some((rx, used[r]));
                used[r] += 1;
            }
            (Move::Advance, Stage::AtUav { uav, processed: false }) => push(&mut act.process_uav[uav], k),
            (Move::Advance, Stage::AtUav { uav, processed: true }) => {
                push(&mut act.forward[uav], k);
                if !senders.contains(&uav) {
                    senders.push(uav);
                }
            }
            (Move::Advance, Stage::AtBs { via }) => {
                let g = via.unwrap_or(0);
                push(&mut act.process_bs[g], k);
                demand[g] += t.bs_cycles(cfg.split_ratio(k));
            }
            (Move::Advance, _) => return Ok(None),
        }
    }
    if demand.iter().any(|&d| d > 0.0) {
        act.bs_cpu_share = demand;
    }

    let try_step = |act: &JointAction| -> Result<Option<Realized>, BaselineError> {
        let mut next = w.clone();
        let out = next.step(act)?;
        if out.violations.total() > 0 {
            return Ok(None);
        }
        let sums = (out.sample.uav.iter().sum(), out.sample.bs.iter().sum());
        Ok(Some((next, act.clone(), sums)))
    };

    if senders.is_empty() {
        return try_step(&act);
    }
    senders.sort_unstable();
    for zeta in backhaul_options(cfg, &senders) {
        let mut a = act.clone();
        for m in 0..cfg.uavs {
            let held = zeta[m].iter().filter(|&&z| z).count();
            for l in 0..cfg.backhaul_subcarriers {
                a.power[m][l] = if zeta[m][l] { cfg.uav_power_max_w / held as f64 } else { 0.0 };
            }
        }
        a.zeta = zeta;
        if let Some(r) = try_step(&a)? {
            return Ok(Some(r));
        }
    }
    Ok(None)
}
