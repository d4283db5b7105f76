//! Hand-written controllers that build joint actions directly.

use crate::env::{bs_groups, JointAction, Receiver, World};
use crate::radio::{backhaul_sum_rate, backhaul_time, fits_slot, upload_time, BackhaulAssignment};
use crate::scenario::{Stage, Task};

fn receiver(world: &World, r: usize) -> Receiver {
    if world.config.no_uav {
        Receiver::Bs
    } else {
        Receiver::Uav(r)
    }
}

fn can_upload(world: &World, r: usize, k: usize) -> bool {
    world.covers(r, k)
        && fits_slot(
            upload_time(world.tasks[k].bits, true, world.access_rate_to(r, k)),
            world.config.slot_ms,
        )
}

/// Devices whose task waits at the device, oldest first (lower index on a tie).
fn waiting_by_age(world: &World) -> Vec<usize> {
    let mut ks: Vec<usize> = (0..world.tasks.len())
        .filter(|&k| world.tasks[k].stage == Stage::AtDevice)
        .collect();
    ks.sort_by_key(|&k| (world.tasks[k].generated_at, k));
    ks
}

/// Oldest task a UAV holds ready to forward.
fn oldest_forwardable(world: &World, m: usize) -> Option<&Task> {
    world
        .tasks
        .iter()
        .filter(|t| t.stage == Stage::AtUav { uav: m, processed: true })
        .min_by_key(|t| (t.generated_at, t.device))
}

/// BS CPU weights proportional to the cycles waiting in each group.
fn bs_shares_by_demand(world: &World) -> Vec<f64> {
    let cfg = &world.config;
    let mut demand = vec![0.0; bs_groups(cfg)];
    for t in &world.tasks {
        if let Stage::AtBs { via } = t.stage {
            demand[via.unwrap_or(0)] += t.bs_cycles(cfg.split_ratio(t.device));
        }
    }
    if demand.iter().all(|&d| d == 0.0) {
        vec![1.0; demand.len()]
    } else {
        demand
    }
}

/// Serves the oldest tasks first.
///
/// Waiting tasks upload in age order to the covering receiver with the best
/// rate that still has a free subcarrier. Every UAV and the BS run their
/// oldest tasks first; the BS splits its CPU by waiting demand. UAVs with a
/// processed task take one backhaul subcarrier at full power, oldest first,
/// on the least loaded subcarrier where every UAV already placed can still
/// forward its oldest task. UAVs hover.
pub fn greedy_action(world: &World) -> JointAction {
    let cfg = &world.config;
    let mut act = JointAction::idle(cfg);
    let receivers = cfg.access_receivers();

    let mut used = vec![0usize; receivers];
    for k in waiting_by_age(world) {
        let best = (0..receivers)
            .filter(|&r| used[r] < cfg.access_subcarriers && can_upload(world, r, k))
            .max_by(|&a, &b| {
                world
                    .access_rate_to(a, k)
                    .total_cmp(&world.access_rate_to(b, k))
                    .then(b.cmp(&a))
            });
        if let Some(r) = best {
            act.uploads[k] = Some((receiver(world, r), used[r]));
            used[r] += 1;
        }
    }

    act.bs_cpu_share = bs_shares_by_demand(world);

    let (m_n, l_n) = (cfg.uavs, cfg.backhaul_subcarriers);
    if m_n == 0 || l_n == 0 {
        return act;
    }
    let mut order: Vec<(usize, &Task)> = (0..m_n)
        .filter_map(|m| oldest_forwardable(world, m).map(|t| (m, t)))
        .collect();
    order.sort_by_key(|(m, t)| (t.generated_at, *m));
    let mut assign = BackhaulAssignment::idle(world.backhaul_gain(world.slot));
    let bw = cfg.backhaul_bandwidth();
    let mut placed: Vec<(usize, u64)> = Vec::new();
    for (m, task) in order {
        let mut slots: Vec<usize> = (0..l_n)
            .filter(|&l| assign.occupants(l).count() < cfg.uavs_per_backhaul_subcarrier)
            .collect();
        slots.sort_by_key(|&l| (assign.occupants(l).count(), l));
        for l in slots {
            assign.zeta[m][l] = true;
            assign.power[m][l] = cfg.uav_power_max_w;
            let all_fit = placed.iter().chain([(m, task.residual_bits)].iter()).all(|&(o, bits)| {
                let rate = backhaul_sum_rate(&assign, o, cfg.noise_power_w, bw, cfg.sic_power);
                fits_slot(backhaul_time(bits, rate), cfg.slot_ms)
            });
            if all_fit {
                placed.push((m, task.residual_bits));
                break;
            }
            assign.zeta[m][l] = false;
            assign.power[m][l] = 0.0;
        }
    }
    act.zeta = assign.zeta;
    act.power = assign.power;
    act
}

/// Serves devices and UAVs in a fixed rotation that advances one place per
/// slot, ignoring ages.
///
/// Starting from device `t mod K`, each waiting device goes to the first
/// receiver, counted from `t mod R`, that covers it and has a free
/// subcarrier. UAVs with a processed task fill backhaul subcarriers in
/// rotation order from `t mod M`, one subcarrier each at full power. CPU is
/// split evenly.
pub fn round_robin_action(world: &World) -> JointAction {
    let cfg = &world.config;
    let t = world.slot;
    let mut act = JointAction::idle(cfg);
    let (k_n, receivers) = (cfg.devices, cfg.access_receivers());

    let mut used = vec![0usize; receivers];
    for i in 0..k_n {
        let k = (t + i) % k_n;
        if world.tasks[k].stage != Stage::AtDevice {
            continue;
        }
        let pick = (0..receivers)
            .map(|j| (t + j) % receivers)
            .find(|&r| used[r] < cfg.access_subcarriers && can_upload(world, r, k));
        if let Some(r) = pick {
            act.uploads[k] = Some((receiver(world, r), used[r]));
            used[r] += 1;
        }
    }

    let (m_n, l_n) = (cfg.uavs, cfg.backhaul_subcarriers);
    if m_n == 0 || l_n == 0 {
        return act;
    }
    let mut load = vec![0usize; l_n];
    let mut next = 0;
    for i in 0..m_n {
        let m = (t + i) % m_n;
        if oldest_forwardable(world, m).is_none() {
            continue;
        }
        let Some(l) = (0..l_n)
            .map(|j| (next + j) % l_n)
            .find(|&l| load[l] < cfg.uavs_per_backhaul_subcarrier)
        else {
            break;
        };
        act.zeta[m][l] = true;
        act.power[m][l] = cfg.uav_power_max_w;
        load[l] += 1;
        next = l + 1;
    }
    act
}
