use super::*;
use crate::age::HopEvent;
use crate::env::Receiver;
use crate::kinematics::Pose;
use crate::scenario::{BackhaulChannel, Stage};

fn tiny(devices: usize, uavs: usize) -> ScenarioConfig {
    ScenarioConfig {
        devices,
        uavs,
        access_subcarriers: 1,
        backhaul_subcarriers: 1,
        uavs_per_backhaul_subcarrier: 1,
        slots: 6,
        static_uavs: true,
        backhaul_channel: BackhaulChannel::Los,
        ..ScenarioConfig::default()
    }
}

/// Every node stacked at the centre so all links are strong.
fn centred(cfg: ScenarioConfig) -> World {
    let mut w = World::new(cfg).unwrap();
    for (i, u) in w.uavs.iter_mut().enumerate() {
        *u = Pose::new(100.0 + 20.0 * i as f64, 100.0, w.config.uav_altitude_m);
    }
    for d in w.devices.iter_mut() {
        *d = Pose::new(100.0, 100.0, 0.0);
    }
    w
}

#[test]
fn greedy_schedules_a_lone_waiting_task() {
    let w = centred(tiny(1, 1));
    let a = greedy_action(&w);
    assert_eq!(a.uploads[0], Some((Receiver::Uav(0), 0)));
}

#[test]
fn greedy_prefers_the_older_task() {
    let mut w = centred(tiny(2, 1));
    w.slot = 6;
    // Ages after this slot: device 0 is 3, device 1 is 7.
    w.tasks[0].generated_at = 4;
    w.tasks[1].generated_at = 0;
    let a = greedy_action(&w);
    assert_eq!(a.uploads[0], None);
    assert_eq!(a.uploads[1], Some((Receiver::Uav(0), 0)));
}

#[test]
fn random_policy_is_seeded() {
    let cfg = ScenarioConfig::toy();
    let spec = PolicySpec { kind: PolicyKind::Random, seed: 9 };
    let (a, ra) = run_policy(spec, &cfg).unwrap();
    let (b, rb) = run_policy(spec, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn greedy_has_no_violations_without_fading() {
    let cfg = ScenarioConfig {
        backhaul_channel: BackhaulChannel::Los,
        ..ScenarioConfig::toy()
    };
    let (_, records) = run_policy(PolicySpec::new(PolicyKind::GreedyMaxAge), &cfg).unwrap();
    assert!(records.iter().all(|r| r.violations == 0));
    let (_, records) = run_policy(PolicySpec::new(PolicyKind::RoundRobin), &cfg).unwrap();
    assert_eq!(records.len(), cfg.slots);
}

#[test]
fn oracle_single_device_hits_pipeline_latency() {
    let w = centred(tiny(1, 1));
    let res = oracle_from_world(&w).unwrap();
    let mut replay = w.clone();
    let mut completed = Vec::new();
    for (t, a) in res.schedule.iter().enumerate() {
        let out = replay.step(a).unwrap();
        if out.events[0] == HopEvent::Completed {
            completed.push((t, replay.ages.delta_b[0]));
        }
    }
    assert_eq!(completed.first(), Some(&(3, 3)));
    assert_eq!(replay.summary().objective, res.objective);
}

#[test]
fn oracle_without_devices_is_zero() {
    let cfg = ScenarioConfig { devices: 0, ..tiny(1, 1) };
    assert_eq!(oracle_schedule(&cfg).unwrap().objective, 0.0);
}

#[test]
fn oracle_rejects_large_or_moving_instances() {
    assert!(matches!(
        oracle_schedule(&tiny(4, 1)),
        Err(BaselineError::SearchSpace { what: "devices", .. })
    ));
    let moving = ScenarioConfig { static_uavs: false, ..tiny(1, 1) };
    assert!(matches!(oracle_schedule(&moving), Err(BaselineError::NotFrozen(_))));
}

#[test]
fn oracle_beats_greedy_on_shared_subcarrier() {
    let w = centred(tiny(2, 1));
    let res = oracle_from_world(&w).unwrap();
    let mut g = w.clone();
    while !g.is_done() {
        let a = greedy_action(&g);
        g.step(&a).unwrap();
    }
    assert!(res.objective <= g.summary().objective);
}

#[test]
fn no_uav_variant() {
    let v = no_uav_scenario(&ScenarioConfig::default());
    assert_eq!(v.uavs, 0);
    assert!(v.no_uav);
    assert!((0..v.devices).all(|k| v.split_ratio(k) == 0.0));
    v.validate().unwrap();
}

#[test]
fn no_uav_pipeline_is_two_stages_shorter() {
    let with = centred(tiny(1, 1));
    let without = centred(no_uav_scenario(&with.config));
    let first_done = |w: &World| {
        let res = oracle_from_world(w).unwrap();
        let mut r = w.clone();
        for a in &res.schedule {
            if r.step(a).unwrap().events[0] == HopEvent::Completed {
                return r.ages.delta_b[0];
            }
        }
        panic!("nothing delivered");
    };
    assert_eq!(first_done(&with), first_done(&without) + 2);
}

#[test]
fn ofdma_variant_limits_sharing() {
    let base = ScenarioConfig {
        uavs: 4,
        backhaul_subcarriers: 2,
        uavs_per_backhaul_subcarrier: 2,
        backhaul_bandwidth_hz: Some(1e9),
        ..ScenarioConfig::toy()
    };
    let ofdma = ofdma_backhaul_variant(&base);
    assert_eq!(ofdma.uavs_per_backhaul_subcarrier, 1);
    let transmitting = |cfg: &ScenarioConfig| {
        let mut w = World::new(cfg.clone()).unwrap();
        for (m, t) in w.tasks.iter_mut().enumerate() {
            t.stage = Stage::AtUav { uav: m, processed: true };
        }
        w.slot = 1;
        let a = greedy_action(&w);
        a.zeta.iter().filter(|row| row.iter().any(|&z| z)).count()
    };
    assert_eq!(transmitting(&base), 4);
    assert_eq!(transmitting(&ofdma), 2);
}
