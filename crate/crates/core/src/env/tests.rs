use proptest::prelude::*;

use super::*;
use crate::scenario::CoverageMetric;

/// One device directly under one hovering UAV, deterministic channel.
fn single() -> World {
    let cfg = ScenarioConfig {
        devices: 1,
        uavs: 1,
        access_subcarriers: 1,
        backhaul_subcarriers: 1,
        uavs_per_backhaul_subcarrier: 1,
        slots: 10,
        static_uavs: true,
        backhaul_channel: BackhaulChannel::Los,
        ..ScenarioConfig::default()
    };
    let mut w = World::new(cfg).unwrap();
    w.uavs[0] = Pose::new(100.0, 100.0, w.config.uav_altitude_m);
    w.devices[0] = Pose::new(100.0, 100.0, 0.0);
    w
}

/// Uploads device 0 to UAV 0 when waiting and gives UAV 0 the backhaul.
fn pipeline_action(w: &World) -> JointAction {
    let mut a = JointAction::idle(&w.config);
    if w.tasks[0].stage == Stage::AtDevice {
        a.uploads[0] = Some((Receiver::Uav(0), 0));
    }
    a.zeta[0][0] = true;
    a.power[0][0] = w.config.uav_power_max_w;
    a
}

#[test]
fn full_size_world_builds() {
    let w = World::new(ScenarioConfig::default()).unwrap();
    assert_eq!((w.devices.len(), w.uavs.len(), w.tasks.len()), (15, 5, 15));
    assert!(w.tasks.iter().all(|t| t.stage == Stage::AtDevice));
    assert_eq!(w.ages, AgeState::new(15));
}

#[test]
fn same_seed_same_world() {
    let cfg = ScenarioConfig { seed: 42, ..ScenarioConfig::default() };
    let a = serde_json::to_string(&World::new(cfg.clone()).unwrap()).unwrap();
    let b = serde_json::to_string(&World::new(cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn impossible_spacing_is_a_config_error() {
    // The farthest two points of a 200 m square are its opposite corners.
    let diagonal = (2.0f64 * 200.0 * 200.0).sqrt();
    assert!(diagonal < 300.0);
    let cfg = ScenarioConfig { uavs: 2, d_min_m: 300.0, ..ScenarioConfig::default() };
    assert!(matches!(World::new(cfg), Err(EnvError::Scenario(_))));
}

#[test]
fn spawn_refuses_task_in_flight() {
    let mut w = single();
    assert!(matches!(w.spawn_task(0, 0), Err(ScenarioError::TaskInFlight { device: 0 })));
}

#[test]
fn minimal_pipeline_takes_four_slots() {
    let mut w = single();
    let mut events = Vec::new();
    for _ in 0..4 {
        let a = pipeline_action(&w);
        let out = w.step(&a).unwrap();
        assert_eq!(out.violations.total(), 0);
        events.push(out.events[0]);
    }
    assert_eq!(
        events,
        vec![HopEvent::Uploaded, HopEvent::Idle, HopEvent::Forwarded, HopEvent::Completed]
    );
    // Final age equals finish slot minus generation slot.
    assert_eq!(w.ages.delta_b[0], 3);
    // The replacement task was generated for the next slot.
    assert_eq!((w.tasks[0].index, w.tasks[0].generated_at), (1, 4));
    assert_eq!(w.ages.delta0[0], 0);
}

#[test]
fn direct_pipeline_takes_two_slots() {
    let cfg = ScenarioConfig {
        devices: 1,
        uavs: 0,
        no_uav: true,
        split_ratio: 0.0,
        access_subcarriers: 1,
        ..ScenarioConfig::default()
    };
    let mut w = World::new(cfg).unwrap();
    w.devices[0] = Pose::new(100.0, 100.0, 0.0);
    let mut a = JointAction::idle(&w.config);
    a.uploads[0] = Some((Receiver::Bs, 0));
    let first = w.step(&a).unwrap();
    assert_eq!(first.events[0], HopEvent::UploadedToBs);
    let second = w.step(&JointAction::idle(&w.config)).unwrap();
    assert_eq!(second.events[0], HopEvent::Completed);
    assert_eq!(w.ages.delta_b[0], 1);
}

#[test]
fn idle_slot_ages_waiting_device() {
    let mut w = single();
    let out = w.step(&JointAction::idle(&w.config)).unwrap();
    assert_eq!(w.ages.delta0[0], 1);
    assert_eq!(out.events[0], HopEvent::Idle);
    assert!((out.rewards.uav[0] + 0.1).abs() < 1e-12);
    assert_eq!(out.violations.total(), 0);
}

#[test]
fn uav_reward_counts_served_ages() {
    let mut w = single();
    w.ages.delta0[0] = 3;
    let out = w.step(&JointAction::idle(&w.config)).unwrap();
    // Served age after the slot is 4 with k1 = 0.1.
    assert!((out.rewards.uav[0] - (-0.4)).abs() < 1e-12);
}

#[test]
fn infeasible_upload_is_a_violation() {
    let mut w = single();
    // Far outside coverage: dropped and charged to the receiving UAV.
    w.devices[0] = Pose::new(0.0, 0.0, 0.0);
    w.uavs[0] = Pose::new(200.0, 200.0, w.config.uav_altitude_m);
    let out = w.step(&pipeline_action(&w)).unwrap();
    assert_eq!(out.violations.uav, vec![1]);
    assert_eq!(w.tasks[0].stage, Stage::AtDevice);
    assert!((out.rewards.uav[0] - (-0.1 - 1.0)).abs() < 1e-12);
}

#[test]
fn episode_ends() {
    let mut w = single();
    for t in 0..10 {
        let out = w.step(&JointAction::idle(&w.config)).unwrap();
        assert_eq!(out.done, t == 9);
    }
    assert!(matches!(w.step(&JointAction::idle(&w.config)), Err(EnvError::EpisodeOver { .. })));
    assert_eq!(w.history.len(), 10);
}

#[test]
fn observation_layout() {
    let cfg = ScenarioConfig::toy();
    let mut w = World::new(cfg.clone()).unwrap();
    let o = w.observe();
    assert_eq!(o.uav.len(), 2);
    assert!(o.uav.iter().all(|v| v.len() == uav_obs_len(&cfg)));
    assert_eq!(o.bs.len(), bs_obs_len(&cfg));
    assert!(o.joint().iter().all(|x| x.is_finite()));
    // Fresh world: every age entry is zero.
    for m in 0..2 {
        for k in 0..4 {
            let age = o.uav[m][5 * k + 1];
            assert!(age == 0.0 || age == -1.0);
        }
    }
    assert!(o.bs[..4].iter().all(|&a| a == 0.0));
    assert_eq!(w.observe(), o);

    // A device out of coverage reads as the sentinel.
    w.config.coverage = CoverageMetric::Horizontal;
    w.devices[0] = Pose::new(0.0, 0.0, 0.0);
    w.uavs[0] = Pose::new(200.0, 200.0, w.config.uav_altitude_m);
    let o = w.observe();
    assert_eq!(&o.uav[0][..5], &[-1.0; 5]);
}

fn raws(w: &World, fill: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    (
        vec![vec![fill; uav_action_len(&w.config)]; w.config.uavs],
        vec![fill; bs_action_len(&w.config)],
    )
}

#[test]
fn decode_all_zero() {
    let w = World::new(ScenarioConfig::toy()).unwrap();
    let (u, b) = raws(&w, 0.0);
    let a = decode(&w, &u, &b).unwrap();
    assert!(a.uploads.iter().all(Option::is_none));
    assert!(a.zeta.iter().flatten().all(|&z| !z));
    assert!(a.power.iter().flatten().all(|&p| p == 0.0));
    let v = w.config.v_max;
    assert!(a.velocity.iter().all(|c| c.vx == -v && c.vy == -v));
    // The hover encoding decodes to zero velocity.
    let (mut u, b) = raws(&w, 0.0);
    let n = uav_action_len(&w.config);
    for r in &mut u {
        r[n - 2] = encode_velocity(0.0, v);
        r[n - 1] = encode_velocity(0.0, v);
    }
    let a = decode(&w, &u, &b).unwrap();
    assert!(a.velocity.iter().all(|c| *c == VelocityCmd::ZERO));
}

#[test]
fn decode_schedules_confident_device() {
    let mut w = single();
    w.config.static_uavs = false;
    let (mut u, b) = raws(&w, 0.5);
    u[0][0] = 0.9;
    let a = decode(&w, &u, &b).unwrap();
    assert_eq!(a.uploads[0], Some((Receiver::Uav(0), 0)));
    u[0][0] = 0.4;
    assert_eq!(decode(&w, &u, &b).unwrap().uploads[0], None);
}

#[test]
fn decode_backhaul_top_k() {
    let cfg = ScenarioConfig {
        uavs: 2,
        backhaul_subcarriers: 1,
        uavs_per_backhaul_subcarrier: 1,
        ..ScenarioConfig::toy()
    };
    let w = World::new(cfg).unwrap();
    let (u, mut b) = raws(&w, 0.0);
    b[0] = 0.9;
    b[1] = 0.95;
    let a = decode(&w, &u, &b).unwrap();
    assert_eq!(a.zeta, vec![vec![false], vec![true]]);
    b[1] = 0.9;
    let a = decode(&w, &u, &b).unwrap();
    assert_eq!(a.zeta, vec![vec![true], vec![false]]);
}

#[test]
fn decode_rejects_nan_and_bad_lengths() {
    let w = World::new(ScenarioConfig::toy()).unwrap();
    let (mut u, b) = raws(&w, 0.3);
    u[1][2] = f64::NAN;
    assert!(matches!(decode(&w, &u, &b), Err(EnvError::NonFinite { index: 2, .. })));
    let (mut u, b) = raws(&w, 0.3);
    u[0].pop();
    assert!(matches!(decode(&w, &u, &b), Err(EnvError::Shape { .. })));
}

#[test]
fn shape_mismatch_in_step() {
    let mut w = World::new(ScenarioConfig::toy()).unwrap();
    let mut a = JointAction::idle(&w.config);
    a.zeta.pop();
    assert!(matches!(w.step(&a), Err(EnvError::Shape { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random relaxed actions decode into hard-feasible assignments, and the
    /// episode return equals the weighted age total plus penalties.
    #[test]
    fn decoded_actions_are_feasible(seed in 0u64..1000, vals in prop::collection::vec(0.0..1.0f64, 64)) {
        let cfg = ScenarioConfig { seed, slots: 12, ..ScenarioConfig::toy() };
        let mut w = World::new(cfg.clone()).unwrap();
        let mut i = 0;
        let mut next = || { i += 1; vals[i % vals.len()] };
        let mut ret = 0.0;
        let mut ages = 0.0;
        let mut viol = 0usize;
        while !w.is_done() {
            let u: Vec<Vec<f64>> = (0..cfg.uavs).map(|_| (0..uav_action_len(&cfg)).map(|_| next()).collect()).collect();
            let b: Vec<f64> = (0..bs_action_len(&cfg)).map(|_| next()).collect();
            let a = decode(&w, &u, &b).unwrap();
            for l in 0..cfg.backhaul_subcarriers {
                prop_assert!((0..cfg.uavs).filter(|&m| a.zeta[m][l]).count() <= cfg.uavs_per_backhaul_subcarrier);
            }
            for m in 0..cfg.uavs {
                let p: f64 = (0..cfg.backhaul_subcarriers).filter(|&l| a.zeta[m][l]).map(|l| a.power[m][l]).sum();
                prop_assert!(p <= cfg.uav_power_max_w * (1.0 + 1e-12));
            }
            let mut seen = std::collections::HashSet::new();
            for up in a.uploads.iter().flatten() {
                prop_assert!(seen.insert(*up));
            }
            let out = w.step(&a).unwrap();
            prop_assert!(out.rewards.uav.iter().all(|&r| r <= 0.0) && out.rewards.bs <= 0.0);
            ret += out.rewards.to_vec().iter().sum::<f64>();
            ages += cfg.k1 * out.sample.uav.iter().sum::<u64>() as f64
                + cfg.k2 * out.sample.bs.iter().sum::<u64>() as f64;
            viol += out.violations.total();
        }
        let expect = -ages - cfg.violation_penalty * viol as f64;
        prop_assert!((ret - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }
}
