//! Checks shared by the acceptance suite and the focused integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use aoi_mec::age::HopEvent;
use aoi_mec::baselines::{Policy, PolicyKind, PolicySpec};
use aoi_mec::env::World;
use aoi_mec::kinematics::Pose;
use aoi_mec::learn::{Activation, Mlp};
use aoi_mec::radio::{access_gain, access_rate, backhaul_sinr, backhaul_sum_rate, BackhaulAssignment};
use aoi_mec::scenario::{BackhaulChannel, ScenarioConfig, SicPowerIndex};

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Deserialize)]
struct AccessCase {
    rx: [f64; 3],
    tx: [f64; 3],
    beta0: f64,
    rho: f64,
    noise: f64,
    bandwidth: f64,
    gain: f64,
    rate: f64,
}

#[derive(Deserialize)]
struct BackhaulCase {
    sic: String,
    noise: f64,
    bandwidth: f64,
    gain: Vec<Vec<f64>>,
    zeta: Vec<Vec<bool>>,
    power: Vec<Vec<f64>>,
    interferers: Vec<Vec<Vec<usize>>>,
    sinr: Vec<Vec<f64>>,
    sum_rate: Vec<f64>,
}

#[derive(Deserialize)]
struct RadioFixture {
    access: Vec<AccessCase>,
    backhaul: Vec<BackhaulCase>,
}

#[derive(Debug, Default)]
pub struct RadioReport {
    pub cases: usize,
    pub max_rel_err: f64,
    pub set_mismatches: usize,
}

/// Compares the radio formulas with the high-precision fixture.
pub fn radio_oracle() -> RadioReport {
    let fx: RadioFixture = serde_json::from_str(include_str!("../fixtures/radio_oracle.json")).unwrap();
    let mut rep = RadioReport::default();
    for c in &fx.access {
        let rx = Pose::new(c.rx[0], c.rx[1], c.rx[2]);
        let tx = Pose::new(c.tx[0], c.tx[1], c.tx[2]);
        let g = access_gain(&rx, &tx, c.beta0);
        let r = access_rate(g, c.rho, c.noise, c.bandwidth);
        rep.max_rel_err = rep.max_rel_err.max(rel_err(g, c.gain)).max(rel_err(r, c.rate));
        rep.cases += 1;
    }
    for c in &fx.backhaul {
        let sic = if c.sic == "literal" { SicPowerIndex::Literal } else { SicPowerIndex::Interferer };
        let a = BackhaulAssignment {
            zeta: c.zeta.clone(),
            power: c.power.clone(),
            gain: c.gain.clone(),
        };
        for m in 0..a.uavs() {
            for l in 0..a.subcarriers() {
                if a.interferers(m, l) != c.interferers[m][l] {
                    rep.set_mismatches += 1;
                }
                let s = backhaul_sinr(&a, m, l, c.noise, sic);
                rep.max_rel_err = rep.max_rel_err.max(rel_err(s, c.sinr[m][l]));
            }
            let r = backhaul_sum_rate(&a, m, c.noise, c.bandwidth, sic);
            rep.max_rel_err = rep.max_rel_err.max(rel_err(r, c.sum_rate[m]));
        }
        rep.cases += 1;
    }
    rep
}

/// Tiny random scenario within the oracle-style limits.
pub fn tiny_scenario(rng: &mut ChaCha8Rng, max_slots: usize) -> ScenarioConfig {
    let no_uav = rng.random_bool(0.2);
    let uavs = if no_uav { 0 } else { rng.random_range(1..=2) };
    ScenarioConfig {
        devices: rng.random_range(1..=3),
        uavs,
        no_uav,
        split_ratio: if no_uav { 0.0 } else { rng.random_range(0.0..=1.0) },
        access_subcarriers: rng.random_range(1..=2),
        backhaul_subcarriers: rng.random_range(1..=2),
        uavs_per_backhaul_subcarrier: rng.random_range(1..=2),
        slots: rng.random_range(1..=max_slots),
        area_m: 120.0,
        d_min_m: 5.0,
        static_uavs: rng.random_bool(0.5),
        backhaul_channel: if rng.random_bool(0.5) { BackhaulChannel::Los } else { BackhaulChannel::LosFading },
        uav_cpu_cycles_per_ms: 10f64.powf(rng.random_range(10.5..11.5)),
        bs_cpu_cycles_per_ms: 10f64.powf(rng.random_range(10.5..11.5)),
        seed: rng.random(),
        ..ScenarioConfig::default()
    }
}

/// One task's journey: generation slot and the slots of each hop change.
#[derive(Debug, Clone, Copy)]
struct Journey {
    generated: usize,
    upload: Option<usize>,
    forward: Option<usize>,
    complete: Option<usize>,
}

fn upto(t: usize, event: Option<usize>) -> usize {
    event.map_or(t + 1, |e| e.min(t + 1))
}

/// Raw counters after slot `t` from the event log alone.
fn replay_counters(log: &[Journey], t: usize, direct: bool) -> (u64, u64, u64) {
    let current = log.iter().rev().find(|j| j.generated <= t + 1).unwrap();
    let d0 = upto(t, current.upload) - current.generated;
    let reached_uav = log.iter().rev().find(|j| !direct && j.upload.is_some_and(|u| u <= t));
    let dm = reached_uav.map_or(0, |j| upto(t, j.forward) - j.generated);
    let reached_bs = log.iter().rev().find(|j| {
        let arrival = if direct { j.upload } else { j.forward };
        arrival.is_some_and(|a| a <= t)
    });
    let db = reached_bs.map_or(0, |j| upto(t, j.complete) - j.generated);
    (d0 as u64, dm as u64, db as u64)
}

#[derive(Debug, Default)]
pub struct AoiReport {
    pub scenarios: usize,
    pub slots_checked: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<String>,
}

/// Plays random schedules and compares the raw counters with a replay of
/// the event log.
pub fn aoi_replay(scenarios: usize, seed: u64) -> AoiReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = AoiReport::default();
    for s in 0..scenarios {
        let cfg = tiny_scenario(&mut rng, 20);
        let kind = match s % 3 {
            0 => PolicyKind::GreedyMaxAge,
            1 => PolicyKind::RoundRobin,
            _ => PolicyKind::Random,
        };
        let mut world = World::new(cfg.clone()).unwrap();
        let mut policy = Policy::new(PolicySpec { kind, seed: rng.random() }, &cfg).unwrap();
        let mut logs: Vec<Vec<Journey>> = (0..cfg.devices)
            .map(|_| vec![Journey { generated: 0, upload: None, forward: None, complete: None }])
            .collect();
        for t in 0..cfg.slots {
            let act = policy.act(&world).unwrap();
            let out = world.step(&act).unwrap();
            for k in 0..cfg.devices {
                let j = logs[k].last_mut().unwrap();
                match out.events[k] {
                    HopEvent::Uploaded | HopEvent::UploadedToBs => j.upload = Some(t),
                    HopEvent::Forwarded => j.forward = Some(t),
                    HopEvent::Completed => j.complete = Some(t),
                    HopEvent::Idle => {}
                }
            }
            for &k in &out.respawned {
                logs[k].push(Journey { generated: t + 1, upload: None, forward: None, complete: None });
            }
            for k in 0..cfg.devices {
                let want = replay_counters(&logs[k], t, cfg.no_uav);
                let got = (world.ages.delta0[k], world.ages.delta_m[k], world.ages.delta_b[k]);
                rep.slots_checked += 1;
                if got != want {
                    rep.mismatches += 1;
                    rep.first_mismatch.get_or_insert(format!(
                        "scenario {s} slot {t} device {k}: env {got:?}, replay {want:?}"
                    ));
                }
            }
        }
        rep.scenarios += 1;
    }
    rep
}

/// Largest relative gap between backprop and central differences.
pub fn gradient_check(points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (inputs, outputs) = (6, 3);
    let mut worst: f64 = 0.0;
    for p in 0..points {
        let out_act = if p % 2 == 0 { Activation::Sigmoid } else { Activation::Identity };
        let net = Mlp::new(&[inputs, 16, 16, outputs], out_act, 1.0, &mut rng);
        let x = Array2::from_shape_fn((1, inputs), |_| rng.random_range(-2.0..2.0));
        let c = Array2::from_shape_fn((1, outputs), |_| rng.random_range(-1.0..1.0));
        let loss = |n: &Mlp| (n.forward(x.view()).unwrap() * &c).sum();
        let trace = net.forward_trace(x.view()).unwrap();
        let (grads, dx) = net.backward(&trace, &c);
        let analytic: Vec<f64> = grads.iter().flat_map(|g| g.w.iter().chain(g.b.iter()).copied()).collect();
        let base = net.params();
        let h = 1e-6;
        let mut probe = net.clone();
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = base.clone();
            plus.values[i] += h;
            probe.set_params(&plus).unwrap();
            let lp = loss(&probe);
            let mut minus = base.clone();
            minus.values[i] -= h;
            probe.set_params(&minus).unwrap();
            let lm = loss(&probe);
            let numeric = (lp - lm) / (2.0 * h);
            worst = worst.max(grad_gap(a, numeric));
        }
        for j in 0..inputs {
            let mut xp = x.clone();
            xp[[0, j]] += h;
            let mut xm = x.clone();
            xm[[0, j]] -= h;
            let fp = (net.forward(xp.view()).unwrap() * &c).sum();
            let fm = (net.forward(xm.view()).unwrap() * &c).sum();
            worst = worst.max(grad_gap(dx[[0, j]], (fp - fm) / (2.0 * h)));
        }
    }
    worst
}

/// Relative difference, measured absolutely for gradients near zero.
fn grad_gap(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Neumaier-compensated mean.
pub fn exact_mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp, mut n) = (0.0f64, 0.0f64, 0usize);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        n += 1;
    }
    (sum + comp) / n as f64
}

/// Distance in units in the last place.
pub fn ulps(a: f64, b: f64) -> u64 {
    let key = |x: f64| {
        let i = x.to_bits() as i64;
        if i < 0 {
            i64::MIN - i
        } else {
            i
        }
    };
    key(a).abs_diff(key(b))
}

/// Spacing between `x` and the next larger double.
pub fn ulp(x: f64) -> f64 {
    x.abs().next_up() - x.abs()
}

/// One-sided sign-test p-value: `P(X >= wins)` for `X ~ Bin(n, 1/2)`.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).unwrap();
    b.sf(wins as u64 - 1)
}

/// Outcome of the oracle consistency check over frozen tiny instances.
#[derive(Debug, Default)]
pub struct OracleReport {
    pub instances: usize,
    pub replay_mismatches: usize,
    pub order_violations: Vec<String>,
}

/// A frozen three-device, two-UAV instance with one subcarrier per hop.
pub fn frozen_instance(seed: u64) -> ScenarioConfig {
    aoi_mec::baselines::freeze(&ScenarioConfig {
        seed,
        devices: 3,
        uavs: 2,
        access_subcarriers: 1,
        backhaul_subcarriers: 1,
        uavs_per_backhaul_subcarrier: 1,
        slots: 8,
        area_m: 100.0,
        ..ScenarioConfig::default()
    })
}

/// Mean objective of the random policy over `episodes` policy seeds.
pub fn random_mean(cfg: &ScenarioConfig, episodes: u64) -> f64 {
    let total: f64 = (0..episodes)
        .map(|e| {
            aoi_mec::baselines::run_policy(PolicySpec { kind: PolicyKind::Random, seed: e }, cfg)
                .unwrap()
                .0
                .objective
        })
        .sum();
    total / episodes as f64
}

pub fn oracle_consistency(instances: u64) -> OracleReport {
    let mut rep = OracleReport::default();
    for seed in 0..instances {
        let cfg = frozen_instance(seed);
        let res = aoi_mec::baselines::oracle_schedule(&cfg).unwrap();
        let mut w = World::new(cfg.clone()).unwrap();
        for a in &res.schedule {
            w.step(a).unwrap();
        }
        if w.summary().objective != res.objective || w.age_sums() != res.age_sums {
            rep.replay_mismatches += 1;
        }
        let greedy = aoi_mec::baselines::run_policy(PolicySpec::new(PolicyKind::GreedyMaxAge), &cfg)
            .unwrap()
            .0
            .objective;
        let random = random_mean(&cfg, 20);
        if !(res.objective <= greedy && greedy <= random) {
            rep.order_violations.push(format!("seed {seed}: {} / {greedy} / {random}", res.objective));
        }
        rep.instances += 1;
    }
    rep
}

/// Worst deviations seen while checking the mixing rule.
#[derive(Debug, Default)]
pub struct FedReport {
    /// Largest |row or column sum - 1| or negative entry magnitude.
    pub stochastic_err: f64,
    pub mean_ulps: u64,
    pub contraction_err: f64,
    pub identity_ok: bool,
}

pub fn fedavg_properties(seed: u64) -> FedReport {
    use aoi_mec::fedavg::{aggregate, spread, MixMatrix};
    use aoi_mec::learn::ParamSet;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut rep = FedReport { identity_ok: true, ..FedReport::default() };
    let random_set = |rng: &mut ChaCha8Rng, n: usize| ParamSet {
        shapes: vec![vec![n]],
        values: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
    };
    for m in 1..=8 {
        for &w in &grid {
            let mix = MixMatrix::new(m, w).unwrap();
            let dense = mix.dense();
            for i in 0..m {
                let row: f64 = dense[i].iter().sum();
                let col: f64 = dense.iter().map(|r| r[i]).sum();
                let neg = dense[i].iter().fold(0.0f64, |a, &x| a.max(-x));
                rep.stochastic_err = rep.stochastic_err.max((row - 1.0).abs()).max((col - 1.0).abs()).max(neg);
            }
            let params: Vec<ParamSet> = (0..m).map(|_| random_set(&mut rng, 32)).collect();
            let out = aggregate(&params, &mix).unwrap();
            for c in 0..32 {
                let before = exact_mean(params.iter().map(|p| p.values[c]));
                let after = exact_mean(out.iter().map(|p| p.values[c]));
                // Measured in ulps of the largest operand: a mean that cancels
                // to near zero has no meaningful ulp of its own.
                let scale = params.iter().map(|p| p.values[c].abs()).fold(0.0, f64::max);
                let drift = ((after - before).abs() / ulp(scale)).ceil() as u64;
                rep.mean_ulps = rep.mean_ulps.max(drift);
            }
            if w == 1.0 && out != params {
                rep.identity_ok = false;
            }
            if m == 2 {
                let (s0, s1) = (spread(&params), spread(&out));
                let factor = (2.0 * w - 1.0).abs();
                rep.contraction_err = rep.contraction_err.max((s1 - factor * s0).abs() / s0);
            }
        }
    }
    rep
}
