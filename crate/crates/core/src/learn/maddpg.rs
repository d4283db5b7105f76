//! Multi-agent actor-critic training with twin global critics, and its
//! federated variant.
//!
//! Every UAV agent has an actor and a local critic over its own observation
//! and action; the BS agent has an actor. Global critics see all
//! observations and actions. Each update trains the global critics against
//! `r_g + gamma * min_j Q'_j(S', A')`; every `policy_delay`-th update also
//! trains the local critics, moves each UAV actor up `Q_g1 + Q_m` and the BS
//! actor up `Q_g1`, and soft-updates the actor and local-critic targets.
//! Global-critic targets follow their critics on every update.

use std::path::Path;

use ndarray::{s, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::checkpoint::write_params;
use super::nn::{Activation, Mlp};
use super::optim::Optimizer;
use super::registry::{NetRole, NetworkEntry, NetworkRegistry};
use super::replay::{ReplayBuffer, Transition};
use super::{LearnError, TrainerConfig};
use crate::env::{bs_action_len, bs_obs_len, decode, uav_action_len, uav_obs_len, MetricsRecord, Observations, World};
use crate::fedavg::{aggregate, schedule, spread, FedEvent, MixMatrix};
use crate::scenario::{derived_rng, ScenarioConfig};

/// Output-layer init range for fresh networks.
const FINAL_INIT: f64 = 3e-3;
const TRAINER_STREAM: u64 = 0x7EA1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Maddpg,
    Frl,
}

/// Per-episode learning-curve entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    /// Counted from 1.
    pub episode: usize,
    pub objective: f64,
    pub mean_delta_m: f64,
    pub mean_delta_b: f64,
    /// Sum of every agent's reward over the episode.
    pub total_return: f64,
    pub violations: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub noise: f64,
    pub aggregated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<EpisodeStats>,
    pub fed_events: Vec<FedEvent>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Losses {
    critic: f64,
    actor: Option<f64>,
}

pub struct Trainer {
    pub scenario: ScenarioConfig,
    pub config: TrainerConfig,
    pub uav_actors: Vec<Mlp>,
    pub uav_actor_targets: Vec<Mlp>,
    pub local_critics: Vec<Mlp>,
    pub local_critic_targets: Vec<Mlp>,
    pub bs_actor: Mlp,
    pub bs_actor_target: Mlp,
    pub global_critics: Vec<Mlp>,
    pub global_critic_targets: Vec<Mlp>,
    uav_actor_opt: Vec<Optimizer>,
    local_critic_opt: Vec<Optimizer>,
    bs_actor_opt: Optimizer,
    global_opt: Vec<Optimizer>,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    updates: u64,
    env_steps: u64,
    obs_dims: Vec<usize>,
    act_dims: Vec<usize>,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

/// Stacks rows into a matrix of width `w`.
fn rows<'a>(it: impl Iterator<Item = &'a [f64]>, w: usize) -> Array2<f64> {
    let data: Vec<f64> = it.flat_map(|r| r.iter().copied()).collect();
    let n = data.len() / w.max(1);
    Array2::from_shape_vec((n, w), data).expect("rows of equal width")
}

fn hcat(parts: &[&Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(ndarray::Axis(1), &views).expect("same row count")
}

impl Trainer {
    pub fn new(scenario: ScenarioConfig, config: TrainerConfig) -> Result<Self, LearnError> {
        scenario.validate().map_err(crate::env::EnvError::from)?;
        config.validate()?;
        let mut rng = derived_rng(config.seed, TRAINER_STREAM, 0);
        let m = scenario.uavs;
        let (uo, ua) = (uav_obs_len(&scenario), uav_action_len(&scenario));
        let (bo, ba) = (bs_obs_len(&scenario), bs_action_len(&scenario));
        let mut obs_dims = vec![uo; m];
        obs_dims.push(bo);
        let mut act_dims = vec![ua; m];
        act_dims.push(ba);
        let joint: usize = obs_dims.iter().sum::<usize>() + act_dims.iter().sum::<usize>();
        let h = &config.hidden;

        let uav_actors: Vec<Mlp> = (0..m)
            .map(|_| Mlp::new(&widths(uo, &h.actor, ua), Activation::Sigmoid, FINAL_INIT, &mut rng))
            .collect();
        let local_critics: Vec<Mlp> = if config.local_critics {
            (0..m)
                .map(|_| Mlp::new(&widths(uo + ua, &h.local_critic, 1), Activation::Identity, FINAL_INIT, &mut rng))
                .collect()
        } else {
            Vec::new()
        };
        let bs_actor = Mlp::new(&widths(bo, &h.actor, ba), Activation::Sigmoid, FINAL_INIT, &mut rng);
        let n_global = if config.twin_critics { 2 } else { 1 };
        let global_critics: Vec<Mlp> = (0..n_global)
            .map(|_| Mlp::new(&widths(joint, &h.global_critic, 1), Activation::Identity, FINAL_INIT, &mut rng))
            .collect();

        let opt = |lr: f64, net: &Mlp| Optimizer::new(config.optimizer, lr, net).with_clip(config.grad_clip);
        Ok(Self {
            uav_actor_opt: uav_actors.iter().map(|n| opt(config.lr_actor, n)).collect(),
            local_critic_opt: local_critics.iter().map(|n| opt(config.lr_critic, n)).collect(),
            bs_actor_opt: opt(config.lr_actor, &bs_actor),
            global_opt: global_critics.iter().map(|n| opt(config.lr_critic, n)).collect(),
            uav_actor_targets: uav_actors.clone(),
            local_critic_targets: local_critics.clone(),
            bs_actor_target: bs_actor.clone(),
            global_critic_targets: global_critics.clone(),
            uav_actors,
            local_critics,
            bs_actor,
            global_critics,
            buffer: ReplayBuffer::new(config.replay_capacity),
            rng,
            updates: 0,
            env_steps: 0,
            obs_dims,
            act_dims,
            scenario,
            config,
        })
    }

    pub fn agents(&self) -> usize {
        self.obs_dims.len()
    }

    fn actor(&self, i: usize) -> &Mlp {
        if i < self.scenario.uavs {
            &self.uav_actors[i]
        } else {
            &self.bs_actor
        }
    }

    fn actor_target(&self, i: usize) -> &Mlp {
        if i < self.scenario.uavs {
            &self.uav_actor_targets[i]
        } else {
            &self.bs_actor_target
        }
    }

    /// Deterministic actions of every agent for the given observations.
    pub fn policy(&self, obs: &Observations) -> Result<(Vec<Vec<f64>>, Vec<f64>), LearnError> {
        let uav = obs
            .uav
            .iter()
            .zip(&self.uav_actors)
            .map(|(o, a)| a.forward_one(o))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((uav, self.bs_actor.forward_one(&obs.bs)?))
    }

    /// Exploration noise level for `episode` (counted from 1) of `episodes`.
    pub fn noise_at(&self, episode: usize, episodes: usize) -> f64 {
        let c = &self.config;
        if episodes <= 1 {
            return c.noise_start;
        }
        let frac = (episode.saturating_sub(1)) as f64 / (episodes - 1) as f64;
        c.noise_start + (c.noise_end - c.noise_start) * frac.min(1.0)
    }

    fn explore(&mut self, obs: &Observations, sigma: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>), LearnError> {
        if self.env_steps < self.config.warmup_steps {
            let uav = (0..self.scenario.uavs)
                .map(|_| (0..self.act_dims[0]).map(|_| self.rng.random::<f64>()).collect())
                .collect();
            let bs = (0..*self.act_dims.last().expect("bs agent"))
                .map(|_| self.rng.random::<f64>())
                .collect();
            return Ok((uav, bs));
        }
        let (mut uav, mut bs) = self.policy(obs)?;
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("positive sigma");
            for v in uav.iter_mut().flatten().chain(bs.iter_mut()) {
                *v = (*v + normal.sample(&mut self.rng)).clamp(0.0, 1.0);
            }
        }
        Ok((uav, bs))
    }

    /// Runs the configured number of episodes.
    pub fn train(&mut self, framework: Framework) -> Result<TrainReport, LearnError> {
        self.train_with(framework, |_, _| {})
    }

    /// Like [`Trainer::train`], handing every finished episode's stats and
    /// per-slot records to `on_episode`.
    pub fn train_with(
        &mut self,
        framework: Framework,
        mut on_episode: impl FnMut(&EpisodeStats, &[MetricsRecord]),
    ) -> Result<TrainReport, LearnError> {
        let episodes = self.config.episodes;
        let mut report = TrainReport::default();
        if framework == Framework::Frl && self.updates == 0 {
            self.broadcast_actor();
        }
        for ep in 1..=episodes {
            let sigma = self.noise_at(ep, episodes);
            let (mut stats, records) = self.run_episode(ep, sigma, true)?;
            if framework == Framework::Frl && schedule(ep, self.config.fed_period) && self.scenario.uavs > 1 {
                report.fed_events.push(self.aggregate_actors(ep)?);
                stats.aggregated = true;
            }
            on_episode(&stats, &records);
            report.curve.push(stats);
        }
        Ok(report)
    }

    /// Gives every UAV actor (and its target) the parameters of the first
    /// one, so that federated averaging mixes networks with aligned units.
    pub fn broadcast_actor(&mut self) {
        let Some(first) = self.uav_actors.first().cloned() else { return };
        for (net, target) in self.uav_actors.iter_mut().zip(&mut self.uav_actor_targets) {
            *net = first.clone();
            *target = first.clone();
        }
    }

    /// Averages the UAV actors through the mixing matrix.
    pub fn aggregate_actors(&mut self, epoch: usize) -> Result<FedEvent, LearnError> {
        let params: Vec<_> = self.uav_actors.iter().map(Mlp::params).collect();
        let mix = MixMatrix::new(params.len(), self.config.fed_weight)?;
        let mixed = aggregate(&params, &mix)?;
        let event = FedEvent {
            epoch,
            w: mix.w,
            period: self.config.fed_period,
            spread_before: spread(&params),
            spread_after: spread(&mixed),
        };
        for (net, p) in self.uav_actors.iter_mut().zip(&mixed) {
            net.set_params(p)?;
        }
        Ok(event)
    }

    /// Plays one episode from the scenario's initial state. With `learn`
    /// the transitions are stored and the networks trained.
    pub fn run_episode(
        &mut self,
        episode: usize,
        sigma: f64,
        learn: bool,
    ) -> Result<(EpisodeStats, Vec<MetricsRecord>), LearnError> {
        let mut world = World::new(self.scenario.clone())?;
        let mut obs = world.observe();
        let mut records = Vec::with_capacity(self.scenario.slots);
        let (mut ret, mut viol) = (0.0, 0usize);
        let (mut closs, mut aloss, mut nc, mut na) = (0.0, 0.0, 0usize, 0usize);
        while !world.is_done() {
            let (uav, bs) = if learn { self.explore(&obs, sigma)? } else { self.policy(&obs)? };
            let act = decode(&world, &uav, &bs)?;
            let out = world.step(&act)?;
            let next = world.observe();
            ret += out.rewards.to_vec().iter().sum::<f64>();
            viol += out.violations.total();
            let mut rec = out.record.clone();
            rec.episode = episode;
            records.push(rec);
            if learn {
                let scale = self.config.reward_scale;
                let mut actions = uav;
                actions.push(bs);
                let mut o = obs.uav.clone();
                o.push(obs.bs.clone());
                let mut n = next.uav.clone();
                n.push(next.bs.clone());
                self.buffer.push(Transition {
                    obs: o,
                    actions,
                    rewards: out.rewards.to_vec().iter().map(|r| r * scale).collect(),
                    global_reward: out.rewards.bs * scale,
                    next_obs: n,
                });
                self.env_steps += 1;
                if self.env_steps >= self.config.warmup_steps
                    && self.buffer.len() >= self.config.batch
                    && self.env_steps.is_multiple_of(self.config.train_every)
                {
                    let l = self.update()?;
                    closs += l.critic;
                    nc += 1;
                    if let Some(a) = l.actor {
                        aloss += a;
                        na += 1;
                    }
                }
            }
            obs = next;
        }
        let s = world.summary();
        let stats = EpisodeStats {
            episode,
            objective: s.objective,
            mean_delta_m: s.mean_m,
            mean_delta_b: s.mean_b,
            total_return: ret,
            violations: viol,
            critic_loss: if nc > 0 { closs / nc as f64 } else { 0.0 },
            actor_loss: if na > 0 { aloss / na as f64 } else { 0.0 },
            noise: sigma,
            aggregated: false,
        };
        Ok((stats, records))
    }

    /// Evaluates the deterministic policy for one episode.
    pub fn evaluate(&mut self) -> Result<EpisodeStats, LearnError> {
        Ok(self.run_episode(0, 0.0, false)?.0)
    }

    /// Per-agent batch matrices: observations, actions, next observations.
    fn agent_matrices(&self, batch: &[Transition]) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let n = self.agents();
        let obs = (0..n)
            .map(|i| rows(batch.iter().map(|t| t.obs[i].as_slice()), self.obs_dims[i]))
            .collect();
        let act = (0..n)
            .map(|i| rows(batch.iter().map(|t| t.actions[i].as_slice()), self.act_dims[i]))
            .collect();
        let next = (0..n)
            .map(|i| rows(batch.iter().map(|t| t.next_obs[i].as_slice()), self.obs_dims[i]))
            .collect();
        (obs, act, next)
    }

    /// Target values for the global critics and for each local critic.
    ///
    /// `y_g = r_g + gamma * min_j Q'_gj(S', A')` with `A'` from the target
    /// actors; `y_m = r_m + gamma * Q'_m(s'_m, a'_m)`.
    pub fn critic_targets(&self, batch: &[Transition]) -> Result<(Vec<f64>, Vec<Vec<f64>>), LearnError> {
        let (_, _, next) = self.agent_matrices(batch);
        self.targets_from(batch, &next)
    }

    fn targets_from(
        &self,
        batch: &[Transition],
        next: &[Array2<f64>],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>), LearnError> {
        let gamma = self.config.gamma;
        let next_act = (0..self.agents())
            .map(|i| self.actor_target(i).forward(next[i].view()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut parts: Vec<&Array2<f64>> = next.iter().collect();
        parts.extend(next_act.iter());
        let sa = hcat(&parts);
        let mut q_min: Option<Array2<f64>> = None;
        for t in &self.global_critic_targets {
            let q = t.forward(sa.view())?;
            q_min = Some(match q_min {
                None => q,
                Some(prev) => ndarray::Zip::from(&prev).and(&q).map_collect(|&a, &b| a.min(b)),
            });
        }
        let q_min = q_min.expect("at least one global critic");
        let y_g = batch
            .iter()
            .enumerate()
            .map(|(b, t)| t.global_reward + gamma * q_min[[b, 0]])
            .collect();
        let mut y_l = Vec::with_capacity(self.local_critic_targets.len());
        for (m, t) in self.local_critic_targets.iter().enumerate() {
            let q = t.forward(hcat(&[&next[m], &next_act[m]]).view())?;
            y_l.push(
                batch
                    .iter()
                    .enumerate()
                    .map(|(b, tr)| tr.rewards[m] + gamma * q[[b, 0]])
                    .collect(),
            );
        }
        Ok((y_g, y_l))
    }

    fn fit_critic(
        net: &mut Mlp,
        opt: &mut Optimizer,
        input: &Array2<f64>,
        y: &[f64],
        name: String,
        update: u64,
        max_loss: f64,
    ) -> Result<f64, LearnError> {
        let tr = net.forward_trace(input.view())?;
        let out = tr.output();
        let b = y.len() as f64;
        let mut grad = Array2::zeros((y.len(), 1));
        let mut loss = 0.0;
        for (i, &t) in y.iter().enumerate() {
            let d = out[[i, 0]] - t;
            loss += d * d / b;
            grad[[i, 0]] = 2.0 * d / b;
        }
        if !loss.is_finite() || loss > max_loss {
            return Err(LearnError::Diverged { network: name, update, loss });
        }
        let (grads, _) = net.backward(&tr, &grad);
        opt.step(net, &grads)?;
        Ok(loss)
    }

    /// One gradient update from a sampled batch.
    fn update(&mut self) -> Result<Losses, LearnError> {
        let batch: Vec<Transition> = self
            .buffer
            .sample(self.config.batch, &mut self.rng)
            .into_iter()
            .cloned()
            .collect();
        let (obs, act, next) = self.agent_matrices(&batch);
        let (y_g, y_l) = self.targets_from(&batch, &next)?;
        let n = self.agents();
        let m_n = self.scenario.uavs;
        let bsz = batch.len() as f64;
        let (update, max_loss, tau) = (self.updates, self.config.max_loss, self.config.tau);

        let mut parts: Vec<&Array2<f64>> = obs.iter().collect();
        parts.extend(act.iter());
        let sa = hcat(&parts);
        let mut closs = 0.0;
        for (j, (net, opt)) in self.global_critics.iter_mut().zip(&mut self.global_opt).enumerate() {
            closs += Self::fit_critic(net, opt, &sa, &y_g, format!("global_critic_{j}"), update, max_loss)?;
        }
        for (t, s) in self.global_critic_targets.iter_mut().zip(&self.global_critics) {
            t.soft_update(s, tau);
        }

        let mut actor_loss = None;
        if update % self.config.policy_delay == 0 {
            for m in 0..self.local_critics.len() {
                let input = hcat(&[&obs[m], &act[m]]);
                closs += Self::fit_critic(
                    &mut self.local_critics[m],
                    &mut self.local_critic_opt[m],
                    &input,
                    &y_l[m],
                    format!("uav_critic_{m}"),
                    update,
                    max_loss,
                )?;
            }

            let traces = (0..n)
                .map(|i| self.actor(i).forward_trace(obs[i].view()))
                .collect::<Result<Vec<_>, _>>()?;
            let cur: Vec<Array2<f64>> = traces.iter().map(|t| t.output().clone()).collect();
            let mut parts: Vec<&Array2<f64>> = obs.iter().collect();
            parts.extend(cur.iter());
            let sa_cur = hcat(&parts);
            let g1 = &self.global_critics[0];
            let tr_g = g1.forward_trace(sa_cur.view())?;
            let mut loss = -tr_g.output().sum() / bsz;
            let (_, d_in) = g1.backward(&tr_g, &Array2::from_elem((batch.len(), 1), -1.0 / bsz));
            let s_dim: usize = self.obs_dims.iter().sum();
            let mut offset = s_dim;
            let mut grads_out = Vec::with_capacity(n);
            for i in 0..n {
                let w = self.act_dims[i];
                let mut g = d_in.slice(s![.., offset..offset + w]).to_owned();
                offset += w;
                if i < self.local_critics.len() {
                    let lc = &self.local_critics[i];
                    let tr_l = lc.forward_trace(hcat(&[&obs[i], &cur[i]]).view())?;
                    loss -= tr_l.output().sum() / bsz;
                    let (_, dl) = lc.backward(&tr_l, &Array2::from_elem((batch.len(), 1), -1.0 / bsz));
                    g += &dl.slice(s![.., self.obs_dims[i]..]);
                }
                grads_out.push(g);
            }
            for (i, (tr, g)) in traces.iter().zip(&grads_out).enumerate() {
                let (grads, _) = self.actor(i).backward(tr, g);
                if i < m_n {
                    self.uav_actor_opt[i].step(&mut self.uav_actors[i], &grads)?;
                } else {
                    self.bs_actor_opt.step(&mut self.bs_actor, &grads)?;
                }
            }
            actor_loss = Some(loss);

            for (t, s) in self.uav_actor_targets.iter_mut().zip(&self.uav_actors) {
                t.soft_update(s, tau);
            }
            self.bs_actor_target.soft_update(&self.bs_actor, tau);
            for (t, s) in self.local_critic_targets.iter_mut().zip(&self.local_critics) {
                t.soft_update(s, tau);
            }
        }
        self.updates += 1;
        Ok(Losses { critic: closs, actor: actor_loss })
    }

    /// Every network this trainer holds.
    pub fn registry(&self) -> NetworkRegistry {
        let entry = |role: NetRole, net: &Mlp| {
            let mut sizes = vec![net.inputs()];
            sizes.extend(net.layers.iter().map(|l| l.w.ncols()));
            NetworkEntry { role, sizes, params: net.param_count() }
        };
        let mut entries = Vec::new();
        for m in 0..self.scenario.uavs {
            entries.push(entry(NetRole::UavActor(m), &self.uav_actors[m]));
            entries.push(entry(NetRole::UavActorTarget(m), &self.uav_actor_targets[m]));
        }
        for m in 0..self.local_critics.len() {
            entries.push(entry(NetRole::UavCritic(m), &self.local_critics[m]));
            entries.push(entry(NetRole::UavCriticTarget(m), &self.local_critic_targets[m]));
        }
        entries.push(entry(NetRole::BsActor, &self.bs_actor));
        entries.push(entry(NetRole::BsActorTarget, &self.bs_actor_target));
        for j in 0..self.global_critics.len() {
            entries.push(entry(NetRole::GlobalCritic(j), &self.global_critics[j]));
            entries.push(entry(NetRole::GlobalCriticTarget(j), &self.global_critic_targets[j]));
        }
        NetworkRegistry { uav_agents: self.scenario.uavs, entries }
    }

    /// Writes every live network to `dir/<name>.bin`.
    pub fn save(&self, dir: &Path) -> Result<(), LearnError> {
        std::fs::create_dir_all(dir)?;
        let mut nets: Vec<(String, &Mlp)> = Vec::new();
        for (m, a) in self.uav_actors.iter().enumerate() {
            nets.push((NetRole::UavActor(m).name(), a));
        }
        for (m, c) in self.local_critics.iter().enumerate() {
            nets.push((NetRole::UavCritic(m).name(), c));
        }
        nets.push((NetRole::BsActor.name(), &self.bs_actor));
        for (j, c) in self.global_critics.iter().enumerate() {
            nets.push((NetRole::GlobalCritic(j).name(), c));
        }
        for (name, net) in nets {
            let f = std::fs::File::create(dir.join(format!("{name}.bin")))?;
            write_params(std::io::BufWriter::new(f), &net.params())?;
        }
        Ok(())
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }
}
