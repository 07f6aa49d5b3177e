use std::fs;
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nn::{Adam, DenseNet, Gradients, OutputActivation, Real};
use super::replay::{Batch, ReplayBuffer, Transition};
use super::{project_in_place, project_vjp};
use crate::envs::{EnvVariant, TrustEnv};
use crate::error::{invalid, Error, Result};
use crate::policy::Policy;
use crate::seed::{rng_from_seed, substream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    /// Polyak rate for the target networks.
    pub soft_update: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps before the first update.
    pub warmup_steps: usize,
    pub noise_sigma: f64,
    /// Multiplicative decay of `noise_sigma` per episode.
    pub noise_decay: f64,
    pub episodes: usize,
    pub hidden: Vec<usize>,
    /// Weight of the quadratic pull on over-budget actor outputs.
    pub budget_penalty: f64,
    pub seed: u64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.0,
            soft_update: 0.005,
            batch_size: 64,
            buffer_capacity: 50_000,
            warmup_steps: 1_000,
            noise_sigma: 0.03,
            noise_decay: 0.999,
            episodes: 300,
            hidden: vec![128, 128],
            budget_penalty: 1.0,
            seed: 0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(invalid("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(invalid(format!("discount must lie in [0,1), got {}", self.discount)));
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return Err(invalid(format!("soft-update rate must lie in (0,1], got {}", self.soft_update)));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(invalid("batch size and buffer capacity must be positive"));
        }
        if self.noise_sigma < 0.0 || self.budget_penalty < 0.0 {
            return Err(invalid("noise scale and budget penalty must be non-negative"));
        }
        Ok(())
    }
}

/// Per-episode training diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episode_returns: Vec<f64>,
    /// Mean critic loss over the updates of each episode (0 before warmup ends).
    pub critic_losses: Vec<f64>,
    pub actor_losses: Vec<f64>,
    pub updates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHeader {
    pub variant: EnvVariant,
    pub n: usize,
    pub layout: String,
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
}

/// Float type of the trained networks.
pub type NetFloat = f32;

fn to_net(x: &[f64]) -> Vec<NetFloat> {
    x.iter().map(|&v| v as NetFloat).collect()
}

fn from_net(x: &[NetFloat]) -> Vec<f64> {
    x.iter().map(|&v| v.to_f64()).collect()
}

/// A trained actor plus the observation layout it expects. Deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHandle {
    pub header: PolicyHeader,
    pub actor: DenseNet<NetFloat>,
}

fn layout_name(variant: EnvVariant) -> &'static str {
    match variant {
        EnvVariant::Unaware => "adjacency,util",
        EnvVariant::Aware => "adjacency,util,tau",
        EnvVariant::Learned => "adjacency,util,belief_mean,belief_inv_count",
    }
}

impl PolicyHandle {
    pub fn new(variant: EnvVariant, n: usize, actor: DenseNet<NetFloat>, seed: u64) -> Result<Self> {
        if actor.input_size() != variant.obs_len(n) || actor.output_size() != n {
            return Err(Error::ShapeMismatch {
                expected: variant.obs_len(n),
                got: actor.input_size(),
            });
        }
        Ok(Self {
            header: PolicyHeader {
                variant,
                n,
                layout: layout_name(variant).to_string(),
                layer_sizes: actor.sizes(),
                seed,
            },
            actor,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let handle: PolicyHandle = serde_json::from_str(text)?;
        if handle.actor.sizes() != handle.header.layer_sizes {
            return Err(invalid("policy header layer sizes disagree with parameters"));
        }
        PolicyHandle::new(handle.header.variant, handle.header.n, handle.actor, handle.header.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl Policy for PolicyHandle {
    fn variant(&self) -> EnvVariant {
        self.header.variant
    }

    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(from_net(&self.actor.forward_one(&to_net(obs))?))
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-3, 1.0 - 1e-3);
    (p / (1.0 - p)).ln()
}

/// Online and target networks with their optimizers and replay memory.
pub struct Agent {
    pub actor: DenseNet<NetFloat>,
    pub critic: DenseNet<NetFloat>,
    actor_target: DenseNet<NetFloat>,
    critic_target: DenseNet<NetFloat>,
    actor_opt: Adam<NetFloat>,
    critic_opt: Adam<NetFloat>,
    pub buffer: ReplayBuffer,
    cfg: DdpgConfig,
    rho: f64,
    n: usize,
}

impl Agent {
    pub fn new(obs_dim: usize, n: usize, rho: f64, cfg: &DdpgConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init = rng_from_seed(substream(cfg.seed, 0x1417));
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(n);
        let mut critic_sizes = vec![obs_dim + n];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);

        let mut actor = DenseNet::<NetFloat>::new(&actor_sizes, OutputActivation::Sigmoid, 3e-3, &mut init);
        // start from roughly an equal split of the budget
        actor.layers.last_mut().expect("output layer").b.fill(logit(rho / n as f64) as NetFloat);
        let critic = DenseNet::new(&critic_sizes, OutputActivation::Identity, 3e-3, &mut init);
        Ok(Self {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic_opt: Adam::new(&critic, cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer_capacity, obs_dim, n)?,
            cfg: cfg.clone(),
            rho,
            n,
        })
    }

    /// Greedy action: actor output projected onto the budget.
    pub fn greedy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut a = from_net(&self.actor.forward_one(&to_net(obs))?);
        project_in_place(&mut a, self.rho);
        Ok(a)
    }

    /// Actor output plus Gaussian noise, clipped to [0,1], then projected.
    pub fn explore<R: Rng + ?Sized>(&self, obs: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = from_net(&self.actor.forward_one(&to_net(obs))?);
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
            for x in &mut a {
                *x = (*x + noise.sample(rng)).clamp(0.0, 1.0);
            }
        }
        project_in_place(&mut a, self.rho);
        Ok(a)
    }

    /// Critic estimate `Q(obs, action)`.
    pub fn critic_value(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let k = self.critic_action_scale();
        let mut input = to_net(obs);
        input.extend(action.iter().map(|&x| x as NetFloat * k));
        Ok(self.critic.forward_one(&input)?[0].to_f64())
    }

    /// The critic sees actions multiplied by `n/ρ`, so an equal split of the
    /// budget enters as ones, on the same scale as the observations.
    fn critic_action_scale(&self) -> NetFloat {
        (self.n as f64 / self.rho) as NetFloat
    }

    /// Projects each row of an actor output batch onto the budget.
    fn project_rows(&self, m: &Array2<NetFloat>) -> Array2<NetFloat> {
        let mut out = m.as_standard_layout().into_owned();
        for mut row in out.rows_mut() {
            let mut a = from_net(row.as_slice().expect("standard layout"));
            project_in_place(&mut a, self.rho);
            row.iter_mut().zip(&a).for_each(|(x, &v)| *x = v as NetFloat);
        }
        out
    }

    /// One critic step and one actor step on `batch`; returns `(critic_loss, actor_loss)`.
    pub fn update(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let rows = batch.obs.nrows();
        let b = rows as f64;
        let obs = batch.obs.mapv(|x| x as NetFloat);
        let actions = batch.actions.mapv(|x| x as NetFloat);
        let k = self.critic_action_scale();

        // critic: regress onto r + γ(1 − done)·Q'(s', μ'(s')); a myopic critic
        // never reads the targets
        let q_next = if self.cfg.discount > 0.0 {
            let next_obs = batch.next_obs.mapv(|x| x as NetFloat);
            let next_a = self.project_rows(&self.actor_target.forward(next_obs.view())?) * k;
            let next_in = concatenate(Axis(1), &[next_obs.view(), next_a.view()]).expect("row counts agree");
            self.critic_target.forward(next_in.view())?
        } else {
            Array2::zeros((rows, 1))
        };
        let actions = actions * k;
        let critic_in = concatenate(Axis(1), &[obs.view(), actions.view()]).expect("row counts agree");
        let cache = self.critic.forward_cached(critic_in.view())?;
        let mut critic_loss = 0.0;
        let mut grad = Array2::zeros((rows, 1));
        for i in 0..rows {
            let target = batch.rewards[i] + self.cfg.discount * (1.0 - batch.dones[i]) * q_next[[i, 0]].to_f64();
            let err = cache.output[[i, 0]].to_f64() - target;
            critic_loss += err * err / b;
            grad[[i, 0]] = (2.0 * err / b) as NetFloat;
        }
        let (grads, _) = self.critic.backward(&cache, grad.view(), true, None);
        self.critic_opt.step(&mut self.critic, &grads.expect("requested"));

        let (actor_loss, grads) = self.actor_gradients(obs.view())?;
        self.actor_opt.step(&mut self.actor, &grads);

        self.critic_target.soft_update_from(&self.critic, self.cfg.soft_update)?;
        self.actor_target.soft_update_from(&self.actor, self.cfg.soft_update)?;

        if !critic_loss.is_finite() || !actor_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite loss (critic {critic_loss}, actor {actor_loss})"
            )));
        }
        Ok((critic_loss, actor_loss))
    }

    /// Actor loss `−mean Q(s, project(μ(s))) + penalty·mean ½(Σμ(s) − ρ)₊²`
    /// and its gradient with respect to the actor parameters.
    pub fn actor_gradients(&self, obs: ArrayView2<NetFloat>) -> Result<(f64, Gradients<NetFloat>)> {
        let rows = obs.nrows();
        let b = rows as f64;
        let k = self.critic_action_scale();
        let actor_cache = self.actor.forward_cached(obs)?;
        let raw = actor_cache.output.as_standard_layout().mapv(|x| x.to_f64());
        let act = self.project_rows(&actor_cache.output) * k;
        let q_in = concatenate(Axis(1), &[obs, act.view()]).expect("row counts agree");
        let q_cache = self.critic.forward_cached(q_in.view())?;
        let mut loss = -q_cache.output.iter().map(|q| q.to_f64()).sum::<f64>() / b;
        let dq = Array2::from_elem((rows, 1), (-1.0 / b) as NetFloat);
        let (_, dq_da) = self.critic.backward(&q_cache, dq.view(), false, Some(obs.ncols()));
        let mut grad_raw = dq_da.expect("requested").as_standard_layout().mapv(|x| (x * k).to_f64());
        for (i, mut g) in grad_raw.rows_mut().into_iter().enumerate() {
            let r = raw.row(i);
            let r = r.as_slice().expect("standard layout");
            let g = g.as_slice_mut().expect("standard layout");
            project_vjp(r, g, self.rho);
            let excess = r.iter().sum::<f64>() - self.rho;
            if excess > 0.0 {
                loss += 0.5 * self.cfg.budget_penalty * excess * excess / b;
                let pull = self.cfg.budget_penalty * excess / b;
                g.iter_mut().for_each(|x| *x += pull);
            }
        }
        let grad_raw = grad_raw.mapv(|x| x as NetFloat);
        let (grads, _) = self.actor.backward(&actor_cache, grad_raw.view(), true, None);
        Ok((loss, grads.expect("requested")))
    }

    pub fn parameters_finite(&self) -> bool {
        self.actor.all_finite() && self.critic.all_finite()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Trains a policy in `env`. Episode `e` resets the environment on a stream
/// derived from `(cfg.seed, e)`.
pub fn train(env: &mut TrustEnv, cfg: &DdpgConfig) -> Result<(PolicyHandle, TrainingLog)> {
    cfg.validate()?;
    let n = env.config().n;
    let rho = env.config().org_config.rho;
    let mut agent = Agent::new(env.obs_len(), n, rho, cfg)?;
    let mut noise_rng: SimRng = rng_from_seed(substream(cfg.seed, 0x2001));
    let mut sample_rng: SimRng = rng_from_seed(substream(cfg.seed, 0x2002));
    let mut log = TrainingLog::default();
    let mut sigma = cfg.noise_sigma;
    let mut total_steps = 0usize;

    for episode in 0..cfg.episodes {
        let mut obs = env.reset(substream(cfg.seed, 0x3000 + episode as u64))?;
        let mut ret = 0.0;
        let (mut closs, mut aloss, mut updates) = (0.0, 0.0, 0usize);
        loop {
            let action = agent.explore(&obs, sigma, &mut noise_rng)?;
            let out = env.step(&action)?;
            ret += out.reward;
            agent.buffer.push(Transition {
                obs: std::mem::take(&mut obs),
                action,
                reward: out.reward,
                next_obs: out.obs.clone(),
                done: out.done,
            })?;
            obs = out.obs;
            total_steps += 1;
            if total_steps >= cfg.warmup_steps && agent.buffer.len() >= cfg.batch_size {
                let batch = agent.buffer.sample_batch(cfg.batch_size, &mut sample_rng)?;
                let (c, a) = agent
                    .update(&batch)
                    .map_err(|e| Error::Diverged(format!("episode {episode}: {e}")))?;
                closs += c;
                aloss += a;
                updates += 1;
            }
            if out.done {
                break;
            }
        }
        if !agent.parameters_finite() {
            return Err(Error::Diverged(format!("non-finite parameters after episode {episode}")));
        }
        log.episode_returns.push(ret);
        let denom = updates.max(1) as f64;
        log.critic_losses.push(closs / denom);
        log.actor_losses.push(aloss / denom);
        log.updates += updates;
        sigma *= cfg.noise_decay;
    }
    let handle = PolicyHandle::new(env.config().variant, n, agent.actor, cfg.seed)?;
    Ok((handle, log))
}

/// Greedy rollouts in a training environment; returns the mean per-step
/// reward of each episode.
pub fn evaluate_in_env(policy: &mut dyn Policy, env: &mut TrustEnv, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let rho = env.config().org_config.rho;
    (0..episodes)
        .map(|e| {
            let mut obs = env.reset(substream(seed, e as u64))?;
            let (mut total, mut steps) = (0.0, 0usize);
            loop {
                let mut a = policy.act(&obs)?;
                a.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
                project_in_place(&mut a, rho);
                let out = env.step(&a)?;
                total += out.reward;
                steps += 1;
                obs = out.obs;
                if out.done {
                    break;
                }
            }
            Ok(total / steps as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{BetaSpec, EnvConfig};
    use crate::graph::erdos_renyi;
    use crate::reward::OrgConfig;

    fn small_env(variant: EnvVariant, c: f64) -> TrustEnv {
        let g = erdos_renyi(5, 0.4, 1).unwrap();
        let mut cfg = EnvConfig::new(variant, 5, BetaSpec::new(8.0, 2.0).unwrap(), OrgConfig::with_c(c));
        cfg.horizon = 5;
        TrustEnv::new(cfg, g).unwrap()
    }

    fn tiny_cfg() -> DdpgConfig {
        DdpgConfig {
            episodes: 8,
            warmup_steps: 10,
            batch_size: 8,
            hidden: vec![16, 16],
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn training_is_reproducible() {
        let (p1, l1) = train(&mut small_env(EnvVariant::Learned, 0.5), &tiny_cfg()).unwrap();
        let (p2, l2) = train(&mut small_env(EnvVariant::Learned, 0.5), &tiny_cfg()).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(p1, p2);
        assert_eq!(l1.episode_returns.len(), 8);
        assert!(l1.updates > 0);
    }

    #[test]
    fn greedy_evaluation_is_noise_free() {
        let (mut policy, _) = train(&mut small_env(EnvVariant::Aware, 0.5), &tiny_cfg()).unwrap();
        let mut env = small_env(EnvVariant::Aware, 0.5);
        let a = evaluate_in_env(&mut policy, &mut env, 3, 9).unwrap();
        let b = evaluate_in_env(&mut policy, &mut env, 3, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = DdpgConfig {
            discount: 1.0,
            ..Default::default()
        };
        assert!(train(&mut small_env(EnvVariant::Unaware, 0.5), &bad).is_err());
        let bad = DdpgConfig {
            soft_update: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = DdpgConfig {
            critic_lr: 1e300,
            actor_lr: 1e300,
            ..tiny_cfg()
        };
        let err = train(&mut small_env(EnvVariant::Unaware, 0.0), &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged(_)), "{err}");
    }

    #[test]
    fn policy_handle_round_trips_bit_exactly() {
        let (policy, _) = train(&mut small_env(EnvVariant::Learned, 0.25), &tiny_cfg()).unwrap();
        let back = PolicyHandle::from_json(&policy.to_json().unwrap()).unwrap();
        let bits = |p: &PolicyHandle| p.actor.params_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&policy), bits(&back));
        assert_eq!(policy.header, back.header);
        assert_eq!(back.header.layer_sizes, vec![5 * 5 + 15, 16, 16, 5]);
    }

    #[test]
    fn policy_handle_rejects_layout_mismatch() {
        let actor = DenseNet::zeros(&[10, 4, 3], OutputActivation::Sigmoid);
        assert!(PolicyHandle::new(EnvVariant::Aware, 3, actor, 0).is_err());
    }
}
