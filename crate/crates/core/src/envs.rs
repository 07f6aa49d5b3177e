//! Training environments for the three trust-information regimes.
//!
//! All variants share one reset/step contract and one RNG stream layout:
//! `n` trust draws from the prior at reset, then `n` acceptance draws per
//! step in node order. They differ in the organization's model of the
//! community, which is kept in an [`AgentView`]:
//!
//! * `Unaware`: every citizen is assumed to accept; utility is overwritten
//!   with the offered service.
//! * `Aware`: acceptance follows the true trust, utility is overwritten on
//!   acceptance, and the trust vector is advanced with the exact update rule.
//! * `Learned`: acceptance outcomes feed per-citizen Beta beliefs, whose mean
//!   is blended with the social influence and fed back as pseudo-counts.
//!
//! The same views are reused during ground-truth evaluation so a policy
//! always sees observations in the layout it was trained on.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::CommunityGraph;
use crate::reward::{realized_utility, OrgConfig};
use crate::seed::{rng_from_seed, SimRng};
use crate::trust::{all_fairness, draw_acceptance, trust_update, CitizenState, ServiceVector, TrustParams};

const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvVariant {
    Unaware,
    Aware,
    Learned,
}

impl EnvVariant {
    pub const ALL: [EnvVariant; 3] = [EnvVariant::Unaware, EnvVariant::Aware, EnvVariant::Learned];

    pub fn id(self) -> u64 {
        match self {
            Self::Unaware => 0,
            Self::Aware => 1,
            Self::Learned => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Unaware => "unaware",
            Self::Aware => "aware",
            Self::Learned => "learned",
        }
    }

    /// Number of per-node blocks after the adjacency matrix.
    fn node_blocks(self) -> usize {
        match self {
            Self::Unaware => 1,
            Self::Aware => 2,
            Self::Learned => 3,
        }
    }

    pub fn obs_len(self, n: usize) -> usize {
        n * n + self.node_blocks() * n
    }

    pub fn nodes_from_obs_len(self, len: usize) -> Option<usize> {
        let k = self.node_blocks();
        (1..=len).take_while(|n| n * n <= len).find(|&n| n * n + k * n == len)
    }
}

impl fmt::Display for EnvVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unaware" => Ok(Self::Unaware),
            "aware" => Ok(Self::Aware),
            "learned" => Ok(Self::Learned),
            other => Err(invalid(format!(
                "variant: unknown value '{other}' (expected unaware, aware or learned)"
            ))),
        }
    }
}

/// Beta(a, b) prior over initial trust. Serialized as `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct BetaSpec {
    pub a: f64,
    pub b: f64,
}

impl BetaSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(invalid(format!("Beta parameters must be positive, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let dist = Beta::new(self.a, self.b).map_err(|e| invalid(format!("Beta({}, {}): {e}", self.a, self.b)))?;
        Ok((0..n).map(|_| dist.sample(rng)).collect())
    }
}

impl TryFrom<[f64; 2]> for BetaSpec {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        BetaSpec::new(v[0], v[1])
    }
}

impl From<BetaSpec> for [f64; 2] {
    fn from(b: BetaSpec) -> Self {
        [b.a, b.b]
    }
}

impl FromStr for BetaSpec {
    type Err = Error;

    /// Parses `a,b`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(invalid(format!("prior must be 'a,b', got '{s}'")));
        }
        let parse = |p: &str| p.parse::<f64>().map_err(|_| invalid(format!("prior: bad number '{p}'")));
        BetaSpec::new(parse(parts[0])?, parse(parts[1])?)
    }
}

/// Per-citizen Beta belief over acceptance probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustBelief {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub tau_hat: Vec<f64>,
}

impl TrustBelief {
    pub fn uniform(n: usize) -> Self {
        Self {
            alpha: vec![1.0; n],
            beta: vec![1.0; n],
            tau_hat: vec![0.5; n],
        }
    }

    pub fn observe(&mut self, v: usize, accepted: bool) {
        if accepted {
            self.alpha[v] += 1.0;
        } else {
            self.beta[v] += 1.0;
        }
    }

    pub fn posterior_mean(&self, v: usize) -> f64 {
        self.alpha[v] / (self.alpha[v] + self.beta[v])
    }
}

/// The organization's model of the community, in a given information regime.
#[derive(Debug, Clone)]
pub struct AgentView {
    variant: EnvVariant,
    adjacency: Vec<f64>,
    util: Vec<f64>,
    /// Aware only: trust advanced with the exact update rule.
    tau: Vec<f64>,
    /// Learned only.
    belief: TrustBelief,
    drift: bool,
}

impl AgentView {
    /// `initial_tau` is only read by the aware view.
    pub fn new(variant: EnvVariant, g: &CommunityGraph, initial_tau: &[f64]) -> Self {
        let n = g.n();
        Self {
            variant,
            adjacency: g.flatten_adjacency(),
            util: vec![0.0; n],
            tau: if variant == EnvVariant::Aware {
                initial_tau.to_vec()
            } else {
                Vec::new()
            },
            belief: TrustBelief::uniform(n),
            drift: true,
        }
    }

    pub fn with_drift(mut self, drift: bool) -> Self {
        self.drift = drift;
        self
    }

    pub fn n(&self) -> usize {
        self.util.len()
    }

    pub fn variant(&self) -> EnvVariant {
        self.variant
    }

    pub fn util(&self) -> &[f64] {
        &self.util
    }

    pub fn belief(&self) -> &TrustBelief {
        &self.belief
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.variant.obs_len(self.n()));
        obs.extend_from_slice(&self.adjacency);
        obs.extend_from_slice(&self.util);
        match self.variant {
            EnvVariant::Unaware => {}
            EnvVariant::Aware => obs.extend_from_slice(&self.tau),
            EnvVariant::Learned => {
                let b = &self.belief;
                obs.extend((0..self.n()).map(|v| b.alpha[v] / (b.alpha[v] + b.beta[v])));
                obs.extend((0..self.n()).map(|v| 1.0 / (b.alpha[v] + b.beta[v])));
            }
        }
        obs
    }

    /// Updates the view after one round of offers.
    ///
    /// Returns, for the learned view, the blended trust estimates that were
    /// added as pseudo-counts (empty otherwise, or when drift is off).
    pub fn record(&mut self, g: &CommunityGraph, s: &ServiceVector, accepted: &[bool], p: &TrustParams) -> Vec<f64> {
        let n = self.n();
        let s = s.as_slice();
        match self.variant {
            EnvVariant::Unaware => {
                self.util.copy_from_slice(s);
                Vec::new()
            }
            EnvVariant::Aware => {
                for v in 0..n {
                    if accepted[v] {
                        self.util[v] = s[v];
                    }
                }
                let fairness = all_fairness(g, &self.util);
                for v in 0..n {
                    self.tau[v] = trust_update(self.tau[v], self.util[v], fairness[v], p);
                }
                Vec::new()
            }
            EnvVariant::Learned => {
                for v in 0..n {
                    if accepted[v] {
                        self.util[v] = s[v];
                    }
                    self.belief.observe(v, accepted[v]);
                }
                let fairness = all_fairness(g, &self.util);
                let mut drifted = Vec::new();
                for v in 0..n {
                    let prior = self.belief.posterior_mean(v);
                    let blended = trust_update(prior, self.util[v], fairness[v], p);
                    self.belief.tau_hat[v] = blended;
                    if self.drift {
                        self.belief.alpha[v] += 0.5 * blended;
                        self.belief.beta[v] += 0.5 * blended;
                        drifted.push(blended);
                    }
                }
                drifted
            }
        }
    }
}

/// Initial trust for one episode or rollout, drawn first on a fresh stream.
pub fn draw_initial_trust<R: Rng + ?Sized>(prior: &BetaSpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    prior.sample_n(n, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub variant: EnvVariant,
    pub n: usize,
    #[serde(rename = "I")]
    pub horizon: usize,
    pub tau_prior: BetaSpec,
    pub trust_params: TrustParams,
    pub org_config: OrgConfig,
    pub seed: u64,
    /// Pseudo-count drift of the learned belief.
    #[serde(default = "default_true")]
    pub drift: bool,
    /// Test hook: every citizen starts with this trust instead of a prior draw.
    #[serde(default)]
    pub fixed_trust: Option<f64>,
    /// Test hook: hidden trust never changes.
    #[serde(default)]
    pub freeze_trust: bool,
}

fn default_true() -> bool {
    true
}

impl EnvConfig {
    pub fn new(variant: EnvVariant, n: usize, tau_prior: BetaSpec, org_config: OrgConfig) -> Self {
        Self {
            variant,
            n,
            horizon: 25,
            tau_prior,
            trust_params: TrustParams::default(),
            org_config,
            seed: 0,
            drift: true,
            fixed_trust: None,
            freeze_trust: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("episode length I must be at least 1"));
        }
        BetaSpec::new(self.tau_prior.a, self.tau_prior.b)?;
        self.trust_params.validate()?;
        self.org_config.validate()?;
        if let Some(t) = self.fixed_trust {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid(format!("fixed_trust must lie in [0,1], got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// One training environment instance. Owns its RNG.
#[derive(Debug, Clone)]
pub struct TrustEnv {
    cfg: EnvConfig,
    graph: CommunityGraph,
    view: AgentView,
    hidden_tau: Vec<f64>,
    steps: usize,
    rng: SimRng,
    drift_log: Vec<Vec<f64>>,
    initialized: bool,
}

impl TrustEnv {
    pub fn new(cfg: EnvConfig, graph: CommunityGraph) -> Result<Self> {
        cfg.validate()?;
        if graph.n() != cfg.n {
            return Err(Error::ShapeMismatch {
                expected: cfg.n,
                got: graph.n(),
            });
        }
        let view = AgentView::new(cfg.variant, &graph, &vec![0.0; cfg.n]).with_drift(cfg.drift);
        let rng = rng_from_seed(cfg.seed);
        Ok(Self {
            hidden_tau: vec![0.0; cfg.n],
            cfg,
            graph,
            view,
            steps: 0,
            rng,
            drift_log: Vec::new(),
            initialized: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &CommunityGraph {
        &self.graph
    }

    pub fn obs_len(&self) -> usize {
        self.cfg.variant.obs_len(self.cfg.n)
    }

    /// Starts a new episode on the stream seeded by `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = rng_from_seed(seed);
        let n = self.cfg.n;
        self.hidden_tau = match self.cfg.fixed_trust {
            Some(t) => vec![t; n],
            None => draw_initial_trust(&self.cfg.tau_prior, n, &mut self.rng)?,
        };
        self.view = AgentView::new(self.cfg.variant, &self.graph, &self.hidden_tau).with_drift(self.cfg.drift);
        self.steps = 0;
        self.drift_log.clear();
        self.initialized = true;
        Ok(self.observe())
    }

    pub fn observe(&self) -> Vec<f64> {
        self.view.observation()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if !self.initialized || self.steps >= self.cfg.horizon {
            return Err(Error::EpisodeDone);
        }
        let n = self.cfg.n;
        if action.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: action.len(),
            });
        }
        if action.iter().any(|x| !(0.0..=1.0).contains(x))
            || action.iter().sum::<f64>() > self.cfg.org_config.rho + FEASIBILITY_TOL
        {
            return Err(invalid("action violates the service constraints; project it first"));
        }
        let s = ServiceVector::new_unchecked(action.to_vec());

        // one draw per node even when acceptance is unconditional
        let drawn = draw_acceptance(&self.hidden_tau, &mut self.rng);
        let accepted = match self.cfg.variant {
            EnvVariant::Unaware => vec![true; n],
            _ => drawn,
        };
        let drifted = self.view.record(&self.graph, &s, &accepted, &self.cfg.trust_params);
        if !drifted.is_empty() {
            self.drift_log.push(drifted);
        }
        if !self.cfg.freeze_trust {
            let util = self.view.util();
            let fairness = all_fairness(&self.graph, util);
            for v in 0..n {
                self.hidden_tau[v] = trust_update(self.hidden_tau[v], util[v], fairness[v], &self.cfg.trust_params);
            }
        }
        self.steps += 1;
        let reward = realized_utility(self.view.util(), action, &self.cfg.org_config);
        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done: self.steps == self.cfg.horizon,
        })
    }

    /// Hidden trust and the environment's utility vector. Never shown to the agent.
    pub fn true_state(&self) -> CitizenState {
        CitizenState {
            tau: self.hidden_tau.clone(),
            util: self.view.util().to_vec(),
        }
    }

    pub fn belief(&self) -> &TrustBelief {
        self.view.belief()
    }

    /// Per step, the trust estimates added to both Beta parameters.
    pub fn drift_log(&self) -> &[Vec<f64>] {
        &self.drift_log
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }
}
