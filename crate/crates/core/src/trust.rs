//! Ground-truth institutional-trust dynamics.
//!
//! Each service iteration every citizen flips a coin with their current trust
//! to decide whether to accept the offered service. Accepted services enter a
//! running average of service utility indexed by the global iteration count.
//! Afterwards every citizen blends personal utility and the fairness of
//! utilities across their closed neighborhood into a social influence term,
//! and moves their trust toward it.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ddpg::project_action;
use crate::envs::AgentView;
use crate::error::{invalid, Error, Result};
use crate::graph::CommunityGraph;
use crate::policy::Policy;

const FEASIBILITY_TOL: f64 = 1e-9;

/// Hidden per-citizen state: trust `tau` and accumulated utility `util`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitizenState {
    pub tau: Vec<f64>,
    pub util: Vec<f64>,
}

impl CitizenState {
    /// Fresh citizens with the given trust and zero utility.
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("trust values must lie in [0,1]"));
        }
        let n = tau.len();
        Ok(Self {
            tau,
            util: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    pub fn mean_trust(&self) -> f64 {
        mean(&self.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustParams {
    /// Weight of personal utility against neighborhood fairness.
    pub lambda: f64,
    /// Weight of social influence against prior trust.
    pub delta: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            delta: 0.5,
        }
    }
}

impl TrustParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid(format!(
                "trust params must lie in [0,1], got lambda={} delta={}",
                self.lambda, self.delta
            )));
        }
        Ok(())
    }
}

/// A feasible allocation: every entry in [0,1] and the total within budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceVector(Vec<f64>);

impl ServiceVector {
    pub fn new(s: Vec<f64>, rho: f64) -> Result<Self> {
        if s.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(invalid("service qualities must lie in [0,1]"));
        }
        let total: f64 = s.iter().sum();
        if total > rho + FEASIBILITY_TOL {
            return Err(invalid(format!("allocation {total} exceeds budget {rho}")));
        }
        Ok(Self(s))
    }

    pub(crate) fn new_unchecked(s: Vec<f64>) -> Self {
        Self(s)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Gini coefficient `Σ|x_i − x_j| / (2 n² mean)`.
///
/// Zero-mean and single-element inputs are treated as perfectly equal.
pub fn gini(x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| *v < 0.0 || v.is_nan()) {
        return Err(invalid("gini is defined for non-negative values only"));
    }
    Ok(gini_unchecked(x))
}

// Sorted form of the pairwise definition: with ascending x and 1-based rank i,
// Σ_{i,j}|x_i − x_j| = 2 Σ_i (2i − n − 1) x_i.
fn gini_unchecked(x: &[f64]) -> f64 {
    let n = x.len();
    if n <= 1 {
        return 0.0;
    }
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    // the rank weights sum to zero, so shifting by the minimum changes nothing
    // except that a constant vector now gives exactly 0
    let min = sorted[0];
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i as f64 + 1.0) - nf - 1.0) * (v - min))
        .sum();
    weighted / (nf * total)
}

/// `1 − gini` over the utilities of `v` and its neighbors.
pub fn neighborhood_fairness(g: &CommunityGraph, util: &[f64], v: usize) -> Result<f64> {
    let nb = g.neighbors(v)?;
    if util.len() != g.n() {
        return Err(Error::ShapeMismatch {
            expected: g.n(),
            got: util.len(),
        });
    }
    if nb.is_empty() {
        return Ok(1.0);
    }
    let mut closed = Vec::with_capacity(nb.len() + 1);
    closed.push(util[v]);
    closed.extend(nb.iter().map(|&w| util[w]));
    Ok(1.0 - gini(&closed)?)
}

pub(crate) fn all_fairness(g: &CommunityGraph, util: &[f64]) -> Vec<f64> {
    (0..g.n())
        .map(|v| neighborhood_fairness(g, util, v).expect("index and shape checked by caller"))
        .collect()
}

/// `δ·(λ·u + (1−λ)·fairness) + (1−δ)·τ`.
pub fn trust_update(tau: f64, util: f64, fairness: f64, p: &TrustParams) -> f64 {
    let influence = p.lambda * util + (1.0 - p.lambda) * fairness;
    (p.delta * influence + (1.0 - p.delta) * tau).clamp(0.0, 1.0)
}

/// Coin flips, one per node in index order, accepting with probability `tau`.
pub fn draw_acceptance<R: Rng + ?Sized>(tau: &[f64], rng: &mut R) -> Vec<bool> {
    tau.iter().map(|&t| rng.random::<f64>() < t).collect()
}

/// Everything one ground-truth iteration produced.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub state: CitizenState,
    pub accepted: Vec<bool>,
    /// Neighborhood fairness measured on the post-acceptance utilities.
    pub fairness: Vec<f64>,
}

/// Applies one iteration given already-drawn acceptance outcomes.
pub fn ground_truth_apply(
    g: &CommunityGraph,
    state: &CitizenState,
    s: &ServiceVector,
    i: usize,
    accepted: &[bool],
    p: &TrustParams,
) -> IterationOutcome {
    let n = g.n();
    let step = i as f64;
    let util: Vec<f64> = (0..n)
        .map(|v| {
            if accepted[v] {
                (step * state.util[v] + s.as_slice()[v]) / (step + 1.0)
            } else {
                state.util[v]
            }
        })
        .collect();
    let fairness = all_fairness(g, &util);
    let tau = (0..n)
        .map(|v| trust_update(state.tau[v], util[v], fairness[v], p))
        .collect();
    IterationOutcome {
        state: CitizenState { tau, util },
        accepted: accepted.to_vec(),
        fairness,
    }
}

/// One iteration of the ground-truth dynamics at global iteration index `i`.
pub fn ground_truth_step<R: Rng + ?Sized>(
    g: &CommunityGraph,
    state: &CitizenState,
    s: &ServiceVector,
    i: usize,
    p: &TrustParams,
    rng: &mut R,
) -> Result<IterationOutcome> {
    check_shapes(g, state, s)?;
    let accepted = draw_acceptance(&state.tau, rng);
    Ok(ground_truth_apply(g, state, s, i, &accepted, p))
}

pub fn ground_truth_iteration<R: Rng + ?Sized>(
    g: &CommunityGraph,
    state: &CitizenState,
    s: &ServiceVector,
    i: usize,
    p: &TrustParams,
    rng: &mut R,
) -> Result<CitizenState> {
    Ok(ground_truth_step(g, state, s, i, p, rng)?.state)
}

fn check_shapes(g: &CommunityGraph, state: &CitizenState, s: &ServiceVector) -> Result<()> {
    for got in [state.tau.len(), state.util.len(), s.len()] {
        if got != g.n() {
            return Err(Error::ShapeMismatch {
                expected: g.n(),
                got,
            });
        }
    }
    Ok(())
}

/// Whether the evaluated policy is queried once or every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    #[default]
    Static,
    Adaptive,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Self::Static),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(invalid(format!("unknown eval mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    pub iterations: usize,
    pub mode: EvalMode,
    pub params: TrustParams,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub s: Vec<f64>,
    pub util: Vec<f64>,
    pub tau: Vec<f64>,
    #[serde(skip)]
    pub fairness: Vec<f64>,
    #[serde(skip)]
    pub accepted: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub initial: CitizenState,
    pub final_state: CitizenState,
    pub warnings: Vec<String>,
}

impl Trajectory {
    /// One JSON object per iteration: `{iter, s, util, tau}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Vec<IterationRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

fn query_policy(
    policy: &mut dyn Policy,
    view: &AgentView,
    rho: f64,
    iter: usize,
    warnings: &mut Vec<String>,
) -> Result<ServiceVector> {
    let raw = policy.act(&view.observation())?;
    if raw.len() != view.n() {
        return Err(Error::ShapeMismatch {
            expected: view.n(),
            got: raw.len(),
        });
    }
    match ServiceVector::new(raw.clone(), rho) {
        Ok(s) => Ok(s),
        Err(_) => {
            let clipped: Vec<f64> = raw.iter().map(|x| x.clamp(0.0, 1.0)).collect();
            let total: f64 = raw.iter().sum();
            warnings.push(format!(
                "iteration {iter}: infeasible policy output (sum {total:.6}, budget {rho}); projected"
            ));
            Ok(project_action(&clipped, rho))
        }
    }
}

/// Rolls out a policy under the ground-truth dynamics.
///
/// The policy sees observations built by an [`AgentView`] in its own layout,
/// fed with the real acceptance outcomes. In static mode the allocation is
/// computed once from the initial observation.
pub fn run_ground_truth<R: Rng + ?Sized>(
    g: &CommunityGraph,
    initial: &CitizenState,
    policy: &mut dyn Policy,
    cfg: &RolloutConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    if cfg.iterations == 0 {
        return Err(invalid("rollout needs at least one iteration"));
    }
    cfg.params.validate()?;
    let mut view = AgentView::new(policy.variant(), g, &initial.tau);
    let mut warnings = Vec::new();
    let mut state = initial.clone();
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut s = query_policy(policy, &view, cfg.rho, 0, &mut warnings)?;

    for i in 0..cfg.iterations {
        if i > 0 && cfg.mode == EvalMode::Adaptive {
            s = query_policy(policy, &view, cfg.rho, i, &mut warnings)?;
        }
        let outcome = ground_truth_step(g, &state, &s, i, &cfg.params, rng)?;
        view.record(g, &s, &outcome.accepted, &cfg.params);
        state = outcome.state;
        records.push(IterationRecord {
            iter: i,
            s: s.as_slice().to_vec(),
            util: state.util.clone(),
            tau: state.tau.clone(),
            fairness: outcome.fairness,
            accepted: outcome.accepted,
        });
    }
    Ok(Trajectory {
        records,
        initial: initial.clone(),
        final_state: state,
        warnings,
    })
}
