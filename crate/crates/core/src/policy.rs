//! Allocation policies: the trait consumed by rollouts plus a few fixed
//! reference policies used as baselines and oracles.

use rand::Rng;

use crate::ddpg::project_action;
use crate::envs::EnvVariant;
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

pub trait Policy {
    /// Observation layout the policy expects.
    fn variant(&self) -> EnvVariant;

    /// Raw allocation in [0,1]^n for one observation.
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>>;
}

fn nodes_for(variant: EnvVariant, obs: &[f64]) -> Result<usize> {
    variant.nodes_from_obs_len(obs.len()).ok_or(Error::ShapeMismatch {
        expected: variant.obs_len(crate::graph::DEFAULT_NODES),
        got: obs.len(),
    })
}

/// Allocates nothing.
#[derive(Debug, Clone)]
pub struct ZeroPolicy {
    variant: EnvVariant,
}

impl ZeroPolicy {
    pub fn new(variant: EnvVariant) -> Self {
        Self { variant }
    }
}

impl Policy for ZeroPolicy {
    fn variant(&self) -> EnvVariant {
        self.variant
    }

    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; nodes_for(self.variant, obs)?])
    }
}

/// Splits the budget `rho` equally across all citizens.
#[derive(Debug, Clone)]
pub struct EqualSplitPolicy {
    variant: EnvVariant,
    rho: f64,
}

impl EqualSplitPolicy {
    pub fn new(variant: EnvVariant, rho: f64) -> Self {
        Self { variant, rho }
    }
}

impl Policy for EqualSplitPolicy {
    fn variant(&self) -> EnvVariant {
        self.variant
    }

    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        let n = nodes_for(self.variant, obs)?;
        Ok(vec![(self.rho / n as f64).min(1.0); n])
    }
}

/// Always returns the same vector.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    variant: EnvVariant,
    s: Vec<f64>,
}

impl ConstantPolicy {
    pub fn new(variant: EnvVariant, s: Vec<f64>) -> Self {
        Self { variant, s }
    }
}

impl Policy for ConstantPolicy {
    fn variant(&self) -> EnvVariant {
        self.variant
    }

    fn act(&mut self, _obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.s.clone())
    }
}

/// Uniform raw draw on [0,1]^n, projected onto the budget.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    variant: EnvVariant,
    rho: f64,
    rng: SimRng,
}

impl RandomPolicy {
    pub fn new(variant: EnvVariant, rho: f64, seed: u64) -> Self {
        Self {
            variant,
            rho,
            rng: rng_from_seed(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn variant(&self) -> EnvVariant {
        self.variant
    }

    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        let n = nodes_for(self.variant, obs)?;
        let raw: Vec<f64> = (0..n).map(|_| self.rng.random::<f64>()).collect();
        Ok(project_action(&raw, self.rho).into_inner())
    }
}
