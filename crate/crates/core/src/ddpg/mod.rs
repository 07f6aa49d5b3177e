//! Deterministic policy-gradient learner.
//!
//! Small dense actor and critic networks, a replay buffer, Polyak-averaged
//! target networks, Gaussian exploration, and the projection that keeps every
//! allocation within the budget.

mod agent;
pub mod gradcheck;
pub mod nn;
pub mod replay;

pub use agent::{evaluate_in_env, train, Agent, DdpgConfig, PolicyHandle, PolicyHeader, TrainingLog};
pub use gradcheck::{backprop_check, LossProbe, QuadraticProbe};
pub use nn::{Adam, DenseNet, OutputActivation};
pub use replay::{Batch, ReplayBuffer, Transition};

use crate::error::Result;
use crate::trust::ServiceVector;

/// Scales `raw` down onto the budget when its total exceeds `rho`.
pub fn project_action(raw: &[f64], rho: f64) -> ServiceVector {
    let mut s = raw.to_vec();
    project_in_place(&mut s, rho);
    ServiceVector::new_unchecked(s)
}

pub(crate) fn project_in_place(s: &mut [f64], rho: f64) {
    let total: f64 = s.iter().sum();
    if total > rho {
        let k = rho / total;
        s.iter_mut().for_each(|x| *x *= k);
    }
}

/// Vector-Jacobian product of [`project_action`] at `raw`.
pub(crate) fn project_vjp(raw: &[f64], grad: &mut [f64], rho: f64) {
    let total: f64 = raw.iter().sum();
    if total <= rho {
        return;
    }
    let dot: f64 = raw.iter().zip(grad.iter()).map(|(r, g)| r * g).sum::<f64>() / total;
    let k = rho / total;
    grad.iter_mut().for_each(|g| *g = k * (*g - dot));
}

/// Polyak update of `target` toward `online`.
pub fn soft_update(target: &mut DenseNet, online: &DenseNet, rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(crate::error::invalid(format!("soft-update rate must lie in (0,1], got {rate}")));
    }
    target.soft_update_from(online, rate)
}
