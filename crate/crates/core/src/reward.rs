//! Organization utility and the service-quota penalty.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrgConfig {
    /// Willingness to degrade service quality to save resources.
    pub c: f64,
    /// Resource budget.
    pub rho: f64,
    /// Utility level at which a citizen counts as served.
    pub gamma_svc: f64,
    pub quota_enabled: bool,
    pub quota_fraction: f64,
}

impl Default for OrgConfig {
    fn default() -> Self {
        Self {
            c: 0.5,
            rho: 1.0,
            gamma_svc: 0.05,
            quota_enabled: false,
            quota_fraction: 0.5,
        }
    }
}

impl OrgConfig {
    pub fn with_c(c: f64) -> Self {
        Self {
            c,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(invalid(format!("c must lie in [0,1], got {}", self.c)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.gamma_svc > 0.0 && self.gamma_svc <= 1.0) {
            return Err(invalid(format!("gamma_svc must lie in (0,1], got {}", self.gamma_svc)));
        }
        if !(0.0..=1.0).contains(&self.quota_fraction) {
            return Err(invalid(format!(
                "quota_fraction must lie in [0,1], got {}",
                self.quota_fraction
            )));
        }
        Ok(())
    }
}

/// Number of citizens whose utility reaches `gamma_svc` (inclusive).
pub fn count_above_threshold(util: &[f64], gamma_svc: f64) -> usize {
    util.iter().filter(|&&u| u >= gamma_svc).count()
}

/// `(1−c)·(Σu/2n + |u|_γ/2n) + c·(ρ − Σs)`.
pub fn org_utility(util: &[f64], s: &[f64], cfg: &OrgConfig) -> f64 {
    let n = util.len() as f64;
    if util.is_empty() {
        return cfg.c * (cfg.rho - s.iter().sum::<f64>());
    }
    let quality = util.iter().sum::<f64>() / (2.0 * n);
    let reach = count_above_threshold(util, cfg.gamma_svc) as f64 / (2.0 * n);
    let saved = cfg.rho - s.iter().sum::<f64>();
    (1.0 - cfg.c) * (quality + reach) + cfg.c * saved
}

/// Subtracts `½·(1 − |u|_γ/n)` when fewer than `quota_fraction·n` citizens are served.
pub fn apply_quota(u: f64, util: &[f64], cfg: &OrgConfig) -> f64 {
    let n = util.len() as f64;
    let served = count_above_threshold(util, cfg.gamma_svc) as f64;
    if served < cfg.quota_fraction * n {
        u - 0.5 * (1.0 - served / n)
    } else {
        u
    }
}

/// Reward as seen by the organization, with the quota applied when enabled.
pub fn realized_utility(util: &[f64], s: &[f64], cfg: &OrgConfig) -> f64 {
    let u = org_utility(util, s, cfg);
    if cfg.quota_enabled {
        apply_quota(u, util, cfg)
    } else {
        u
    }
}
