//! Parameter estimation: Monte-Carlo stochastic-gradient maximum likelihood,
//! grid search over the decay, a Poisson moment baseline, and the
//! stationarity diagnosis of fitted impact matrices.

mod objective;
mod poisson;
mod sgd;
mod stability;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HawkesModel, KernelParams, LinkSpec, Mode};

pub use objective::{stochastic_nll, stochastic_nll_with_grad, Gradient, McDesign};
pub use poisson::poisson_moment_estimate;
pub use sgd::{fit_sgd, grid_search_omega, GridScore, GridSearchResult};
pub use stability::{check_stability, spectral_radius, Stability};

/// Lower clamp for baseline intensities of linear models.
pub const MU_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OmegaMode {
    Fixed(f64),
    Trained,
}

/// Starting point of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitSpec {
    /// `mu_k = n_k / T`; `alpha = 0.1 I` (linear) or `0` (nonlinear);
    /// trained `omega` starts at one over the mean inter-event gap.
    Empirical,
    Params(KernelParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Optimizer {
    /// `theta -= lr * grad`.
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from `lr` to `lr * final_factor` over the epoch budget.
    Cosine { final_factor: f64 },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine { final_factor } => {
                let progress = if epochs > 1 {
                    epoch as f64 / (epochs - 1) as f64
                } else {
                    1.0
                };
                let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                base * (final_factor + (1.0 - final_factor) * cos)
            }
        }
    }
}

/// Stop when the mean NLL of the last `window` epochs improves on the
/// preceding `window` by less than `rel_tol` (relative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub window: usize,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Monte-Carlo samples per event type per epoch.
    pub mc_samples: usize,
    pub seed: u64,
    pub omega_mode: OmegaMode,
    pub mode: Mode,
    pub link: LinkSpec,
    pub init: InitSpec,
    pub optimizer: Optimizer,
    pub schedule: LrSchedule,
    /// Off by default: the epoch budget is fixed.
    pub plateau: Option<Plateau>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 500,
            mc_samples: 1000,
            seed: 0,
            omega_mode: OmegaMode::Fixed(0.1),
            mode: Mode::Linear,
            link: LinkSpec::Identity,
            init: InitSpec::Empirical,
            optimizer: Optimizer::Sgd,
            schedule: LrSchedule::Constant,
            plateau: None,
        }
    }
}

impl FitConfig {
    pub fn nonlinear(link: LinkSpec) -> Self {
        Self {
            mode: Mode::Nonlinear,
            link,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidArgument("mc_samples must be >= 1".into()));
        }
        if let OmegaMode::Fixed(w) = self.omega_mode {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!("fixed omega must be positive, got {w}")));
            }
        }
        match (self.mode, self.link) {
            (Mode::Linear, LinkSpec::Identity) => {}
            (Mode::Linear, _) => {
                return Err(Error::InvalidArgument("LINEAR mode uses the IDENTITY link".into()))
            }
            (Mode::Nonlinear, LinkSpec::Identity) => {
                return Err(Error::InvalidArgument(
                    "NONLINEAR mode needs a non-identity link".into(),
                ))
            }
            _ => {}
        }
        if let LrSchedule::Cosine { final_factor } = self.schedule {
            if !(0.0..=1.0).contains(&final_factor) {
                return Err(Error::InvalidArgument("cosine final_factor must lie in [0, 1]".into()));
            }
        }
        if let Some(p) = self.plateau {
            if p.window == 0 {
                return Err(Error::InvalidArgument("plateau window must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub num_events: usize,
    /// Fewer than `10 m^2` events.
    pub insufficient_data: bool,
    /// Linear mode: the feasibility projection clamped a coordinate on the
    /// final step.
    pub projection_active: bool,
    /// Share of event-time raw intensities at or below the link floor.
    pub floor_fraction: Option<f64>,
    /// More than half of event-time intensities sit at the floor.
    pub floor_saturated: bool,
    pub stopped_early: bool,
}

/// Fitted model plus the optimization record. Serializes as the model's JSON
/// object extended with the remaining fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub model: HawkesModel,
    /// Stochastic NLL per epoch, evaluated before that epoch's step.
    pub nll_trace: Vec<f64>,
    pub spectral_radius: f64,
    pub stable: bool,
    pub stability_advisory: bool,
    pub config: FitConfig,
    pub prng_name: String,
    pub diagnostics: FitDiagnostics,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule::Cosine { final_factor: 0.01 };
        assert_eq!(s.rate(1.0, 0, 100), 1.0);
        assert!((s.rate(1.0, 99, 100) - 0.01).abs() < 1e-15);
        assert_eq!(LrSchedule::Constant.rate(0.3, 50, 100), 0.3);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        assert!(FitConfig { learning_rate: 0.0, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig { mc_samples: 0, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig { link: LinkSpec::Softplus, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig::nonlinear(LinkSpec::Identity).validate().is_err());
        assert!(FitConfig::nonlinear(LinkSpec::floored()).validate().is_ok());
        assert!(FitConfig { omega_mode: OmegaMode::Fixed(-1.0), ..FitConfig::default() }.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = FitConfig {
            optimizer: Optimizer::adam(),
            schedule: LrSchedule::Cosine { final_factor: 0.05 },
            omega_mode: OmegaMode::Trained,
            ..FitConfig::nonlinear(LinkSpec::Softplus)
        };
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<FitConfig>(&s).unwrap(), cfg);
    }
}
