use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::objective::{stochastic_nll_with_grad, McDesign};
use super::stability::check_stability;
use super::{FitConfig, FitDiagnostics, FitReport, InitSpec, OmegaMode, Optimizer, MU_FLOOR};
use crate::error::{Error, Result};
use crate::events::train_test_split;
use crate::intensity::{log_likelihood_window_by_type, CompensatorMethod, Sweep};
use crate::model::{EventSequence, HawkesModel, KernelParams, Mode};
use crate::rng::{Prng, PRNG_NAME};

fn initial_params(seq: &EventSequence, config: &FitConfig) -> Result<KernelParams> {
    let m = seq.num_types();
    let omega = match config.omega_mode {
        OmegaMode::Fixed(w) => Some(w),
        OmegaMode::Trained => None,
    };
    match &config.init {
        InitSpec::Params(p) => {
            if p.dim() != m {
                return Err(Error::InvalidArgument(format!(
                    "initial parameters are {}-dimensional, data has {m} types",
                    p.dim()
                )));
            }
            let mut p = KernelParams::new(p.mu.clone(), p.alpha.clone(), p.omega)?;
            if let Some(w) = omega {
                p.omega = w;
            }
            Ok(p)
        }
        InitSpec::Empirical => {
            let horizon = seq.horizon();
            let mu = seq
                .counts()
                .iter()
                .map(|&n| {
                    let rate = n as f64 / horizon;
                    match config.mode {
                        Mode::Linear => rate.max(MU_FLOOR),
                        Mode::Nonlinear => rate,
                    }
                })
                .collect();
            let diag = match config.mode {
                Mode::Linear => 0.1,
                Mode::Nonlinear => 0.0,
            };
            let alpha = (0..m)
                .map(|k| (0..m).map(|j| if j == k { diag } else { 0.0 }).collect())
                .collect();
            let omega = omega.unwrap_or_else(|| {
                let ev = seq.events();
                match (ev.first(), ev.last()) {
                    (Some(a), Some(b)) if ev.len() >= 2 && b.time > a.time => {
                        (ev.len() - 1) as f64 / (b.time - a.time)
                    }
                    _ => 1.0,
                }
            });
            KernelParams::new(mu, alpha, omega)
        }
    }
}

/// Parameter vector layout: `[mu (m), alpha row-major (m*m), ln omega]`.
fn flatten(p: &KernelParams) -> Vec<f64> {
    let mut theta = p.mu.clone();
    theta.extend(p.alpha.iter().flatten());
    theta.push(p.omega.ln());
    theta
}

fn unflatten(theta: &[f64], m: usize) -> KernelParams {
    KernelParams {
        mu: theta[..m].to_vec(),
        alpha: theta[m..m + m * m].chunks(m).map(|c| c.to_vec()).collect(),
        omega: theta[m + m * m].exp(),
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            theta[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Clamps linear-mode coordinates onto `mu >= MU_FLOOR`, `alpha >= 0`.
/// Returns whether any coordinate moved.
fn project_linear(theta: &mut [f64], m: usize) -> bool {
    let mut active = false;
    for v in &mut theta[..m] {
        if *v < MU_FLOOR {
            *v = MU_FLOOR;
            active = true;
        }
    }
    for v in &mut theta[m..m + m * m] {
        if *v < 0.0 {
            *v = 0.0;
            active = true;
        }
    }
    active
}

fn floor_fraction(model: &HawkesModel, seq: &EventSequence) -> Option<f64> {
    let floor = model.link.floor()?;
    if model.mode != Mode::Nonlinear || seq.is_empty() {
        return None;
    }
    let mut sweep = Sweep::new(seq.events(), model.dim(), model.omega(), false);
    let mut at_floor = 0usize;
    for e in seq.events() {
        sweep.advance_before(e.time);
        if sweep.state.raw(model, e.mark) <= floor {
            at_floor += 1;
        }
    }
    Some(at_floor as f64 / seq.len() as f64)
}

/// Fits a Hawkes model by stochastic gradient descent on the Monte-Carlo
/// negative log-likelihood.
///
/// Each epoch draws `mc_samples` uniform times per type, evaluates the
/// stochastic NLL and its exact gradient, and takes one optimizer step on
/// the gradient divided by the horizon (the NLL per unit time, so that the
/// learning rate does not depend on the observation length). Linear fits are
/// projected back onto `mu >= 1e-6`, `alpha >= 0` after every step; a trained
/// `omega` is optimized on the log scale.
pub fn fit_sgd(seq: &EventSequence, config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    if seq.is_empty() {
        return Err(Error::InsufficientData("cannot fit an empty sequence".into()));
    }
    if !(seq.horizon() > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let m = seq.num_types();
    let horizon = seq.horizon();
    let train_omega = config.omega_mode == OmegaMode::Trained;

    let mut theta = flatten(&initial_params(seq, config)?);
    let n_params = theta.len();
    let mut adam = match config.optimizer {
        Optimizer::Adam { beta1, beta2, eps } => Some(Adam {
            beta1,
            beta2,
            eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }),
        Optimizer::Sgd => None,
    };

    let mut rng = Prng::seed_from_u64(config.seed);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut projection_active = false;
    let mut stopped_early = false;
    let mut flat_grad = vec![0.0; n_params];

    for epoch in 0..config.epochs {
        let params = unflatten(&theta, m);
        let design = McDesign::draw(&mut rng, m, horizon, config.mc_samples);
        let (value, grad) = stochastic_nll_with_grad(&params, config.link, seq, &design, true);
        let grad = match grad {
            Some(g) if value.is_finite() => g,
            _ => {
                return Err(Error::NonFinite {
                    epoch,
                    partial_trace: trace,
                })
            }
        };
        trace.push(value);

        let scale = 1.0 / horizon;
        flat_grad[..m].iter_mut().zip(&grad.mu).for_each(|(f, g)| *f = g * scale);
        flat_grad[m..m + m * m]
            .iter_mut()
            .zip(grad.alpha.iter().flatten())
            .for_each(|(f, g)| *f = g * scale);
        flat_grad[m + m * m] = if train_omega {
            params.omega * grad.omega * scale
        } else {
            0.0
        };
        if flat_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                epoch,
                partial_trace: trace,
            });
        }

        let lr = config.schedule.rate(config.learning_rate, epoch, config.epochs);
        match adam.as_mut() {
            Some(adam) => adam.step(&mut theta, &flat_grad, lr),
            None => theta.iter_mut().zip(&flat_grad).for_each(|(t, g)| *t -= lr * g),
        }
        projection_active = config.mode == Mode::Linear && project_linear(&mut theta, m);

        if let Some(p) = config.plateau {
            let n = trace.len();
            if n >= 2 * p.window {
                let last: f64 = trace[n - p.window..].iter().sum::<f64>() / p.window as f64;
                let prev: f64 =
                    trace[n - 2 * p.window..n - p.window].iter().sum::<f64>() / p.window as f64;
                if (prev - last) / prev.abs().max(f64::MIN_POSITIVE) < p.rel_tol {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let model = HawkesModel::new(config.mode, unflatten(&theta, m), config.link)?;
    let stability = check_stability(&model);
    let floor_fraction = floor_fraction(&model, seq);
    let diagnostics = FitDiagnostics {
        num_events: seq.len(),
        insufficient_data: seq.len() < 10 * m * m,
        projection_active,
        floor_fraction,
        floor_saturated: floor_fraction.is_some_and(|f| f > 0.5),
        stopped_early,
    };
    Ok(FitReport {
        model,
        nll_trace: trace,
        spectral_radius: stability.radius,
        stable: stability.stable,
        stability_advisory: stability.advisory,
        config: config.clone(),
        prng_name: PRNG_NAME.to_string(),
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub omega: f64,
    /// Negative log-likelihood of the validation window; `None` when the
    /// fitted model assigns zero intensity to a validation event.
    pub validation_nll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_omega: f64,
    pub scores: Vec<GridScore>,
    pub split_time: f64,
    pub validation_events: usize,
    /// The validation window has no events; scores reduce to compensators.
    pub validation_empty: bool,
}

/// Chooses `omega` from `grid` by fitting on the chronological training
/// prefix and scoring the held-out suffix (the last `validation_fraction` of
/// the horizon), conditioning on the full history. Ties go to the smallest
/// `omega`.
pub fn grid_search_omega(
    seq: &EventSequence,
    omega_grid: &[f64],
    config: &FitConfig,
    validation_fraction: f64,
) -> Result<GridSearchResult> {
    if omega_grid.is_empty() {
        return Err(Error::InvalidArgument("omega grid is empty".into()));
    }
    if let Some(w) = omega_grid.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidArgument(format!("grid omega must be positive, got {w}")));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    let split = train_test_split(seq, 1.0 - validation_fraction)?;
    let method = match config.mode {
        Mode::Linear => CompensatorMethod::ClosedForm,
        Mode::Nonlinear => CompensatorMethod::Quadrature,
    };

    let mut scores = Vec::with_capacity(omega_grid.len());
    for &omega in omega_grid {
        let arm = FitConfig {
            omega_mode: OmegaMode::Fixed(omega),
            ..config.clone()
        };
        let report = fit_sgd(&split.train, &arm)?;
        let validation_nll = match log_likelihood_window_by_type(
            &report.model,
            seq,
            split.split_time,
            seq.horizon(),
            method,
            None,
        ) {
            Ok(ll) => Some(-ll.iter().sum::<f64>()),
            Err(Error::ZeroIntensity { .. }) => None,
            Err(e) => return Err(e),
        };
        scores.push(GridScore {
            omega,
            validation_nll,
        });
    }

    let best = scores
        .iter()
        .filter_map(|s| s.validation_nll.map(|v| (s.omega, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .map(|(w, _)| w)
        .ok_or_else(|| Error::Degenerate("no grid value gives a finite validation score".into()))?;

    Ok(GridSearchResult {
        best_omega: best,
        scores,
        split_time: split.split_time,
        validation_events: split.test.len(),
        validation_empty: split.test.is_empty(),
    })
}
