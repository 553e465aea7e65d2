//! The stochastic negative log-likelihood minimized by [`super::fit_sgd`]
//! and its exact gradient.
//!
//! For fixed Monte-Carlo sample times `s_{k,1..N}` drawn on `(0, T)`:
//!
//! ```text
//! NLL = - sum_i log g(x_{d_i}(t_i)) + sum_k (T / N) sum_n g(x_k(s_{k,n}))
//! x_k(t) = mu_k + omega * sum_j alpha[k][j] * S_j(t)
//! ```
//!
//! With `D_j(t) = sum (t - t_i) exp(-omega (t - t_i))` the partials are
//! `dx_k/dmu_k = 1`, `dx_k/dalpha_kj = omega S_j` and
//! `dx_k/domega = sum_j alpha_kj (S_j - omega D_j)`.

use rand::SeedableRng;

use crate::intensity::{uniform_times, Sweep};
use crate::model::{EventSequence, KernelParams, LinkSpec};
use crate::rng::Prng;

/// Gradient of the stochastic NLL with respect to `mu`, `alpha` and `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub omega: f64,
}

impl Gradient {
    fn zeros(m: usize) -> Self {
        Self {
            mu: vec![0.0; m],
            alpha: vec![vec![0.0; m]; m],
            omega: 0.0,
        }
    }
}

/// Monte-Carlo integration points, one sorted list per event type.
#[derive(Debug, Clone, PartialEq)]
pub struct McDesign {
    pub horizon: f64,
    pub samples: Vec<Vec<f64>>,
}

impl McDesign {
    pub fn draw(rng: &mut Prng, num_types: usize, horizon: f64, n: usize) -> Self {
        let samples = (0..num_types)
            .map(|_| uniform_times(rng, 0.0, horizon, n))
            .collect();
        Self { horizon, samples }
    }

    pub fn from_seed(seed: u64, num_types: usize, horizon: f64, n: usize) -> Self {
        let mut rng = Prng::seed_from_u64(seed);
        Self::draw(&mut rng, num_types, horizon, n)
    }

    /// All samples merged by time, tagged with their type.
    fn merged(&self) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .samples
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.iter().map(move |&t| (t, k)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }
}

fn accumulate(
    grad: &mut Gradient,
    params: &KernelParams,
    s: &[f64],
    d: &[f64],
    k: usize,
    w: f64,
) {
    let omega = params.omega;
    grad.mu[k] += w;
    for (j, g) in grad.alpha[k].iter_mut().enumerate() {
        *g += w * omega * s[j];
    }
    let dx: f64 = params.alpha[k]
        .iter()
        .enumerate()
        .map(|(j, a)| a * (s[j] - omega * d[j]))
        .sum();
    grad.omega += w * dx;
}

/// Stochastic NLL and, if `want_grad`, its gradient. A non-positive
/// intensity at an event makes the value `+inf`.
pub fn stochastic_nll_with_grad(
    params: &KernelParams,
    link: LinkSpec,
    seq: &EventSequence,
    design: &McDesign,
    want_grad: bool,
) -> (f64, Option<Gradient>) {
    let m = params.dim();
    let mut grad = Gradient::zeros(m);
    let mut value = 0.0;

    let mut sweep = Sweep::new(seq.events(), m, params.omega, want_grad);
    for e in seq.events() {
        sweep.advance_before(e.time);
        let x = sweep.state.raw_params(params, e.mark);
        let lam = link.apply(x);
        if !(lam > 0.0) {
            return (f64::INFINITY, None);
        }
        value -= lam.ln();
        if want_grad {
            let w = -link.derivative(x) / lam;
            accumulate(&mut grad, params, &sweep.state.s, &sweep.state.d, e.mark, w);
        }
    }

    let mut sweep = Sweep::new(seq.events(), m, params.omega, want_grad);
    for (t, k) in design.merged() {
        sweep.advance_before(t);
        let scale = design.horizon / design.samples[k].len() as f64;
        let x = sweep.state.raw_params(params, k);
        value += scale * link.apply(x);
        if want_grad {
            let w = scale * link.derivative(x);
            accumulate(&mut grad, params, &sweep.state.s, &sweep.state.d, k, w);
        }
    }

    (value, want_grad.then_some(grad))
}

pub fn stochastic_nll(
    params: &KernelParams,
    link: LinkSpec,
    seq: &EventSequence,
    design: &McDesign,
) -> f64 {
    stochastic_nll_with_grad(params, link, seq, design, false).0
}
