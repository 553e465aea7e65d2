//! Conditional intensities, compensators and log-likelihoods for
//! exponential-kernel Hawkes models.
//!
//! Everything here runs on the exponential-kernel recursion: for each source
//! type `j` we carry
//!
//! ```text
//! S_j(t) = sum_{t_i < t, d_i = j} exp(-omega (t - t_i))
//! ```
//!
//! which decays by `exp(-omega * dt)` between events and jumps by one at a
//! type-`j` event. The raw intensity of type `k` is then
//! `mu_k + omega * sum_j alpha[k][j] * S_j(t)`, passed through the link.
//! A sweep over `n` events costs `O(n * m)`.
//!
//! Intensities are left limits: an event at `t` does not contribute to
//! `lambda(t)` itself.

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EventSequence, HawkesModel, KernelParams, MarkedEvent};
use crate::rng::Prng;

/// Default absolute tolerance per panel for adaptive Simpson quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;
const QUADRATURE_MAX_DEPTH: u32 = 48;

/// Running excitation sums, plus the `omega`-derivative helper
/// `D_j(t) = sum (t - t_i) exp(-omega (t - t_i))` when requested.
#[derive(Debug, Clone)]
pub(crate) struct ExcitationState {
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    pub now: f64,
    omega: f64,
    track_d: bool,
}

impl ExcitationState {
    pub fn new(m: usize, omega: f64, track_d: bool) -> Self {
        Self {
            s: vec![0.0; m],
            d: vec![0.0; if track_d { m } else { 0 }],
            now: 0.0,
            omega,
            track_d,
        }
    }

    /// Decay the state forward to `t >= now`.
    #[inline]
    pub fn decay_to(&mut self, t: f64) {
        let dt = t - self.now;
        if dt > 0.0 {
            let f = (-self.omega * dt).exp();
            if self.track_d {
                for (d, s) in self.d.iter_mut().zip(&self.s) {
                    *d = f * (*d + dt * *s);
                }
            }
            for s in &mut self.s {
                *s *= f;
            }
            self.now = t;
        }
    }

    #[inline]
    pub fn add_event(&mut self, mark: usize) {
        self.s[mark] += 1.0;
    }

    /// `mu_k + omega * sum_j alpha[k][j] * S_j`.
    #[inline]
    pub fn raw(&self, model: &HawkesModel, k: usize) -> f64 {
        self.raw_params(&model.params, k)
    }

    #[inline]
    pub fn raw_params(&self, params: &KernelParams, k: usize) -> f64 {
        let excite: f64 = params.alpha[k].iter().zip(&self.s).map(|(a, s)| a * s).sum();
        params.mu[k] + params.omega * excite
    }
}

/// Walks an event list forward, keeping the excitation state in sync with
/// non-decreasing query times.
pub(crate) struct Sweep<'a> {
    events: &'a [MarkedEvent],
    next: usize,
    pub state: ExcitationState,
}

impl<'a> Sweep<'a> {
    pub fn new(events: &'a [MarkedEvent], m: usize, omega: f64, track_d: bool) -> Self {
        Self {
            events,
            next: 0,
            state: ExcitationState::new(m, omega, track_d),
        }
    }

    /// Left limit at `t`: absorbs events strictly before `t`.
    pub fn advance_before(&mut self, t: f64) {
        while self.next < self.events.len() && self.events[self.next].time < t {
            let e = self.events[self.next];
            self.state.decay_to(e.time);
            self.state.add_event(e.mark);
            self.next += 1;
        }
        self.state.decay_to(t);
    }

    /// Right limit at `t`: absorbs events at or before `t`.
    pub fn advance_through(&mut self, t: f64) {
        self.advance_before(t);
        while self.next < self.events.len() && self.events[self.next].time <= t {
            self.state.add_event(self.events[self.next].mark);
            self.next += 1;
        }
    }
}

fn check_type(model: &HawkesModel, seq: &EventSequence, k: usize) -> Result<()> {
    let m = model.dim();
    if seq.num_types() != m {
        return Err(Error::InvalidArgument(format!(
            "sequence has {} types but model has {m}",
            seq.num_types()
        )));
    }
    if k >= m {
        return Err(Error::TypeOutOfRange { k, m });
    }
    Ok(())
}

fn check_dims(model: &HawkesModel, seq: &EventSequence) -> Result<()> {
    check_type(model, seq, 0)
}

fn check_time(seq: &EventSequence, t: f64) -> Result<()> {
    if !(t >= 0.0 && t <= seq.horizon()) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: seq.horizon(),
        });
    }
    Ok(())
}

/// Conditional intensity of type `k` at `t`, summing over past events
/// directly.
pub fn intensity_at(model: &HawkesModel, seq: &EventSequence, k: usize, t: f64) -> Result<f64> {
    check_type(model, seq, k)?;
    check_time(seq, t)?;
    let omega = model.omega();
    let row = &model.alpha()[k];
    let excite: f64 = seq
        .events()
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| row[e.mark] * omega * (-omega * (t - e.time)).exp())
        .sum();
    Ok(model.link.apply(model.mu()[k] + excite))
}

/// Intensities of all types sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityPath {
    pub grid: Vec<f64>,
    /// `values[k][i]` is the type-`k` intensity at `grid[i]`.
    pub values: Vec<Vec<f64>>,
}

impl IntensityPath {
    /// CSV with header `t,lambda_0,...,lambda_{m-1}`.
    pub fn to_csv(&self) -> String {
        let m = self.values.len();
        let mut out = String::from("t");
        for k in 0..m {
            out.push_str(&format!(",lambda_{k}"));
        }
        out.push('\n');
        for (i, t) in self.grid.iter().enumerate() {
            out.push_str(&format!("{t}"));
            for row in &self.values {
                out.push_str(&format!(",{}", row[i]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn intensity_path(model: &HawkesModel, seq: &EventSequence, grid: &[f64]) -> Result<IntensityPath> {
    check_dims(model, seq)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty intensity grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    for &t in grid {
        check_time(seq, t)?;
    }
    let m = model.dim();
    let mut values = vec![Vec::with_capacity(grid.len()); m];
    let mut sweep = Sweep::new(seq.events(), m, model.omega(), false);
    for &t in grid {
        sweep.advance_before(t);
        for (k, row) in values.iter_mut().enumerate() {
            row.push(model.link.apply(sweep.state.raw(model, k)));
        }
    }
    Ok(IntensityPath {
        grid: grid.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CompensatorMethod {
    ClosedForm,
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensatorEstimate {
    pub value: f64,
    /// Zero for the exact methods.
    pub std_error: f64,
    pub method: CompensatorMethod,
}

/// Sample count and base seed for Monte-Carlo compensators. Type `k` uses
/// seed `seed + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn seed_for_type(&self, k: usize) -> u64 {
        self.seed.wrapping_add(k as u64)
    }
}

/// `Lambda_k(T) = mu_k T + sum_{t_i < T} alpha[k][d_i] (1 - exp(-omega (T - t_i)))`.
pub fn compensator_closed_form(
    model: &HawkesModel,
    seq: &EventSequence,
    k: usize,
    t_end: f64,
) -> Result<CompensatorEstimate> {
    if !model.is_linear() {
        return Err(Error::ModeMismatch { required: "LINEAR" });
    }
    check_type(model, seq, k)?;
    check_time(seq, t_end)?;
    let omega = model.omega();
    let row = &model.alpha()[k];
    let excite: f64 = seq
        .events()
        .iter()
        .take_while(|e| e.time < t_end)
        .map(|e| row[e.mark] * -(-omega * (t_end - e.time)).exp_m1())
        .sum();
    Ok(CompensatorEstimate {
        value: model.mu()[k] * t_end + excite,
        std_error: 0.0,
        method: CompensatorMethod::ClosedForm,
    })
}

/// Draws `n` uniform times on the open interval `(start, end)`, sorted.
pub(crate) fn uniform_times(rng: &mut Prng, start: f64, end: f64, n: usize) -> Vec<f64> {
    let width = end - start;
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = Open01.sample(rng);
            start + u * width
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Unbiased estimate `T * mean(lambda_k(s_i))` with `s_i ~ U(0, T)`.
pub fn compensator_monte_carlo(
    model: &HawkesModel,
    seq: &EventSequence,
    k: usize,
    t_end: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CompensatorEstimate> {
    check_type(model, seq, k)?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Monte-Carlo compensator needs T > 0, got {t_end}"
        )));
    }
    check_time(seq, t_end)?;
    mc_window(model, seq, k, 0.0, t_end, n_samples, seed)
}

fn mc_window(
    model: &HawkesModel,
    seq: &EventSequence,
    k: usize,
    start: f64,
    end: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CompensatorEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let mut rng = Prng::seed_from_u64(seed);
    let samples = uniform_times(&mut rng, start, end, n_samples);
    let mut sweep = Sweep::new(seq.events(), model.dim(), model.omega(), false);
    // Welford: exact for a constant integrand.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (i, &s) in samples.iter().enumerate() {
        sweep.advance_before(s);
        let x = model.link.apply(sweep.state.raw(model, k));
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let width = end - start;
    let std_error = if n_samples > 1 {
        width * (m2 / (n_samples - 1) as f64).sqrt() / (n_samples as f64).sqrt()
    } else {
        0.0
    };
    Ok(CompensatorEstimate {
        value: width * mean,
        std_error,
        method: CompensatorMethod::MonteCarlo,
    })
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    (mid, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    mid: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, mid, fm);
    let (rm, frm, right) = simpson(f, mid, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson_rec(f, a, fa, mid, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson_rec(f, mid, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson integral of `f` over `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (mid, fm, whole) = simpson(&f, a, fa, b, fb);
    adaptive_simpson_rec(&f, a, fa, b, fb, mid, fm, whole, tol, QUADRATURE_MAX_DEPTH)
}

/// Integral of `g(mu_k + c * exp(-omega (t - a)))` over `[a, b]`, where `c`
/// is the panel-start excitation.
fn panel_integral(
    model: &HawkesModel,
    mu_k: f64,
    c: f64,
    a: f64,
    b: f64,
    exact: bool,
    tol: f64,
) -> f64 {
    let omega = model.omega();
    if exact {
        return mu_k * (b - a) - c / omega * (-omega * (b - a)).exp_m1();
    }
    let link = model.link;
    adaptive_simpson(|t| link.apply(mu_k + c * (-omega * (t - a)).exp()), a, b, tol)
}

/// Compensator of type `k` at each of the sorted `times`, integrated panel by
/// panel between event times. `exact` uses the closed-form panel integral
/// (identity link only); otherwise adaptive Simpson with `tol` per panel.
pub(crate) fn compensator_path(
    model: &HawkesModel,
    seq: &EventSequence,
    k: usize,
    times: &[f64],
    exact: bool,
    tol: f64,
) -> Vec<f64> {
    let events = seq.events();
    let mut sweep = Sweep::new(events, model.dim(), model.omega(), false);
    let mu_k = model.mu()[k];
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut pos = 0.0;
    let mut ev = 0;
    for &target in times {
        // Panels end at every event strictly inside (pos, target).
        while ev < events.len() && events[ev].time < target {
            let te = events[ev].time;
            if te > pos {
                sweep.advance_through(pos);
                let c = sweep.state.raw(model, k) - mu_k;
                acc += panel_integral(model, mu_k, c, pos, te, exact, tol);
                pos = te;
            }
            ev += 1;
        }
        if target > pos {
            sweep.advance_through(pos);
            let c = sweep.state.raw(model, k) - mu_k;
            acc += panel_integral(model, mu_k, c, pos, target, exact, tol);
            pos = target;
        }
        out.push(acc);
    }
    out
}

/// Compensator by jump-aware adaptive Simpson quadrature.
pub fn compensator_quadrature(
    model: &HawkesModel,
    seq: &EventSequence,
    k: usize,
    t_end: f64,
    tol: f64,
) -> Result<CompensatorEstimate> {
    check_type(model, seq, k)?;
    check_time(seq, t_end)?;
    let value = compensator_path(model, seq, k, &[t_end], false, tol)[0];
    Ok(CompensatorEstimate {
        value,
        std_error: 0.0,
        method: CompensatorMethod::Quadrature,
    })
}

/// Per-type log-likelihood contributions over the window `[start, end]`,
/// conditioning on all events before `start`.
///
/// Type `k` contributes `sum_{t_i in window, d_i = k} log lambda_k(t_i)
/// - (Lambda_k(end) - Lambda_k(start))`. Events at `end` count only when
/// `end` is the horizon.
pub fn log_likelihood_window_by_type(
    model: &HawkesModel,
    seq: &EventSequence,
    start: f64,
    end: f64,
    method: CompensatorMethod,
    mc: Option<McConfig>,
) -> Result<Vec<f64>> {
    check_dims(model, seq)?;
    check_time(seq, start)?;
    check_time(seq, end)?;
    if end < start {
        return Err(Error::InvalidArgument(format!(
            "window end {end} before start {start}"
        )));
    }
    if method == CompensatorMethod::ClosedForm && !model.is_linear() {
        return Err(Error::ModeMismatch { required: "LINEAR" });
    }
    let m = model.dim();
    let include_end = end >= seq.horizon();
    let mut ll = vec![0.0; m];

    let mut sweep = Sweep::new(seq.events(), m, model.omega(), false);
    for (index, e) in seq.events().iter().enumerate() {
        if e.time < start {
            continue;
        }
        if e.time > end || (e.time == end && !include_end) {
            break;
        }
        sweep.advance_before(e.time);
        let lam = model.link.apply(sweep.state.raw(model, e.mark));
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(Error::ZeroIntensity {
                index,
                time: e.time,
                mark: e.mark,
                value: lam,
            });
        }
        ll[e.mark] += lam.ln();
    }

    for (k, llk) in ll.iter_mut().enumerate() {
        let comp = match method {
            CompensatorMethod::ClosedForm => {
                let path = compensator_path(model, seq, k, &[start, end], true, 0.0);
                path[1] - path[0]
            }
            CompensatorMethod::Quadrature => {
                let path = compensator_path(model, seq, k, &[start, end], false, QUADRATURE_TOL);
                path[1] - path[0]
            }
            CompensatorMethod::MonteCarlo => {
                if end > start {
                    let mc = mc.ok_or_else(|| {
                        Error::InvalidArgument("MONTE_CARLO needs (n_samples, seed)".into())
                    })?;
                    mc_window(model, seq, k, start, end, mc.n_samples, mc.seed_for_type(k))?.value
                } else {
                    0.0
                }
            }
        };
        *llk -= comp;
    }
    Ok(ll)
}

/// Per-type log-likelihood over the whole observation window.
pub fn log_likelihood_by_type(
    model: &HawkesModel,
    seq: &EventSequence,
    method: CompensatorMethod,
    mc: Option<McConfig>,
) -> Result<Vec<f64>> {
    log_likelihood_window_by_type(model, seq, 0.0, seq.horizon(), method, mc)
}

/// `sum_i log lambda_{d_i}(t_i) - sum_j Lambda_j(T)`.
pub fn log_likelihood(
    model: &HawkesModel,
    seq: &EventSequence,
    method: CompensatorMethod,
    mc: Option<McConfig>,
) -> Result<f64> {
    Ok(log_likelihood_by_type(model, seq, method, mc)?.iter().sum())
}
