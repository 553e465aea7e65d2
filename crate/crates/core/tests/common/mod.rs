//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use contagion::model::{EventSequence, HawkesModel, KernelParams, MarkedEvent};
use contagion::rng::Prng;
use rand::{Rng, SeedableRng};

/// Intensity by direct summation over all earlier events.
pub fn naive_intensity(model: &HawkesModel, seq: &EventSequence, k: usize, t: f64) -> f64 {
    let omega = model.omega();
    let raw = model.mu()[k]
        + seq
            .events()
            .iter()
            .filter(|e| e.time < t)
            .map(|e| model.alpha()[k][e.mark] * omega * (-omega * (t - e.time)).exp())
            .sum::<f64>();
    model.link.apply(raw)
}

/// O(n^2) linear log-likelihood with the term-wise closed-form compensator.
pub fn naive_linear_log_likelihood(model: &HawkesModel, seq: &EventSequence) -> f64 {
    let t_end = seq.horizon();
    let omega = model.omega();
    let mut ll = 0.0;
    for e in seq.events() {
        ll += naive_intensity(model, seq, e.mark, e.time).ln();
    }
    for k in 0..model.dim() {
        ll -= model.mu()[k] * t_end;
        for e in seq.events() {
            ll -= model.alpha()[k][e.mark] * (1.0 - (-omega * (t_end - e.time)).exp());
        }
    }
    ll
}

/// Largest eigenvalue modulus of a 2x2 matrix from its characteristic
/// polynomial `x^2 - tr x + det`.
pub fn char_poly_radius_2x2(a: &[Vec<f64>]) -> f64 {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
    } else {
        det.sqrt()
    }
}

/// Random stable non-negative matrix scaled to row sums below `max_row`.
pub fn random_stable_alpha(rng: &mut Prng, m: usize, max_row: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            let row: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let sum: f64 = row.iter().sum();
            let target = rng.gen_range(0.05..max_row);
            row.iter().map(|v| v / sum * target).collect()
        })
        .collect()
}

pub fn random_params(rng: &mut Prng, m: usize, signed: bool) -> KernelParams {
    let mu = (0..m)
        .map(|_| {
            if signed {
                rng.gen_range(-0.3..0.8)
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    let alpha = if signed {
        (0..m)
            .map(|_| (0..m).map(|_| rng.gen_range(-0.6..0.6)).collect())
            .collect()
    } else {
        random_stable_alpha(rng, m, 0.9)
    };
    KernelParams::new(mu, alpha, rng.gen_range(0.2..3.0)).expect("valid params")
}

/// `n` distinct uniform event times with random marks on `(0, horizon)`.
pub fn random_sequence(rng: &mut Prng, m: usize, n: usize, horizon: f64) -> EventSequence {
    let events = (0..n)
        .map(|_| MarkedEvent::new(rng.gen_range(0.0..horizon), rng.gen_range(0..m)))
        .collect();
    EventSequence::new(events, horizon, m).expect("valid sequence")
}

pub fn rng(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
