//! Synthetic event sequences: Ogata thinning for Hawkes models, a
//! bar-discretized variant for daily data, and independent exponential gaps
//! for homogeneous Poisson streams.

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::estimate::spectral_radius;
use crate::intensity::ExcitationState;
use crate::model::{EventSequence, HawkesModel, MarkedEvent, Mode};
use crate::rng::Prng;

/// Hard cap on simulated events; exceeding it means the model explodes on
/// the requested horizon.
pub const MAX_SIMULATED_EVENTS: usize = 20_000_000;

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be finite and non-negative, got {horizon}"
        )));
    }
    Ok(())
}

fn exp1(rng: &mut Prng) -> f64 {
    let u: f64 = Open01.sample(rng);
    -u.ln()
}

/// Upper bound on the total intensity from the current state until the next
/// event.
///
/// Linear: intensities only decay between events, so the current total
/// dominates. Nonlinear: negative excitation can wear off and let the
/// intensity rise, so only the positive-part contributions are kept; those
/// decay, and every link is non-decreasing.
fn dominating_rate(model: &HawkesModel, state: &ExcitationState) -> f64 {
    let omega = model.omega();
    (0..model.dim())
        .map(|k| match model.mode {
            Mode::Linear => state.raw(model, k),
            Mode::Nonlinear => {
                let positive: f64 = model.alpha()[k]
                    .iter()
                    .zip(&state.s)
                    .map(|(a, s)| a.max(0.0) * s)
                    .sum();
                model.link.apply(model.mu()[k] + omega * positive)
            }
        })
        .sum()
}

/// Simulates `model` on `[0, horizon]` by Ogata's thinning.
///
/// Deterministic for a given seed. Linear models with spectral radius
/// `>= 1` are rejected before any sampling.
pub fn simulate_ogata(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventSequence> {
    check_horizon(horizon)?;
    if model.is_linear() {
        let radius = spectral_radius(model.alpha())?;
        if radius >= 1.0 {
            return Err(Error::Unstable { radius });
        }
    }
    let m = model.dim();
    let mut rng = Prng::seed_from_u64(seed);
    let mut state = ExcitationState::new(m, model.omega(), false);
    let mut events = Vec::new();
    let mut lambdas = vec![0.0; m];
    let mut t = 0.0;
    loop {
        let bound = dominating_rate(model, &state);
        if !(bound > 0.0) {
            break;
        }
        t += exp1(&mut rng) / bound;
        if t > horizon {
            break;
        }
        state.decay_to(t);
        let mut total = 0.0;
        for (k, lam) in lambdas.iter_mut().enumerate() {
            *lam = model.link.apply(state.raw(model, k));
            total += *lam;
        }
        debug_assert!(
            total <= bound * (1.0 + 1e-9),
            "dominating rate {bound} below total intensity {total}"
        );
        let u: f64 = Open01.sample(&mut rng);
        if u * bound > total {
            continue;
        }
        let target = u * bound;
        let mut acc = 0.0;
        let mut mark = m - 1;
        for (k, lam) in lambdas.iter().enumerate() {
            acc += lam;
            if target <= acc {
                mark = k;
                break;
            }
        }
        events.push(MarkedEvent::new(t, mark));
        if events.len() > MAX_SIMULATED_EVENTS {
            return Err(Error::Explosive {
                limit: MAX_SIMULATED_EVENTS,
            });
        }
        state.add_event(mark);
    }
    EventSequence::new(events, horizon, m)
}

/// Independent homogeneous Poisson streams, one per rate, merged.
pub fn simulate_poisson(rates: &[f64], horizon: f64, seed: u64) -> Result<EventSequence> {
    check_horizon(horizon)?;
    if rates.is_empty() {
        return Err(Error::InvalidArgument("no rates given".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {r}")));
    }
    let mut rng = Prng::seed_from_u64(seed);
    let mut events = Vec::new();
    for (k, &rate) in rates.iter().enumerate() {
        let mut t = 0.0;
        loop {
            t += exp1(&mut rng) / rate;
            if t > horizon {
                break;
            }
            events.push(MarkedEvent::new(t, k));
        }
    }
    EventSequence::new(events, horizon, rates.len())
}

/// Bar-discretized simulation on bars `0..num_bars`: at bar `i` each type
/// fires at most once, with probability `1 - exp(-lambda_k(i))` given the
/// events of earlier bars. Horizon is `num_bars`.
///
/// Daily extreme-event data have this shape (one event per type per bar),
/// and the cap keeps models with branching weights above one, which explode
/// in continuous time, bounded.
pub fn simulate_bars(model: &HawkesModel, num_bars: usize, seed: u64) -> Result<EventSequence> {
    let m = model.dim();
    let mut rng = Prng::seed_from_u64(seed);
    let mut state = ExcitationState::new(m, model.omega(), false);
    let mut events = Vec::new();
    let mut fired = Vec::with_capacity(m);
    for i in 0..num_bars {
        let t = i as f64;
        state.decay_to(t);
        fired.clear();
        for k in 0..m {
            let lam = model.link.apply(state.raw(model, k));
            let u: f64 = Open01.sample(&mut rng);
            if u < -(-lam).exp_m1() {
                fired.push(k);
            }
        }
        for &k in &fired {
            state.add_event(k);
            events.push(MarkedEvent::new(t, k));
        }
    }
    EventSequence::new(events, num_bars as f64, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkSpec;

    #[test]
    fn deterministic_per_seed() {
        let model = HawkesModel::linear(
            vec![0.024, 0.044],
            vec![vec![0.382, 0.387], vec![0.218, 0.343]],
            0.1,
        )
        .unwrap();
        let a = simulate_ogata(&model, 5000.0, 9).unwrap();
        let b = simulate_ogata(&model, 5000.0, 9).unwrap();
        let c = simulate_ogata(&model, 5000.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(!a.is_empty());
        assert!(a.events().iter().all(|e| e.time <= 5000.0));
    }

    #[test]
    fn rejects_unstable_linear_model() {
        let model = HawkesModel::linear(vec![0.1], vec![vec![1.2]], 1.0).unwrap();
        assert!(matches!(
            simulate_ogata(&model, 10.0, 0),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn nonlinear_with_inhibition_runs() {
        let model = HawkesModel::nonlinear(
            vec![0.2, 0.2],
            vec![vec![0.3, -0.8], vec![0.4, 0.2]],
            0.5,
            LinkSpec::floored(),
        )
        .unwrap();
        let s = simulate_ogata(&model, 2000.0, 1).unwrap();
        assert!(s.counts().iter().all(|&c| c > 50));
    }

    #[test]
    fn relu_with_dead_baseline_produces_nothing() {
        let model =
            HawkesModel::nonlinear(vec![-0.1], vec![vec![0.5]], 1.0, LinkSpec::Relu).unwrap();
        assert!(simulate_ogata(&model, 100.0, 0).unwrap().is_empty());
    }

    #[test]
    fn poisson_edge_cases() {
        assert!(simulate_poisson(&[0.1, 0.1], 0.0, 3).unwrap().is_empty());
        assert!(simulate_poisson(&[0.1, 0.0], 10.0, 3).is_err());
        assert!(simulate_poisson(&[-1.0], 10.0, 3).is_err());
        let s = simulate_poisson(&[0.5, 2.0], 100.0, 3).unwrap();
        assert_eq!(s.num_types(), 2);
        assert!(s.events().windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn bar_simulation_has_one_event_per_type_per_bar() {
        let model = HawkesModel::nonlinear(
            vec![-0.2, 0.1],
            vec![vec![1.3, -0.3], vec![0.2, 0.9]],
            0.7,
            LinkSpec::floored(),
        )
        .unwrap();
        let a = simulate_bars(&model, 3000, 5).unwrap();
        assert_eq!(a, simulate_bars(&model, 3000, 5).unwrap());
        assert_eq!(a.horizon(), 3000.0);
        assert!(a.events().iter().all(|e| e.time.fract() == 0.0));
        for k in 0..2 {
            let times = a.times_of(k);
            assert!(times.windows(2).all(|w| w[1] > w[0]));
        }
        assert!(simulate_bars(&model, 0, 5).unwrap().is_empty());
    }

    #[test]
    fn bar_simulation_matches_poisson_rate() {
        // Without excitation each bar fires with probability 1 - exp(-mu).
        let model = HawkesModel::linear(vec![0.2], vec![vec![0.0]], 1.0).unwrap();
        let n = simulate_bars(&model, 20000, 1).unwrap().len() as f64;
        let p = 1.0 - (-0.2f64).exp();
        let sd = (20000.0 * p * (1.0 - p)).sqrt();
        assert!((n - 20000.0 * p).abs() < 4.0 * sd);
    }
}
