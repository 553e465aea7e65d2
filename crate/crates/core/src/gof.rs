//! Goodness of fit by the random time change: under the true model, the
//! compensator increments between consecutive events of one type are i.i.d.
//! Exponential(1).
//!
//! Each type is rescaled through its own compensator `Lambda_k` at its own
//! event times. The resulting taus are compared with Exponential(1) by a Q-Q
//! table (plotting positions `(i - 0.5) / n`) and a one-sample
//! Kolmogorov-Smirnov test, and checked for serial dependence through the
//! consecutive pairs `(tau_i, tau_{i+1})` and their lag-1 rank correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::poisson_moment_estimate;
use crate::intensity::{compensator_path, log_likelihood_by_type, CompensatorMethod, QUADRATURE_TOL};
use crate::model::{EventSequence, HawkesModel};

/// Transformed inter-arrivals of one event type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledSequence {
    pub mark: usize,
    /// `Lambda_k(t_1) - Lambda_k(0)`, then `Lambda_k(t_{i+1}) - Lambda_k(t_i)`.
    pub taus: Vec<f64>,
}

/// Rescales the type-`k` event times by the model's compensator: closed form
/// for linear models, adaptive quadrature otherwise.
pub fn rescale_times(model: &HawkesModel, seq: &EventSequence, k: usize) -> Result<RescaledSequence> {
    if seq.num_types() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "model has {} types, sequence has {}",
            model.dim(),
            seq.num_types()
        )));
    }
    if k >= model.dim() {
        return Err(Error::TypeOutOfRange { k, m: model.dim() });
    }
    let times = seq.times_of(k);
    if times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "type {k} has {} events; rescaling needs at least 2",
            times.len()
        )));
    }
    let path = compensator_path(model, seq, k, &times, model.is_linear(), QUADRATURE_TOL);
    let mut prev = 0.0;
    let taus = path
        .into_iter()
        .map(|c| {
            let tau = c - prev;
            assert!(tau >= -1e-9, "compensator decreased by {tau}");
            prev = c;
            tau.max(0.0)
        })
        .collect();
    Ok(RescaledSequence { mark: k, taus })
}

fn exp_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x).exp_m1()
    }
}

/// `(theoretical, empirical)` pairs: Exponential(1) quantiles at `(i - 0.5) / n`
/// against the sorted taus.
pub fn exp_qq_points(taus: &[f64]) -> Result<Vec<(f64, f64)>> {
    if taus.len() < 2 {
        return Err(Error::InsufficientData("Q-Q plot needs at least 2 values".into()));
    }
    let n = taus.len() as f64;
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let p = (i as f64 + 0.5) / n;
            (-(-p).ln_1p(), x)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(lambda) = P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form of the CDF, which converges fast for small lambda.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|j| {
                let odd = (2 * j - 1) as f64;
                (c * odd * odd).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let x = (-2.0 * lambda * lambda).exp();
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=100i32 {
            let term = x.powi(j * j);
            sum += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample KS test against Exponential(1). The p-value is the asymptotic
/// Kolmogorov tail at `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`.
pub fn ks_statistic_exponential(taus: &[f64]) -> Result<KsResult> {
    if taus.len() < 5 {
        return Err(Error::InsufficientData("KS test needs at least 5 values".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = exp_cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic);
    Ok(KsResult {
        n: sorted.len(),
        statistic,
        p_value,
    })
}

/// Consecutive pairs of taus with their lag-1 Spearman rank correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceScatter {
    pub pairs: Vec<(f64, f64)>,
    /// `None` with fewer than two pairs or constant ranks.
    pub rank_correlation: Option<f64>,
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

pub fn independence_scatter(taus: &[f64]) -> Result<IndependenceScatter> {
    if taus.len() < 2 {
        return Err(Error::InsufficientData("scatter needs at least 2 values".into()));
    }
    let pairs: Vec<(f64, f64)> = taus.windows(2).map(|w| (w[0], w[1])).collect();
    let rank_correlation = spearman(&taus[..taus.len() - 1], &taus[1..]);
    Ok(IndependenceScatter {
        pairs,
        rank_correlation,
    })
}

pub fn qq_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("theoretical,empirical\n");
    for (a, b) in points {
        out.push_str(&format!("{a},{b}\n"));
    }
    out
}

pub fn scatter_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("tau_i,tau_next\n");
    for (a, b) in pairs {
        out.push_str(&format!("{a},{b}\n"));
    }
    out
}

/// Per-type comparison of a Hawkes fit against the homogeneous Poisson
/// baseline on the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeComparison {
    pub mark: usize,
    pub num_events: usize,
    pub poisson_rate: Option<f64>,
    pub hawkes_ks: Option<KsResult>,
    pub poisson_ks: Option<KsResult>,
    pub hawkes_log_likelihood: Option<f64>,
    pub poisson_log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub horizon: f64,
    pub types: Vec<TypeComparison>,
    /// Totals over types; `None` if any type's value is missing.
    pub hawkes_log_likelihood: Option<f64>,
    pub poisson_log_likelihood: Option<f64>,
}

/// Poisson rates come from the moment estimator; statistics that need more
/// events than a type has are left out.
pub fn compare_baseline(seq: &EventSequence, hawkes: &HawkesModel) -> Result<BaselineComparison> {
    if seq.num_types() != hawkes.dim() {
        return Err(Error::InvalidArgument(format!(
            "model has {} types, sequence has {}",
            hawkes.dim(),
            seq.num_types()
        )));
    }
    let horizon = seq.horizon();
    let rates = poisson_moment_estimate(seq);
    let method = if hawkes.is_linear() {
        CompensatorMethod::ClosedForm
    } else {
        CompensatorMethod::Quadrature
    };
    let hawkes_ll = match log_likelihood_by_type(hawkes, seq, method, None) {
        Ok(ll) => Some(ll),
        Err(Error::ZeroIntensity { .. }) => None,
        Err(e) => return Err(e),
    };

    let mut types = Vec::with_capacity(seq.num_types());
    for (k, rate) in rates.into_iter().enumerate() {
        let times = seq.times_of(k);
        let hawkes_ks = match rescale_times(hawkes, seq, k) {
            Ok(r) => ks_statistic_exponential(&r.taus).ok(),
            Err(Error::InsufficientData(_)) => None,
            Err(e) => return Err(e),
        };
        let poisson_ks = rate.and_then(|r| {
            let mut prev = 0.0;
            let taus: Vec<f64> = times
                .iter()
                .map(|&t| {
                    let tau = r * (t - prev);
                    prev = t;
                    tau
                })
                .collect();
            ks_statistic_exponential(&taus).ok()
        });
        let poisson_log_likelihood = rate.map(|r| times.len() as f64 * r.ln() - r * horizon);
        types.push(TypeComparison {
            mark: k,
            num_events: times.len(),
            poisson_rate: rate,
            hawkes_ks,
            poisson_ks,
            hawkes_log_likelihood: hawkes_ll.as_ref().map(|ll| ll[k]),
            poisson_log_likelihood,
        });
    }
    let total = |f: fn(&TypeComparison) -> Option<f64>| -> Option<f64> {
        types.iter().map(f).sum::<Option<f64>>()
    };
    Ok(BaselineComparison {
        horizon,
        hawkes_log_likelihood: total(|t| t.hawkes_log_likelihood),
        poisson_log_likelihood: total(|t| t.poisson_log_likelihood),
        types,
    })
}
