//! Domain types shared by every module: marked events, event sequences,
//! exponential-kernel parameters, link functions and daily return series.
//!
//! Time is measured in trading-bar units (0, 1, 2, ...). The excitation
//! kernel between a type-`j` event and type-`k` intensity is
//!
//! ```text
//! phi_kj(t) = alpha[k][j] * omega * exp(-omega * t)
//! ```
//!
//! so `alpha[k][j]` is the integrated effect (branching weight) of one
//! type-`j` event on the type-`k` process.

use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor for [`LinkSpec::FlooredIdentity`].
pub const DEFAULT_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedEvent {
    pub time: f64,
    pub mark: usize,
}

impl MarkedEvent {
    pub fn new(time: f64, mark: usize) -> Self {
        Self { time, mark }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.mark.cmp(&other.mark))
    }
}

/// Typed event times on `[0, horizon]`.
///
/// Construction sorts the events by `(time, mark)` (stable) and rejects
/// anything that breaks the invariants: negative or non-finite times, times
/// past the horizon, marks `>= num_types`, or two events of the same mark
/// at the same instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct EventSequence {
    events: Vec<MarkedEvent>,
    horizon: f64,
    num_types: usize,
}

#[derive(Deserialize)]
struct RawSequence {
    events: Vec<MarkedEvent>,
    horizon: f64,
    num_types: usize,
}

impl TryFrom<RawSequence> for EventSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        EventSequence::new(raw.events, raw.horizon, raw.num_types)
    }
}

impl EventSequence {
    pub fn new(mut events: Vec<MarkedEvent>, horizon: f64, num_types: usize) -> Result<Self> {
        if num_types == 0 {
            return Err(Error::InvalidSequence("num_types must be positive".into()));
        }
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::InvalidSequence(format!(
                "horizon must be finite and non-negative, got {horizon}"
            )));
        }
        for e in &events {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::InvalidSequence(format!(
                    "event time {} is negative or non-finite",
                    e.time
                )));
            }
            if e.time > horizon {
                return Err(Error::InvalidSequence(format!(
                    "event time {} exceeds horizon {horizon}",
                    e.time
                )));
            }
            if e.mark >= num_types {
                return Err(Error::TypeOutOfRange {
                    k: e.mark,
                    m: num_types,
                });
            }
        }
        events.sort_by(MarkedEvent::order);
        if let Some(w) = events
            .windows(2)
            .find(|w| w[0].time == w[1].time && w[0].mark == w[1].mark)
        {
            return Err(Error::InvalidSequence(format!(
                "two events of mark {} at time {}",
                w[0].mark, w[0].time
            )));
        }
        Ok(Self {
            events,
            horizon,
            num_types,
        })
    }

    pub fn empty(horizon: f64, num_types: usize) -> Result<Self> {
        Self::new(Vec::new(), horizon, num_types)
    }

    pub fn events(&self) -> &[MarkedEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event times of one type, in order.
    pub fn times_of(&self, k: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.mark == k)
            .map(|e| e.time)
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_types];
        for e in &self.events {
            counts[e.mark] += 1;
        }
        counts
    }
}

/// Operating regime of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Linear,
    Nonlinear,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Linear => write!(f, "LINEAR"),
            Mode::Nonlinear => write!(f, "NONLINEAR"),
        }
    }
}

/// Nonlinearity applied component-wise to the raw intensity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkSpec {
    #[default]
    Identity,
    FlooredIdentity { floor: f64 },
    Softplus,
    Relu,
}

impl LinkSpec {
    pub fn floored() -> Self {
        LinkSpec::FlooredIdentity {
            floor: DEFAULT_FLOOR,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            LinkSpec::Identity => x,
            LinkSpec::FlooredIdentity { floor } => x.max(floor),
            LinkSpec::Softplus => softplus(x),
            LinkSpec::Relu => x.max(0.0),
        }
    }

    /// Derivative of the link; at the kink of the piecewise links the
    /// right-hand value is used for `Relu` and the left-hand one (zero) for
    /// the floor.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            LinkSpec::Identity => 1.0,
            LinkSpec::FlooredIdentity { floor } => {
                if x > floor {
                    1.0
                } else {
                    0.0
                }
            }
            LinkSpec::Softplus => sigmoid(x),
            LinkSpec::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Value at or below which the link output is flat, if any.
    pub fn floor(&self) -> Option<f64> {
        match *self {
            LinkSpec::FlooredIdentity { floor } => Some(floor),
            LinkSpec::Relu => Some(0.0),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LinkSpec::Identity => "IDENTITY",
            LinkSpec::FlooredIdentity { .. } => "FLOORED_IDENTITY",
            LinkSpec::Softplus => "SOFTPLUS",
            LinkSpec::Relu => "RELU",
        }
    }

    fn validate(&self) -> Result<()> {
        if let LinkSpec::FlooredIdentity { floor } = *self {
            if !(floor.is_finite() && floor > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "link floor must be positive, got {floor}"
                )));
            }
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Baseline vector, impact matrix (row `k` = affected type) and shared decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub omega: f64,
}

impl KernelParams {
    pub fn new(mu: Vec<f64>, alpha: Vec<Vec<f64>>, omega: f64) -> Result<Self> {
        let p = Self { mu, alpha, omega };
        p.validate_shape()?;
        Ok(p)
    }

    /// Homogeneous Poisson parameters: `alpha = 0`.
    pub fn poisson(mu: Vec<f64>, omega: f64) -> Self {
        let m = mu.len();
        Self {
            mu,
            alpha: vec![vec![0.0; m]; m],
            omega,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn validate_shape(&self) -> Result<()> {
        let m = self.mu.len();
        if m == 0 {
            return Err(Error::InvalidModel("mu must be non-empty".into()));
        }
        if self.alpha.len() != m || self.alpha.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidModel(format!("alpha must be {m}x{m}")));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidModel(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        let finite = self.mu.iter().chain(self.alpha.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite mu or alpha".into()));
        }
        Ok(())
    }
}

/// A fully specified exponential-kernel Hawkes model.
///
/// JSON form (row-major `alpha`, row = affected type):
///
/// ```json
/// {"mode":"LINEAR","mu":[0.024,0.044],"alpha":[[0.382,0.387],[0.218,0.343]],
///  "omega":0.1,"link":{"variant":"IDENTITY"}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct HawkesModel {
    pub mode: Mode,
    #[serde(flatten)]
    pub params: KernelParams,
    pub link: LinkSpec,
}

#[derive(Deserialize)]
struct RawModel {
    mode: Mode,
    mu: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    omega: f64,
    #[serde(default)]
    link: Option<LinkSpec>,
}

impl TryFrom<RawModel> for HawkesModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let params = KernelParams {
            mu: raw.mu,
            alpha: raw.alpha,
            omega: raw.omega,
        };
        let link = raw.link.unwrap_or(match raw.mode {
            Mode::Linear => LinkSpec::Identity,
            Mode::Nonlinear => LinkSpec::floored(),
        });
        HawkesModel::new(raw.mode, params, link)
    }
}

impl HawkesModel {
    pub fn new(mode: Mode, params: KernelParams, link: LinkSpec) -> Result<Self> {
        params.validate_shape()?;
        link.validate()?;
        match mode {
            Mode::Linear => {
                if link != LinkSpec::Identity {
                    return Err(Error::InvalidModel(
                        "LINEAR mode requires the IDENTITY link".into(),
                    ));
                }
                if params.mu.iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidModel("LINEAR mode requires mu > 0".into()));
                }
                if params.alpha.iter().flatten().any(|&v| v < 0.0) {
                    return Err(Error::InvalidModel(
                        "LINEAR mode requires alpha >= 0".into(),
                    ));
                }
            }
            Mode::Nonlinear => {
                if link == LinkSpec::Identity {
                    return Err(Error::InvalidModel(
                        "NONLINEAR mode needs a link that keeps intensities non-negative".into(),
                    ));
                }
            }
        }
        Ok(Self { mode, params, link })
    }

    pub fn linear(mu: Vec<f64>, alpha: Vec<Vec<f64>>, omega: f64) -> Result<Self> {
        Self::new(Mode::Linear, KernelParams::new(mu, alpha, omega)?, LinkSpec::Identity)
    }

    pub fn nonlinear(mu: Vec<f64>, alpha: Vec<Vec<f64>>, omega: f64, link: LinkSpec) -> Result<Self> {
        Self::new(Mode::Nonlinear, KernelParams::new(mu, alpha, omega)?, link)
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn mu(&self) -> &[f64] {
        &self.params.mu
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.params.alpha
    }

    pub fn omega(&self) -> f64 {
        self.params.omega
    }

    pub fn is_linear(&self) -> bool {
        self.mode == Mode::Linear
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Dated daily returns in percent (1.32 means 1.32%).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReturns")]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawReturns {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl TryFrom<RawReturns> for ReturnSeries {
    type Error = Error;

    fn try_from(raw: RawReturns) -> Result<Self> {
        ReturnSeries::new(raw.dates, raw.values)
    }
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite return".into()));
        }
        Ok(Self { dates, values })
    }

    /// Series indexed by bar only; dates are synthetic consecutive days.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = start.iter_days().take(values.len()).collect();
        Self::new(dates, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eq12() -> HawkesModel {
        HawkesModel::linear(
            vec![0.024, 0.044],
            vec![vec![0.382, 0.387], vec![0.218, 0.343]],
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn sequence_sorts_by_time_then_mark() {
        let seq = EventSequence::new(
            vec![
                MarkedEvent::new(3.0, 1),
                MarkedEvent::new(1.0, 1),
                MarkedEvent::new(1.0, 0),
            ],
            5.0,
            2,
        )
        .unwrap();
        let got: Vec<_> = seq.events().iter().map(|e| (e.time, e.mark)).collect();
        assert_eq!(got, vec![(1.0, 0), (1.0, 1), (3.0, 1)]);
    }

    #[test]
    fn sequence_rejects_bad_events() {
        assert!(EventSequence::new(vec![MarkedEvent::new(6.0, 0)], 5.0, 1).is_err());
        assert!(EventSequence::new(vec![MarkedEvent::new(-1.0, 0)], 5.0, 1).is_err());
        assert!(EventSequence::new(vec![MarkedEvent::new(1.0, 2)], 5.0, 2).is_err());
        let dup = vec![MarkedEvent::new(1.0, 0), MarkedEvent::new(1.0, 0)];
        assert!(EventSequence::new(dup, 5.0, 1).is_err());
        assert!(EventSequence::new(vec![], 5.0, 0).is_err());
    }

    #[test]
    fn linear_model_constraints() {
        assert!(HawkesModel::linear(vec![0.0], vec![vec![0.1]], 1.0).is_err());
        assert!(HawkesModel::linear(vec![0.1], vec![vec![-0.1]], 1.0).is_err());
        assert!(HawkesModel::linear(vec![0.1], vec![vec![0.1]], 0.0).is_err());
        assert!(HawkesModel::new(
            Mode::Linear,
            KernelParams::poisson(vec![0.1], 1.0),
            LinkSpec::Softplus
        )
        .is_err());
        assert!(HawkesModel::nonlinear(vec![-0.2], vec![vec![-0.5]], 1.0, LinkSpec::floored()).is_ok());
        assert!(HawkesModel::nonlinear(vec![0.2], vec![vec![0.5]], 1.0, LinkSpec::Identity).is_err());
    }

    #[test]
    fn links_are_valid_rates() {
        let xs = [-50.0, -1.0, -0.3, 0.0, 0.005, 0.3, 40.0];
        for &x in &xs {
            assert!(LinkSpec::floored().apply(x) > 0.0);
            assert!(LinkSpec::Softplus.apply(x) > 0.0);
            assert!(LinkSpec::Relu.apply(x) >= 0.0);
        }
        assert_eq!(LinkSpec::floored().apply(-0.3), 0.01);
        assert!((LinkSpec::Softplus.apply(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn model_json_schema() {
        let json = serde_json::to_value(eq12()).unwrap();
        assert_eq!(json["mode"], "LINEAR");
        assert_eq!(json["alpha"][0][1], 0.387);
        assert_eq!(json["link"]["variant"], "IDENTITY");
        let nl = HawkesModel::nonlinear(vec![0.1], vec![vec![-0.2]], 0.5, LinkSpec::floored()).unwrap();
        let json = serde_json::to_value(&nl).unwrap();
        assert_eq!(json["link"]["variant"], "FLOORED_IDENTITY");
        assert_eq!(json["link"]["floor"], 0.01);
    }

    #[test]
    fn model_json_validates() {
        let bad = r#"{"mode":"LINEAR","mu":[-1.0],"alpha":[[0.1]],"omega":1.0,"link":{"variant":"IDENTITY"}}"#;
        assert!(HawkesModel::from_json(bad).is_err());
        let no_link = r#"{"mode":"NONLINEAR","mu":[-1.0],"alpha":[[0.1]],"omega":1.0}"#;
        assert_eq!(HawkesModel::from_json(no_link).unwrap().link, LinkSpec::floored());
    }

    #[test]
    fn return_series_rejects_unordered_dates() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        assert!(ReturnSeries::new(vec![d("2020-01-02"), d("2020-01-01")], vec![1.0, 2.0]).is_err());
        assert!(ReturnSeries::new(vec![d("2020-01-01")], vec![1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(
            mu in prop::collection::vec(-5.0f64..5.0, 3),
            alpha in prop::collection::vec(-2.0f64..2.0, 9),
            omega in 1e-6f64..100.0,
            times in prop::collection::vec((0.0f64..1000.0, 0usize..3), 0..40),
        ) {
            let rows: Vec<Vec<f64>> = alpha.chunks(3).map(|c| c.to_vec()).collect();
            let model = HawkesModel::nonlinear(mu, rows, omega, LinkSpec::Softplus).unwrap();
            let back = HawkesModel::from_json(&model.to_json()).unwrap();
            prop_assert_eq!(&back, &model);

            let mut events: Vec<MarkedEvent> = times.iter().map(|&(t, k)| MarkedEvent::new(t, k)).collect();
            events.sort_by(|a, b| a.order(b));
            events.dedup_by(|a, b| a.time == b.time && a.mark == b.mark);
            let seq = EventSequence::new(events, 1000.0, 3).unwrap();
            let s = serde_json::to_string(&seq).unwrap();
            let back: EventSequence = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
