//! Linear and nonlinear multivariate Hawkes processes with exponential
//! kernels: simulation, Monte-Carlo stochastic-gradient maximum likelihood,
//! extreme-event extraction from daily returns and goodness of fit by the
//! random time change.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod events;
pub mod gof;
pub mod intensity;
pub mod model;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use estimate::{fit_sgd, FitConfig, FitReport};
pub use model::{EventSequence, HawkesModel, KernelParams, LinkSpec, MarkedEvent, Mode, ReturnSeries};
pub use simulate::{simulate_bars, simulate_ogata, simulate_poisson};
