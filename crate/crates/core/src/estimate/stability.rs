//! Spectral radius of the impact matrix and the stationarity check built on
//! it. For exponential kernels the integrated kernel matrix is `alpha`
//! itself, so a linear model is stationary iff `rho(alpha) < 1`.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HawkesModel, Mode};

/// Largest eigenvalue modulus of a square matrix (real Schur form).
pub fn spectral_radius(alpha: &[Vec<f64>]) -> Result<f64> {
    let m = alpha.len();
    if alpha.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if alpha.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let mat = DMatrix::from_fn(m, m, |i, j| alpha[i][j]);
    let schur = Schur::try_new(mat, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Degenerate("eigenvalue iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    pub radius: f64,
    /// Set for nonlinear models, where the radius is taken on `|alpha|` and
    /// is indicative only.
    pub advisory: bool,
}

pub fn check_stability(model: &HawkesModel) -> Stability {
    let (radius, advisory) = match model.mode {
        Mode::Linear => (spectral_radius(model.alpha()), false),
        Mode::Nonlinear => {
            let abs: Vec<Vec<f64>> = model
                .alpha()
                .iter()
                .map(|row| row.iter().map(|v| v.abs()).collect())
                .collect();
            (spectral_radius(&abs), true)
        }
    };
    // Models are validated finite and square, so the eigensolve only fails
    // on non-convergence.
    let radius = radius.unwrap_or(f64::INFINITY);
    Stability {
        stable: radius < 1.0,
        radius,
        advisory,
    }
}
