//! Block summary of six-type impact matrices ordered up types first
//! (three sectors), then down types:
//!
//! ```text
//! [ A  B ]   A: up -> up (upward trend)     B: down -> up (oversold rebound)
//! [ C  D ]   C: up -> down (pullback)       D: down -> down (downward trend)
//! ```
//!
//! Rows are the affected type, columns the source type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HawkesModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMeans {
    pub mean: f64,
    pub diagonal_mean: f64,
    pub off_diagonal_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub upward_trend_a: BlockMeans,
    pub oversold_rebound_b: BlockMeans,
    pub pullback_c: BlockMeans,
    pub downward_trend_d: BlockMeans,
    /// Mean of the six diagonal entries of the full matrix.
    pub diagonal_mean: f64,
    /// Mean of the thirty off-diagonal entries.
    pub off_diagonal_mean: f64,
    /// `diagonal_mean - off_diagonal_mean`.
    pub contrast: f64,
    pub omega: f64,
    pub mu: Vec<f64>,
}

fn block(alpha: &[Vec<f64>], rows: usize, cols: usize) -> BlockMeans {
    let (mut all, mut diag, mut off) = (0.0, 0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            let v = alpha[rows + i][cols + j];
            all += v;
            if i == j {
                diag += v;
            } else {
                off += v;
            }
        }
    }
    BlockMeans {
        mean: all / 9.0,
        diagonal_mean: diag / 3.0,
        off_diagonal_mean: off / 6.0,
    }
}

pub fn block_summary(model: &HawkesModel) -> Result<BlockSummary> {
    let alpha = model.alpha();
    if model.dim() != 6 {
        return Err(Error::InvalidArgument(format!(
            "block summary needs a 6-type model, got {} types",
            model.dim()
        )));
    }
    let diag: f64 = (0..6).map(|i| alpha[i][i]).sum::<f64>() / 6.0;
    let total: f64 = alpha.iter().flatten().sum();
    let off = (total - 6.0 * diag) / 30.0;
    Ok(BlockSummary {
        upward_trend_a: block(alpha, 0, 0),
        oversold_rebound_b: block(alpha, 0, 3),
        pullback_c: block(alpha, 3, 0),
        downward_trend_d: block(alpha, 3, 3),
        diagonal_mean: diag,
        off_diagonal_mean: off,
        contrast: diag - off,
        omega: model.omega(),
        mu: model.mu().to_vec(),
    })
}
