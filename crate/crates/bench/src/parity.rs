//! Agreement between predicted and reference values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why R² is missing from a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RSquaredAbsent {
    TooFewSamples,
    /// The reference has zero variance.
    DegenerateReference,
}

/// Invariants: `mae >= 0`; `r_squared <= 1` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityStats {
    pub n: usize,
    pub mae: f64,
    pub r_squared: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_squared_absent: Option<RSquaredAbsent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParityError {
    #[error("{predicted} predicted values but {reference} reference values")]
    LengthMismatch { predicted: usize, reference: usize },
    #[error("no values")]
    Empty,
    #[error("value {index} is not finite")]
    NonFinite { index: usize },
}

/// MAE is symmetric in its arguments; R² is measured against the
/// reference's variance and is not.
pub fn parity_stats(predicted: &[f64], reference: &[f64]) -> Result<ParityStats, ParityError> {
    if predicted.len() != reference.len() {
        return Err(ParityError::LengthMismatch { predicted: predicted.len(), reference: reference.len() });
    }
    if predicted.is_empty() {
        return Err(ParityError::Empty);
    }
    if let Some(index) = predicted.iter().zip(reference).position(|(p, r)| !(p.is_finite() && r.is_finite())) {
        return Err(ParityError::NonFinite { index });
    }
    let n = predicted.len();
    let mae = predicted.iter().zip(reference).map(|(p, r)| (p - r).abs()).sum::<f64>() / n as f64;
    let ss_res: f64 = predicted.iter().zip(reference).map(|(p, r)| (p - r).powi(2)).sum();
    let r_mean = reference.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = reference.iter().map(|r| (r - r_mean).powi(2)).sum();
    let (r_squared, r_squared_absent) = if n < 2 {
        (None, Some(RSquaredAbsent::TooFewSamples))
    } else if ss_tot == 0.0 {
        (None, Some(RSquaredAbsent::DegenerateReference))
    } else {
        (Some(1.0 - ss_res / ss_tot), None)
    };
    Ok(ParityStats { n, mae, r_squared, r_squared_absent })
}
