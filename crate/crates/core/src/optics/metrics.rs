use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average per-photon loss measured on the experimental converter for the
/// five-dimensional transformations.
pub const MEASURED_LOSS_DB_D5: f64 = 10.7;
/// Same, for the 25-dimensional transformations.
pub const MEASURED_LOSS_DB_D25: f64 = 13.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SorterMetrics {
    pub dim: usize,
    /// `|tr(U^H T)|^2 / (d * sum_j P_j)`, with `P_j` the captured power of column `j`.
    pub fidelity: f64,
    /// Mean over columns of off-diagonal power of `U^H T` over captured power.
    pub mean_crosstalk: f64,
    /// `-10 log10(mean_j P_j)`.
    pub insertion_loss_db: f64,
    pub column_power: Vec<f64>,
    /// Measured loss of a physical device, carried alongside for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_loss_db: Option<f64>,
}

impl SorterMetrics {
    /// Scores a transfer matrix against the intended unitary.
    pub fn evaluate(transfer: &Array2<Complex64>, intended: &Array2<Complex64>) -> Result<Self> {
        let (rows, cols) = transfer.dim();
        if rows != cols || intended.dim() != (rows, cols) || rows == 0 {
            return Err(Error::InvalidInput(format!(
                "transfer {:?} and intended {:?} must be equal square shapes",
                transfer.dim(),
                intended.dim()
            )));
        }
        let d = rows;
        let column_power: Vec<f64> = transfer
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        let total: f64 = column_power.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::DegenerateTransfer);
        }
        // M = U^H T
        let m = Array2::from_shape_fn((d, d), |(i, j)| {
            (0..d)
                .map(|n| intended[[n, i]].conj() * transfer[[n, j]])
                .sum::<Complex64>()
        });
        let trace: Complex64 = (0..d).map(|i| m[[i, i]]).sum();
        let fidelity = trace.norm_sqr() / (d as f64 * total);
        let mean_crosstalk = (0..d)
            .map(|j| {
                let col: f64 = (0..d).map(|i| m[[i, j]].norm_sqr()).sum();
                if col > 0.0 {
                    (col - m[[j, j]].norm_sqr()).max(0.0) / col
                } else {
                    1.0
                }
            })
            .sum::<f64>()
            / d as f64;
        let insertion_loss_db = -10.0 * (total / d as f64).log10();
        Ok(Self {
            dim: d,
            fidelity,
            mean_crosstalk,
            insertion_loss_db,
            column_power,
            reference_loss_db: None,
        })
    }

    pub fn with_reference_loss(mut self, loss_db: f64) -> Self {
        self.reference_loss_db = Some(loss_db);
        self
    }
}
