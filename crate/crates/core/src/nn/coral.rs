//! Deep CORAL: matching second-order feature statistics across domains.
//!
//! ```text
//! L = ‖C_S − C_T‖²_F / (4 d²)
//! ```
//!
//! with `C = Fcᵀ Fc / (n − 1)` the unbiased covariance of the column-centered
//! feature matrix. Because centered columns sum to zero, the gradient with
//! respect to the raw features reduces to
//! `∂L/∂F_S = Fc_S (C_S − C_T) / ((n_S − 1) d²)` and the negated analogue for
//! the target.

use ndarray::{Array2, Axis};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureDomain {
    Source,
    Target,
}

/// `n × d` feature activations from one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub features: Array2<f64>,
    pub domain: FeatureDomain,
}

impl FeatureBatch {
    pub fn new(features: Array2<f64>, domain: FeatureDomain) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Statistics("feature batch contains non-finite values".into()));
        }
        Ok(FeatureBatch { features, domain })
    }

    /// Stacks batches row-wise; the domain of the first batch is kept.
    pub fn stack(batches: &[&FeatureBatch]) -> Result<Self> {
        let first = batches
            .first()
            .ok_or_else(|| Error::Statistics("no feature batches to stack".into()))?;
        let views: Vec<_> = batches.iter().map(|b| b.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::Dimension(format!("cannot stack feature batches: {e}")))?;
        Ok(FeatureBatch {
            features,
            domain: first.domain,
        })
    }

    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

fn centered(f: &FeatureBatch) -> Result<Array2<f64>> {
    if f.rows() < 2 {
        return Err(Error::Statistics(format!(
            "covariance needs at least 2 rows, got {}",
            f.rows()
        )));
    }
    let mean = f.features.mean_axis(Axis(0)).expect("non-empty");
    Ok(&f.features - &mean)
}

/// Unbiased `d × d` covariance of the rows of `f`.
pub fn covariance(f: &FeatureBatch) -> Result<Array2<f64>> {
    let fc = centered(f)?;
    Ok(fc.t().dot(&fc) / (f.rows() - 1) as f64)
}

#[derive(Debug, Clone)]
pub struct CoralLoss {
    pub loss: f64,
    /// `‖C_S − C_T‖_F`.
    pub distance: f64,
    pub grad_source: Array2<f64>,
    pub grad_target: Array2<f64>,
}

pub fn coral_loss(source: &FeatureBatch, target: &FeatureBatch) -> Result<CoralLoss> {
    if source.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "feature dimensions differ: {} vs {}",
            source.dim(),
            target.dim()
        )));
    }
    let d = source.dim() as f64;
    let fc_s = centered(source)?;
    let fc_t = centered(target)?;
    let c_s = fc_s.t().dot(&fc_s) / (source.rows() - 1) as f64;
    let c_t = fc_t.t().dot(&fc_t) / (target.rows() - 1) as f64;
    let diff = c_s - c_t;
    let sq = diff.iter().map(|v| v * v).sum::<f64>();
    let loss = sq / (4.0 * d * d);
    let grad_source = fc_s.dot(&diff) / ((source.rows() - 1) as f64 * d * d);
    let grad_target = fc_t.dot(&diff) / (-((target.rows() - 1) as f64) * d * d);
    Ok(CoralLoss {
        loss,
        distance: sq.sqrt(),
        grad_source,
        grad_target,
    })
}
