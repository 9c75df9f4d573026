//! Task losses and the combined domain-adaptation objective.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean absolute error and its (sub)gradient; the subgradient is 0 at ties.
pub fn mae_loss(pred: &[f64], label: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() {
        return Err(Error::Domain("MAE of an empty batch".into()));
    }
    if pred.len() != label.len() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} labels",
            pred.len(),
            label.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(label).map(|(p, l)| (p - l).abs()).sum::<f64>() / n;
    let grads = pred
        .iter()
        .zip(label)
        .map(|(p, l)| {
            let d = p - l;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss, grads))
}

/// `α`, `β`, `λ` weights of the SDR, HDR and CORAL terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }

    pub fn combine(&self, l_sdr: f64, l_hdr: f64, l_coral: f64) -> f64 {
        self.alpha * l_sdr + self.beta * l_hdr + self.lambda * l_coral
    }
}

/// `α·L_SDR + β·L_HDR + λ·L_CORAL`.
pub fn total_loss(
    l_sdr: f64,
    l_hdr: f64,
    l_coral: f64,
    alpha: f64,
    beta: f64,
    lambda: f64,
) -> Result<f64> {
    let w = LossWeights {
        alpha,
        beta,
        lambda,
    };
    w.validate()?;
    Ok(w.combine(l_sdr, l_hdr, l_coral))
}
