//! Regression metrics: MAE, RMSE, Pearson's r, and R².
//!
//! Computed in `f64` with population (1/n) moments. Pearson's r is `None`
//! when either vector has zero variance; R² is `None` when the targets do.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub pearson_r: Option<f64>,
    pub r2: Option<f64>,
    pub n: usize,
}

impl RegressionMetrics {
    pub fn compute(y: &[f64], pred: &[f64]) -> Result<Self> {
        if y.len() != pred.len() {
            return Err(Error::Metrics(format!(
                "{} targets but {} predictions",
                y.len(),
                pred.len()
            )));
        }
        let n = y.len();
        if n < 2 {
            return Err(Error::Metrics(format!("need at least 2 samples, got {n}")));
        }
        let nf = n as f64;
        let mae = y.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / nf;
        let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
        let rmse = (sse / nf).sqrt();

        let mean_y = y.iter().sum::<f64>() / nf;
        let mean_p = pred.iter().sum::<f64>() / nf;
        let mut cov = 0.0;
        let mut var_y = 0.0;
        let mut var_p = 0.0;
        for (a, b) in y.iter().zip(pred) {
            let dy = a - mean_y;
            let dp = b - mean_p;
            cov += dy * dp;
            var_y += dy * dy;
            var_p += dp * dp;
        }
        let (cov, var_y, var_p) = (cov / nf, var_y / nf, var_p / nf);

        let pearson_r = (var_y > 0.0 && var_p > 0.0)
            .then(|| (cov / (var_y.sqrt() * var_p.sqrt())).clamp(-1.0, 1.0));
        let r2 = (var_y > 0.0).then(|| 1.0 - sse / (var_y * nf));
        Ok(RegressionMetrics {
            mae,
            rmse,
            pearson_r,
            r2,
            n,
        })
    }
}

impl std::fmt::Display for RegressionMetrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
        write!(
            f,
            "MAE {:.4}  RMSE {:.4}  r {}  R2 {}",
            self.mae,
            self.rmse,
            opt(self.pearson_r),
            opt(self.r2)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = [0.1, 0.5, 0.9];
        let m = RegressionMetrics::compute(&y, &y).unwrap();
        assert_eq!((m.mae, m.rmse), (0.0, 0.0));
        assert!((m.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.r2, Some(1.0));
    }

    #[test]
    fn mean_prediction() {
        let y = [1.0, 2.0, 6.0];
        let m = RegressionMetrics::compute(&y, &[3.0; 3]).unwrap();
        assert_eq!(m.r2, Some(0.0));
        assert_eq!(m.pearson_r, None);
    }

    #[test]
    fn shifted_prediction() {
        let m = RegressionMetrics::compute(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.rmse, 1.0);
        assert!((m.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        assert!((m.r2.unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(RegressionMetrics::compute(&[1.0], &[1.0]).is_err());
        assert!(RegressionMetrics::compute(&[1.0, 2.0], &[1.0]).is_err());
    }
}
