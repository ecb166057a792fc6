use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf, norm_ppf};
use crate::surrogate::design::sample_variance;

/// Mean squared prediction error divided by the sample variance of `truth`.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if truth.len() < 2 {
        return Err(Error::InvalidArgument("need at least two validation points".into()));
    }
    let var = sample_variance(truth);
    if !(var > 0.0) {
        return Err(Error::InvalidArgument("validation responses have zero variance".into()));
    }
    let mse = pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64;
    Ok(mse / var)
}

/// `|β̂ − β_ref| / β_ref`.
pub fn rrie(beta_hat: f64, beta_ref: f64) -> Result<f64> {
    if !(beta_ref > 0.0) {
        return Err(Error::InvalidArgument(format!("reference index must be positive, got {beta_ref}")));
    }
    Ok((beta_hat - beta_ref).abs() / beta_ref)
}

/// Relative index error explainable by simulation noise alone at
/// coefficient of variation `cov`, exceeded with probability `gamma`.
pub fn noise_tolerance(beta_ref: f64, cov: f64, gamma: f64) -> Result<f64> {
    if !(beta_ref > 0.0) {
        return Err(Error::InvalidArgument(format!("reference index must be positive, got {beta_ref}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) || !(cov >= 0.0) {
        return Err(Error::InvalidArgument("gamma must lie in (0, 1) and cov be non-negative".into()));
    }
    let sigma_beta = cov * norm_cdf(-beta_ref) / norm_pdf(beta_ref);
    Ok(norm_ppf(1.0 - gamma) * sigma_beta / beta_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let truth = [1.0, 2.0, 3.0, 4.0];
        let r = rmse(&[2.5; 4], &truth).unwrap();
        assert!((r - 0.75).abs() < 1e-15);
        assert!(rmse(&[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert_eq!(rrie(3.0, 3.0).unwrap(), 0.0);
        assert!((rrie(1.6748, 1.58).unwrap() - 0.06).abs() < 1e-12);
        assert!(rrie(1.0, 0.0).is_err());
        let tol = noise_tolerance(3.47, 1e-3, 0.01).unwrap();
        assert!((tol - 1.800_691_557_502_773e-4).abs() < 1e-15);
        assert!(noise_tolerance(-1.0, 1e-3, 0.01).is_err());
    }
}
