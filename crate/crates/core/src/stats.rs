//! Goodness-of-fit and small statistical helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonResult {
    pub statistic: f64,
    pub threshold: f64,
    pub dof: usize,
    pub accept: bool,
}

/// Pearson agreement check: Σ (obs − exp)² / exp against the χ² quantile at
/// `1 − alpha`. Bins with zero expectation and zero count are ignored.
pub fn pearson_check(observed: &[u64], expected: &[f64], alpha: f64) -> Result<PearsonResult> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidArgument("observed and expected differ in length".into()));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let total_p: f64 = expected.iter().sum();
    if (total_p - 1.0).abs() > 1e-9 || expected.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidArgument(format!("expected probabilities sum to {total_p}")));
    }
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (k, (&o, &p)) in observed.iter().zip(expected).enumerate() {
        if p == 0.0 {
            if o > 0 {
                return Err(Error::InvalidBinning(k));
            }
            continue;
        }
        bins += 1;
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
    }
    let dof = bins.saturating_sub(1).max(1);
    let threshold = chi2_quantile(1.0 - alpha, dof);
    Ok(PearsonResult { statistic: stat, threshold, dof, accept: stat <= threshold })
}

pub fn chi2_quantile(p: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).expect("positive dof").inverse_cdf(p)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Least-squares slope of y on x.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}
