//! Paired t-test and Bonferroni correction.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
}

/// Paired t-test on `a[i] − b[i]`. Identical samples give `t = 0, p = 1`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = n - 1;
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTest { t: 0.0, p: 1.0, df });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / df as f64;
    if var == 0.0 {
        // constant non-zero difference: infinitely significant
        let t = f64::INFINITY.copysign(mean);
        return Ok(TTest { t, p: 0.0, df });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest { t, p, df })
}

pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons.max(1) as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_case() {
        let r = paired_ttest(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert!((r.t - 12f64.sqrt()).abs() < 1e-12);
        // df = 2 has a closed-form CDF
        let p = 1.0 - r.t / (2.0 + r.t * r.t).sqrt();
        assert!((r.p - p).abs() < 1e-9);
        let neg = paired_ttest(&[0.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(neg.p, r.p);
        assert_eq!(neg.t, -r.t);
    }

    #[test]
    fn conventions() {
        assert_eq!(paired_ttest(&[0.3, 0.4], &[0.3, 0.4]).unwrap().p, 1.0);
        assert!(matches!(paired_ttest(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(paired_ttest(&[1.0], &[1.0]), Err(EvalError::TooFewSamples(1))));
        assert_eq!(bonferroni(0.02, 3), 0.06);
        assert_eq!(bonferroni(0.5, 3), 1.0);
    }
}
