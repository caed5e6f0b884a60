//! Welch's unequal-variance two-sample t-test.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub degrees_of_freedom: f64,
    /// Two-sided.
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom:
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewSamples { a: a.len(), b: b.len() });
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult { t_statistic: t, degrees_of_freedom: df, p_value: student_t_two_sided(t, df) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples() {
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_by_one() {
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.t_statistic + 1.2f64.sqrt()).abs() < 1e-14);
        assert!((r.degrees_of_freedom - 6.0).abs() < 1e-12);
        // even df closed form: A(t|6) = sin(th) (1 + c^2/2 + 3c^4/8), th = atan(t/sqrt 6)
        let th = (r.t_statistic.abs() / 6f64.sqrt()).atan();
        let (s, c) = th.sin_cos();
        let a = s * (1.0 + c * c / 2.0 + 3.0 * c.powi(4) / 8.0);
        assert!((r.p_value - (1.0 - a)).abs() < 1e-12, "{} vs {}", r.p_value, 1.0 - a);
    }

    #[test]
    fn errors() {
        assert!(matches!(welch_t_test(&[0.0, 0.0], &[0.0, 0.0]), Err(Error::ZeroVariance)));
        assert!(matches!(welch_t_test(&[1.0], &[0.0, 2.0]), Err(Error::TooFewSamples { .. })));
        assert!(welch_t_test(&[1.0, 1.0], &[0.0, 2.0]).is_ok());
    }

    #[test]
    fn swap_negates_t() {
        let a = [0.3, 0.9, 0.4, 0.7, 0.2];
        let b = [0.8, 1.1, 0.95];
        let x = welch_t_test(&a, &b).unwrap();
        let y = welch_t_test(&b, &a).unwrap();
        assert_eq!(x.t_statistic, -y.t_statistic);
        assert_eq!(x.p_value, y.p_value);
        assert_eq!(x.degrees_of_freedom, y.degrees_of_freedom);
    }
}
