//! Small statistics helpers used by the estimators and the validation suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Standard error of a sample mean.
pub fn std_error(xs: &[f64]) -> f64 {
    let (_, var) = mean_var(xs);
    (var / xs.len() as f64).sqrt()
}

/// Binomial standard error `sqrt(p(1-p)/n)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn p_value(statistic: f64, dof: usize) -> Result<f64> {
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Numerical(format!("chi-square distribution: {e}")))?;
    Ok(1.0 - dist.cdf(statistic))
}

/// Pearson goodness-of-fit test of observed counts against expected counts.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::Input("chi-square needs matching bins (at least two)".into()));
    }
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum::<f64>();
    let dof = observed.len() - 1;
    Ok(ChiSquareTest { statistic, dof, p_value: p_value(statistic, dof)? })
}

/// Two-sample chi-square homogeneity test on histograms over the same bins.
///
/// Bins that are empty in both samples are dropped.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::Input("histograms must share bins".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::Input("empty histogram".into()));
    }
    let (na, nb) = (na as f64, nb as f64);
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        bins += 1;
        let (x, y) = (x as f64, y as f64);
        let d = (nb / na).sqrt() * x - (na / nb).sqrt() * y;
        statistic += d * d / (x + y);
    }
    if bins < 2 {
        return Ok(ChiSquareTest { statistic: 0.0, dof: 0, p_value: 1.0 });
    }
    let dof = bins - 1;
    Ok(ChiSquareTest { statistic, dof, p_value: p_value(statistic, dof)? })
}

/// Merge adjacent histogram bins from the right until every merged bin holds
/// at least `min_count` in the pooled sample. Returns the merged pair.
pub fn pool_sparse_bins(a: &[u64], b: &[u64], min_count: u64) -> (Vec<u64>, Vec<u64>) {
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    let (mut acc_a, mut acc_b) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        acc_a += x;
        acc_b += y;
        if acc_a + acc_b >= min_count {
            out_a.push(acc_a);
            out_b.push(acc_b);
            acc_a = 0;
            acc_b = 0;
        }
    }
    if acc_a + acc_b > 0 {
        if let (Some(la), Some(lb)) = (out_a.last_mut(), out_b.last_mut()) {
            *la += acc_a;
            *lb += acc_b;
        } else {
            out_a.push(acc_a);
            out_b.push(acc_b);
        }
    }
    (out_a, out_b)
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_var_basic() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_se_formula() {
        assert!((binomial_se(0.25, 100) - 0.0433).abs() < 1e-4);
        assert_eq!(binomial_se(1.0, 10), 0.0);
    }

    #[test]
    fn chi_square_perfect_fit_has_p_one() {
        let t = chi_square_gof(&[10, 10, 10], &[10.0, 10.0, 10.0]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_known_value() {
        // statistic 4 on 1 dof: p = 0.0455003
        let t = chi_square_gof(&[60, 40], &[50.0, 50.0]).unwrap();
        assert!((t.statistic - 4.0).abs() < 1e-12);
        assert!((t.p_value - 0.045500263896).abs() < 1e-9);
    }

    #[test]
    fn two_sample_identical_histograms() {
        let t = chi_square_two_sample(&[5, 10, 0, 3], &[5, 10, 0, 3]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
    }

    #[test]
    fn pooling_keeps_totals() {
        let (a, b) = pool_sparse_bins(&[1, 0, 30, 2, 1], &[0, 2, 28, 1, 0], 5);
        assert_eq!(a.iter().sum::<u64>(), 34);
        assert_eq!(b.iter().sum::<u64>(), 31);
        assert!(a.iter().zip(&b).all(|(x, y)| x + y >= 5));
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [3.0, 5.0, 7.0];
        let (c, s) = linear_fit(&xs, &ys);
        assert!((c - 1.0).abs() < 1e-12 && (s - 2.0).abs() < 1e-12);
    }
}
