//! Ordinary least squares slope against the sample index.

use super::MetricsError;

/// Slope of the least-squares line through `(i, x_i)` for `i = 1..=len`.
/// Constant input gives exactly zero.
pub fn ols_slope(x: &[f64]) -> Result<f64, MetricsError> {
    let m = x.len();
    if m < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: m });
    }
    let mf = m as f64;
    let i_mean = (mf + 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / mf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        let di = (k + 1) as f64 - i_mean;
        sxy += di * (v - x_mean);
        sxx += di * di;
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_and_constant() {
        assert_eq!(ols_slope(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(ols_slope(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!(matches!(ols_slope(&[1.0]), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn matches_textbook_covariance_formula() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..200);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            // cov(i, x) / var(i) with raw sums.
            let nf = n as f64;
            let si: f64 = (1..=n).map(|i| i as f64).sum();
            let sii: f64 = (1..=n).map(|i| (i * i) as f64).sum();
            let sx: f64 = x.iter().sum();
            let six: f64 = x.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v).sum();
            let oracle = (nf * six - si * sx) / (nf * sii - si * si);
            let got = ols_slope(&x).unwrap();
            assert!((got - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()), "{got} vs {oracle}");
        }
    }
}
