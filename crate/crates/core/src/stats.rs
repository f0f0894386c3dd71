//! One-sample Kolmogorov-Smirnov test for sampler validation.

/// Result of a one-sample KS test.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    /// `max |F_n(x) - F(x)|` over the sample.
    pub statistic: f64,
    /// Asymptotic probability of a statistic at least this large under the
    /// null hypothesis.
    pub p_value: f64,
    pub n: usize,
}

/// Compare a sample against the analytic CDF `cdf`.
///
/// The p-value uses the Kolmogorov asymptotic series with the
/// `sqrt(n) + 0.12 + 0.11/sqrt(n)` small-sample correction (Numerical
/// Recipes, 3rd ed.).
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    assert!(!samples.is_empty(), "KS test needs a nonempty sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));

    let n = sorted.len();
    let nf = n as f64;
    let mut stat: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        // The empirical CDF steps from i/n to (i+1)/n at x.
        stat = stat.max((f - i as f64 / nf).abs());
        stat = stat.max((f - (i + 1) as f64 / nf).abs());
    }

    let sqrt_n = nf.sqrt();
    let p_value = ks_complement_cdf((sqrt_n + 0.12 + 0.11 / sqrt_n) * stat);
    KsResult {
        statistic: stat,
        p_value,
        n,
    }
}

/// Complement of the Kolmogorov distribution, `Q(z) = 1 - CDF(z)`.
pub fn ks_complement_cdf(z: f64) -> f64 {
    assert!(z >= 0.0, "KS statistic is nonnegative");
    if z == 0.0 {
        1.0
    } else if z < 1.18 {
        let factor = (2.0 * std::f64::consts::PI).sqrt() / z;
        let term = (-std::f64::consts::PI.powi(2) / (8.0 * z * z)).exp();
        1.0 - factor * (term + term.powi(9) + term.powi(25) + term.powi(49))
    } else {
        let term = (-2.0 * z * z).exp();
        2.0 * (term - term.powi(4) + term.powi(9))
    }
}

/// Mean and standard error of the mean of a sample.
pub fn mean_and_std_err(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
