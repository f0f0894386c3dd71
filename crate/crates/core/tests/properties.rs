//! Property tests for the distribution laws and the reduced kernel.

use nctrans::integral::reduce_kernel;
use nctrans::pathlen::PathLengthLaw;
use nctrans::quadrature;
use proptest::prelude::*;
use rand::SeedableRng;

fn arb_law() -> impl Strategy<Value = PathLengthLaw> {
    prop_oneof![
        (0.5f64..50.0).prop_map(|ms2| PathLengthLaw::diffusion_matched(ms2).unwrap()),
        (0.1f64..10.0).prop_map(|s| PathLengthLaw::exponential(s).unwrap()),
        arb_tabulated(),
    ]
}

/// Random piecewise-linear densities on [0, s_max] with a handful of knots.
fn arb_tabulated() -> impl Strategy<Value = PathLengthLaw> {
    (
        2usize..7,
        0.5f64..8.0,
        proptest::collection::vec(0.05f64..3.0, 7),
    )
        .prop_map(|(segments, s_max, raw)| {
            let n = segments + 1;
            let points: Vec<(f64, f64)> = (0..n)
                .map(|i| (s_max * i as f64 / (n - 1) as f64, raw[i]))
                .collect();
            PathLengthLaw::tabulated(&points).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalization_is_unit(law in arb_law()) {
        let norm = law.normalization_by_quadrature().unwrap();
        prop_assert!((norm - 1.0).abs() < 1e-8, "integral of pdf = {norm}");
    }

    #[test]
    fn survival_monotone_and_bounded(law in arb_law()) {
        let horizon = 20.0 * law.moments().unwrap().first;
        let mut prev = law.survival(0.0).unwrap();
        prop_assert_eq!(prev, 1.0);
        for k in 1..=400 {
            let s = horizon * k as f64 / 400.0;
            let surv = law.survival(s).unwrap();
            prop_assert!((0.0..=1.0).contains(&surv));
            prop_assert!(surv <= prev + 1e-12, "survival increased at s = {}", s);
            prev = surv;
        }
    }

    #[test]
    fn moment_variance_nonnegative(law in arb_law()) {
        let m = law.moments().unwrap();
        prop_assert!(m.second >= m.first * m.first * (1.0 - 1e-12));
    }

    #[test]
    fn quadrature_moments_match_closed_forms(ms2 in 0.5f64..50.0, sigma in 0.1f64..10.0) {
        for law in [
            PathLengthLaw::diffusion_matched(ms2).unwrap(),
            PathLengthLaw::exponential(sigma).unwrap(),
        ] {
            let closed = law.moments().unwrap();
            let quad = law.moments_by_quadrature().unwrap();
            prop_assert!((quad.first - closed.first).abs() < 1e-8 * closed.first.max(1.0));
            prop_assert!((quad.second - closed.second).abs() < 1e-8 * closed.second.max(1.0));
        }
    }

    #[test]
    fn hazard_round_trip_reconstructs_pdf(law in arb_law()) {
        // sigma(s) e^{-int_0^s sigma} must reproduce the density. The
        // optical depth comes from the law's closed form; a quadrature
        // cross-check of the hazard covers the analytic variants.
        let m = law.moments().unwrap();
        let horizon = 20.0 * m.first;
        let max_pdf = (0..=200)
            .map(|k| law.pdf(horizon * k as f64 / 200.0).unwrap())
            .fold(0.0f64, f64::max);
        for k in 0..=100 {
            let s = horizon * k as f64 / 100.0;
            if law.survival(s).unwrap() < 1e-12 {
                break;
            }
            let reconstructed = law.sigma_t_of_s(s).unwrap() * (-law.optical_depth(s).unwrap()).exp();
            let pdf = law.pdf(s).unwrap();
            prop_assert!(
                (reconstructed - pdf).abs() <= 1e-8 * max_pdf,
                "round trip off at s = {}: {} vs {}",
                s,
                reconstructed,
                pdf
            );
        }
    }

    #[test]
    fn hazard_integral_matches_optical_depth(ms2 in 0.5f64..50.0) {
        // Independent route: numeric quadrature of the hazard equals the
        // closed-form optical depth.
        let law = PathLengthLaw::diffusion_matched(ms2).unwrap();
        let s_max = 5.0 * law.moments().unwrap().first;
        let quad = quadrature::integrate(|s| law.sigma_t_of_s(s).unwrap(), 0.0, s_max, 1e-12)
            .unwrap();
        let closed = law.optical_depth(s_max).unwrap();
        prop_assert!((quad - closed).abs() < 1e-9 * closed.max(1.0));
    }

    #[test]
    fn diffusion_matched_hazard_increasing_below_lambda(ms2 in 0.5f64..50.0) {
        let law = PathLengthLaw::diffusion_matched(ms2).unwrap();
        let lambda = (6.0 / ms2).sqrt();
        let mut prev = -1.0;
        for k in 0..=300 {
            let s = 30.0 / lambda * k as f64 / 300.0;
            let h = law.sigma_t_of_s(s).unwrap();
            prop_assert!(h > prev && h < lambda);
            prev = h;
        }
    }

    #[test]
    fn sampled_moments_track_analytic(law in arb_law(), seed in 0u64..1024) {
        let m = law.moments().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 20_000usize;
        let (mut sum, mut sum2, mut sum4) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let s = law.sample_free_path(&mut rng);
            sum += s;
            sum2 += s * s;
            sum4 += s.powi(4);
        }
        let nf = n as f64;
        let mean = sum / nf;
        let m2 = sum2 / nf;
        // Conservative bands: 5 standard errors with the empirical spread.
        let se_mean = ((m2 - mean * mean).max(0.0) / nf).sqrt();
        let se_m2 = ((sum4 / nf - m2 * m2).max(0.0) / nf).sqrt();
        prop_assert!((mean - m.first).abs() < 5.0 * se_mean + 1e-12,
            "mean {} vs {}", mean, m.first);
        prop_assert!((m2 - m.second).abs() < 5.0 * se_m2 + 1e-12,
            "second moment {} vs {}", m2, m.second);
    }

    #[test]
    fn tabulated_scaling_is_renormalized_away(scale in 0.1f64..40.0) {
        let base = PathLengthLaw::tabulated(&[(0.0, 0.2), (1.0, 1.0), (3.0, 0.1)]).unwrap();
        let scaled = PathLengthLaw::tabulated(&[
            (0.0, 0.2 * scale),
            (1.0, 1.0 * scale),
            (3.0, 0.1 * scale),
        ])
        .unwrap();
        for k in 0..=30 {
            let s = 3.0 * k as f64 / 30.0;
            let a = base.pdf(s).unwrap();
            let b = scaled.pdf(s).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn reduced_kernel_additive(law in arb_law(), a in 0.0f64..3.0, d1 in 0.01f64..3.0, d2 in 0.01f64..3.0) {
        let kernel = reduce_kernel(&law);
        let b = a + d1;
        let c = b + d2;
        let lhs = kernel.eval(a, b) + kernel.eval(b, c);
        let rhs = kernel.eval(a, c);
        if lhs.is_finite() && rhs.is_finite() {
            prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-12),
                "E({a},{b}) + E({b},{c}) = {lhs} vs E({a},{c}) = {rhs}");
        }
    }
}
