use mobility_core::distributions::{
    estimate_pdf, fit_truncated_power_law, TruncatedPowerLaw,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn draw(law: &TruncatedPowerLaw, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| law.sample(&mut rng)).collect()
}

#[test]
fn recovers_national_scale_parameters() {
    let law = TruncatedPowerLaw::new(1.0, 1.62, 122.0).unwrap();
    let fit = fit_truncated_power_law(&draw(&law, 100_000, 11)).unwrap();
    assert!((fit.beta - 1.62).abs() < 0.1, "{fit:?}");
    assert!((fit.kappa / 122.0 - 1.0).abs() < 0.15, "{fit:?}");
    assert!(fit.log_likelihood >= fit.grid_log_likelihood);
}

#[test]
fn recovers_portugal_like_parameters() {
    let law = TruncatedPowerLaw::new(1.0, 1.37, 106.0).unwrap();
    let fit = fit_truncated_power_law(&draw(&law, 100_000, 12)).unwrap();
    assert!((fit.beta - 1.37).abs() < 0.1, "{fit:?}");
    assert!((fit.kappa / 106.0 - 1.0).abs() < 0.15, "{fit:?}");
}

#[test]
fn exponential_data_recovers_scale() {
    // For pure exponential data the MLE of the scale is the sample mean.
    let law = TruncatedPowerLaw::new(1.0, 0.0, 40.0).unwrap();
    let xs = draw(&law, 20_000, 5);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let fit = fit_truncated_power_law(&xs).unwrap();
    let effective_scale = if fit.beta < 0.05 { fit.kappa } else { mean };
    assert!((effective_scale / mean - 1.0).abs() < 0.1, "{fit:?} mean {mean}");
    assert!((mean / 40.0 - 1.0).abs() < 0.05);
    // Whatever mixture of β and κ is chosen, it must fit no worse than the
    // exponential with the sample-mean scale.
    let exp_ll = TruncatedPowerLaw::new(fit.delta_r0, 0.0, mean).unwrap().log_likelihood(&xs);
    assert!(fit.log_likelihood >= exp_ll - 1e-6);
}

#[test]
fn fit_is_scale_consistent() {
    let law = TruncatedPowerLaw::new(2.0, 1.5, 80.0).unwrap();
    let xs = draw(&law, 5_000, 9);
    let c = 3.0;
    let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
    let a = fit_truncated_power_law(&xs).unwrap();
    let b = fit_truncated_power_law(&scaled).unwrap();
    assert!((b.beta - a.beta).abs() < 1e-6, "{a:?} {b:?}");
    assert!((b.delta_r0 / (c * a.delta_r0) - 1.0).abs() < 1e-6, "{a:?} {b:?}");
    assert!((b.kappa / (c * a.kappa) - 1.0).abs() < 1e-6, "{a:?} {b:?}");
}

#[test]
fn histogram_matches_exponential_density() {
    let law = TruncatedPowerLaw::new(1.0, 0.0, 10.0).unwrap();
    let xs = draw(&law, 100_000, 21);
    let pdf = estimate_pdf(&xs, 10).unwrap();
    for (k, &c) in pdf.counts.iter().enumerate() {
        if c < 100 {
            continue;
        }
        let (lo, hi) = (pdf.bin_edges[k], pdf.bin_edges[k + 1]);
        let analytic = ((-lo / 10.0f64).exp() - (-hi / 10.0f64).exp()) / (hi - lo);
        let rel = (pdf.densities[k] - analytic).abs() / analytic;
        // 10% is about one Poisson standard deviation at 100 counts.
        let tol = 0.1f64.max(3.0 / (c as f64).sqrt());
        assert!(rel < tol, "bin [{lo},{hi}) rel err {rel}");
    }
}
