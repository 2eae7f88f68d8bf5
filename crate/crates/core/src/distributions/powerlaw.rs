//! Truncated power law `P(x) ∝ (x + x0)^(-β) · exp(-x / κ)` on `(0, ∞)` and
//! its maximum-likelihood fit.

use rand::Rng;
use serde::Serialize;

use super::quadrature::integrate;
use crate::error::{validation, Error, Result};

/// Relative tolerance requested from the normalisation quadrature.
const QUAD_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedPowerLaw {
    pub delta_r0: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl TruncatedPowerLaw {
    pub fn new(delta_r0: f64, beta: f64, kappa: f64) -> Result<Self> {
        if !(delta_r0 > 0.0 && kappa > 0.0 && beta.is_finite()) {
            return Err(validation!(
                "truncated power law needs delta_r0 > 0, kappa > 0 and finite beta"
            ));
        }
        Ok(Self {
            delta_r0,
            beta,
            kappa,
        })
    }

    /// `ln ∫₀^∞ (x + x0)^(-β) e^(-x/κ) dx`.
    ///
    /// Substituting `x = x0 (e^y - 1)` gives
    /// `x0^(1-β) ∫₀^∞ exp((1-β) y - λ (e^y - 1)) dy` with `λ = x0/κ`, a smooth
    /// integrand whose support ends a few units past `ln(1/λ)`.
    pub fn ln_normalizer(&self) -> f64 {
        (1.0 - self.beta) * self.delta_r0.ln() + ln_reduced_integral(self.beta, self.delta_r0 / self.kappa)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        -self.beta * (x + self.delta_r0).ln() - x / self.kappa - self.ln_normalizer()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        let ln_z = self.ln_normalizer();
        samples
            .iter()
            .map(|&x| -self.beta * (x + self.delta_r0).ln() - x / self.kappa)
            .sum::<f64>()
            - samples.len() as f64 * ln_z
    }

    /// Probability mass on `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let ln_z = self.ln_normalizer();
        integrate(
            |x| (-self.beta * (x + self.delta_r0).ln() - x / self.kappa - ln_z).exp(),
            a,
            b,
            1e-10,
        )
    }

    /// Rejection sampler. For β > 1 the proposal is the Lomax law
    /// `∝ (x + x0)^(-β)` thinned by `e^(-x/κ)`; otherwise an exponential with
    /// scale κ thinned by `((x + x0)/x0)^(-β)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let v: f64 = rng.random();
            if self.beta > 1.0 {
                let x = self.delta_r0 * (u.powf(-1.0 / (self.beta - 1.0)) - 1.0);
                if x.is_finite() && v < (-x / self.kappa).exp() {
                    return x;
                }
            } else {
                let x = -self.kappa * u.ln();
                if v < ((x + self.delta_r0) / self.delta_r0).powf(-self.beta) {
                    return x;
                }
            }
        }
    }
}

fn ln_reduced_integral(beta: f64, lambda: f64) -> f64 {
    let a = 1.0 - beta;
    let g = |y: f64| a * y - lambda * y.exp_m1();
    let y_peak = if a > 0.0 { (a / lambda).ln().max(0.0) } else { 0.0 };
    let g_max = g(y_peak);
    let mut y_end = y_peak + 1.0;
    while g(y_end) > g_max - 60.0 {
        y_end += 1.0;
    }
    let j = integrate(|y| (g(y) - g_max).exp(), 0.0, y_end, QUAD_REL_TOL);
    g_max + j.ln()
}

/// Maximum-likelihood parameters for one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub delta_r0: f64,
    pub beta: f64,
    pub kappa: f64,
    pub log_likelihood: f64,
    pub n_samples: usize,
    /// Log-likelihood of the best coarse-grid point the refinement started from.
    pub grid_log_likelihood: f64,
    pub iterations: usize,
}

impl PowerLawFit {
    pub fn law(&self) -> TruncatedPowerLaw {
        TruncatedPowerLaw {
            delta_r0: self.delta_r0,
            beta: self.beta,
            kappa: self.kappa,
        }
    }
}

/// Search box, grid resolution and refinement limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub delta_r0_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub kappa_range: (f64, f64),
    pub grid_points: usize,
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub min_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            delta_r0_range: (0.01, 100.0),
            beta_range: (0.5, 3.0),
            kappa_range: (1.0, 1e4),
            grid_points: 20,
            max_iterations: 10_000,
            rel_tol: 1e-8,
            min_samples: 100,
        }
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    (0..n)
        .map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn fit_truncated_power_law(samples: &[f64]) -> Result<PowerLawFit> {
    fit_truncated_power_law_with(samples, &FitOptions::default())
}

/// Coarse log-grid search over (Δr₀, β, κ) followed by Nelder–Mead
/// refinement in `(ln Δr₀, β, ln κ)`.
pub fn fit_truncated_power_law_with(samples: &[f64], opts: &FitOptions) -> Result<PowerLawFit> {
    if samples.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(validation!("samples must be finite and non-negative"));
    }
    let n_pos = samples.iter().filter(|&&x| x > 0.0).count();
    if n_pos < opts.min_samples {
        return Err(validation!(
            "need at least {} positive samples, got {n_pos}",
            opts.min_samples
        ));
    }
    let n = samples.len() as f64;
    let sum_x: f64 = samples.iter().sum();
    let sum_ln = |x0: f64| samples.iter().map(|&x| (x + x0).ln()).sum::<f64>();
    let mean_ll = |x0: f64, beta: f64, kappa: f64, s_ln: f64| {
        let law = TruncatedPowerLaw {
            delta_r0: x0,
            beta,
            kappa,
        };
        (-beta * s_ln - sum_x / kappa) / n - law.ln_normalizer()
    };

    let x0s = log_grid(opts.delta_r0_range.0, opts.delta_r0_range.1, opts.grid_points);
    let betas = log_grid(opts.beta_range.0, opts.beta_range.1, opts.grid_points);
    let kappas = log_grid(opts.kappa_range.0, opts.kappa_range.1, opts.grid_points);
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for &x0 in &x0s {
        let s_ln = sum_ln(x0);
        for &beta in &betas {
            for &kappa in &kappas {
                let ll = mean_ll(x0, beta, kappa, s_ln);
                if ll > best.0 {
                    best = (ll, [x0, beta, kappa]);
                }
            }
        }
    }
    let grid_ll = best.0 * n;

    let objective = |t: &[f64; 3]| {
        let (x0, beta, kappa) = (t[0].exp(), t[1], t[2].exp());
        if !(beta > 0.0) || !(1e-12..=1e12).contains(&x0) || !(1e-12..=1e12).contains(&kappa) {
            return f64::INFINITY;
        }
        let v = -mean_ll(x0, beta, kappa, sum_ln(x0));
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let start = [best.1[0].ln(), best.1[1], best.1[2].ln()];
    let outcome = nelder_mead(objective, start, [0.5, 0.1, 0.5], opts.rel_tol, opts.max_iterations);
    let fit = |t: [f64; 3], f: f64, iterations| PowerLawFit {
        delta_r0: t[0].exp(),
        beta: t[1],
        kappa: t[2].exp(),
        log_likelihood: -f * n,
        n_samples: samples.len(),
        grid_log_likelihood: grid_ll,
        iterations,
    };
    match outcome {
        NmOutcome::Converged { x, f, iterations } => Ok(fit(x, f, iterations)),
        NmOutcome::Exhausted { x, f, iterations } => Err(Error::NonConvergence {
            iterations,
            best: Box::new(fit(x, f, iterations)),
        }),
    }
}

enum NmOutcome {
    Converged { x: [f64; 3], f: f64, iterations: usize },
    Exhausted { x: [f64; 3], f: f64, iterations: usize },
}

/// Nelder–Mead with restarts: converged once a fresh simplex around the
/// incumbent collapses without moving it by more than `tol` (relative).
fn nelder_mead(
    f: impl Fn(&[f64; 3]) -> f64,
    start: [f64; 3],
    step: [f64; 3],
    tol: f64,
    max_iter: usize,
) -> NmOutcome {
    let mut x_best = start;
    let mut f_best = f(&start);
    let mut iterations = 0;
    loop {
        let restart_from = x_best;
        let mut simplex: Vec<([f64; 3], f64)> = vec![(x_best, f_best)];
        for d in 0..3 {
            let mut v = x_best;
            v[d] += step[d];
            simplex.push((v, f(&v)));
        }
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[1..]
                .iter()
                .flat_map(|(v, _)| (0..3).map(move |d| (d, v[d])))
                .map(|(d, vd)| (vd - simplex[0].0[d]).abs() / simplex[0].0[d].abs().max(1.0))
                .fold(0.0, f64::max);
            if spread < tol {
                break;
            }
            if iterations >= max_iter {
                return NmOutcome::Exhausted {
                    x: simplex[0].0,
                    f: simplex[0].1,
                    iterations,
                };
            }
            iterations += 1;
            let centroid: [f64; 3] =
                std::array::from_fn(|d| simplex[..3].iter().map(|(v, _)| v[d]).sum::<f64>() / 3.0);
            let worst = simplex[3];
            let along = |t: f64| -> [f64; 3] {
                std::array::from_fn(|d| centroid[d] + t * (worst.0[d] - centroid[d]))
            };
            let xr = along(-1.0);
            let fr = f(&xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = f(&xe);
                simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[2].1 {
                simplex[3] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let x = along(-0.5);
                    (x, f(&x))
                } else {
                    let x = along(0.5);
                    (x, f(&x))
                };
                if fc < worst.1.min(fr) {
                    simplex[3] = (xc, fc);
                } else {
                    let b = simplex[0].0;
                    for item in simplex.iter_mut().skip(1) {
                        let v: [f64; 3] = std::array::from_fn(|d| b[d] + 0.5 * (item.0[d] - b[d]));
                        *item = (v, f(&v));
                    }
                }
            }
        }
        if simplex[0].1 <= f_best {
            x_best = simplex[0].0;
            f_best = simplex[0].1;
        }
        let moved = (0..3)
            .map(|d| (x_best[d] - restart_from[d]).abs() / restart_from[d].abs().max(1.0))
            .fold(0.0, f64::max);
        if moved < tol {
            return NmOutcome::Converged {
                x: x_best,
                f: f_best,
                iterations,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalizer_matches_closed_forms() {
        // β = 0: ∫ e^(-x/κ) = κ
        let law = TruncatedPowerLaw::new(0.7, 0.0, 12.0).unwrap();
        assert!((law.ln_normalizer() - 12f64.ln()).abs() < 1e-11);
        // β = 2, κ → ∞: ∫ (x + x0)^-2 = 1/x0
        let law = TruncatedPowerLaw::new(0.5, 2.0, 1e12).unwrap();
        assert!((law.ln_normalizer() - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn density_integrates_to_one() {
        let law = TruncatedPowerLaw::new(1.0, 1.62, 122.0).unwrap();
        let m = law.mass_between(0.0, 1e5);
        assert!((m - 1.0).abs() < 1e-9, "{m}");
    }

    #[test]
    fn sampler_matches_mass_per_decade() {
        let law = TruncatedPowerLaw::new(1.0, 1.62, 122.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..50_000).map(|_| law.sample(&mut rng)).collect();
        for (lo, hi) in [(0.0, 1.0), (1.0, 10.0), (10.0, 100.0), (100.0, 1000.0)] {
            let frac = xs.iter().filter(|&&x| x >= lo && x < hi).count() as f64 / xs.len() as f64;
            let expected = law.mass_between(lo, hi);
            assert!((frac - expected).abs() < 0.01, "[{lo},{hi}) {frac} vs {expected}");
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(fit_truncated_power_law(&[1.0; 50]), Err(Error::Validation(_))));
    }

    #[test]
    fn exhausted_refinement_carries_best() {
        let law = TruncatedPowerLaw::new(1.0, 1.5, 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..500).map(|_| law.sample(&mut rng)).collect();
        let opts = FitOptions {
            max_iterations: 3,
            ..Default::default()
        };
        match fit_truncated_power_law_with(&xs, &opts) {
            Err(Error::NonConvergence { best, iterations }) => {
                assert_eq!(iterations, 3);
                assert!(best.log_likelihood >= best.grid_log_likelihood);
            }
            other => panic!("{other:?}"),
        }
    }
}
