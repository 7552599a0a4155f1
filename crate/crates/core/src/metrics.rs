//! Distances between distributions and Monte Carlo summaries.

use crate::num::Real;
use crate::quad::{integrate, QuadOptions};

fn options<T: Real>() -> QuadOptions<T> {
    let mut opts = QuadOptions::new(1e-10, 1e-8).with_initial_pieces(64);
    opts.max_intervals = 20_000;
    opts
}

/// Hellinger distance `H` with `H^2 = 1/2 int (sqrt f - sqrt g)^2` over `domain`.
pub fn hellinger<T: Real>(f: impl Fn(T) -> T, g: impl Fn(T) -> T, domain: (T, T)) -> T {
    let h2 = integrate(
        |x| {
            let d = f(x).max(T::zero()).sqrt() - g(x).max(T::zero()).sqrt();
            d * d
        },
        domain.0,
        domain.1,
        options(),
    )
    .value
        / T::lit(2.0);
    h2.max(T::zero()).min(T::one()).sqrt()
}

/// Total variation distance `1/2 int |f - g|` over `domain`.
pub fn total_variation<T: Real>(f: impl Fn(T) -> T, g: impl Fn(T) -> T, domain: (T, T)) -> T {
    let tv = integrate(|x| (f(x) - g(x)).abs(), domain.0, domain.1, options()).value / T::lit(2.0);
    tv.max(T::zero()).min(T::one())
}

/// First Wasserstein distance `int |F - G|` over `domain`, from the two CDFs.
pub fn wasserstein<T: Real>(cdf_f: impl Fn(T) -> T, cdf_g: impl Fn(T) -> T, domain: (T, T)) -> T {
    integrate(|x| (cdf_f(x) - cdf_g(x)).abs(), domain.0, domain.1, options())
        .value
        .max(T::zero())
}

/// Aggregates for one (scheme, sample size, estimator, truncation level) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub scheme: String,
    pub m: usize,
    pub n: usize,
    pub estimator: String,
    /// Truncation level; `None` for estimators without one.
    pub eta: Option<f64>,
    /// Successful replications.
    pub replications: usize,
    pub failures: usize,
    /// Sample variance (denominator `R - 1`) of the point estimates.
    pub variance: f64,
    /// `mn/N` times the mean squared error.
    pub scaled_mse: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
    /// Oracle variance over `variance`.
    pub efficiency: f64,
}

impl McSummary {
    pub fn labelled(mut self, scheme: &str, estimator: &str, eta: Option<f64>, failures: usize) -> Self {
        self.scheme = scheme.to_string();
        self.estimator = estimator.to_string();
        self.eta = eta;
        self.failures = failures;
        self
    }
}

/// Summarizes `(delta_hat, ci_low, ci_high)` triples against the true shift.
///
/// Statistics that need more replications than are available are NaN.
pub fn summarize(
    estimates: &[(f64, f64, f64)],
    truth: f64,
    m: usize,
    n: usize,
    oracle_variance: f64,
) -> McSummary {
    let r = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.0).sum::<f64>() / r;
    let variance = if estimates.len() >= 2 {
        estimates.iter().map(|e| (e.0 - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        f64::NAN
    };
    let scale = (m * n) as f64 / (m + n) as f64;
    let mse = estimates.iter().map(|e| (e.0 - truth).powi(2)).sum::<f64>() / r;
    let covered = estimates.iter().filter(|e| e.1 <= truth && truth <= e.2).count();
    McSummary {
        scheme: String::new(),
        m,
        n,
        estimator: String::new(),
        eta: None,
        replications: estimates.len(),
        failures: 0,
        variance,
        scaled_mse: scale * mse,
        coverage: covered as f64 / r,
        mean_ci_width: estimates.iter().map(|e| e.2 - e.1).sum::<f64>() / r,
        efficiency: oracle_variance / variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{norm_cdf, norm_pdf};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normal(mu: f64, sd: f64) -> impl Fn(f64) -> f64 {
        move |x| norm_pdf((x - mu) / sd) / sd
    }

    fn logistic(mu: f64, s: f64) -> impl Fn(f64) -> f64 {
        move |x| {
            let e = (-(x - mu) / s).exp();
            e / (s * (1.0 + e).powi(2))
        }
    }

    fn uniform(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
        move |x| {
            if (lo..=hi).contains(&x) {
                1.0 / (hi - lo)
            } else {
                0.0
            }
        }
    }

    const WIDE: (f64, f64) = (-40.0, 40.0);

    #[test]
    fn identical_densities_are_at_distance_zero() {
        assert!(hellinger(normal(0.3, 1.2), normal(0.3, 1.2), WIDE) < 1e-8);
        assert!(total_variation(normal(0.3, 1.2), normal(0.3, 1.2), WIDE) < 1e-12);
        assert!(wasserstein(norm_cdf::<f64>, norm_cdf::<f64>, WIDE) < 1e-12);
    }

    #[test]
    fn gaussian_hellinger_closed_form() {
        let want = (1.0 - (-1.0f64 / 8.0).exp()).sqrt();
        let got = hellinger(normal(0.0, 1.0), normal(1.0, 1.0), WIDE);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        assert!((got - 0.3428).abs() < 1e-4);
    }

    #[test]
    fn disjoint_uniforms_are_maximally_apart() {
        let (f, g) = (uniform(0.0, 1.0), uniform(2.0, 3.0));
        assert!((hellinger(&f, &g, (-1.0, 4.0)) - 1.0).abs() < 1e-8);
        assert!((total_variation(&f, &g, (-1.0, 4.0)) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn wasserstein_of_a_shift() {
        for c in [-2.5, 0.1, 3.0] {
            let got = wasserstein(norm_cdf::<f64>, |x| norm_cdf(x - c), WIDE);
            assert!((got - f64::abs(c)).abs() < 1e-7);
        }
    }

    #[test]
    fn wasserstein_of_empirical_cdf() {
        let ecdf = |x: f64| {
            if x < 0.0 {
                0.0
            } else if x < 1.0 {
                0.5
            } else {
                1.0
            }
        };
        let point = |x: f64| if x < 0.5 { 0.0 } else { 1.0 };
        assert!((wasserstein(ecdf, point, (-1.0, 2.0)) - 0.5).abs() < 1e-8);
    }

    fn random_density(rng: &mut ChaCha8Rng) -> Box<dyn Fn(f64) -> f64> {
        let mu = rng.random_range(-2.0..2.0);
        let s = rng.random_range(0.5..2.0);
        if rng.random::<bool>() {
            Box::new(normal(mu, s))
        } else {
            Box::new(logistic(mu, s))
        }
    }

    #[test]
    fn hellinger_total_variation_sandwich_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (f, g) = (random_density(&mut rng), random_density(&mut rng));
            let h = hellinger(&f, &g, WIDE);
            let tv = total_variation(&f, &g, WIDE);
            assert!(
                h * h <= tv + 1e-9 && tv <= 2f64.sqrt() * h + 1e-9,
                "h={h} tv={tv}"
            );
            assert!((h - hellinger(&g, &f, WIDE)).abs() < 1e-8);
            assert!((tv - total_variation(&g, &f, WIDE)).abs() < 1e-8);
        }
    }

    #[test]
    fn hellinger_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let (f, g, k) = (
                random_density(&mut rng),
                random_density(&mut rng),
                random_density(&mut rng),
            );
            let fg = hellinger(&f, &g, WIDE);
            let gk = hellinger(&g, &k, WIDE);
            let fk = hellinger(&f, &k, WIDE);
            assert!(fk <= fg + gk + 1e-7);
        }
    }

    #[test]
    fn summary_of_exact_estimates() {
        let s = summarize(&[(1.0, 0.5, 1.5), (1.0, 0.9, 1.1)], 1.0, 10, 10, 0.02);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.coverage, 1.0);
        assert_eq!(s.scaled_mse, 0.0);
        assert!((s.mean_ci_width - 0.6).abs() < 1e-15);
    }

    #[test]
    fn summary_arithmetic() {
        let s = summarize(&[(0.9, 0.0, 2.0), (1.1, 1.05, 2.0)], 1.0, 100, 100, 0.025);
        assert!((s.variance - 0.02).abs() < 1e-15);
        assert!((s.scaled_mse - 0.5).abs() < 1e-12);
        assert_eq!(s.coverage, 0.5);
        assert!((s.efficiency - 1.25).abs() < 1e-12);

        // Variance of {0, sqrt(0.05)} is 0.025.
        let eff = summarize(&[(0.0, -1.0, 1.0), (0.05f64.sqrt(), -1.0, 1.0)], 0.0, 4, 4, 0.02);
        assert!((eff.efficiency - 0.8).abs() < 1e-12, "{}", eff.efficiency);
    }

    #[test]
    fn mse_decomposes_into_variance_and_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let est: Vec<(f64, f64, f64)> = (0..37)
            .map(|_| {
                let d = 1.3 + rng.random_range(-0.4..0.4);
                (d, d - 0.2, d + 0.2)
            })
            .collect();
        let (m, n) = (30, 45);
        let s = summarize(&est, 1.0, m, n, 1.0);
        let r = est.len() as f64;
        let bias = est.iter().map(|e| e.0).sum::<f64>() / r - 1.0;
        let scale = (m * n) as f64 / (m + n) as f64;
        let via_identity = scale * ((r - 1.0) / r * s.variance + bias * bias);
        assert!((s.scaled_mse - via_identity).abs() < 1e-9);
        assert!(s.variance >= 0.0 && (0.0..=1.0).contains(&s.coverage));
    }

    #[test]
    fn summary_with_too_few_replications() {
        let s = summarize(&[(1.0, 0.0, 2.0)], 1.0, 5, 5, 1.0);
        assert!(s.variance.is_nan());
        assert_eq!(s.replications, 1);
        let s = summarize(&[], 1.0, 5, 5, 1.0);
        assert!(s.coverage.is_nan());
    }
}
