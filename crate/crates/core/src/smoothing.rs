//! Gaussian-kernel smoothing of a piecewise log-linear density.
//!
//! Convolving `exp(a + b t)` on `[l, r]` with a centred Gaussian of standard
//! deviation `lambda` gives a closed form in the Gaussian CDF, so density and
//! score are evaluated exactly, segment by segment, in log space. The CDF is
//! the kernel average of the base CDF, integrated by Gauss-Legendre panels
//! that break at the images of the knots.

use crate::error::{Error, Result};
use crate::lcmle::PiecewiseLogLinearDensity;
use crate::num::{compensated_sum, Real};
use crate::special::{
    erfcx, exprel, gauss_legendre, ln_norm_cdf_diff, ln_norm_pdf, ln_norm_sf, ln_one_minus_exp, norm_cdf,
    norm_sf,
};

/// `lambda = sqrt(s2 - sigma2)`, failing when the difference is not above `1e-12`.
pub fn bandwidth<T: Real>(base_variance: T, pooled_sample_variance: T) -> Result<T> {
    let squared = pooled_sample_variance - base_variance;
    if squared > T::lit(1e-12) {
        Ok(squared.sqrt())
    } else {
        Err(Error::NonPositiveBandwidth {
            squared: squared.as_f64(),
        })
    }
}

/// Like [`bandwidth`] but never below `floor`.
pub fn bandwidth_with_floor<T: Real>(base_variance: T, pooled_sample_variance: T, floor: T) -> T {
    let squared = pooled_sample_variance - base_variance;
    if squared > floor * floor {
        squared.sqrt()
    } else {
        floor
    }
}

/// A log-concave density convolved with `N(0, bandwidth^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedDensity<T> {
    base: PiecewiseLogLinearDensity<T>,
    bandwidth: T,
    cdf_at_knots: Vec<T>,
    sf_at_knots: Vec<T>,
    ln_total: T,
    mean: T,
    variance: T,
}

const MAX_QUANTILE_ITERATIONS: usize = 200;
/// Panels beyond this many kernel standard deviations carry no mass in `f64`.
const KERNEL_CUTOFF: f64 = 38.0;

impl<T: Real> SmoothedDensity<T> {
    pub fn new(base: PiecewiseLogLinearDensity<T>, bandwidth: T) -> Result<Self> {
        if !(bandwidth > T::zero() && bandwidth.is_finite()) {
            return Err(Error::NonPositiveBandwidth {
                squared: (bandwidth * bandwidth).as_f64(),
            });
        }
        let moments = base.moments();
        let knots = base.knots();
        let masses: Vec<T> = (0..knots.len() - 1)
            .map(|j| (knots[j + 1] - knots[j]) * base.segment_integrals(j).j)
            .collect();
        let total = compensated_sum(masses.iter().copied());
        let mut sf_at_knots = vec![T::zero(); knots.len()];
        let mut acc = T::zero();
        for j in (0..masses.len()).rev() {
            acc = acc + masses[j];
            sf_at_knots[j] = acc / total;
        }
        sf_at_knots[0] = T::one();
        Ok(SmoothedDensity {
            bandwidth,
            cdf_at_knots: moments.cdf_at_knots,
            sf_at_knots,
            ln_total: total.ln(),
            mean: moments.mean,
            variance: moments.variance + bandwidth * bandwidth,
            base,
        })
    }

    /// Smooths `base` with the bandwidth implied by a pooled sample variance.
    pub fn from_sample_variance(
        base: PiecewiseLogLinearDensity<T>,
        pooled_sample_variance: T,
    ) -> Result<Self> {
        let lambda = bandwidth(base.moments().variance, pooled_sample_variance)?;
        Self::new(base, lambda)
    }

    pub fn base(&self) -> &PiecewiseLogLinearDensity<T> {
        &self.base
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// Base variance plus the squared bandwidth.
    pub fn variance(&self) -> T {
        self.variance
    }

    /// Log of one segment's contribution to the density at `x`.
    fn ln_segment_term(&self, j: usize, x: T) -> T {
        let knots = self.base.knots();
        let phi = self.base.log_values();
        let b = self.base.slopes()[j];
        let lam = self.bandwidth;
        let (l, r) = (knots[j], knots[j + 1]);
        let shift = b * lam * lam;
        let alpha = (l - x - shift) / lam;
        let beta = (r - x - shift) / lam;
        let half = T::lit(0.5);
        if alpha >= T::zero() {
            let d = (x - l) / lam;
            phi[j] - half * d * d
                + (erfcx(alpha * T::FRAC_1_SQRT_2()) * half).ln()
                + ln_one_minus_exp(ln_norm_sf(beta) - ln_norm_sf(alpha))
        } else if beta <= T::zero() {
            let d = (x - r) / lam;
            phi[j + 1] - half * d * d
                + (erfcx(-beta * T::FRAC_1_SQRT_2()) * half).ln()
                + ln_one_minus_exp(ln_norm_sf(-alpha) - ln_norm_sf(-beta))
        } else {
            phi[j] + b * (x - l) + half * shift * b + ln_norm_cdf_diff(alpha, beta)
        }
    }

    /// Log-density and score `(log g)'` at `x`, sharing one pass over the segments.
    pub fn log_density_and_score(&self, x: T) -> (T, T) {
        let segs = self.base.slopes().len();
        let terms: Vec<T> = (0..segs).map(|j| self.ln_segment_term(j, x)).collect();
        let top = terms.iter().copied().fold(T::neg_infinity(), T::max);
        let sum = compensated_sum(terms.iter().map(|t| (*t - top).exp()));
        let ln_g = top + sum.ln();

        let slope_part = compensated_sum(
            terms
                .iter()
                .zip(self.base.slopes())
                .map(|(t, b)| *b * (*t - ln_g).exp()),
        );
        let knots = self.base.knots();
        let phi = self.base.log_values();
        let k = knots.len() - 1;
        let lam = self.bandwidth;
        let edge = |t: T, v: T| (v + ln_norm_pdf((x - t) / lam) - lam.ln() - ln_g).exp();
        let score = slope_part + edge(knots[0], phi[0]) - edge(knots[k], phi[k]);
        (ln_g - self.ln_total, score)
    }

    pub fn log_density(&self, x: T) -> T {
        self.log_density_and_score(x).0
    }

    pub fn density(&self, x: T) -> T {
        self.log_density(x).exp()
    }

    /// Derivative of the log-density.
    pub fn score(&self, x: T) -> T {
        self.log_density_and_score(x).1
    }

    /// Integrates the base CDF (or survival function when `upper`) against
    /// the kernel over the range where it is neither 0 nor 1.
    fn kernel_average(&self, x: T, upper: bool) -> T {
        let knots = self.base.knots();
        let phi = self.base.log_values();
        let slopes = self.base.slopes();
        let lam = self.bandwidth;
        let k = knots.len() - 1;
        let cutoff = T::lit(KERNEL_CUTOFF);
        // In z = (x - u) / lambda the base support maps to [z_lo, z_hi].
        let z_lo = (x - knots[k]) / lam;
        let z_hi = (x - knots[0]) / lam;
        let outside = if upper { norm_sf(z_hi) } else { norm_cdf(z_lo) };

        let mut pieces = Vec::new();
        for j in 0..k {
            let a = ((x - knots[j + 1]) / lam).max(-cutoff);
            let b = ((x - knots[j]) / lam).min(cutoff);
            if a >= b {
                continue;
            }
            let scale = (slopes[j] * lam).abs();
            let max_width = if scale > T::lit(2.0) {
                T::lit(2.0) / scale
            } else {
                T::one()
            };
            let panels = ((b - a) / max_width)
                .ceil()
                .to_usize()
                .unwrap_or(1)
                .clamp(1, 1000);
            let width = (b - a) / T::from_usize(panels).unwrap();
            let base_part = |z: T| {
                let u = x - lam * z;
                let v = if upper {
                    let s = knots[j + 1] - u;
                    self.sf_at_knots[j + 1] + (phi[j + 1] - self.ln_total).exp() * s * exprel(-slopes[j] * s)
                } else {
                    let s = u - knots[j];
                    self.cdf_at_knots[j] + (phi[j] - self.ln_total).exp() * s * exprel(slopes[j] * s)
                };
                v.min(T::one()) * (ln_norm_pdf(z)).exp()
            };
            for p in 0..panels {
                let lo = a + width * T::from_usize(p).unwrap();
                let hi = if p + 1 == panels { b } else { lo + width };
                pieces.push(gauss_legendre(base_part, lo, hi));
            }
        }
        pieces.push(outside);
        compensated_sum(pieces).min(T::one())
    }

    pub fn cdf(&self, x: T) -> T {
        self.kernel_average(x, false)
    }

    /// `1 - cdf(x)`, accurate in the upper tail.
    pub fn sf(&self, x: T) -> T {
        self.kernel_average(x, true)
    }

    /// Inverse CDF by bracketing and safeguarded Newton steps.
    pub fn quantile(&self, q: T) -> Result<T> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::QuantileOutOfRange(q.as_f64()));
        }
        // Residual increasing in x; the upper half works with the survival function.
        let upper = q > T::lit(0.5);
        let target = if upper { T::one() - q } else { q };
        let resid = |x: T| {
            if upper {
                target - self.sf(x)
            } else {
                self.cdf(x) - target
            }
        };
        let tol = T::tol(1e-12) * target;

        let (t1, tk) = self.base.support();
        let mut step = self.bandwidth + (tk - t1);
        let mut lo = t1 - self.bandwidth;
        while resid(lo) > T::zero() {
            lo = lo - step;
            step = step * T::lit(2.0);
        }
        let mut hi = tk + self.bandwidth;
        while resid(hi) < T::zero() {
            hi = hi + step;
            step = step * T::lit(2.0);
        }

        let mut x = (lo + hi) / T::lit(2.0);
        for _ in 0..MAX_QUANTILE_ITERATIONS {
            let r = resid(x);
            if r.abs() <= tol {
                return Ok(x);
            }
            if r > T::zero() {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo <= T::epsilon() * T::lit(4.0) * (T::one() + x.abs()) {
                return Ok(x);
            }
            let newton = x - r / self.density(x);
            x = if newton > lo && newton < hi && newton.is_finite() {
                newton
            } else {
                (lo + hi) / T::lit(2.0)
            };
        }
        Err(Error::NonConvergence {
            max_iterations: MAX_QUANTILE_ITERATIONS,
        })
    }
}

pub fn eval_density<T: Real>(s: &SmoothedDensity<T>, x: T) -> T {
    s.density(x)
}

pub fn eval_log_derivative<T: Real>(s: &SmoothedDensity<T>, x: T) -> T {
    s.score(x)
}

pub fn eval_cdf<T: Real>(s: &SmoothedDensity<T>, x: T) -> T {
    s.cdf(x)
}

pub fn quantile<T: Real>(s: &SmoothedDensity<T>, q: T) -> Result<T> {
    s.quantile(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcmle::{aggregate, fit_lcmle};
    use crate::quad::{integrate, QuadOptions};

    fn uniform(lam: f64) -> SmoothedDensity<f64> {
        SmoothedDensity::new(PiecewiseLogLinearDensity::uniform(0.0, 1.0).unwrap(), lam).unwrap()
    }

    fn tent() -> SmoothedDensity<f64> {
        let base =
            PiecewiseLogLinearDensity::normalized(vec![-2.0, -0.5, 0.5, 2.0], vec![-3.0, 0.0, 0.0, -3.0])
                .unwrap();
        SmoothedDensity::new(base, 0.4).unwrap()
    }

    fn skewed() -> SmoothedDensity<f64> {
        let obs = [-1.1, -0.3, -0.2, 0.0, 0.05, 0.4, 0.6, 1.3, 2.2, 3.9];
        let base = fit_lcmle(&aggregate(&obs).unwrap(), 1e-10).unwrap();
        SmoothedDensity::new(base, 0.35).unwrap()
    }

    /// Direct quadrature of the convolution integral.
    fn convolution(s: &SmoothedDensity<f64>, x: f64) -> f64 {
        let lam = s.bandwidth();
        let knots = s.base().knots();
        knots
            .windows(2)
            .map(|w| {
                integrate(
                    |t| s.base().density(t) * (-(x - t).powi(2) / (2.0 * lam * lam)).exp(),
                    w[0],
                    w[1],
                    QuadOptions::new(1e-300, 1e-14),
                )
                .value
            })
            .sum::<f64>()
            / (lam * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn bandwidth_formula() {
        assert!((bandwidth(1.5, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            bandwidth(1.0, 1.0),
            Err(Error::NonPositiveBandwidth { .. })
        ));
        assert_eq!(bandwidth_with_floor(1.0, 1.0, 1e-6), 1e-6);
        let s = skewed();
        let sigma2 = s.base().moments().variance;
        let lam = bandwidth(sigma2, sigma2 + 0.25).unwrap();
        assert!((lam * lam + sigma2 - (sigma2 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn uniform_matches_closed_form() {
        for sigma in [0.05, 0.3, 1.0] {
            let s = uniform(sigma);
            for i in 0..=60 {
                let x = -2.0 + 0.08 * i as f64;
                let want = norm_cdf((1.0 - x) / sigma) - norm_cdf(-x / sigma);
                let got = s.density(x);
                assert!((got - want).abs() <= 1e-14 + 1e-12 * want, "sigma={sigma} x={x}");
            }
        }
    }

    #[test]
    fn uniform_far_tail_is_relatively_accurate() {
        let s = uniform(1.0);
        // Phi(-29) - Phi(-30) computed from the asymptotic expansion.
        let want = crate::special::ln_norm_cdf_diff(-30.0f64, -29.0);
        assert!((s.log_density(30.0) - want).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for s in [skewed(), tent()] {
            for _ in 0..50 {
                let x: f64 = rng.random_range(-4.0..6.0);
                let want = convolution(&s, x);
                assert!((s.density(x) - want).abs() < 1e-8 * want.max(1e-3), "x={x}");
            }
        }
    }

    #[test]
    fn integrates_to_one() {
        for s in [uniform(0.2), tent(), skewed()] {
            let q = integrate(
                |x| s.density(x),
                -30.0,
                30.0,
                QuadOptions::new(1e-13, 1e-13).with_initial_pieces(60),
            );
            assert!((q.value - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn symmetric_base_gives_symmetric_density() {
        let s = tent();
        for i in 0..40 {
            let x = 0.1 * i as f64;
            assert!((s.density(x) - s.density(-x)).abs() < 1e-12);
        }
        assert!(s.score(0.0).abs() < 1e-10);
        assert!((s.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!(s.quantile(0.5).unwrap().abs() < 1e-9);
    }

    #[test]
    fn score_matches_finite_differences() {
        for s in [skewed(), tent(), uniform(0.5)] {
            for i in 0..100 {
                let x = -5.0 + 0.1 * i as f64;
                let h = 1e-6;
                let fd = (s.log_density(x + h) - s.log_density(x - h)) / (2.0 * h);
                assert!((s.score(x) - fd).abs() < 1e-5, "x={x}: {} vs {fd}", s.score(x));
            }
        }
    }

    #[test]
    fn score_has_gaussian_tail() {
        let s = uniform(1.0);
        let h = 1e-6;
        let fd = (s.log_density(10.0 + h) - s.log_density(10.0 - h)) / (2.0 * h);
        assert!((s.score(10.0) - fd).abs() < 1e-5);
        // Asymptotically -(x - 1) / lambda^2.
        assert!((s.score(10.0) + 9.0).abs() < 0.15);
        assert!((s.score(200.0) + 199.0).abs() / 199.0 < 1e-4);
    }

    #[test]
    fn score_is_non_increasing() {
        for s in [skewed(), tent(), uniform(0.1)] {
            let mut prev = f64::INFINITY;
            for i in 0..=2000 {
                let v = s.score(-10.0 + 0.01 * i as f64);
                assert!(v <= prev + 1e-9);
                prev = v;
            }
        }
    }

    #[test]
    fn density_is_positive() {
        // The density itself underflows far out; its logarithm stays finite.
        for s in [skewed(), tent()] {
            for i in 0..=1000 {
                let x = -50.0 + 0.1 * i as f64;
                let (ln_g, score) = s.log_density_and_score(x);
                assert!(ln_g.is_finite() && score.is_finite(), "x={x}");
            }
            assert!(s.density(-3.0) > 0.0);
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for s in [tent(), skewed()] {
            let opts = QuadOptions::new(1e-14, 1e-13).with_initial_pieces(60);
            let mean = integrate(|x| x * s.density(x), -30.0, 30.0, opts).value;
            let var = integrate(|x| (x - mean).powi(2) * s.density(x), -30.0, 30.0, opts).value;
            assert!((s.mean() - s.base().moments().mean).abs() < 1e-15);
            assert!((mean - s.mean()).abs() < 1e-9);
            assert!((var - s.variance()).abs() < 1e-8);
            assert!((s.variance() - s.base().moments().variance - s.bandwidth().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn cdf_matches_density_integral() {
        let s = skewed();
        let opts = QuadOptions::new(1e-15, 1e-14).with_initial_pieces(20);
        for x in [-4.0, -1.0, 0.0, 0.3, 1.7, 4.0, 6.0] {
            let want = integrate(|t| s.density(t), -30.0, x, opts).value;
            assert!((s.cdf(x) - want).abs() < 1e-12, "x={x}");
            assert!((s.cdf(x) + s.sf(x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cdf_limits() {
        for s in [skewed(), uniform(0.3)] {
            let sd = s.variance().sqrt();
            assert!(s.cdf(s.mean() - 40.0 * sd) < 1e-12);
            assert!((s.cdf(s.mean() + 40.0 * sd) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_is_strictly_increasing() {
        let s = tent();
        let mut prev = 0.0;
        for i in 0..=400 {
            let v = s.cdf(-4.0 + 0.02 * i as f64);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn quantile_round_trip() {
        for s in [skewed(), tent(), uniform(0.01)] {
            for q in [1e-9, 0.001, 0.01, 0.5, 0.99, 0.999, 1.0 - 1e-9] {
                let x = s.quantile(q).unwrap();
                assert!((s.cdf(x) - q).abs() < 1e-9, "q={q}");
                let rel = if q < 0.5 {
                    (s.cdf(x) - q) / q
                } else {
                    (s.sf(x) - (1.0 - q)) / (1.0 - q)
                };
                assert!(rel.abs() < 1e-8, "q={q} rel={rel}");
            }
            assert!(s.quantile(0.975).unwrap() > s.quantile(0.025).unwrap());
        }
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        let s = tent();
        assert_eq!(s.quantile(0.0), Err(Error::QuantileOutOfRange(0.0)));
        assert_eq!(s.quantile(1.0), Err(Error::QuantileOutOfRange(1.0)));
        assert!(s.quantile(f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let base = PiecewiseLogLinearDensity::uniform(0.0, 1.0).unwrap();
        assert!(SmoothedDensity::new(base.clone(), 0.0).is_err());
        assert!(SmoothedDensity::new(base, f64::NAN).is_err());
    }

    #[test]
    fn steep_slopes_stay_finite() {
        let base =
            PiecewiseLogLinearDensity::normalized(vec![0.0, 0.01, 5.0], vec![0.0, 0.0, -400.0]).unwrap();
        let s = SmoothedDensity::new(base, 0.02).unwrap();
        for i in 0..=300 {
            let x = -1.0 + 0.025 * i as f64;
            let (l, sc) = s.log_density_and_score(x);
            assert!(l.is_finite() && sc.is_finite(), "x={x}");
        }
        let x = s.quantile(0.3).unwrap();
        assert!((s.cdf(x) - 0.3).abs() < 1e-10);
    }
}
