//! Data-generating schemes for simulation studies and their oracle estimators.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::median;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::shift::{half_width, ShiftEstimate, TwoSample, DEFAULT_CI_LEVEL};
use crate::special::{norm_cdf, norm_quantile};

/// Error distribution `g0` together with the true location and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Standard normal errors.
    Gaussian,
    /// Standard logistic errors.
    Logistic,
    /// Laplace errors with unit scale.
    Laplace,
    /// `X ~ Gamma(shape 4, scale 1/2)`, so the errors are that law minus its mean 2.
    Gamma,
}

const GAMMA_SHAPE: f64 = 4.0;
const GAMMA_SCALE: f64 = 0.5;
const GAMMA_MEAN: f64 = GAMMA_SHAPE * GAMMA_SCALE;

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Gaussian, Scheme::Logistic, Scheme::Laplace, Scheme::Gamma];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Gaussian => "gaussian",
            Scheme::Logistic => "logistic",
            Scheme::Laplace => "laplace",
            Scheme::Gamma => "gamma",
        }
    }

    pub fn mu0(self) -> f64 {
        match self {
            Scheme::Gamma => GAMMA_MEAN,
            _ => 0.0,
        }
    }

    pub fn delta0(self) -> f64 {
        1.0
    }

    /// Fisher information for location of `g0`.
    pub fn true_fisher_info(self) -> f64 {
        match self {
            Scheme::Gaussian => 1.0,
            Scheme::Logistic => 1.0 / 3.0,
            Scheme::Laplace => 1.0,
            Scheme::Gamma => 2.0,
        }
    }

    /// Variance of `g0`.
    pub fn error_variance(self) -> f64 {
        match self {
            Scheme::Gaussian => 1.0,
            Scheme::Logistic => PI * PI / 3.0,
            Scheme::Laplace => 2.0,
            Scheme::Gamma => GAMMA_SHAPE * GAMMA_SCALE * GAMMA_SCALE,
        }
    }

    /// `ln g0(z)`, where `g0` is the law of `X - mu0`.
    pub fn ln_density(self, z: f64) -> f64 {
        match self {
            Scheme::Gaussian => -z * z / 2.0 - 0.5 * (2.0 * PI).ln(),
            Scheme::Logistic => -z.abs() - 2.0 * (-z.abs()).exp().ln_1p(),
            Scheme::Laplace => -z.abs() - 2f64.ln(),
            Scheme::Gamma => {
                let u = z + GAMMA_MEAN;
                if u <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let k = GAMMA_SHAPE;
                (k - 1.0) * u.ln() - u / GAMMA_SCALE - k * GAMMA_SCALE.ln() - ln_factorial(k as u32 - 1)
            }
        }
    }

    pub fn density(self, z: f64) -> f64 {
        self.ln_density(z).exp()
    }

    /// CDF of `g0`.
    pub fn cdf(self, z: f64) -> f64 {
        match self {
            Scheme::Gaussian => norm_cdf(z),
            Scheme::Logistic => 1.0 / (1.0 + (-z).exp()),
            Scheme::Laplace => {
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Scheme::Gamma => {
                let u = (z + GAMMA_MEAN) / GAMMA_SCALE;
                if u <= 0.0 {
                    return 0.0;
                }
                // Integer shape: Erlang survival function.
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..GAMMA_SHAPE as u32 {
                    term *= u / k as f64;
                    sum += term;
                }
                1.0 - (-u).exp() * sum
            }
        }
    }

    /// Quantile function of `g0` for `p` in `(0, 1)`.
    pub fn quantile(self, p: f64) -> f64 {
        match self {
            Scheme::Gaussian => norm_quantile(p),
            Scheme::Logistic => (p / (1.0 - p)).ln(),
            Scheme::Laplace => {
                if p < 0.5 {
                    (2.0 * p).ln()
                } else {
                    -(2.0 * (1.0 - p)).ln()
                }
            }
            Scheme::Gamma => {
                let (mut lo, mut hi) = (-GAMMA_MEAN, 100.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// One draw from `g0`.
    pub fn draw_error<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Scheme::Gaussian => standard_normal(rng),
            Scheme::Logistic => {
                let u = open_uniform(rng);
                (u / (1.0 - u)).ln()
            }
            Scheme::Laplace => {
                let u = open_uniform(rng);
                if u < 0.5 {
                    (2.0 * u).ln()
                } else {
                    -(2.0 * (1.0 - u)).ln()
                }
            }
            Scheme::Gamma => gamma(rng, GAMMA_SHAPE) * GAMMA_SCALE - GAMMA_MEAN,
        }
    }

    /// Draws `m` X-values and then `n` Y-values.
    pub fn sample<R: Rng + ?Sized>(self, m: usize, n: usize, rng: &mut R) -> Result<TwoSample<f64>> {
        let mu = self.mu0();
        let x = (0..m).map(|_| mu + self.draw_error(rng)).collect();
        let y = (0..n)
            .map(|_| mu + self.delta0() + self.draw_error(rng))
            .collect();
        TwoSample::new(x, y)
    }

    /// Maximum-likelihood shift estimate with `g0` known.
    pub fn parametric_mle(self, ts: &TwoSample<f64>) -> Result<ShiftEstimate<f64>> {
        self.parametric_mle_at_level(ts, DEFAULT_CI_LEVEL)
    }

    pub fn parametric_mle_at_level(self, ts: &TwoSample<f64>, level: f64) -> Result<ShiftEstimate<f64>> {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let delta_hat = match self {
            Scheme::Gaussian => mean(ts.y()) - mean(ts.x()),
            Scheme::Laplace => median(ts.y()) - median(ts.x()),
            Scheme::Logistic | Scheme::Gamma => self.numerical_mle(ts)?,
        };
        let info = self.true_fisher_info();
        let h = half_width(info, ts.m(), ts.n(), level);
        Ok(ShiftEstimate {
            delta_hat,
            fisher_info: info,
            eta: 0.0,
            window: None,
            ci_low: delta_hat - h,
            ci_high: delta_hat + h,
            ci_level: level,
            m: ts.m(),
            n: ts.n(),
        })
    }

    fn numerical_mle(self, ts: &TwoSample<f64>) -> Result<f64> {
        let big_n = (ts.m() + ts.n()) as f64;
        let neg_loglik = |p: &[f64]| {
            let (mu, delta) = (p[0], p[1]);
            let lx: f64 = ts.x().iter().map(|x| self.ln_density(x - mu)).sum();
            let ly: f64 = ts.y().iter().map(|y| self.ln_density(y - mu - delta)).sum();
            -(lx + ly) / big_n
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut mu = mean(ts.x());
        let mut nu = mean(ts.y());
        if self == Scheme::Gamma {
            // The likelihood vanishes unless every observation exceeds its location minus 2.
            let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
            mu = mu.min(min(ts.x()) + GAMMA_MEAN - 0.1);
            nu = nu.min(min(ts.y()) + GAMMA_MEAN - 0.1);
        }
        let opts = NelderMeadOptions {
            tol: 1e-9,
            max_evaluations: 5000,
            initial_step: 0.1,
        };
        let fit = nelder_mead(neg_loglik, &[mu, nu - mu], opts);
        if !fit.converged || !fit.value.is_finite() {
            return Err(Error::OptimizerFailure {
                evaluations: fit.evaluations,
            });
        }
        Ok(fit.x[1])
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{s}`")))
    }
}

fn ln_factorial(k: u32) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Uniform on the open interval `(0, 1)` with 53 random bits.
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Box-Muller, keeping the cosine branch.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = open_uniform(rng);
    let u2 = open_uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Marsaglia-Tsang for shape at least 1, unit scale.
fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_uniform(rng);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}
