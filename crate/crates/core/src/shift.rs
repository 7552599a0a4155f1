//! One-step estimation of the location shift between two samples.
//!
//! Both samples are centred by their own means, the residuals are pooled, and
//! the smoothed log-concave fit of the pool supplies the score used in a
//! single Newton-type correction of the difference of means.

use crate::error::{Error, Result};
use crate::lcmle::{aggregate, fit_lcmle, DEFAULT_TOLERANCE};
use crate::num::{compensated_sum, Real};
use crate::quad::{integrate, QuadOptions};
use crate::smoothing::{bandwidth, SmoothedDensity};
use crate::special::{norm_quantile, two_sided_z};

/// Tail mass left out of every integral over the whole line.
pub const EFFECTIVE_TAIL: f64 = 1e-9;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

/// The X sample (location `mu`) and Y sample (location `mu + delta`).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSample<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Real> TwoSample<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        for (name, v) in [("x", &x), ("y", &y)] {
            if v.len() < 2 {
                return Err(Error::InvalidSample(format!(
                    "{name} needs at least two observations"
                )));
            }
            if v.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!(
                    "{name} contains a non-finite value"
                )));
            }
        }
        Ok(TwoSample { x, y })
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// The samples with roles exchanged.
    pub fn swapped(&self) -> Self {
        TwoSample {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreliminaryEstimates<T> {
    /// Mean of the X sample.
    pub mu_bar: T,
    /// Difference of sample means.
    pub delta_bar: T,
    /// `x - mu_bar` followed by `y - mu_bar - delta_bar`.
    pub pooled_pseudo: Vec<T>,
    /// `sum(pseudo^2) / (N - 1)`.
    pub s_sq: T,
    pub m: usize,
    pub n: usize,
}

impl<T: Real> PreliminaryEstimates<T> {
    pub fn x_part(&self) -> &[T] {
        &self.pooled_pseudo[..self.m]
    }

    pub fn y_part(&self) -> &[T] {
        &self.pooled_pseudo[self.m..]
    }
}

fn sample_mean<T: Real>(v: &[T]) -> T {
    compensated_sum(v.iter().copied()) / T::from_usize(v.len()).unwrap()
}

pub fn preliminary<T: Real>(ts: &TwoSample<T>) -> PreliminaryEstimates<T> {
    let mu_bar = sample_mean(&ts.x);
    let y_bar = sample_mean(&ts.y);
    let delta_bar = y_bar - mu_bar;
    let pooled_pseudo: Vec<T> =
        ts.x.iter()
            .map(|v| *v - mu_bar)
            .chain(ts.y.iter().map(|v| *v - y_bar))
            .collect();
    let big_n = pooled_pseudo.len();
    let s_sq = compensated_sum(pooled_pseudo.iter().map(|p| *p * *p)) / T::from_usize(big_n - 1).unwrap();
    PreliminaryEstimates {
        mu_bar,
        delta_bar,
        pooled_pseudo,
        s_sq,
        m: ts.m(),
        n: ts.n(),
    }
}

/// Log-concave fit of the pooled pseudo-observations smoothed with the
/// variance-matching bandwidth.
pub fn fit_pooled_smoothed<T: Real>(pre: &PreliminaryEstimates<T>) -> Result<SmoothedDensity<T>> {
    let base = fit_lcmle(&aggregate(&pre.pooled_pseudo)?, T::tol(DEFAULT_TOLERANCE))?;
    let lambda = bandwidth(base.moments().variance, pre.s_sq)?;
    SmoothedDensity::new(base, lambda)
}

/// As [`fit_pooled_smoothed`], but falls back to a bandwidth of `floor` when
/// the variance gap is not positive. The flag reports whether it did.
pub fn fit_pooled_smoothed_with_floor<T: Real>(
    pre: &PreliminaryEstimates<T>,
    floor: T,
) -> Result<(SmoothedDensity<T>, bool)> {
    let base = fit_lcmle(&aggregate(&pre.pooled_pseudo)?, T::tol(DEFAULT_TOLERANCE))?;
    match bandwidth(base.moments().variance, pre.s_sq) {
        Ok(lambda) => Ok((SmoothedDensity::new(base, lambda)?, false)),
        Err(Error::NonPositiveBandwidth { .. }) => Ok((SmoothedDensity::new(base, floor)?, true)),
        Err(e) => Err(e),
    }
}

fn check_eta<T: Real>(eta: T) -> Result<()> {
    if eta >= T::zero() && eta < T::lit(0.5) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "truncation level {} outside [0, 0.5)",
            eta.as_f64()
        )))
    }
}

/// Quantile window `[G^-1(eta), G^-1(1 - eta)]`; levels below the effective
/// tail mass use the effective tail.
pub fn truncation_window<T: Real>(s: &SmoothedDensity<T>, eta: T) -> Result<(T, T)> {
    check_eta(eta)?;
    let tail = eta.max(T::lit(EFFECTIVE_TAIL));
    Ok((s.quantile(tail)?, s.quantile(T::one() - tail)?))
}

/// `int score^2 g` over the truncation window (the effective support when `eta = 0`).
pub fn fisher_info<T: Real>(s: &SmoothedDensity<T>, eta: T) -> Result<T> {
    let (lo, hi) = truncation_window(s, eta)?;
    let opts = QuadOptions::new(0.0, 1e-10).with_initial_pieces(16);
    let q = integrate(
        |x| {
            let (ln_g, score) = s.log_density_and_score(x);
            score * score * ln_g.exp()
        },
        lo,
        hi,
        opts,
    );
    if !q.converged {
        return Err(Error::NonConvergence {
            max_iterations: opts.max_intervals,
        });
    }
    if !(q.value >= T::lit(1e-12)) {
        return Err(Error::DegenerateInformation(q.value.as_f64()));
    }
    Ok(q.value)
}

/// Score, information and truncation window of an error density.
pub trait ScoreModel<T: Real> {
    fn score(&self, x: T) -> T;
    fn information(&self, eta: T) -> Result<T>;
    fn window(&self, eta: T) -> Result<(T, T)>;
}

impl<T: Real> ScoreModel<T> for SmoothedDensity<T> {
    fn score(&self, x: T) -> T {
        SmoothedDensity::score(self, x)
    }

    fn information(&self, eta: T) -> Result<T> {
        fisher_info(self, eta)
    }

    fn window(&self, eta: T) -> Result<(T, T)> {
        truncation_window(self, eta)
    }
}

/// Exact standard Gaussian errors: score `-x`, information 1 untruncated.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardGaussian;

impl<T: Real> ScoreModel<T> for StandardGaussian {
    fn score(&self, x: T) -> T {
        -x
    }

    fn information(&self, eta: T) -> Result<T> {
        check_eta(eta)?;
        if eta == T::zero() {
            return Ok(T::one());
        }
        // int_{-z}^{z} x^2 phi(x) dx = (2 Phi(z) - 1) - 2 z phi(z)
        let z = -norm_quantile(eta);
        let pdf = (-z * z / T::lit(2.0)).exp() / (T::TAU()).sqrt();
        Ok(T::one() - T::lit(2.0) * eta - T::lit(2.0) * z * pdf)
    }

    fn window(&self, eta: T) -> Result<(T, T)> {
        check_eta(eta)?;
        let z = -norm_quantile(eta.max(T::lit(EFFECTIVE_TAIL)));
        Ok((-z, z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftEstimate<T> {
    pub delta_hat: T,
    pub fisher_info: T,
    pub eta: T,
    /// Truncation quantiles; `None` for the untruncated estimator.
    pub window: Option<(T, T)>,
    pub ci_low: T,
    pub ci_high: T,
    pub ci_level: T,
    pub m: usize,
    pub n: usize,
}

impl<T: Real> ShiftEstimate<T> {
    pub fn ci_width(&self) -> T {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, truth: T) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }
}

/// Half-width `z * sqrt((N / (m n)) / info)`.
pub fn half_width<T: Real>(info: T, m: usize, n: usize, level: T) -> T {
    let (m, n) = (T::from_usize(m).unwrap(), T::from_usize(n).unwrap());
    two_sided_z(level) * ((m + n) / (m * n) / info).sqrt()
}

fn check_level<T: Real>(level: T) -> Result<()> {
    if level > T::zero() && level < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "confidence level {} outside (0, 1)",
            level.as_f64()
        )))
    }
}

/// Shape-constrained one-step estimator at truncation level `eta` with a 95% interval.
pub fn one_step<T: Real>(ts: &TwoSample<T>, eta: T) -> Result<ShiftEstimate<T>> {
    one_step_at_level(ts, eta, T::lit(DEFAULT_CI_LEVEL))
}

pub fn one_step_at_level<T: Real>(ts: &TwoSample<T>, eta: T, level: T) -> Result<ShiftEstimate<T>> {
    check_eta(eta)?;
    check_level(level)?;
    let pre = preliminary(ts);
    let smoothed = fit_pooled_smoothed(&pre)?;
    one_step_with_model(&pre, &smoothed, eta, level)
}

/// One-step correction of `delta_bar` using an arbitrary score model.
///
/// For `eta > 0` an observation contributes only if its pseudo-value lies in
/// the closed window; the sums are still divided by the full sample sizes.
pub fn one_step_with_model<T: Real, M: ScoreModel<T> + ?Sized>(
    pre: &PreliminaryEstimates<T>,
    model: &M,
    eta: T,
    level: T,
) -> Result<ShiftEstimate<T>> {
    check_eta(eta)?;
    check_level(level)?;
    let info = model.information(eta)?;
    if !(info > T::zero()) {
        return Err(Error::DegenerateInformation(info.as_f64()));
    }
    let window = if eta > T::zero() {
        Some(model.window(eta)?)
    } else {
        None
    };
    let inside = |v: &T| window.is_none_or(|(lo, hi)| lo <= *v && *v <= hi);

    let mut parts = [T::zero(); 2];
    for (k, (name, values)) in [("x", pre.x_part()), ("y", pre.y_part())].into_iter().enumerate() {
        let kept: Vec<T> = values
            .iter()
            .filter(|v| inside(v))
            .map(|v| model.score(*v))
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyTruncationWindow { sample: name });
        }
        parts[k] = compensated_sum(kept) / T::from_usize(values.len()).unwrap();
    }
    let delta_hat = pre.delta_bar + (parts[0] - parts[1]) / info;
    let h = half_width(info, pre.m, pre.n, level);
    Ok(ShiftEstimate {
        delta_hat,
        fisher_info: info,
        eta,
        window,
        ci_low: delta_hat - h,
        ci_high: delta_hat + h,
        ci_level: level,
        m: pre.m,
        n: pre.n,
    })
}

/// Difference of means with a pooled-variance interval.
pub fn diff_of_means<T: Real>(ts: &TwoSample<T>) -> ShiftEstimate<T> {
    diff_of_means_at_level(ts, T::lit(DEFAULT_CI_LEVEL))
}

/// `fisher_info` is reported as the reciprocal pooled variance.
pub fn diff_of_means_at_level<T: Real>(ts: &TwoSample<T>, level: T) -> ShiftEstimate<T> {
    let pre = preliminary(ts);
    let dof = T::from_usize(pre.m + pre.n - 2).unwrap();
    let var = pre.s_sq * T::from_usize(pre.m + pre.n - 1).unwrap() / dof;
    let (m, n) = (T::from_usize(pre.m).unwrap(), T::from_usize(pre.n).unwrap());
    let h = two_sided_z(level) * (var * (T::one() / m + T::one() / n)).sqrt();
    ShiftEstimate {
        delta_hat: pre.delta_bar,
        fisher_info: T::one() / var,
        eta: T::zero(),
        window: None,
        ci_low: pre.delta_bar - h,
        ci_high: pre.delta_bar + h,
        ci_level: level,
        m: pre.m,
        n: pre.n,
    }
}
