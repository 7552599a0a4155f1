//! Maximum-likelihood estimation of a log-concave density.
//!
//! The estimate's logarithm is piecewise affine with kinks at a subset of the
//! observations. [`fit_lcmle`] finds it with an active-set method: for a fixed
//! set of kink locations the likelihood is a smooth concave function of the
//! log-density values at those knots and is maximized by damped Newton steps;
//! a kink is added wherever the directional derivative towards a new concave
//! kink is positive and dropped when a Newton step would make it convex.

use crate::error::{Error, Result};
use crate::num::{compensated_sum, Real};
use crate::special::exprel;

/// Observations with exact duplicates merged into probability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample<T> {
    points: Vec<T>,
    weights: Vec<T>,
    raw_n: usize,
}

impl<T: Real> WeightedSample<T> {
    /// Builds a sample from strictly increasing points and positive weights
    /// summing to one.
    pub fn new(points: Vec<T>, weights: Vec<T>, raw_n: usize) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidSample("points and weights differ in length".into()));
        }
        if points.len() < 2 {
            return Err(Error::FewerThanTwoDistinctPoints);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidSample("non-finite point".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSample("points must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > T::zero())) {
            return Err(Error::InvalidSample("weights must be positive".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidSample(format!(
                "weights sum to {} instead of 1",
                total.as_f64()
            )));
        }
        Ok(WeightedSample {
            points,
            weights,
            raw_n,
        })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Number of observations before ties were merged.
    pub fn raw_n(&self) -> usize {
        self.raw_n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> T {
        compensated_sum(self.points.iter().zip(&self.weights).map(|(x, w)| *x * *w))
    }
}

/// Sorts `observations` and merges exact duplicates into weights.
pub fn aggregate<T: Real>(observations: &[T]) -> Result<WeightedSample<T>> {
    if observations.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSample("non-finite observation".into()));
    }
    let mut sorted = observations.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points: Vec<T> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for x in sorted {
        match points.last() {
            Some(last) if *last == x => *counts.last_mut().unwrap() += 1,
            _ => {
                points.push(x);
                counts.push(1);
            }
        }
    }
    if points.len() < 2 {
        return Err(Error::FewerThanTwoDistinctPoints);
    }
    let n = T::from_usize(observations.len()).unwrap();
    let weights = counts.iter().map(|&c| T::from_usize(c).unwrap() / n).collect();
    WeightedSample::new(points, weights, observations.len())
}

/// Integrals of `e^{(1-u) r + u s}` against the monomials that appear in the
/// likelihood, its derivatives and the segment moments, for `u` in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ExpLinear<T> {
    /// `int e`
    pub j: T,
    /// `int (1-u) e`, the derivative in `r`.
    pub dr: T,
    /// `int u e`, the derivative in `s`.
    pub ds: T,
    /// `int (1-u)^2 e`
    pub drr: T,
    /// `int u (1-u) e`
    pub drs: T,
    /// `int u^2 e`
    pub dss: T,
}

/// `int_0^1 u^p e^{u d} du` for `p = 0, 1, 2` and `d <= 0`.
fn monomial_exp_integrals<T: Real>(d: T) -> [T; 3] {
    if d > -T::one() {
        // Power series; 30 terms are far beyond double precision for |d| < 1.
        let mut out = [T::zero(); 3];
        let mut term = T::one();
        for k in 0..30 {
            let kf = T::from_usize(k).unwrap();
            for (p, o) in out.iter_mut().enumerate() {
                *o = *o + term / (kf + T::from_usize(p + 1).unwrap());
            }
            term = term * d / (kf + T::one());
        }
        out
    } else {
        let e = d.exp();
        let d2 = d * d;
        let two = T::lit(2.0);
        [
            d.exp_m1() / d,
            (e * (d - T::one()) + T::one()) / d2,
            (e * (d2 - two * d + two) - two) / (d2 * d),
        ]
    }
}

impl<T: Real> ExpLinear<T> {
    pub fn new(r: T, s: T) -> Self {
        if s <= r {
            let [k0, k1, k2] = monomial_exp_integrals(s - r);
            let scale = r.exp();
            ExpLinear {
                j: scale * k0,
                dr: scale * (k0 - k1),
                ds: scale * k1,
                drr: scale * (k0 - T::lit(2.0) * k1 + k2),
                drs: scale * (k1 - k2),
                dss: scale * k2,
            }
        } else {
            let [k0, k1, k2] = monomial_exp_integrals(r - s);
            let scale = s.exp();
            ExpLinear {
                j: scale * k0,
                dr: scale * k1,
                ds: scale * (k0 - k1),
                drr: scale * k2,
                drs: scale * (k1 - k2),
                dss: scale * (k0 - T::lit(2.0) * k1 + k2),
            }
        }
    }
}

/// A density whose logarithm is continuous, concave and affine between knots,
/// supported on `[knots[0], knots[k-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLogLinearDensity<T> {
    knots: Vec<T>,
    log_values: Vec<T>,
    slopes: Vec<T>,
}

/// Mean, variance and knot CDF values of a [`PiecewiseLogLinearDensity`].
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMoments<T> {
    pub mean: T,
    pub variance: T,
    pub cdf_at_knots: Vec<T>,
}

impl<T: Real> PiecewiseLogLinearDensity<T> {
    /// Validates knots and concavity but not normalization. Useful for
    /// evaluating a log-concave function that is not a probability density.
    pub fn from_raw_parts(knots: Vec<T>, log_values: Vec<T>) -> Result<Self> {
        if knots.len() != log_values.len() {
            return Err(Error::InvalidDensity(
                "knots and log-values differ in length".into(),
            ));
        }
        if knots.len() < 2 {
            return Err(Error::InvalidDensity("at least two knots are required".into()));
        }
        if knots.iter().chain(&log_values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity("non-finite knot or log-value".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDensity("knots must be strictly increasing".into()));
        }
        let slopes: Vec<T> = knots
            .windows(2)
            .zip(log_values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect();
        let slack = T::epsilon() * T::lit(8.0);
        for (j, s) in slopes.windows(2).enumerate() {
            if s[1] > s[0] + slack * (s[0].abs() + s[1].abs()) {
                return Err(Error::InvalidDensity(format!(
                    "log-density is not concave at knot {}",
                    j + 1
                )));
            }
        }
        Ok(PiecewiseLogLinearDensity {
            knots,
            log_values,
            slopes,
        })
    }

    /// Builds a density, requiring `int exp(phi) = 1` within `1e-8`.
    pub fn new(knots: Vec<T>, log_values: Vec<T>) -> Result<Self> {
        let d = Self::from_raw_parts(knots, log_values)?;
        let total = d.integral();
        if (total - T::one()).abs() > T::tol(1e-8) {
            return Err(Error::InvalidDensity(format!(
                "integrates to {} instead of 1",
                total.as_f64()
            )));
        }
        Ok(d)
    }

    /// Builds a density after shifting the log-values so it integrates to one.
    pub fn normalized(knots: Vec<T>, log_values: Vec<T>) -> Result<Self> {
        let d = Self::from_raw_parts(knots, log_values)?;
        let shift = d.integral().ln();
        let log_values = d.log_values.iter().map(|v| *v - shift).collect();
        Self::from_raw_parts(d.knots, log_values)
    }

    /// Uniform density on `[lo, hi]`.
    pub fn uniform(lo: T, hi: T) -> Result<Self> {
        let v = -(hi - lo).ln();
        Self::from_raw_parts(vec![lo, hi], vec![v, v])
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn log_values(&self) -> &[T] {
        &self.log_values
    }

    /// Slope of the log-density on each of the `k - 1` segments.
    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn support(&self) -> (T, T) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Index of the segment containing `x`, which must lie in the support.
    fn segment_of(&self, x: T) -> usize {
        let k = self.knots.len();
        let pos = self.knots.partition_point(|t| *t <= x);
        pos.clamp(1, k - 1) - 1
    }

    /// Log-density; `-inf` outside the support.
    pub fn log_density(&self, x: T) -> T {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return T::neg_infinity();
        }
        let j = self.segment_of(x);
        let (t0, t1) = (self.knots[j], self.knots[j + 1]);
        let (v0, v1) = (self.log_values[j], self.log_values[j + 1]);
        let u = (x - t0) / (t1 - t0);
        v0 + u * (v1 - v0)
    }

    pub fn density(&self, x: T) -> T {
        self.log_density(x).exp()
    }

    pub(crate) fn segment_integrals(&self, j: usize) -> ExpLinear<T> {
        ExpLinear::new(self.log_values[j], self.log_values[j + 1])
    }

    /// `int exp(phi)` over the support.
    pub fn integral(&self) -> T {
        compensated_sum(
            (0..self.slopes.len()).map(|j| (self.knots[j + 1] - self.knots[j]) * self.segment_integrals(j).j),
        )
    }

    /// Closed-form mean, variance and CDF at the knots.
    pub fn moments(&self) -> SegmentMoments<T> {
        let segs = self.slopes.len();
        let ints: Vec<ExpLinear<T>> = (0..segs).map(|j| self.segment_integrals(j)).collect();
        let widths: Vec<T> = self.knots.windows(2).map(|w| w[1] - w[0]).collect();
        let masses: Vec<T> = ints.iter().zip(&widths).map(|(e, h)| *h * e.j).collect();
        let total = compensated_sum(masses.iter().copied());

        let mut cdf_at_knots = Vec::with_capacity(segs + 1);
        let mut acc = T::zero();
        cdf_at_knots.push(acc);
        for m in &masses {
            acc = acc + *m;
            cdf_at_knots.push(acc / total);
        }
        *cdf_at_knots.last_mut().unwrap() = T::one();

        let mean = compensated_sum(
            (0..segs).map(|j| widths[j] * (self.knots[j] * ints[j].j + widths[j] * ints[j].ds)),
        ) / total;
        let two = T::lit(2.0);
        let variance = compensated_sum((0..segs).map(|j| {
            let a = self.knots[j] - mean;
            let h = widths[j];
            h * (a * a * ints[j].j + two * a * h * ints[j].ds + h * h * ints[j].dss)
        })) / total;
        SegmentMoments {
            mean,
            variance,
            cdf_at_knots,
        }
    }

    /// CDF given precomputed knot CDF values.
    pub(crate) fn cdf_with(&self, cdf_at_knots: &[T], x: T) -> T {
        let (lo, hi) = self.support();
        if x <= lo {
            return T::zero();
        }
        if x >= hi {
            return T::one();
        }
        let j = self.segment_of(x);
        let s = x - self.knots[j];
        (cdf_at_knots[j] + self.log_values[j].exp() * s * exprel(self.slopes[j] * s)).min(T::one())
    }

    pub fn cdf(&self, x: T) -> T {
        self.cdf_with(&self.moments().cdf_at_knots, x)
    }

    /// `sum_i w_i log f(x_i)`; `-inf` if a point lies outside the support.
    pub fn log_likelihood(&self, sample: &WeightedSample<T>) -> T {
        compensated_sum(
            sample
                .points()
                .iter()
                .zip(sample.weights())
                .map(|(x, w)| *w * self.log_density(*x)),
        )
    }

    /// The density of `-X` when `X` has this density.
    pub fn reflected(&self) -> Self {
        let knots = self.knots.iter().rev().map(|t| -*t).collect();
        let log_values = self.log_values.iter().rev().copied().collect();
        Self::from_raw_parts(knots, log_values).expect("reflection preserves validity")
    }
}

/// Evaluates `log f(x)`: linear interpolation inside the support, `-inf` outside.
pub fn eval_log_density<T: Real>(d: &PiecewiseLogLinearDensity<T>, x: T) -> T {
    d.log_density(x)
}

/// Mean, variance and knot CDF values by closed-form segment integrals.
pub fn segment_moments<T: Real>(d: &PiecewiseLogLinearDensity<T>) -> SegmentMoments<T> {
    d.moments()
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    /// Tolerance on the Newton gradient and on the KKT residuals.
    pub tol: T,
    /// Maximum number of knot insertions.
    pub max_iterations: usize,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            tol: T::tol(DEFAULT_TOLERANCE),
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// A fitted density with solver diagnostics.
#[derive(Debug, Clone)]
pub struct LcmleFit<T> {
    pub density: PiecewiseLogLinearDensity<T>,
    /// `sum_i w_i log f(x_i)` of the normalized estimate.
    pub log_likelihood: T,
    /// Number of active-set (knot insertion) iterations.
    pub iterations: usize,
    /// Penalized objective `sum_i w_i phi(x_i) - int exp(phi)` after every
    /// accepted Newton step.
    pub objective_trace: Vec<T>,
}

/// Log-concave MLE of a weighted sample.
pub fn fit_lcmle<T: Real>(sample: &WeightedSample<T>, tol: T) -> Result<PiecewiseLogLinearDensity<T>> {
    let opts = FitOptions {
        tol,
        ..FitOptions::default()
    };
    fit_lcmle_with(sample, &opts).map(|f| f.density)
}

/// Log-concave MLE with explicit options and diagnostics.
pub fn fit_lcmle_with<T: Real>(sample: &WeightedSample<T>, opts: &FitOptions<T>) -> Result<LcmleFit<T>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut solver = ActiveSet::new(sample.points(), sample.weights(), opts.tol);
    let mut iterations = 0;
    loop {
        solver.newton()?;
        match solver.most_violated_kkt() {
            Some(i) if iterations < opts.max_iterations => {
                solver.insert_knot(i);
                iterations += 1;
            }
            Some(_) => {
                return Err(Error::NonConvergence {
                    max_iterations: opts.max_iterations,
                })
            }
            None => break,
        }
    }
    let objective_trace = std::mem::take(&mut solver.trace);
    let density = solver.into_density()?;
    let log_likelihood = density.log_likelihood(sample);
    Ok(LcmleFit {
        density,
        log_likelihood,
        iterations,
        objective_trace,
    })
}

/// Working state of the active-set iteration.
struct ActiveSet<'a, T> {
    x: &'a [T],
    w: &'a [T],
    tol: T,
    /// Indices into `x` of the current knots; always contains both endpoints.
    knots: Vec<usize>,
    /// Log-density values at `knots`.
    theta: Vec<T>,
    /// Linear coefficients of the likelihood term in `theta`.
    coeffs: Vec<T>,
    trace: Vec<T>,
}

const MAX_NEWTON_STEPS: usize = 200;
const MAX_HALVINGS: usize = 60;

impl<'a, T: Real> ActiveSet<'a, T> {
    fn new(x: &'a [T], w: &'a [T], tol: T) -> Self {
        let n = x.len();
        let start = -(x[n - 1] - x[0]).ln();
        let mut s = ActiveSet {
            x,
            w,
            tol,
            knots: vec![0, n - 1],
            theta: vec![start, start],
            coeffs: Vec::new(),
            trace: Vec::new(),
        };
        s.update_coeffs();
        s
    }

    /// Splits each observation's weight between the two knots enclosing it.
    fn update_coeffs(&mut self) {
        let mut c = vec![T::zero(); self.knots.len()];
        for (s, pair) in self.knots.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let (xa, xb) = (self.x[a], self.x[b]);
            for i in a..b {
                let u = (self.x[i] - xa) / (xb - xa);
                c[s] = c[s] + self.w[i] * (T::one() - u);
                c[s + 1] = c[s + 1] + self.w[i] * u;
            }
        }
        *c.last_mut().unwrap() = *c.last().unwrap() + *self.w.last().unwrap();
        self.coeffs = c;
    }

    fn width(&self, s: usize) -> T {
        self.x[self.knots[s + 1]] - self.x[self.knots[s]]
    }

    fn objective(&self, theta: &[T]) -> T {
        let lin = compensated_sum(self.coeffs.iter().zip(theta).map(|(c, t)| *c * *t));
        let integral = compensated_sum(
            (0..theta.len() - 1).map(|s| self.width(s) * ExpLinear::new(theta[s], theta[s + 1]).j),
        );
        let v = lin - integral;
        if v.is_nan() {
            T::neg_infinity()
        } else {
            v
        }
    }

    /// Gradient and the (positive definite, tridiagonal) negative Hessian.
    fn derivatives(&self) -> (Vec<T>, Vec<T>, Vec<T>) {
        let p = self.theta.len();
        let mut grad = self.coeffs.clone();
        let mut diag = vec![T::zero(); p];
        let mut off = vec![T::zero(); p - 1];
        for s in 0..p - 1 {
            let h = self.width(s);
            let e = ExpLinear::new(self.theta[s], self.theta[s + 1]);
            grad[s] = grad[s] - h * e.dr;
            grad[s + 1] = grad[s + 1] - h * e.ds;
            diag[s] = diag[s] + h * e.drr;
            diag[s + 1] = diag[s + 1] + h * e.dss;
            off[s] = h * e.drs;
        }
        (grad, diag, off)
    }

    /// Slope change at each interior knot; feasibility requires all `<= 0`.
    fn kinks(&self, theta: &[T]) -> Vec<T> {
        let slope = |s: usize| (theta[s + 1] - theta[s]) / self.width(s);
        (1..theta.len() - 1).map(|a| slope(a) - slope(a - 1)).collect()
    }

    fn remove_knot(&mut self, pos: usize) {
        self.knots.remove(pos);
        self.theta.remove(pos);
        self.update_coeffs();
    }

    /// Maximizes the likelihood over functions with kinks at the current
    /// knots, keeping every kink concave. Knots whose kink would turn convex
    /// are dropped at the point where the kink vanishes.
    fn newton(&mut self) -> Result<()> {
        for _ in 0..MAX_NEWTON_STEPS {
            let (grad, diag, off) = self.derivatives();
            let gnorm = grad.iter().fold(T::zero(), |m, g| m.max(g.abs()));
            if gnorm <= self.tol {
                return Ok(());
            }
            let step = solve_tridiagonal(&diag, &off, &grad);

            let kinks = self.kinks(&self.theta);
            let dkinks = self.kinks(&step);
            let mut t_max = T::one();
            let mut blocking = None;
            for (a, (k, dk)) in kinks.iter().zip(&dkinks).enumerate() {
                if *dk > T::zero() {
                    let t = (-*k / *dk).max(T::zero());
                    if t < t_max {
                        t_max = t;
                        blocking = Some(a + 1);
                    }
                }
            }

            let current = self.objective(&self.theta);
            // Gains below this are invisible in the objective's rounding.
            let noise = T::epsilon() * T::lit(64.0) * (T::one() + current.abs());
            let decrement = compensated_sum(grad.iter().zip(&step).map(|(g, d)| *g * *d));
            let mut t = t_max;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<T> = self.theta.iter().zip(&step).map(|(v, d)| *v + t * *d).collect();
                let value = self.objective(&trial);
                if value >= current || (t * decrement <= noise && value.is_finite()) {
                    accepted = Some((trial, value));
                    break;
                }
                t = t / T::lit(2.0);
                blocking = None;
            }
            match accepted {
                Some((trial, value)) => {
                    self.theta = trial;
                    self.trace.push(value);
                    if let Some(pos) = blocking {
                        self.remove_knot(pos);
                        // Rounding can leave other kinks marginally convex.
                        while let Some(a) = self.kinks(&self.theta).iter().position(|k| *k > T::zero()) {
                            self.remove_knot(a + 1);
                        }
                    }
                }
                None => {
                    // No ascent left at working precision.
                    if gnorm <= self.tol.sqrt() {
                        return Ok(());
                    }
                    return Err(Error::NonConvergence {
                        max_iterations: MAX_NEWTON_STEPS,
                    });
                }
            }
        }
        Err(Error::NonConvergence {
            max_iterations: MAX_NEWTON_STEPS,
        })
    }

    /// Log-density at every observation by interpolation between knots.
    fn phi_at_points(&self) -> Vec<T> {
        let mut phi = Vec::with_capacity(self.x.len());
        for (s, pair) in self.knots.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let (xa, xb) = (self.x[a], self.x[b]);
            for i in a..b {
                let u = (self.x[i] - xa) / (xb - xa);
                phi.push(self.theta[s] + u * (self.theta[s + 1] - self.theta[s]));
            }
        }
        phi.push(*self.theta.last().unwrap());
        phi
    }

    /// Index of the non-knot observation with the largest positive directional
    /// derivative `int_{x_1}^{x_i} (F_hat - F_n)`, if it exceeds the tolerance.
    fn most_violated_kkt(&self) -> Option<usize> {
        let n = self.x.len();
        let phi = self.phi_at_points();
        let range = self.x[n - 1] - self.x[0];
        let mut is_knot = vec![false; n];
        for &k in &self.knots {
            is_knot[k] = true;
        }
        let mut f_hat = T::zero();
        let mut f_emp = T::zero();
        let mut int_hat = T::zero();
        let mut int_emp = T::zero();
        let mut best: Option<(usize, T)> = None;
        for i in 0..n - 1 {
            let h = self.x[i + 1] - self.x[i];
            let e = ExpLinear::new(phi[i], phi[i + 1]);
            f_emp = f_emp + self.w[i];
            int_hat = int_hat + h * f_hat + h * h * e.dr;
            int_emp = int_emp + h * f_emp;
            f_hat = f_hat + h * e.j;
            let resid = (int_hat - int_emp) / range;
            if !is_knot[i + 1] && resid > self.tol && best.is_none_or(|(_, r)| resid > r) {
                best = Some((i + 1, resid));
            }
        }
        best.map(|(i, _)| i)
    }

    fn insert_knot(&mut self, i: usize) {
        let pos = self.knots.partition_point(|&k| k < i);
        let (a, b) = (self.knots[pos - 1], self.knots[pos]);
        let u = (self.x[i] - self.x[a]) / (self.x[b] - self.x[a]);
        let v = self.theta[pos - 1] + u * (self.theta[pos] - self.theta[pos - 1]);
        self.knots.insert(pos, i);
        self.theta.insert(pos, v);
        self.update_coeffs();
    }

    fn into_density(mut self) -> Result<PiecewiseLogLinearDensity<T>> {
        // Kinks flat to within rounding carry no shape information.
        loop {
            let kinks = self.kinks(&self.theta);
            let flat = kinks.iter().enumerate().position(|(a, k)| {
                let scale = ((self.theta[a + 1] - self.theta[a]) / self.width(a)).abs()
                    + ((self.theta[a + 2] - self.theta[a + 1]) / self.width(a + 1)).abs();
                *k > -T::tol(1e-13) * (T::one() + scale)
            });
            match flat {
                Some(a) => self.remove_knot(a + 1),
                None => break,
            }
        }
        let knots = self.knots.iter().map(|&i| self.x[i]).collect();
        let raw = PiecewiseLogLinearDensity::from_raw_parts(knots, self.theta)?;
        let total = raw.integral();
        if (total - T::one()).abs() > T::tol(1e-8) {
            return Err(Error::NonConvergence {
                max_iterations: MAX_NEWTON_STEPS,
            });
        }
        PiecewiseLogLinearDensity::normalized(raw.knots, raw.log_values)
    }
}

/// Solves `A x = b` for symmetric positive definite tridiagonal `A` given by
/// its diagonal and off-diagonal.
fn solve_tridiagonal<T: Real>(diag: &[T], off: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    c[0] = if n > 1 { off[0] / denom } else { T::zero() };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] = x[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    fn fit(obs: &[f64]) -> PiecewiseLogLinearDensity<f64> {
        fit_lcmle(&aggregate(obs).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn aggregate_merges_ties() {
        let s = aggregate(&[1.0f64, 0.0, 1.0]).unwrap();
        assert_eq!(s.points(), &[0.0, 1.0]);
        assert!((s.weights()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.weights()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.raw_n(), 3);

        let s = aggregate(&[0.0, 1.0]).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn aggregate_rejects_degenerate_input() {
        assert_eq!(aggregate(&[5.0, 5.0]), Err(Error::FewerThanTwoDistinctPoints));
        assert_eq!(aggregate(&[5.0]), Err(Error::FewerThanTwoDistinctPoints));
        assert_eq!(aggregate::<f64>(&[]), Err(Error::FewerThanTwoDistinctPoints));
        assert!(matches!(
            aggregate(&[0.0, f64::NAN]),
            Err(Error::InvalidSample(_))
        ));
    }

    #[test]
    fn weighted_sample_validation() {
        assert!(WeightedSample::new(vec![0.0, 1.0], vec![0.5, 0.6], 2).is_err());
        assert!(WeightedSample::new(vec![1.0, 0.0], vec![0.5, 0.5], 2).is_err());
        assert!(WeightedSample::new(vec![0.0, 1.0], vec![1.0, 0.0], 2).is_err());
    }

    #[test]
    fn exp_linear_series_and_closed_form_agree() {
        // Straddle the switch at |d| = 1 and compare with quadrature.
        for (r, s) in [
            (0.3, -0.699_999),
            (0.3, -0.700_001),
            (-2.0, 5.0),
            (1.0, 1.0),
            (0.0, -40.0),
        ] {
            let e = ExpLinear::new(r, s);
            let q = |g: fn(f64) -> f64| {
                integrate(
                    |u: f64| g(u) * ((1.0 - u) * r + u * s).exp(),
                    0.0,
                    1.0,
                    QuadOptions::new(1e-15, 1e-15),
                )
                .value
            };
            let checks = [
                (e.j, q(|_| 1.0)),
                (e.dr, q(|u| 1.0 - u)),
                (e.ds, q(|u| u)),
                (e.drr, q(|u| (1.0 - u) * (1.0 - u))),
                (e.drs, q(|u| u * (1.0 - u))),
                (e.dss, q(|u| u * u)),
            ];
            for (got, want) in checks {
                assert!(
                    ((got - want) / want).abs() < 1e-13,
                    "r={r} s={s}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn two_points_give_uniform() {
        let d = fit(&[0.0, 1.0]);
        assert_eq!(d.knots(), &[0.0, 1.0]);
        for v in d.log_values() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn eval_log_density_examples() {
        let u = PiecewiseLogLinearDensity::uniform(0.0, 1.0).unwrap();
        assert_eq!(eval_log_density(&u, 0.5), 0.0);
        assert_eq!(eval_log_density(&u, 2.0), f64::NEG_INFINITY);
        let d =
            PiecewiseLogLinearDensity::from_raw_parts(vec![0.0, 1.0], vec![2f64.ln(), 0.5f64.ln()]).unwrap();
        assert!(eval_log_density(&d, 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_moments() {
        let m = segment_moments(&PiecewiseLogLinearDensity::uniform(0.0f64, 1.0).unwrap());
        assert!((m.mean - 0.5).abs() < 1e-15);
        assert!((m.variance - 1.0 / 12.0).abs() < 1e-15);
        let m = segment_moments(&PiecewiseLogLinearDensity::uniform(-1.0f64, 1.0).unwrap());
        assert!(m.mean.abs() < 1e-15);
        assert!((m.variance - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.cdf_at_knots, vec![0.0, 1.0]);
    }

    #[test]
    fn moments_match_quadrature() {
        let d = fit(&[-1.3, -0.4, 0.0, 0.1, 0.2, 0.9, 1.7, 2.8, 3.0]);
        let m = d.moments();
        let opts = QuadOptions::new(1e-14, 1e-14).with_initial_pieces(d.knots().len() * 4);
        let (lo, hi) = d.support();
        let mean = integrate(|x| x * d.density(x), lo, hi, opts).value;
        let second = integrate(|x| (x - mean) * (x - mean) * d.density(x), lo, hi, opts).value;
        assert!((m.mean - mean).abs() < 1e-9);
        assert!((m.variance - second).abs() < 1e-9);
        assert!(m.cdf_at_knots.windows(2).all(|w| w[0] <= w[1]));
        for (t, f) in d.knots().iter().zip(&m.cdf_at_knots) {
            let q = integrate(|x| d.density(x), lo, *t, opts).value;
            assert!((q - f).abs() < 1e-12);
            assert!((d.cdf(*t) - f).abs() < 1e-12);
        }
    }

    #[test]
    fn constructors_enforce_shape() {
        assert!(
            PiecewiseLogLinearDensity::from_raw_parts(vec![0.0, 1.0, 2.0], vec![0.0, -1.0, 0.0]).is_err()
        );
        assert!(PiecewiseLogLinearDensity::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        let d = PiecewiseLogLinearDensity::normalized(vec![0.0f64, 1.0, 3.0], vec![0.0, 1.0, 0.5]).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-14);
        assert!(PiecewiseLogLinearDensity::new(d.knots().to_vec(), d.log_values().to_vec()).is_ok());
    }

    #[test]
    fn reflection_negates_moments() {
        let d = fit(&[0.0, 0.3, 0.4, 1.5, 2.0, 4.0]);
        let r = d.reflected();
        assert!((r.moments().mean + d.moments().mean).abs() < 1e-12);
        assert!((r.log_density(-1.5) - d.log_density(1.5)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_sample_fit_is_concave_and_normalized() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let obs: Vec<f64> = (0..500)
            .map(|_| {
                let u1: f64 = rand::Rng::random::<f64>(&mut rng).max(1e-300);
                let u2: f64 = rand::Rng::random(&mut rng);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let sample = aggregate(&obs).unwrap();
        let fit = fit_lcmle_with(&sample, &FitOptions::default()).unwrap();
        let d = &fit.density;
        assert!((d.integral() - 1.0).abs() < 1e-12);
        assert!(d.slopes().windows(2).all(|s| s[1] <= s[0]));
        assert!((d.moments().mean - sample.mean()).abs() < 1e-9);
        // Steps with gains below rounding may move the objective by a few ulps.
        assert!(fit
            .objective_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-13 * (1.0 + w[0].abs())));
        assert!(d.knots().len() > 2);
    }

    #[test]
    fn invalid_tolerance_is_rejected() {
        let s = aggregate(&[0.0, 1.0, 3.0]).unwrap();
        assert!(matches!(fit_lcmle(&s, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let s = aggregate(&[-2.0, -1.0, -0.5, 0.0, 0.1, 0.5, 1.0, 3.0]).unwrap();
        let opts = FitOptions {
            max_iterations: 0,
            ..FitOptions::default()
        };
        assert_eq!(
            fit_lcmle_with(&s, &opts).unwrap_err(),
            Error::NonConvergence { max_iterations: 0 }
        );
    }

    #[test]
    fn single_precision_fit() {
        let obs: Vec<f32> = vec![-1.2, -0.7, -0.3, 0.0, 0.1, 0.4, 0.8, 1.9];
        let d = fit_lcmle(&aggregate(&obs).unwrap(), 1e-5f32).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-5);
        assert!((d.moments().mean - aggregate(&obs).unwrap().mean()).abs() < 1e-3);
    }
}
