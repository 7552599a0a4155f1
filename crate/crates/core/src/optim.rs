//! Derivative-free minimization (Nelder-Mead).

use crate::num::Real;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions<T> {
    /// Convergence threshold on both simplex diameter and function spread.
    pub tol: T,
    pub max_evaluations: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        NelderMeadOptions {
            tol: T::tol(1e-9),
            max_evaluations: 5000,
            initial_step: T::lit(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `start`. Non-finite values are treated as `+inf`, so
/// infeasible regions can be encoded by returning NaN or infinity.
pub fn nelder_mead<T: Real>(f: impl Fn(&[T]) -> T, start: &[T], opts: NelderMeadOptions<T>) -> Minimum<T> {
    let dim = start.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[T]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };

    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] = p[i] + opts.initial_step;
        simplex.push(p);
    }
    let mut values: Vec<T> = simplex.iter().map(|p| eval(p)).collect();

    loop {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[dim];
        let spread = (worst - best).abs();
        let diameter = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        let scale = simplex[0].iter().fold(T::one(), |m, v| m.max(v.abs()));
        if best.is_finite() && spread <= opts.tol * (T::one() + best.abs()) && diameter <= opts.tol * scale {
            return Minimum {
                x: simplex.swap_remove(0),
                value: best,
                evaluations: evals.get(),
                converged: true,
            };
        }
        if evals.get() >= opts.max_evaluations {
            return Minimum {
                x: simplex.swap_remove(0),
                value: best,
                evaluations: evals.get(),
                converged: false,
            };
        }

        let centroid: Vec<T> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|p| p[j]).sum::<T>() / T::from_usize(dim).unwrap())
            .collect();
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| *c + t * (*w - *c))
                .collect()
        };

        let reflected = along(-T::one());
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-two);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[dim] {
            let c = along(-half);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(half);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        for i in 1..=dim {
            let shrunk: Vec<T> = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(p, b)| *b + half * (*p - *b))
                .collect();
            values[i] = eval(&shrunk);
            simplex[i] = shrunk;
        }
    }
}
