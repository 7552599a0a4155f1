//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

// Published coefficient tables are kept digit for digit.
#![allow(clippy::excessive_precision)]

use crate::num::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    /// Maximum number of subintervals kept by the bisection.
    pub max_intervals: usize,
    /// Number of equal pieces the range is cut into before adapting.
    pub initial_pieces: usize,
}

impl<T: Real> QuadOptions<T> {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol: T::tol(abs_tol),
            rel_tol: T::tol(rel_tol),
            max_intervals: 4000,
            initial_pieces: 1,
        }
    }

    pub fn with_initial_pieces(mut self, pieces: usize) -> Self {
        self.initial_pieces = pieces.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: T,
    /// `true` when the requested tolerance was met.
    pub converged: bool,
}

struct Piece<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod<T: Real>(f: &impl Fn(T) -> T, a: T, b: T) -> Piece<T> {
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    let fc = f(mid);
    let mut gauss = fc * T::lit(WG[3]);
    let mut kron = fc * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kron = kron + T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * s;
        }
    }
    Piece {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` by repeatedly bisecting the subinterval with
/// the largest error estimate.
pub fn integrate<T: Real>(f: impl Fn(T) -> T, a: T, b: T, opts: QuadOptions<T>) -> Quadrature<T> {
    if a == b {
        return Quadrature {
            value: T::zero(),
            error: T::zero(),
            converged: true,
        };
    }
    if b < a {
        let q = integrate(f, b, a, opts);
        return Quadrature { value: -q.value, ..q };
    }
    let k = opts.initial_pieces;
    let width = (b - a) / T::from_usize(k).unwrap();
    let mut pieces: Vec<Piece<T>> = (0..k)
        .map(|i| {
            let lo = a + width * T::from_usize(i).unwrap();
            let hi = if i + 1 == k { b } else { lo + width };
            kronrod(&f, lo, hi)
        })
        .collect();
    loop {
        let value: T = pieces.iter().map(|p| p.value).sum();
        let error: T = pieces.iter().map(|p| p.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Quadrature {
                value,
                error,
                converged: true,
            };
        }
        if pieces.len() >= opts.max_intervals {
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, p)| {
                if p.error > be {
                    (i, p.error)
                } else {
                    (bi, be)
                }
            });
        let p = pieces.swap_remove(worst);
        let mid = (p.a + p.b) / T::lit(2.0);
        if mid <= p.a || mid >= p.b {
            // Interval cannot be split further at this precision.
            pieces.push(Piece {
                error: T::zero(),
                ..p
            });
            continue;
        }
        pieces.push(kronrod(&f, p.a, mid));
        pieces.push(kronrod(&f, mid, p.b));
    }
}

/// Composite Simpson rule with `panels` (even) panels.
pub fn simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, panels: usize) -> T {
    let panels = panels + panels % 2;
    let h = (b - a) / T::from_usize(panels).unwrap();
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        acc = acc + w * f(a + h * T::from_usize(i).unwrap());
    }
    acc * h / T::lit(3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(
            |x: f64| x.powi(5) - 3.0 * x * x,
            -1.0,
            2.0,
            QuadOptions::new(1e-14, 1e-14),
        );
        assert!(q.converged);
        assert!((q.value - (63.0 / 6.0 - 9.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_mass() {
        let q = integrate(
            |x: f64| (-x * x / 2.0).exp(),
            -40.0,
            40.0,
            QuadOptions::new(1e-14, 1e-13),
        );
        assert!((q.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn step_function_converges() {
        let q = integrate(
            |x: f64| if x < 0.3 { 1.0 } else { 0.0 },
            0.0,
            1.0,
            QuadOptions::new(1e-10, 1e-10),
        );
        assert!(q.converged);
        assert!((q.value - 0.3).abs() < 1e-9);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let q = integrate(|x: f64| x, 1.0, 0.0, QuadOptions::new(1e-12, 1e-12));
        assert!((q.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn simpson_on_cubic_is_exact() {
        let v = simpson(|x: f64| x * x * x + x, 0.0, 2.0, 10);
        assert!((v - 6.0).abs() < 1e-13);
    }
}
