//! Gaussian special functions.
//!
//! `erfc`/`erfcx` follow W. J. Cody's rational Chebyshev approximations
//! (relative error near machine precision over the whole real line), and
//! `norm_quantile` is Wichura's AS 241 (`PPND16`). Log-space variants are
//! provided because the smoothed density is evaluated far into the tails.

// Published coefficient tables are kept digit for digit.
#![allow(clippy::excessive_precision)]

use crate::num::Real;

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_21e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const ERF_C: [f64; 9] = [
    5.641_884_969_886_700_89e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_467_25e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_286_95;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;

/// `erf(y)` for `|y| <= 0.46875`.
fn erf_small<T: Real>(y: T) -> T {
    let ysq = y * y;
    let mut num = T::lit(ERF_A[4]) * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + T::lit(ERF_A[i])) * ysq;
        den = (den + T::lit(ERF_B[i])) * ysq;
    }
    y * (num + T::lit(ERF_A[3])) / (den + T::lit(ERF_B[3]))
}

/// `exp(y^2) erfc(y)` for `y > 0.46875`.
fn erfcx_large<T: Real>(y: T) -> T {
    if y <= T::lit(4.0) {
        let mut num = T::lit(ERF_C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + T::lit(ERF_C[i])) * y;
            den = (den + T::lit(ERF_D[i])) * y;
        }
        (num + T::lit(ERF_C[7])) / (den + T::lit(ERF_D[7]))
    } else {
        let ysq = (y * y).recip();
        let mut num = T::lit(ERF_P[5]) * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + T::lit(ERF_P[i])) * ysq;
            den = (den + T::lit(ERF_Q[i])) * ysq;
        }
        let r = ysq * (num + T::lit(ERF_P[4])) / (den + T::lit(ERF_Q[4]));
        (T::lit(FRAC_1_SQRT_PI) - r) / y
    }
}

/// `exp(-y^2)` computed with the split that keeps full relative accuracy.
fn exp_neg_sq<T: Real>(y: T) -> T {
    let sixteen = T::lit(16.0);
    let ysq = (y * sixteen).trunc() / sixteen;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx<T: Real>(x: T) -> T {
    let y = x.abs();
    let pos = if y <= T::lit(0.46875) {
        (y * y).exp() * (T::one() - erf_small(y))
    } else {
        erfcx_large(y)
    };
    if x < T::zero() {
        T::lit(2.0) * (x * x).exp() - pos
    } else {
        pos
    }
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    let y = x.abs();
    let pos = if y <= T::lit(0.46875) {
        T::one() - erf_small(y)
    } else {
        exp_neg_sq(y) * erfcx_large(y)
    };
    if x < T::zero() {
        T::lit(2.0) - pos
    } else {
        pos
    }
}

#[inline]
pub fn norm_pdf<T: Real>(z: T) -> T {
    ln_norm_pdf(z).exp()
}

#[inline]
pub fn ln_norm_pdf<T: Real>(z: T) -> T {
    -z * z / T::lit(2.0) - T::lit(LN_SQRT_2PI)
}

/// Standard Gaussian CDF.
pub fn norm_cdf<T: Real>(z: T) -> T {
    erfc(-z * T::FRAC_1_SQRT_2()) / T::lit(2.0)
}

/// Standard Gaussian survival function `1 - Phi(z)`.
pub fn norm_sf<T: Real>(z: T) -> T {
    erfc(z * T::FRAC_1_SQRT_2()) / T::lit(2.0)
}

/// `ln(1 - Phi(z))`, accurate in the far upper tail.
pub fn ln_norm_sf<T: Real>(z: T) -> T {
    if z >= T::zero() {
        (erfcx(z * T::FRAC_1_SQRT_2()) / T::lit(2.0)).ln() - z * z / T::lit(2.0)
    } else {
        (-norm_sf(-z)).ln_1p()
    }
}

/// `ln Phi(z)`, accurate in the far lower tail.
#[inline]
pub fn ln_norm_cdf<T: Real>(z: T) -> T {
    ln_norm_sf(-z)
}

/// `ln(Phi(b) - Phi(a))` for `a <= b`; `-inf` when the difference underflows.
pub fn ln_norm_cdf_diff<T: Real>(a: T, b: T) -> T {
    debug_assert!(a <= b);
    if a >= T::zero() {
        let la = ln_norm_sf(a);
        let lb = ln_norm_sf(b);
        la + ln_one_minus_exp(lb - la)
    } else if b <= T::zero() {
        let lb = ln_norm_sf(-b);
        let la = ln_norm_sf(-a);
        lb + ln_one_minus_exp(la - lb)
    } else if b - a < T::lit(0.5) {
        gauss_legendre(norm_pdf, a, b).ln()
    } else {
        (T::one() - norm_sf(b) - norm_sf(-a)).ln()
    }
}

/// `ln(1 - e^d)` for `d <= 0`.
pub(crate) fn ln_one_minus_exp<T: Real>(d: T) -> T {
    if d > -T::LN_2() {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// Inverse of the standard Gaussian CDF (AS 241).
///
/// Returns `-inf`/`+inf` at 0 and 1 and NaN outside `[0, 1]`.
pub fn norm_quantile<T: Real>(p: T) -> T {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly<T: Real>(c: &[f64; 8], x: T) -> T {
        c.iter().rev().fold(T::zero(), |acc, &k| acc * x + T::lit(k))
    }

    if !(p >= T::zero() && p <= T::one()) {
        return T::nan();
    }
    if p == T::zero() {
        return T::neg_infinity();
    }
    if p == T::one() {
        return T::infinity();
    }
    let q = p - T::lit(0.5);
    if q.abs() <= T::lit(0.425) {
        let r = T::lit(0.180625) - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < T::zero() { p } else { T::one() - p };
    let r = (-r.ln()).sqrt();
    let v = if r <= T::lit(5.0) {
        let r = r - T::lit(1.6);
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - T::lit(5.0);
        poly(&E, r) / poly(&F, r)
    };
    if q < T::zero() {
        -v
    } else {
        v
    }
}

/// Two-sided critical value `z` with `P(|Z| <= z) = level`.
pub fn two_sided_z<T: Real>(level: T) -> T {
    norm_quantile(T::one() - (T::one() - level) / T::lit(2.0))
}

/// `expm1(y) / y`, equal to 1 at `y = 0`.
#[inline]
pub fn exprel<T: Real>(y: T) -> T {
    if y.abs() < T::lit(1e-8) {
        T::one() + y / T::lit(2.0)
    } else {
        y.exp_m1() / y
    }
}

pub(crate) const GL10_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
pub(crate) const GL10_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Ten-point Gauss-Legendre rule on `[a, b]`.
pub(crate) fn gauss_legendre<T: Real>(f: impl Fn(T) -> T, a: T, b: T) -> T {
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    let mut acc = T::zero();
    for (&x, &w) in GL10_NODES.iter().zip(GL10_WEIGHTS.iter()) {
        let dx = half * T::lit(x);
        acc = acc + T::lit(w) * (f(mid - dx) + f(mid + dx));
    }
    acc * half
}
