//! Error function family, unit-Normal CDF/PDF and the D-dimensional radial
//! tail integral used by the scale-mixture velocity fields.
//!
//! `erfc` switches between a positive-term power series for `|x| < 2` and a
//! continued fraction for the scaled complement `erfcx` beyond that. Both
//! branches are accurate to a few ulps of relative error; the tail branch
//! never forms `exp(-x^2)` on its own so the log-space helpers stay finite
//! far beyond the point where `erfc` underflows.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const LN_2PI: f64 = 1.837_877_066_409_345_5;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SERIES_CUTOFF: f64 = 2.0;

/// `sum_n 2^n x^(2n+1) / (2n+1)!!`, so that `erf(x) = 2/sqrt(pi) * exp(-x^2) * series`.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

/// Continued fraction for `sqrt(pi) * exp(x^2) * erfc(x)`, evaluated with the
/// modified Lentz algorithm. Valid for `x >= SERIES_CUTOFF`.
fn erfcx_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = k as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        FRAC_2_SQRT_PI * (-x * x).exp() * erf_series(x)
    } else {
        x.signum() * (1.0 - erfc(x.abs()))
    }
}

/// Complementary error function `1 - erf(x)`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= SERIES_CUTOFF {
        (-x * x).exp() * erfcx_continued_fraction(x) / PI.sqrt()
    } else if x <= -SERIES_CUTOFF {
        2.0 - erfc(-x)
    } else {
        1.0 - erf(x)
    }
}

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x >= SERIES_CUTOFF {
        erfcx_continued_fraction(x) / PI.sqrt()
    } else {
        (x * x).exp() * erfc(x)
    }
}

/// Natural log of `erfc(x)`, finite for all finite `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x >= SERIES_CUTOFF {
        -x * x + (erfcx_continued_fraction(x) / PI.sqrt()).ln()
    } else {
        erfc(x).ln()
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn ln_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * LN_2PI
}

/// Unit-Normal CDF `Phi(x) = erfc(-x / sqrt 2) / 2`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Phi(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `ln Phi(x)`, accurate deep into the lower tail.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    ln_erfc(-x / SQRT_2) - std::f64::consts::LN_2
}

/// Signed log-magnitude of `Phi(a) - Phi(b)`: returns `(sign, ln |Phi(a) - Phi(b)|)`.
///
/// Both arguments deep in the same tail are handled without cancellation.
/// An exact tie returns `(0.0, -inf)`.
pub fn ln_std_normal_cdf_diff(a: f64, b: f64) -> (f64, f64) {
    if a == b {
        return (0.0, f64::NEG_INFINITY);
    }
    let (hi, lo, sign) = if a > b { (a, b, 1.0) } else { (b, a, -1.0) };
    // Phi(hi) - Phi(lo) > 0
    let ln_mag = if lo >= 0.0 {
        // both in the upper tail: sf(lo) - sf(hi)
        let l_lo = ln_std_normal_cdf(-lo);
        let l_hi = ln_std_normal_cdf(-hi);
        l_lo + ln_one_minus_exp(l_hi - l_lo)
    } else if hi <= 0.0 {
        let l_hi = ln_std_normal_cdf(hi);
        let l_lo = ln_std_normal_cdf(lo);
        l_hi + ln_one_minus_exp(l_lo - l_hi)
    } else {
        (std_normal_cdf(hi) - std_normal_cdf(lo)).ln()
    };
    (sign, ln_mag)
}

/// `ln(1 - exp(x))` for `x <= 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * LN_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `n!!` evaluated iteratively; `(-1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        return 1.0;
    }
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// `ln(n!!)`, safe for large `n`.
pub fn ln_double_factorial(n: i64) -> f64 {
    let mut acc = 0.0;
    let mut k = n;
    while k > 1 {
        acc += (k as f64).ln();
        k -= 2;
    }
    acc
}

fn check_radial_args(z: f64, dim: usize) -> Result<()> {
    if dim < 1 {
        return Err(Error::Domain(format!("radial CDF needs dim >= 1, got {dim}")));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("radial CDF needs finite z > 0, got {z}")));
    }
    Ok(())
}

/// `ln` of the radial tail integral
/// `z^(1-D) (2 pi)^(-D/2) int_z^inf t^(D-1) exp(-t^2/2) dt`.
///
/// Every term of the closed form carries a common `exp(-z^2/2)` factor (the
/// odd-dimension `erfc` tail via `erfcx`), which is pulled out so the sum
/// stays representable for large `z` and large `D`.
pub fn ln_radial_cdf(z: f64, dim: usize) -> Result<f64> {
    check_radial_args(z, dim)?;
    let d = dim as i64;
    let ln_z = z.ln();
    let ln_df = ln_double_factorial(d - 2);
    let mut terms: Vec<f64> = Vec::with_capacity(dim / 2 + 1);
    if d % 2 == 0 {
        for k in 0..d / 2 {
            let ln_c = ln_df - ln_double_factorial(2 * k);
            terms.push(ln_c + (2 * k + 1 - d) as f64 * ln_z);
        }
    } else {
        for k in 1..=(d - 1) / 2 {
            let ln_c = ln_df - ln_double_factorial(2 * k - 1);
            terms.push(ln_c + (2 * k - d) as f64 * ln_z);
        }
        let tail = ln_df + 0.5 * (0.5 * PI).ln() + erfcx(z / SQRT_2).ln() + (1 - d) as f64 * ln_z;
        terms.push(tail);
    }
    Ok(-0.5 * z * z - 0.5 * dim as f64 * LN_2PI + log_sum_exp(&terms))
}

/// Radial CDF (upper radial tail) of the standard `dim`-dimensional Normal.
pub fn radial_cdf(z: f64, dim: usize) -> Result<f64> {
    ln_radial_cdf(z, dim).map(f64::exp)
}

/// Numerically stable `ln sum exp(x_i)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
