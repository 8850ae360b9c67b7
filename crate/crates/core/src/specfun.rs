//! Special functions needed by the asymptotic layer-potential formulas:
//! the complementary error function, exponential integrals of half-integer
//! order, Hermite functions and the odd double factorial.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::PI;

use thiserror::Error;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("E_{{1/2}}(x) diverges at x = 0")]
    HalfOrderAtZero,
    #[error("exponential integral needs x >= 0, got {0}")]
    NegativeArgument(f64),
    #[error("double factorial needs an odd integer >= -1, got {0}")]
    DoubleFactorialDomain(i64),
}

/// Orders of the exponential integral that appear in the layer-potential
/// asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfOrder {
    /// `E_{1/2}`
    Half,
    /// `E_{3/2}`
    ThreeHalves,
}

/// `exp(-x^2)` with the square split so that the rounding of `x*x` does not
/// leak into the result.
fn exp_neg_square(x: f64) -> f64 {
    let xs = (x * 16.0).trunc() / 16.0;
    let del = (x - xs) * (x + xs);
    (-xs * xs).exp() * (-del).exp()
}

/// `erf(x)` for small `|x|` from the positive-term series
/// `erf(x) = 2x/sqrt(pi) e^{-x^2} sum (2x^2)^n / (2n+1)!!`.
fn erf_series(x: f64) -> f64 {
    let x2 = 2.0 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= x2 / (2.0 * n + 1.0);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    2.0 * x / SQRT_PI * exp_neg_square(x) * sum
}

/// Continued fraction `x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))` evaluated with
/// the modified Lentz algorithm; `erfc(x) = e^{-x^2} / (sqrt(pi) * cf)`.
fn erfc_continued_fraction(x: f64) -> f64 {
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..CF_MAX_ITER {
        let a = 0.5 * j as f64;
        d = x + a * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    f
}

/// Complementary error function `erfc(x) = 2/sqrt(pi) * int_x^inf e^{-t^2} dt`.
///
/// Series branch for `|x| < 1`, continued fraction beyond, reflection
/// `erfc(-x) = 2 - erfc(x)` for negative arguments.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.0 {
        return 1.0 - erf_series(x);
    }
    if x > 27.5 {
        return 0.0;
    }
    exp_neg_square(x) / (SQRT_PI * erfc_continued_fraction(x))
}

/// Error function, `1 - erfc(x)`.
pub fn erf(x: f64) -> f64 {
    if x.abs() < 1.0 {
        erf_series(x)
    } else {
        1.0 - erfc(x)
    }
}

/// Upper incomplete gamma function of order one half,
/// `Gamma(1/2, x) = sqrt(pi) * erfc(sqrt(x))`.
pub fn upper_gamma_half(x: f64) -> f64 {
    SQRT_PI * erfc(x.sqrt())
}

/// `E_{3/2}` by the continued fraction for `E_s`, accurate once `x` is of
/// order one or larger and free of the cancellation in the closed form.
fn e3half_continued_fraction(x: f64) -> f64 {
    let s = 1.5;
    let mut b = x + s;
    let mut c = 1.0 / CF_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..CF_MAX_ITER {
        let i = i as f64;
        let an = -i * (s - 1.0 + i);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h * (-x).exp()
}

/// Exponential integral `E_s(x) = int_1^inf e^{-xt} t^{-s} dt` for
/// `s` in `{1/2, 3/2}`.
///
/// `E_{1/2}(x) = x^{-1/2} Gamma(1/2, x)`; `E_{3/2}` follows from the upward
/// recurrence `E_{s+1}(x) = (e^{-x} - x E_s(x)) / s` for `x <= 2` and from a
/// continued fraction for larger `x`, where the recurrence cancels.
pub fn exp_integral_half(order: HalfOrder, x: f64) -> Result<f64, SpecFunError> {
    if x < 0.0 || x.is_nan() {
        return Err(SpecFunError::NegativeArgument(x));
    }
    match order {
        HalfOrder::Half => {
            if x == 0.0 {
                Err(SpecFunError::HalfOrderAtZero)
            } else {
                Ok(upper_gamma_half(x) / x.sqrt())
            }
        }
        HalfOrder::ThreeHalves => Ok(e3half(x)),
    }
}

/// `E_{3/2}(x)` for `x >= 0`; `E_{3/2}(0) = 2`.
pub fn e3half(x: f64) -> f64 {
    if x == 0.0 {
        2.0
    } else if x <= 2.0 {
        // recurrence from E_{1/2}: E_{3/2} = 2 (e^{-x} - x E_{1/2}(x))
        2.0 * ((-x).exp() - (PI * x).sqrt() * erfc(x.sqrt()))
    } else {
        e3half_continued_fraction(x)
    }
}

/// Hermite function `h_n(t) = (-1)^n d^n/dt^n e^{-t^2}`, i.e. the physicists'
/// Hermite polynomial times the Gaussian, by the three-term recurrence
/// `h_{n+1} = 2t h_n - 2n h_{n-1}`.
pub fn hermite_fn(n: u32, t: f64) -> f64 {
    let h0 = (-t * t).exp();
    if n == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = 2.0 * t * h0;
    for k in 1..n {
        let next = 2.0 * t * cur - 2.0 * f64::from(k) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Odd double factorial `n!! = n (n-2) ... 1` with `(-1)!! = 1`.
pub fn double_factorial(n: i64) -> Result<f64, SpecFunError> {
    if n < -1 || n % 2 == 0 {
        return Err(SpecFunError::DoubleFactorialDomain(n));
    }
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    Ok(acc)
}

/// Even Gaussian moment `int u^{2n} e^{-u^2} du = sqrt(pi) (2n-1)!! / 2^n`.
pub fn gaussian_even_moment(n: u32) -> f64 {
    let df = double_factorial(2 * i64::from(n) - 1).expect("odd by construction");
    SQRT_PI * df / 2f64.powi(n as i32)
}
