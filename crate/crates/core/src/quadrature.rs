//! One-dimensional time quadrature rules.
//!
//! Time rules are expressed in the *lag* variable `l = t_final - tau`, so
//! the kernel singularity sits at `l = 0` and tiny lags keep full relative
//! precision. [`TimeRule::taus`] converts back to absolute times.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("rule order {order} outside the supported range {min}..={max}")]
    OrderOutOfRange { order: usize, min: usize, max: usize },
    #[error("invalid interval: need 0 < delta < dt, got delta = {delta:e}, dt = {dt:e}")]
    InvalidInterval { delta: f64, dt: f64 },
    #[error("moment system ill-conditioned: relative residual {residual:e}")]
    Conditioning { residual: f64 },
}

/// Which construction produced a rule, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    GaussLegendre { n: usize },
    ProductIntegration { k: usize },
    GaussJacobi { n: usize },
    Dyadic { n: usize, delta: f64 },
    Graded { n: usize, delta: f64 },
}

impl RuleKind {
    /// `true` when the weights already contain the `l^{-1/2}` factor, i.e.
    /// the rule approximates `int g(l) / sqrt(l) dl` from samples of `g`.
    pub fn has_sqrt_weight(&self) -> bool {
        matches!(self, RuleKind::ProductIntegration { .. } | RuleKind::GaussJacobi { .. })
    }
}

/// Nodes and weights of a quadrature rule.
///
/// For [`RuleKind::GaussLegendre`] the nodes are points of the plain
/// integration variable on `interval`; for every other kind they are lags.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
    pub interval: (f64, f64),
}

impl TimeRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_j w_j f(x_j)`.
    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Absolute times `t_final - l_j` of lag nodes.
    pub fn taus(&self, t_final: f64) -> Vec<f64> {
        self.nodes.iter().map(|l| t_final - l).collect()
    }
}

pub const MAX_GAUSS_LEGENDRE: usize = 200;

/// Legendre `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes (ascending) and weights of the `n`-point rule on `[-1, 1]`.
fn gauss_legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Chebyshev-like initial guess for the i-th largest root
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let step = p / d;
            z -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `n`-point Gauss–Legendre rule on `[a, b]`, exact for polynomials of
/// degree `2n - 1`. Returns an empty rule for `n == 0`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> TimeRule {
    let (x, w) = gauss_legendre_reference(n.min(MAX_GAUSS_LEGENDRE));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    TimeRule {
        nodes: x.iter().map(|&xi| mid + half * xi).collect(),
        weights: w.iter().map(|&wi| half * wi).collect(),
        kind: RuleKind::GaussLegendre { n },
        interval: (a, b),
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated sum.
fn sum_compensated(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for t in terms {
        let (s1, e) = two_sum(s, t);
        s = s1;
        c += e;
    }
    s + c
}

/// Solves `sum_j x_j^i z_j = b_i`, `i = 0..=n`, by the Björck–Pereyra
/// algorithm.
fn vandermonde_dual_solve(x: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let mut z = b.to_vec();
    for k in 0..n {
        for i in (k + 1..=n).rev() {
            z[i] -= x[k] * z[i - 1];
        }
    }
    for k in (0..n).rev() {
        for i in k + 1..=n {
            z[i] /= x[i] - x[i - k - 1];
        }
        for i in k..n {
            z[i] -= z[i + 1];
        }
    }
    z
}

fn moment_residual(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(m, &bm)| {
            let terms = x.iter().zip(w).map(|(&xj, &wj)| -(wj * xj.powi(m as i32)));
            sum_compensated(std::iter::once(bm).chain(terms))
        })
        .collect()
}

pub const MAX_PRODUCT_ORDER: usize = 12;

/// Partial product-integration rule on the equispaced lags
/// `v_j = j dt / k`, `j = 0..=k`, with `sum_j W_j g(v_j) = int_0^dt g(l)
/// l^{-1/2} dl` for polynomials of degree `<= k`.
///
/// The stored weights are `W_j = sqrt(dt) w_j` with `w_j` the
/// dimensionless weights (`sum_j w_j = 2`); see [`product_integration_unit`].
pub fn product_integration_weights(k: usize, dt: f64) -> Result<TimeRule, QuadratureError> {
    let w = product_integration_unit(k)?;
    let scale = dt.sqrt();
    let nodes = if k == 0 {
        vec![0.0]
    } else {
        (0..=k).map(|j| dt * j as f64 / k as f64).collect()
    };
    Ok(TimeRule {
        nodes,
        weights: w.iter().map(|wj| wj * scale).collect(),
        kind: RuleKind::ProductIntegration { k },
        interval: (0.0, dt),
    })
}

/// Dimensionless product-integration weights on `s_j = j / k`:
/// `sum_j w_j s_j^m = int_0^1 s^{m - 1/2} ds = 2 / (2m + 1)`.
pub fn product_integration_unit(k: usize) -> Result<Vec<f64>, QuadratureError> {
    if k > MAX_PRODUCT_ORDER {
        return Err(QuadratureError::OrderOutOfRange {
            order: k,
            min: 0,
            max: MAX_PRODUCT_ORDER,
        });
    }
    if k == 0 {
        return Ok(vec![2.0]);
    }
    let x: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
    let b: Vec<f64> = (0..=k).map(|m| 2.0 / (2 * m + 1) as f64).collect();
    let mut w = vandermonde_dual_solve(&x, &b);
    let r = moment_residual(&x, &w, &b);
    let dw = vandermonde_dual_solve(&x, &r);
    for (wi, di) in w.iter_mut().zip(&dw) {
        *wi += di;
    }
    let r = moment_residual(&x, &w, &b);
    let residual = r
        .iter()
        .zip(&b)
        .map(|(ri, bi)| (ri / bi).abs())
        .fold(0.0, f64::max);
    if !(residual <= 1e-12) {
        return Err(QuadratureError::Conditioning { residual });
    }
    Ok(w)
}

pub const MAX_GAUSS_JACOBI: usize = 64;

/// Gauss rule for the weight `l^{-1/2}` on `[0, dt]`.
///
/// With `l = dt s^2` the weighted integral becomes `2 sqrt(dt) int_0^1
/// g(dt s^2) ds`; the integrand is even in `s`, so the positive half of the
/// `2n`-point Gauss–Legendre rule on `[-1, 1]` integrates it exactly for
/// `g` of degree `<= 2n - 1`.
pub fn gauss_jacobi_sqrt(n: usize, dt: f64) -> Result<TimeRule, QuadratureError> {
    if n == 0 || n > MAX_GAUSS_JACOBI {
        return Err(QuadratureError::OrderOutOfRange {
            order: n,
            min: 1,
            max: MAX_GAUSS_JACOBI,
        });
    }
    let (s, w) = gauss_legendre_reference(2 * n);
    let scale = 2.0 * dt.sqrt();
    let (nodes, weights) = s[n..]
        .iter()
        .zip(&w[n..])
        .map(|(&si, &wi)| (dt * si * si, scale * wi))
        .unzip();
    Ok(TimeRule {
        nodes,
        weights,
        kind: RuleKind::GaussJacobi { n },
        interval: (0.0, dt),
    })
}

fn check_interval(delta: f64, dt: f64) -> Result<(), QuadratureError> {
    if !(delta > 0.0 && delta < dt && dt.is_finite()) {
        return Err(QuadratureError::InvalidInterval { delta, dt });
    }
    Ok(())
}

/// Dyadic panels covering the lags `[delta, dt]`, as `(lag_lo, lag_hi)`
/// pairs ordered from the far end inward. Each panel's distance to the
/// singular endpoint equals its length except the last, which is clipped
/// at `delta`. There are `ceil(log2(dt / delta))` panels.
pub fn dyadic_panels(delta: f64, dt: f64) -> Result<Vec<(f64, f64)>, QuadratureError> {
    check_interval(delta, dt)?;
    let count = (dt / delta).log2().ceil().max(1.0) as usize;
    let mut panels = Vec::with_capacity(count);
    let mut hi = dt;
    for i in 0..count {
        let lo = if i + 1 == count { delta } else { 0.5 * hi };
        panels.push((lo, hi));
        hi = lo;
    }
    Ok(panels)
}

/// `n`-point Gauss–Legendre on every dyadic panel of `[delta, dt]`.
pub fn dyadic_rule(n: usize, delta: f64, dt: f64) -> Result<TimeRule, QuadratureError> {
    if n == 0 || n > MAX_GAUSS_LEGENDRE {
        return Err(QuadratureError::OrderOutOfRange {
            order: n,
            min: 1,
            max: MAX_GAUSS_LEGENDRE,
        });
    }
    let panels = dyadic_panels(delta, dt)?;
    let mut nodes = Vec::with_capacity(n * panels.len());
    let mut weights = Vec::with_capacity(n * panels.len());
    for (lo, hi) in panels {
        let g = gauss_legendre(n, lo, hi);
        nodes.extend(g.nodes);
        weights.extend(g.weights);
    }
    Ok(TimeRule {
        nodes,
        weights,
        kind: RuleKind::Dyadic { n, delta },
        interval: (delta, dt),
    })
}

/// Single Gauss–Legendre panel in `u = -ln(l)` over `[-ln dt, -ln delta]`,
/// mapped back to lags `l_j = e^{-u_j}` with weights `omega_j e^{-u_j}`, so
/// that `sum_j w_j F(l_j)` approximates `int_delta^dt F(l) dl`.
pub fn graded_rule(n: usize, delta: f64, dt: f64) -> Result<TimeRule, QuadratureError> {
    if n == 0 || n > MAX_GAUSS_JACOBI {
        return Err(QuadratureError::OrderOutOfRange {
            order: n,
            min: 1,
            max: MAX_GAUSS_JACOBI,
        });
    }
    check_interval(delta, dt)?;
    let g = gauss_legendre(n, -dt.ln(), -delta.ln());
    let (nodes, weights) = g
        .nodes
        .iter()
        .zip(&g.weights)
        .map(|(&u, &w)| {
            let l = (-u).exp();
            (l, w * l)
        })
        .unzip();
    Ok(TimeRule {
        nodes,
        weights,
        kind: RuleKind::Graded { n, delta },
        interval: (delta, dt),
    })
}
