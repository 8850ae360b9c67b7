//! Time-dependent boundary curves, densities living on them, and the local
//! frame (closest point, signed distance, curvature, normal velocity) that the
//! asymptotic formulas are written in.
//!
//! Sign conventions: every curve declares which side of its parameter
//! direction is the interior. The normal `n` is the unit *inward* normal, the
//! signed distance is positive inside, the curvature is positive when the
//! curve bends towards the interior (a convex domain has `kappa > 0`), and
//! the normal velocity `v = gamma_t . n` is positive when the boundary moves
//! inward.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate parametrization at lambda = {lambda}, t = {t}: speed {speed:e}")]
    Degenerate { lambda: f64, t: f64, speed: f64 },
    #[error("closest point is ambiguous: distances {first} and {second} at lambda = {lambda_a}, {lambda_b}")]
    AmbiguousProjection {
        first: f64,
        second: f64,
        lambda_a: f64,
        lambda_b: f64,
    },
    #[error("target projects onto an endpoint of the open curve (lambda = {lambda})")]
    EndpointProjection { lambda: f64 },
    #[error("target at distance {distance:e} lies outside the asymptotic tube of half-width {half_width:e}")]
    OutsideTube { distance: f64, half_width: f64 },
    #[error("invalid curve parameters: {0}")]
    InvalidParameters(String),
}

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sqr(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by a right angle.
    pub fn perp_left(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn perp_right(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Which side of the curve, looking along increasing parameter, is the
/// interior of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InteriorSide {
    #[default]
    Left,
    Right,
}

impl InteriorSide {
    pub fn inward(self, unit_tangent: Vec2) -> Vec2 {
        match self {
            InteriorSide::Left => unit_tangent.perp_left(),
            InteriorSide::Right => unit_tangent.perp_right(),
        }
    }

    fn sign(self) -> f64 {
        match self {
            InteriorSide::Left => 1.0,
            InteriorSide::Right => -1.0,
        }
    }
}

/// A regular parametric curve `gamma(lambda, t)` moving in time.
///
/// Only `position` is required; derivatives fall back to centered finite
/// differences. Built-in curves override them analytically.
pub trait BoundaryCurve: Send + Sync + fmt::Debug {
    /// Parameter interval `[lo, hi]`.
    fn domain(&self) -> (f64, f64);
    fn is_closed(&self) -> bool;
    fn interior(&self) -> InteriorSide;
    fn position(&self, lambda: f64, t: f64) -> Vec2;

    fn d_lambda(&self, lambda: f64, t: f64) -> Vec2 {
        let (lo, hi) = self.domain();
        let h = 1e-6 * (hi - lo);
        (self.position(lambda + h, t) - self.position(lambda - h, t)) * (0.5 / h)
    }

    fn d_lambda2(&self, lambda: f64, t: f64) -> Vec2 {
        // A wider step than for the first derivative: the second difference
        // loses eps / h^2 to rounding.
        let (lo, hi) = self.domain();
        let h = 1e-4 * (hi - lo);
        let p0 = self.position(lambda, t);
        (self.position(lambda + h, t) + self.position(lambda - h, t) - p0 * 2.0) * (1.0 / (h * h))
    }

    fn d_time(&self, lambda: f64, t: f64) -> Vec2 {
        let h = 1e-6 * t.abs().max(1.0);
        (self.position(lambda, t + h) - self.position(lambda, t - h)) * (0.5 / h)
    }

    /// `gamma(lambda, t0 - lag) - gamma(lambda0, t0)`.
    ///
    /// Built-in curves evaluate this without forming the two absolute
    /// positions, which keeps the normal component of short chords accurate
    /// when the curve sits far from the origin.
    fn displacement(&self, lambda: f64, lambda0: f64, t0: f64, lag: f64) -> Vec2 {
        self.position(lambda, t0 - lag) - self.position(lambda0, t0)
    }

    /// Smallest geometric length scale (e.g. minimal radius of curvature).
    fn feature_length(&self) -> f64 {
        let (lo, hi) = self.domain();
        (hi - lo) / 64.0
    }

    /// Canonical text description, used as part of the oracle cache key.
    /// `None` disables caching for this curve.
    fn descriptor(&self) -> Option<String> {
        None
    }
}

/// Straight static segment `[-half_length, half_length] x {0}` parametrized
/// by `y1`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub half_length: f64,
    pub interior: InteriorSide,
}

impl Segment {
    pub fn new(half_length: f64) -> Result<Self, GeometryError> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(GeometryError::InvalidParameters(format!(
                "segment half length must be positive, got {half_length}"
            )));
        }
        Ok(Self {
            half_length,
            interior: InteriorSide::Left,
        })
    }
}

impl BoundaryCurve for Segment {
    fn domain(&self) -> (f64, f64) {
        (-self.half_length, self.half_length)
    }
    fn is_closed(&self) -> bool {
        false
    }
    fn interior(&self) -> InteriorSide {
        self.interior
    }
    fn position(&self, lambda: f64, _t: f64) -> Vec2 {
        Vec2::new(lambda, 0.0)
    }
    fn d_lambda(&self, _lambda: f64, _t: f64) -> Vec2 {
        Vec2::new(1.0, 0.0)
    }
    fn d_lambda2(&self, _lambda: f64, _t: f64) -> Vec2 {
        Vec2::ZERO
    }
    fn d_time(&self, _lambda: f64, _t: f64) -> Vec2 {
        Vec2::ZERO
    }
    fn displacement(&self, lambda: f64, lambda0: f64, _t0: f64, _lag: f64) -> Vec2 {
        Vec2::new(lambda - lambda0, 0.0)
    }
    fn feature_length(&self) -> f64 {
        self.half_length
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!(
            "segment(half_length={:e},interior={:?})",
            self.half_length, self.interior
        ))
    }
}

/// Static parabola `(lambda, a lambda^2)`, `|lambda| <= half_width`.
/// With the interior above (`Left`), the curvature at the vertex is `2a`.
#[derive(Debug, Clone)]
pub struct Parabola {
    pub a: f64,
    pub half_width: f64,
    pub interior: InteriorSide,
}

impl Parabola {
    pub fn new(a: f64) -> Result<Self, GeometryError> {
        if !(a.is_finite() && a != 0.0) {
            return Err(GeometryError::InvalidParameters(format!(
                "parabola coefficient must be finite and nonzero, got {a}"
            )));
        }
        Ok(Self {
            a,
            half_width: 2.0 * PI,
            interior: InteriorSide::Left,
        })
    }
}

impl BoundaryCurve for Parabola {
    fn domain(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }
    fn is_closed(&self) -> bool {
        false
    }
    fn interior(&self) -> InteriorSide {
        self.interior
    }
    fn position(&self, lambda: f64, _t: f64) -> Vec2 {
        Vec2::new(lambda, self.a * lambda * lambda)
    }
    fn d_lambda(&self, lambda: f64, _t: f64) -> Vec2 {
        Vec2::new(1.0, 2.0 * self.a * lambda)
    }
    fn d_lambda2(&self, _lambda: f64, _t: f64) -> Vec2 {
        Vec2::new(0.0, 2.0 * self.a)
    }
    fn d_time(&self, _lambda: f64, _t: f64) -> Vec2 {
        Vec2::ZERO
    }
    fn displacement(&self, lambda: f64, lambda0: f64, _t0: f64, _lag: f64) -> Vec2 {
        let d = lambda - lambda0;
        Vec2::new(d, self.a * d * (lambda + lambda0))
    }
    fn feature_length(&self) -> f64 {
        0.5 / self.a.abs()
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!(
            "parabola(a={:e},half_width={:e},interior={:?})",
            self.a, self.half_width, self.interior
        ))
    }
}

/// Ellipse `center + velocity t + (semi_x cos theta, semi_y sin theta)`,
/// translating rigidly, counter-clockwise, interior inside by default.
#[derive(Debug, Clone)]
pub struct Ellipse {
    pub semi_x: f64,
    pub semi_y: f64,
    pub center: Vec2,
    pub velocity: Vec2,
    pub interior: InteriorSide,
}

impl Ellipse {
    pub fn new(semi_x: f64, semi_y: f64, center: Vec2, velocity: Vec2) -> Result<Self, GeometryError> {
        if !(semi_x > 0.0 && semi_y > 0.0) {
            return Err(GeometryError::InvalidParameters(format!(
                "ellipse semi-axes must be positive, got {semi_x}, {semi_y}"
            )));
        }
        Ok(Self {
            semi_x,
            semi_y,
            center,
            velocity,
            interior: InteriorSide::Left,
        })
    }

    /// The translating ellipse `(20 cos theta + 1.5 t, sin theta)`.
    pub fn moving_benchmark() -> Self {
        Self::new(20.0, 1.0, Vec2::ZERO, Vec2::new(1.5, 0.0)).expect("valid constants")
    }
}

/// `cos a - cos b` and `sin a - sin b` without cancellation.
fn trig_differences(a: f64, b: f64) -> (f64, f64) {
    let half_sum = 0.5 * (a + b);
    let half_diff = (0.5 * (a - b)).sin();
    (-2.0 * half_sum.sin() * half_diff, 2.0 * half_sum.cos() * half_diff)
}

impl BoundaryCurve for Ellipse {
    fn domain(&self) -> (f64, f64) {
        (0.0, 2.0 * PI)
    }
    fn is_closed(&self) -> bool {
        true
    }
    fn interior(&self) -> InteriorSide {
        self.interior
    }
    fn position(&self, theta: f64, t: f64) -> Vec2 {
        self.center + self.velocity * t + Vec2::new(self.semi_x * theta.cos(), self.semi_y * theta.sin())
    }
    fn d_lambda(&self, theta: f64, _t: f64) -> Vec2 {
        Vec2::new(-self.semi_x * theta.sin(), self.semi_y * theta.cos())
    }
    fn d_lambda2(&self, theta: f64, _t: f64) -> Vec2 {
        Vec2::new(-self.semi_x * theta.cos(), -self.semi_y * theta.sin())
    }
    fn d_time(&self, _theta: f64, _t: f64) -> Vec2 {
        self.velocity
    }
    fn displacement(&self, theta: f64, theta0: f64, _t0: f64, lag: f64) -> Vec2 {
        let (dc, ds) = trig_differences(theta, theta0);
        Vec2::new(self.semi_x * dc, self.semi_y * ds) - self.velocity * lag
    }
    fn feature_length(&self) -> f64 {
        let (lo, hi) = if self.semi_x < self.semi_y {
            (self.semi_x, self.semi_y)
        } else {
            (self.semi_y, self.semi_x)
        };
        lo * lo / hi
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!(
            "ellipse(a={:e},b={:e},center={:e},{:e},velocity={:e},{:e},interior={:?})",
            self.semi_x,
            self.semi_y,
            self.center.x,
            self.center.y,
            self.velocity.x,
            self.velocity.y,
            self.interior
        ))
    }
}

/// Circle with radius `radius + rate * t`, counter-clockwise.
#[derive(Debug, Clone)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
    pub rate: f64,
    pub interior: InteriorSide,
}

impl Circle {
    pub fn new(center: Vec2, radius: f64, rate: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidParameters(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            center,
            radius,
            rate,
            interior: InteriorSide::Left,
        })
    }

    pub fn unit() -> Self {
        Self::new(Vec2::ZERO, 1.0, 0.0).expect("valid constants")
    }

    fn radius_at(&self, t: f64) -> f64 {
        self.radius + self.rate * t
    }
}

impl BoundaryCurve for Circle {
    fn domain(&self) -> (f64, f64) {
        (0.0, 2.0 * PI)
    }
    fn is_closed(&self) -> bool {
        true
    }
    fn interior(&self) -> InteriorSide {
        self.interior
    }
    fn position(&self, theta: f64, t: f64) -> Vec2 {
        self.center + Vec2::new(theta.cos(), theta.sin()) * self.radius_at(t)
    }
    fn d_lambda(&self, theta: f64, t: f64) -> Vec2 {
        Vec2::new(-theta.sin(), theta.cos()) * self.radius_at(t)
    }
    fn d_lambda2(&self, theta: f64, t: f64) -> Vec2 {
        Vec2::new(-theta.cos(), -theta.sin()) * self.radius_at(t)
    }
    fn d_time(&self, theta: f64, _t: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin()) * self.rate
    }
    fn displacement(&self, theta: f64, theta0: f64, t0: f64, lag: f64) -> Vec2 {
        let (dc, ds) = trig_differences(theta, theta0);
        Vec2::new(dc, ds) * self.radius_at(t0) - Vec2::new(theta.cos(), theta.sin()) * (self.rate * lag)
    }
    fn feature_length(&self) -> f64 {
        self.radius
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!(
            "circle(center={:e},{:e},radius={:e},rate={:e},interior={:?})",
            self.center.x, self.center.y, self.radius, self.rate, self.interior
        ))
    }
}

type CurveFn = dyn Fn(f64, f64) -> Vec2 + Send + Sync;

/// A user-supplied curve given only by its position; all derivatives come
/// from finite differences.
pub struct ParametricCurve {
    position: Box<CurveFn>,
    domain: (f64, f64),
    closed: bool,
    interior: InteriorSide,
}

impl ParametricCurve {
    pub fn new(
        position: impl Fn(f64, f64) -> Vec2 + Send + Sync + 'static,
        domain: (f64, f64),
        closed: bool,
        interior: InteriorSide,
    ) -> Self {
        Self {
            position: Box::new(position),
            domain,
            closed,
            interior,
        }
    }
}

impl fmt::Debug for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricCurve")
            .field("domain", &self.domain)
            .field("closed", &self.closed)
            .field("interior", &self.interior)
            .finish_non_exhaustive()
    }
}

impl BoundaryCurve for ParametricCurve {
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn is_closed(&self) -> bool {
        self.closed
    }
    fn interior(&self) -> InteriorSide {
        self.interior
    }
    fn position(&self, lambda: f64, t: f64) -> Vec2 {
        (self.position)(lambda, t)
    }
}

/// Differential-geometric quantities at one curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub point: Vec2,
    /// Unit tangent in the direction of increasing parameter.
    pub tangent: Vec2,
    /// `|d gamma / d lambda|`
    pub speed: f64,
    pub inward_normal: Vec2,
    pub curvature: f64,
    pub normal_velocity: f64,
}

impl CurvePoint {
    pub fn outward_normal(&self) -> Vec2 {
        -self.inward_normal
    }
}

pub fn curve_point(curve: &dyn BoundaryCurve, lambda: f64, t: f64) -> Result<CurvePoint, GeometryError> {
    let d1 = curve.d_lambda(lambda, t);
    let speed = d1.norm();
    if !(speed >= 1e-13) {
        return Err(GeometryError::Degenerate { lambda, t, speed });
    }
    let d2 = curve.d_lambda2(lambda, t);
    let tangent = d1 * (1.0 / speed);
    let side = curve.interior();
    let inward = side.inward(tangent);
    let curvature = side.sign() * d1.cross(d2) / (speed * speed * speed);
    let normal_velocity = curve.d_time(lambda, t).dot(inward);
    Ok(CurvePoint {
        point: curve.position(lambda, t),
        tangent,
        speed,
        inward_normal: inward,
        curvature,
        normal_velocity,
    })
}

/// Number of uniform parameter samples used to bracket closest points.
pub const PROJECTION_SAMPLES: usize = 256;

/// Parameter samples covering the curve domain (the closing endpoint of a
/// closed curve is omitted).
pub(crate) fn parameter_samples(curve: &dyn BoundaryCurve, count: usize) -> Vec<f64> {
    let (lo, hi) = curve.domain();
    let closed = curve.is_closed();
    let m = if closed { count } else { count + 1 };
    (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / count as f64)
        .collect()
}

/// Closest point of `Gamma(t)` to a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub lambda: f64,
    pub point: Vec2,
    pub distance: f64,
}

fn wrap_parameter(curve: &dyn BoundaryCurve, lambda: f64) -> f64 {
    let (lo, hi) = curve.domain();
    if curve.is_closed() {
        let period = hi - lo;
        let mut l = (lambda - lo) % period;
        if l < 0.0 {
            l += period;
        }
        lo + l
    } else {
        lambda.clamp(lo, hi)
    }
}

fn parameter_gap(curve: &dyn BoundaryCurve, a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if curve.is_closed() {
        let (lo, hi) = curve.domain();
        d.min(hi - lo - d)
    } else {
        d
    }
}

/// Safeguarded Newton iteration for a stationary point of `|x - gamma|^2`
/// inside the bracket `[a, b]`.
pub(crate) fn refine_projection(
    curve: &dyn BoundaryCurve,
    x: Vec2,
    t: f64,
    guess: f64,
    bracket: (f64, f64),
) -> f64 {
    refine_stationary(curve, t, &|l| x - curve.position(l, t), guess, bracket)
}

/// Same as [`refine_projection`], with the difference vector `x - gamma(l)`
/// supplied by the caller (so it can be formed without cancellation).
pub(crate) fn refine_stationary(
    curve: &dyn BoundaryCurve,
    t: f64,
    diff: &dyn Fn(f64) -> Vec2,
    guess: f64,
    bracket: (f64, f64),
) -> f64 {
    let residual = |l: f64| {
        let d = diff(l);
        let d1 = curve.d_lambda(l, t);
        let f = -d.dot(d1);
        let fp = d1.norm_sqr() - d.dot(curve.d_lambda2(l, t));
        (f, fp)
    };
    let (mut a, mut b) = bracket;
    let (fa, _) = residual(a);
    let (fb, _) = residual(b);
    let bracketed = fa <= 0.0 && fb >= 0.0;
    let mut l = guess;
    for _ in 0..100 {
        let (f, fp) = residual(l);
        if f == 0.0 {
            break;
        }
        if bracketed {
            if f < 0.0 {
                a = l;
            } else {
                b = l;
            }
        }
        let mut next = if fp > 0.0 { l - f / fp } else { f64::NAN };
        if !(next > a && next < b) || !next.is_finite() {
            if !bracketed {
                // no sign change to fall back on: accept the current point
                break;
            }
            next = 0.5 * (a + b);
        }
        let step = (next - l).abs();
        l = next;
        if step <= 1e-15 * (1.0 + l.abs()) || (b - a) <= 1e-15 * (1.0 + l.abs()) {
            break;
        }
    }
    l
}

/// Closest point on `Gamma(t)` to `x`: dense sampling to bracket local
/// minima of the distance, then safeguarded Newton on
/// `<x - gamma, d gamma/d lambda> = 0`.
pub fn closest_point(curve: &dyn BoundaryCurve, x: Vec2, t: f64) -> Result<Projection, GeometryError> {
    let closed = curve.is_closed();
    let (lo, hi) = curve.domain();
    let samples = parameter_samples(curve, PROJECTION_SAMPLES);
    let m = samples.len();
    let dist2: Vec<f64> = samples.iter().map(|&l| (curve.position(l, t) - x).norm_sqr()).collect();
    let step = (hi - lo) / PROJECTION_SAMPLES as f64;

    let mut candidates: Vec<usize> = (0..m)
        .filter(|&i| {
            let left = if i > 0 {
                Some(dist2[i - 1])
            } else if closed {
                Some(dist2[m - 1])
            } else {
                None
            };
            let right = if i + 1 < m {
                Some(dist2[i + 1])
            } else if closed {
                Some(dist2[0])
            } else {
                None
            };
            left.is_none_or(|d| dist2[i] <= d) && right.is_none_or(|d| dist2[i] <= d)
        })
        .collect();
    candidates.sort_by(|&a, &b| dist2[a].total_cmp(&dist2[b]));
    candidates.truncate(8);

    let mut refined: Vec<Projection> = Vec::with_capacity(candidates.len());
    for &i in &candidates {
        let l0 = samples[i];
        let (mut a, mut b) = (l0 - step, l0 + step);
        if !closed {
            a = a.max(lo);
            b = b.min(hi);
        }
        let l = wrap_parameter(curve, refine_projection(curve, x, t, l0, (a, b)));
        let p = curve.position(l, t);
        let cand = Projection {
            lambda: l,
            point: p,
            distance: (x - p).norm(),
        };
        if refined
            .iter()
            .all(|q| parameter_gap(curve, q.lambda, cand.lambda) > 1e-9 * (hi - lo))
        {
            refined.push(cand);
        }
    }
    refined.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let best = *refined.first().expect("at least one sample is a local minimum");
    if let Some(second) = refined.get(1) {
        if (second.distance - best.distance).abs() < 1e-9 {
            return Err(GeometryError::AmbiguousProjection {
                first: best.distance,
                second: second.distance,
                lambda_a: best.lambda,
                lambda_b: second.lambda,
            });
        }
    }
    Ok(best)
}

/// Local asymptotic frame of a target point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    /// Closest point on `Gamma(t_final)`.
    pub x0: Vec2,
    pub lambda0: f64,
    /// Unit inward normal at `x0`.
    pub normal: Vec2,
    /// Signed distance, positive in the interior.
    pub r: f64,
    /// Scaled distance `r / sqrt(dt)`.
    pub c: f64,
    pub kappa: f64,
    pub v: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl LocalFrame {
    /// Same geometry, rescaled to another time parameter (`c = r / sqrt(dt)`).
    pub fn with_time_scale(&self, dt: f64) -> LocalFrame {
        LocalFrame {
            dt,
            c: self.r / dt.sqrt(),
            ..*self
        }
    }

    pub fn on_boundary(&self) -> bool {
        self.r == 0.0
    }
}

/// Relative threshold below which a target is snapped onto the boundary.
pub const ON_BOUNDARY_TOL: f64 = 1e-13;

/// Frame without the tube restriction; used internally when the time
/// parameter is much smaller than the target distance.
pub fn project_target(
    curve: &dyn BoundaryCurve,
    x: Vec2,
    dt: f64,
    t_final: f64,
) -> Result<LocalFrame, GeometryError> {
    let proj = closest_point(curve, x, t_final)?;
    let cp = curve_point(curve, proj.lambda, t_final)?;
    let (lo, hi) = curve.domain();
    if !curve.is_closed() && (proj.lambda <= lo || proj.lambda >= hi) {
        let off = x - cp.point;
        if off.dot(cp.tangent).abs() > 1e-10 * (1.0 + off.norm()) {
            return Err(GeometryError::EndpointProjection { lambda: proj.lambda });
        }
    }
    let mut r = (x - cp.point).dot(cp.inward_normal);
    let scale = 1f64.max(cp.point.norm()).max(x.norm());
    if r.abs() < ON_BOUNDARY_TOL * scale {
        r = 0.0;
    }
    Ok(LocalFrame {
        x0: cp.point,
        lambda0: proj.lambda,
        normal: cp.inward_normal,
        r,
        c: r / dt.sqrt(),
        kappa: cp.curvature,
        v: cp.normal_velocity,
        dt,
        t_final,
    })
}

/// Local frame of `x` relative to `Gamma(t_final)` with time parameter `dt`.
/// The target must lie within `10 sqrt(dt)` of the boundary.
pub fn local_frame(
    curve: &dyn BoundaryCurve,
    x: Vec2,
    dt: f64,
    t_final: f64,
) -> Result<LocalFrame, GeometryError> {
    let frame = project_target(curve, x, dt, t_final)?;
    let half_width = 10.0 * dt.sqrt();
    if frame.r.abs() > half_width {
        return Err(GeometryError::OutsideTube {
            distance: frame.r.abs(),
            half_width,
        });
    }
    Ok(frame)
}

/// Distance along the curve parametrization from `lambda0` to the nearest
/// endpoint, measured as the Euclidean distance to the endpoint; infinite for
/// closed curves.
pub fn distance_to_curve_end(curve: &dyn BoundaryCurve, lambda0: f64, t: f64) -> f64 {
    if curve.is_closed() {
        return f64::INFINITY;
    }
    let (lo, hi) = curve.domain();
    let p = curve.position(lambda0, t);
    (curve.position(lo, t) - p)
        .norm()
        .min((curve.position(hi, t) - p).norm())
}

/// A density `sigma(y, t)` (or `mu`) defined on the moving curve.
pub trait Density: Send + Sync + fmt::Debug {
    /// Value at curve point `y = gamma(lambda, t)`.
    fn value(&self, y: Vec2, lambda: f64, t: f64) -> f64;

    /// Ambient gradient, when the density is the trace of a smooth function
    /// of the plane.
    fn gradient(&self, _y: Vec2, _t: f64) -> Option<Vec2> {
        None
    }

    /// Ambient Hessian `[[f_xx, f_xy], [f_xy, f_yy]]`.
    fn hessian(&self, _y: Vec2, _t: f64) -> Option<[[f64; 2]; 2]> {
        None
    }

    /// Partial time derivative at a fixed ambient point.
    fn time_derivative(&self, _y: Vec2, _t: f64) -> Option<f64> {
        None
    }

    /// Length over which the density varies appreciably.
    fn feature_length(&self) -> f64 {
        f64::INFINITY
    }

    /// `true` only when the density vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }

    fn descriptor(&self) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDensity(pub f64);

impl Density for ConstantDensity {
    fn value(&self, _y: Vec2, _lambda: f64, _t: f64) -> f64 {
        self.0
    }
    fn gradient(&self, _y: Vec2, _t: f64) -> Option<Vec2> {
        Some(Vec2::ZERO)
    }
    fn hessian(&self, _y: Vec2, _t: f64) -> Option<[[f64; 2]; 2]> {
        Some([[0.0; 2]; 2])
    }
    fn time_derivative(&self, _y: Vec2, _t: f64) -> Option<f64> {
        Some(0.0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!("constant({:e})", self.0))
    }
}

/// Time-independent Gaussian bump `exp(-(y1-c)^2 / 4d) / sqrt(4 pi d)` on a
/// horizontal line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub width: f64,
    pub center: f64,
}

impl GaussianBump {
    pub fn new(width: f64) -> Self {
        Self { width, center: 0.0 }
    }
}

impl Density for GaussianBump {
    fn value(&self, y: Vec2, _lambda: f64, _t: f64) -> f64 {
        let d = self.width;
        let s = y.x - self.center;
        (-s * s / (4.0 * d)).exp() / (4.0 * PI * d).sqrt()
    }
    fn gradient(&self, y: Vec2, t: f64) -> Option<Vec2> {
        let s = y.x - self.center;
        Some(Vec2::new(-s / (2.0 * self.width) * self.value(y, 0.0, t), 0.0))
    }
    fn hessian(&self, y: Vec2, t: f64) -> Option<[[f64; 2]; 2]> {
        let d = self.width;
        let s = y.x - self.center;
        let fxx = (s * s / (4.0 * d * d) - 1.0 / (2.0 * d)) * self.value(y, 0.0, t);
        Some([[fxx, 0.0], [0.0, 0.0]])
    }
    fn time_derivative(&self, _y: Vec2, _t: f64) -> Option<f64> {
        Some(0.0)
    }
    fn feature_length(&self) -> f64 {
        self.width.sqrt()
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!("bump(d={:e},center={:e})", self.width, self.center))
    }
}

/// `cos(2 k pi y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineDensity {
    pub k: f64,
}

impl Density for CosineDensity {
    fn value(&self, y: Vec2, _lambda: f64, _t: f64) -> f64 {
        (2.0 * PI * self.k * y.x).cos()
    }
    fn gradient(&self, y: Vec2, _t: f64) -> Option<Vec2> {
        let w = 2.0 * PI * self.k;
        Some(Vec2::new(-w * (w * y.x).sin(), 0.0))
    }
    fn hessian(&self, y: Vec2, _t: f64) -> Option<[[f64; 2]; 2]> {
        let w = 2.0 * PI * self.k;
        Some([[-w * w * (w * y.x).cos(), 0.0], [0.0, 0.0]])
    }
    fn time_derivative(&self, _y: Vec2, _t: f64) -> Option<f64> {
        Some(0.0)
    }
    fn feature_length(&self) -> f64 {
        0.25 / self.k.abs().max(1e-300)
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!("cosine(k={:e})", self.k))
    }
}

/// `cos(y1 t) + sin(10 t)`, the density of the moving-ellipse benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EllipseBenchmarkDensity;

impl Density for EllipseBenchmarkDensity {
    fn value(&self, y: Vec2, _lambda: f64, t: f64) -> f64 {
        (y.x * t).cos() + (10.0 * t).sin()
    }
    fn gradient(&self, y: Vec2, t: f64) -> Option<Vec2> {
        Some(Vec2::new(-t * (y.x * t).sin(), 0.0))
    }
    fn hessian(&self, y: Vec2, t: f64) -> Option<[[f64; 2]; 2]> {
        Some([[-t * t * (y.x * t).cos(), 0.0], [0.0, 0.0]])
    }
    fn time_derivative(&self, y: Vec2, t: f64) -> Option<f64> {
        Some(-y.x * (y.x * t).sin() + 10.0 * (10.0 * t).cos())
    }
    fn feature_length(&self) -> f64 {
        1.0
    }
    fn descriptor(&self) -> Option<String> {
        Some("ellipse-benchmark".to_string())
    }
}

/// `c0 + cx y1 + cy y2 + ct t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearDensity {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
    pub ct: f64,
}

impl Density for LinearDensity {
    fn value(&self, y: Vec2, _lambda: f64, t: f64) -> f64 {
        self.c0 + self.cx * y.x + self.cy * y.y + self.ct * t
    }
    fn gradient(&self, _y: Vec2, _t: f64) -> Option<Vec2> {
        Some(Vec2::new(self.cx, self.cy))
    }
    fn hessian(&self, _y: Vec2, _t: f64) -> Option<[[f64; 2]; 2]> {
        Some([[0.0; 2]; 2])
    }
    fn time_derivative(&self, _y: Vec2, _t: f64) -> Option<f64> {
        Some(self.ct)
    }
    fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.cx == 0.0 && self.cy == 0.0 && self.ct == 0.0
    }
    fn descriptor(&self) -> Option<String> {
        Some(format!(
            "linear({:e},{:e},{:e},{:e})",
            self.c0, self.cx, self.cy, self.ct
        ))
    }
}

type DensityFn = dyn Fn(Vec2, f64, f64) -> f64 + Send + Sync;

/// Density from a closure `(y, lambda, t) -> value`.
pub struct FnDensity {
    f: Box<DensityFn>,
    feature_length: f64,
}

impl FnDensity {
    pub fn new(f: impl Fn(Vec2, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            feature_length: f64::INFINITY,
        }
    }

    pub fn with_feature_length(mut self, len: f64) -> Self {
        self.feature_length = len;
        self
    }
}

impl fmt::Debug for FnDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDensity").finish_non_exhaustive()
    }
}

impl Density for FnDensity {
    fn value(&self, y: Vec2, lambda: f64, t: f64) -> f64 {
        (self.f)(y, lambda, t)
    }
    fn feature_length(&self) -> f64 {
        self.feature_length
    }
}

/// Density value and the two derivatives used by the higher-order double
/// layer expansion, all at `(x0, t_final)` of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityJet {
    pub value: f64,
    /// Second derivative along the curve with respect to arc length.
    pub arc_second: f64,
    /// Time derivative following the boundary along its normal.
    pub normal_time: f64,
}

pub fn density_jet(
    curve: &dyn BoundaryCurve,
    density: &dyn Density,
    frame: &LocalFrame,
) -> Result<DensityJet, GeometryError> {
    let t0 = frame.t_final;
    let cp = curve_point(curve, frame.lambda0, t0)?;
    let y0 = cp.point;
    let value = density.value(y0, frame.lambda0, t0);
    let n = cp.inward_normal;

    let analytic = match (
        density.gradient(y0, t0),
        density.hessian(y0, t0),
        density.time_derivative(y0, t0),
    ) {
        (Some(g), Some(h), Some(dt)) => {
            let tt = cp.tangent;
            let hess_tt = tt.x * (h[0][0] * tt.x + h[0][1] * tt.y) + tt.y * (h[1][0] * tt.x + h[1][1] * tt.y);
            let gn = g.dot(n);
            Some(DensityJet {
                value,
                arc_second: hess_tt + cp.curvature * gn,
                normal_time: dt + cp.normal_velocity * gn,
            })
        }
        _ => None,
    };
    if let Some(jet) = analytic {
        return Ok(jet);
    }

    // Finite differences: along the curve in arc length, and in time along
    // the boundary point that stays on the normal line through x0.
    // local radius of curvature, not the curve-wide minimum
    let scale = (1.0 / cp.curvature.abs())
        .min(density.feature_length())
        .min(1.0);
    let h_arc = 1e-4 * scale;
    let hl = h_arc / cp.speed;
    let f = |l: f64| density.value(curve.position(l, t0), l, t0);
    let (fm, f0, fp) = (f(frame.lambda0 - hl), value, f(frame.lambda0 + hl));
    let d1 = (fp - fm) / (2.0 * hl);
    let d2 = (fp - 2.0 * f0 + fm) / (hl * hl);
    let g1 = curve.d_lambda(frame.lambda0, t0);
    let g2 = curve.d_lambda2(frame.lambda0, t0);
    let s2 = cp.speed * cp.speed;
    let arc_second = (d2 - d1 * g1.dot(g2) / s2) / s2;

    let ht = 1e-5;
    let on_normal = |t: f64| {
        let step = 4.0 * hl;
        let l = refine_projection(curve, y0, t, frame.lambda0, (frame.lambda0 - step, frame.lambda0 + step));
        density.value(curve.position(l, t), l, t)
    };
    let normal_time = (on_normal(t0 + ht) - on_normal(t0 - ht)) / (2.0 * ht);
    Ok(DensityJet {
        value,
        arc_second,
        normal_time,
    })
}
