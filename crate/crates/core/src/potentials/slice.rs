//! Fixed-time curve integrals `B_S` and `B_D`.
//!
//! At lag `l = t_final - tau` the kernel is a Gaussian of width `sqrt(4 l)`
//! in arc length, so only the part of `Gamma(tau)` within
//! `R = sqrt(4 l WINDOW)` of the target contributes. The window is located
//! from local minima of the distance, then integrated by adaptive
//! Gauss–Legendre panels whose initial length is a fraction of the Gaussian
//! width. This keeps the cost independent of the lag, down to lags of 1e-14.

use std::f64::consts::PI;

use crate::geometry::{
    parameter_samples, project_target, refine_stationary, BoundaryCurve, Density, LocalFrame, Vec2,
};
use crate::quadrature::gauss_legendre;

use super::Layer;

/// Spatial quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialOptions {
    /// Initial panel length as a fraction of the Gaussian width `sqrt(4 l)`.
    pub panel_fraction: f64,
    /// Gauss–Legendre points per panel.
    pub points_per_panel: usize,
    /// Panel acceptance tolerance relative to `int |integrand|`.
    pub rtol: f64,
    pub max_depth: u32,
    /// Window cutoff: sources with `|x - y|^2 > 4 l window` are dropped
    /// (relative weight below `e^{-window}`).
    pub window: f64,
}

impl Default for SpatialOptions {
    fn default() -> Self {
        Self {
            panel_fraction: 1.0,
            points_per_panel: 16,
            rtol: 1e-13,
            max_depth: 40,
            window: 50.0,
        }
    }
}

impl SpatialOptions {
    /// Four times finer initial panels and a tighter acceptance test.
    pub fn fine() -> Self {
        Self {
            panel_fraction: 0.25,
            rtol: 1e-14,
            ..Self::default()
        }
    }
}

/// Target of a slice, optionally anchored at its closest boundary point so
/// that `x - y` can be formed as `offset - (y - x0)` without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceTarget {
    pub x: Vec2,
    pub anchor: Option<Anchor>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    /// Frame at the final time (its `dt` is irrelevant here).
    pub frame: LocalFrame,
    /// `x - x0`; exactly zero for targets on the boundary.
    pub offset: Vec2,
}

impl SliceTarget {
    /// Anchors `x` at its closest point on `Gamma(t_final)` when that point
    /// is unique.
    pub fn new(curve: &dyn BoundaryCurve, x: Vec2, t_final: f64) -> Self {
        let anchor = project_target(curve, x, 1.0, t_final).ok().map(|frame| Anchor {
            frame,
            offset: if frame.r == 0.0 { Vec2::ZERO } else { x - frame.x0 },
        });
        Self { x, anchor }
    }

    pub fn on_boundary(&self) -> bool {
        self.anchor.is_some_and(|a| a.frame.r == 0.0)
    }

    fn difference(&self, curve: &dyn BoundaryCurve, lambda: f64, t_final: f64, lag: f64) -> Vec2 {
        match self.anchor {
            Some(a) => a.offset - curve.displacement(lambda, a.frame.lambda0, t_final, lag),
            None => self.x - curve.position(lambda, t_final - lag),
        }
    }
}

/// Result of one fixed-lag curve integral.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slice {
    pub value: f64,
    /// `int |integrand|`, the scale against which cancellation is judged.
    pub magnitude: f64,
    pub evaluations: usize,
    /// `false` when adaptive refinement hit its depth limit.
    pub resolved: bool,
}

/// The heat kernel `e^{-|d|^2 / 4t} / (4 pi t)`; `None` for `t <= 0`.
pub fn heat_kernel(d: Vec2, t: f64) -> Option<f64> {
    if !(t > 0.0) {
        return None;
    }
    Some((-d.norm_sqr() / (4.0 * t)).exp() / (4.0 * PI * t))
}

/// `B_S[sigma](x, t_final, tau)` at lag `t_final - tau`.
pub fn spatial_slice_single(
    curve: &dyn BoundaryCurve,
    density: &dyn Density,
    x: Vec2,
    t_final: f64,
    lag: f64,
    opts: &SpatialOptions,
) -> Slice {
    let target = SliceTarget::new(curve, x, t_final);
    spatial_slice(Layer::Single, curve, density, &target, t_final, lag, opts)
}

/// `B_D[mu](x, t_final, tau)` at lag `t_final - tau`, with the outward
/// normal in the dipole factor.
pub fn spatial_slice_double(
    curve: &dyn BoundaryCurve,
    density: &dyn Density,
    x: Vec2,
    t_final: f64,
    lag: f64,
    opts: &SpatialOptions,
) -> Slice {
    let target = SliceTarget::new(curve, x, t_final);
    spatial_slice(Layer::Double, curve, density, &target, t_final, lag, opts)
}

const WINDOW_SAMPLES: usize = 256;
const MAX_WINDOW_MINIMA: usize = 16;
const MAX_INITIAL_PANELS: usize = 200_000;

pub fn spatial_slice(
    layer: Layer,
    curve: &dyn BoundaryCurve,
    density: &dyn Density,
    target: &SliceTarget,
    t_final: f64,
    lag: f64,
    opts: &SpatialOptions,
) -> Slice {
    if density.is_zero() {
        return Slice {
            resolved: true,
            ..Slice::default()
        };
    }
    if lag <= 0.0 {
        return lag_zero_limit(layer, density, target, t_final);
    }
    let tau = t_final - lag;
    let diff = |l: f64| target.difference(curve, l, t_final, lag);
    let radius = (4.0 * lag * opts.window).sqrt();
    let mut windows = find_windows(curve, tau, &diff, radius);
    if let (true, Some(anchor)) = (curve.is_closed(), target.anchor) {
        // Keep parameters within half a period of the anchor so that the
        // anchored displacement never sees `lambda - lambda0` near a period.
        let (lo, hi) = curve.domain();
        let period = hi - lo;
        let l0 = anchor.frame.lambda0;
        for w in windows.iter_mut() {
            let shift = if w.1 - w.0 >= period {
                w.0 - (l0 - 0.5 * period)
            } else {
                ((0.5 * (w.0 + w.1) - l0) / period).round() * period
            };
            w.0 -= shift;
            w.1 -= shift;
        }
    }
    if windows.is_empty() {
        return Slice {
            resolved: true,
            ..Slice::default()
        };
    }

    let side = match curve.interior() {
        crate::geometry::InteriorSide::Left => 1.0,
        crate::geometry::InteriorSide::Right => -1.0,
    };
    let inv4l = 1.0 / (4.0 * lag);
    let norm = match layer {
        Layer::Single => 1.0 / (4.0 * PI * lag).sqrt(),
        Layer::Double => 1.0 / (4.0 * PI.sqrt() * lag * lag.sqrt()),
    };
    let integrand = |l: f64| -> f64 {
        let d = diff(l);
        let g = (-d.norm_sqr() * inv4l).exp();
        if g == 0.0 {
            return 0.0;
        }
        let d1 = curve.d_lambda(l, tau);
        let y = curve.position(l, tau);
        let dens = density.value(y, l, tau);
        match layer {
            Layer::Single => norm * g * dens * d1.norm(),
            // (x - y) . nu_out |gamma'| = -side * gamma' x (x - y)
            Layer::Double => -norm * g * side * d1.cross(d) * dens,
        }
    };

    let h_arc = (opts.panel_fraction * (4.0 * lag).sqrt())
        .min(curve.feature_length())
        .min(density.feature_length());
    let reference = gauss_legendre(opts.points_per_panel, -1.0, 1.0);
    let mut evaluations = 0usize;
    let panel = |a: f64, b: f64, evals: &mut usize| -> (f64, f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        let mut m = 0.0;
        for (&xi, &wi) in reference.nodes.iter().zip(&reference.weights) {
            let f = integrand(mid + half * xi);
            s += wi * f;
            m += wi * f.abs();
        }
        *evals += reference.nodes.len();
        (half * s, half * m)
    };

    let mut panels: Vec<(f64, f64, f64)> = Vec::new();
    let mut magnitude = 0.0;
    for &(a, b) in &windows {
        let min_step = (b - a) / MAX_INITIAL_PANELS as f64;
        let mut l = a;
        while l < b {
            let speed = curve.d_lambda(l, tau).norm().max(1e-300);
            let mut step = (h_arc / speed).max(min_step);
            if l + step >= b || (b - l - step) < 0.25 * step {
                step = b - l;
            }
            let (v, m) = panel(l, l + step, &mut evaluations);
            panels.push((l, l + step, v));
            magnitude += m;
            l += step;
        }
    }
    if magnitude == 0.0 {
        return Slice {
            value: 0.0,
            magnitude: 0.0,
            evaluations,
            resolved: true,
        };
    }
    let tol = opts.rtol * magnitude;
    let mut resolved = true;
    let mut value = 0.0;
    let mut stack: Vec<(f64, f64, f64, u32)> = Vec::new();
    for &(a, b, v) in &panels {
        stack.push((a, b, v, 0));
        while let Some((a, b, coarse, depth)) = stack.pop() {
            let mid = 0.5 * (a + b);
            let (left, _) = panel(a, mid, &mut evaluations);
            let (right, _) = panel(mid, b, &mut evaluations);
            let fine = left + right;
            if (fine - coarse).abs() <= tol {
                value += fine;
            } else if depth >= opts.max_depth {
                resolved = false;
                value += fine;
            } else {
                stack.push((mid, b, right, depth + 1));
                stack.push((a, mid, left, depth + 1));
            }
        }
    }
    Slice {
        value,
        magnitude,
        evaluations,
        resolved,
    }
}

/// Slices at zero lag: the Gaussian collapses onto the closest point.
fn lag_zero_limit(layer: Layer, density: &dyn Density, target: &SliceTarget, t_final: f64) -> Slice {
    let value = match target.anchor {
        Some(a) if a.frame.r == 0.0 => {
            let f = a.frame;
            let d = density.value(f.x0, f.lambda0, t_final);
            match layer {
                Layer::Single => d,
                Layer::Double => -0.5 * (f.kappa + f.v) * d,
            }
        }
        _ => 0.0,
    };
    Slice {
        value,
        magnitude: value.abs(),
        evaluations: 1,
        resolved: true,
    }
}

/// Parameter intervals where `|diff| < radius`, unwrapped for closed curves
/// (an interval may extend past the nominal domain).
fn find_windows(
    curve: &dyn BoundaryCurve,
    t: f64,
    diff: &dyn Fn(f64) -> Vec2,
    radius: f64,
) -> Vec<(f64, f64)> {
    let closed = curve.is_closed();
    let (lo, hi) = curve.domain();
    let period = hi - lo;
    let samples = parameter_samples(curve, WINDOW_SAMPLES);
    let m = samples.len();
    let step = period / WINDOW_SAMPLES as f64;
    let dist2: Vec<f64> = samples.iter().map(|&l| diff(l).norm_sqr()).collect();

    let mut minima: Vec<usize> = (0..m)
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
    minima.sort_by(|&a, &b| dist2[a].total_cmp(&dist2[b]));
    minima.truncate(MAX_WINDOW_MINIMA);

    let dist = |l: f64| diff(l).norm();
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for &i in &minima {
        let l0 = samples[i];
        let (mut a, mut b) = (l0 - step, l0 + step);
        if !closed {
            a = a.max(lo);
            b = b.min(hi);
        }
        let center = refine_stationary(curve, t, diff, l0, (a, b));
        let center = if closed { center } else { center.clamp(lo, hi) };
        if !(dist(center) < radius) {
            // the sample itself may still be inside when Newton wandered
            if !(dist(l0) < radius) {
                continue;
            }
        }
        let center = if dist(center) < radius { center } else { l0 };
        let speed = curve.d_lambda(center, t).norm().max(1e-300);
        let h = (radius / speed).min(0.25 * period);
        let right = expand(&dist, center, h, radius, if closed { None } else { Some(hi) }, period);
        let left = expand(&dist, center, -h, radius, if closed { None } else { Some(lo) }, period);
        match (left, right) {
            (Some(a), Some(b)) if b - a < period => intervals.push((a, b)),
            _ => return vec![(lo, hi)],
        }
    }
    merge_windows(intervals, closed, lo, period)
}

/// Walks from `center` (inside) in direction `sign(h)` with doubling steps
/// until the distance reaches `radius`, then bisects. Returns `None` when
/// the walk covers a full period of a closed curve.
fn expand(
    dist: &dyn Fn(f64) -> f64,
    center: f64,
    h: f64,
    radius: f64,
    bound: Option<f64>,
    period: f64,
) -> Option<f64> {
    let mut inside = center;
    let mut step = h;
    let outside = loop {
        let mut cand = inside + step;
        if let Some(end) = bound {
            if (h > 0.0 && cand >= end) || (h < 0.0 && cand <= end) {
                cand = end;
                if dist(cand) < radius {
                    return Some(end);
                }
                break cand;
            }
        } else if (cand - center).abs() >= period {
            return None;
        }
        if dist(cand) < radius {
            inside = cand;
            step *= 2.0;
        } else {
            break cand;
        }
    };
    let (mut a, mut b) = (inside, outside);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if dist(mid) < radius {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a).abs() <= 1e-3 * h.abs() {
            break;
        }
    }
    Some(b)
}

fn merge_windows(mut intervals: Vec<(f64, f64)>, closed: bool, lo: f64, period: f64) -> Vec<(f64, f64)> {
    if intervals.is_empty() {
        return intervals;
    }
    if closed {
        for iv in intervals.iter_mut() {
            let shift = ((iv.0 - lo) / period).floor() * period;
            iv.0 -= shift;
            iv.1 -= shift;
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
            _ => merged.push(iv),
        }
    }
    if closed && merged.len() > 1 {
        let first = merged[0];
        let last = *merged.last().expect("nonempty");
        if last.1 >= first.0 + period {
            merged.pop();
            merged[0] = (last.0 - period, first.1.max(last.1 - period));
        }
    }
    if closed && merged.iter().any(|iv| iv.1 - iv.0 >= period) {
        return vec![(lo, lo + period)];
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Circle, ConstantDensity, GaussianBump, LinearDensity, Segment};

    fn opts() -> SpatialOptions {
        SpatialOptions::default()
    }

    #[test]
    fn kernel_values() {
        let t = 0.3;
        assert_eq!(heat_kernel(Vec2::ZERO, t), Some(1.0 / (4.0 * PI * t)));
        let d = Vec2::new(0.0, 2.0 * t.sqrt());
        assert!((heat_kernel(d, t).unwrap() - (-1.0f64).exp() / (4.0 * PI * t)).abs() < 1e-15);
        assert_eq!(heat_kernel(d, 0.0), None);
    }

    #[test]
    fn kernel_mass_is_one() {
        // polar quadrature over a disk of radius 12 sqrt(t)
        let t: f64 = 0.02;
        let rmax = 12.0 * t.sqrt();
        let radial = gauss_legendre(60, 0.0, rmax);
        let mass: f64 = radial.apply(|r| 2.0 * PI * r * heat_kernel(Vec2::new(r, 0.0), t).unwrap());
        assert!((mass - 1.0).abs() < 1e-12, "{mass}");
    }

    #[test]
    fn line_single_slice_is_unit_mass() {
        // long enough that the truncated Gaussian mass is below 1e-16
        let seg = Segment::new(10.0).unwrap();
        for &lag in &[1e-14, 1e-9, 1e-4, 1e-2, 0.3] {
            let s = spatial_slice_single(&seg, &ConstantDensity(1.0), Vec2::ZERO, 1.0, lag, &opts());
            assert!((s.value - 1.0).abs() < 1e-13, "lag {lag}: {}", s.value);
            assert!(s.resolved);
        }
    }

    #[test]
    fn bump_slice_is_gaussian() {
        let seg = Segment::new(4.0).unwrap();
        let d = 0.01;
        let bump = GaussianBump::new(d);
        for &(x, lag) in &[(0.0, 1e-3), (0.05, 0.02), (-0.2, 1e-8)] {
            let s = spatial_slice_single(&seg, &bump, Vec2::new(x, 0.0), 0.5, lag, &opts());
            let exact = (-x * x / (4.0 * (lag + d))).exp() / (4.0 * PI * (lag + d)).sqrt();
            assert!(((s.value - exact) / exact).abs() < 1e-12, "{x} {lag}: {} vs {exact}", s.value);
        }
    }

    #[test]
    fn zero_density_is_zero() {
        let c = Circle::unit();
        let s = spatial_slice_double(&c, &ConstantDensity(0.0), Vec2::new(0.3, 0.1), 1.0, 0.1, &opts());
        assert_eq!(s.value, 0.0);
        let s = spatial_slice_single(&c, &LinearDensity::default(), Vec2::new(0.3, 0.1), 1.0, 0.1, &opts());
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn far_target_double_slice_vanishes() {
        let c = Circle::unit();
        let lag = 1e-3;
        // distance 0.8 > 20 sqrt(lag)
        let s = spatial_slice_double(&c, &ConstantDensity(1.0), Vec2::new(0.2, 0.0), 1.0, lag, &opts());
        assert!(s.value.abs() < 1e-15);
    }

    #[test]
    fn double_slice_at_circle_center_against_trapezoid() {
        let c = Circle::unit();
        let lag = 0.01;
        let s = spatial_slice_double(&c, &ConstantDensity(1.0), Vec2::ZERO, 1.0, lag, &opts());
        // periodic trapezoid with 4000 points: integrand is constant in theta
        let n = 4000;
        let mut sum = 0.0;
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            let y = Vec2::new(th.cos(), th.sin());
            let d = -y;
            let nu = y;
            sum += (-d.norm_sqr() / (4.0 * lag)).exp() / (4.0 * PI.sqrt() * lag.powf(1.5)) * d.dot(nu);
        }
        let reference = sum * 2.0 * PI / n as f64;
        assert!(((s.value - reference) / reference).abs() < 1e-12, "{} vs {reference}", s.value);
    }

    #[test]
    fn slices_stay_bounded_near_zero_lag() {
        let c = Circle::unit();
        let x = Vec2::new(1.0, 0.0);
        let s0 = spatial_slice_single(&c, &ConstantDensity(1.0), x, 1.0, 1e-12, &opts());
        assert!((s0.value - 1.0).abs() < 1e-5);
        let d0 = spatial_slice_double(&c, &ConstantDensity(1.0), x, 1.0, 1e-12, &opts());
        assert!((d0.value + 0.5).abs() < 1e-5, "{}", d0.value);
        let lim = spatial_slice_double(&c, &ConstantDensity(1.0), x, 1.0, 0.0, &opts());
        assert_eq!(lim.value, -0.5);
    }
}
