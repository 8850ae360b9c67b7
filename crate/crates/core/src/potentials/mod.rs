//! Local layer potentials
//!
//! `S[sigma](x, t) = int_{t-dt}^{t} int_{Gamma(tau)} G(x - y, t - tau) sigma ds dtau`
//!
//! and the double layer `D[mu]` with the outward normal derivative of `G`,
//! written as `int B(l) / sqrt(4 pi l) dl` over the lag `l = t - tau`, plus
//! the bridge potentials over `l in [dt, 2 dt]`.

mod slice;

use std::fmt;

use thiserror::Error;

use crate::asymptotics::{
    asym_bridge_double, asym_bridge_single, asym_double, asym_single, AsymptoticError, AsymptoticInput,
    DoubleOrder,
};
use crate::geometry::{
    density_jet, distance_to_curve_end, local_frame, BoundaryCurve, Density, GeometryError, LocalFrame, Vec2,
};
use crate::quadrature::{
    dyadic_rule, gauss_jacobi_sqrt, gauss_legendre, graded_rule, product_integration_weights, QuadratureError,
    TimeRule,
};

pub use slice::{
    heat_kernel, spatial_slice, spatial_slice_double, spatial_slice_single, Anchor, Slice, SliceTarget,
    SpatialOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Asymptotic(#[from] AsymptoticError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Single,
    Double,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Single => "single",
            Layer::Double => "double",
        })
    }
}

/// Time discretization. `delta: None` selects the default split point
/// `max(tolerance, 1e-12)`, capped at `dt / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Asymptotic formula over the whole step.
    Asymptotic,
    /// Equispaced partial product integration with `k + 1` nodes.
    ProductIntegration { k: usize },
    /// Gauss rule for the `l^{-1/2}` weight.
    GaussJacobi { n: usize },
    /// Gauss–Legendre on dyadic panels down to `delta`, asymptotic tail below.
    AdaptiveDyadic { n: usize, delta: Option<f64> },
    /// Single exponentially graded panel down to `delta`, asymptotic tail below.
    Graded { n: usize, delta: Option<f64> },
    /// Same discretization as [`Method::Graded`].
    Hybrid { n: usize, delta: Option<f64> },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Asymptotic => "asymptotic",
            Method::ProductIntegration { .. } => "product-integration",
            Method::GaussJacobi { .. } => "gauss-jacobi",
            Method::AdaptiveDyadic { .. } => "adaptive-dyadic",
            Method::Graded { .. } => "graded",
            Method::Hybrid { .. } => "hybrid",
        }
    }

    /// The `n` (or `k`) parameter, if any.
    pub fn order(&self) -> Option<usize> {
        match *self {
            Method::Asymptotic => None,
            Method::ProductIntegration { k } => Some(k),
            Method::GaussJacobi { n }
            | Method::AdaptiveDyadic { n, .. }
            | Method::Graded { n, .. }
            | Method::Hybrid { n, .. } => Some(n),
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            Method::AdaptiveDyadic { delta, .. } | Method::Graded { delta, .. } | Method::Hybrid { delta, .. } => {
                delta
            }
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        if let Some(n) = self.order() {
            write!(f, "({n}")?;
            if let Some(d) = self.delta() {
                write!(f, ", delta={d:e}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// One potential evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PotentialRequest<'a> {
    pub layer: Layer,
    pub curve: &'a dyn BoundaryCurve,
    pub density: &'a dyn Density,
    pub target: Vec2,
    pub t_final: f64,
    pub dt: f64,
    pub method: Method,
    /// Target accuracy `eps`, in `(1e-14, 1e-1)`.
    pub tolerance: f64,
    pub spatial: SpatialOptions,
}

impl<'a> PotentialRequest<'a> {
    /// Local potential at `t_final = dt` with default tolerance `1e-12`.
    pub fn new(
        layer: Layer,
        curve: &'a dyn BoundaryCurve,
        density: &'a dyn Density,
        target: Vec2,
        dt: f64,
        method: Method,
    ) -> Self {
        Self {
            layer,
            curve,
            density,
            target,
            t_final: dt,
            dt,
            method,
            tolerance: 1e-12,
            spatial: SpatialOptions::default(),
        }
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_spatial(mut self, spatial: SpatialOptions) -> Self {
        self.spatial = spatial;
        self
    }

    fn validate(&self) -> Result<(), PotentialError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PotentialError::InvalidRequest(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_final.is_finite() {
            return Err(PotentialError::InvalidRequest("t_final must be finite".into()));
        }
        if !(self.tolerance > 1e-14 && self.tolerance < 1e-1) {
            return Err(PotentialError::InvalidRequest(format!(
                "tolerance must lie in (1e-14, 1e-1), got {:e}",
                self.tolerance
            )));
        }
        if !(self.target.x.is_finite() && self.target.y.is_finite()) {
            return Err(PotentialError::InvalidRequest("target must be finite".into()));
        }
        Ok(())
    }

    /// Split point between quadrature and asymptotic tail.
    pub fn split_delta(&self) -> f64 {
        self.method
            .delta()
            .unwrap_or_else(|| self.tolerance.max(1e-12))
            .min(0.5 * self.dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Adaptive spatial refinement did not converge at this lag.
    SpatialUnresolved { lag: f64 },
    /// The open curve ends closer to the target than `sqrt(dt) ln(1/eps)`.
    OpenCurveTruncation { end_distance: f64, required: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::SpatialUnresolved { lag } => write!(f, "spatial integral unresolved at lag {lag:e}"),
            Warning::OpenCurveTruncation { end_distance, required } => write!(
                f,
                "open curve ends {end_distance:e} from the target, less than {required:e}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub time_nodes: usize,
    pub spatial_evaluations: usize,
    /// Contribution of the time quadrature.
    pub quadrature_part: f64,
    /// Contribution of the asymptotic formula.
    pub asymptotic_part: f64,
    /// `sum |w| |B| / sqrt(4 pi l)`: scale for judging cancellation.
    pub magnitude: f64,
    pub warnings: Vec<Warning>,
}

impl Diagnostics {
    pub fn has_resolution_warning(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, Warning::SpatialUnresolved { .. }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub diagnostics: Diagnostics,
}

/// Targets farther than this many `sqrt(delta)` from the boundary get no
/// asymptotic tail (its size is below `e^{-56}`).
const TAIL_CUTOFF: f64 = 15.0;

/// Evaluates the local potential over `[t_final - dt, t_final]`.
pub fn eval_potential(req: &PotentialRequest) -> Result<Evaluation, PotentialError> {
    req.validate()?;
    let mut diag = Diagnostics::default();
    if req.density.is_zero() {
        return Ok(Evaluation { value: 0.0, diagnostics: diag });
    }
    let target = SliceTarget::new(req.curve, req.target, req.t_final);
    check_truncation(req, &target, &mut diag);

    let value = match req.method {
        Method::Asymptotic => {
            let frame = local_frame(req.curve, req.target, req.dt, req.t_final)?;
            let v = asymptotic_local(req, &frame)?;
            diag.asymptotic_part = v;
            v
        }
        Method::ProductIntegration { k } => {
            let rule = product_integration_weights(k, req.dt)?;
            integrate_sqrt_weighted(req, &target, &rule, &mut diag)
        }
        Method::GaussJacobi { n } => {
            let rule = gauss_jacobi_sqrt(n, req.dt)?;
            integrate_sqrt_weighted(req, &target, &rule, &mut diag)
        }
        Method::AdaptiveDyadic { n, .. } => {
            let delta = req.split_delta();
            let rule = dyadic_rule(n, delta, req.dt)?;
            integrate_plain(req, &target, &rule, &mut diag) + tail(req, &target, delta, &mut diag)?
        }
        Method::Graded { n, .. } | Method::Hybrid { n, .. } => {
            let delta = req.split_delta();
            let rule = graded_rule(n, delta, req.dt)?;
            integrate_plain(req, &target, &rule, &mut diag) + tail(req, &target, delta, &mut diag)?
        }
    };
    Ok(Evaluation { value, diagnostics: diag })
}

/// Evaluates the bridge potential: the layer over `[t_final - 2 dt,
/// t_final - dt]` observed at `t_final`. Quadrature methods use a single
/// Gauss–Legendre panel in the lag with the method's node count (16 for
/// methods without one).
pub fn eval_bridge(req: &PotentialRequest) -> Result<Evaluation, PotentialError> {
    req.validate()?;
    let mut diag = Diagnostics::default();
    if req.density.is_zero() {
        return Ok(Evaluation { value: 0.0, diagnostics: diag });
    }
    let value = match req.method {
        Method::Asymptotic => {
            let frame = local_frame(req.curve, req.target, req.dt, req.t_final)?;
            let input = AsymptoticInput::new(frame, density_at(req, &frame));
            let v = match req.layer {
                Layer::Single => asym_bridge_single(&input),
                Layer::Double => asym_bridge_double(&input),
            };
            diag.asymptotic_part = v;
            v
        }
        m => {
            let n = m.order().filter(|&n| n > 0).unwrap_or(16);
            let target = SliceTarget::new(req.curve, req.target, req.t_final);
            let rule = gauss_legendre(n, req.dt, 2.0 * req.dt);
            integrate_plain(req, &target, &rule, &mut diag)
        }
    };
    Ok(Evaluation { value, diagnostics: diag })
}

fn density_at(req: &PotentialRequest, frame: &LocalFrame) -> f64 {
    req.density.value(frame.x0, frame.lambda0, req.t_final)
}

/// Asymptotic formula for the local potential with time parameter
/// `frame.dt`. The double layer uses the higher-order expansion close to
/// the boundary (`0 < |c| < 0.1`), where the leading one loses an order.
pub(crate) fn asymptotic_local(req: &PotentialRequest, frame: &LocalFrame) -> Result<f64, PotentialError> {
    let input = AsymptoticInput::new(*frame, density_at(req, frame));
    Ok(match req.layer {
        Layer::Single => asym_single(&input),
        Layer::Double => {
            if frame.c != 0.0 && frame.c.abs() < 0.1 {
                let jet = density_jet(req.curve, req.density, frame)?;
                asym_double(&input.with_derivatives(jet.arc_second, jet.normal_time), DoubleOrder::Higher)?
            } else {
                asym_double(&input, DoubleOrder::Leading)?
            }
        }
    })
}

/// Asymptotic contribution of the lags `[0, delta]`.
pub(crate) fn tail(
    req: &PotentialRequest,
    target: &SliceTarget,
    delta: f64,
    diag: &mut Diagnostics,
) -> Result<f64, PotentialError> {
    let frame = match target.anchor {
        Some(a) => a.frame.with_time_scale(delta),
        None => {
            // no unique closest point; harmless when the target is far
            let distance = crate::geometry::closest_point(req.curve, req.target, req.t_final)
                .map(|p| p.distance)
                .or_else(|e| match e {
                    GeometryError::AmbiguousProjection { first, .. } => Ok(first),
                    other => Err(other),
                })?;
            if distance > TAIL_CUTOFF * delta.sqrt() {
                return Ok(0.0);
            }
            return Err(GeometryError::AmbiguousProjection {
                first: distance,
                second: distance,
                lambda_a: f64::NAN,
                lambda_b: f64::NAN,
            }
            .into());
        }
    };
    if frame.c.abs() > TAIL_CUTOFF {
        return Ok(0.0);
    }
    let v = asymptotic_local(req, &frame)?;
    diag.asymptotic_part += v;
    Ok(v)
}

/// `sum_j w_j B(l_j) / sqrt(4 pi)` for rules carrying the `l^{-1/2}` weight.
fn integrate_sqrt_weighted(
    req: &PotentialRequest,
    target: &SliceTarget,
    rule: &TimeRule,
    diag: &mut Diagnostics,
) -> f64 {
    let c = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    accumulate(req, target, rule, diag, |_| c)
}

/// `sum_j w_j B(l_j) / sqrt(4 pi l_j)` for plain rules in the lag.
pub(crate) fn integrate_plain(
    req: &PotentialRequest,
    target: &SliceTarget,
    rule: &TimeRule,
    diag: &mut Diagnostics,
) -> f64 {
    accumulate(req, target, rule, diag, |l| 1.0 / (4.0 * std::f64::consts::PI * l).sqrt())
}

fn accumulate(
    req: &PotentialRequest,
    target: &SliceTarget,
    rule: &TimeRule,
    diag: &mut Diagnostics,
    factor: impl Fn(f64) -> f64,
) -> f64 {
    let mut sum = 0.0;
    for (&l, &w) in rule.nodes.iter().zip(&rule.weights) {
        let s = spatial_slice(req.layer, req.curve, req.density, target, req.t_final, l, &req.spatial);
        let f = factor(l);
        sum += w * f * s.value;
        diag.magnitude += (w * f).abs() * s.magnitude;
        diag.spatial_evaluations += s.evaluations;
        if !s.resolved {
            diag.warnings.push(Warning::SpatialUnresolved { lag: l });
        }
    }
    diag.time_nodes += rule.len();
    diag.quadrature_part += sum;
    sum
}

fn check_truncation(req: &PotentialRequest, target: &SliceTarget, diag: &mut Diagnostics) {
    if req.curve.is_closed() {
        return;
    }
    if let Some(a) = target.anchor {
        let end_distance = distance_to_curve_end(req.curve, a.frame.lambda0, req.t_final);
        let required = req.dt.sqrt() * (1.0 / req.tolerance).ln();
        if end_distance < required {
            log::warn!("open curve truncation: end at {end_distance:e}, need {required:e}");
            diag.warnings.push(Warning::OpenCurveTruncation { end_distance, required });
        }
    }
}
