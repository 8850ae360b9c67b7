//! High-accuracy reference values.
//!
//! Every reference is computed by two independent time discretizations on
//! fine spatial quadrature, and only returned when they agree:
//!
//! * route A: 20-point Gauss–Legendre on dyadic panels down to a lag of
//!   `1e-14`, with the asymptotic tail Richardson-extrapolated from `delta`
//!   and `delta / 4`;
//! * route B: exponentially graded panels, one 24-point panel per decade of
//!   lag, down to `1e-13` plus the asymptotic tail.
//!
//! Bridge references compare a 48-point panel with a composite 4 x 20 rule.
//!
//! Results for requests whose curve and density have descriptors are cached
//! on disk under `$HEATLAYER_CACHE` (default `.cache`).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::potentials::{
    integrate_plain, tail, Diagnostics, PotentialError, PotentialRequest, SliceTarget, SpatialOptions,
};
use crate::quadrature::{dyadic_rule, gauss_legendre, graded_rule, RuleKind, TimeRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle routes disagree: {route_a:e} vs {route_b:e} (tolerance {tolerance:e})")]
    NoConvergence { route_a: f64, route_b: f64, tolerance: f64 },
    #[error("oracle tolerance must be at least 1e-12, got {0:e}")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    /// `|route_a - route_b|`.
    pub error_estimate: f64,
    pub route_a: f64,
    pub route_b: f64,
    pub time_nodes: usize,
    pub spatial_evaluations: usize,
}

/// Bumped whenever the numerics behind cached values change.
pub const CACHE_VERSION: u32 = 1;

pub const MIN_TOLERANCE: f64 = 1e-12;

const ROUTE_A_ORDER: usize = 20;
const ROUTE_A_DELTA: f64 = 1e-14;
const ROUTE_B_ORDER: usize = 24;
const ROUTE_B_DELTA: f64 = 1e-13;
const BRIDGE_ORDER: usize = 48;

/// `int_delta^dt t^{-1/2} dt = 2 (sqrt(dt) - sqrt(delta))`.
pub fn reference_model_integral(delta: f64, dt: f64) -> f64 {
    2.0 * (dt.sqrt() - delta.sqrt())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CachePolicy {
    /// `$HEATLAYER_CACHE`, or `.cache` when unset.
    FromEnv,
    Dir(PathBuf),
    Disabled,
}

impl CachePolicy {
    fn dir(&self) -> Option<PathBuf> {
        match self {
            CachePolicy::FromEnv => Some(
                std::env::var_os("HEATLAYER_CACHE")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(".cache")),
            ),
            CachePolicy::Dir(p) => Some(p.clone()),
            CachePolicy::Disabled => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub cache: CachePolicy,
    pub spatial: SpatialOptions,
}

impl Default for Oracle {
    fn default() -> Self {
        Self {
            cache: CachePolicy::FromEnv,
            spatial: SpatialOptions::fine(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Operator {
    Local,
    Bridge,
}

impl Oracle {
    pub fn uncached() -> Self {
        Self {
            cache: CachePolicy::Disabled,
            ..Self::default()
        }
    }

    pub fn with_cache_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            cache: CachePolicy::Dir(dir.into()),
            ..Self::default()
        }
    }

    /// Reference for the local potential of `req` (its method is ignored).
    pub fn reference_potential(&self, req: &PotentialRequest, tol: f64) -> Result<OracleResult, OracleError> {
        self.cached(req, tol, Operator::Local)
    }

    /// Reference for the bridge potential of `req`.
    pub fn reference_bridge(&self, req: &PotentialRequest, tol: f64) -> Result<OracleResult, OracleError> {
        self.cached(req, tol, Operator::Bridge)
    }

    fn cached(&self, req: &PotentialRequest, tol: f64, op: Operator) -> Result<OracleResult, OracleError> {
        if !(tol >= MIN_TOLERANCE) {
            return Err(OracleError::InvalidTolerance(tol));
        }
        if req.density.is_zero() {
            return Ok(OracleResult {
                value: 0.0,
                error_estimate: 0.0,
                route_a: 0.0,
                route_b: 0.0,
                time_nodes: 0,
                spatial_evaluations: 0,
            });
        }
        let key = self.cache.dir().and_then(|dir| cache_key(req, tol, op).map(|k| (dir, k)));
        if let Some((dir, key)) = &key {
            if let Some(hit) = read_cache(dir, key) {
                return Ok(hit);
            }
        }
        let req = req.with_spatial(self.spatial);
        let result = match op {
            Operator::Local => compute_local(&req, tol),
            Operator::Bridge => compute_bridge(&req, tol),
        }?;
        if let Some((dir, key)) = &key {
            if let Err(e) = write_cache(dir, key, &result) {
                log::warn!("oracle cache write failed: {e}");
            }
        }
        Ok(result)
    }
}

/// Reference local potential with the default oracle settings.
pub fn reference_potential(req: &PotentialRequest, tol: f64) -> Result<OracleResult, OracleError> {
    Oracle::default().reference_potential(req, tol)
}

/// Reference bridge potential with the default oracle settings.
pub fn reference_bridge(req: &PotentialRequest, tol: f64) -> Result<OracleResult, OracleError> {
    Oracle::default().reference_bridge(req, tol)
}

fn agree(a: f64, b: f64, magnitude: f64, tol: f64, diag: &Diagnostics) -> Result<OracleResult, OracleError> {
    let scale = a.abs().max(b.abs()).max(1e-3 * magnitude);
    let err = (a - b).abs();
    if !(err <= tol * scale) {
        return Err(OracleError::NoConvergence {
            route_a: a,
            route_b: b,
            tolerance: tol,
        });
    }
    Ok(OracleResult {
        value: a,
        error_estimate: err,
        route_a: a,
        route_b: b,
        time_nodes: diag.time_nodes,
        spatial_evaluations: diag.spatial_evaluations,
    })
}

fn compute_local(req: &PotentialRequest, tol: f64) -> Result<OracleResult, OracleError> {
    let target = SliceTarget::new(req.curve, req.target, req.t_final);
    let mut diag = Diagnostics::default();

    // route A
    let delta_a = ROUTE_A_DELTA.min(1e-3 * req.dt);
    let main = dyadic_rule(ROUTE_A_ORDER, delta_a, req.dt).map_err(PotentialError::from)?;
    let inner = dyadic_rule(ROUTE_A_ORDER, 0.25 * delta_a, delta_a).map_err(PotentialError::from)?;
    let q_main = integrate_plain(req, &target, &main, &mut diag);
    let q_inner = integrate_plain(req, &target, &inner, &mut diag);
    let tail_coarse = tail(req, &target, delta_a, &mut diag)?;
    let tail_fine = tail(req, &target, 0.25 * delta_a, &mut diag)?;
    let route_a = q_main + (8.0 * (q_inner + tail_fine) - tail_coarse) / 7.0;
    let magnitude = diag.magnitude;

    // route B
    let delta_b = ROUTE_B_DELTA.min(1e-2 * req.dt);
    let graded = graded_per_decade(ROUTE_B_ORDER, delta_b, req.dt)?;
    let route_b = integrate_plain(req, &target, &graded, &mut diag) + tail(req, &target, delta_b, &mut diag)?;

    agree(route_a, route_b, magnitude, tol, &diag)
}

fn compute_bridge(req: &PotentialRequest, tol: f64) -> Result<OracleResult, OracleError> {
    let target = SliceTarget::new(req.curve, req.target, req.t_final);
    let mut diag = Diagnostics::default();
    let (lo, hi) = (req.dt, 2.0 * req.dt);
    let single = gauss_legendre(BRIDGE_ORDER, lo, hi);
    let route_a = integrate_plain(req, &target, &single, &mut diag);
    let magnitude = diag.magnitude;
    let composite = composite_legendre(ROUTE_A_ORDER, 4, lo, hi);
    let route_b = integrate_plain(req, &target, &composite, &mut diag);
    agree(route_a, route_b, magnitude, tol, &diag)
}

/// Graded rule on `[delta, dt]` split into panels of at most one decade.
fn graded_per_decade(n: usize, delta: f64, dt: f64) -> Result<TimeRule, PotentialError> {
    let decades = (dt / delta).log10().ceil().max(1.0) as usize;
    let ratio = (delta / dt).powf(1.0 / decades as f64);
    let mut nodes = Vec::with_capacity(n * decades);
    let mut weights = Vec::with_capacity(n * decades);
    let mut hi = dt;
    for i in 0..decades {
        let lo = if i + 1 == decades { delta } else { hi * ratio };
        let panel = graded_rule(n, lo, hi)?;
        nodes.extend(panel.nodes);
        weights.extend(panel.weights);
        hi = lo;
    }
    Ok(TimeRule {
        nodes,
        weights,
        kind: RuleKind::Graded { n, delta },
        interval: (delta, dt),
    })
}

fn composite_legendre(n: usize, panels: usize, a: f64, b: f64) -> TimeRule {
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(n * panels);
    let mut weights = Vec::with_capacity(n * panels);
    for p in 0..panels {
        let g = gauss_legendre(n, a + p as f64 * h, a + (p + 1) as f64 * h);
        nodes.extend(g.nodes);
        weights.extend(g.weights);
    }
    TimeRule {
        nodes,
        weights,
        kind: RuleKind::GaussLegendre { n },
        interval: (a, b),
    }
}

fn cache_key(req: &PotentialRequest, tol: f64, op: Operator) -> Option<String> {
    let curve = req.curve.descriptor()?;
    let density = req.density.descriptor()?;
    let canonical = format!(
        "v{CACHE_VERSION}|{op:?}|{}|{curve}|{density}|{:e},{:e}|t={:e}|dt={:e}|tol={tol:e}",
        req.layer, req.target.x, req.target.y, req.t_final, req.dt
    );
    let digest = Sha256::digest(canonical.as_bytes());
    Some(hex::encode(digest))
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    version: u32,
    result: OracleResult,
}

fn read_cache(dir: &Path, key: &str) -> Option<OracleResult> {
    let text = std::fs::read_to_string(dir.join(format!("{key}.json"))).ok()?;
    let entry: CacheEntry = serde_json::from_str(&text).ok()?;
    (entry.version == CACHE_VERSION).then_some(entry.result)
}

/// Writes through a temporary file and renames it into place, so concurrent
/// readers never observe a partial entry.
fn write_cache(dir: &Path, key: &str, result: &OracleResult) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let entry = CacheEntry {
        version: CACHE_VERSION,
        result: *result,
    };
    let json = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(json.as_bytes())?;
    tmp.persist(dir.join(format!("{key}.json"))).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConstantDensity, FnDensity, GaussianBump, Segment, Vec2};
    use crate::potentials::{Layer, Method};
    use std::f64::consts::PI;

    #[test]
    fn model_integral() {
        assert_eq!(reference_model_integral(0.25, 1.0), 1.0);
        assert_eq!(reference_model_integral(0.3, 0.3), 0.0);
        let v = reference_model_integral(1e-9, 1e-2);
        assert!((v - 2.0 * (0.1 - 1e-9f64.sqrt())).abs() < 1e-17);
    }

    #[test]
    fn flat_segment_anchor() {
        let seg = Segment::new(3.0).unwrap();
        let dt: f64 = 0.01;
        let req = PotentialRequest::new(Layer::Single, &seg, &ConstantDensity(1.0), Vec2::ZERO, dt, Method::Asymptotic);
        let r = Oracle::uncached().reference_potential(&req, 1e-12).unwrap();
        let exact = (dt / PI).sqrt();
        assert!((r.route_a - exact).abs() < 1e-12 * exact, "{r:?}");
        assert!((r.route_b - exact).abs() < 1e-12 * exact, "{r:?}");
    }

    #[test]
    fn bump_anchor() {
        let seg = Segment::new(4.0).unwrap();
        let d = 0.01;
        let dt: f64 = 0.04;
        let bump = GaussianBump::new(d);
        let req = PotentialRequest::new(Layer::Single, &seg, &bump, Vec2::ZERO, dt, Method::Asymptotic);
        let exact = (dt / d).sqrt().asinh() / (2.0 * PI);
        let r = Oracle::uncached().reference_potential(&req, 1e-11).unwrap();
        assert!((r.value - exact).abs() < 1e-11 * exact, "{r:?} vs {exact}");
    }

    #[test]
    fn zero_density_is_exact_zero() {
        let seg = Segment::new(1.0).unwrap();
        let req = PotentialRequest::new(Layer::Double, &seg, &ConstantDensity(0.0), Vec2::ZERO, 0.1, Method::Asymptotic);
        assert_eq!(Oracle::uncached().reference_potential(&req, 1e-12).unwrap().value, 0.0);
    }

    #[test]
    fn tolerance_floor() {
        let seg = Segment::new(1.0).unwrap();
        let req = PotentialRequest::new(Layer::Single, &seg, &ConstantDensity(1.0), Vec2::ZERO, 0.1, Method::Asymptotic);
        assert_eq!(
            Oracle::uncached().reference_potential(&req, 1e-13),
            Err(OracleError::InvalidTolerance(1e-13))
        );
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let oracle = Oracle::with_cache_dir(dir.path());
        let seg = Segment::new(3.0).unwrap();
        let req = PotentialRequest::new(Layer::Single, &seg, &ConstantDensity(1.0), Vec2::new(0.0, 0.01), 1e-3, Method::Asymptotic);
        let first = oracle.reference_potential(&req, 1e-12).unwrap();
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
        let second = oracle.reference_potential(&req, 1e-12).unwrap();
        assert_eq!(first, second);

        // stale version stamps are ignored
        let path = entries[0].as_ref().unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace(&format!("\"version\":{CACHE_VERSION}"), "\"version\":0")).unwrap();
        let key = path.file_stem().unwrap().to_str().unwrap().to_string();
        assert!(read_cache(dir.path(), &key).is_none());
    }

    #[test]
    fn closures_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let oracle = Oracle::with_cache_dir(dir.path());
        let seg = Segment::new(3.0).unwrap();
        let dens = FnDensity::new(|_, _, _| 1.0);
        let req = PotentialRequest::new(Layer::Single, &seg, &dens, Vec2::ZERO, 1e-3, Method::Asymptotic);
        oracle.reference_potential(&req, 1e-12).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).map(|d| d.count()).unwrap_or(0), 0);
    }
}
