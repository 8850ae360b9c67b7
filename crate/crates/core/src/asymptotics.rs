//! Short-time asymptotic approximations of the local layer potentials and of
//! the one-step-removed ("bridge") potentials.
//!
//! All formulas take a [`LocalFrame`] whose `dt` is the time parameter of
//! the expansion and whose `c = r / sqrt(dt)`. The density value (and, for
//! the higher-order double layer, its derivatives) are taken at `x0` and the
//! frame's final time.

use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

use crate::geometry::LocalFrame;
use crate::specfun::{e3half, erfc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticError {
    #[error("higher-order double layer expansion needs mu_ss and mu_tau")]
    MissingDerivatives,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticInput {
    pub frame: LocalFrame,
    /// Density at `(x0, t_final)`.
    pub density: f64,
    /// Arc-length second derivative of the density at `x0`.
    pub mu_ss: Option<f64>,
    /// Time derivative of the density following the boundary.
    pub mu_tau: Option<f64>,
}

impl AsymptoticInput {
    pub fn new(frame: LocalFrame, density: f64) -> Self {
        Self {
            frame,
            density,
            mu_ss: None,
            mu_tau: None,
        }
    }

    pub fn with_derivatives(mut self, mu_ss: f64, mu_tau: f64) -> Self {
        self.mu_ss = Some(mu_ss);
        self.mu_tau = Some(mu_tau);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleOrder {
    /// Error `O(dt)` off the boundary.
    Leading,
    /// Error `O(dt^{3/2})`; needs the density derivatives.
    Higher,
}

/// Shared special-function values at one frame.
struct Factors {
    sqrt_dt: f64,
    c: f64,
    sign: f64,
    e32: f64,
    erfc_half: f64,
}

impl Factors {
    fn new(frame: &LocalFrame) -> Self {
        let c = frame.c;
        let sign = if c > 0.0 {
            1.0
        } else if c < 0.0 {
            -1.0
        } else {
            0.0
        };
        Self {
            sqrt_dt: frame.dt.sqrt(),
            c,
            sign,
            e32: e3half(0.25 * c * c),
            erfc_half: erfc(0.5 * c.abs()),
        }
    }

    fn prefactor(&self) -> f64 {
        self.sqrt_dt / PI.sqrt()
    }
}

/// Local single layer:
/// `1/2 sqrt(dt/pi) E_{3/2}(c^2/4) (1 + (kappa - v)/2 c sqrt(dt)) sigma`.
pub fn asym_single(input: &AsymptoticInput) -> f64 {
    if input.density == 0.0 {
        return 0.0;
    }
    let f = Factors::new(&input.frame);
    let LocalFrame { kappa, v, .. } = input.frame;
    0.5 * f.prefactor() * f.e32 * (1.0 + 0.5 * (kappa - v) * f.c * f.sqrt_dt) * input.density
}

/// Local double layer. At `c = 0` the value is the principal part `D*`; the
/// one-sided limits are `D* -/+ mu / 2` (interior / exterior).
pub fn asym_double(input: &AsymptoticInput, order: DoubleOrder) -> Result<f64, AsymptoticError> {
    let mu = input.density;
    let f = Factors::new(&input.frame);
    let LocalFrame { kappa, v, dt, .. } = input.frame;
    let (c, s) = (f.c, f.sqrt_dt);
    match order {
        DoubleOrder::Leading => {
            if mu == 0.0 {
                return Ok(0.0);
            }
            let principal = -f.prefactor() * f.e32 * 0.25 * (kappa + v) * mu;
            let jump = -0.5 * f.sign * f.erfc_half * (1.0 + c * s * 0.5 * (kappa - v)) * mu;
            Ok(principal + jump)
        }
        DoubleOrder::Higher => {
            let (Some(mu_ss), Some(mu_tau)) = (input.mu_ss, input.mu_tau) else {
                return Err(AsymptoticError::MissingDerivatives);
            };
            let q = v * v + 3.0 * kappa * kappa - 2.0 * v * kappa;
            let principal = -f.prefactor() * f.e32 * 0.25 * (kappa + v) * mu;
            let jump = -0.5 * f.sign * f.erfc_half * (1.0 + c * s * 0.5 * (kappa - v) + c * c * dt * q / 8.0) * mu;
            // O(dt) part of the smooth term, from expanding the local graph
            // y = kappa s^2 / 2 - v (dt - tau) and the density to second order.
            let smooth_geom = (3.0 * v * v - 3.0 * kappa * kappa - 2.0 * kappa * v) / 16.0;
            let correction = c * dt / PI.sqrt() * f.e32 * (smooth_geom * mu - 0.25 * (mu_ss - mu_tau));
            Ok(principal + jump + correction)
        }
    }
}

/// `sqrt(2) E_{3/2}(c^2/8) - E_{3/2}(c^2/4)`; equals `2 (sqrt(2) - 1)` at
/// `c = 0`.
fn bridge_e32(c: f64) -> f64 {
    SQRT_2 * e3half(0.125 * c * c) - e3half(0.25 * c * c)
}

/// Single layer over `[t - 2 dt, t - dt]` evaluated at `t`.
///
/// At `c = 0` this reduces to `(sqrt(2) - 1) sqrt(dt/pi) sigma`, which is
/// the exact value for a flat static line.
pub fn asym_bridge_single(input: &AsymptoticInput) -> f64 {
    if input.density == 0.0 {
        return 0.0;
    }
    let f = Factors::new(&input.frame);
    let LocalFrame { kappa, v, .. } = input.frame;
    0.5 * f.prefactor() * bridge_e32(f.c) * (1.0 + 0.5 * (kappa - v) * f.c * f.sqrt_dt) * input.density
}

/// Double layer over `[t - 2 dt, t - dt]` evaluated at `t` (leading order).
pub fn asym_bridge_double(input: &AsymptoticInput) -> f64 {
    let mu = input.density;
    if mu == 0.0 {
        return 0.0;
    }
    let f = Factors::new(&input.frame);
    let LocalFrame { kappa, v, .. } = input.frame;
    let (c, s) = (f.c, f.sqrt_dt);
    let principal = -f.prefactor() * bridge_e32(c) * 0.25 * (kappa + v) * mu;
    let jump_profile = erfc(SQRT_2 * c.abs() / 4.0) - f.erfc_half;
    let jump = -0.5 * f.sign * jump_profile * (1.0 + c * s * 0.5 * (kappa - v)) * mu;
    principal + jump
}
