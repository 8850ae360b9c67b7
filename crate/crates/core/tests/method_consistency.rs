//! Hybrid and adaptive-dyadic evaluations against the oracle on every
//! built-in geometry.
//!
//! Sixteen graded nodes are not enough on the high-curvature cases at
//! `dt = 1e-2` (errors near 1e-7 there), so the hybrid rule runs with 32.

use heatlayer::geometry::{
    BoundaryCurve, Circle, CosineDensity, Density, Ellipse, EllipseBenchmarkDensity, LinearDensity, Parabola, Segment,
    Vec2,
};
use heatlayer::oracle::Oracle;
use heatlayer::potentials::{eval_potential, Layer, Method, PotentialRequest};

const EPS: f64 = 1e-10;

struct Case {
    name: &'static str,
    curve: Box<dyn BoundaryCurve>,
    density: Box<dyn Density>,
    target: Vec2,
    /// Evaluation time; `None` means `t_final = dt`.
    t_final: Option<f64>,
}

fn linear() -> LinearDensity {
    LinearDensity {
        c0: 1.0,
        cx: 0.5,
        cy: 0.3,
        ct: 2.0,
    }
}

fn cases() -> Vec<Case> {
    let unit = Circle::unit();
    let on_circle = unit.position(0.3, 0.0);
    vec![
        Case {
            name: "segment",
            curve: Box::new(Segment::new(1.0).unwrap()),
            density: Box::new(CosineDensity { k: 1.0 }),
            target: Vec2::new(0.1, 0.0),
            t_final: None,
        },
        Case {
            name: "parabola a=2",
            curve: Box::new(Parabola::new(2.0).unwrap()),
            density: Box::new(linear()),
            target: Vec2::ZERO,
            t_final: None,
        },
        Case {
            name: "parabola a=20",
            curve: Box::new(Parabola::new(20.0).unwrap()),
            density: Box::new(linear()),
            target: Vec2::ZERO,
            t_final: None,
        },
        Case {
            name: "unit circle",
            curve: Box::new(unit),
            density: Box::new(linear()),
            target: on_circle,
            t_final: None,
        },
        Case {
            name: "shrinking circle",
            curve: Box::new(Circle::new(Vec2::ZERO, 1.0, -0.5).unwrap()),
            density: Box::new(linear()),
            target: Vec2::new(0.0, 0.75),
            t_final: Some(0.5),
        },
        Case {
            name: "moving ellipse",
            curve: Box::new(Ellipse::moving_benchmark()),
            density: Box::new(EllipseBenchmarkDensity),
            target: Vec2::new(21.5, 0.0),
            t_final: Some(1.0),
        },
    ]
}

fn check(layer: Layer) {
    let oracle = Oracle::uncached();
    let mut failures = Vec::new();
    for case in cases() {
        for dt in [1e-4, 1e-2] {
            let req = PotentialRequest::new(layer, case.curve.as_ref(), case.density.as_ref(), case.target, dt, Method::Asymptotic)
                .with_t_final(case.t_final.unwrap_or(dt));
            let reference = oracle.reference_potential(&req, 1e-12).unwrap().value;
            for method in [Method::Hybrid { n: 32, delta: None }, Method::AdaptiveDyadic { n: 16, delta: None }] {
                let value = eval_potential(&req.with_method(method)).unwrap().value;
                let err = (value - reference).abs();
                if err > EPS * reference.abs().max(1e-3) {
                    failures.push(format!("{} dt={dt:e} {}: {value} vs {reference} ({err:.1e})", case.name, method.name()));
                }
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn single_layer_methods_agree_with_oracle() {
    check(Layer::Single);
}

#[test]
fn double_layer_methods_agree_with_oracle() {
    check(Layer::Double);
}
