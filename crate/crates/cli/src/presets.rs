//! Built-in experiments: the three figure sweeps and the convergence
//! studies.

use heatlayer::geometry::{InteriorSide, Vec2};
use heatlayer::potentials::{Layer, Method};

use crate::config::{geometric_grid, CaseConfig, DensitySpec, ExperimentConfig, GeometrySpec};
use crate::experiment::{ModelRule, Study};

/// Split point for the hybrid rule in the figure sweeps: the asymptotic
/// tail over `delta` then contributes below 1e-13 (relative) for smooth data.
pub const FIGURE_DELTA: f64 = 1e-12;

/// Bump width of the stiffness study.
pub const STIFFNESS_WIDTH: f64 = 1e-4;

pub const CONVERGENCE_PRESETS: [&str; 3] = ["model-graded", "model-dyadic", "stiffness"];

fn figure_methods() -> Vec<Method> {
    let mut methods = vec![Method::Asymptotic];
    methods.extend([4, 8, 16].map(|n| Method::GaussJacobi { n }));
    methods.extend([4, 8, 16].map(|n| Method::Hybrid {
        n,
        delta: Some(FIGURE_DELTA),
    }));
    methods
}

/// 5 points per decade over `[1e-6, 1e-1]`.
pub fn figure_dts() -> Vec<f64> {
    geometric_grid(1e-6, 1e-1, 5)
}

fn case(label: &str, geometry: GeometrySpec, density: DensitySpec, target: Vec2, t_final: Option<f64>) -> CaseConfig {
    CaseConfig {
        label: label.to_string(),
        geometry,
        interior: InteriorSide::Left,
        density,
        target,
        t_final,
    }
}

/// Figure sweeps:
/// 1. single layer, parabolas `a = 2, 20`, `sigma = 1`, target at the vertex;
/// 2. single layer, segment `[-1, 1]`, `sigma = cos(2 k pi y1)` for
///    `k = 10, 100`, target at the origin;
/// 3. double layer, translating ellipse, `mu = cos(y1 t) + sin(10 t)`,
///    target `(21.5, 0)` at `t = 1`.
pub fn figure(which: u8) -> Option<ExperimentConfig> {
    let (cases, layer) = match which {
        1 => (
            [2.0, 20.0]
                .map(|a| {
                    case(
                        &format!("parabola a={a}"),
                        GeometrySpec::Parabola { a },
                        DensitySpec::Constant(1.0),
                        Vec2::ZERO,
                        None,
                    )
                })
                .to_vec(),
            Layer::Single,
        ),
        2 => (
            [10.0, 100.0]
                .map(|k| {
                    case(
                        &format!("segment k={k}"),
                        GeometrySpec::Segment { half_length: 1.0 },
                        DensitySpec::Cosine { k },
                        Vec2::ZERO,
                        None,
                    )
                })
                .to_vec(),
            Layer::Single,
        ),
        3 => (
            vec![case(
                "ellipse",
                GeometrySpec::Ellipse {
                    semi_x: 20.0,
                    semi_y: 1.0,
                    center: Vec2::ZERO,
                    velocity: Vec2::new(1.5, 0.0),
                },
                DensitySpec::EllipseBenchmark,
                Vec2::new(21.5, 0.0),
                Some(1.0),
            )],
            Layer::Double,
        ),
        _ => return None,
    };
    Some(ExperimentConfig {
        cases,
        layer,
        methods: figure_methods(),
        dts: figure_dts(),
        tolerance: 1e-12,
        oracle_tolerance: 1e-12,
        output: None,
    })
}

/// Time steps of the stiffness study: `16 d` down to `d / 16` by halving.
pub fn stiffness_dts() -> Vec<f64> {
    (-4..=4).rev().map(|j| STIFFNESS_WIDTH * 2f64.powi(j)).collect()
}

/// Convergence studies:
/// * `model-graded`: graded rule, `n = 2..16`, on `int_1e-9^1e-2 t^{-1/2}`;
/// * `model-dyadic`: dyadic Gauss–Legendre, `n = 2..10`, same integral;
/// * `stiffness`: product integration `k = 2, 4, 6` on a Gaussian bump of
///   width `d = 1e-4` on a straight line, `dt` from `16 d` to `d / 16`.
pub fn convergence(name: &str) -> Option<Study> {
    Some(match name {
        "model-graded" => Study::ModelIntegral {
            rule: ModelRule::Graded,
            orders: (2..=16).collect(),
            delta: 1e-9,
            dt: 1e-2,
        },
        "model-dyadic" => Study::ModelIntegral {
            rule: ModelRule::Dyadic,
            orders: (2..=10).collect(),
            delta: 1e-9,
            dt: 1e-2,
        },
        "stiffness" => Study::Potentials(ExperimentConfig {
            cases: vec![case(
                "bump d=1e-4",
                GeometrySpec::Segment { half_length: 4.0 },
                DensitySpec::Bump {
                    width: STIFFNESS_WIDTH,
                    center: 0.0,
                },
                Vec2::ZERO,
                None,
            )],
            layer: Layer::Single,
            methods: [2, 4, 6].map(|k| Method::ProductIntegration { k }).to_vec(),
            dts: stiffness_dts(),
            tolerance: 1e-12,
            oracle_tolerance: 1e-12,
            output: None,
        }),
        _ => return None,
    })
}
