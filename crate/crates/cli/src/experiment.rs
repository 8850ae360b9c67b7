//! Sweeps over (case, method, time step) with oracle comparison, and their
//! CSV form.

use std::cmp::Ordering;
use std::io::Write;
use std::time::Instant;

use heatlayer::geometry::{BoundaryCurve, Density};
use heatlayer::oracle::{reference_model_integral, Oracle, OracleError};
use heatlayer::potentials::{eval_potential, Method, PotentialRequest};
use heatlayer::quadrature::{dyadic_rule, graded_rule};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Relative error above which a row is flagged `inaccurate`.
pub const INACCURATE: f64 = 1e-2;

pub const COLUMNS: [&str; 9] = ["case", "method", "n", "dt", "value", "oracle", "abs_err", "rel_err", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    /// Relative error at or above [`INACCURATE`].
    Inaccurate,
    /// The evaluator reported an unresolved spatial integral.
    Unresolved,
    /// The oracle's two routes disagreed; no reference is available.
    OracleDisagreement,
    /// The evaluator itself failed.
    EvalError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Inaccurate => "inaccurate",
            Status::Unresolved => "unresolved",
            Status::OracleDisagreement => "oracle-disagreement",
            Status::EvalError => "eval-error",
        }
    }
}

/// One row of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub case: String,
    pub method: String,
    /// `n` or `k`; `None` for the asymptotic formula.
    pub n: Option<usize>,
    pub dt: f64,
    pub value: f64,
    /// Reference value; NaN when unavailable.
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub status: Status,
    /// Seconds spent in the evaluation (not the oracle).
    pub wall_time: f64,
    /// Evaluator or oracle error message, if any (not written to CSV).
    pub note: Option<String>,
}

impl ConvergenceRecord {
    fn new(case: &str, method: &Method, dt: f64, value: f64, oracle: f64) -> Self {
        let abs_err = (value - oracle).abs();
        let rel_err = if oracle != 0.0 { abs_err / oracle.abs() } else { abs_err };
        Self {
            case: case.to_string(),
            method: method.name().to_string(),
            n: method.order(),
            dt,
            value,
            oracle,
            abs_err,
            rel_err,
            status: if rel_err >= INACCURATE { Status::Inaccurate } else { Status::Ok },
            wall_time: 0.0,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRule {
    Graded,
    Dyadic,
}

/// What a run computes.
#[derive(Debug, Clone, PartialEq)]
pub enum Study {
    Potentials(ExperimentConfig),
    /// The model integral `int_delta^dt t^{-1/2} dt` under a time rule.
    ModelIntegral {
        rule: ModelRule,
        orders: Vec<usize>,
        delta: f64,
        dt: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    /// Reference evaluator; `None` skips the comparison.
    pub oracle: Option<Oracle>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            oracle: Some(Oracle::default()),
        }
    }
}

pub fn run(study: &Study, opts: &RunOptions) -> Result<Vec<ConvergenceRecord>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build()?;
    let mut rows = pool.install(|| match study {
        Study::Potentials(config) => run_potentials(config, opts.oracle.as_ref()),
        Study::ModelIntegral { rule, orders, delta, dt } => run_model(*rule, orders, *delta, *dt),
    })?;
    sort_rows(&mut rows, study);
    Ok(rows)
}

fn run_model(rule: ModelRule, orders: &[usize], delta: f64, dt: f64) -> Result<Vec<ConvergenceRecord>, CliError> {
    let exact = reference_model_integral(delta, dt);
    orders
        .iter()
        .map(|&n| {
            let (time_rule, method) = match rule {
                ModelRule::Graded => (graded_rule(n, delta, dt)?, Method::Graded { n, delta: Some(delta) }),
                ModelRule::Dyadic => (dyadic_rule(n, delta, dt)?, Method::AdaptiveDyadic { n, delta: Some(delta) }),
            };
            let start = Instant::now();
            let value = time_rule.apply(|t| t.powf(-0.5));
            let mut row = ConvergenceRecord::new("model", &method, dt, value, exact);
            row.wall_time = start.elapsed().as_secs_f64();
            Ok(row)
        })
        .collect()
}

struct BuiltCase {
    label: String,
    curve: Box<dyn BoundaryCurve>,
    density: Box<dyn Density>,
    target: heatlayer::geometry::Vec2,
    t_final: Option<f64>,
}

fn request<'a>(config: &ExperimentConfig, case: &'a BuiltCase, dt: f64, method: Method) -> PotentialRequest<'a> {
    PotentialRequest::new(config.layer, case.curve.as_ref(), case.density.as_ref(), case.target, dt, method)
        .with_t_final(case.t_final.unwrap_or(dt))
        .with_tolerance(config.tolerance)
}

fn run_potentials(config: &ExperimentConfig, oracle: Option<&Oracle>) -> Result<Vec<ConvergenceRecord>, CliError> {
    let cases = config
        .cases
        .iter()
        .map(|c| {
            Ok(BuiltCase {
                label: c.label.clone(),
                curve: c.geometry.build(c.interior)?,
                density: c.density.build(),
                target: c.target,
                t_final: c.t_final,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let points: Vec<(usize, f64)> = (0..cases.len())
        .flat_map(|c| config.dts.iter().map(move |&dt| (c, dt)))
        .collect();
    let references: Vec<Option<Result<f64, OracleError>>> = points
        .par_iter()
        .map(|&(c, dt)| {
            oracle.map(|o| {
                let req = request(config, &cases[c], dt, Method::Asymptotic);
                let r = o.reference_potential(&req, config.oracle_tolerance).map(|r| r.value);
                if let Err(e) = &r {
                    log::error!("{} dt={dt:e}: {e}", cases[c].label);
                }
                r
            })
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..config.methods.len()).map(move |m| (p, m)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(p, m)| {
            let (c, dt) = points[p];
            let case = &cases[c];
            let method = config.methods[m];
            let start = Instant::now();
            let evaluation = eval_potential(&request(config, case, dt, method));
            let wall_time = start.elapsed().as_secs_f64();
            let reference = match &references[p] {
                None => Ok(f64::NAN),
                Some(r) => r.clone(),
            };
            let mut row = match (&evaluation, &reference) {
                (Ok(e), Ok(r)) => ConvergenceRecord::new(&case.label, &method, dt, e.value, *r),
                (Ok(e), Err(_)) => ConvergenceRecord::new(&case.label, &method, dt, e.value, f64::NAN),
                (Err(_), _) => ConvergenceRecord::new(&case.label, &method, dt, f64::NAN, f64::NAN),
            };
            if let Ok(e) = &evaluation {
                if e.diagnostics.has_resolution_warning() {
                    row.status = row.status.max(Status::Unresolved);
                }
                for w in &e.diagnostics.warnings {
                    log::warn!("{} {method} dt={dt:e}: {w}", case.label);
                }
            }
            if let Err(e) = &reference {
                row.status = row.status.max(Status::OracleDisagreement);
                row.note = Some(e.to_string());
            }
            if let Err(e) = &evaluation {
                log::error!("{} {method} dt={dt:e}: {e}", case.label);
                row.status = Status::EvalError;
                row.note = Some(e.to_string());
            }
            row.wall_time = wall_time;
            row
        })
        .collect();
    Ok(rows)
}

/// Case order as given; methods grouped by first appearance of their name,
/// then by `n`; time steps descending.
fn sort_rows(rows: &mut [ConvergenceRecord], study: &Study) {
    let (case_order, method_order): (Vec<String>, Vec<&'static str>) = match study {
        Study::Potentials(c) => (
            c.cases.iter().map(|c| c.label.clone()).collect(),
            c.methods.iter().map(Method::name).collect(),
        ),
        Study::ModelIntegral { .. } => (Vec::new(), Vec::new()),
    };
    let position = |list: &[String], x: &str| list.iter().position(|l| l == x).unwrap_or(usize::MAX);
    let method_position = |x: &str| method_order.iter().position(|&m| m == x).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        position(&case_order, &a.case)
            .cmp(&position(&case_order, &b.case))
            .then(method_position(&a.method).cmp(&method_position(&b.method)))
            .then(a.n.cmp(&b.n))
            .then(b.dt.partial_cmp(&a.dt).unwrap_or(Ordering::Equal))
    });
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the rows as CSV; `timing` appends a `wall_time_s` column, which
/// is the only nondeterministic field.
pub fn write_csv(out: impl Write, rows: &[ConvergenceRecord], timing: bool) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if timing {
        header.push("wall_time_s");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut fields = vec![
            r.case.clone(),
            r.method.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            sci(r.dt),
            sci(r.value),
            sci(r.oracle),
            sci(r.abs_err),
            sci(r.rel_err),
            r.status.as_str().to_string(),
        ];
        if timing {
            fields.push(sci(r.wall_time));
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CaseConfig, DensitySpec, GeometrySpec};
    use heatlayer::geometry::{InteriorSide, Vec2};
    use heatlayer::potentials::Layer;

    fn flat(methods: Vec<Method>, dts: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            cases: vec![CaseConfig {
                label: "flat".into(),
                geometry: GeometrySpec::Segment { half_length: 3.0 },
                interior: InteriorSide::Left,
                density: DensitySpec::Constant(1.0),
                target: Vec2::ZERO,
                t_final: None,
            }],
            layer: Layer::Single,
            methods,
            dts,
            tolerance: 1e-12,
            oracle_tolerance: 1e-12,
            output: None,
        }
    }

    #[test]
    fn rows_are_ordered_by_method_then_n_then_descending_dt() {
        let config = flat(
            vec![
                Method::Hybrid { n: 8, delta: None },
                Method::GaussJacobi { n: 4 },
                Method::Hybrid { n: 4, delta: None },
            ],
            vec![1e-4, 1e-2, 1e-3],
        );
        let opts = RunOptions { jobs: 2, oracle: None };
        let rows = run(&Study::Potentials(config), &opts).unwrap();
        let keys: Vec<(&str, Option<usize>, f64)> = rows.iter().map(|r| (r.method.as_str(), r.n, r.dt)).collect();
        assert_eq!(keys.len(), 9);
        assert_eq!(keys[0], ("hybrid", Some(4), 1e-2));
        assert_eq!(keys[2], ("hybrid", Some(4), 1e-4));
        assert_eq!(keys[3], ("hybrid", Some(8), 1e-2));
        assert_eq!(keys[6], ("gauss-jacobi", Some(4), 1e-2));
    }

    #[test]
    fn model_integral_rows() {
        let study = Study::ModelIntegral {
            rule: ModelRule::Graded,
            orders: vec![4, 12],
            delta: 1e-9,
            dt: 1e-2,
        };
        let rows = run(&study, &RunOptions::default()).unwrap();
        assert_eq!(rows[0].n, Some(4));
        assert!(rows[1].abs_err < 1e-9);
        assert_eq!(rows[1].oracle, reference_model_integral(1e-9, 1e-2));
    }

    #[test]
    fn csv_layout() {
        let mut row = ConvergenceRecord::new("c", &Method::Asymptotic, 0.01, 0.5, 0.25);
        row.wall_time = 1.5;
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row.clone()], false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "case,method,n,dt,value,oracle,abs_err,rel_err,status\n\
             c,asymptotic,,1.0000000000000000e-2,5.0000000000000000e-1,2.5000000000000000e-1,\
             2.5000000000000000e-1,1.0000000000000000e0,inaccurate\n"
        );
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row], true).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().next().unwrap().ends_with(",wall_time_s"));
    }
}
