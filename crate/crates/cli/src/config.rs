//! Experiment configuration files.
//!
//! The format is a small INI dialect: `[section]` headers, `key = value`
//! pairs, and `#` or `;` comments running to the end of the line. Every diagnostic
//! carries the line it refers to.
//!
//! ```ini
//! [geometry]
//! kind = parabola        # segment | parabola | circle | ellipse
//! a = 20
//! interior = left        # side of increasing parameter holding the domain
//!
//! [density]
//! kind = constant        # constant | cosine | bump | ellipse-benchmark | linear
//! value = 1
//!
//! [target]
//! x = 0
//! y = 0
//! # t_final = 1          # default: the time step itself
//!
//! [time]
//! dt_min = 1e-6          # or a single `dt = ...`
//! dt_max = 1e-1
//! per_decade = 5
//!
//! [run]
//! layer = single         # single | double
//! tolerance = 1e-12
//! methods = asymptotic, gauss-jacobi(16), hybrid(16, 1e-12)
//!
//! [output]
//! path = fig1.csv
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use heatlayer::geometry::{
    BoundaryCurve, Circle, ConstantDensity, CosineDensity, Density, Ellipse, EllipseBenchmarkDensity, GaussianBump,
    InteriorSide, LinearDensity, Parabola, Segment, Vec2,
};
use heatlayer::potentials::{Layer, Method};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line number, when the problem is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn err(line: impl Into<Option<usize>>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: line.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed INI document, consumed key by key so that leftovers can be
/// reported as unknown.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ini {
    sections: BTreeMap<String, Section>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header"))?
                    .trim()
                    .to_ascii_lowercase();
                if name.is_empty() {
                    return Err(err(line, "empty section name"));
                }
                if ini.sections.contains_key(&name) {
                    return Err(err(line, format!("duplicate section [{name}]")));
                }
                ini.sections.insert(
                    name.clone(),
                    Section {
                        line,
                        entries: BTreeMap::new(),
                    },
                );
                current = Some(name);
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, found `{content}`")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(err(line, "missing key before `=`"));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| err(line, format!("key `{key}` outside of any section")))?;
            let entries = &mut ini.sections.get_mut(section).expect("section exists").entries;
            if entries.contains_key(&key) {
                return Err(err(line, format!("duplicate key `{key}` in [{section}]")));
            }
            entries.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(ini)
    }

    /// Sets `section.key = value`, as from a command-line override.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_ascii_lowercase())
            .or_default()
            .entries
            .insert(
                key.to_ascii_lowercase(),
                Entry {
                    value: value.to_string(),
                    line: 0,
                    used: false,
                },
            );
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn section_line(&self, section: &str) -> Option<usize> {
        self.sections.get(section).map(|s| s.line).filter(|&l| l > 0)
    }

    /// Raw value and its line (`None` for overrides).
    fn take(&mut self, section: &str, key: &str) -> Option<(String, Option<usize>)> {
        let entry = self.sections.get_mut(section)?.entries.get_mut(key)?;
        entry.used = true;
        Some((entry.value.clone(), Some(entry.line).filter(|&l| l > 0)))
    }

    fn require(&mut self, section: &str, key: &str) -> Result<(String, Option<usize>), ConfigError> {
        self.take(section, key).ok_or_else(|| {
            err(
                self.section_line(section),
                format!("missing required key `{key}` in [{section}]"),
            )
        })
    }

    fn float(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(section, key)
            .map(|(v, line)| parse_float(&v, line, key))
            .transpose()
    }

    fn float_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.float(section, key)?.unwrap_or(default))
    }

    fn required_float(&mut self, section: &str, key: &str) -> Result<f64, ConfigError> {
        let (v, line) = self.require(section, key)?;
        parse_float(&v, line, key)
    }

    fn finish(&self) -> Result<(), ConfigError> {
        for (name, section) in &self.sections {
            for (key, entry) in &section.entries {
                if !entry.used {
                    return Err(err(
                        Some(entry.line).filter(|&l| l > 0),
                        format!("unknown key `{key}` in [{name}]"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    // `#` and `;` start a comment anywhere; values never contain them
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_float(v: &str, line: Option<usize>, key: &str) -> Result<f64, ConfigError> {
    let x: f64 = v
        .parse()
        .map_err(|_| err(line, format!("`{key}` must be a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(err(line, format!("`{key}` must be finite, got `{v}`")));
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    Segment { half_length: f64 },
    Parabola { a: f64 },
    Circle { center: Vec2, radius: f64, rate: f64 },
    Ellipse { semi_x: f64, semi_y: f64, center: Vec2, velocity: Vec2 },
}

impl GeometrySpec {
    pub fn build(&self, interior: InteriorSide) -> Result<Box<dyn BoundaryCurve>, ConfigError> {
        let invalid = |e: heatlayer::geometry::GeometryError| err(None, e.to_string());
        Ok(match *self {
            GeometrySpec::Segment { half_length } => {
                let mut c = Segment::new(half_length).map_err(invalid)?;
                c.interior = interior;
                Box::new(c)
            }
            GeometrySpec::Parabola { a } => {
                let mut c = Parabola::new(a).map_err(invalid)?;
                c.interior = interior;
                Box::new(c)
            }
            GeometrySpec::Circle { center, radius, rate } => {
                let mut c = Circle::new(center, radius, rate).map_err(invalid)?;
                c.interior = interior;
                Box::new(c)
            }
            GeometrySpec::Ellipse {
                semi_x,
                semi_y,
                center,
                velocity,
            } => {
                let mut c = Ellipse::new(semi_x, semi_y, center, velocity).map_err(invalid)?;
                c.interior = interior;
                Box::new(c)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensitySpec {
    Constant(f64),
    Cosine { k: f64 },
    Bump { width: f64, center: f64 },
    EllipseBenchmark,
    Linear { c0: f64, cx: f64, cy: f64, ct: f64 },
}

impl DensitySpec {
    pub fn build(&self) -> Box<dyn Density> {
        match *self {
            DensitySpec::Constant(v) => Box::new(ConstantDensity(v)),
            DensitySpec::Cosine { k } => Box::new(CosineDensity { k }),
            DensitySpec::Bump { width, center } => Box::new(GaussianBump { width, center }),
            DensitySpec::EllipseBenchmark => Box::new(EllipseBenchmarkDensity),
            DensitySpec::Linear { c0, cx, cy, ct } => Box::new(LinearDensity { c0, cx, cy, ct }),
        }
    }
}

/// One geometry/density/target combination of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub label: String,
    pub geometry: GeometrySpec,
    pub interior: InteriorSide,
    pub density: DensitySpec,
    pub target: Vec2,
    /// Evaluation time; `None` evaluates at `t_final = dt`.
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cases: Vec<CaseConfig>,
    pub layer: Layer,
    pub methods: Vec<Method>,
    /// Time steps, in the order given (rows are sorted on output).
    pub dts: Vec<f64>,
    pub tolerance: f64,
    pub oracle_tolerance: f64,
    pub output: Option<PathBuf>,
}

/// `count` points per decade from `min` to `max`, both included.
pub fn geometric_grid(min: f64, max: f64, per_decade: usize) -> Vec<f64> {
    let (lo, hi) = (min.log10(), max.log10());
    let steps = ((hi - lo) * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / steps.max(1) as f64))
        .collect()
}

/// Parses `name`, `name(n)` or `name(n, delta)`.
pub fn parse_method(text: &str) -> Result<Method, String> {
    let text = text.trim();
    let (name, args) = match text.split_once('(') {
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("unbalanced parentheses in `{text}`"))?;
            (name.trim(), inner.split(',').map(str::trim).collect::<Vec<_>>())
        }
        None => (text, Vec::new()),
    };
    let order = |args: &[&str]| -> Result<usize, String> {
        let first = args.first().ok_or_else(|| format!("`{name}` needs an order, e.g. `{name}(16)`"))?;
        first.parse().map_err(|_| format!("invalid order `{first}` for `{name}`"))
    };
    let delta = |args: &[&str]| -> Result<Option<f64>, String> {
        match args.get(1) {
            None => Ok(None),
            Some(d) => {
                let v: f64 = d.parse().map_err(|_| format!("invalid delta `{d}` for `{name}`"))?;
                if v > 0.0 && v.is_finite() {
                    Ok(Some(v))
                } else {
                    Err(format!("delta must be positive, got `{d}`"))
                }
            }
        }
    };
    let max_args = match name {
        "asymptotic" => 0,
        "product-integration" | "gauss-jacobi" => 1,
        _ => 2,
    };
    if args.len() > max_args {
        return Err(format!("too many arguments for `{name}`"));
    }
    Ok(match name {
        "asymptotic" => Method::Asymptotic,
        "product-integration" => Method::ProductIntegration { k: order(&args)? },
        "gauss-jacobi" => Method::GaussJacobi { n: order(&args)? },
        "adaptive-dyadic" => Method::AdaptiveDyadic {
            n: order(&args)?,
            delta: delta(&args)?,
        },
        "graded" => Method::Graded {
            n: order(&args)?,
            delta: delta(&args)?,
        },
        "hybrid" => Method::Hybrid {
            n: order(&args)?,
            delta: delta(&args)?,
        },
        other => return Err(format!("unknown method `{other}`")),
    })
}

/// Splits a method list on commas outside parentheses.
fn split_methods(list: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0usize, 0usize);
    for (i, ch) in list.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(&list[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&list[start..]);
    out.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_ini(Ini::parse(text)?)
    }

    pub fn from_ini(mut ini: Ini) -> Result<Self, ConfigError> {
        for section in ["geometry", "density", "target", "time", "run"] {
            if !ini.has_section(section) {
                return Err(err(None, format!("missing section [{section}]")));
            }
        }

        let (kind, kind_line) = ini.require("geometry", "kind")?;
        let geometry_kind = kind.clone();
        let geometry = match kind.as_str() {
            "segment" => GeometrySpec::Segment {
                half_length: ini.float_or("geometry", "half_length", 1.0)?,
            },
            "parabola" => GeometrySpec::Parabola {
                a: ini.required_float("geometry", "a")?,
            },
            "circle" => GeometrySpec::Circle {
                center: Vec2::new(ini.float_or("geometry", "cx", 0.0)?, ini.float_or("geometry", "cy", 0.0)?),
                radius: ini.float_or("geometry", "radius", 1.0)?,
                rate: ini.float_or("geometry", "rate", 0.0)?,
            },
            "ellipse" => {
                let b = Ellipse::moving_benchmark();
                GeometrySpec::Ellipse {
                    semi_x: ini.float_or("geometry", "semi_x", b.semi_x)?,
                    semi_y: ini.float_or("geometry", "semi_y", b.semi_y)?,
                    center: Vec2::new(ini.float_or("geometry", "cx", 0.0)?, ini.float_or("geometry", "cy", 0.0)?),
                    velocity: Vec2::new(
                        ini.float_or("geometry", "vx", b.velocity.x)?,
                        ini.float_or("geometry", "vy", b.velocity.y)?,
                    ),
                }
            }
            other => return Err(err(kind_line, format!("unknown geometry `{other}`"))),
        };
        let interior = match ini.take("geometry", "interior") {
            None => InteriorSide::Left,
            Some((v, line)) => match v.as_str() {
                "left" => InteriorSide::Left,
                "right" => InteriorSide::Right,
                other => return Err(err(line, format!("interior must be `left` or `right`, got `{other}`"))),
            },
        };
        geometry.build(interior).map_err(|e| ConfigError { line: kind_line, ..e })?;

        let (kind, kind_line) = ini.require("density", "kind")?;
        let density = match kind.as_str() {
            "constant" => DensitySpec::Constant(ini.float_or("density", "value", 1.0)?),
            "cosine" => DensitySpec::Cosine {
                k: ini.required_float("density", "k")?,
            },
            "bump" => {
                let width = ini.required_float("density", "width")?;
                if !(width > 0.0) {
                    return Err(err(kind_line, "bump width must be positive"));
                }
                DensitySpec::Bump {
                    width,
                    center: ini.float_or("density", "center", 0.0)?,
                }
            }
            "ellipse-benchmark" => DensitySpec::EllipseBenchmark,
            "linear" => DensitySpec::Linear {
                c0: ini.float_or("density", "c0", 0.0)?,
                cx: ini.float_or("density", "cx", 0.0)?,
                cy: ini.float_or("density", "cy", 0.0)?,
                ct: ini.float_or("density", "ct", 0.0)?,
            },
            other => return Err(err(kind_line, format!("unknown density `{other}`"))),
        };

        let target = Vec2::new(ini.required_float("target", "x")?, ini.required_float("target", "y")?);
        let t_final = ini.float("target", "t_final")?;

        let dts = match ini.float("time", "dt")? {
            Some(dt) => {
                if ini.take("time", "dt_min").is_some() || ini.take("time", "dt_max").is_some() {
                    return Err(err(ini.section_line("time"), "give either `dt` or a `dt_min`/`dt_max` sweep"));
                }
                vec![dt]
            }
            None => {
                let min = ini.required_float("time", "dt_min")?;
                let max = ini.required_float("time", "dt_max")?;
                let (pd, pd_line) = ini.take("time", "per_decade").unwrap_or(("5".into(), None));
                let per_decade: usize = pd
                    .parse()
                    .ok()
                    .filter(|&p| p > 0)
                    .ok_or_else(|| err(pd_line, format!("per_decade must be a positive integer, got `{pd}`")))?;
                if !(min <= max) {
                    return Err(err(ini.section_line("time"), "dt_min must not exceed dt_max"));
                }
                geometric_grid(min, max, per_decade)
            }
        };
        if let Some(bad) = dts.iter().find(|&&dt| !(dt > 0.0)) {
            return Err(err(ini.section_line("time"), format!("time steps must be positive, got {bad}")));
        }

        let layer = match ini.take("run", "layer") {
            None => Layer::Single,
            Some((v, line)) => match v.as_str() {
                "single" => Layer::Single,
                "double" => Layer::Double,
                other => return Err(err(line, format!("layer must be `single` or `double`, got `{other}`"))),
            },
        };
        let tolerance = ini.float_or("run", "tolerance", 1e-12)?;
        if !(tolerance > 1e-14 && tolerance < 1e-1) {
            return Err(err(ini.section_line("run"), format!("tolerance must lie in (1e-14, 1e-1), got {tolerance:e}")));
        }
        let oracle_tolerance = ini.float_or("run", "oracle_tolerance", 1e-12)?;
        let (list, list_line) = ini.require("run", "methods")?;
        let methods = split_methods(&list)
            .into_iter()
            .map(|m| parse_method(m).map_err(|msg| err(list_line, msg)))
            .collect::<Result<Vec<_>, _>>()?;
        if methods.is_empty() {
            return Err(err(list_line.or(ini.section_line("run")), "method list is empty"));
        }

        let output = ini.take("output", "path").map(|(p, _)| PathBuf::from(p));
        let label = ini.take("run", "label").map(|(l, _)| l).unwrap_or(geometry_kind);
        ini.finish()?;

        Ok(ExperimentConfig {
            cases: vec![CaseConfig {
                label,
                geometry,
                interior,
                density,
                target,
                t_final,
            }],
            layer,
            methods,
            dts,
            tolerance,
            oracle_tolerance,
            output,
        })
    }
}
