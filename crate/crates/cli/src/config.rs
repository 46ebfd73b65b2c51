//! Run configuration: strict JSON loading, flag overrides and validation.
//!
//! The file is read into a `serde_json::Value` (rejecting duplicate keys),
//! command-line flags are written over it, and the merged document is then
//! checked field by field so that every problem gets its own diagnostic.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use igeo_core::complexity::ClosedMode;
use igeo_core::{DensityMode, ModelParams};
use serde::de::{self, DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde::{Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const DEFAULT_OUTPUT_DIR: &str = "igeo-out";
pub const OUTPUT_ROOT_ENV: &str = "IGEO_OUTPUT_ROOT";
pub const DEFAULT_SEED: u64 = 20_231_017;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
    pub log: bool,
}

impl TauGrid {
    pub fn values(&self) -> igeo_core::Result<Vec<f64>> {
        if self.log {
            igeo_core::complexity::log_grid(self.start, self.end, self.points)
        } else {
            igeo_core::complexity::linear_grid(self.start, self.end, self.points)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceSpec {
    pub ode_rel: f64,
    pub ode_abs: f64,
    pub quadrature_abs: f64,
    pub fd_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    GnuplotData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl OutputSpec {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeodesicMode {
    Full,
    Diag,
    Canonical,
    Analytic,
}

impl GeodesicMode {
    pub fn name(self) -> &'static str {
        match self {
            GeodesicMode::Full => "full",
            GeodesicMode::Diag => "diag",
            GeodesicMode::Canonical => "canonical",
            GeodesicMode::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialSpec {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicSpec {
    pub mode: GeodesicMode,
    pub tau_end: f64,
    /// Sample count for the closed-form trajectory.
    pub points: usize,
    /// Chart follows the mode: original for `full`, diagonal for `diag`,
    /// canonical for `canonical`. Defaults to the closed-form state at τ = 0.
    pub initial: Option<InitialSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IgeModes {
    Closed,
    Quadrature,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IgeSpec {
    pub modes: IgeModes,
    pub closed_mode: ClosedMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    ScalarCurvature,
    Lambda1,
    Lambda2,
    Sigma,
    Ige,
}

impl Quantity {
    const ALL: [Quantity; 5] = [
        Quantity::ScalarCurvature,
        Quantity::Lambda1,
        Quantity::Lambda2,
        Quantity::Sigma,
        Quantity::Ige,
    ];

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "scalar_curvature" => Quantity::ScalarCurvature,
            "lambda1" => Quantity::Lambda1,
            "lambda2" => Quantity::Lambda2,
            "sigma" => Quantity::Sigma,
            "ige" => Quantity::Ige,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CurvatureSpec {
    /// Evaluate the uncorrelated closed forms (every r_k = 0).
    pub baseline: bool,
    pub check_numeric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
    pub l: Vec<usize>,
    pub quantities: Vec<Quantity>,
    pub ige_tau: Vec<f64>,
    pub max_points: u64,
    pub allow_large: bool,
}

impl SweepSpec {
    pub fn size(&self) -> u64 {
        [self.r.len(), self.lambda.len(), self.xi.len(), self.l.len()]
            .iter()
            .fold(1u64, |acc, &n| acc.saturating_mul(n as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub tau: TauGrid,
    pub tolerances: ToleranceSpec,
    pub density_mode: DensityMode,
    pub output: OutputSpec,
    pub seed: u64,
    pub curvature: CurvatureSpec,
    pub geodesic: GeodesicSpec,
    pub ige: IgeSpec,
    pub sweep: SweepSpec,
}

// ---------------------------------------------------------------------------
// Strict parsing

struct StrictValue;

impl<'de> DeserializeSeed<'de> for StrictValue {
    type Value = Value;

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> Result<Value, D::Error> {
        d.deserialize_any(StrictVisitor)
    }
}

struct StrictVisitor;

impl<'de> Visitor<'de> for StrictVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_u64<E>(self, v: u64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_f64<E>(self, v: f64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_str<E>(self, v: &str) -> Result<Value, E> {
        Ok(Value::String(v.to_owned()))
    }

    fn visit_string<E>(self, v: String) -> Result<Value, E> {
        Ok(Value::String(v))
    }

    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut out = Vec::new();
        while let Some(v) = seq.next_element_seed(StrictValue)? {
            out.push(v);
        }
        Ok(Value::Array(out))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Value, A::Error> {
        let mut out = Map::new();
        while let Some(key) = map.next_key::<String>()? {
            if out.contains_key(&key) {
                return Err(de::Error::custom(format!("duplicate key `{key}`")));
            }
            let v = map.next_value_seed(StrictValue)?;
            out.insert(key, v);
        }
        Ok(Value::Object(out))
    }
}

/// Parses JSON text, rejecting duplicate object keys.
pub fn parse_strict(text: &str) -> CliResult<Value> {
    let mut de = serde_json::Deserializer::from_str(text);
    let v = StrictValue
        .deserialize(&mut de)
        .and_then(|v| de.end().map(|_| v))
        .map_err(|e| CliError::Config(vec![format!("parse error: {e}")]))?;
    if !v.is_object() {
        return Err(CliError::Config(vec!["parse error: top level must be an object".into()]));
    }
    Ok(v)
}

pub fn read_document(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_strict(&text)
}

// ---------------------------------------------------------------------------
// Flag overrides

/// Writes `value` at the dotted `path`, creating intermediate objects.
pub fn set_path(doc: &mut Value, path: &str, value: Value) {
    let mut cur = doc;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let map = cur.as_object_mut().expect("just made an object");
        if parts.peek().is_none() {
            map.insert(part.to_owned(), value);
            return;
        }
        cur = map.entry(part.to_owned()).or_insert_with(|| Value::Object(Map::new()));
    }
}

// ---------------------------------------------------------------------------
// Validation

struct Checker {
    diags: Vec<String>,
    unknown: Vec<String>,
}

/// An object under validation. Keys not read by the time `finish` is called
/// are reported as unknown.
struct Obj<'a> {
    path: String,
    map: Option<&'a Map<String, Value>>,
    seen: BTreeSet<&'static str>,
}

impl<'a> Obj<'a> {
    fn root(v: &'a Value) -> Self {
        Obj { path: String::new(), map: v.as_object(), seen: BTreeSet::new() }
    }

    fn field(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_owned()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.insert(key);
        self.map.and_then(|m| m.get(key)).filter(|v| !v.is_null())
    }

    fn child(&mut self, key: &'static str, ck: &mut Checker) -> Obj<'a> {
        let path = self.field(key);
        let map = match self.get(key) {
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                ck.diags.push(format!("{path}: expected an object"));
                None
            }
            None => None,
        };
        Obj { path, map, seen: BTreeSet::new() }
    }

    fn present(&self) -> bool {
        self.map.is_some()
    }

    fn finish(self, ck: &mut Checker) {
        if let Some(m) = self.map {
            for k in m.keys() {
                if !self.seen.contains(k.as_str()) {
                    ck.unknown.push(self.field(k));
                }
            }
        }
    }

    fn number(&mut self, key: &'static str, ck: &mut Checker) -> Option<f64> {
        let path = self.field(key);
        match self.get(key) {
            None => None,
            Some(v) => match v.as_f64() {
                Some(x) => Some(x),
                None => {
                    ck.diags.push(format!("{path}: expected a number, got {v}"));
                    None
                }
            },
        }
    }

    fn positive(&mut self, key: &'static str, default: f64, ck: &mut Checker) -> f64 {
        let path = self.field(key);
        match self.number(key, ck) {
            Some(x) if x > 0.0 && x.is_finite() => x,
            Some(x) => {
                ck.diags.push(format!("{path}: {x} must be positive and finite"));
                default
            }
            None => default,
        }
    }

    fn integer(&mut self, key: &'static str, min: u64, default: u64, ck: &mut Checker) -> u64 {
        let path = self.field(key);
        match self.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(n) if n >= min => n,
                Some(n) => {
                    ck.diags.push(format!("{path}: {n} is below the minimum {min}"));
                    default
                }
                None => {
                    ck.diags.push(format!("{path}: expected a non-negative integer, got {v}"));
                    default
                }
            },
        }
    }

    fn boolean(&mut self, key: &'static str, default: bool, ck: &mut Checker) -> bool {
        let path = self.field(key);
        match self.get(key) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(v) => {
                ck.diags.push(format!("{path}: expected true or false, got {v}"));
                default
            }
        }
    }

    fn choice<T: Copy>(&mut self, key: &'static str, options: &[(&str, T)], default: T, ck: &mut Checker) -> T {
        let path = self.field(key);
        match self.get(key) {
            None => default,
            Some(Value::String(s)) => match options.iter().find(|(n, _)| n == s) {
                Some((_, t)) => *t,
                None => {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    ck.diags.push(format!("{path}: unknown value \"{s}\" (expected one of {})", names.join(", ")));
                    default
                }
            },
            Some(v) => {
                ck.diags.push(format!("{path}: expected a string, got {v}"));
                default
            }
        }
    }

    /// A number or an array of numbers.
    fn number_list(&mut self, key: &'static str, ck: &mut Checker) -> Option<Vec<f64>> {
        let path = self.field(key);
        match self.get(key) {
            None => None,
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                let mut ok = true;
                for (i, it) in items.iter().enumerate() {
                    match it.as_f64() {
                        Some(x) => out.push(x),
                        None => {
                            ck.diags.push(format!("{path}[{i}]: expected a number, got {it}"));
                            ok = false;
                        }
                    }
                }
                if items.is_empty() {
                    ck.diags.push(format!("{path}: must not be empty"));
                    ok = false;
                }
                ok.then_some(out)
            }
            Some(v) => match v.as_f64() {
                Some(x) => Some(vec![x]),
                None => {
                    ck.diags.push(format!("{path}: expected a number or an array of numbers, got {v}"));
                    None
                }
            },
        }
    }
}

fn check_each(path: &str, values: &[f64], ck: &mut Checker, ok: impl Fn(f64) -> bool, what: &str) -> bool {
    let mut all = true;
    for (i, &x) in values.iter().enumerate() {
        if !ok(x) {
            ck.diags.push(format!("{path}[{i}]: {x} {what}"));
            all = false;
        }
    }
    all
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

const DEFAULT_R: f64 = 0.5;
const DEFAULT_LAMBDA: f64 = 0.5;
const DEFAULT_XI: f64 = 1.0;

fn model(root: &mut Obj, ck: &mut Checker) -> Option<ModelParams> {
    let l = root.get("l").map(|v| match v.as_u64() {
        Some(n) if n >= 1 => Some(n as usize),
        _ => {
            ck.diags.push(format!("l: expected a positive integer, got {v}"));
            None
        }
    });
    let r = root.number_list("r", ck);
    let lambda = root.number_list("lambda", ck);
    let xi = root.number_list("xi", ck);
    let l = match l {
        Some(None) => return None,
        Some(Some(n)) => n,
        None => [&r, &lambda, &xi].iter().filter_map(|v| v.as_ref().map(|v| v.len())).max().unwrap_or(1),
    };
    let mut ok = true;
    let mut expand = |name: &str, v: Option<Vec<f64>>, default: f64, valid: fn(f64) -> bool, what: &str| -> Vec<f64> {
        let v = v.unwrap_or_else(|| vec![default]);
        let v = if v.len() == 1 { vec![v[0]; l] } else { v };
        if v.len() != l {
            ck.diags.push(format!("{name}: has {} entries but l = {l}", v.len()));
            ok = false;
        } else {
            ok &= check_each(name, &v, ck, valid, what);
        }
        v
    };
    let r = expand("r", r, DEFAULT_R, in_unit, "outside (0,1)");
    let lambda = expand("lambda", lambda, DEFAULT_LAMBDA, positive, "must be positive");
    let xi = expand("xi", xi, DEFAULT_XI, positive, "must be positive");
    if !ok {
        return None;
    }
    match ModelParams::new(r, lambda, xi) {
        Ok(p) => Some(p),
        Err(e) => {
            ck.diags.push(format!("model: {e}"));
            None
        }
    }
}

fn tau(root: &mut Obj, ck: &mut Checker) -> TauGrid {
    let mut t = root.child("tau", ck);
    let log = t.boolean("log", true, ck);
    let (ds, de) = if log { (1e3, 1e6) } else { (0.0, 10.0) };
    let start = t.number("start", ck).unwrap_or(ds);
    let end = t.number("end", ck).unwrap_or(de);
    let points = t.integer("points", 2, 31, ck) as usize;
    if !(start >= 0.0 && start.is_finite()) {
        ck.diags.push(format!("tau.start: {start} must be non-negative"));
    } else if log && start == 0.0 {
        ck.diags.push("tau.start: must be positive for a log grid".into());
    }
    if !(end > start && end.is_finite()) {
        ck.diags.push(format!("tau.end: {end} must exceed tau.start = {start}"));
    }
    t.finish(ck);
    TauGrid { start, end, points, log }
}

fn tolerances(root: &mut Obj, ck: &mut Checker) -> ToleranceSpec {
    let mut t = root.child("tolerances", ck);
    let spec = ToleranceSpec {
        ode_rel: t.positive("ode_rel", 1e-9, ck),
        ode_abs: t.positive("ode_abs", 1e-12, ck),
        quadrature_abs: t.positive("quadrature_abs", 1e-12, ck),
        fd_step: t.positive("fd_step", igeo_core::geometry::DEFAULT_FD_STEP, ck),
    };
    for (name, v) in [("tolerances.ode_rel", spec.ode_rel), ("tolerances.ode_abs", spec.ode_abs)] {
        if v >= 1.0 {
            ck.diags.push(format!("{name}: {v} must be below 1"));
        }
    }
    t.finish(ck);
    spec
}

fn output(root: &mut Obj, ck: &mut Checker) -> OutputSpec {
    let mut o = root.child("output", ck);
    let directory = match o.get("directory") {
        None => PathBuf::from(DEFAULT_OUTPUT_DIR),
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(v) => {
            ck.diags.push(format!("output.directory: expected a non-empty path string, got {v}"));
            PathBuf::from(DEFAULT_OUTPUT_DIR)
        }
    };
    let mut formats = vec![OutputFormat::Csv, OutputFormat::Json];
    if let Some(v) = o.get("formats") {
        match v.as_array() {
            Some(items) if !items.is_empty() => {
                formats.clear();
                for (i, it) in items.iter().enumerate() {
                    let f = match it.as_str() {
                        Some("csv") => OutputFormat::Csv,
                        Some("json") => OutputFormat::Json,
                        Some("gnuplot-data") => OutputFormat::GnuplotData,
                        _ => {
                            ck.diags.push(format!(
                                "output.formats[{i}]: {it} is not one of \"csv\", \"json\", \"gnuplot-data\""
                            ));
                            continue;
                        }
                    };
                    if !formats.contains(&f) {
                        formats.push(f);
                    }
                }
            }
            _ => ck.diags.push(format!("output.formats: expected a non-empty array, got {v}")),
        }
    }
    o.finish(ck);
    OutputSpec { directory, formats }
}

fn geodesic(root: &mut Obj, ck: &mut Checker) -> GeodesicSpec {
    let mut g = root.child("geodesic", ck);
    let mode = g.choice(
        "mode",
        &[
            ("full", GeodesicMode::Full),
            ("diag", GeodesicMode::Diag),
            ("canonical", GeodesicMode::Canonical),
            ("analytic", GeodesicMode::Analytic),
        ],
        GeodesicMode::Analytic,
        ck,
    );
    let tau_end = g.positive("tau_end", 10.0, ck);
    let points = g.integer("points", 2, 201, ck) as usize;
    let mut init = g.child("initial", ck);
    let initial = if init.present() {
        let position = init.number_list("position", ck);
        let velocity = init.number_list("velocity", ck);
        match (position, velocity) {
            (Some(position), Some(velocity)) => Some(InitialSpec { position, velocity }),
            (p, v) => {
                if p.is_none() && init.map.map_or(true, |m| !m.contains_key("position")) {
                    ck.diags.push("geodesic.initial.position: required when geodesic.initial is given".into());
                }
                if v.is_none() && init.map.map_or(true, |m| !m.contains_key("velocity")) {
                    ck.diags.push("geodesic.initial.velocity: required when geodesic.initial is given".into());
                }
                None
            }
        }
    } else {
        None
    };
    init.finish(ck);
    if initial.is_some() && mode == GeodesicMode::Analytic {
        ck.diags.push("geodesic.initial: not used by the analytic mode; remove it or pick a numeric mode".into());
    }
    g.finish(ck);
    GeodesicSpec { mode, tau_end, points, initial }
}

fn ige(root: &mut Obj, ck: &mut Checker) -> IgeSpec {
    let mut i = root.child("ige", ck);
    let spec = IgeSpec {
        modes: i.choice(
            "modes",
            &[("closed", IgeModes::Closed), ("quadrature", IgeModes::Quadrature), ("both", IgeModes::Both)],
            IgeModes::Both,
            ck,
        ),
        closed_mode: i.choice(
            "closed_mode",
            &[
                ("exact", ClosedMode::Exact),
                ("antiderivative", ClosedMode::Antiderivative),
                ("asymptotic", ClosedMode::Asymptotic),
            ],
            ClosedMode::Exact,
            ck,
        ),
    };
    i.finish(ck);
    spec
}

fn axis(parent: &mut Obj, key: &'static str, fallback: Vec<f64>, ck: &mut Checker) -> Vec<f64> {
    let path = parent.field(key);
    match parent.get(key) {
        None => fallback,
        Some(Value::Object(_)) => {
            let mut a = parent.child(key, ck);
            let range = a.number_list("range", ck);
            let count = a.integer("count", 1, 0, ck) as usize;
            a.finish(ck);
            match range {
                Some(v) if v.len() == 2 && count >= 1 => {
                    if count == 1 {
                        vec![v[0]]
                    } else {
                        (0..count)
                            .map(|i| {
                                if i + 1 == count {
                                    v[1]
                                } else {
                                    v[0] + (v[1] - v[0]) * i as f64 / (count - 1) as f64
                                }
                            })
                            .collect()
                    }
                }
                Some(_) => {
                    ck.diags.push(format!("{path}: range must be [start, end] with count >= 1"));
                    fallback
                }
                None => {
                    ck.diags.push(format!("{path}: expected {{\"range\": [start, end], \"count\": n}}"));
                    fallback
                }
            }
        }
        Some(_) => parent.number_list(key, ck).unwrap_or(fallback),
    }
}

fn sweep(root: &mut Obj, model: Option<&ModelParams>, ck: &mut Checker) -> SweepSpec {
    let mut s = root.child("sweep", ck);
    let first = |f: fn(&ModelParams) -> &[f64], d: f64| model.map(|m| vec![f(m)[0]]).unwrap_or(vec![d]);
    let r_default = if s.present() {
        first(ModelParams::r, DEFAULT_R)
    } else {
        (1..=9).map(|i| i as f64 / 10.0).collect()
    };
    let r = axis(&mut s, "r", r_default, ck);
    let lambda = axis(&mut s, "lambda", first(ModelParams::lambda, DEFAULT_LAMBDA), ck);
    let xi = axis(&mut s, "xi", first(ModelParams::xi, DEFAULT_XI), ck);
    check_each("sweep.r", &r, ck, in_unit, "outside (0,1)");
    check_each("sweep.lambda", &lambda, ck, positive, "must be positive");
    check_each("sweep.xi", &xi, ck, positive, "must be positive");
    let l_default = model.map(|m| m.l()).unwrap_or(1) as f64;
    let l: Vec<usize> = axis(&mut s, "l", vec![l_default], ck)
        .into_iter()
        .enumerate()
        .filter_map(|(i, x)| {
            if x >= 1.0 && x.fract() == 0.0 {
                Some(x as usize)
            } else {
                ck.diags.push(format!("sweep.l[{i}]: {x} must be a positive integer"));
                None
            }
        })
        .collect();
    let quantities = match s.get("quantities") {
        None => Quantity::ALL.to_vec(),
        Some(Value::Array(items)) if !items.is_empty() => items
            .iter()
            .enumerate()
            .filter_map(|(i, it)| match it.as_str().and_then(Quantity::parse) {
                Some(q) => Some(q),
                None => {
                    ck.diags.push(format!(
                        "sweep.quantities[{i}]: {it} is not one of scalar_curvature, lambda1, lambda2, sigma, ige"
                    ));
                    None
                }
            })
            .collect(),
        Some(v) => {
            ck.diags.push(format!("sweep.quantities: expected a non-empty array, got {v}"));
            Vec::new()
        }
    };
    let ige_tau = s.number_list("ige_tau", ck).unwrap_or_else(|| vec![1e3, 1e6]);
    check_each("sweep.ige_tau", &ige_tau, ck, positive, "must be positive");
    let max_points = s.integer("max_points", 1, 1_000_000, ck);
    let allow_large = s.boolean("allow_large", false, ck);
    s.finish(ck);
    SweepSpec { r, lambda, xi, l, quantities, ige_tau, max_points, allow_large }
}

/// Validates a merged configuration document.
pub fn from_value(doc: &Value) -> CliResult<RunConfig> {
    let mut ck = Checker { diags: Vec::new(), unknown: Vec::new() };
    let mut root = Obj::root(doc);
    let model_params = model(&mut root, &mut ck);
    let tau = tau(&mut root, &mut ck);
    let tolerances = tolerances(&mut root, &mut ck);
    let density_mode = root.choice(
        "density_mode",
        &[("paper", DensityMode::Paper), ("determinant", DensityMode::Determinant)],
        DensityMode::Paper,
        &mut ck,
    );
    let output = output(&mut root, &mut ck);
    let seed = root.integer("seed", 0, DEFAULT_SEED, &mut ck);
    let mut c = root.child("curvature", &mut ck);
    let curvature = CurvatureSpec {
        baseline: c.boolean("baseline", false, &mut ck),
        check_numeric: c.boolean("check_numeric", false, &mut ck),
    };
    c.finish(&mut ck);
    let geodesic = geodesic(&mut root, &mut ck);
    let ige = ige(&mut root, &mut ck);
    let sweep = sweep(&mut root, model_params.as_ref(), &mut ck);
    root.finish(&mut ck);
    if !ck.unknown.is_empty() {
        ck.diags.push(format!("unknown keys: {}", ck.unknown.join(", ")));
    }
    match (ck.diags.is_empty(), model_params) {
        (true, Some(model)) => Ok(RunConfig {
            model,
            tau,
            tolerances,
            density_mode,
            output,
            seed,
            curvature,
            geodesic,
            ige,
            sweep,
        }),
        _ => Err(CliError::Config(ck.diags)),
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    from_value(&read_document(path)?)
}

/// Output directory after applying the output-root environment variable to
/// relative paths.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() && !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}
