//! Run configuration: JSON parsing with validation that reports every
//! violation, each located by a JSON pointer.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::diagnostics::ExperimentConfig;
use crate::error::{Error, Result, Violation};
use crate::kernel::TraceQuadrature;
use crate::sampler::{SampleKind, DEFAULT_EPS};
use crate::weight::{RadialWeight, RhoSolverConfig, WeightSpec, DEFAULT_UNDECIDED_BAND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    pub n_max: usize,
    pub band: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            n_max: 256,
            band: DEFAULT_UNDECIDED_BAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhoParams {
    pub x: Vec<f64>,
}

impl Default for RhoParams {
    fn default() -> Self {
        Self {
            x: vec![0.0, 1.0, 10.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleParams {
    pub window_r: f64,
    pub kind: SampleKind,
    pub eps: f64,
    pub intensity_scale: f64,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            window_r: 10.0,
            kind: SampleKind::Hybrid,
            eps: DEFAULT_EPS,
            intensity_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollideParams {
    pub r_list: Vec<f64>,
    pub trials: usize,
    pub scales: Vec<usize>,
    pub shifted: bool,
    pub n_max: usize,
    pub eps: f64,
}

impl Default for CollideParams {
    fn default() -> Self {
        Self {
            r_list: vec![20.0],
            trials: 1000,
            scales: vec![1, 2],
            shifted: true,
            n_max: 200,
            eps: DEFAULT_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceParams {
    pub n: Vec<usize>,
    pub panels: usize,
    pub order: usize,
    pub angles: usize,
}

impl Default for TraceParams {
    fn default() -> Self {
        let q = TraceQuadrature::default();
        Self {
            n: vec![1, 2],
            panels: q.panels,
            order: q.order,
            angles: q.angles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroOneParams {
    pub r_list: Vec<f64>,
    pub trials: usize,
    pub eps: f64,
    pub n_max: usize,
}

impl Default for ZeroOneParams {
    fn default() -> Self {
        Self {
            r_list: vec![20.0, 40.0, 80.0],
            trials: 100,
            eps: DEFAULT_EPS,
            n_max: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub weight: WeightSpec,
    #[serde(default)]
    pub solver: RhoSolverConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub classify: ClassifyParams,
    #[serde(default)]
    pub rho: RhoParams,
    #[serde(default)]
    pub sample: SampleParams,
    #[serde(default)]
    pub collide: CollideParams,
    #[serde(default)]
    pub trace_identity: TraceParams,
    #[serde(default)]
    pub zero_one: ZeroOneParams,
}

impl RunConfig {
    pub fn with_weight(weight: WeightSpec) -> Self {
        Self {
            weight,
            solver: RhoSolverConfig::default(),
            seed: 0,
            workers: None,
            out: None,
            classify: ClassifyParams::default(),
            rho: RhoParams::default(),
            sample: SampleParams::default(),
            collide: CollideParams::default(),
            trace_identity: TraceParams::default(),
            zero_one: ZeroOneParams::default(),
        }
    }

    pub fn collide_experiment(&self) -> ExperimentConfig {
        let c = &self.collide;
        ExperimentConfig {
            weight: self.weight.clone(),
            r_list: c.r_list.clone(),
            trials: c.trials,
            scales: c.scales.clone(),
            shifted: c.shifted,
            base_seed: self.seed,
            eps: c.eps,
            n_max: c.n_max,
        }
    }

    pub fn zero_one_experiment(&self) -> ExperimentConfig {
        let z = &self.zero_one;
        ExperimentConfig {
            weight: self.weight.clone(),
            r_list: z.r_list.clone(),
            trials: z.trials,
            scales: vec![1],
            shifted: false,
            base_seed: self.seed,
            eps: z.eps,
            n_max: z.n_max,
        }
    }

    pub fn trace_quadrature(&self) -> TraceQuadrature {
        let t = &self.trace_identity;
        TraceQuadrature {
            panels: t.panels,
            order: t.order,
            angles: t.angles,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::report::canonical_json(self)
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, pointer: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            pointer: pointer.to_string(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, pointer: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(map) = v.as_object() else {
            self.push(pointer, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(&format!("{pointer}/{key}"), "unknown field");
            }
        }
        Some(map)
    }

    fn number(&mut self, map: &Map<String, Value>, key: &str, pointer: &str, check: impl Fn(f64) -> Option<&'static str>) {
        let Some(v) = map.get(key) else { return };
        let p = format!("{pointer}/{key}");
        match v.as_f64() {
            Some(x) => {
                if let Some(msg) = check(x) {
                    self.push(&p, msg);
                }
            }
            None => self.push(&p, "expected a number"),
        }
    }

    fn integer(&mut self, map: &Map<String, Value>, key: &str, pointer: &str, min: u64) {
        let Some(v) = map.get(key) else { return };
        let p = format!("{pointer}/{key}");
        match v.as_u64() {
            Some(x) if x >= min => {}
            Some(_) => self.push(&p, format!("must be at least {min}")),
            None => self.push(&p, "expected a nonnegative integer"),
        }
    }

    fn boolean(&mut self, map: &Map<String, Value>, key: &str, pointer: &str) {
        if let Some(v) = map.get(key) {
            if !v.is_boolean() {
                self.push(&format!("{pointer}/{key}"), "expected a boolean");
            }
        }
    }

    fn number_array(&mut self, map: &Map<String, Value>, key: &str, pointer: &str, increasing: bool, check: impl Fn(f64) -> Option<&'static str>) -> Option<Vec<f64>> {
        let v = map.get(key)?;
        let p = format!("{pointer}/{key}");
        let Some(items) = v.as_array() else {
            self.push(&p, "expected an array");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match item.as_f64() {
                Some(x) => {
                    if let Some(msg) = check(x) {
                        self.push(&format!("{p}/{i}"), msg);
                        ok = false;
                    }
                    out.push(x);
                }
                None => {
                    self.push(&format!("{p}/{i}"), "expected a number");
                    ok = false;
                }
            }
        }
        if increasing && out.windows(2).any(|w| w[1] <= w[0]) {
            self.push(&p, "values must be strictly increasing");
            ok = false;
        }
        ok.then_some(out)
    }

    fn integer_array(&mut self, map: &Map<String, Value>, key: &str, pointer: &str, min: u64, nonempty: bool) {
        let Some(v) = map.get(key) else { return };
        let p = format!("{pointer}/{key}");
        let Some(items) = v.as_array() else {
            self.push(&p, "expected an array");
            return;
        };
        if nonempty && items.is_empty() {
            self.push(&p, "must not be empty");
        }
        for (i, item) in items.iter().enumerate() {
            match item.as_u64() {
                Some(x) if x >= min => {}
                _ => self.push(&format!("{p}/{i}"), format!("expected an integer >= {min}")),
            }
        }
    }
}

fn positive(x: f64) -> Option<&'static str> {
    (!(x > 0.0 && x.is_finite())).then_some("must be positive and finite")
}

fn nonnegative(x: f64) -> Option<&'static str> {
    (!(x >= 0.0 && x.is_finite())).then_some("must be nonnegative and finite")
}

fn finite(x: f64) -> Option<&'static str> {
    (!x.is_finite()).then_some("must be finite")
}

fn unit_open(x: f64) -> Option<&'static str> {
    (!(x > 0.0 && x < 1.0)).then_some("must lie in (0, 1)")
}

fn check_weight(c: &mut Checker, v: &Value) {
    let p = "/weight";
    let Some(map) = v.as_object() else {
        c.push(p, "expected an object");
        return;
    };
    match map.get("kind").and_then(Value::as_str) {
        Some("power") => {
            c.object(v, p, &["kind", "alpha"]);
            if !map.contains_key("alpha") {
                c.push(&format!("{p}/alpha"), "required");
            }
            c.number(map, "alpha", p, positive);
        }
        Some("tabulated") => {
            c.object(v, p, &["kind", "radii", "log_laplacian"]);
            for key in ["radii", "log_laplacian"] {
                if !map.contains_key(key) {
                    c.push(&format!("{p}/{key}"), "required");
                }
            }
            let radii = c.number_array(map, "radii", p, true, nonnegative);
            let lap = c.number_array(map, "log_laplacian", p, false, finite);
            if let (Some(r), Some(l)) = (radii, lap) {
                if r.len() < 2 {
                    c.push(&format!("{p}/radii"), "needs at least two radii");
                } else if r.len() != l.len() {
                    c.push(&format!("{p}/log_laplacian"), "length must match radii");
                } else if let Err(e) = RadialWeight::tabulated(r, l) {
                    c.push(p, e.to_string());
                }
            }
        }
        Some(other) => c.push(&format!("{p}/kind"), format!("unknown weight kind {other:?}")),
        None => c.push(&format!("{p}/kind"), "required string \"power\" or \"tabulated\""),
    }
}

fn check_document(doc: &Value) -> Vec<Violation> {
    let mut c = Checker { violations: Vec::new() };
    let top = [
        "weight", "solver", "seed", "workers", "out", "classify", "rho", "sample", "collide", "trace_identity", "zero_one",
    ];
    let Some(root) = c.object(doc, "", &top) else {
        return c.violations;
    };
    match root.get("weight") {
        Some(w) => check_weight(&mut c, w),
        None => c.push("/weight", "required"),
    }
    c.integer(root, "seed", "", 0);
    if let Some(w) = root.get("workers") {
        if !w.is_null() {
            c.integer(root, "workers", "", 1);
        }
    }
    if let Some(o) = root.get("out") {
        if !o.is_string() && !o.is_null() {
            c.push("/out", "expected a string");
        }
    }
    if let Some(v) = root.get("solver") {
        if let Some(m) = c.object(v, "/solver", &["rel_tol", "quad_rel_tol", "max_iter", "radius_cap"]) {
            c.number(m, "rel_tol", "/solver", unit_open);
            c.number(m, "quad_rel_tol", "/solver", unit_open);
            c.integer(m, "max_iter", "/solver", 1);
            c.number(m, "radius_cap", "/solver", positive);
        }
    }
    if let Some(v) = root.get("classify") {
        if let Some(m) = c.object(v, "/classify", &["n_max", "band"]) {
            c.integer(m, "n_max", "/classify", 10);
            c.number(m, "band", "/classify", positive);
        }
    }
    if let Some(v) = root.get("rho") {
        if let Some(m) = c.object(v, "/rho", &["x"]) {
            c.number_array(m, "x", "/rho", false, nonnegative);
        }
    }
    if let Some(v) = root.get("sample") {
        if let Some(m) = c.object(v, "/sample", &["window_r", "kind", "eps", "intensity_scale"]) {
            c.number(m, "window_r", "/sample", positive);
            c.number(m, "eps", "/sample", unit_open);
            c.number(m, "intensity_scale", "/sample", nonnegative);
            if let Some(k) = m.get("kind") {
                if !matches!(k.as_str(), Some("hybrid" | "poisson")) {
                    c.push("/sample/kind", "expected \"hybrid\" or \"poisson\"");
                }
            }
        }
    }
    if let Some(v) = root.get("collide") {
        if let Some(m) = c.object(v, "/collide", &["r_list", "trials", "scales", "shifted", "n_max", "eps"]) {
            if let Some(r) = c.number_array(m, "r_list", "/collide", true, positive) {
                if r.is_empty() {
                    c.push("/collide/r_list", "must not be empty");
                }
            }
            c.integer(m, "trials", "/collide", 1);
            c.integer_array(m, "scales", "/collide", 1, true);
            c.boolean(m, "shifted", "/collide");
            c.integer(m, "n_max", "/collide", 0);
            c.number(m, "eps", "/collide", unit_open);
        }
    }
    if let Some(v) = root.get("trace_identity") {
        if let Some(m) = c.object(v, "/trace_identity", &["n", "panels", "order", "angles"]) {
            c.integer_array(m, "n", "/trace_identity", 1, false);
            c.integer(m, "panels", "/trace_identity", 1);
            c.integer(m, "order", "/trace_identity", 2);
            c.integer(m, "angles", "/trace_identity", 2);
        }
    }
    if let Some(v) = root.get("zero_one") {
        if let Some(m) = c.object(v, "/zero_one", &["r_list", "trials", "eps", "n_max"]) {
            if let Some(r) = c.number_array(m, "r_list", "/zero_one", true, positive) {
                if r.len() < 2 {
                    c.push("/zero_one/r_list", "needs at least two radii");
                }
            }
            c.integer(m, "trials", "/zero_one", 1);
            c.number(m, "eps", "/zero_one", unit_open);
            c.integer(m, "n_max", "/zero_one", 0);
        }
    }
    c.violations
}

/// Parses and validates a configuration document. A bare weight object
/// (`{"kind": ...}`) is accepted as shorthand for `{"weight": {...}}`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut doc: Value = serde_json::from_str(text)?;
    if doc.get("kind").is_some() && doc.get("weight").is_none() {
        doc = serde_json::json!({ "weight": doc });
    }
    let violations = check_document(&doc);
    if !violations.is_empty() {
        return Err(Error::SchemaViolation(violations));
    }
    serde_json::from_value(doc).map_err(|e| {
        Error::SchemaViolation(vec![Violation {
            pointer: String::new(),
            message: e.to_string(),
        }])
    })
}
