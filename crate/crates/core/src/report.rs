//! Deterministic report emission: canonical JSON (sorted keys, 17 significant
//! digits), CSV and SVG.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::diagnostics::{CollisionReport, CollisionRow, ZeroOneReport};
use crate::kernel::{TraceIdentity, TraceQuadrature};
use crate::sampler::PointSample;
use crate::verify::VerifyReport;
use crate::weight::{ClassificationReport, WeightSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        }
    }
}

/// `{:.16e}` for finite values, `null` otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() { format!("{x:.16e}") } else { "null".to_string() }
}

fn write_string(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings serialize"));
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = items.iter().all(|i| !i.is_array() && !i.is_object());
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if flat {
                    if i > 0 {
                        out.push(' ');
                    }
                } else {
                    out.push('\n');
                    pad(out, indent + 2);
                }
                write_value(out, item, indent + 2);
            }
            if !flat {
                out.push('\n');
                pad(out, indent);
            }
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                pad(out, indent + 2);
                write_string(out, k);
                out.push_str(": ");
                write_value(out, &map[k.as_str()], indent + 2);
            }
            out.push('\n');
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Canonical JSON text of any serializable value.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// A result that can be written to disk.
pub trait Emit {
    /// Short name used for the report tag and the file stem.
    fn name(&self) -> &'static str;
    fn json_payload(&self) -> Result<Value>;
    fn csv(&self) -> Option<String> {
        None
    }
    fn svg(&self) -> Option<String> {
        None
    }
}

/// Wraps a payload with the schema version and report tag.
pub fn envelope(name: &str, payload: Value) -> Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "report": name,
        "data": payload,
    })
}

pub fn render(result: &dyn Emit, format: Format) -> Result<String> {
    match format {
        Format::Json => canonical_json(&envelope(result.name(), result.json_payload()?)),
        Format::Csv => result
            .csv()
            .ok_or_else(|| Error::UnsupportedFormat(format!("{} has no csv form", result.name()))),
        Format::Svg => result
            .svg()
            .ok_or_else(|| Error::UnsupportedFormat(format!("{} has no svg form", result.name()))),
    }
}

/// Writes `<out_dir>/<name>.<ext>` and returns its path.
pub fn emit_report(result: &dyn Emit, format: Format, out_dir: &Path) -> Result<PathBuf> {
    let text = render(result, format)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.{}", result.name(), format.extension()));
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Scatter plot of a sample with its window circle.
pub fn svg_scatter(sample: &PointSample) -> String {
    let size = 640.0;
    let margin = 20.0;
    let r = sample.window_r.max(f64::MIN_POSITIVE);
    let scale = (size / 2.0 - margin) / r;
    let c = size / 2.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(out, "<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<circle cx=\"{c}\" cy=\"{c}\" r=\"{:.3}\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>",
        r * scale
    );
    let _ = writeln!(out, "<g fill=\"#1f4e79\">");
    for p in &sample.points {
        let (x, y) = p.cartesian();
        let _ = writeln!(out, "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2\"/>", c + x * scale, c - y * scale);
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        "<text x=\"{margin}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">R = {}, seed = {}, points = {}</text>",
        size - 6.0,
        sample.window_r,
        sample.seed,
        sample.len()
    );
    out.push_str("</svg>\n");
    out
}

impl Emit for PointSample {
    fn name(&self) -> &'static str {
        "sample"
    }

    fn json_payload(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }

    fn csv(&self) -> Option<String> {
        Some(self.to_csv())
    }

    fn svg(&self) -> Option<String> {
        Some(svg_scatter(self))
    }
}

/// CSV cell for a float: same digits as the JSON form, `inf`/`-inf`/`nan` spelled out.
pub fn csv_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn to_payload<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub x: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoTable {
    pub weight: WeightSpec,
    pub rows: Vec<RhoRow>,
}

impl Emit for RhoTable {
    fn name(&self) -> &'static str {
        "rho"
    }

    fn json_payload(&self) -> Result<Value> {
        to_payload(self)
    }

    fn csv(&self) -> Option<String> {
        let mut out = String::from("x,rho\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", csv_f64(r.x), csv_f64(r.rho));
        }
        Some(out)
    }
}

impl Emit for ClassificationReport {
    fn name(&self) -> &'static str {
        "classify"
    }

    fn json_payload(&self) -> Result<Value> {
        to_payload(self)
    }

    fn csv(&self) -> Option<String> {
        let mut out = String::from("n,partial_sum\n");
        for (i, s) in self.partial_sums.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, csv_f64(*s));
        }
        Some(out)
    }
}

fn collision_csv(rows: &[CollisionRow]) -> String {
    let mut out = String::from(
        "n,scale_l,shifted,inner,outer,cells,collisions,frequency,ci_low,ci_high,mu,proxy,predicted,predicted_road\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.scale_l,
            r.shifted,
            csv_f64(r.inner),
            csv_f64(r.outer),
            r.cells,
            r.collisions,
            csv_f64(r.frequency),
            csv_f64(r.ci_low),
            csv_f64(r.ci_high),
            csv_f64(r.mu),
            csv_f64(r.proxy),
            csv_f64(r.predicted),
            csv_f64(r.predicted_road)
        );
    }
    out
}

impl Emit for CollisionReport {
    fn name(&self) -> &'static str {
        "collide"
    }

    fn json_payload(&self) -> Result<Value> {
        to_payload(self)
    }

    fn csv(&self) -> Option<String> {
        Some(collision_csv(&self.rows))
    }
}

impl Emit for ZeroOneReport {
    fn name(&self) -> &'static str {
        "zero_one"
    }

    fn json_payload(&self) -> Result<Value> {
        to_payload(self)
    }

    /// One row per window radius.
    fn csv(&self) -> Option<String> {
        let mut out = String::from("window_r,median,q25,q75,min,max,mean_points\n");
        for (s, counts) in self.separations.iter().zip(&self.point_counts) {
            let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_f64(s.window_r),
                csv_f64(s.median),
                csv_f64(s.q25),
                csv_f64(s.q75),
                csv_f64(s.min),
                csv_f64(s.max),
                csv_f64(mean)
            );
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub weight: WeightSpec,
    pub quadrature: TraceQuadrature,
    pub results: Vec<TraceIdentity>,
}

impl Emit for TraceReport {
    fn name(&self) -> &'static str {
        "trace_identity"
    }

    fn json_payload(&self) -> Result<Value> {
        to_payload(self)
    }

    fn csv(&self) -> Option<String> {
        let mut out = String::from("n,sum_pk2,double_integral,rel_err,mu_n\n");
        for t in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t.n,
                csv_f64(t.sum_pk2),
                csv_f64(t.double_integral),
                csv_f64(t.rel_err),
                csv_f64(t.mu_n)
            );
        }
        Some(out)
    }
}

impl Emit for VerifyReport {
    fn name(&self) -> &'static str {
        "verify"
    }

    fn json_payload(&self) -> Result<Value> {
        to_payload(self)
    }

    fn csv(&self) -> Option<String> {
        let mut out = String::from("name,required,passed,measured,threshold\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.name,
                c.required,
                c.passed,
                csv_f64(c.measured),
                csv_f64(c.threshold)
            );
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{Point, SampleKind};

    #[test]
    fn canonical_json_is_sorted_and_fixed_width() {
        let v = serde_json::json!({"b": 1.5, "a": [1, 2.0], "c": {"z": null, "y": "s"}});
        let text = canonical_json(&v).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": [1, 2.0000000000000000e0],\n  \"b\": 1.5000000000000000e0,\n  \"c\": {\n    \"y\": \"s\",\n    \"z\": null\n  }\n}\n"
        );
        assert_eq!(fmt_f64(f64::NAN), "null");
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn sample_renders_in_every_format() {
        let s = PointSample {
            points: vec![Point { modulus: 1.0, angle: 1.0, k: Some(0) }],
            window_r: 2.0,
            seed: 3,
            kind: SampleKind::Hybrid,
            truncation_k: Some(4),
        };
        let json = render(&s, Format::Json).unwrap();
        assert!(json.contains("\"schema_version\": 1"));
        assert_eq!(json, render(&s, Format::Json).unwrap());
        let svg = render(&s, Format::Svg).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("stroke=\"#888\""));
        assert!(render(&s, Format::Csv).unwrap().starts_with("modulus,angle,k\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = emit_report(&s, Format::Json, dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), json);
    }
}
