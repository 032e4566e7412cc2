//! Experiment reports, data artifacts and golden-file comparison.
//!
//! Floats are written with 17 significant digits and object fields keep
//! their insertion order, so equal runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Paper,
    Trivial,
    Derived,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Paper => "[PAPER]",
            Provenance::Trivial => "[TRIVIAL]",
            Provenance::Derived => "[DERIVED]",
        }
    }

    fn parse(tag: &str) -> Option<Provenance> {
        match tag {
            "[PAPER]" => Some(Provenance::Paper),
            "[TRIVIAL]" => Some(Provenance::Trivial),
            "[DERIVED]" => Some(Provenance::Derived),
            _ => None,
        }
    }
}

/// How `value` is compared with `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|value − reference| ≤ tolerance`.
    Absolute,
    /// `|value − reference| ≤ tolerance·|reference|`.
    Relative,
    /// `value ≤ tolerance` (reference is the ideal value, usually 0).
    Below,
}

/// Registered checks: id, provenance, description.
pub const REGISTRY: &[(&str, Provenance, &str)] = &[
    ("volume", Provenance::Trivial, "∫ωⁿ/n! equals the class volume"),
    ("symmetric_space", Provenance::Derived, "Riemann tensor against c(gg + gg)"),
    ("scalar_constant", Provenance::Derived, "scalar curvature of a homogeneous model is constant"),
    ("td2_recombination", Provenance::Paper, "Todd degree-2 recombination, pointwise"),
    ("z_integral", Provenance::Paper, "∫Z̃_j ωⁿ against the topological value"),
    ("dimension", Provenance::Trivial, "dim H⁰ equals the binomial count"),
    ("gram_beta", Provenance::Derived, "Fubini–Study Gram entries against Beta integrals"),
    ("density_integral", Provenance::Trivial, "∫ρ_k ωⁿ/n! = dim H⁰"),
    ("density_constant", Provenance::Derived, "round-sphere density equals (k+1)/Vol"),
    ("basis_change", Provenance::Derived, "density is invariant under a random change of basis"),
    ("tuynman", Provenance::Paper, "P_f equals the Toeplitz operator of i(kf − Δf)"),
    ("skew_hermitian", Provenance::Paper, "Kostant–Souriau operator is skew-Hermitian"),
    ("donaldson_variation", Provenance::Paper, "first variation of log det Gram"),
    ("tyz_a0", Provenance::Paper, "a₀ = 1 pointwise"),
    ("tyz_a1", Provenance::Paper, "a₁ = S/2 pointwise"),
    ("identity_chain", Provenance::Derived, "a₂ − Δa₁ = n(n−1)Z̃₂ pointwise"),
    ("flow_converged", Provenance::Derived, "flow reaches the deviation tolerance"),
    ("flow_monotone", Provenance::Trivial, "energy is non-increasing on accepted steps"),
    ("flow_invariants", Provenance::Trivial, "Z̄ and the volume stay constant along the flow"),
    ("flow_round_profile", Provenance::Derived, "terminal ℂP¹ profile is round"),
];

pub fn provenance_of(id: &str) -> Provenance {
    let base = id.split('[').next().unwrap_or(id);
    REGISTRY
        .iter()
        .find(|(name, _, _)| *name == base)
        .map(|(_, p, _)| *p)
        .unwrap_or_else(|| panic!("check '{id}' is not registered"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub provenance: Provenance,
    pub passed: bool,
}

impl Check {
    /// `name` is a registered id, optionally followed by a `[qualifier]`.
    pub fn new(name: impl Into<String>, value: f64, reference: f64, comparison: Comparison, tolerance: f64) -> Check {
        let name = name.into();
        let diff = (value - reference).abs();
        let passed = match comparison {
            Comparison::Absolute => diff <= tolerance,
            Comparison::Relative => diff <= tolerance * reference.abs(),
            Comparison::Below => value <= tolerance,
        };
        Check {
            provenance: provenance_of(&name),
            name,
            value,
            reference,
            comparison,
            tolerance,
            passed,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check::new(name, value, 0.0, Comparison::Below, tolerance)
    }

    pub fn boolean(name: impl Into<String>, ok: bool) -> Check {
        Check::new(name, if ok { 1.0 } else { 0.0 }, 1.0, Comparison::Absolute, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config_hash: String,
    pub verb: String,
    pub model: String,
    pub checks: Vec<Check>,
    /// Extra scalar results, in insertion order.
    pub values: Vec<(String, f64)>,
}

/// A float as a JSON number with 17 significant digits (`null` if not finite).
pub fn number(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    let text = format_float(v);
    Value::Number(serde_json::from_str::<Number>(&text).expect("formatted float is a JSON number"))
}

/// 17 significant digits; negative zero prints as zero.
pub fn format_float(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

impl Report {
    pub fn new(config_hash: String, verb: &str, model: &str) -> Report {
        Report {
            config_hash,
            verb: verb.to_string(),
            model: model.to_string(),
            checks: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.push((name.into(), v));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        root.insert("config_hash".into(), Value::String(self.config_hash.clone()));
        root.insert("verb".into(), Value::String(self.verb.clone()));
        root.insert("model".into(), Value::String(self.model.clone()));
        root.insert("passed".into(), Value::Bool(self.passed()));
        let checks = self
            .checks
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("name".into(), Value::String(c.name.clone()));
                m.insert("value".into(), number(c.value));
                m.insert("reference".into(), number(c.reference));
                m.insert(
                    "comparison".into(),
                    serde_json::to_value(c.comparison).expect("enum serializes"),
                );
                m.insert("tolerance".into(), number(c.tolerance));
                m.insert("provenance".into(), Value::String(c.provenance.tag().into()));
                m.insert("passed".into(), Value::Bool(c.passed));
                Value::Object(m)
            })
            .collect();
        root.insert("checks".into(), Value::Array(checks));
        let mut values = Map::new();
        for (k, v) in &self.values {
            values.insert(k.clone(), number(*v));
        }
        root.insert("values".into(), Value::Object(values));
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(v: &Value) -> Result<Report> {
        let bad = |what: &str| Error::Io(format!("malformed report: {what}"));
        let text = |key: &str| {
            v.get(key)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| bad(key))
        };
        let float = |c: &Value, key: &str| -> Result<f64> {
            match c.get(key) {
                Some(Value::Null) => Ok(f64::NAN),
                Some(x) => x.as_f64().ok_or_else(|| bad(key)),
                None => Err(bad(key)),
            }
        };
        let mut checks = Vec::new();
        for c in v.get("checks").and_then(Value::as_array).ok_or_else(|| bad("checks"))? {
            checks.push(Check {
                name: c.get("name").and_then(Value::as_str).ok_or_else(|| bad("name"))?.into(),
                value: float(c, "value")?,
                reference: float(c, "reference")?,
                comparison: match c.get("comparison").and_then(Value::as_str) {
                    Some("absolute") => Comparison::Absolute,
                    Some("relative") => Comparison::Relative,
                    Some("below") => Comparison::Below,
                    _ => return Err(bad("comparison")),
                },
                tolerance: float(c, "tolerance")?,
                provenance: c
                    .get("provenance")
                    .and_then(Value::as_str)
                    .and_then(Provenance::parse)
                    .ok_or_else(|| bad("provenance"))?,
                passed: c.get("passed").and_then(Value::as_bool).ok_or_else(|| bad("passed"))?,
            });
        }
        let values = v
            .get("values")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("values"))?
            .iter()
            .map(|(k, x)| Ok((k.clone(), x.as_f64().unwrap_or(f64::NAN))))
            .collect::<Result<_>>()?;
        Ok(Report {
            config_hash: text("config_hash")?,
            verb: text("verb")?,
            model: text("model")?,
            checks,
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Report::from_json(&v)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = format!("{} on {} (config {})\n", self.verb, self.model, &self.config_hash[..12.min(self.config_hash.len())]);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  {:4} {:<32} value {:>24} ref {:>24} tol {:.1e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                format_float(c.value),
                format_float(c.reference),
                c.tolerance,
                c.provenance.tag()
            );
        }
        s
    }
}

/// A data series written as CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// Relative tolerance of golden comparisons for computed values.
pub const GOLDEN_RTOL: f64 = 1e-10;
/// Absolute floor of golden comparisons (roundoff-level residuals).
pub const GOLDEN_ATOL: f64 = 1e-13;

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= GOLDEN_ATOL + GOLDEN_RTOL * a.abs().max(b.abs())
}

/// Field-by-field comparison; returns the drifting fields as
/// `field: golden → current` lines (empty when the reports agree).
pub fn golden_diff(golden: &Report, current: &Report) -> Vec<String> {
    let mut out = Vec::new();
    let mut text = |field: &str, g: &str, c: &str| {
        if g != c {
            out.push(format!("{field}: {g} → {c}"));
        }
    };
    text("config_hash", &golden.config_hash, &current.config_hash);
    text("verb", &golden.verb, &current.verb);
    text("model", &golden.model, &current.model);
    for g in &golden.checks {
        match current.checks.iter().find(|c| c.name == g.name) {
            None => out.push(format!("checks.{}: missing from current report", g.name)),
            Some(c) => {
                for (field, a, b) in [
                    ("value", g.value, c.value),
                    ("reference", g.reference, c.reference),
                    ("tolerance", g.tolerance, c.tolerance),
                ] {
                    if !close(a, b) {
                        out.push(format!(
                            "checks.{}.{field}: {} → {}",
                            g.name,
                            format_float(a),
                            format_float(b)
                        ));
                    }
                }
                if g.passed != c.passed {
                    out.push(format!("checks.{}.passed: {} → {}", g.name, g.passed, c.passed));
                }
            }
        }
    }
    for c in &current.checks {
        if !golden.checks.iter().any(|g| g.name == c.name) {
            out.push(format!("checks.{}: not in golden report", c.name));
        }
    }
    for (k, g) in &golden.values {
        match current.values.iter().find(|(n, _)| n == k) {
            Some((_, c)) if close(*g, *c) => {}
            Some((_, c)) => out.push(format!("values.{k}: {} → {}", format_float(*g), format_float(*c))),
            None => out.push(format!("values.{k}: missing from current report")),
        }
    }
    out
}

/// Compares `current` with the golden file; a missing golden file is an
/// error telling how to create it.
pub fn golden_compare(current: &Report, golden_path: &Path) -> Result<Vec<String>> {
    if !golden_path.exists() {
        return Err(Error::Io(format!(
            "golden file {} does not exist; rerun with --update-golden to create it",
            golden_path.display()
        )));
    }
    Ok(golden_diff(&Report::load(golden_path)?, current))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("abc".into(), "tuynman", "fs1");
        r.push(Check::below("tuynman[k=8]", 3.5e-15, 1e-8));
        r.push(Check::new("volume", 1.0, 1.0, Comparison::Relative, 1e-10));
        r.value("dimension", 9.0);
        r
    }

    #[test]
    fn json_round_trip_and_digits() {
        let r = sample();
        let text = r.to_json_string();
        assert!(text.contains("3.5000000000000001e-15"));
        let back = Report::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json_string(), text);
        assert!(golden_diff(&r, &back).is_empty());
    }

    #[test]
    fn drift_is_listed() {
        let r = sample();
        let mut s = r.clone();
        s.checks[0].value = 7e-13;
        s.config_hash = "def".into();
        let d = golden_diff(&r, &s);
        assert_eq!(d.len(), 2);
        assert!(d.iter().any(|l| l.starts_with("checks.tuynman[k=8].value")));
    }

    #[test]
    #[should_panic]
    fn unregistered_checks_panic() {
        Check::below("nonsense", 0.0, 1.0);
    }
}
