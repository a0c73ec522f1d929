//! Deterministic JSON reports.
//!
//! Keys are sorted (`serde_json::Map` is ordered), floats are written with 17
//! significant digits, and tensors carry explicit slot labels and index arrays.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::chart::{Chart, Point};
use crate::tensor::{NumTensor, SlotKind, Variance};
use crate::verify::Check;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pretty output with every float in `{:.16e}` form.
struct ReportFormatter(PrettyFormatter<'static>);

impl Formatter for ReportFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_float(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// 17 significant digits in scientific notation; valid JSON for finite values.
pub fn format_float(value: f64) -> String {
    if value == 0.0 {
        // no negative zero in reports
        return format!("{:.16e}", 0.0);
    }
    format!("{value:.16e}")
}

/// Serializes with sorted keys and fixed float formatting. Non-finite floats
/// become `null`.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ReportFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

fn slot_json(label: char, kind: SlotKind, variance: Variance) -> Value {
    let kind = match kind {
        SlotKind::Temporal => "t",
        SlotKind::Spatial => "x",
    };
    let variance = match variance {
        Variance::Upper => "up",
        Variance::Lower => "down",
    };
    json!({ "label": label.to_string(), "kind": kind, "variance": variance })
}

/// `{"slots": [...], "entries": [{"index": [1-based], "value": v}, ...]}`
pub fn tensor_json(t: &NumTensor) -> Value {
    let slots: Vec<Value> = t
        .sig
        .slots()
        .iter()
        .map(|s| slot_json(s.label, s.kind, s.variance))
        .collect();
    let entries: Vec<Value> = crate::tensor::multi_indices(&t.dims)
        .map(|idx| {
            let one_based: Vec<usize> = idx.iter().map(|k| k + 1).collect();
            json!({ "index": one_based, "value": t.get(&idx) })
        })
        .collect();
    json!({ "labels": t.sig.labels(), "slots": slots, "entries": entries })
}

pub fn point_json(chart: Chart, pt: &Point) -> Value {
    let mut map = Map::new();
    for v in chart.vars() {
        map.insert(v.to_string(), json!(pt.get(v)));
    }
    Value::Object(map)
}

pub fn check_json(c: &Check) -> Value {
    serde_json::to_value(c).expect("checks serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_float(-1.0), "-1.0000000000000000e0");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-0.0), "0.0000000000000000e0");
        let v: f64 = format_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn keys_are_sorted_and_output_parses() {
        let text = to_json_string(&json!({ "zeta": 1.5, "alpha": [0.25, 2], "mid": { "b": 1.0, "a": -3.0 } }));
        let alpha = text.find("alpha").unwrap();
        assert!(alpha < text.find("mid").unwrap() && text.find("mid").unwrap() < text.find("zeta").unwrap());
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["mid"]["a"], json!(-3.0));
        assert_eq!(back["alpha"][1], json!(2));
    }
}
