//! Canonical JSON text: object keys sorted, no whitespace, integral floats
//! written as integers. Equal documents map to equal strings regardless of
//! key order or how a number was spelled, so the output is safe to hash.

use std::fmt::Write;

use serde_json::{Number, Value};

/// Largest magnitude below which every integer is exactly representable in f64.
const EXACT_INT: f64 = 9_007_199_254_740_992.0;

pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_number(n: &Number, out: &mut String) {
    if n.is_i64() || n.is_u64() {
        let _ = write!(out, "{n}");
        return;
    }
    match n.as_f64() {
        Some(x) if x.fract() == 0.0 && x.abs() < EXACT_INT => {
            let _ = write!(out, "{}", x as i64);
        }
        _ => {
            let _ = write!(out, "{n}");
        }
    }
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => write_number(n, out),
        Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(x, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}
