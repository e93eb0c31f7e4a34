//! JSON building blocks shared by the commands.

use finsler_core::MetricModel;
use serde::Serialize;

/// Version of every JSON document written by the tool.
pub const SCHEMA: u32 = 1;

/// Decimal rendering used for every real number in a report.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v == 0.0 {
        // folds -0 into 0
        "0.000000000e0".into()
    } else {
        format!("{v:.9e}")
    }
}

pub fn nums(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| num(*x)).collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricInfo {
    pub name: String,
    pub kind: &'static str,
    pub n: usize,
}

impl MetricInfo {
    pub fn of(m: &MetricModel) -> Self {
        Self {
            name: m.name.clone(),
            kind: m.variant.kind(),
            n: m.n,
        }
    }
}

/// Serializes with a trailing newline; key order follows the structs.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}
