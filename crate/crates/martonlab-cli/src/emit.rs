//! Output shaping: stable field order, floats rounded to 9 significant
//! digits, and the run config embedded as a header.

use serde::Serialize;
use serde_json::Value;

/// Round to 9 significant decimal digits; identity on non-finite values.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let d = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(8 - d);
    (x * factor).round() / factor
}

pub fn fmt9(x: f64) -> String {
    let r = sig9(x);
    if !r.is_finite() {
        return format!("{x}");
    }
    if r != 0.0 && (r.abs() < 1e-5 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(rn) = serde_json::Number::from_f64(sig9(f)) {
                        *v = Value::Number(rn);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// `{"config": ..., "result": ...}` with floats rounded for stability.
pub fn json_with_config<C: Serialize, R: Serialize>(config: &C, result: &R) -> String {
    let mut v = serde_json::json!({
        "config": serde_json::to_value(config).expect("config serializes"),
        "result": serde_json::to_value(result).expect("result serializes"),
    });
    round_value(&mut v);
    serde_json::to_string_pretty(&v).expect("rounded value serializes")
}

/// Single-line variant for JSON-lines emission.
pub fn json_line<R: Serialize>(result: &R) -> String {
    let mut v = serde_json::to_value(result).expect("result serializes");
    round_value(&mut v);
    serde_json::to_string(&v).expect("rounded value serializes")
}

/// CSV text with the config as a `#` comment header.
pub fn csv_with_config<C: Serialize>(config: &C, header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let cfg = serde_json::to_string(config).expect("config serializes");
    out.push_str(&format!("# config: {cfg}\n"));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_nine_significant_digits() {
        assert_eq!(sig9(0.123456789123), 0.123456789);
        assert_eq!(sig9(123456789.123), 123456789.0);
        assert_eq!(sig9(0.0), 0.0);
        assert_eq!(fmt9(0.59302007717), "0.593020077");
    }

    #[test]
    fn json_emission_is_stable() {
        #[derive(Serialize)]
        struct C {
            seed: u64,
        }
        let a = json_with_config(&C { seed: 7 }, &vec![0.1234567891234, 1.0]);
        let b = json_with_config(&C { seed: 7 }, &vec![0.1234567891234, 1.0]);
        assert_eq!(a, b);
        assert!(a.contains("0.123456789"));
    }
}
