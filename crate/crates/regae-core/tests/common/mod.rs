//! Shared helpers for the integration suites. Each suite uses its own
//! subset, so unused items are expected here.
#![allow(dead_code)]

pub mod oracle;

/// Relative comparison with an absolute floor for float32 noise.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs + rel * a.abs().max(b.abs())
}
