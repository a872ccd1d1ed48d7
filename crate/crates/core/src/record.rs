//! One JSON-lines row per solve or applied update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// 0 for the initial solve, then the 1-based position in the stream.
    pub step: usize,
    /// `solve` or the operation code (`ei`, `ed`, `wc`, `ni`, `nd`).
    pub op: String,
    /// `l2`, `l1` or `svd`.
    pub norm: String,
    pub n: usize,
    pub m: usize,
    pub pairs_applied: usize,
    /// `‖M·x − b‖₂` for l2, `‖M·x − b‖₁` for l1 and `‖U·Σ·Vᵀ − M‖_F` for
    /// svd.
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    /// Simplex pivots spent re-optimizing (l1 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivots: Option<usize>,
    /// Set when the engine could not absorb the operation and was rebuilt
    /// from the updated graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rebuilt: Option<bool>,
    /// `null` when timing is disabled.
    pub wall_time_ns: Option<u64>,
    /// `null` unless the step was checked against the oracle.
    pub verified: Option<bool>,
}

impl ResultRecord {
    pub fn new(step: usize, op: impl Into<String>, norm: impl Into<String>) -> Self {
        ResultRecord {
            step,
            op: op.into(),
            norm: norm.into(),
            n: 0,
            m: 0,
            pairs_applied: 0,
            residual: 0.0,
            x_norm: None,
            x: None,
            rank: None,
            sigma: None,
            pivots: None,
            rebuilt: None,
            wall_time_ns: None,
            verified: None,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records contain only finite numbers and strings")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::parse(e.line(), e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut r = ResultRecord::new(3, "wc", "l2");
        r.n = 2;
        r.m = 2;
        r.residual = 0.125;
        r.x = Some(vec![0.0, 3.0]);
        r.x_norm = Some(3.0);
        let line = r.to_json_line();
        assert!(!line.contains('\n'));
        assert_eq!(ResultRecord::from_json_line(&line).unwrap(), r);
    }

    #[test]
    fn missing_timing_is_null() {
        let line = ResultRecord::new(0, "solve", "l1").to_json_line();
        assert!(line.contains("\"wall_time_ns\":null"));
        assert!(line.contains("\"verified\":null"));
        assert!(!line.contains("sigma"));
    }
}
