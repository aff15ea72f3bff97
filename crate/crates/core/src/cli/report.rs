use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernels::MatrixFunction;

/// Machine-readable outcome of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Effective spec after overrides.
    pub spec: BTreeMap<String, BTreeMap<String, String>>,
    pub passed: bool,
    pub verdicts: BTreeMap<String, bool>,
    pub error: Option<String>,
    pub results: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(command: &str, seed: u64, spec: BTreeMap<String, BTreeMap<String, String>>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            spec,
            passed: true,
            verdicts: BTreeMap::new(),
            error: None,
            results: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_string(), value);
    }

    pub fn verdict(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
        self.passed &= ok;
    }

    pub fn fail(&mut self, message: String) {
        self.error = Some(message);
        self.passed = false;
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Writes the report and checks that it parses back to the same value.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_json();
        let back: Report = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("report does not re-parse: {e}")))?;
        if &back != self {
            return Err(Error::InvalidParameter("report does not round-trip".into()));
        }
        std::fs::write(path, text).map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))
    }
}

/// JSON number, with non-finite values spelled out as strings so they survive
/// a round trip.
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// Grid table with one real and one imaginary column per matrix entry,
/// row-major: `omega,re_0_0,im_0_0,re_0_1,...`.
pub fn matrix_csv(f: &MatrixFunction) -> String {
    let n = f.n_channels();
    let mut out = String::from("omega");
    for r in 0..n {
        for c in 0..n {
            let _ = write!(out, ",re_{r}_{c},im_{r}_{c}");
        }
    }
    out.push('\n');
    for (w, m) in f.grid().omegas().zip(f.data()) {
        let _ = write!(out, "{w:.16e}");
        for r in 0..n {
            for c in 0..n {
                let z = m[(r, c)];
                let _ = write!(out, ",{:.16e},{:.16e}", z.re, z.im);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FrequencyGrid;

    #[test]
    fn report_round_trips() {
        let mut spec = BTreeMap::new();
        spec.insert(
            "grid".to_string(),
            BTreeMap::from([("omega_max".to_string(), "10".to_string())]),
        );
        let mut report = Report::new("check", 3, spec);
        report.insert("worst", number(-0.1 / 3.0));
        report.insert("inf", number(f64::INFINITY));
        report.verdict("fdi", false);
        let back: Report = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(!back.passed);
    }

    #[test]
    fn csv_layout() {
        let grid = FrequencyGrid::new(3, 1.0).unwrap();
        let csv = matrix_csv(&MatrixFunction::scalar(grid, |w| w * w));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "omega,re_0_0,im_0_0");
        assert_eq!(
            lines[1],
            "-1.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0"
        );
        assert_eq!(lines.len(), 4);
        assert!(!csv.contains('\r'));
    }
}
