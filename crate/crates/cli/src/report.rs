use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Diagnostic value only; never fails a run.
    Info,
    /// Expected failure on flat or otherwise degenerate input.
    Degenerate,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Degenerate => "DEGEN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    /// The formula the check verifies.
    pub anchor: String,
    pub status: Status,
    /// `None` for exact checks and for checks that errored.
    pub residual: Option<f64>,
    pub runtime_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// What a single check produced.
pub enum Outcome {
    /// Passes when `value <= tol`.
    Residual { value: f64, tol: f64 },
    /// Passes when `value >= min`.
    AtLeast { value: f64, min: f64 },
    Exact(bool),
    Info(f64),
    Degenerate(Option<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.status != Status::Fail)
    }

    /// The record list, which is the on-disk schema of `report.json`.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.records).expect("records serialize");
        s.push('\n');
        s
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let residual = r.residual.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
            let _ = write!(out, "{:<5} {:<48} {:>10}", r.status.label(), r.check, residual);
            if r.runtime_ms > 0 {
                let _ = write!(out, " {:>6}ms", r.runtime_ms);
            }
            let _ = write!(out, "  [{}]", r.anchor);
            if let Some(d) = &r.detail {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
        }
        let failed = self.records.iter().filter(|r| r.status == Status::Fail).count();
        let graded = self
            .records
            .iter()
            .filter(|r| matches!(r.status, Status::Pass | Status::Fail))
            .count();
        let _ = writeln!(
            out,
            "{}: {} of {graded} checks passed",
            self.command,
            graded - failed
        );
        out
    }
}

/// Collects records in call order.
pub struct ReportBuilder {
    command: String,
    timing: bool,
    records: Vec<CheckRecord>,
}

impl ReportBuilder {
    /// Runtimes are recorded only with `timing`, so reports stay
    /// byte-identical across runs by default.
    pub fn new(command: &str, timing: bool) -> Self {
        Self {
            command: command.into(),
            timing,
            records: Vec::new(),
        }
    }

    pub fn check<F>(&mut self, check: &str, anchor: &str, f: F)
    where
        F: FnOnce() -> finsler_core::Result<(Outcome, Option<String>)>,
    {
        let start = Instant::now();
        let result = f();
        let runtime_ms = if self.timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let (status, residual, detail) = match result {
            Ok((outcome, detail)) => {
                let (status, residual) = match outcome {
                    Outcome::Residual { value, tol } => (pass_if(value <= tol), Some(value)),
                    Outcome::AtLeast { value, min } => (pass_if(value >= min), Some(value)),
                    Outcome::Exact(ok) => (pass_if(ok), None),
                    Outcome::Info(v) => (Status::Info, Some(v)),
                    Outcome::Degenerate(v) => (Status::Degenerate, v),
                };
                (status, residual, detail)
            }
            Err(e) => (Status::Fail, None, Some(format!("error: {e}"))),
        };
        self.records.push(CheckRecord {
            check: check.into(),
            anchor: anchor.into(),
            status,
            residual,
            runtime_ms,
            detail,
        });
    }

    pub fn finish(self) -> Report {
        Report {
            command: self.command,
            records: self.records,
        }
    }
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use finsler_core::Error;

    #[test]
    fn statuses_follow_outcomes() {
        let mut b = ReportBuilder::new("demo", false);
        b.check("small", "a = b", || Ok((Outcome::Residual { value: 1e-9, tol: 1e-6 }, None)));
        b.check("big", "a = b", || Ok((Outcome::Residual { value: 1.0, tol: 1e-6 }, None)));
        b.check("info", "x", || Ok((Outcome::Info(3.0), None)));
        b.check("broken", "x", || Err(Error::Internal("boom".into())));
        let r = b.finish();
        let st: Vec<Status> = r.records.iter().map(|r| r.status).collect();
        assert_eq!(st, [Status::Pass, Status::Fail, Status::Info, Status::Fail]);
        assert!(!r.passed());
        assert!(r.records.iter().all(|r| r.runtime_ms == 0));
        assert!(r.render_text().ends_with("demo: 1 of 3 checks passed\n"));
    }

    #[test]
    fn json_is_a_record_list() {
        let mut b = ReportBuilder::new("demo", false);
        b.check("exact", "det = 3", || Ok((Outcome::Exact(true), None)));
        let v: serde_json::Value = serde_json::from_str(&b.finish().to_json()).unwrap();
        assert_eq!(
            v,
            serde_json::json!([{"check": "exact", "anchor": "det = 3", "status": "pass", "residual": null, "runtime_ms": 0}])
        );
    }
}
