//! Pass/fail bookkeeping for the acceptance run.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: String,
    pub pass: bool,
    pub detail: String,
}

/// Collects one outcome per criterion and prints a line as each arrives.
#[derive(Debug, Default)]
pub struct Scorecard {
    pub outcomes: Vec<Outcome>,
}

impl Scorecard {
    pub fn record(&mut self, id: &str, pass: bool, detail: impl Into<String>) {
        let o = Outcome {
            id: id.to_string(),
            pass,
            detail: detail.into(),
        };
        println!("{} {:<4} {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
        self.outcomes.push(o);
    }

    /// Records an error raised while evaluating a criterion as a failure.
    pub fn record_result<E: std::fmt::Display>(&mut self, id: &str, r: Result<(bool, String), E>) {
        match r {
            Ok((pass, detail)) => self.record(id, pass, detail),
            Err(e) => self.record(id, false, format!("error: {e}")),
        }
    }

    pub fn failed(&self) -> Vec<&Outcome> {
        self.outcomes.iter().filter(|o| !o.pass).collect()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let failed = self.failed();
        let _ = write!(s, "{} of {} criteria passed", self.outcomes.len() - failed.len(), self.outcomes.len());
        if !failed.is_empty() {
            let ids: Vec<&str> = failed.iter().map(|o| o.id.as_str()).collect();
            let _ = write!(s, "; failing: {}", ids.join(", "));
        }
        s
    }
}

/// |x − target| ≤ rel·|target|
pub fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}
