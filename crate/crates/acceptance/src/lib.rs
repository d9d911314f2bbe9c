//! Pass/fail bookkeeping for the acceptance suite.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// Result of one criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {} ({:.1} ms): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64() * 1e3,
            self.detail
        )
    }
}

/// Fails with `message` unless `cond` holds.
pub fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

#[derive(Debug, Default)]
pub struct Reporter {
    outcomes: Vec<Outcome>,
}

impl Reporter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs one criterion. A panic counts as a failure.
    pub fn run(&mut self, id: u32, title: &str, check: impl FnOnce() -> Result<String, String>) -> &Outcome {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(Ok(detail)) => (true, detail),
            Ok(Err(reason)) => (false, reason),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into());
                (false, format!("panic: {msg}"))
            }
        };
        self.outcomes.push(Outcome {
            id,
            title: title.to_string(),
            passed,
            detail,
            elapsed,
        });
        self.outcomes.last().expect("just pushed")
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn summary(&self) -> String {
        let passed = self.outcomes.iter().filter(|o| o.passed).count();
        format!("{passed}/{} criteria passed", self.outcomes.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_passes_failures_and_panics() {
        let mut r = Reporter::new();
        assert!(r.run(1, "ok", || Ok("fine".into())).passed);
        assert!(!r.run(2, "err", || Err("bad".into())).passed);
        let o = r.run(3, "boom", || panic!("exploded")).clone();
        assert!(!o.passed);
        assert_eq!(o.detail, "panic: exploded");
        assert!(o.line().starts_with("criterion  3 FAIL boom ("));
        assert!(!r.all_passed());
        assert_eq!(r.summary(), "1/3 criteria passed");
        assert!(ensure(true, || unreachable!()).is_ok());
        assert_eq!(ensure(false, || "no".into()), Err("no".to_string()));
    }
}
