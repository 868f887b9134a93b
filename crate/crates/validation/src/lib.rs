//! Bookkeeping for the acceptance runs: one outcome line per criterion.

use std::fmt;
use std::time::{Duration, Instant};

/// Result of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<34} {} ({:.1} s): {}",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Runs one criterion; an error counts as a failure and is reported.
pub fn run<F>(id: u32, title: &str, f: F) -> Outcome
where
    F: FnOnce() -> Result<(bool, String), String>,
{
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome { id, title: title.into(), passed, detail, elapsed: t.elapsed() }
}

/// Passed count and the ids that failed.
pub fn tally(outcomes: &[Outcome]) -> (usize, Vec<u32>) {
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    (outcomes.len() - failed.len(), failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_are_failures() {
        let o = run(3, "x", || Err("boom".into()));
        assert!(!o.passed && o.detail.contains("boom"));
        let p = run(4, "y", || Ok((true, "fine".into())));
        assert_eq!(tally(&[o, p]), (1, vec![3]));
    }
}
