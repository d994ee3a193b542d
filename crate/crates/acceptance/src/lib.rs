//! Shared pieces of the acceptance suite: verdict reporting, independent
//! numerical oracles and a random walk over the session state machine.

pub mod oracle;
pub mod walk;

use std::io::Write;

/// Collects the checks of one criterion and prints a single PASS or FAIL
/// line. The line goes straight to stdout so it survives test capture.
pub struct Verdict {
    criterion: u8,
    title: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    pub fn new(criterion: u8, title: &'static str) -> Self {
        Self {
            criterion,
            title,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) -> bool {
        if !ok {
            self.failures.push(what());
        }
        ok
    }

    /// `|got - want| <= tol`.
    pub fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) -> bool {
        self.check((got - want).abs() <= tol, || {
            format!("{label} = {got} is not within {tol} of {want}")
        })
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Prints the verdict and panics on failure.
    pub fn finish(self) {
        let status = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        let mut line = format!("{status} criterion {}: {}", self.criterion, self.title);
        if !self.notes.is_empty() {
            line.push_str(&format!(" [{}]", self.notes.join("; ")));
        }
        const SHOWN: usize = 5;
        for f in self.failures.iter().take(SHOWN) {
            line.push_str(&format!("\n    {f}"));
        }
        if self.failures.len() > SHOWN {
            line.push_str(&format!("\n    ... {} more", self.failures.len() - SHOWN));
        }
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
        assert!(self.failures.is_empty(), "{line}");
    }
}
