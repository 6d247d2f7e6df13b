pub mod coupling_time;
pub mod forgetting;
pub mod lp_error;
pub mod oos_demo;
pub mod poc;
pub mod verify_bounds;

use std::fmt;

/// Outcome of a command that completed without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ChecksFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::ChecksFailed => 2,
        }
    }

    pub fn from_checks(checks: &[Check]) -> Self {
        if checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Status::ChecksFailed
        } else {
            Status::Success
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Not asserted, with the reason in the detail.
    Skip,
}

/// A named check with a one-line explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        Check { name: name.into(), verdict, detail: detail.into() }
    }

    pub fn skip(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Check { name: name.into(), verdict: Verdict::Skip, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}
