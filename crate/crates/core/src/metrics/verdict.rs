use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Not enough data to decide.
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One named check in an experiment. A failing hard check makes the whole
/// experiment fail; soft checks are reported only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    pub hard: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(
        check: impl Into<String>,
        status: Status,
        hard: bool,
        detail: impl Into<String>,
    ) -> Self {
        Verdict {
            check: check.into(),
            status,
            hard,
            detail: detail.into(),
        }
    }

    pub fn hard_failure(&self) -> bool {
        self.hard && self.status == Status::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.hard { "hard" } else { "soft" };
        write!(
            f,
            "{:<13} {:<28} [{kind}] {}",
            self.status, self.check, self.detail
        )
    }
}

pub fn any_hard_failure(verdicts: &[Verdict]) -> bool {
    verdicts.iter().any(Verdict::hard_failure)
}
