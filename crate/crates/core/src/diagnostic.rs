use std::fmt;

use serde::{Deserialize, Serialize};

/// Non-fatal conditions surfaced alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Diagnostic {
    /// A running intersection of confidence intervals became empty.
    EmptyIntersection,
    /// One arm has no usable observations, so nothing can be decided.
    StarvedArm,
    /// A count-mode timestamp tied with its predecessor and was nudged forward.
    TiePerturbed,
    /// An event arrived after the test was decided and was not applied.
    IgnoredPostDecision,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Diagnostic::EmptyIntersection => "EMPTY_INTERSECTION",
            Diagnostic::StarvedArm => "STARVED_ARM",
            Diagnostic::TiePerturbed => "TIE_PERTURBED",
            Diagnostic::IgnoredPostDecision => "IGNORED_POST_DECISION",
        };
        f.write_str(name)
    }
}
