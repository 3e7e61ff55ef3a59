use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TriageError;

/// The team a failed CI/CD run is routed to.
///
/// Variants are declared alphabetically so the derived `Ord` is the
/// lexicographic order of their names; every tie-break in the crate relies
/// on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureClass {
    Artifactory,
    CicdTest,
    Cluster,
    Environment,
    Microservice,
}

impl FailureClass {
    pub const ALL: [FailureClass; 5] = [
        FailureClass::Artifactory,
        FailureClass::CicdTest,
        FailureClass::Cluster,
        FailureClass::Environment,
        FailureClass::Microservice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureClass::Artifactory => "artifactory",
            FailureClass::CicdTest => "cicdtest",
            FailureClass::Cluster => "cluster",
            FailureClass::Environment => "environment",
            FailureClass::Microservice => "microservice",
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FailureClass {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        FailureClass::ALL
            .into_iter()
            .find(|c| c.name() == normalized)
            .ok_or_else(|| TriageError::Parse(format!("unknown failure class {s:?}")))
    }
}
