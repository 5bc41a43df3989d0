//! Exclusion rules for retained sessions.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TelemetryError;
use crate::record::SessionRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionPolicy {
    pub require_complete: bool,
    pub drop_duplicate_workers: bool,
    pub require_survey: bool,
}

impl ExclusionPolicy {
    pub const ALL: Self = Self {
        require_complete: true,
        drop_duplicate_workers: true,
        require_survey: true,
    };
    pub const NONE: Self = Self {
        require_complete: false,
        drop_duplicate_workers: false,
        require_survey: false,
    };
}

impl Default for ExclusionPolicy {
    fn default() -> Self {
        Self::ALL
    }
}

/// `all`, `none`, or a comma list of `complete`, `unique-worker`, `survey`.
impl FromStr for ExclusionPolicy {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "all" => return Ok(Self::ALL),
            "none" | "" => return Ok(Self::NONE),
            _ => {}
        }
        let mut p = Self::NONE;
        for part in s.split(',').map(str::trim) {
            match part {
                "complete" => p.require_complete = true,
                "unique-worker" => p.drop_duplicate_workers = true,
                "survey" => p.require_survey = true,
                _ => return Err(TelemetryError::Policy(s.to_string())),
            }
        }
        Ok(p)
    }
}

impl fmt::Display for ExclusionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.require_complete {
            parts.push("complete");
        }
        if self.drop_duplicate_workers {
            parts.push("unique-worker");
        }
        if self.require_survey {
            parts.push("survey");
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// Retained records in append order. Completion and survey rules apply
/// first; among the survivors, each worker keeps only the session with the
/// earliest `received_at_ms` (append order breaks ties).
pub fn apply_exclusions<'a>(records: &'a [SessionRecord], policy: &ExclusionPolicy) -> Vec<&'a SessionRecord> {
    let kept: Vec<(usize, &SessionRecord)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !policy.require_complete || r.complete)
        .filter(|(_, r)| !policy.require_survey || r.has_survey())
        .collect();
    if !policy.drop_duplicate_workers {
        return kept.into_iter().map(|(_, r)| r).collect();
    }
    let mut first: HashMap<&str, (u64, usize)> = HashMap::new();
    for &(i, r) in &kept {
        let key = (r.received_at_ms, i);
        first
            .entry(r.worker_id.as_str())
            .and_modify(|best| *best = (*best).min(key))
            .or_insert(key);
    }
    kept.into_iter()
        .filter(|&(i, r)| first[r.worker_id.as_str()].1 == i)
        .map(|(_, r)| r)
        .collect()
}
