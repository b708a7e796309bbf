//! Goal checking on the reduced transition graph.

use serde::Serialize;
use thiserror::Error;

use crate::dsl::ProtocolSpec;
use crate::explore::{resolve_goals, ExploreError, Property};
use crate::tg::{analyze, check_integrity, check_secrecy, Analysis, TgError, TgVerdict};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("{0} has replicable processes; use the bounded explorer")]
    Replicable(String),
    #[error("goal `{0}` is not supported on transition graphs")]
    Unsupported(String),
    #[error(transparent)]
    Tg(#[from] TgError),
    #[error(transparent)]
    Goal(#[from] ExploreError),
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CheckReport {
    pub protocol: String,
    pub status: &'static str,
    pub goals: Vec<TgVerdict>,
}

pub fn check_spec(spec: &ProtocolSpec) -> Result<(CheckReport, Analysis), CheckError> {
    if spec.has_replicable() {
        return Err(CheckError::Replicable(spec.name.to_string()));
    }
    let (dp, vars) = spec.single_dp();
    let a = analyze(&dp)?;
    let mut goals = Vec::new();
    for p in resolve_goals(spec, &dp, &vars)? {
        goals.push(match &p {
            Property::Integrity { goal, proc, node, eqs } => check_integrity(&a, goal, *proc, *node, eqs),
            Property::Secrecy { goal, items } => check_secrecy(&a, goal, items),
            Property::Correspondence { goal, .. } => return Err(CheckError::Unsupported(goal.clone())),
        });
    }
    let ok = goals.iter().all(|g| g.status == "holds");
    Ok((
        CheckReport {
            protocol: spec.name.to_string(),
            status: if ok { "holds" } else { "violated" },
            goals,
        },
        a,
    ))
}
