//! Request classification into the three student-interface states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CampaignConfig, ClientIp, InvalidAddress, SessionMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessDecision {
    pub mode: SessionMode,
    pub reset_allowed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("reset is not permitted in {mode:?} mode")]
pub struct ResetForbidden {
    pub mode: SessionMode,
}

/// Classifies a textual client address against a config snapshot.
pub fn classify_access(client_ip: &str, config: &CampaignConfig) -> Result<AccessDecision, InvalidAddress> {
    let ip = ClientIp::parse(client_ip)?;
    Ok(classify(&ip, config))
}

pub fn classify(ip: &ClientIp, config: &CampaignConfig) -> AccessDecision {
    let mode = match (config.active, config.is_allowlisted(ip)) {
        (false, _) => SessionMode::Closed,
        (true, true) => SessionMode::Official,
        (true, false) => SessionMode::Demo,
    };
    AccessDecision { mode, reset_allowed: mode == SessionMode::Demo }
}

pub fn authorize_reset(decision: AccessDecision) -> Result<(), ResetForbidden> {
    match decision.mode {
        SessionMode::Demo => Ok(()),
        mode => Err(ResetForbidden { mode }),
    }
}
