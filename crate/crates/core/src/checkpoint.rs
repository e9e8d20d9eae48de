//! Versioned JSON checkpoints holding the policy and, optionally, the instinct.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{InstinctAgent, PolicyAgent};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointRole {
    PolicyOnly,
    PolicyPlusInstinct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub role: CheckpointRole,
    pub policy: PolicyAgent,
    pub instinct: Option<InstinctAgent>,
}

impl Checkpoint {
    pub fn policy_only(policy: PolicyAgent) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            role: CheckpointRole::PolicyOnly,
            policy,
            instinct: None,
        }
    }

    pub fn with_instinct(policy: PolicyAgent, instinct: InstinctAgent) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            role: CheckpointRole::PolicyPlusInstinct,
            policy,
            instinct: Some(instinct),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        match (self.role, &self.instinct) {
            (CheckpointRole::PolicyOnly, None) | (CheckpointRole::PolicyPlusInstinct, Some(_)) => {}
            (role, inst) => {
                return Err(Error::Config(format!(
                    "checkpoint role {role:?} but instinct {}",
                    if inst.is_some() { "present" } else { "missing" }
                )))
            }
        }
        PolicyAgent::from_net(self.policy.net.clone())?;
        if let Some(inst) = &self.instinct {
            InstinctAgent::from_net(inst.net.clone())?;
        }
        Ok(())
    }

    /// Writes to a sibling temp file, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::json(path, e))?;
        write_atomic(path, &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} has no file name", path.display())))?;
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
