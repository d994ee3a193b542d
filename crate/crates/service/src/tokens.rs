//! Bearer tokens. Only SHA-256 digests are kept, in memory and on disk.

use std::collections::BTreeMap;

use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stakeweigh_core::StakeholderId;

/// 256 random bits, hex encoded.
pub fn generate_token() -> String {
    let mut bytes = [0u8; 32];
    OsRng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

pub fn digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Role {
    Facilitator,
    Stakeholder(StakeholderId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenTable {
    facilitator: String,
    #[serde(default)]
    stakeholders: BTreeMap<StakeholderId, String>,
}

impl TokenTable {
    /// A table with a fresh facilitator token, returned in clear text once.
    pub fn new() -> (Self, String) {
        let token = generate_token();
        let table = Self {
            facilitator: digest(&token),
            stakeholders: BTreeMap::new(),
        };
        (table, token)
    }

    /// Issues (or reissues, invalidating the old one) a stakeholder token.
    pub fn issue(&mut self, stakeholder: StakeholderId) -> String {
        let token = generate_token();
        self.stakeholders.insert(stakeholder, digest(&token));
        token
    }

    pub fn has_token(&self, stakeholder: &StakeholderId) -> bool {
        self.stakeholders.contains_key(stakeholder)
    }

    pub fn authenticate(&self, token: &str) -> Option<Role> {
        let presented = digest(token);
        if constant_time_eq(&presented, &self.facilitator) {
            return Some(Role::Facilitator);
        }
        self.stakeholders
            .iter()
            .find(|(_, d)| constant_time_eq(&presented, d))
            .map(|(id, _)| Role::Stakeholder(id.clone()))
    }
}

fn constant_time_eq(a: &str, b: &str) -> bool {
    a.len() == b.len()
        && a.bytes()
            .zip(b.bytes())
            .fold(0u8, |acc, (x, y)| acc | (x ^ y))
            == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_authenticate_by_role() {
        let (mut table, facilitator) = TokenTable::new();
        assert_eq!(facilitator.len(), 64);
        let alice = table.issue("alice".into());
        assert_eq!(table.authenticate(&facilitator), Some(Role::Facilitator));
        assert_eq!(
            table.authenticate(&alice),
            Some(Role::Stakeholder("alice".into()))
        );
        assert_eq!(table.authenticate("guess"), None);
        let reissued = table.issue("alice".into());
        assert_eq!(table.authenticate(&alice), None);
        assert!(table.authenticate(&reissued).is_some());
    }

    #[test]
    fn stored_form_has_no_clear_tokens() {
        let (mut table, facilitator) = TokenTable::new();
        let alice = table.issue("alice".into());
        let json = serde_json::to_string(&table).unwrap();
        assert!(!json.contains(&facilitator) && !json.contains(&alice));
        assert_eq!(serde_json::from_str::<TokenTable>(&json).unwrap(), table);
    }
}
