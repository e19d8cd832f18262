use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::state::Version;
use crate::contract::Invocation;
use crate::time::LogicalTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrincipalKind {
    Organisation,
    Department,
    Employee,
    TransportCompany,
    NetworkAdmin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub id: String,
    pub kind: PrincipalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub org: Option<String>,
    #[serde(default)]
    pub role: String,
}

impl Principal {
    pub fn new(id: impl Into<String>, kind: PrincipalKind) -> Self {
        Self {
            id: id.into(),
            kind,
            org: None,
            role: String::new(),
        }
    }

    pub fn organisation(id: impl Into<String>) -> Self {
        Self::new(id, PrincipalKind::Organisation)
    }

    pub fn company(id: impl Into<String>) -> Self {
        Self::new(id, PrincipalKind::TransportCompany)
    }

    pub fn department(id: impl Into<String>, org: impl Into<String>) -> Self {
        Self {
            org: Some(org.into()),
            ..Self::new(id, PrincipalKind::Department)
        }
    }

    pub fn employee(id: impl Into<String>, org: impl Into<String>, role: impl Into<String>) -> Self {
        Self {
            org: Some(org.into()),
            role: role.into(),
            ..Self::new(id, PrincipalKind::Employee)
        }
    }

    /// Employees and departments belong to an organisation.
    pub fn is_well_formed(&self) -> bool {
        !self.id.is_empty()
            && match self.kind {
                PrincipalKind::Employee | PrincipalKind::Department => self.org.is_some(),
                _ => true,
            }
    }
}

/// A channel: one organisation plus the transport companies it trades with.
/// Membership is fixed at creation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub organisation: String,
    pub companies: BTreeSet<String>,
}

impl ChannelSpec {
    pub fn members(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.organisation.as_str()).chain(self.companies.iter().map(String::as_str))
    }

    pub fn is_member(&self, id: &str) -> bool {
        self.organisation == id || self.companies.contains(id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRead {
    pub key: String,
    /// `None` when the key was absent in the execution snapshot.
    pub version: Option<Version>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum WriteOp {
    Put {
        #[serde(with = "hex")]
        value: Vec<u8>,
    },
    Delete,
    /// Integer increment re-checked at commit: the resulting value must stay
    /// within `[min, max]`, otherwise the transaction is invalidated.
    Add {
        delta: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<i64>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyWrite {
    pub key: String,
    pub op: WriteOp,
}

/// Contract event. Delivered to subscribers only once the emitting
/// transaction commits as valid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub channel: String,
    pub payload: BTreeMap<String, Value>,
    pub emitting_tx: String,
}

impl Event {
    /// Parties named in the payload's `recipients` list. An event without the
    /// field is addressed to every channel member.
    pub fn recipients(&self) -> Option<Vec<&str>> {
        self.payload
            .get("recipients")
            .and_then(Value::as_array)
            .map(|list| list.iter().filter_map(Value::as_str).collect())
    }

    pub fn is_addressed_to(&self, party: &str) -> bool {
        self.recipients().is_none_or(|r| r.contains(&party))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadWriteSet {
    pub reads: Vec<KeyRead>,
    pub writes: Vec<KeyWrite>,
    pub events: Vec<Event>,
}

impl ReadWriteSet {
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.reads
            .iter()
            .map(|r| r.key.as_str())
            .chain(self.writes.iter().map(|w| w.key.as_str()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validity {
    Valid,
    MvccConflict,
    EndorsementError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub tx_id: String,
    pub channel: String,
    pub submitter: String,
    pub invocation: Invocation,
    pub rwset: ReadWriteSet,
    /// Contract return value from execution.
    pub response: Value,
    /// Contract error code when execution failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub submit_time: LogicalTime,
    pub commit_time: LogicalTime,
    pub validity: Validity,
}
