//! Statistical primary and foreign key discovery.

pub mod fk;
pub mod names;
pub mod pk;
pub mod values;

use serde::{Deserialize, Serialize};

use crate::ingest::DiscoveryInput;
use crate::model::{CanonicalType, Relationship};
use crate::stats::SchemaProfiles;

pub use fk::{FkCandidate, FkConfig, FkDiscovery, ProposedFk};
pub use pk::{PkCandidate, PkConfig, PkDiscovery};

/// A named multiplicative adjustment applied to a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub name: String,
    pub multiplier: f64,
}

impl Penalty {
    pub fn new(name: &str, multiplier: f64) -> Self {
        Self {
            name: name.to_string(),
            multiplier,
        }
    }
}

/// Source types that never hold references.
pub fn tier1_excluded_type(ty: CanonicalType) -> bool {
    matches!(
        ty,
        CanonicalType::Date
            | CanonicalType::Time
            | CanonicalType::Timestamp
            | CanonicalType::Boolean
            | CanonicalType::Float
            | CanonicalType::Binary
            | CanonicalType::Text
            | CanonicalType::Other
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DiscoveryConfig {
    pub pk: PkConfig,
    pub fk: FkConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub pks: PkDiscovery,
    pub fks: FkDiscovery,
}

impl DiscoveryResult {
    pub fn relationships(&self) -> Vec<Relationship> {
        self.fks.relationships()
    }
}

pub fn discover(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    config: &DiscoveryConfig,
) -> DiscoveryResult {
    let pks = pk::discover_pks(input, profiles, &config.pk);
    let fks = fk::discover_fks(input, profiles, &pks, &config.fk);
    DiscoveryResult { pks, fks }
}
