#![allow(dead_code)]

use std::collections::BTreeMap;

use darkdoc_core::analyzer::MockAnalyzer;
use darkdoc_core::discovery::{self, DiscoveryConfig, DiscoveryResult};
use darkdoc_core::fixture::{self, Fixture};
use darkdoc_core::ingest::SchemaSnapshot;
use darkdoc_core::model::{build_dependency_graph, ObjectId};
use darkdoc_core::refine::{
    self, ConvergenceConfig, Evidence, RefineConfig, RefineState, Unlimited,
};
use darkdoc_core::stats::{self, SchemaProfiles};

pub struct Prepared {
    pub fixture: Fixture,
    pub snapshot: SchemaSnapshot,
    pub profiles: SchemaProfiles,
    pub discovery: DiscoveryResult,
    pub config: DiscoveryConfig,
}

pub fn prepare(name: &str) -> Prepared {
    let fixture = fixture::generate(&fixture::preset(name).expect("known preset"));
    let snapshot = fixture.snapshot();
    let input = snapshot.discovery_input();
    let profiles = stats::profile_schema(&input, 1000, 42, Default::default());
    let config = DiscoveryConfig::default();
    let discovery = discovery::discover(&input, &profiles, &config);
    Prepared {
        fixture,
        snapshot,
        profiles,
        discovery,
        config,
    }
}

impl Prepared {
    pub fn evidence(&self) -> Evidence<'_> {
        Evidence {
            input: self.snapshot.discovery_input(),
            profiles: &self.profiles,
            pks: &self.discovery.pks,
            fk_config: &self.config.fk,
            adaptive: self.discovery.fks.adaptive,
        }
    }

    pub fn fresh_state(&self, truth: &BTreeMap<ObjectId, String>) -> RefineState {
        let graph = build_dependency_graph(&self.snapshot.tables, &self.discovery.relationships())
            .expect("discovered relationships reference known tables");
        RefineState::new(&self.snapshot.tables, graph, truth).expect("known ground-truth ids")
    }

    /// Full refinement with the mock analyzer and no limits.
    pub fn refine(&self, max_iterations: usize, truth: &BTreeMap<ObjectId, String>) -> (RefineState, Unlimited) {
        let mut state = self.fresh_state(truth);
        let config = RefineConfig {
            convergence: ConvergenceConfig {
                max_iterations,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut hooks = Unlimited::default();
        refine::run_iterations(
            &mut state,
            &self.snapshot.tables,
            &self.evidence(),
            &MockAnalyzer,
            &config,
            &mut hooks,
        )
        .expect("mock refinement completes");
        (state, hooks)
    }
}
