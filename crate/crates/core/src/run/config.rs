use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::budget::Guardrails;
use crate::analyzer::HttpConfig;
use crate::discovery::DiscoveryConfig;
use crate::error::RunError;
use crate::ingest::TableFilters;
use crate::model::ObjectId;
use crate::output::OutputToggles;
use crate::refine::{ConvergenceConfig, RefineConfig, SanityRules};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SchemaFilter {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct TableFilter {
    /// `schema.table` or a bare table name.
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct AnalyzerSettings {
    pub provider: Provider,
    pub http: HttpConfig,
    /// Directory of `<template>.txt` files overriding the built-in prompts.
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    /// Snapshot manifest.
    pub snapshot: PathBuf,
    /// Directory holding the numbered run directories.
    pub output_root: PathBuf,
    pub schemas: SchemaFilter,
    pub tables: TableFilter,
    /// Rows sampled per table; 0 disables value sampling.
    pub sample_size: usize,
    pub seed: u64,
    pub cardinality_threshold: Option<usize>,
    pub discovery: DiscoveryConfig,
    pub analyzer: AnalyzerSettings,
    pub convergence: ConvergenceConfig,
    pub sanity_rules: SanityRules,
    pub seed_context: String,
    pub ground_truth: BTreeMap<ObjectId, String>,
    /// Concurrent analyzer calls within one dependency level.
    pub parallelism: usize,
    pub guardrails: Guardrails,
    pub outputs: OutputToggles,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            snapshot: PathBuf::from("manifest.json"),
            output_root: PathBuf::from("runs"),
            schemas: SchemaFilter::default(),
            tables: TableFilter::default(),
            sample_size: 1000,
            seed: 42,
            cardinality_threshold: None,
            discovery: DiscoveryConfig::default(),
            analyzer: AnalyzerSettings::default(),
            convergence: ConvergenceConfig::default(),
            sanity_rules: SanityRules::default(),
            seed_context: String::new(),
            ground_truth: BTreeMap::new(),
            parallelism: 4,
            guardrails: Guardrails::default(),
            outputs: OutputToggles::default(),
        }
    }
}

/// Keys left out of the digest: they change limits, placement or artifacts,
/// not what a run computes.
const UNDIGESTED: [&str; 4] = ["guardrails", "outputs", "outputRoot", "parallelism"];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.snapshot);
        fix(&mut self.output_root);
        if let Some(d) = self.analyzer.templates_dir.as_mut() {
            fix(d);
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.convergence.validate().map_err(RunError::Config)?;
        self.guardrails.validate().map_err(RunError::Config)?;
        if self.parallelism == 0 {
            return Err(RunError::Config("parallelism must be at least 1".into()));
        }
        if self.analyzer.provider == Provider::Http && self.analyzer.http.endpoint.is_empty() {
            return Err(RunError::Config("analyzer.http.endpoint is required for the http provider".into()));
        }
        Ok(())
    }

    pub fn filters(&self) -> TableFilters {
        TableFilters {
            include_schemas: self.schemas.include.clone(),
            exclude_schemas: self.schemas.exclude.clone(),
            exclude_tables: self.tables.exclude.clone(),
        }
    }

    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            convergence: self.convergence,
            sanity_rules: self.sanity_rules,
            seed_context: self.seed_context.clone(),
            parallelism: self.parallelism,
        }
    }

    /// SHA-256 over the settings that determine results.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            for k in UNDIGESTED {
                map.remove(k);
            }
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
