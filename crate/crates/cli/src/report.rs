//! The pipeline's summary document, `report.json`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tsscale_core::distfit::TableRow;
use tsscale_core::{CorrelationMatrix, SpectralFit, SurrogateReport};

use crate::config::PipelineConfig;
use crate::stages::{IngestSummary, MagSignDfa, SsaSummary};

pub const TOOL: &str = "tsscale";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub global: u64,
    pub surrogate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesReport {
    pub label: String,
    /// Stage name to artifact path, relative to the output directory.
    pub artifacts: BTreeMap<String, Vec<String>>,
    pub ingest: IngestSummary,
    pub distfit: TableRow,
    pub spectral: SpectralFit,
    pub ssa: SsaSummary,
    /// Exponents of the residual's magnitude and sign series.
    pub dfa: MagSignDfa,
    pub surrogate: SurrogateReport,
}

/// Pearson matrix, or why it could not be formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pearson {
    /// Epoch seconds spanned by the aligned samples.
    pub start: Option<f64>,
    pub samples: usize,
    pub matrix: Option<CorrelationMatrix>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineReport {
    pub tool: String,
    pub version: String,
    pub seeds: Seeds,
    pub config: PipelineConfig,
    pub series: Vec<SeriesReport>,
    pub pearson_originals: Pearson,
    pub pearson_trends: Pearson,
}
