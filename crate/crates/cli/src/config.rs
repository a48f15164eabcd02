//! Pipeline configuration file (TOML). Every section is optional and every
//! field has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsscale_core::io::{CsvOptions, GapPolicy};
use tsscale_core::spectral::{LpsdConfig, WindowKind};
use tsscale_core::ssa;
use tsscale_core::surrogate::SurrogateConfig;
use tsscale_core::distfit::DistfitConfig;

use crate::exit::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    #[serde(default = "default_value_column")]
    pub value_column: String,
    pub label: String,
}

fn default_value_column() -> String {
    "value".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub time_column: String,
    /// Minutes; inferred from the data when absent.
    pub expected_dt: Option<f64>,
    pub gap_policy: GapPolicy,
    pub delimiter: char,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            time_column: "timestamp".into(),
            expected_dt: None,
            gap_policy: GapPolicy::Fail,
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSection {
    /// Averaging window in minutes; absent keeps the native resolution.
    pub window: Option<f64>,
}

impl Default for ResampleSection {
    fn default() -> Self {
        Self { window: Some(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    /// Fit band in min⁻¹.
    pub band: [f64; 2],
    pub n_freqs: usize,
    pub window: WindowKind,
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self {
            band: [1e-4, 1e-2],
            n_freqs: 200,
            window: WindowKind::Hann,
        }
    }
}

impl SpectralSection {
    pub fn lpsd(&self) -> LpsdConfig {
        LpsdConfig {
            n_freqs: self.n_freqs,
            window: self.window,
            ..LpsdConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistfitSection {
    /// Fixed histogram bin count; Freedman-Diaconis when absent.
    pub n_bins: Option<usize>,
    pub zero_shift: f64,
}

impl Default for DistfitSection {
    fn default() -> Self {
        Self {
            n_bins: None,
            zero_shift: 1e-6,
        }
    }
}

impl DistfitSection {
    pub fn config(&self) -> DistfitConfig {
        DistfitConfig {
            n_bins: self.n_bins,
            zero_shift: self.zero_shift,
            ..DistfitConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsaSection {
    /// Exponent `c` of the window rule `M = (ln N)^c`.
    pub exponent: f64,
    /// Explicit window, overriding the rule.
    pub window: Option<usize>,
    /// One-based components summed into the trend.
    pub trend: Vec<usize>,
    pub centered: bool,
}

impl Default for SsaSection {
    fn default() -> Self {
        Self {
            exponent: ssa::DEFAULT_EXPONENT,
            window: None,
            trend: vec![1],
            centered: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DfaSection {
    pub order: usize,
    /// Smallest box in minutes.
    pub t_min: f64,
    pub points_per_decade: usize,
    /// Fit windows in minutes.
    pub low: [f64; 2],
    pub high: [f64; 2],
}

impl Default for DfaSection {
    fn default() -> Self {
        Self {
            order: 1,
            t_min: 10.0,
            points_per_decade: 20,
            low: [10.0, 70.0],
            high: [300.0, 9070.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowName {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub count: usize,
    pub max_iterations: usize,
    pub spectrum_tolerance: f64,
    /// DFA window used for the ensemble comparison.
    pub window: WindowName,
    /// Overrides the top-level seed for the surrogate streams.
    pub seed: Option<u64>,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let d = SurrogateConfig::default();
        Self {
            count: d.count,
            max_iterations: d.max_iterations,
            spectrum_tolerance: d.spectrum_tolerance,
            window: WindowName::High,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub inputs: Vec<InputSpec>,
    pub ingest: IngestSection,
    pub resample: ResampleSection,
    pub spectral: SpectralSection,
    pub distfit: DistfitSection,
    pub ssa: SsaSection,
    pub dfa: DfaSection,
    pub surrogate: SurrogateSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("tsscale-out"),
            inputs: Vec::new(),
            ingest: IngestSection::default(),
            resample: ResampleSection::default(),
            spectral: SpectralSection::default(),
            distfit: DistfitSection::default(),
            ssa: SsaSection::default(),
            dfa: DfaSection::default(),
            surrogate: SurrogateSection::default(),
        }
    }
}

fn valid_window(name: &str, w: [f64; 2]) -> Result<(), CliError> {
    if !(w[0] > 0.0 && w[0] < w[1] && w[1].is_finite()) {
        return Err(CliError::config(format!(
            "dfa.{name} window [{}, {}] must satisfy 0 < lo < hi",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label != "."
        && label != ".."
        && label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

impl PipelineConfig {
    /// Reads and validates a config file; relative input paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for input in &mut cfg.inputs {
            if input.path.is_relative() {
                input.path = base.join(&input.path);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    /// Checks shared by every subcommand; inputs are not required here.
    pub fn validate_stages(&self) -> Result<(), CliError> {
        valid_window("low", self.dfa.low)?;
        valid_window("high", self.dfa.high)?;
        if self.dfa.low[1] >= self.dfa.high[0] {
            return Err(CliError::config(format!(
                "dfa windows overlap or are out of order: low = [{}, {}], high = [{}, {}]",
                self.dfa.low[0], self.dfa.low[1], self.dfa.high[0], self.dfa.high[1]
            )));
        }
        if !(1..=tsscale_core::dfa::MAX_ORDER).contains(&self.dfa.order) {
            return Err(CliError::config(format!("dfa.order must be 1..=3, got {}", self.dfa.order)));
        }
        if self.dfa.points_per_decade == 0 || !(self.dfa.t_min > 0.0) {
            return Err(CliError::config("dfa.points_per_decade and dfa.t_min must be positive"));
        }
        let [lo, hi] = self.spectral.band;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(CliError::config(format!("spectral.band [{lo}, {hi}] must satisfy 0 < lo < hi")));
        }
        if self.spectral.n_freqs < 2 {
            return Err(CliError::config("spectral.n_freqs must be at least 2"));
        }
        if self.ssa.trend.is_empty() || self.ssa.trend.contains(&0) {
            return Err(CliError::config("ssa.trend must list one-based component indices"));
        }
        if !(1.5..=2.5).contains(&self.ssa.exponent) {
            return Err(CliError::config(format!(
                "ssa.exponent must lie in [1.5, 2.5], got {}",
                self.ssa.exponent
            )));
        }
        if let Some(w) = self.resample.window {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CliError::config("resample.window must be positive"));
            }
        }
        if self.distfit.n_bins == Some(0) || !(self.distfit.zero_shift > 0.0) {
            return Err(CliError::config("distfit.n_bins and distfit.zero_shift must be positive"));
        }
        self.surrogate_config(self.seed)
            .validate()
            .map_err(|e| CliError::config(format!("surrogate: {e}")))?;
        if !self.ingest.delimiter.is_ascii() {
            return Err(CliError::config("ingest.delimiter must be a single ASCII character"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.inputs.is_empty() {
            return Err(CliError::config("config lists no inputs"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for input in &self.inputs {
            if !valid_label(&input.label) {
                return Err(CliError::config(format!(
                    "label `{}` must be non-empty and use only letters, digits, `-`, `_`, `.`",
                    input.label
                )));
            }
            if !seen.insert(input.label.as_str()) {
                return Err(CliError::config(format!("duplicate label `{}`", input.label)));
            }
        }
        self.validate_stages()
    }

    pub fn csv_options(&self, value_column: &str, label: &str) -> CsvOptions {
        CsvOptions {
            value_column: value_column.to_string(),
            time_column: self.ingest.time_column.clone(),
            expected_dt: self.ingest.expected_dt,
            gap_policy: self.ingest.gap_policy,
            delimiter: self.ingest.delimiter as u8,
            label: Some(label.to_string()),
            unit: String::new(),
        }
    }

    pub fn surrogate_seed(&self, seed: u64) -> u64 {
        self.surrogate.seed.unwrap_or(seed)
    }

    pub fn surrogate_config(&self, seed: u64) -> SurrogateConfig {
        SurrogateConfig {
            count: self.surrogate.count,
            seed: self.surrogate_seed(seed),
            max_iterations: self.surrogate.max_iterations,
            spectrum_tolerance: self.surrogate.spectrum_tolerance,
        }
    }

    pub fn surrogate_window(&self) -> [f64; 2] {
        match self.surrogate.window {
            WindowName::Low => self.dfa.low,
            WindowName::High => self.dfa.high,
        }
    }
}
