//! Scaling analysis of nonstationary time series.
//!
//! The crate covers the full chain used to separate linear from nonlinear
//! structure in a record: log-frequency power spectral density and power-law
//! fits ([`spectral`]), maximum-likelihood distribution fits ranked by
//! Kullback-Leibler divergence ([`distfit`]), singular spectrum analysis for
//! trend removal ([`ssa`]), magnitude/sign decomposition of increments
//! ([`series`]), detrended fluctuation analysis ([`dfa`]) and iterative
//! amplitude-adjusted Fourier surrogates ([`surrogate`]). [`synth`] provides
//! generators with known ground truth for checking each estimator.

pub mod dfa;
pub mod distfit;
pub mod error;
pub mod io;
pub mod series;
pub mod spectral;
pub mod ssa;
pub mod stats;
pub mod surrogate;
pub mod synth;

pub use dfa::{FluctuationFunction, Persistence, ScalingExponent};
pub use distfit::{DistFit, Distribution, EmpiricalDensity, Family};
pub use error::{Error, ErrorClass, Result};
pub use series::{CorrelationMatrix, IncrementSeries, MagSignPair, TimeSeries};
pub use spectral::{LpsdConfig, PsdEstimate, SpectralFit};
pub use ssa::{SsaConfig, SsaDecomposition, TrendSplit};
pub use surrogate::{SurrogateConfig, SurrogateReport};
pub use synth::{GeneratorSpec, SignalKind};
