//! Simulation laboratory for the undecided-state dynamics (USD) on the
//! complete graph with a uniform random pairwise scheduler.
//!
//! The protocol has `k + 1` agent states: `k` opinions plus "undecided".
//! When two agents with distinct opinions interact they both become
//! undecided; when a decided agent meets an undecided one, the undecided
//! agent adopts the opinion. The crate provides:
//!
//! * [`model`] — configurations, interaction event classes with their exact
//!   probabilities, and closed-form one-step drift expectations (floating
//!   point and exact rational arithmetic);
//! * [`engine`] — high-throughput count-level trajectory simulation with
//!   geometric no-op skipping, plus an agent-array reference simulator;
//! * [`oracle`] — exact Markov-chain analysis of small instances
//!   (absorption probabilities and expected stabilization times);
//! * [`drift`] — the lazy biased random walk, its monotone coupling,
//!   Bernstein tail evaluation and the Oliveto–Witt drift-theorem
//!   condition checker;
//! * [`experiments`] — initial-configuration builders, undecided-count band
//!   checks, opinion-growth and difference-doubling hitting times, sweeps
//!   and scaling fits;
//! * [`output`] — CSV/JSON/SVG emission and run manifests for the CLI.

pub mod drift;
pub mod engine;
mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod output;
pub mod sampler;
pub mod stats;

pub use error::Error;

/// Shorthand used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Logarithm base used by every formula involving `log n`.
///
/// Asymptotic statements never fix a base; constants rescale with it. All
/// reports state which base was used. Defaults to natural.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "natural")]
    Natural,
    #[serde(rename = "two")]
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Natural => "natural",
            LogBase::Two => "two",
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" | "e" | "ln" => Ok(LogBase::Natural),
            "two" | "2" | "log2" => Ok(LogBase::Two),
            other => Err(Error::InvalidArgument(format!(
                "unknown log base `{other}` (expected `natural` or `two`)"
            ))),
        }
    }
}
