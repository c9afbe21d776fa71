use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid agent state: opinion index {index} out of range for k = {k}")]
    InvalidState { index: usize, k: usize },

    #[error("population too small: n = {n}, need at least 2 agents to interact")]
    DegeneratePopulation { n: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("infeasible event {event}: {reason}")]
    InfeasibleEvent { event: String, reason: String },

    #[error("invalid opinion pair: i and j must be distinct, both {0}")]
    InvalidPair(usize),

    #[error("opinion index {index} out of range for k = {k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("weighted sampler has no positive weight")]
    EmptySampler,

    #[error("configuration is absorbing: the expected number of skipped no-ops is infinite")]
    InfiniteSkip,

    #[error("state space too large: {states} states exceed the cap of {cap}")]
    TooLarge { states: u64, cap: u64 },

    #[error("step cap exceeded: {steps} > {cap}")]
    StepCapExceeded { steps: u64, cap: u64 },

    #[error("start configuration not in chain: {0}")]
    StateNotInChain(String),

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("invalid walk parameters: {0}")]
    InvalidWalkParams(String),

    #[error("infeasible experiment: {0}")]
    InfeasibleSpec(String),

    #[error("agent-array simulator guard: n = {n} exceeds {cap}")]
    AgentGuard { n: u64, cap: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
