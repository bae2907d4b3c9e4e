//! Crate-wide error type and exit-code categories.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad parameter values, unknown strategy names,
    /// malformed run configs.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid or inconsistent data: malformed records, violated invariants,
    /// mismatched lengths.
    #[error("data error: {0}")]
    Data(String),

    /// A pipeline stage was invoked before the stage that produces its input.
    #[error("missing input for stage `{stage}`: run stage `{produced_by}` first")]
    MissingDependency { stage: String, produced_by: String },

    /// The decomposer emitted no parseable sub-question.
    #[error("decomposer produced no parseable sub-question")]
    EmptyDecomposition,

    /// LLM service failures that survived the retry policy.
    #[error("llm error: {0}")]
    Llm(String),

    /// Authentication failure from the LLM service; never retried.
    #[error("llm authentication error: {0}")]
    LlmAuth(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Anything else that went wrong at runtime.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Error::Runtime(msg.into())
    }

    /// Process exit code for this error's category.
    ///
    /// 2 = config, 3 = data, 4 = i/o or serialization, 5 = llm, 6 = runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::MissingDependency { .. } | Error::EmptyDecomposition => 3,
            Error::Io(_) | Error::Json(_) => 4,
            Error::Llm(_) | Error::LlmAuth(_) => 5,
            Error::Runtime(_) => 6,
        }
    }
}
