use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("insufficient history for server {server}: {len} events, need more than {needed}")]
    InsufficientHistory {
        server: usize,
        len: usize,
        needed: usize,
    },
    #[error("r2 undefined: {0}")]
    UndefinedR2(&'static str),
    #[error("constraint violated: {0}")]
    Constraint(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
