use thiserror::Error;

use crate::domain::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state (h_m={h_m}, h_d={h_d}) outside the {z_m}x{z_d} lattice")]
    StateOutOfBounds {
        h_m: usize,
        h_d: usize,
        z_m: usize,
        z_d: usize,
    },

    #[error("lattice index {index} outside 0..{len}")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("malformed config document: {0}")]
    ConfigDocument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inconsistent focal provider: {0}")]
    InconsistentFocal(String),

    #[error("chain is reducible: {0}")]
    ReducibleChain(String),

    #[error("stationary solve failed: {0}")]
    Solver(String),

    #[error("no feasible candidate: {0}")]
    Infeasible(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
