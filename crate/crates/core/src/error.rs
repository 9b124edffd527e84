use thiserror::Error;

/// Errors produced by the filters, the theory predictors and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    /// A recursion whose contraction factor is not below one.
    #[error("unstable: {0}")]
    Unstable(String),

    /// The divergence sentinel fired on a running filter.
    #[error("{}", describe_divergence(.algorithm, *.trial, *.iteration))]
    Diverged {
        algorithm: Option<String>,
        trial: Option<u64>,
        iteration: usize,
    },
}

fn describe_divergence(algorithm: &Option<String>, trial: Option<u64>, iteration: usize) -> String {
    let mut msg = String::from("diverged");
    if let Some(name) = algorithm {
        msg.push_str(&format!(" ({name})"));
    }
    if let Some(t) = trial {
        msg.push_str(&format!(" in trial {t}"));
    }
    msg.push_str(&format!(" at iteration {iteration}"));
    msg
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
