use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e}, norm {norm:e})")]
    NotPsd { min_eig: f64, norm: f64 },

    #[error("problem infeasible: {0}")]
    Infeasible(String),

    #[error("randomization found no feasible rank-one candidate")]
    RecoveryFailed,

    #[error("phase subproblem infeasible: 2*sum|f_n| = {reachable:e} < c2 = {c2:e}")]
    PhaseStepInfeasible { reachable: f64, c2: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("grid of {size} evaluations exceeds the cap of {cap}")]
    GridTooLarge { size: f64, cap: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
