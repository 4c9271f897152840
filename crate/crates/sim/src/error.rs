use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state diverged at step {step} (t = {t:.6e} s): {what}")]
    Diverged { step: u64, t: f64, what: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("window of {want} periods exceeds the {have:.3} periods in the trace")]
    Window { want: usize, have: f64 },
    #[error(transparent)]
    Core(#[from] ibb_core::CoreError),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn config(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}
