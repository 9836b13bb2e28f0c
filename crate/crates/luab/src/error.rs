use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LuabError {
    #[error("smooth-l1 beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("pooling bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergedTraining { epoch: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("sample {0} has fewer than two classes")]
    NoCooccurrence(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
