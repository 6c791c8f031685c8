//! Prequential evaluation: windowed confusion matrix, accuracy, kappa and
//! the queryable synopsis.

pub mod confusion;
pub mod synopsis;
pub mod window;

pub use confusion::{ConfusionMatrix, KappaError};
pub use synopsis::{snapshot, Synopsis, SynopsisError, TokenCount};
pub use window::{Metrics, SlidingWindowEvaluator, DEFAULT_WINDOW};
