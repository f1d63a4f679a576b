//! A double-precision history resampler: one cross-attention layer whose
//! learnable queries compress `k x n` history screenshot tokens into a fixed
//! `m x d` block, plus token accounting against plain concatenation and a
//! toy next-action head with a negative log-likelihood objective.
//!
//! Everything here is small and exact enough for finite-difference checks;
//! nothing is meant for real training.

mod attention;
mod head;
mod matrix;

pub use attention::{
    attention_weights, grad_check, resample, sum_squares_gradients, sum_squares_loss, GradCheck,
    Gradients, HistoryTokens, ResamplerError, ResamplerParams, EMBED_INIT_SCALE, REL_FLOOR,
};
pub use head::{next_action_nll, next_action_nll_grad, ActionTokenizer, HeadParams, TokenizerError};
pub use matrix::Matrix;

/// Default query count and tokens per screenshot.
pub const DEFAULT_QUERIES: usize = 256;
pub const DEFAULT_TOKENS_PER_IMAGE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryStrategy {
    /// A fixed block of `queries` tokens whatever the history length.
    Resampler { queries: usize },
    /// Every history image's tokens appended to the context.
    Concat,
}

/// Context tokens spent on `delta` history screenshots. An empty history
/// bypasses the resampler and costs nothing.
pub fn token_budget(delta: usize, per_image_tokens: usize, strategy: HistoryStrategy) -> usize {
    match strategy {
        HistoryStrategy::Resampler { .. } if delta == 0 => 0,
        HistoryStrategy::Resampler { queries } => queries,
        HistoryStrategy::Concat => delta * per_image_tokens,
    }
}

/// Context features for the head: the resampled history (when there is
/// one) stacked on the current screenshot's tokens.
pub fn fuse(
    params: &ResamplerParams,
    current: &Matrix,
    history: Option<&HistoryTokens>,
) -> Result<Matrix, ResamplerError> {
    match history {
        Some(h) if h.tokens.rows() > 0 => Ok(resample(params, h)?.vstack(current)),
        _ => Ok(current.clone()),
    }
}
