//! A toy next-action head: a linear map from pooled context features (plus
//! an embedding of the previous token) to a small action vocabulary.

use thiserror::Error;

use super::Matrix;
use crate::episode::{Action, ActionKind};
use crate::seed::rng_for;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenizerError {
    #[error("character {0:?} is outside the action vocabulary")]
    OutOfVocabulary(char),
}

const FIRST_CHAR: u8 = b' ';
const LAST_CHAR: u8 = b'~';

/// Token ids: 0 is BOS, then one token per action kind, then printable
/// ASCII. An action is its kind token followed by the characters of its
/// canonical argument text, so `HOME` is one token and `CLICK(5,7)` is six.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActionTokenizer;

impl ActionTokenizer {
    pub const BOS: usize = 0;

    pub fn vocab_size(&self) -> usize {
        1 + ActionKind::ALL.len() + usize::from(LAST_CHAR - FIRST_CHAR) + 1
    }

    pub fn encode(&self, action: &Action) -> Result<Vec<usize>, TokenizerError> {
        let kind = action.kind();
        let kind_id = 1 + ActionKind::ALL.iter().position(|k| *k == kind).expect("known kind");
        let text = action.to_string();
        let args = &text[kind.as_str().len()..];
        let mut out = vec![kind_id];
        for ch in args.chars() {
            if !(FIRST_CHAR as char..=LAST_CHAR as char).contains(&ch) {
                return Err(TokenizerError::OutOfVocabulary(ch));
            }
            out.push(1 + ActionKind::ALL.len() + usize::from(ch as u8 - FIRST_CHAR));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// `d x V` output projection.
    pub projection: Matrix,
    /// `V x d` embedding of the previous token.
    pub embedding: Matrix,
    pub tokenizer: ActionTokenizer,
}

impl HeadParams {
    /// Zero projection: every token equally likely.
    pub fn uniform(d: usize) -> Self {
        let tokenizer = ActionTokenizer;
        let v = tokenizer.vocab_size();
        let mut rng = rng_for(0, &[b"head-embedding"]);
        Self {
            projection: Matrix::zeros(d, v),
            embedding: Matrix::gaussian(v, d, 0.5, &mut rng),
            tokenizer,
        }
    }

    pub fn init(d: usize, seed: u64) -> Self {
        let mut head = Self::uniform(d);
        let mut rng = rng_for(seed, &[b"head"]);
        let v = head.tokenizer.vocab_size();
        head.projection = Matrix::gaussian(d, v, 0.1, &mut rng);
        head.embedding = Matrix::gaussian(v, d, 0.5, &mut rng);
        head
    }

    pub fn vocab_size(&self) -> usize {
        self.projection.cols()
    }
}

/// Hidden state for each target position: pooled features plus the
/// previous token's embedding.
fn hidden(fused: &Matrix, head: &HeadParams, targets: &[usize]) -> Matrix {
    let pooled = fused.mean_rows();
    Matrix::from_fn(targets.len(), fused.cols(), |i, c| {
        let prev = if i == 0 { ActionTokenizer::BOS } else { targets[i - 1] };
        pooled[(0, c)] + head.embedding[(prev, c)]
    })
}

fn nll_and_grad(fused: &Matrix, target: &Action, head: &HeadParams) -> Result<(f64, Matrix), TokenizerError> {
    let targets = head.tokenizer.encode(target)?;
    let h = hidden(fused, head, &targets);
    let probs = h.matmul(&head.projection).softmax_rows();
    let mut loss = 0.0;
    let mut d_logits = probs.clone();
    for (i, t) in targets.iter().enumerate() {
        loss -= probs[(i, *t)].ln();
        d_logits[(i, *t)] -= 1.0;
    }
    Ok((loss, h.transpose().matmul(&d_logits)))
}

/// Sum over the target's tokens of `-log p(token | features, previous
/// token)`.
pub fn next_action_nll(fused: &Matrix, target: &Action, head: &HeadParams) -> Result<f64, TokenizerError> {
    Ok(nll_and_grad(fused, target, head)?.0)
}

/// Gradient of [`next_action_nll`] with respect to the projection.
pub fn next_action_nll_grad(fused: &Matrix, target: &Action, head: &HeadParams) -> Result<Matrix, TokenizerError> {
    Ok(nll_and_grad(fused, target, head)?.1)
}
