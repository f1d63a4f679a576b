use thiserror::Error;

use super::Matrix;
use crate::seed::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResamplerError {
    #[error("history is empty; bypass the resampler instead")]
    EmptyHistory,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Learnable queries (`m x d`), the four `d x d` projections and optional
/// per-slot position embeddings (`max_slots x d`) added to key inputs.
///
/// Position embeddings are centered over the slots in use before they are
/// added. Softmax ignores any component shared by all keys, so the
/// uncentered model computes the same function; centering removes that
/// unidentifiable direction, which keeps a single-slot history from having
/// a gradient that is zero in theory but roundoff noise in practice.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplerParams {
    pub queries: Matrix,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub positions: Option<Matrix>,
}

/// Scale of the query and position initialization.
pub const EMBED_INIT_SCALE: f64 = 0.02;

impl ResamplerParams {
    /// Seeded init: embeddings from `N(0, 0.02^2)`, projections from
    /// `N(0, 1/d)`.
    pub fn init(m: usize, d: usize, max_slots: Option<usize>, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[b"resampler-init"]);
        let w = (1.0 / d as f64).sqrt();
        Self {
            queries: Matrix::gaussian(m, d, EMBED_INIT_SCALE, &mut rng),
            w_q: Matrix::gaussian(d, d, w, &mut rng),
            w_k: Matrix::gaussian(d, d, w, &mut rng),
            w_v: Matrix::gaussian(d, d, w, &mut rng),
            w_o: Matrix::gaussian(d, d, w, &mut rng),
            positions: max_slots.map(|s| Matrix::gaussian(s, d, EMBED_INIT_SCALE, &mut rng)),
        }
    }

    pub fn m(&self) -> usize {
        self.queries.rows()
    }

    pub fn d(&self) -> usize {
        self.queries.cols()
    }

    /// Named parameter matrices in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = vec![
            ("queries", &self.queries),
            ("w_q", &self.w_q),
            ("w_k", &self.w_k),
            ("w_v", &self.w_v),
            ("w_o", &self.w_o),
        ];
        if let Some(p) = &self.positions {
            out.push(("positions", p));
        }
        out
    }

    fn named_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut out = vec![
            ("queries", &mut self.queries),
            ("w_q", &mut self.w_q),
            ("w_k", &mut self.w_k),
            ("w_v", &mut self.w_v),
            ("w_o", &mut self.w_o),
        ];
        if let Some(p) = &mut self.positions {
            out.push(("positions", p));
        }
        out
    }
}

/// Tokens of `k` history screenshots, `n` tokens each, stacked slot by slot
/// (oldest first) into a `(k*n) x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTokens {
    pub tokens: Matrix,
    pub per_image: usize,
}

impl HistoryTokens {
    pub fn new(tokens: Matrix, per_image: usize) -> Result<Self, ResamplerError> {
        if per_image == 0 || !tokens.rows().is_multiple_of(per_image) {
            return Err(ResamplerError::Shape(format!(
                "{} token rows are not a multiple of {per_image} per image",
                tokens.rows()
            )));
        }
        Ok(Self { tokens, per_image })
    }

    pub fn random(k: usize, n: usize, d: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[b"history"]);
        Self {
            tokens: Matrix::gaussian(k * n, d, 1.0, &mut rng),
            per_image: n,
        }
    }

    /// Number of history images.
    pub fn k(&self) -> usize {
        self.tokens.rows() / self.per_image
    }

    pub fn slot(&self, row: usize) -> usize {
        row / self.per_image
    }
}

/// Intermediate values kept for the backward pass.
struct Forward {
    key_in: Matrix,
    qp: Matrix,
    k: Matrix,
    v: Matrix,
    attn: Matrix,
    ctx: Matrix,
    out: Matrix,
}

fn check(params: &ResamplerParams, history: &HistoryTokens) -> Result<(), ResamplerError> {
    if history.tokens.rows() == 0 {
        return Err(ResamplerError::EmptyHistory);
    }
    let d = params.d();
    if history.tokens.cols() != d {
        return Err(ResamplerError::Shape(format!("tokens have width {}, model {d}", history.tokens.cols())));
    }
    for (name, m) in params.named() {
        let want = match name {
            "queries" => params.m(),
            "positions" => m.rows(),
            _ => d,
        };
        if m.shape() != (want, d) {
            return Err(ResamplerError::Shape(format!("{name} is {:?}", m.shape())));
        }
        if !m.is_finite() {
            return Err(ResamplerError::NonFinite(name.into()));
        }
    }
    if let Some(p) = &params.positions {
        if history.k() > p.rows() {
            return Err(ResamplerError::Shape(format!(
                "{} history slots but {} position embeddings",
                history.k(),
                p.rows()
            )));
        }
    }
    if !history.tokens.is_finite() {
        return Err(ResamplerError::NonFinite("history tokens".into()));
    }
    Ok(())
}

fn forward(params: &ResamplerParams, history: &HistoryTokens) -> Result<Forward, ResamplerError> {
    check(params, history)?;
    let t = &history.tokens;
    let key_in = match &params.positions {
        Some(p) => {
            let p = centered(p, history.k());
            Matrix::from_fn(t.rows(), t.cols(), |r, c| t[(r, c)] + p[(history.slot(r), c)])
        }
        None => t.clone(),
    };
    let qp = params.queries.matmul(&params.w_q);
    let k = key_in.matmul(&params.w_k);
    let v = t.matmul(&params.w_v);
    let scale = 1.0 / (params.d() as f64).sqrt();
    let attn = qp.matmul(&k.transpose()).scale(scale).softmax_rows();
    let ctx = attn.matmul(&v);
    let out = ctx.matmul(&params.w_o);
    if !out.is_finite() {
        return Err(ResamplerError::NonFinite("resampler output".into()));
    }
    Ok(Forward {
        key_in,
        qp,
        k,
        v,
        attn,
        ctx,
        out,
    })
}

/// First `k` rows of `p`, minus their mean.
fn centered(p: &Matrix, k: usize) -> Matrix {
    let mean = Matrix::from_fn(1, p.cols(), |_, c| (0..k).map(|s| p[(s, c)]).sum::<f64>() / k as f64);
    Matrix::from_fn(k, p.cols(), |s, c| p[(s, c)] - mean[(0, c)])
}

/// `softmax(Q W_q (T' W_k)^T / sqrt(d)) (T W_v) W_o`, where `T'` is `T` plus
/// the centered slot position embeddings. Always `m x d`.
pub fn resample(params: &ResamplerParams, history: &HistoryTokens) -> Result<Matrix, ResamplerError> {
    Ok(forward(params, history)?.out)
}

/// The `m x (k*n)` attention matrix; every row is a probability vector.
pub fn attention_weights(params: &ResamplerParams, history: &HistoryTokens) -> Result<Matrix, ResamplerError> {
    Ok(forward(params, history)?.attn)
}

/// Gradients of a scalar loss, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub queries: Matrix,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub positions: Option<Matrix>,
}

impl Gradients {
    pub fn named(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = vec![
            ("queries", &self.queries),
            ("w_q", &self.w_q),
            ("w_k", &self.w_k),
            ("w_v", &self.w_v),
            ("w_o", &self.w_o),
        ];
        if let Some(p) = &self.positions {
            out.push(("positions", p));
        }
        out
    }
}

/// The default check loss: sum of squares of the resampler output.
pub fn sum_squares_loss(params: &ResamplerParams, history: &HistoryTokens) -> Result<f64, ResamplerError> {
    Ok(resample(params, history)?.sum_squares())
}

/// Analytic gradients of [`sum_squares_loss`].
pub fn sum_squares_gradients(params: &ResamplerParams, history: &HistoryTokens) -> Result<Gradients, ResamplerError> {
    let f = forward(params, history)?;
    let d_out = f.out.scale(2.0);
    let w_o = f.ctx.transpose().matmul(&d_out);
    let d_ctx = d_out.matmul(&params.w_o.transpose());
    let d_attn = d_ctx.matmul(&f.v.transpose());
    let d_v = f.attn.transpose().matmul(&d_ctx);

    // softmax backward, row by row
    let mut d_scores = Matrix::zeros(f.attn.rows(), f.attn.cols());
    for r in 0..f.attn.rows() {
        let dot: f64 = f.attn.row(r).iter().zip(d_attn.row(r)).map(|(a, g)| a * g).sum();
        for c in 0..f.attn.cols() {
            d_scores[(r, c)] = f.attn[(r, c)] * (d_attn[(r, c)] - dot);
        }
    }
    let scale = 1.0 / (params.d() as f64).sqrt();
    let d_qp = d_scores.matmul(&f.k).scale(scale);
    let d_k = d_scores.transpose().matmul(&f.qp).scale(scale);

    let w_q = params.queries.transpose().matmul(&d_qp);
    let queries = d_qp.matmul(&params.w_q.transpose());
    let w_k = f.key_in.transpose().matmul(&d_k);
    let w_v = history.tokens.transpose().matmul(&d_v);
    let positions = params.positions.as_ref().map(|p| {
        let d_key_in = d_k.matmul(&params.w_k.transpose());
        let k = history.k();
        let mut per_slot = Matrix::zeros(k, p.cols());
        for r in 0..d_key_in.rows() {
            let slot = history.slot(r);
            for c in 0..p.cols() {
                per_slot[(slot, c)] += d_key_in[(r, c)];
            }
        }
        // back through the centering; unused slots get zero
        let c = centered(&per_slot, k);
        Matrix::from_fn(p.rows(), p.cols(), |s, j| if s < k { c[(s, j)] } else { 0.0 })
    });
    Ok(Gradients {
        queries,
        w_q,
        w_k,
        w_v,
        w_o,
        positions,
    })
}

/// Largest relative error between analytic and central-difference
/// gradients, per parameter and overall.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub per_param: Vec<(&'static str, f64)>,
    pub max_rel_error: f64,
}

/// Relative errors are `|a - f| / max(|a|, |f|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-8;

/// Compares [`sum_squares_gradients`] with central finite differences of
/// step `eps` for every entry of every parameter.
pub fn grad_check(params: &ResamplerParams, history: &HistoryTokens, eps: f64) -> Result<GradCheck, ResamplerError> {
    let analytic = sum_squares_gradients(params, history)?;
    let mut probe = params.clone();
    let mut per_param = Vec::new();
    let mut max_rel_error: f64 = 0.0;
    let n_params = probe.named_mut().len();
    for i in 0..n_params {
        let (name, grad) = analytic.named()[i];
        let len = grad.as_slice().len();
        let mut worst: f64 = 0.0;
        for j in 0..len {
            let original = probe.named_mut()[i].1.as_slice()[j];
            probe.named_mut()[i].1.as_mut_slice()[j] = original + eps;
            let plus = sum_squares_loss(&probe, history)?;
            probe.named_mut()[i].1.as_mut_slice()[j] = original - eps;
            let minus = sum_squares_loss(&probe, history)?;
            probe.named_mut()[i].1.as_mut_slice()[j] = original;
            let fd = (plus - minus) / (2.0 * eps);
            if !fd.is_finite() {
                return Err(ResamplerError::NonFinite(name.into()));
            }
            let a = grad.as_slice()[j];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
        per_param.push((name, worst));
        max_rel_error = max_rel_error.max(worst);
    }
    Ok(GradCheck {
        per_param,
        max_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn output_is_m_by_d_for_any_history() {
        let p = ResamplerParams::init(256, 16, Some(8), 1);
        for k in 1..=8 {
            let h = HistoryTokens::random(k, 256, 16, k as u64);
            assert_eq!(resample(&p, &h).unwrap().shape(), (256, 16));
        }
    }

    #[test]
    fn empty_history_is_an_error() {
        let p = ResamplerParams::init(4, 8, None, 1);
        let h = HistoryTokens::new(Matrix::zeros(0, 8), 3).unwrap();
        assert_eq!(resample(&p, &h), Err(ResamplerError::EmptyHistory));
    }

    #[test]
    fn constant_logits_average_values() {
        let mut p = ResamplerParams::init(4, 8, Some(2), 2);
        p.w_q = Matrix::zeros(8, 8);
        let h = HistoryTokens::random(2, 3, 8, 5);
        let out = resample(&p, &h).unwrap();
        let expected = h.tokens.matmul(&p.w_v).mean_rows().matmul(&p.w_o);
        for r in 0..4 {
            for c in 0..8 {
                assert!((out[(r, c)] - expected[(0, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_key_gets_all_weight() {
        let p = ResamplerParams::init(3, 4, None, 2);
        let h = HistoryTokens::random(1, 1, 4, 1);
        let a = attention_weights(&p, &h).unwrap();
        assert!(a.as_slice().iter().all(|w| *w == 1.0));
    }

    #[test]
    fn attention_depends_on_input() {
        let mut p = ResamplerParams::init(4, 8, None, 3);
        p.queries = p.queries.scale(50.0);
        let h = HistoryTokens::random(2, 3, 8, 5);
        let scaled = HistoryTokens::new(h.tokens.scale(3.0), 3).unwrap();
        let a = attention_weights(&p, &h).unwrap();
        let b = attention_weights(&p, &scaled).unwrap();
        assert!(a.sub(&b).max_abs() > 1e-6);
    }

    #[test]
    fn positions_make_order_visible() {
        let h = HistoryTokens::random(2, 3, 8, 5);
        // swap the two slots
        let swapped = Matrix::from_fn(6, 8, |r, c| h.tokens[((r + 3) % 6, c)]);
        let swapped = HistoryTokens::new(swapped, 3).unwrap();
        let mut plain = ResamplerParams::init(4, 8, None, 4);
        plain.queries = plain.queries.scale(50.0);
        let a = resample(&plain, &h).unwrap();
        let b = resample(&plain, &swapped).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-12);

        let mut with_pos = plain.clone();
        with_pos.positions = Some(Matrix::from_fn(2, 8, |r, c| if r == 0 { 1.0 } else { -(c as f64) }));
        let a = resample(&with_pos, &h).unwrap();
        let b = resample(&with_pos, &swapped).unwrap();
        assert!(a.sub(&b).max_abs() > 1e-6);
    }

    #[test]
    fn grad_check_small_config() {
        let p = ResamplerParams::init(4, 8, Some(2), 7);
        let h = HistoryTokens::random(2, 3, 8, 8);
        let r = grad_check(&p, &h, 1e-4).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn verdict_stable_between_eps_values() {
        for s in 0..20u64 {
            let (d, m, k, n) = (2 + (s as usize * 3) % 10, 1 + s as usize % 6, 1 + s as usize % 4, 1 + (s as usize * 7) % 5);
            let p = ResamplerParams::init(m, d, Some(k), s);
            let h = HistoryTokens::random(k, n, d, s + 100);
            let coarse = grad_check(&p, &h, 1e-4).unwrap().max_rel_error;
            let fine = grad_check(&p, &h, 1e-5).unwrap().max_rel_error;
            assert_eq!(coarse < 1e-4, fine < 1e-4, "config {s}: {coarse:e} vs {fine:e}");
        }
    }

    #[test]
    fn zero_history_has_zero_kv_gradients() {
        let p = ResamplerParams::init(4, 8, Some(2), 7);
        let h = HistoryTokens::new(Matrix::zeros(6, 8), 3).unwrap();
        let g = sum_squares_gradients(&p, &h).unwrap();
        assert_eq!(g.w_k.max_abs(), 0.0);
        assert_eq!(g.w_v.max_abs(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn attention_rows_are_distributions(k in 1usize..5, n in 1usize..5, d in 1usize..9, seed in any::<u64>(), amp in 0.1f64..30.0) {
            let mut p = ResamplerParams::init(3, d, Some(4), seed);
            p.queries = p.queries.scale(amp);
            let h = HistoryTokens::random(k, n, d, seed ^ 1);
            let a = attention_weights(&p, &h).unwrap();
            for r in 0..a.rows() {
                let row = a.row(r);
                prop_assert!(row.iter().all(|w| *w >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }
}
