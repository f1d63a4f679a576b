//! The history resampler: token budgets, attention shapes and a gradient
//! check against central finite differences.

use odyssey::resampler::{
    attention_weights, grad_check, resample, token_budget, HistoryStrategy, HistoryTokens, ResamplerParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let per_image = 256;
    for delta in [0, 1, 4, 8] {
        println!(
            "delta {delta}: resampler {:>4} tokens, concat {:>4} tokens",
            token_budget(delta, per_image, HistoryStrategy::Resampler { queries: 256 }),
            token_budget(delta, per_image, HistoryStrategy::Concat)
        );
    }

    // small shapes so the finite-difference check stays quick
    let (d, m, n) = (8, 4, 3);
    let params = ResamplerParams::init(m, d, Some(4), 1);
    for k in 1..=4 {
        let history = HistoryTokens::random(k, n, d, 100 + k as u64);
        let out = resample(&params, &history)?;
        let w = attention_weights(&params, &history)?;
        let check = grad_check(&params, &history, 1e-4)?;
        println!(
            "k={k}: output {}x{}, weights {}x{}, max rel grad error {:.2e}",
            out.rows(),
            out.cols(),
            w.rows(),
            w.cols(),
            check.max_rel_error
        );
        for (name, err) in &check.per_param {
            println!("    {name:<9} {err:.2e}");
        }
    }
    Ok(())
}
