//! Annotate an episode with a deterministic mock LLM, rewrite its
//! instruction, and run the quality check.

use odyssey::pipeline::llm::RewriteMode;
use odyssey::pipeline::{apply_rewrite, quality_check, Annotator, InstructionInstance, Judge, MockBackend, PromptSet};
use odyssey::synth::{generate_corpus, GenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(&GenSpec::new(2, 4))?;
    let mut ep = corpus.episodes[0].clone();
    let llm = MockBackend::new().with_rewrite(RewriteMode::Prefix("Please ".into()));
    let annotator = Annotator::new(&llm);

    let instance = InstructionInstance {
        template_id: ep.task_info.template_id.clone(),
        instruction: ep.task_info.high_level_instruction.clone(),
        item: None,
        apps: ep.task_info.apps.clone(),
    };
    let rewrite = annotator.rewrite_instruction(&instance)?;
    println!("original:  {}", rewrite.original);
    println!("rewritten: {}", rewrite.rewritten);
    apply_rewrite(&mut ep, &rewrite);

    let annotated = annotator.annotate_episode(&ep);
    println!("{} steps annotated", annotated.report.annotated_steps);
    for step in annotated.episode.steps.iter().take(2) {
        println!("step {} {}", step.index, step.action);
        println!("  low level: {}", step.low_level_instruction.as_deref().unwrap_or("-"));
        if let Some(s) = &step.semantic {
            println!("  context:   {}", s.contextual_info);
            println!("  screen:    {}", s.screen_description);
            println!("  rationale: {}", s.decision_rationale);
        }
    }
    // every call carries a stable idempotency key
    println!("{} LLM calls, first {}", llm.calls().len(), llm.calls()[0]);

    let prompts = PromptSet::default();
    let judge = Judge {
        llm: &llm,
        prompts: &prompts,
        retries: 1,
    };
    // no corpus root: criterion i checks references without touching files
    println!("structural: {}", quality_check(&annotated.episode, None, None));
    println!("with judge: {}", quality_check(&annotated.episode, None, Some(&judge)));
    Ok(())
}
