//! Score a noisy agent and aggregate records into grouped reports.

use odyssey::harness::{evaluate_offline, HarnessConfig, PerturbedAgent};
use odyssey::metrics::{ams, build_report, render_report, success_rate, GroupKey, OverallWeighting, ReportFormat};
use odyssey::synth::{generate_corpus, GenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(&GenSpec::new(400, 3))?;
    let agent = PerturbedAgent::new(&corpus, 0.2, 11)?;
    let run = evaluate_offline(&corpus, &agent, &HarnessConfig::default())?;

    // one miss fails the whole episode, so SR sits far below AMS
    println!("AMS {:.4}  SR {:.4}", ams(&run.records)?, success_rate(&run.records)?);

    let by_category = build_report(&run.records, &[GroupKey::Category], OverallWeighting::Pooled)?;
    print!("{}", String::from_utf8(render_report(&by_category, ReportFormat::Markdown))?);

    let by_device = build_report(&run.records, &[GroupKey::Device], OverallWeighting::MeanOfGroups)?;
    println!(
        "\nper-device mean: AMS {:.4}, SR {:.4}",
        by_device.overall_ams(),
        by_device.overall_sr()
    );
    print!("{}", String::from_utf8(render_report(&by_device, ReportFormat::Csv))?);
    Ok(())
}
