//! Travel-time and mean-speed histograms for the baseline and, if a weight
//! file is given, for a policy on the same seeds.
//!
//! cargo run --release --example travel_time_histogram -- [policy.bin]

use roundabout::harness::{
    compute_metrics, histogram, run_baseline, run_policy, EpisodeRecord, ExperimentConfig, HistogramMetric,
    HistogramSpec,
};

fn show(name: &str, records: &[EpisodeRecord]) -> roundabout::Result<()> {
    for (metric, hi, unit) in [(HistogramMetric::TravelTime, 60.0, "s"), (HistogramMetric::MeanSpeed, 8.0, "m/s")] {
        let h = histogram(records, &HistogramSpec::uniform(metric, 0.0, hi, 12)?)?;
        println!("{name} {metric:?}");
        for (i, f) in h.frequencies.iter().enumerate() {
            println!("  [{:5.1}, {:5.1}) {unit:>3} {:5.3} {}", h.edges[i], h.edges[i + 1], f, "#".repeat((f * 60.0) as usize));
        }
    }
    Ok(())
}

fn main() -> roundabout::Result<()> {
    let cfg = ExperimentConfig::default();
    let baseline = run_baseline(&cfg, 100)?;
    show("baseline", &baseline)?;
    if let Some(path) = std::env::args().nth(1) {
        let policy = run_policy(&cfg, &path, 100)?;
        show("policy", &policy)?;
        let m = compute_metrics(&policy, &baseline)?;
        println!("{:+.2}% time saved", m.percent_time_saved);
    }
    Ok(())
}
