//! Trains every ablation variant and baseline on a small synthetic cohort
//! and prints the results table.

use seizureformer::experiment::{BenchmarkTable, ExperimentConfig, ModelSpec};
use std::time::Instant;

fn main() -> seizureformer::Result<()> {
    let seeds = [0, 1, 2, 3, 4];
    let horizons = [1, 3, 7];
    let started = Instant::now();
    let table = BenchmarkTable::run(&ModelSpec::all(), &seeds, &horizons, &ExperimentConfig::default())?;
    println!("{:<8} {:>8} {:>8}   per horizon (ROC / PR)", "model", "ROC", "PR");
    for m in ModelSpec::all() {
        let (r, p) = table.mean(m, None).unwrap_or((f64::NAN, f64::NAN));
        let per: Vec<String> = horizons
            .iter()
            .map(|&h| match table.mean(m, Some(h)) {
                Some((r, p)) => format!("h{h} {r:.3}/{p:.3}"),
                None => format!("h{h} NA"),
            })
            .collect();
        println!("{:<8} {r:>8.4} {p:>8.4}   {}", m.key(), per.join("  "));
    }
    for c in table.failures() {
        println!("NA: {} seed {} horizon {}: {}", c.model.key(), c.seed, c.horizon, c.failure.as_deref().unwrap_or(""));
    }
    println!("{} cells in {:.1}s", table.cells.len(), started.elapsed().as_secs_f64());
    Ok(())
}
