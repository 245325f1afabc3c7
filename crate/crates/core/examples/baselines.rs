//! Fits the logistic, Poisson and DLinear baselines on one patient and
//! compares them with the full network at each horizon.

use seizureformer::baselines::{logistic_fit, poisson_fit, BaselineKind};
use seizureformer::data::{prepare, PipelineConfig};
use seizureformer::experiment::{fit_and_evaluate, ExperimentConfig, ModelSpec};
use seizureformer::model::Variant;
use seizureformer::synth::{generate_patient, SynthConfig};

fn main() -> seizureformer::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = ExperimentConfig::default();
    let series = generate_patient(&SynthConfig { seed, ..Default::default() })?;

    let prepared = prepare(&series, &PipelineConfig::default(), 1)?;
    let logistic = logistic_fit(&prepared.splits.train, cfg.l2)?;
    let poisson = poisson_fit(&prepared.splits.train, cfg.l2)?;
    for (name, fit) in [("logistic", &logistic), ("poisson", &poisson)] {
        println!(
            "{name:<9} {} weights, {} Newton steps, converged {}, |grad| {:.2e}",
            fit.weights.len(),
            fit.iterations,
            fit.converged,
            fit.grad_norm
        );
    }

    let models = [
        ModelSpec::Baseline(BaselineKind::Logistic),
        ModelSpec::Baseline(BaselineKind::Poisson),
        ModelSpec::Baseline(BaselineKind::DLinear),
        ModelSpec::Network(Variant::Full),
    ];
    println!("\n{:<9} h1 / h3 / h7 test ROC AUC, PR AUC", "model");
    for m in models {
        let mut cells = Vec::new();
        for h in [1, 3, 7] {
            let prepared = prepare(&series, &cfg.pipeline, h)?;
            let r = fit_and_evaluate(&prepared, m, &cfg, seed)?.test;
            cells.push(format!("{:.3},{:.3}", r.roc_auc, r.pr_auc));
        }
        println!("{:<9} {}", m.key(), cells.join("  "));
    }
    Ok(())
}
