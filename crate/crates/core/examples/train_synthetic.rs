use seizureformer::data::{prepare, PipelineConfig};
use seizureformer::model::{ModelConfig, SeizureFormer};
use seizureformer::synth::{generate_patient, SynthConfig};
use seizureformer::train::{evaluate, train_loop, TrainConfig};
use std::time::Instant;

fn main() -> seizureformer::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let horizon = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let series = generate_patient(&SynthConfig { seed, ..Default::default() })?;
    let prepared = prepare(&series, &PipelineConfig::default(), horizon)?;
    let counts = prepared.splits.class_counts();
    println!("split class counts (pos, neg): train {:?} val {:?} test {:?}", counts[0], counts[1], counts[2]);

    let mut model = SeizureFormer::new(ModelConfig::default(), seed)?;
    let started = Instant::now();
    let history = train_loop(&mut model, &prepared.splits, &TrainConfig { seed, ..Default::default() })?;
    for (e, (loss, auc)) in history.train_loss.iter().zip(&history.val_roc_auc).enumerate() {
        println!("epoch {e:2}  loss {loss:.4}  val ROC AUC {auc:.4}");
    }
    let test = evaluate(&model, &prepared.splits.test)?;
    println!(
        "best epoch {} ({}), test ROC AUC {:.4}, PR AUC {:.4}, {:.1}s",
        history.best_epoch,
        history.stop_reason.as_str(),
        test.roc_auc,
        test.pr_auc,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
