//! Trains a small model briefly, saves it, reloads it and checks that the
//! reloaded copy scores the test split identically.

use seizureformer::data::{prepare, PipelineConfig};
use seizureformer::model::{read_checkpoint, write_checkpoint, ModelConfig, SeizureFormer};
use seizureformer::synth::{generate_patient, SynthConfig};
use seizureformer::train::{train_loop, TrainConfig};

fn main() -> seizureformer::Result<()> {
    let series = generate_patient(&SynthConfig { seed: 2, ..Default::default() })?;
    let prepared = prepare(&series, &PipelineConfig::default(), 3)?;
    let mut model = SeizureFormer::new(ModelConfig::default(), 2)?;
    train_loop(&mut model, &prepared.splits, &TrainConfig { max_epochs: 5, ..Default::default() })?;

    let text = write_checkpoint(&model);
    println!("checkpoint: {} weights, {} bytes", model.num_weights(), text.len());
    for line in text.lines().take(4) {
        println!("  {}", &line[..line.len().min(72)]);
    }
    let restored = read_checkpoint(&text)?;
    let before = model.predict(&prepared.splits.test)?;
    let after = restored.predict(&prepared.splits.test)?;
    let identical = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("{} test predictions, bit-identical after reload: {identical}", before.len());
    Ok(())
}
