//! Runs one untrained forward pass and prints the tensor shape after each
//! stage, the attention rows of the first head and the SE channel gates.

use seizureformer::data::{prepare, PipelineConfig};
use seizureformer::model::{encode_windows, ModelConfig, SeizureFormer};
use seizureformer::synth::{generate_patient, SynthConfig};

fn main() -> seizureformer::Result<()> {
    let cfg = ModelConfig::default();
    let model = SeizureFormer::new(cfg.clone(), 0)?;
    let series = generate_patient(&SynthConfig::default())?;
    let prepared = prepare(&series, &PipelineConfig::default(), 1)?;
    let batch: Vec<_> = prepared.splits.test.iter().take(4).collect();
    let x = encode_windows(&batch, cfg.channels, cfg.lookback)?;
    let trace = model.forward_trace(&x)?;

    println!("input {:?}, {} weights", x.shape(), model.num_weights());
    for (stage, shape) in &trace.shapes {
        println!("  {stage:<11} {shape:?}");
    }
    let attn = &trace.attention[0];
    let p = attn.shape()[1];
    println!("\nlayer 0 head 0 attention, first sample, channel 1:");
    for row in attn.data()[..p * p].chunks(p) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}  (sum {:.6})", cells.join(" "), row.iter().sum::<f64>());
    }
    if let Some(g) = &trace.se_gates {
        println!("\nSE gates per sample: {:.4?}", g.data());
    }
    if let Some(out) = &trace.output {
        println!("risk scores: {:.4?}", out.data());
    }
    Ok(())
}
