//! Writes the per-day plot CSV and SVG chart for one synthetic patient.
//! Usage: `export_plot [OUT_DIR]` (default: the system temp directory).

use seizureformer::cli::{plot_csv, plot_svg};
use seizureformer::data::{label_days, zscore_normalize, LabelConfig};
use seizureformer::synth::{generate_patient, SynthConfig};
use std::path::PathBuf;

fn main() -> seizureformer::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let series = generate_patient(&SynthConfig { seed: 7, ..Default::default() })?;
    let labels = label_days(&series, LabelConfig::default())?;
    let normalized = zscore_normalize(&series);

    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join("synth-7-plot.csv");
    let svg_path = dir.join("synth-7-plot.svg");
    std::fs::write(&csv_path, plot_csv(&normalized, &labels)?)?;
    std::fs::write(&svg_path, plot_svg(&normalized, &labels)?)?;
    println!("{} days, {} high-risk markers", series.len(), labels.high_risk_days());
    println!("wrote {}\nwrote {}", csv_path.display(), svg_path.display());
    Ok(())
}
