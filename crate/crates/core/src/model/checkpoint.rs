//! Plain-text checkpoints. Layout:
//!
//! ```text
//! seizureformer-checkpoint 1
//! config <key> <value>        one line per model field
//! param <name> <d0,d1,...>    followed by one line of row-major values
//! ```
//!
//! Values are written in Rust's shortest round-trip form, so a save/load
//! cycle is bit-exact.

use super::{ModelConfig, SeizureFormer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "seizureformer-checkpoint 1";

pub fn write_checkpoint(model: &SeizureFormer) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    for (k, v) in model.config().to_pairs() {
        writeln!(out, "config {k} {v}").unwrap();
    }
    for (name, t) in model.names().iter().zip(model.params()) {
        let dims: Vec<String> = t.shape().iter().map(ToString::to_string).collect();
        writeln!(out, "param {name} {}", dims.join(",")).unwrap();
        let values: Vec<String> = t.data().iter().map(ToString::to_string).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
    out
}

pub fn read_checkpoint(text: &str) -> Result<SeizureFormer> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(parse_err(1, format!("expected `{MAGIC}` header"))),
    }
    let mut config = ModelConfig::default();
    let mut named = Vec::new();
    while let Some((n, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some("config"), Some(key), Some(value)) => {
                if !config.set(key, value)? {
                    return Err(parse_err(n, format!("unknown config key `{key}`")));
                }
            }
            (Some("param"), Some(name), Some(dims)) => {
                let shape = dims
                    .split(',')
                    .map(|d| d.parse::<usize>().map_err(|_| parse_err(n, format!("bad dimension `{d}`"))))
                    .collect::<Result<Vec<_>>>()?;
                let (vn, values) = lines.next().ok_or_else(|| parse_err(n + 1, format!("missing values for {name}")))?;
                let data = values
                    .split(' ')
                    .map(|v| v.parse::<f64>().map_err(|_| parse_err(vn, format!("bad value `{v}`"))))
                    .collect::<Result<Vec<_>>>()?;
                named.push((name.to_string(), Tensor::new(shape, data)?));
            }
            _ => return Err(parse_err(n, format!("unrecognized line `{line}`"))),
        }
    }
    SeizureFormer::from_named(config, named)
}

pub fn save_checkpoint(model: &SeizureFormer, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SeizureFormer> {
    read_checkpoint(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    #[test]
    fn round_trip_is_bit_exact() {
        for v in [Variant::Full, Variant::NoAll] {
            let cfg = ModelConfig { kernel_sizes: vec![1, 3], ..ModelConfig::default().with_variant(v) };
            let mut model = SeizureFormer::new(cfg, 9).unwrap();
            model.params_mut()[0].data_mut()[0] = 0.1 + 0.2;
            model.params_mut()[1].data_mut()[0] = -1e-300;
            let text = write_checkpoint(&model);
            let back = read_checkpoint(&text).unwrap();
            assert_eq!(back, model);
            assert_eq!(write_checkpoint(&back), text);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let model = SeizureFormer::new(ModelConfig::default(), 1).unwrap();
        let text = write_checkpoint(&model);
        assert!(read_checkpoint("nonsense").is_err());
        assert!(read_checkpoint(&text.replace("config heads 2", "config heads 4")).is_err());
        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(read_checkpoint(&truncated).is_err());
        assert!(read_checkpoint(&text.replace("config lookback", "config lookahead")).is_err());
    }
}
