use crate::error::{Error, Result};
use crate::tensor::patch_count;

/// Architecture hyperparameters. [`Default`] is a desk-scale preset;
/// [`ModelConfig::paper`] is the published width and depth.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub lookback: usize,
    pub channels: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub kernel_sizes: Vec<usize>,
    /// Output features of each patch convolution.
    pub kernel_features: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    /// `(channel extent, patch extent)` of the cross-variable kernel.
    pub cvt_kernel: (usize, usize),
    pub se_reduction: usize,
    pub use_cnn_embed: bool,
    pub use_cvt: bool,
    pub use_se: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lookback: 30,
            channels: 2,
            patch_len: 10,
            stride: 5,
            kernel_sizes: vec![3, 5, 7],
            kernel_features: 16,
            embed_dim: 16,
            heads: 2,
            encoder_layers: 1,
            ffn_dim: 32,
            dropout: 0.1,
            cvt_kernel: (3, 3),
            se_reduction: 2,
            use_cnn_embed: true,
            use_cvt: true,
            use_se: true,
        }
    }
}

impl ModelConfig {
    pub fn paper() -> Self {
        Self { embed_dim: 128, encoder_layers: 3, ffn_dim: 1024, ..Self::default() }
    }

    pub fn patches(&self) -> usize {
        patch_count(self.lookback, self.patch_len, self.stride).unwrap_or(0)
    }

    /// Concatenated embedding width `K * kernel_features`.
    pub fn embed_features(&self) -> usize {
        self.kernel_sizes.len() * self.kernel_features
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn variant(&self) -> Variant {
        match (self.use_cnn_embed, self.use_cvt, self.use_se) {
            (true, true, true) => Variant::Full,
            (false, true, true) => Variant::NoCnnEmbed,
            (true, false, true) => Variant::NoCvt,
            (true, true, false) => Variant::NoSe,
            (false, false, false) => Variant::NoAll,
            _ => Variant::Custom,
        }
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        if let Some((cnn, cvt, se)) = v.flags() {
            self.use_cnn_embed = cnn;
            self.use_cvt = cvt;
            self.use_se = se;
        }
        self
    }

    /// Field names and values in declaration order, as written to config
    /// files, manifests and checkpoints.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let kernels: Vec<String> = self.kernel_sizes.iter().map(ToString::to_string).collect();
        vec![
            ("lookback", self.lookback.to_string()),
            ("channels", self.channels.to_string()),
            ("patch_len", self.patch_len.to_string()),
            ("stride", self.stride.to_string()),
            ("kernel_sizes", kernels.join(",")),
            ("kernel_features", self.kernel_features.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("heads", self.heads.to_string()),
            ("encoder_layers", self.encoder_layers.to_string()),
            ("ffn_dim", self.ffn_dim.to_string()),
            ("dropout", self.dropout.to_string()),
            ("cvt_kernel", format!("{}x{}", self.cvt_kernel.0, self.cvt_kernel.1)),
            ("se_reduction", self.se_reduction.to_string()),
            ("use_cnn_embed", self.use_cnn_embed.to_string()),
            ("use_cvt", self.use_cvt.to_string()),
            ("use_se", self.use_se.to_string()),
        ]
    }

    /// Sets one field from its textual form. Returns `Ok(false)` for keys
    /// that are not model fields.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "lookback" => self.lookback = parse_value(key, value)?,
            "channels" => self.channels = parse_value(key, value)?,
            "patch_len" => self.patch_len = parse_value(key, value)?,
            "stride" => self.stride = parse_value(key, value)?,
            "kernel_sizes" => {
                self.kernel_sizes = value
                    .split(',')
                    .map(|v| parse_value(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "kernel_features" => self.kernel_features = parse_value(key, value)?,
            "embed_dim" => self.embed_dim = parse_value(key, value)?,
            "heads" => self.heads = parse_value(key, value)?,
            "encoder_layers" => self.encoder_layers = parse_value(key, value)?,
            "ffn_dim" => self.ffn_dim = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "cvt_kernel" => {
                let (a, b) = value
                    .split_once('x')
                    .ok_or_else(|| Error::Config(format!("cvt_kernel must look like 3x3, got `{value}`")))?;
                self.cvt_kernel = (parse_value(key, a)?, parse_value(key, b)?);
            }
            "se_reduction" => self.se_reduction = parse_value(key, value)?,
            "use_cnn_embed" => self.use_cnn_embed = parse_value(key, value)?,
            "use_cvt" => self.use_cvt = parse_value(key, value)?,
            "use_se" => self.use_se = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lookback == 0 || self.channels == 0 {
            return bad("lookback and channels must be positive".into());
        }
        if self.patch_len == 0 || self.patch_len > self.lookback {
            return bad(format!("patch_len {} must lie in 1..={}", self.patch_len, self.lookback));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if self.kernel_sizes.is_empty() || self.kernel_features == 0 {
            return bad("need at least one embedding kernel with at least one feature".into());
        }
        if let Some(k) = self.kernel_sizes.iter().find(|&&k| k == 0 || k > self.patch_len) {
            return bad(format!("kernel size {k} must lie in 1..={}", self.patch_len));
        }
        if self.embed_dim == 0 || self.heads == 0 || self.embed_dim % self.heads != 0 {
            return bad(format!("embed_dim {} must be a positive multiple of heads {}", self.embed_dim, self.heads));
        }
        if self.encoder_layers == 0 || self.ffn_dim == 0 {
            return bad("encoder_layers and ffn_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        let (kd, kp) = self.cvt_kernel;
        if kd % 2 == 0 || kp % 2 == 0 {
            return bad(format!("cvt kernel extents must be odd, got {kd}x{kp}"));
        }
        if self.se_reduction == 0 {
            return bad("se_reduction must be at least 1".into());
        }
        Ok(())
    }
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

/// Named ablation settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    NoCnnEmbed,
    NoSe,
    NoCvt,
    NoAll,
    /// Any other combination of flags.
    Custom,
}

impl Variant {
    pub const ABLATIONS: [Variant; 5] =
        [Variant::Full, Variant::NoCnnEmbed, Variant::NoSe, Variant::NoCvt, Variant::NoAll];

    /// `(use_cnn_embed, use_cvt, use_se)`.
    fn flags(self) -> Option<(bool, bool, bool)> {
        match self {
            Variant::Full => Some((true, true, true)),
            Variant::NoCnnEmbed => Some((false, true, true)),
            Variant::NoSe => Some((true, true, false)),
            Variant::NoCvt => Some((true, false, true)),
            Variant::NoAll => Some((false, false, false)),
            Variant::Custom => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Full Model",
            Variant::NoCnnEmbed => "w/o CNN Patch Embedding",
            Variant::NoSe => "w/o SE Block",
            Variant::NoCvt => "w/o Cross-Variable Temporal convolution",
            Variant::NoAll => "w/o All Modules",
            Variant::Custom => "Custom",
        }
    }

    /// Short key used on the command line and in result tables.
    pub fn key(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoCnnEmbed => "no_cnn",
            Variant::NoSe => "no_se",
            Variant::NoCvt => "no_cvt",
            Variant::NoAll => "no_all",
            Variant::Custom => "custom",
        }
    }

    /// Parses an `--ablate` value: `none`, `cnn`, `se`, `cvt` or `all`.
    pub fn from_ablation(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Variant::Full),
            "cnn" => Ok(Variant::NoCnnEmbed),
            "se" => Ok(Variant::NoSe),
            "cvt" => Ok(Variant::NoCvt),
            "all" => Ok(Variant::NoAll),
            _ => Err(Error::Config(format!("unknown ablation `{s}` (expected none|cnn|se|cvt|all)"))),
        }
    }
}
