//! The three classifier variants as composable forward/backward graphs.
//!
//! * `baseline2` feeds acoustic frames straight into the intent head.
//! * `aln-linguistic` inserts the transfer layer (the distilled student) and
//!   classifies its frame outputs.
//! * `aln` additionally fuses the acoustic and derived linguistic streams
//!   with single-head cross attention (acoustic frames are the queries, the
//!   derived linguistic frames are keys and values) and classifies the fused
//!   sequence.

pub mod backward;
pub mod checkpoint;
pub mod forward;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{
    compute_loss_tl, cross_attention, forward, intent_head, predict, transfer_forward,
    ForwardOutput, LossBreakdown,
};

use crate::error::{Error, Result};
use crate::numerics::gru::GruParams;
use crate::numerics::{Matrix, ParamTensor};
use crate::rng::{name_tag, SplitMix64};

const TAG_INIT: u64 = 0x10;

/// Model variant selector. The ordering (baseline2 < aln-linguistic < aln)
/// is used when sorting ablation rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Baseline2,
    AlnLinguistic,
    Aln,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Baseline2 => "baseline2",
            Variant::AlnLinguistic => "aln-linguistic",
            Variant::Aln => "aln",
        }
    }

    pub fn all() -> [Variant; 3] {
        [Variant::Baseline2, Variant::AlnLinguistic, Variant::Aln]
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline2" => Ok(Variant::Baseline2),
            "aln-linguistic" => Ok(Variant::AlnLinguistic),
            "aln" => Ok(Variant::Aln),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?} (expected baseline2, aln-linguistic, or aln)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dimension profile and initialization seed for one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub d_acoustic: usize,
    pub d_linguistic: usize,
    /// Attention width (the shared query/key/value dimension).
    pub d_attn: usize,
    pub gru_hidden: usize,
    pub num_classes: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("d_acoustic", self.d_acoustic),
            ("d_linguistic", self.d_linguistic),
            ("d_attn", self.d_attn),
            ("gru_hidden", self.gru_hidden),
            ("num_classes", self.num_classes),
        ] {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Width of the sequence entering the intent head.
    pub fn gru_input_width(&self) -> usize {
        match self.variant {
            Variant::Baseline2 => self.d_acoustic,
            Variant::AlnLinguistic => self.d_linguistic,
            Variant::Aln => self.d_attn,
        }
    }

    fn uses_transfer(&self) -> bool {
        self.variant != Variant::Baseline2
    }

    fn uses_attention(&self) -> bool {
        self.variant == Variant::Aln
    }

    /// A mapping layer exists for any attention input stream whose width
    /// differs from `d_attn` (a no-op configuration omits it).
    fn uses_linguistic_mapping(&self) -> bool {
        self.uses_attention() && self.d_linguistic != self.d_attn
    }

    fn uses_acoustic_mapping(&self) -> bool {
        self.uses_attention() && self.d_acoustic != self.d_attn
    }
}

/// An affine layer's weight and bias.
#[derive(Debug, Clone)]
pub struct LinearLayer {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl LinearLayer {
    fn new(name: &str, input: usize, output: usize, seed: u64) -> Self {
        LinearLayer {
            weight: glorot_tensor(&format!("{name}_w"), input, output, seed),
            bias: ParamTensor::from_value(&format!("{name}_b"), Matrix::zeros(1, output)),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        crate::numerics::ops::linear_forward(x, &self.weight, &self.bias)
    }
}

/// Glorot-uniform weight draw: entries uniform in +-sqrt(6 / (fan_in +
/// fan_out)), streamed per tensor name so adding layers never shifts other
/// layers' values.
fn glorot_tensor(name: &str, rows: usize, cols: usize, seed: u64) -> ParamTensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = SplitMix64::from_tags(seed, &[TAG_INIT, name_tag(name)]);
    let mut value = Matrix::zeros(rows, cols);
    for slot in value.data_mut() {
        *slot = (2.0 * rng.next_f64() - 1.0) * bound;
    }
    ParamTensor::from_value(name, value)
}

fn init_gru(input: usize, hidden: usize, seed: u64) -> GruParams {
    let linear = |name: &str, r: usize, c: usize| glorot_tensor(name, r, c, seed);
    let bias = |name: &str| ParamTensor::from_value(name, Matrix::zeros(1, hidden));
    GruParams {
        wz: linear("gru_wz", input, hidden),
        uz: linear("gru_uz", hidden, hidden),
        bz: bias("gru_bz"),
        wr: linear("gru_wr", input, hidden),
        ur: linear("gru_ur", hidden, hidden),
        br: bias("gru_br"),
        wh: linear("gru_wh", input, hidden),
        uh: linear("gru_uh", hidden, hidden),
        bh: bias("gru_bh"),
    }
}

/// All trainable parameters for one model variant. Presence of the optional
/// layers matches the variant (and the dimension profile, for the mappings).
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Student layer: d_acoustic -> d_linguistic (absent for baseline2).
    pub transfer: Option<LinearLayer>,
    /// d_acoustic -> d_attn query-side mapping (aln, only when widths differ).
    pub acoustic_mapping: Option<LinearLayer>,
    /// d_linguistic -> d_attn key/value-side mapping (aln, only when widths differ).
    pub mapping: Option<LinearLayer>,
    pub attn_query: Option<LinearLayer>,
    pub attn_key: Option<LinearLayer>,
    pub attn_value: Option<LinearLayer>,
    pub gru: GruParams,
    pub head: LinearLayer,
}

impl ModelParams {
    /// Tensors in canonical order (the checkpoint order).
    pub fn tensors(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        for layer in [
            &self.transfer,
            &self.acoustic_mapping,
            &self.mapping,
            &self.attn_query,
            &self.attn_key,
            &self.attn_value,
        ]
        .into_iter()
        .flatten()
        {
            out.push(&layer.weight);
            out.push(&layer.bias);
        }
        out.extend(self.gru.tensors());
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out: Vec<&mut ParamTensor> = Vec::new();
        for layer in [
            &mut self.transfer,
            &mut self.acoustic_mapping,
            &mut self.mapping,
            &mut self.attn_query,
            &mut self.attn_key,
            &mut self.attn_value,
        ] {
            if let Some(l) = layer.as_mut() {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
        }
        out.extend(self.gru.tensors_mut());
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn zero_gradients(&mut self) {
        for tensor in self.tensors_mut() {
            tensor.zero_gradient();
        }
    }

    /// Scale all accumulated gradients, e.g. by 1/batch before an update.
    pub fn scale_gradients(&mut self, factor: f64) {
        for tensor in self.tensors_mut() {
            tensor.gradient.scale_assign(factor);
        }
    }
}

/// Build a freshly initialized model: Glorot-uniform weights, zero biases,
/// zero GRU start state. Deterministic in `init_seed`.
pub fn init_model(cfg: &ModelConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let seed = cfg.init_seed;
    let transfer = cfg
        .uses_transfer()
        .then(|| LinearLayer::new("transfer", cfg.d_acoustic, cfg.d_linguistic, seed));
    let acoustic_mapping = cfg
        .uses_acoustic_mapping()
        .then(|| LinearLayer::new("acoustic_mapping", cfg.d_acoustic, cfg.d_attn, seed));
    let mapping = cfg
        .uses_linguistic_mapping()
        .then(|| LinearLayer::new("mapping", cfg.d_linguistic, cfg.d_attn, seed));
    let attention = cfg.uses_attention();
    let attn_query = attention.then(|| LinearLayer::new("attn_q", cfg.d_attn, cfg.d_attn, seed));
    let attn_key = attention.then(|| LinearLayer::new("attn_k", cfg.d_attn, cfg.d_attn, seed));
    let attn_value = attention.then(|| LinearLayer::new("attn_v", cfg.d_attn, cfg.d_attn, seed));
    Ok(ModelParams {
        transfer,
        acoustic_mapping,
        mapping,
        attn_query,
        attn_key,
        attn_value,
        gru: init_gru(cfg.gru_input_width(), cfg.gru_hidden, seed),
        head: LinearLayer::new("head", cfg.gru_hidden, cfg.num_classes, seed),
        config: cfg.clone(),
    })
}
