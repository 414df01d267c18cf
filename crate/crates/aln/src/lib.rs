//! # aln
//!
//! An acoustic-linguistic intent classifier built from scratch: a linear
//! student layer distilled against pooled teacher embeddings, single-head
//! cross attention fusing the acoustic and derived linguistic streams, and a
//! GRU/max-pool/linear intent head, all trained jointly on the weighted
//! objective `alpha * loss_tl + (1 - alpha) * loss_intent`.
//!
//! Everything runs in 64-bit floats with hand-written backward passes and is
//! deterministic end to end: datasets, initialization, shuffling, and
//! training reproduce bit-identically from their seeds.

pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod rng;
pub(crate) mod textio;
pub mod training;

pub use dataio::{generate, load_dataset, save_dataset, Dataset, GeneratorConfig, Split, Utterance};
pub use error::{Error, Result};
pub use evaluation::{
    ablation_summary, evaluate, export_embeddings, run_ablation, write_ablation_report,
    AblationReport, AblationRow,
};
pub use model::{
    compute_loss_tl, cross_attention, forward, init_model, intent_head, load_checkpoint, predict,
    save_checkpoint, transfer_forward, ForwardOutput, LossBreakdown, ModelConfig, ModelParams,
    Variant,
};
pub use numerics::{
    adam_step, gradcheck, AdamConfig, GradCheckOptions, GradCheckReport, Matrix, ParamTensor,
};
pub use training::{
    cosine_diagnostic, format_metrics_record, parse_metrics_record, train, train_with_observer,
    EpochMetrics, TrainConfig,
};
