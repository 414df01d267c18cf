//! Model checkpoint files.
//!
//! Header line carries the config; each following line is one tensor:
//!
//! ```text
//! aln-checkpoint format_version=1 variant=aln d_acoustic=4 d_linguistic=6 d_attn=4 gru_hidden=5 num_classes=3 init_seed=11 tensors=23
//! name=transfer_w rows=4 cols=6 values=<24 floats>
//! ...
//! ```
//!
//! Checkpoints are for inference and evaluation: Adam moments are not stored,
//! and a loaded model starts with zero gradients and fresh optimizer state.
//! Floats use the same 17-significant-digit encoding as dataset files, so
//! save -> load -> save is byte-identical.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{init_model, ModelConfig, ModelParams, Variant};
use crate::numerics::Matrix;
use crate::textio::{format_f64_list, parse_f64_list, write_atomic, Fields};

const MAGIC: &str = "aln-checkpoint";
const FORMAT_VERSION: usize = 1;

/// Write a checkpoint atomically.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let cfg = &params.config;
    let tensors = params.tensors();
    let mut out = String::new();
    out.push_str(&format!(
        "{MAGIC} format_version={FORMAT_VERSION} variant={} d_acoustic={} d_linguistic={} d_attn={} gru_hidden={} num_classes={} init_seed={} tensors={}\n",
        cfg.variant,
        cfg.d_acoustic,
        cfg.d_linguistic,
        cfg.d_attn,
        cfg.gru_hidden,
        cfg.num_classes,
        cfg.init_seed,
        tensors.len()
    ));
    for tensor in tensors {
        if let Some((row, col)) = tensor.value.find_non_finite() {
            return Err(Error::NumericFault {
                param: tensor.name.clone(),
                detail: format!("non-finite value at ({row}, {col}) while saving"),
            });
        }
        out.push_str(&format!(
            "name={} rows={} cols={} values={}\n",
            tensor.name,
            tensor.value.rows(),
            tensor.value.cols(),
            format_f64_list(tensor.value.data()),
        ));
    }
    write_atomic(path, &out)
}

/// Load a checkpoint, validating variant-dependent tensor presence and every
/// shape against the header config.
pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        detail: "empty file".to_string(),
    })?;
    let rest = header.strip_prefix(MAGIC).ok_or_else(|| Error::Parse {
        line: 1,
        detail: format!("expected {MAGIC} header"),
    })?;
    let fields = Fields::parse(rest, 1)?;
    let version = fields.get_usize("format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: 1,
            detail: format!("unsupported format_version {version}"),
        });
    }
    let variant: Variant = fields.get("variant")?.parse()?;
    let cfg = ModelConfig {
        variant,
        d_acoustic: fields.get_usize("d_acoustic")?,
        d_linguistic: fields.get_usize("d_linguistic")?,
        d_attn: fields.get_usize("d_attn")?,
        gru_hidden: fields.get_usize("gru_hidden")?,
        num_classes: fields.get_usize("num_classes")?,
        init_seed: fields.get_u64("init_seed")?,
    };
    let declared = fields.get_usize("tensors")?;

    // Skeleton with the right tensor set for the variant; values overwritten.
    let mut params = init_model(&cfg)?;
    let expected: Vec<(String, (usize, usize))> = params
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.value.shape()))
        .collect();
    if declared != expected.len() {
        return Err(Error::Parse {
            line: 1,
            detail: format!(
                "variant {} expects {} tensors, header declares {declared}",
                cfg.variant,
                expected.len()
            ),
        });
    }

    let mut loaded = 0usize;
    for (idx, record) in lines {
        let line = idx + 1;
        if record.trim().is_empty() {
            continue;
        }
        if loaded == expected.len() {
            return Err(Error::Parse {
                line,
                detail: "more tensor records than declared".to_string(),
            });
        }
        let fields = Fields::parse(record, line)?;
        let name = fields.get("name")?;
        let rows = fields.get_usize("rows")?;
        let cols = fields.get_usize("cols")?;
        let (expected_name, expected_shape) = &expected[loaded];
        if name != expected_name {
            return Err(Error::Parse {
                line,
                detail: format!("expected tensor {expected_name:?}, found {name:?}"),
            });
        }
        if (rows, cols) != *expected_shape {
            return Err(Error::Parse {
                line,
                detail: format!(
                    "tensor {name} has shape {rows}x{cols}, config requires {}x{}",
                    expected_shape.0, expected_shape.1
                ),
            });
        }
        let values = parse_f64_list(fields.get("values")?, line)?;
        if values.len() != rows * cols {
            return Err(Error::Parse {
                line,
                detail: format!(
                    "tensor {name} has {} values, expected {}",
                    values.len(),
                    rows * cols
                ),
            });
        }
        params.tensors_mut()[loaded].value = Matrix::from_vec(rows, cols, values)?;
        loaded += 1;
    }
    if loaded != expected.len() {
        return Err(Error::Parse {
            line: text.lines().count() + 1,
            detail: format!(
                "unexpected end of file: {loaded} of {} tensors present",
                expected.len()
            ),
        });
    }
    Ok(params)
}
