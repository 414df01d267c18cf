//! Line-delimited dataset files.
//!
//! Line 1 is a header record; every following line is one utterance:
//!
//! ```text
//! aln-dataset format_version=1 d_acoustic=4 d_linguistic=6 num_classes=3 split=train count=2
//! id=train-000000 label=0 frames=2 acoustic=<8 floats> teacher=<6 floats>
//! id=train-000001 label=1 frames=3 acoustic=<12 floats> teacher=<6 floats>
//! ```
//!
//! Floats use 17 significant digits and acoustic values are row-major, so
//! save -> load -> save is byte-identical. Files are UTF-8, one record per
//! line, written atomically (temp file + rename).

use std::fs;
use std::path::Path;

use crate::dataio::{Dataset, Split, Utterance};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::textio::{format_f64_list, parse_f64_list, write_atomic, Fields};

const MAGIC: &str = "aln-dataset";
const FORMAT_VERSION: usize = 1;

fn render(ds: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{MAGIC} format_version={FORMAT_VERSION} d_acoustic={} d_linguistic={} num_classes={} split={} count={}\n",
        ds.d_acoustic,
        ds.d_linguistic,
        ds.num_classes,
        ds.split,
        ds.utterances.len()
    ));
    for utt in &ds.utterances {
        out.push_str(&format!(
            "id={} label={} frames={} acoustic={} teacher={}\n",
            utt.id,
            utt.label,
            utt.frames(),
            format_f64_list(utt.acoustic.data()),
            format_f64_list(utt.teacher.data()),
        ));
    }
    out
}

/// Validate and write a dataset. Nothing is written if validation fails.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    for utt in &ds.utterances {
        if utt.id.chars().any(char::is_whitespace) || utt.id.is_empty() {
            return Err(Error::UtteranceValidation {
                id: utt.id.clone(),
                detail: "utterance ids must be non-empty and whitespace-free".to_string(),
            });
        }
    }
    write_atomic(path, &render(ds))
}

fn parse_header(text: &str) -> Result<(Dataset, usize)> {
    let rest = text.strip_prefix(MAGIC).ok_or_else(|| Error::Parse {
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
    let split: Split = fields.get("split")?.parse()?;
    let ds = Dataset {
        d_acoustic: fields.get_usize("d_acoustic")?,
        d_linguistic: fields.get_usize("d_linguistic")?,
        num_classes: fields.get_usize("num_classes")?,
        split,
        utterances: Vec::new(),
    };
    let count = fields.get_usize("count")?;
    Ok((ds, count))
}

fn parse_utterance(text: &str, line: usize, ds: &Dataset) -> Result<Utterance> {
    let fields = Fields::parse(text, line)?;
    let id = fields.get("id")?.to_string();
    let label = fields.get_usize("label")?;
    let frames = fields.get_usize("frames")?;
    let acoustic_values = parse_f64_list(fields.get("acoustic")?, line)?;
    let teacher_values = parse_f64_list(fields.get("teacher")?, line)?;

    if frames == 0 {
        return Err(Error::UtteranceValidation {
            id,
            detail: "frames must be >= 1".to_string(),
        });
    }
    if acoustic_values.len() != frames * ds.d_acoustic {
        return Err(Error::Parse {
            line,
            detail: format!(
                "acoustic list has {} values, expected {} ({} frames x {})",
                acoustic_values.len(),
                frames * ds.d_acoustic,
                frames,
                ds.d_acoustic
            ),
        });
    }
    if teacher_values.len() != ds.d_linguistic {
        return Err(Error::UtteranceValidation {
            id,
            detail: format!(
                "teacher length {} does not match header d_linguistic {}",
                teacher_values.len(),
                ds.d_linguistic
            ),
        });
    }
    if label >= ds.num_classes {
        return Err(Error::UtteranceValidation {
            id,
            detail: format!("label {label} out of range for {} classes", ds.num_classes),
        });
    }
    Ok(Utterance {
        id,
        acoustic: Matrix::from_vec(frames, ds.d_acoustic, acoustic_values)?,
        teacher: Matrix::from_vec(1, ds.d_linguistic, teacher_values)?,
        label,
    })
}

/// Load and fully validate a dataset file.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header_text) = lines.next().ok_or(Error::Parse {
        line: 1,
        detail: "empty file".to_string(),
    })?;
    let (mut ds, count) = parse_header(header_text)?;

    for (idx, record_text) in lines {
        let line = idx + 1;
        if record_text.trim().is_empty() {
            continue;
        }
        if ds.utterances.len() == count {
            return Err(Error::Parse {
                line,
                detail: format!("more than the declared {count} utterance records"),
            });
        }
        ds.utterances.push(parse_utterance(record_text, line, &ds)?);
    }
    if ds.utterances.len() != count {
        return Err(Error::Parse {
            line: text.lines().count() + 1,
            detail: format!(
                "unexpected end of file: header declares {count} utterances, found {}",
                ds.utterances.len()
            ),
        });
    }
    ds.validate()?;
    Ok(ds)
}
