//! Dataset schema, validation, the on-disk format, and the synthetic
//! paired-embedding generator.
//!
//! Each utterance pairs a frame sequence of acoustic embeddings with a pooled
//! teacher linguistic embedding and an intent label. Real corpora are out of
//! scope; the generator produces datasets with the same information
//! structure: class identity is carried by the teacher embedding and, through
//! a hidden projection plus per-class keyword frames, by the acoustic stream.

pub mod format;

pub use format::{load_dataset, save_dataset};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::NormalSource;

/// Stream tags for the generator; combined with the seed they key every
/// substream so draw order is independent of utterance insertion order.
const TAG_CENTROID: u64 = 0x01;
const TAG_PROJECTION: u64 = 0x02;
const TAG_KEYWORD: u64 = 0x03;
const TAG_UTTERANCE: u64 = 0x04;

/// Dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    fn stream_code(&self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split {other:?}"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labeled utterance: acoustic frame sequence plus pooled teacher
/// embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    /// T x d_acoustic frame matrix, T >= 1.
    pub acoustic: Matrix,
    /// 1 x d_linguistic pooled teacher embedding.
    pub teacher: Matrix,
    pub label: usize,
}

impl Utterance {
    pub fn frames(&self) -> usize {
        self.acoustic.rows()
    }
}

/// A full split with its dimension profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d_acoustic: usize,
    pub d_linguistic: usize,
    pub num_classes: usize,
    pub split: Split,
    pub utterances: Vec<Utterance>,
}

impl Dataset {
    /// Check every schema invariant: widths, label range, frame count,
    /// finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.d_acoustic == 0 || self.d_linguistic == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig(
                "dataset dimensions and class count must be >= 1".to_string(),
            ));
        }
        for utt in &self.utterances {
            if utt.acoustic.rows() == 0 {
                return Err(Error::UtteranceValidation {
                    id: utt.id.clone(),
                    detail: "acoustic sequence has no frames".to_string(),
                });
            }
            if utt.acoustic.cols() != self.d_acoustic {
                return Err(Error::UtteranceValidation {
                    id: utt.id.clone(),
                    detail: format!(
                        "acoustic width {} does not match d_acoustic {}",
                        utt.acoustic.cols(),
                        self.d_acoustic
                    ),
                });
            }
            if utt.teacher.rows() != 1 || utt.teacher.cols() != self.d_linguistic {
                return Err(Error::UtteranceValidation {
                    id: utt.id.clone(),
                    detail: format!(
                        "teacher length {} does not match d_linguistic {}",
                        utt.teacher.len(),
                        self.d_linguistic
                    ),
                });
            }
            if utt.label >= self.num_classes {
                return Err(Error::UtteranceValidation {
                    id: utt.id.clone(),
                    detail: format!(
                        "label {} out of range for {} classes",
                        utt.label, self.num_classes
                    ),
                });
            }
            if let Some((row, col)) = utt.acoustic.find_non_finite() {
                return Err(Error::UtteranceValidation {
                    id: utt.id.clone(),
                    detail: format!("non-finite acoustic value at ({row}, {col})"),
                });
            }
            if let Some((_, col)) = utt.teacher.find_non_finite() {
                return Err(Error::UtteranceValidation {
                    id: utt.id.clone(),
                    detail: format!("non-finite teacher value at {col}"),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// Synthetic-data generator configuration.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_classes: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub d_acoustic: usize,
    pub d_linguistic: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Teacher-embedding noise sigma.
    pub teacher_noise: f64,
    /// Per-frame acoustic noise sigma.
    pub acoustic_noise: f64,
    /// Probability that one frame is replaced by the class keyword vector.
    pub keyword_prob: f64,
    pub centroid_scale: f64,
}

impl Default for GeneratorConfig {
    /// Full-scale dimension profile (256-dimensional acoustic frames,
    /// 768-dimensional linguistic embeddings).
    fn default() -> Self {
        GeneratorConfig {
            seed: 42,
            num_classes: 8,
            train_count: 1000,
            test_count: 250,
            d_acoustic: 256,
            d_linguistic: 768,
            min_len: 5,
            max_len: 20,
            teacher_noise: 0.3,
            acoustic_noise: 0.5,
            keyword_prob: 0.6,
            centroid_scale: 1.0,
        }
    }
}

impl GeneratorConfig {
    /// Desk-scale profile used by the diagnostic and ablation runs.
    pub fn small_profile() -> Self {
        GeneratorConfig {
            d_acoustic: 32,
            d_linguistic: 96,
            ..GeneratorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, detail: String| {
            Err(Error::InvalidConfig(format!("{field}: {detail}")))
        };
        if self.num_classes == 0 {
            return fail("num_classes", "must be >= 1".to_string());
        }
        if self.train_count < self.num_classes {
            return fail(
                "train_count",
                format!("must be >= num_classes ({})", self.num_classes),
            );
        }
        if self.test_count < self.num_classes {
            return fail(
                "test_count",
                format!("must be >= num_classes ({})", self.num_classes),
            );
        }
        if self.d_acoustic == 0 {
            return fail("d_acoustic", "must be >= 1".to_string());
        }
        if self.d_linguistic == 0 {
            return fail("d_linguistic", "must be >= 1".to_string());
        }
        if self.min_len < 1 {
            return fail("min_len", "must be >= 1".to_string());
        }
        if self.max_len < self.min_len {
            return fail(
                "max_len",
                format!("must be >= min_len ({})", self.min_len),
            );
        }
        if self.teacher_noise.is_nan() || self.teacher_noise < 0.0 {
            return fail("teacher_noise", "must be >= 0".to_string());
        }
        if self.acoustic_noise.is_nan() || self.acoustic_noise < 0.0 {
            return fail("acoustic_noise", "must be >= 0".to_string());
        }
        if !(0.0..=1.0).contains(&self.keyword_prob) {
            return fail("keyword_prob", "must lie in [0, 1]".to_string());
        }
        if self.centroid_scale.is_nan() || self.centroid_scale <= 0.0 {
            return fail("centroid_scale", "must be > 0".to_string());
        }
        Ok(())
    }
}

fn normal_vector(src: &mut NormalSource, len: usize) -> Vec<f64> {
    (0..len).map(|_| src.next_normal()).collect()
}

/// Shared class structure: centroids in linguistic space, a hidden projection
/// into acoustic space, and one keyword vector per class.
struct ClassStructure {
    centroids: Vec<Vec<f64>>,
    projection: Matrix,
    keywords: Vec<Vec<f64>>,
}

impl ClassStructure {
    fn build(cfg: &GeneratorConfig) -> Self {
        let centroids = (0..cfg.num_classes)
            .map(|k| {
                let mut src = NormalSource::from_tags(cfg.seed, &[TAG_CENTROID, k as u64]);
                normal_vector(&mut src, cfg.d_linguistic)
                    .into_iter()
                    .map(|v| v * cfg.centroid_scale)
                    .collect()
            })
            .collect();
        let mut projection = Matrix::zeros(cfg.d_acoustic, cfg.d_linguistic);
        let mut src = NormalSource::from_tags(cfg.seed, &[TAG_PROJECTION]);
        for i in 0..projection.len() {
            projection.data_mut()[i] = src.next_normal();
        }
        let keywords = (0..cfg.num_classes)
            .map(|k| {
                let mut src = NormalSource::from_tags(cfg.seed, &[TAG_KEYWORD, k as u64]);
                normal_vector(&mut src, cfg.d_acoustic)
            })
            .collect();
        ClassStructure {
            centroids,
            projection,
            keywords,
        }
    }
}

/// Draw order within one utterance stream (fixed; changing it is a format
/// break): frame count, teacher noise, per frame (linguistic noise then
/// acoustic noise), keyword coin, keyword position.
fn generate_utterance(
    cfg: &GeneratorConfig,
    class: &ClassStructure,
    split: Split,
    index: usize,
) -> Utterance {
    let label = index % cfg.num_classes;
    let centroid = &class.centroids[label];
    let mut src = NormalSource::from_tags(
        cfg.seed,
        &[TAG_UTTERANCE, split.stream_code(), index as u64],
    );

    let frames = src.uniform().next_range(cfg.min_len, cfg.max_len);

    let teacher: Vec<f64> = centroid
        .iter()
        .map(|&c| c + cfg.teacher_noise * src.next_normal())
        .collect();

    let mut acoustic = Matrix::zeros(frames, cfg.d_acoustic);
    // 1/sqrt(d_linguistic) keeps projected entries at unit scale, so the
    // class signal survives the per-frame noise.
    let inv_dl = 1.0 / (cfg.d_linguistic as f64).sqrt();
    for t in 0..frames {
        let noisy_centroid: Vec<f64> = centroid
            .iter()
            .map(|&c| c + cfg.teacher_noise * src.next_normal())
            .collect();
        let row = acoustic.row_mut(t);
        for (i, slot) in row.iter_mut().enumerate() {
            let mut projected = 0.0;
            for (j, &v) in noisy_centroid.iter().enumerate() {
                projected += class.projection.get(i, j) * v;
            }
            *slot = projected * inv_dl;
        }
        for slot in row.iter_mut() {
            *slot += cfg.acoustic_noise * src.next_normal();
        }
    }

    let coin = src.uniform().next_f64();
    if coin < cfg.keyword_prob {
        let position = src.uniform().next_range(0, frames - 1);
        acoustic
            .row_mut(position)
            .copy_from_slice(&class.keywords[label]);
    }

    Utterance {
        id: format!("{}-{:06}", split.as_str(), index),
        acoustic,
        // Teacher values are finite by construction.
        teacher: Matrix::from_vec(1, cfg.d_linguistic, teacher).expect("finite teacher"),
        label,
    }
}

/// Generate paired train/test splits. Deterministic in the seed: centroids,
/// projection, and keyword vectors are shared across splits while noise
/// streams are keyed by (seed, split, index).
pub fn generate(cfg: &GeneratorConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let class = ClassStructure::build(cfg);
    let make_split = |split: Split, count: usize| -> Dataset {
        let utterances = (0..count)
            .map(|i| generate_utterance(cfg, &class, split, i))
            .collect();
        Dataset {
            d_acoustic: cfg.d_acoustic,
            d_linguistic: cfg.d_linguistic,
            num_classes: cfg.num_classes,
            split,
            utterances,
        }
    };
    let train = make_split(Split::Train, cfg.train_count);
    let test = make_split(Split::Test, cfg.test_count);
    Ok((train, test))
}
