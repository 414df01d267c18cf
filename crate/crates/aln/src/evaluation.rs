//! Held-out accuracy, the alpha-ablation protocol, and embedding exports.

use std::path::Path;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::{predict, transfer_forward, ModelConfig, ModelParams, Variant};
use crate::numerics::ops::mean_pool;
use crate::numerics::Matrix;
use crate::textio::{format_f64, format_f64_list, write_atomic};
use crate::training::{train, TrainConfig};

/// Fraction of utterances whose predicted class equals the label.
/// Deterministic and independent of utterance order.
pub fn evaluate(params: &ModelParams, ds: &Dataset) -> Result<f64> {
    let cfg = &params.config;
    if ds.d_acoustic != cfg.d_acoustic || ds.num_classes != cfg.num_classes {
        return Err(Error::InvalidConfig(format!(
            "dataset profile ({}, {} classes) does not match model ({}, {} classes)",
            ds.d_acoustic, ds.num_classes, cfg.d_acoustic, cfg.num_classes
        )));
    }
    if cfg.variant != Variant::Baseline2 && ds.d_linguistic != cfg.d_linguistic {
        return Err(Error::InvalidConfig(format!(
            "dataset d_linguistic {} does not match model {}",
            ds.d_linguistic, cfg.d_linguistic
        )));
    }
    if ds.is_empty() {
        return Err(Error::EmptyInput("evaluate"));
    }
    let mut correct = 0usize;
    for utt in &ds.utterances {
        if predict(utt, params)? == utt.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// One ablation cell. `alpha` is `None` for baseline2, whose objective does
/// not involve the distillation weight (it trains with the intent loss only).
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: Variant,
    pub alpha: Option<f64>,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    /// Rows sorted by (variant, alpha).
    pub rows: Vec<AblationRow>,
    /// Data profile plus training configuration, for reproducibility checks.
    pub fingerprint: String,
}

/// FNV-1a over every id, label, and value bit pattern: identifies the exact
/// dataset contents without relying on a stored generator seed.
fn dataset_digest(ds: &Dataset) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    let mut eat = |byte: u8| {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    };
    for utt in &ds.utterances {
        for b in utt.id.as_bytes() {
            eat(*b);
        }
        for b in (utt.label as u64).to_le_bytes() {
            eat(b);
        }
        for v in utt.acoustic.data().iter().chain(utt.teacher.data()) {
            for b in v.to_bits().to_le_bytes() {
                eat(b);
            }
        }
    }
    hash
}

fn fingerprint(train_ds: &Dataset, test_ds: &Dataset, base: &ModelConfig, tcfg: &TrainConfig) -> String {
    format!(
        "data_digest={:016x},d_acoustic={},d_linguistic={},num_classes={},train_count={},test_count={},d_attn={},gru_hidden={},init_seed={},epochs={},batch_size={},learning_rate={},shuffle_seed={}",
        dataset_digest(train_ds) ^ dataset_digest(test_ds).rotate_left(1),
        train_ds.d_acoustic,
        train_ds.d_linguistic,
        train_ds.num_classes,
        train_ds.len(),
        test_ds.len(),
        base.d_attn,
        base.gru_hidden,
        base.init_seed,
        tcfg.epochs,
        tcfg.batch_size,
        tcfg.learning_rate,
        tcfg.shuffle_seed,
    )
}

/// Train and evaluate every requested (variant, alpha) cell from a fresh
/// initialization with the same seeds. Baseline2 contributes one row per
/// mention regardless of the alpha list.
pub fn run_ablation(
    train_ds: &Dataset,
    test_ds: &Dataset,
    variants: &[Variant],
    alphas: &[f64],
    base: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<AblationReport> {
    let mut rows = Vec::new();
    for &variant in variants {
        let mcfg = ModelConfig {
            variant,
            ..base.clone()
        };
        if variant == Variant::Baseline2 {
            let cell_cfg = TrainConfig {
                alpha: 0.0,
                ..tcfg.clone()
            };
            let (params, _) = train(train_ds, test_ds, &mcfg, &cell_cfg)?;
            rows.push(AblationRow {
                variant,
                alpha: None,
                test_accuracy: evaluate(&params, test_ds)?,
            });
        } else {
            for &alpha in alphas {
                let cell_cfg = TrainConfig {
                    alpha,
                    ..tcfg.clone()
                };
                let (params, _) = train(train_ds, test_ds, &mcfg, &cell_cfg)?;
                rows.push(AblationRow {
                    variant,
                    alpha: Some(alpha),
                    test_accuracy: evaluate(&params, test_ds)?,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.variant
            .cmp(&b.variant)
            .then_with(|| match (a.alpha, b.alpha) {
                (None, None) => std::cmp::Ordering::Equal,
                (None, Some(_)) => std::cmp::Ordering::Less,
                (Some(_), None) => std::cmp::Ordering::Greater,
                (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
            })
    });
    Ok(AblationReport {
        rows,
        fingerprint: fingerprint(train_ds, test_ds, base, tcfg),
    })
}

/// Serialize the report as a delimited table.
pub fn write_ablation_report(report: &AblationReport, path: &Path) -> Result<()> {
    let mut out = format!(
        "aln-ablation format_version=1 fingerprint={} rows={}\n",
        report.fingerprint,
        report.rows.len()
    );
    for row in &report.rows {
        let alpha = match row.alpha {
            Some(a) => format_f64(a),
            None => "na".to_string(),
        };
        out.push_str(&format!(
            "variant={} alpha={} test_accuracy={}\n",
            row.variant,
            alpha,
            format_f64(row.test_accuracy),
        ));
    }
    write_atomic(path, &out)
}

/// Human-readable summary table.
pub fn ablation_summary(report: &AblationReport) -> String {
    let mut out = String::from("variant          alpha   test_accuracy\n");
    for row in &report.rows {
        let alpha = row
            .alpha
            .map_or_else(|| "  n/a".to_string(), |a| format!("{a:5.2}"));
        out.push_str(&format!(
            "{:<16} {} {:>13.4}\n",
            row.variant.as_str(),
            alpha,
            row.test_accuracy
        ));
    }
    out
}

/// Top two principal directions of a row set via power iteration (200
/// rounds, deterministic uniform unit-norm start) with deflation. Returns
/// `((component, eigenvalue), ...)`; a zero-variance direction comes back as
/// a zero vector with eigenvalue 0.
fn pca_top_two(centered: &Matrix) -> ((Vec<f64>, f64), (Vec<f64>, f64)) {
    let dim = centered.cols();
    // Scatter matrix, dim x dim.
    let mut scatter = vec![vec![0.0f64; dim]; dim];
    for r in 0..centered.rows() {
        let row = centered.row(r);
        for i in 0..dim {
            for j in i..dim {
                scatter[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            scatter[i][j] = scatter[j][i];
        }
    }

    let power = |scatter: &Vec<Vec<f64>>| -> (Vec<f64>, f64) {
        let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
        for _ in 0..200 {
            let mut w = vec![0.0f64; dim];
            for i in 0..dim {
                let row = &scatter[i];
                let mut acc = 0.0;
                for j in 0..dim {
                    acc += row[j] * v[j];
                }
                w[i] = acc;
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                return (vec![0.0; dim], 0.0);
            }
            for (slot, x) in v.iter_mut().zip(&w) {
                *slot = x / norm;
            }
        }
        let mut lambda = 0.0;
        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..dim {
                acc += scatter[i][j] * v[j];
            }
            lambda += v[i] * acc;
        }
        (v, lambda)
    };

    let (first, lambda1) = power(&scatter);
    let mut deflated = scatter;
    for i in 0..dim {
        for j in 0..dim {
            deflated[i][j] -= lambda1 * first[i] * first[j];
        }
    }
    let (second, lambda2) = power(&deflated);
    ((first, lambda1), (second, lambda2))
}

/// Export teacher and pooled student embeddings with 2-D PCA coordinates.
///
/// The PCA basis is fit on the combined teacher-plus-student set, so teacher
/// coordinates are NOT comparable across exports from different checkpoints:
/// a different student distribution shifts the joint basis. (A teacher-only
/// basis would make them comparable; that is deliberately not what this
/// export computes.)
pub fn export_embeddings(params: &ModelParams, ds: &Dataset, path: &Path) -> Result<()> {
    if params.config.variant == Variant::Baseline2 {
        return Err(Error::UnsupportedVariant {
            variant: params.config.variant.to_string(),
            op: "export_embeddings",
        });
    }
    if ds.is_empty() {
        return Err(Error::EmptyInput("export_embeddings"));
    }
    let dim = ds.d_linguistic;
    let mut rows: Vec<(String, usize, &'static str, Vec<f64>)> = Vec::with_capacity(2 * ds.len());
    for utt in &ds.utterances {
        let student = transfer_forward(&utt.acoustic, params)?;
        let pooled = mean_pool(&student)?;
        rows.push((utt.id.clone(), utt.label, "teacher", utt.teacher.row(0).to_vec()));
        rows.push((utt.id.clone(), utt.label, "student", pooled.row(0).to_vec()));
    }

    let mut stacked = Matrix::zeros(rows.len(), dim);
    for (r, (_, _, _, values)) in rows.iter().enumerate() {
        stacked.row_mut(r).copy_from_slice(values);
    }
    let mean = mean_pool(&stacked)?;
    let mut centered = stacked;
    for r in 0..centered.rows() {
        let row = centered.row_mut(r);
        for (v, m) in row.iter_mut().zip(mean.row(0)) {
            *v -= m;
        }
    }
    let ((pc1, _), (pc2, _)) = pca_top_two(&centered);

    let mut out = format!(
        "aln-embeddings format_version=1 count={} d_linguistic={dim}\n",
        rows.len()
    );
    for (r, (id, label, source, values)) in rows.iter().enumerate() {
        let crow = centered.row(r);
        let coord1: f64 = crow.iter().zip(&pc1).map(|(x, v)| x * v).sum();
        let coord2: f64 = crow.iter().zip(&pc2).map(|(x, v)| x * v).sum();
        out.push_str(&format!(
            "id={id} label={label} source={source} pc1={} pc2={} values={}\n",
            format_f64(coord1),
            format_f64(coord2),
            format_f64_list(values),
        ));
    }
    write_atomic(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate, GeneratorConfig, Split, Utterance};
    use crate::model::init_model;

    fn tiny_data() -> (Dataset, Dataset) {
        let cfg = GeneratorConfig {
            seed: 31,
            num_classes: 3,
            train_count: 12,
            test_count: 6,
            d_acoustic: 4,
            d_linguistic: 6,
            min_len: 2,
            max_len: 4,
            teacher_noise: 0.3,
            acoustic_noise: 0.5,
            keyword_prob: 0.6,
            centroid_scale: 1.0,
        };
        generate(&cfg).unwrap()
    }

    fn tiny_model_config(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            d_acoustic: 4,
            d_linguistic: 6,
            d_attn: 4,
            gru_hidden: 5,
            num_classes: 3,
            init_seed: 3,
        }
    }

    /// baseline2 with zero GRU weights leaves the pooled hidden state at
    /// zero, so the logits equal the head bias: a constant predictor.
    fn constant_predictor(class: usize, num_classes: usize) -> ModelParams {
        let mut params = init_model(&ModelConfig {
            variant: Variant::Baseline2,
            d_acoustic: 4,
            d_linguistic: 6,
            d_attn: 4,
            gru_hidden: 5,
            num_classes,
            init_seed: 0,
        })
        .unwrap();
        for tensor in params.tensors_mut() {
            tensor.value.fill(0.0);
        }
        params.head.bias.value.set(0, class, 1.0);
        params
    }

    #[test]
    fn oracle_predictor_scores_one() {
        let (mut ds, _) = tiny_data();
        for utt in &mut ds.utterances {
            utt.label = 1;
        }
        let params = constant_predictor(1, 3);
        assert_eq!(evaluate(&params, &ds).unwrap(), 1.0);
    }

    #[test]
    fn wrong_constant_predictor_scores_zero() {
        let (mut ds, _) = tiny_data();
        for utt in &mut ds.utterances {
            utt.label = 1;
        }
        let params = constant_predictor(2, 3);
        assert_eq!(evaluate(&params, &ds).unwrap(), 0.0);
    }

    #[test]
    fn untrained_model_scores_near_chance() {
        let cfg = GeneratorConfig::small_profile();
        let (_, test_ds) = generate(&cfg).unwrap();
        let params = init_model(&ModelConfig {
            variant: Variant::Aln,
            d_acoustic: 32,
            d_linguistic: 96,
            d_attn: 32,
            gru_hidden: 32,
            num_classes: 8,
            init_seed: 42,
        })
        .unwrap();
        let accuracy = evaluate(&params, &test_ds).unwrap();
        assert!(
            (0.02..=0.35).contains(&accuracy),
            "untrained accuracy {accuracy} outside chance band"
        );
    }

    #[test]
    fn evaluate_is_order_independent() {
        let (ds, _) = tiny_data();
        let params = init_model(&tiny_model_config(Variant::Aln)).unwrap();
        let forward_acc = evaluate(&params, &ds).unwrap();
        let mut reversed = ds.clone();
        reversed.utterances.reverse();
        assert_eq!(evaluate(&params, &reversed).unwrap(), forward_acc);
    }

    #[test]
    fn single_cell_ablation_matches_manual_run() {
        let (train_ds, test_ds) = tiny_data();
        let base = tiny_model_config(Variant::AlnLinguistic);
        let tcfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            shuffle_seed: 5,
            ..TrainConfig::default()
        };
        let report = run_ablation(
            &train_ds,
            &test_ds,
            &[Variant::AlnLinguistic],
            &[0.5],
            &base,
            &tcfg,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);

        let manual_cfg = TrainConfig {
            alpha: 0.5,
            ..tcfg
        };
        let (params, _) = train(&train_ds, &test_ds, &base, &manual_cfg).unwrap();
        let manual = evaluate(&params, &test_ds).unwrap();
        assert_eq!(report.rows[0].test_accuracy.to_bits(), manual.to_bits());
    }

    #[test]
    fn ablation_shape_matches_request() {
        let (train_ds, test_ds) = tiny_data();
        let base = tiny_model_config(Variant::Aln);
        let tcfg = TrainConfig {
            epochs: 1,
            batch_size: 6,
            ..TrainConfig::default()
        };
        let report = run_ablation(
            &train_ds,
            &test_ds,
            &[Variant::Aln, Variant::AlnLinguistic],
            &[0.8, 0.5],
            &base,
            &tcfg,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 4);
        // Sorted by (variant, alpha): aln-linguistic before aln? No: enum
        // order is baseline2 < aln-linguistic < aln.
        assert_eq!(report.rows[0].variant, Variant::AlnLinguistic);
        assert_eq!(report.rows[0].alpha, Some(0.5));
        assert_eq!(report.rows[1].alpha, Some(0.8));
        assert_eq!(report.rows[2].variant, Variant::Aln);

        let empty = run_ablation(&train_ds, &test_ds, &[], &[0.5], &base, &tcfg).unwrap();
        assert!(empty.rows.is_empty());
    }

    #[test]
    fn export_writes_two_rows_per_utterance() {
        let (ds, _) = tiny_data();
        let params = init_model(&tiny_model_config(Variant::Aln)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.alne");
        export_embeddings(&params, &ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * ds.len());
        assert_eq!(
            text.lines().filter(|l| l.contains("source=teacher")).count(),
            ds.len()
        );
    }

    #[test]
    fn export_rejects_baseline2() {
        let (ds, _) = tiny_data();
        let params = init_model(&tiny_model_config(Variant::Baseline2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_embeddings(&params, &ds, &dir.path().join("x")).unwrap_err(),
            Error::UnsupportedVariant { .. }
        ));
    }

    #[test]
    fn zero_variance_embeddings_project_to_zero() {
        // One utterance whose student output is forced to equal the teacher:
        // both export rows coincide, the scatter is zero, and all PCA
        // coordinates are exactly 0.
        let mut params = init_model(&ModelConfig {
            variant: Variant::AlnLinguistic,
            d_acoustic: 2,
            d_linguistic: 3,
            d_attn: 2,
            gru_hidden: 2,
            num_classes: 2,
            init_seed: 1,
        })
        .unwrap();
        let teacher = vec![0.5, -1.0, 2.0];
        {
            let transfer = params.transfer.as_mut().unwrap();
            transfer.weight.value.fill(0.0);
            transfer.bias.value = Matrix::from_vec(1, 3, teacher.clone()).unwrap();
        }
        let ds = Dataset {
            d_acoustic: 2,
            d_linguistic: 3,
            num_classes: 2,
            split: Split::Test,
            utterances: vec![Utterance {
                id: "u-0".to_string(),
                acoustic: Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(),
                teacher: Matrix::from_vec(1, 3, teacher).unwrap(),
                label: 0,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.alne");
        export_embeddings(&params, &ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines().skip(1) {
            assert!(line.contains("pc1=0.0000000000000000e0"), "{line}");
            assert!(line.contains("pc2=0.0000000000000000e0"), "{line}");
        }
    }

    #[test]
    fn first_component_captures_at_least_second_variance() {
        let (ds, _) = tiny_data();
        let mut centered = Matrix::zeros(ds.len(), ds.d_linguistic);
        for (r, utt) in ds.utterances.iter().enumerate() {
            centered.row_mut(r).copy_from_slice(utt.teacher.row(0));
        }
        let mean = mean_pool(&centered).unwrap();
        for r in 0..centered.rows() {
            for c in 0..centered.cols() {
                let v = centered.get(r, c) - mean.get(0, c);
                centered.set(r, c, v);
            }
        }
        let ((_, lambda1), (_, lambda2)) = pca_top_two(&centered);
        assert!(lambda1 >= lambda2, "{lambda1} < {lambda2}");
        assert!(lambda2 >= -1e-9);
    }

    #[test]
    fn joint_basis_moves_teacher_coordinates_across_checkpoints() {
        // Documented negative case: because the basis is fit jointly, the
        // same teacher rows land on different coordinates when the student
        // changes.
        let (ds, _) = tiny_data();
        let dir = tempfile::tempdir().unwrap();
        let coords = |seed: u64, name: &str| -> Vec<String> {
            let params = init_model(&ModelConfig {
                init_seed: seed,
                ..tiny_model_config(Variant::Aln)
            })
            .unwrap();
            let path = dir.path().join(name);
            export_embeddings(&params, &ds, &path).unwrap();
            std::fs::read_to_string(&path)
                .unwrap()
                .lines()
                .filter(|l| l.contains("source=teacher"))
                .map(|l| l.split(" values=").next().unwrap().to_string())
                .collect()
        };
        let a = coords(1, "a.alne");
        let b = coords(2, "b.alne");
        assert_ne!(a, b, "joint basis should shift with the student");
    }
}
