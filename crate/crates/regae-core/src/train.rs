//! The epoch loop: curriculum windows, mini-batches, clipping, Adam, early
//! stopping on validation loss, and the machine-readable run history.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cells::ModelParams;
use crate::config::RunConfig;
use crate::curriculum::CurriculumState;
use crate::dataset::DatasetSplit;
use crate::graph::{extract_window_subgraph, CanonicalGraph};
use crate::loss::{batch_loss, weighted_f1, ForwardOptions, TeacherStats};
use crate::optim::{adam_step, clip_global_norm, ADAM_BETAS, ADAM_EPS};
use crate::tensor::Tape;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training subset is empty")]
    EmptyTrainingSet,
    #[error(
        "non-finite loss ({value}) at epoch {epoch}, batch {batch}; sample indices {samples:?}"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        value: f32,
        samples: Vec<usize>,
    },
}

/// One line of the run history, emitted per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub run_id: String,
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub train_f1: f64,
    pub curriculum_fraction: f64,
    pub grad_norm_mean: f64,
    pub improved: bool,
}

pub struct TrainResult {
    /// Parameters of the best validation epoch.
    pub model: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    /// Resolved free-decode cap (twice the largest training block count
    /// unless the config pins one).
    pub max_blocks: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable derived seed for an independent random stream.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Stable run identifier from the resolved config and seed (FNV-1a).
pub fn run_id(config: &RunConfig, seed: u64) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        }
    };
    eat(config.to_toml().as_bytes());
    eat(&seed.to_le_bytes());
    format!("{hash:016x}")
}

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_VAE: u64 = 3;

/// Teacher-forced loss over a graph list without touching gradients;
/// the weighted mean runs in fixed (input) order.
fn dataset_loss(model: &ModelParams, graphs: &[CanonicalGraph], config: &RunConfig) -> f64 {
    if graphs.is_empty() {
        return f64::NAN;
    }
    let weights = config.loss_weights();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for chunk in graphs.chunks(config.batch.max(1)) {
        for g in chunk {
            let mut tape = Tape::new();
            let mut opts = ForwardOptions {
                emb_norm_scope: config.emb_norm_scope,
                vae_rng: None,
            };
            let (loss, _) = crate::loss::graph_loss(&mut tape, model, g, &weights, &mut opts);
            let nb = g.vertex_count().div_ceil(config.l);
            let w = (nb as f64).powf(config.size_exponent);
            num += w * tape.scalar_value(loss) as f64;
            den += w;
        }
    }
    num / den
}

pub fn train(split: &DatasetSplit, config: &RunConfig) -> Result<TrainResult, TrainError> {
    if split.train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let seed = config.seed;
    let id = run_id(config, seed);
    let weights = config.loss_weights();

    let mut model = ModelParams::init(config.cell_config(), derive_seed(seed, STREAM_INIT));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_TRAIN));
    let mut vae_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_VAE));
    let mut curriculum: CurriculumState = config.curriculum();

    let train_max_nb = split
        .train
        .iter()
        .map(|g| g.vertex_count().div_ceil(config.l))
        .max()
        .unwrap_or(1);
    let max_blocks = config.max_blocks.unwrap_or(2 * train_max_nb).max(1);

    let mut history = Vec::new();
    let mut best_valid = f64::INFINITY;
    let mut best_model = model.clone();
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;

    for epoch in 1..=config.max_epochs {
        // one window per (graph, copy) this epoch
        let samples: Vec<CanonicalGraph> = split
            .train
            .iter()
            .map(|g| {
                let n = g.vertex_count();
                let size = curriculum.window_size(n);
                let start = rng.random_range(0..=n - size);
                extract_window_subgraph(g, start, size).expect("window inside the graph")
            })
            .collect();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);

        let mut stats: Vec<TeacherStats> = Vec::with_capacity(samples.len());
        let mut loss_num = 0.0f64;
        let mut loss_den = 0.0f64;
        let mut norm_sum = 0.0f64;
        let mut batches = 0usize;
        for (batch_index, ids) in order.chunks(config.batch).enumerate() {
            let graphs: Vec<&CanonicalGraph> = ids.iter().map(|&i| &samples[i]).collect();
            let mut tape = Tape::new();
            let mut opts = ForwardOptions {
                emb_norm_scope: config.emb_norm_scope,
                vae_rng: config.vae.then_some(&mut vae_rng),
            };
            let (loss, batch_stats) = batch_loss(&mut tape, &model, &graphs, &weights, &mut opts);
            let value = tape.scalar_value(loss);
            if !value.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                    value,
                    samples: ids.to_vec(),
                });
            }
            tape.backward(loss, &mut model.store);
            norm_sum += clip_global_norm(&mut model.store, config.grad_clip) as f64;
            adam_step(&mut model.store, config.lr, ADAM_BETAS, ADAM_EPS);

            let batch_weight: f64 = graphs
                .iter()
                .map(|g| (g.vertex_count().div_ceil(config.l) as f64).powf(config.size_exponent))
                .sum();
            loss_num += value as f64 * batch_weight;
            loss_den += batch_weight;
            batches += 1;
            stats.extend(batch_stats);
        }

        let train_loss = loss_num / loss_den;
        let train_f1 = weighted_f1(&stats);
        let fraction_used = curriculum.fraction;
        curriculum = curriculum.tick(train_f1);

        let valid_loss = if split.valid.is_empty() {
            train_loss
        } else {
            dataset_loss(&model, &split.valid, config)
        };

        let improved = valid_loss < best_valid;
        if improved {
            best_valid = valid_loss;
            best_model = model.clone();
            best_epoch = epoch;
            since_best = 0;
        } else if fraction_used >= 1.0 {
            // patience counts only once windows cover whole graphs;
            // stopping earlier would freeze a model that never trained at
            // full recursion depth
            since_best += 1;
        }

        history.push(EpochRecord {
            run_id: id.clone(),
            seed,
            epoch,
            train_loss,
            valid_loss,
            train_f1,
            curriculum_fraction: fraction_used,
            grad_norm_mean: norm_sum / batches.max(1) as f64,
            improved,
        });

        if let Some(target) = config.stop_train_loss {
            if train_loss < target {
                break;
            }
        }
        if since_best > config.patience {
            break;
        }
    }

    Ok(TrainResult {
        model: best_model,
        history,
        best_epoch,
        best_valid_loss: best_valid,
        max_blocks,
    })
}

/// Writes history records as JSON lines.
pub fn write_history(path: &Path, records: &[EpochRecord]) -> std::io::Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    std::fs::write(path, text)
}

pub fn read_history(path: &Path) -> std::io::Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("history line parses"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::dataset::{split_dataset, SplitManifest};
    use crate::graph::{canonical_order, Graph};

    fn tiny_split() -> DatasetSplit {
        let graphs: Vec<Graph> = vec![
            Graph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap(),
            Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap(),
            Graph::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap(),
        ];
        let canon: Vec<CanonicalGraph> = graphs.iter().map(canonical_order).collect();
        DatasetSplit {
            train: canon.clone(),
            valid: canon.clone(),
            test: canon,
            augmentation_factor: 0,
            manifest: SplitManifest {
                seed: 0,
                ratios: [0.7, 0.15, 0.15],
                augmentation_factor: 0,
                train_base: vec![0, 1, 2],
                valid_base: vec![],
                test_base: vec![],
            },
        }
    }

    fn tiny_config(max_epochs: usize) -> RunConfig {
        let mut c = preset("desk").unwrap();
        c.m = 8;
        c.encoder_hidden = vec![8];
        c.decoder_hidden = vec![8];
        c.max_epochs = max_epochs;
        c.stop_train_loss = None;
        c.patience = max_epochs;
        c
    }

    #[test]
    fn zero_patience_stops_one_epoch_past_first_non_improvement() {
        let split = tiny_split();
        let mut config = tiny_config(200);
        config.patience = 0;
        config.lr = 0.5; // oscillates, guaranteeing an early non-improvement
        let result = train(&split, &config).unwrap();
        let h = &result.history;
        assert!(h.len() < 200, "training should stop early");
        let (last, init) = h.split_last().unwrap();
        assert!(!last.improved);
        assert!(init.iter().all(|r| r.improved));
    }

    #[test]
    fn identical_seeds_reproduce_the_history_exactly() {
        let split = tiny_split();
        let config = tiny_config(5);
        let a = train(&split, &config).unwrap();
        let b = train(&split, &config).unwrap();
        assert_eq!(a.history, b.history);
        for (pa, pb) in a.model.store.iter().zip(b.model.store.iter()) {
            let bits = |v: &[f32]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&pa.values), bits(&pb.values));
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let split = tiny_split();
        let mut config = tiny_config(3);
        let a = train(&split, &config).unwrap();
        config.seed = 99;
        let b = train(&split, &config).unwrap();
        assert_ne!(a.history[0].train_loss, b.history[0].train_loss);
    }

    #[test]
    fn loss_decreases_on_a_memorization_run() {
        let split = tiny_split();
        let mut config = tiny_config(60);
        config.lr = 0.003;
        let result = train(&split, &config).unwrap();
        let first = result.history.first().unwrap().train_loss;
        let last = result.history.last().unwrap().train_loss;
        assert!(last < first * 0.8, "loss {first} -> {last} should fall");
    }

    #[test]
    fn max_blocks_defaults_to_twice_the_largest_training_extent() {
        let split = tiny_split();
        let config = tiny_config(1);
        let result = train(&split, &config).unwrap();
        assert_eq!(result.max_blocks, 8); // largest n = 4, l = 1
    }

    #[test]
    fn exploding_run_aborts_with_the_offending_batch() {
        let split = tiny_split();
        let mut config = tiny_config(500);
        config.lr = 1e8; // drives weights far enough to overflow the norm term
        match train(&split, &config) {
            Err(TrainError::NonFiniteLoss { epoch, samples, .. }) => {
                assert!(epoch >= 1);
                assert!(!samples.is_empty());
            }
            Err(other) => panic!("unexpected error: {other}"),
            Ok(_) => panic!("expected a numeric abort, training stayed finite"),
        }
    }

    #[test]
    fn history_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let split = tiny_split();
        let config = tiny_config(3);
        let result = train(&split, &config).unwrap();
        let path = dir.path().join("history.jsonl");
        write_history(&path, &result.history).unwrap();
        assert_eq!(read_history(&path).unwrap(), result.history);
    }

    #[test]
    fn augmented_split_trains_with_windows() {
        // exercise the curriculum path: fraction < 1 forces real windows
        let graphs: Vec<Graph> = (2..5).map(|k| crate::dataset::grid_graph(2, k)).collect();
        let split = split_dataset(&graphs, [0.7, 0.15, 0.15], 2, 5).unwrap();
        let mut config = tiny_config(4);
        config.curriculum_start = 0.4;
        config.batch = 4;
        let result = train(&split, &config).unwrap();
        assert_eq!(result.history.len(), 4);
        assert!(result.history.iter().all(|r| r.train_loss.is_finite()));
    }
}
