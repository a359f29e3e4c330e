//! Loss assembly for teacher-forced reconstruction.
//!
//! Adjacency logits are split into the class of true ones and the class of
//! true zeros; each class contributes its mean cross-entropy, mixed by the
//! recall-precision bias. Size-indicator logits are supervised everywhere
//! with the triangle pattern, and the root embedding norm is penalized so
//! embeddings stay bounded. Per-graph losses combine into a batch by a
//! weighted mean with weight `n_blocks^d`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cells::{variational_head, ModelParams};
use crate::codec::{decode_teacher_forced, encode_on_tape, DecodeTrace};
use crate::graph::CanonicalGraph;
use crate::patch::{to_patch_grid, PatchGrid};
use crate::tensor::{Tape, Var};

/// Mixing weights of the loss terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Recall-precision bias in (0, 1): weight of the ones class; the zeros
    /// class gets `1 - rpb`.
    pub rpb: f32,
    /// Weight of the size-indicator term.
    pub mask_weight: f32,
    /// Weight of the squared embedding norm.
    pub emb_norm_weight: f32,
    /// Graph-weight exponent `d`; a graph weighs `n_blocks^d` in a batch.
    pub size_exponent: f64,
    /// KL term weight, used only in VAE mode.
    pub kl_weight: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rpb: 0.5,
            mask_weight: 0.5,
            emb_norm_weight: 0.2,
            size_exponent: 1.0,
            kl_weight: 0.01,
        }
    }
}

/// Which embeddings the norm penalty covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbNormScope {
    /// The root embedding only.
    #[default]
    Root,
    /// All first-layer (diagonal block) embeddings of the encoder.
    Diagonal,
}

/// Teacher-forced confusion counts over the supervised adjacency positions.
#[derive(Debug, Clone, Copy, Default)]
pub struct TeacherStats {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl TeacherStats {
    pub fn f1(&self) -> f64 {
        if self.tp + self.fp == 0 && self.tp + self.fn_ == 0 {
            return 1.0;
        }
        let p = if self.tp + self.fp > 0 {
            self.tp as f64 / (self.tp + self.fp) as f64
        } else {
            0.0
        };
        let r = if self.tp + self.fn_ > 0 {
            self.tp as f64 / (self.tp + self.fn_) as f64
        } else {
            0.0
        };
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

/// Reconstruction loss of one teacher-forced decode against its target grid,
/// with the embedding-norm penalty supplied as an already-built scalar.
pub fn reconstruction_loss_with_penalty(
    tape: &mut Tape,
    trace: &DecodeTrace,
    target: &PatchGrid,
    emb_penalty_sq: Var,
    weights: &LossWeights,
) -> (Var, TeacherStats) {
    assert_eq!(
        trace.n_blocks,
        target.n_blocks(),
        "decoded region ({} block antidiagonals) does not match target ({})",
        trace.n_blocks,
        target.n_blocks()
    );
    let l = target.patch_side();
    let n = target.vertex_count();

    let mut b_parts = Vec::with_capacity(trace.blocks.len());
    let mut c_parts = Vec::with_capacity(trace.blocks.len());
    let mut ones_idx = Vec::new();
    let mut zeros_idx = Vec::new();
    let mut c_targets = Vec::with_capacity(trace.blocks.len() * l * l);
    let mut stats = TeacherStats {
        n,
        ..Default::default()
    };

    for (block_index, block) in trace.blocks.iter().enumerate() {
        b_parts.push(block.b_patch);
        c_parts.push(block.c_patch);
        let b_values = tape.value(block.b_patch).to_vec();
        let offset = block_index * l * l;
        for r in 0..l {
            for c in 0..l {
                let (i, j) = (block.bi * l + r, block.bj * l + c);
                let flat = offset + r * l + c;
                let inside = i + j + 2 <= n;
                c_targets.push(if inside { 1.0 } else { 0.0 });
                let predicted_one = b_values[r * l + c] >= 0.0;
                if inside {
                    // strictly-lower-triangle adjacency entry at (n - i, j + 1)
                    let target_one = target.entry(n - i, j + 1) == 1.0;
                    if target_one {
                        ones_idx.push(flat);
                        if predicted_one {
                            stats.tp += 1;
                        } else {
                            stats.fn_ += 1;
                        }
                    } else {
                        zeros_idx.push(flat);
                        if predicted_one {
                            stats.fp += 1;
                        }
                    }
                } else if i + j < n {
                    // the closing antidiagonal trains toward zero
                    zeros_idx.push(flat);
                    if predicted_one {
                        stats.fp += 1;
                    }
                }
                // entries past i + j = n - 1 are outside the B loss
            }
        }
    }

    let b_all = tape.concat(&b_parts);
    let c_all = tape.concat(&c_parts);

    let mut total: Option<Var> = None;
    let mut push = |tape: &mut Tape, term: Var| {
        total = Some(match total {
            Some(t) => tape.add(t, term),
            None => term,
        });
    };

    if !ones_idx.is_empty() {
        let count = ones_idx.len();
        let sel = tape.gather(b_all, ones_idx);
        let bce = tape.bce_with_logits(sel, &vec![1.0; count]);
        let mean = tape.mean(bce);
        let term = tape.scale(mean, weights.rpb);
        push(tape, term);
    }
    if !zeros_idx.is_empty() {
        let count = zeros_idx.len();
        let sel = tape.gather(b_all, zeros_idx);
        let bce = tape.bce_with_logits(sel, &vec![0.0; count]);
        let mean = tape.mean(bce);
        let term = tape.scale(mean, 1.0 - weights.rpb);
        push(tape, term);
    }
    {
        let bce = tape.bce_with_logits(c_all, &c_targets);
        let mean = tape.mean(bce);
        let term = tape.scale(mean, weights.mask_weight);
        push(tape, term);
    }
    {
        let term = tape.scale(emb_penalty_sq, weights.emb_norm_weight);
        push(tape, term);
    }
    (total.expect("loss always has the C and norm terms"), stats)
}

/// Reconstruction loss with the norm penalty on the root embedding.
pub fn reconstruction_loss(
    tape: &mut Tape,
    trace: &DecodeTrace,
    target: &PatchGrid,
    root_embedding: Var,
    weights: &LossWeights,
) -> (Var, TeacherStats) {
    let penalty = tape.sq_norm(root_embedding);
    reconstruction_loss_with_penalty(tape, trace, target, penalty, weights)
}

/// Options threaded through the per-graph forward pass.
pub struct ForwardOptions<'r> {
    pub emb_norm_scope: EmbNormScope,
    /// Noise stream for VAE sampling; `None` runs the plain autoencoder even
    /// when a variational head exists.
    pub vae_rng: Option<&'r mut ChaCha8Rng>,
}

impl Default for ForwardOptions<'_> {
    fn default() -> Self {
        ForwardOptions {
            emb_norm_scope: EmbNormScope::Root,
            vae_rng: None,
        }
    }
}

/// Encode, teacher-forced decode and loss for one graph.
pub fn graph_loss(
    tape: &mut Tape,
    model: &ModelParams,
    graph: &CanonicalGraph,
    weights: &LossWeights,
    opts: &mut ForwardOptions,
) -> (Var, TeacherStats) {
    let grid = to_patch_grid(graph, model.config.l);
    let enc = encode_on_tape(tape, model, &grid);

    let penalty = match opts.emb_norm_scope {
        EmbNormScope::Root => tape.sq_norm(enc.root),
        EmbNormScope::Diagonal => {
            let mut total = None;
            for k in 1..=grid.n_blocks() {
                let sq = tape.sq_norm(enc.embeddings[&(k, k)]);
                total = Some(match total {
                    Some(t) => tape.add(t, sq),
                    None => sq,
                });
            }
            total.expect("at least one diagonal block")
        }
    };

    let (decoder_input, kl) = match (&model.f_var, opts.vae_rng.as_deref_mut()) {
        (Some(_), Some(rng)) => {
            let (sampled, kl) = variational_head(tape, model, enc.root, rng);
            (sampled, Some(kl))
        }
        _ => (enc.root, None),
    };

    let trace = decode_teacher_forced(tape, model, decoder_input, grid.n_blocks());
    let (mut loss, stats) = reconstruction_loss_with_penalty(tape, &trace, &grid, penalty, weights);
    if let Some(kl) = kl {
        let weighted = tape.scale(kl, weights.kl_weight);
        loss = tape.add(loss, weighted);
    }
    (loss, stats)
}

/// Weighted mean of per-graph losses with weight `n_blocks^d`.
///
/// The reduction runs in ascending `(loss value, weight)` order, which makes
/// the result bit-identical under any permutation of the batch.
pub fn batch_loss(
    tape: &mut Tape,
    model: &ModelParams,
    graphs: &[&CanonicalGraph],
    weights: &LossWeights,
    opts: &mut ForwardOptions,
) -> (Var, Vec<TeacherStats>) {
    assert!(!graphs.is_empty(), "batch_loss: empty batch");
    let l = model.config.l;
    let mut per_graph = Vec::with_capacity(graphs.len());
    let mut stats_out = Vec::with_capacity(graphs.len());
    for g in graphs {
        let (loss, stats) = graph_loss(tape, model, g, weights, opts);
        let n_blocks = g.vertex_count().div_ceil(l);
        let weight = (n_blocks as f64).powf(weights.size_exponent) as f32;
        per_graph.push((tape.scalar_value(loss), weight, loss));
        stats_out.push(stats);
    }

    per_graph.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let weight_sum: f32 = per_graph.iter().map(|&(_, w, _)| w).sum();
    let mut total: Option<Var> = None;
    for &(_, weight, loss) in &per_graph {
        let weighted = tape.scale(loss, weight / weight_sum);
        total = Some(match total {
            Some(t) => tape.add(t, weighted),
            None => weighted,
        });
    }
    (total.expect("non-empty batch"), stats_out)
}

/// Size-weighted mean teacher-forced F1 across samples (the curriculum
/// trigger signal).
pub fn weighted_f1(stats: &[TeacherStats]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for s in stats {
        num += s.n as f64 * s.f1();
        den += s.n as f64;
    }
    if den > 0.0 {
        num / den
    } else {
        1.0
    }
}
