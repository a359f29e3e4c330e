//! Recursive encode/decode schedules over patch grids.
//!
//! Encoding walks the lower block triangle by growing antidiagonal span:
//! diagonal blocks first from null inputs, then each block `(I, J)` from its
//! neighbors `(I-1, J)` and `(I, J+1)`, ending at the root block
//! `(n_blocks, 1)` whose embedding represents the whole graph.
//!
//! Decoding runs the mirror image from a single embedding: antidiagonal `s`
//! of the `y` triangle is expanded into antidiagonal `s+1`, with border cells
//! supplying the half-embeddings that have no upper/left producer. Each cell
//! also emits an adjacency logit patch (`B`) and a size-indicator logit patch
//! (`C`); decoding stops when the produced antidiagonal's mean `sigma(C)`
//! drops below one half.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cells::{border_cell_left, border_cell_right, decoder_cell, encoder_cell, ModelParams};
use crate::graph::Graph;
use crate::patch::PatchGrid;
use crate::tensor::{sigmoid_f32, Tape, Var};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("missing B entry at global position ({0}, {1})")]
    MissingEntry(usize, usize),
    #[error("embedding file {path}: {msg}")]
    BadEmbeddingFile {
        path: std::path::PathBuf,
        msg: String,
    },
}

/// How the free-running decoder turns the stop trigger into a block count.
///
/// Both variants stop once the just-produced antidiagonal `s` has mean
/// `sigma(C) < 0.5`. `TargetConsistent` sets `n_blocks = s + 1`, matching the
/// training targets (the first all-zero antidiagonal is the last one).
/// `Verbatim` keeps the published `n = i + 2` arithmetic: it produces one
/// further antidiagonal and sets `n_blocks = s + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    #[default]
    TargetConsistent,
    Verbatim,
}

/// Result of encoding: per-block embeddings plus the root.
pub struct EncodeTrace {
    /// Embedding of block `(I, J)`, 1-based, `J <= I`.
    pub embeddings: BTreeMap<(usize, usize), Var>,
    pub root: Var,
    pub cell_invocations: usize,
}

/// Encodes a patch grid on an existing tape (the training path).
pub fn encode_on_tape(tape: &mut Tape, model: &ModelParams, grid: &PatchGrid) -> EncodeTrace {
    encode_scheduled(tape, model, grid, |_span, blocks| blocks)
}

/// Encoding with a caller-controlled visit order inside each antidiagonal
/// layer; results must not depend on that order.
pub fn encode_scheduled(
    tape: &mut Tape,
    model: &ModelParams,
    grid: &PatchGrid,
    mut layer_order: impl FnMut(usize, Vec<(usize, usize)>) -> Vec<(usize, usize)>,
) -> EncodeTrace {
    let nb = grid.n_blocks();
    assert!(nb >= 1, "cannot encode an empty grid");
    let mut embeddings: BTreeMap<(usize, usize), Var> = BTreeMap::new();
    let mut cell_invocations = 0usize;

    for span in 0..nb {
        let layer: Vec<(usize, usize)> = (1..=nb - span).map(|j| (j + span, j)).collect();
        for (i, j) in layer_order(span, layer) {
            let (x0, x1) = if span == 0 {
                (None, None)
            } else {
                let below = *embeddings
                    .get(&(i - 1, j))
                    .expect("dependency (I-1, J) computed in an earlier layer");
                let right = *embeddings
                    .get(&(i, j + 1))
                    .expect("dependency (I, J+1) computed in an earlier layer");
                (Some(below), Some(right))
            };
            let x = encoder_cell(tape, model, x0, x1, grid.block(i, j));
            cell_invocations += 1;
            embeddings.insert((i, j), x);
        }
    }
    let root = embeddings[&(nb, 1)];
    EncodeTrace {
        embeddings,
        root,
        cell_invocations,
    }
}

/// Embeds a grid on a private tape and returns the root values.
pub fn embed(model: &ModelParams, grid: &PatchGrid) -> (Vec<f32>, usize) {
    let mut tape = Tape::new();
    let trace = encode_on_tape(&mut tape, model, grid);
    (tape.value(trace.root).to_vec(), trace.cell_invocations)
}

/// Logit patches produced for decode block `(bi, bj)` (0-based antidiagonal
/// coordinates).
pub struct BlockLogits {
    pub bi: usize,
    pub bj: usize,
    pub b_patch: Var,
    pub c_patch: Var,
}

/// Result of a teacher-forced decode: logits for every block of the target
/// extent, still attached to the tape.
pub struct DecodeTrace {
    pub blocks: Vec<BlockLogits>,
    pub n_blocks: usize,
    pub cell_invocations: usize,
}

/// Runs the decoder for exactly `n_blocks` antidiagonals (the training path;
/// the stop rule is not consulted).
pub fn decode_teacher_forced(
    tape: &mut Tape,
    model: &ModelParams,
    root: Var,
    n_blocks: usize,
) -> DecodeTrace {
    assert!(n_blocks >= 1, "decode needs at least one block");
    let h = model.config.m / 2;
    let mut blocks = Vec::with_capacity(n_blocks * (n_blocks + 1) / 2);
    let mut cell_invocations = 0usize;

    // antidiagonal s kept as columns j = 0..=s, ys[j] = y at (s - j, j)
    let mut ys: Vec<Var> = vec![root];
    for s in 0..n_blocks {
        let outs: Vec<_> = ys.iter().map(|&y| decoder_cell(tape, model, y)).collect();
        cell_invocations += outs.len();
        for (j, out) in outs.iter().enumerate() {
            blocks.push(BlockLogits {
                bi: s - j,
                bj: j,
                b_patch: out.b_patch,
                c_patch: out.c_patch,
            });
        }
        if s + 1 < n_blocks {
            let top_half = tape.slice(ys[s], 0, h);
            let border_left = border_cell_left(tape, model, top_half);
            let left_col_half = tape.slice(ys[0], h, h);
            let border_right = border_cell_right(tape, model, left_col_half);
            let mut next = Vec::with_capacity(s + 2);
            for j in 0..=s + 1 {
                let left = if j <= s { outs[j].left } else { border_left };
                let right = if j == 0 {
                    border_right
                } else {
                    outs[j - 1].right
                };
                next.push(tape.concat(&[left, right]));
            }
            ys = next;
        }
    }
    DecodeTrace {
        blocks,
        n_blocks,
        cell_invocations,
    }
}

/// Dense symmetric 0/1 adjacency matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjMatrix {
    n: usize,
    data: Vec<bool>,
}

impl AdjMatrix {
    pub fn zeros(n: usize) -> Self {
        AdjMatrix {
            n,
            data: vec![false; n * n],
        }
    }

    pub fn from_graph(g: &Graph) -> Self {
        let mut m = Self::zeros(g.vertex_count());
        for &(a, b) in g.edges() {
            m.set_sym(a, b);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize) {
        assert_ne!(i, j, "diagonal stays zero");
        self.data[i * self.n + j] = true;
        self.data[j * self.n + i] = true;
    }

    pub fn to_graph(&self) -> Graph {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j) {
                    edges.push((j, i));
                }
            }
        }
        Graph::new(self.n, edges).expect("adjacency matrix is a valid graph")
    }

    /// Copy padded with zero rows/columns up to `n`.
    pub fn padded(&self, n: usize) -> AdjMatrix {
        assert!(n >= self.n);
        let mut out = AdjMatrix::zeros(n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.data[i * n + j] = self.get(i, j);
            }
        }
        out
    }
}

/// Result of a free-running decode.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub a_hat: AdjMatrix,
    pub n_hat: usize,
    pub n_blocks: usize,
    /// Per-block logit values over the produced triangle, keyed by 0-based
    /// block coordinates.
    pub b_logits: BTreeMap<(usize, usize), Vec<f32>>,
    pub c_logits: BTreeMap<(usize, usize), Vec<f32>>,
    pub truncated: bool,
    pub cell_invocations: usize,
}

/// Decodes an embedding with the stop rule active, capped at `max_blocks`
/// antidiagonals. Truncation is flagged, not an error.
pub fn decode(
    model: &ModelParams,
    embedding: &[f32],
    max_blocks: usize,
    stop_rule: StopRule,
) -> DecodeResult {
    let m = model.config.m;
    let l = model.config.l;
    assert_eq!(
        embedding.len(),
        m,
        "embedding length {} != m = {}",
        embedding.len(),
        m
    );
    assert!(max_blocks >= 1, "max_blocks must be positive");
    let h = m / 2;

    let mut tape = Tape::new();
    let mut ys: Vec<Var> = vec![tape.vector(embedding)];
    let mut b_logits: BTreeMap<(usize, usize), Vec<f32>> = BTreeMap::new();
    let mut c_logits: BTreeMap<(usize, usize), Vec<f32>> = BTreeMap::new();
    let mut cell_invocations = 0usize;
    let mut n_blocks = max_blocks;
    let mut truncated = true;
    let mut stop_at_next = false;

    for s in 0..max_blocks {
        let outs: Vec<_> = ys
            .iter()
            .map(|&y| decoder_cell(&mut tape, model, y))
            .collect();
        cell_invocations += outs.len();
        let mut sig_sum = 0.0f64;
        let mut sig_count = 0usize;
        for (j, out) in outs.iter().enumerate() {
            let b = tape.value(out.b_patch).to_vec();
            let c = tape.value(out.c_patch).to_vec();
            for &logit in &c {
                sig_sum += sigmoid_f32(logit) as f64;
                sig_count += 1;
            }
            b_logits.insert((s - j, j), b);
            c_logits.insert((s - j, j), c);
        }

        if stop_at_next {
            // verbatim rule: the trigger fired on the previous antidiagonal
            n_blocks = s + 1;
            truncated = false;
            break;
        }
        let mean_sigma = sig_sum / sig_count as f64;
        if mean_sigma < 0.5 {
            match stop_rule {
                StopRule::TargetConsistent => {
                    n_blocks = s + 1;
                    truncated = false;
                    break;
                }
                StopRule::Verbatim => {
                    stop_at_next = true;
                }
            }
        }

        if s + 1 < max_blocks {
            let top_half = tape.slice(ys[s], 0, h);
            let border_left = border_cell_left(&mut tape, model, top_half);
            let left_col_half = tape.slice(ys[0], h, h);
            let border_right = border_cell_right(&mut tape, model, left_col_half);
            let mut next = Vec::with_capacity(s + 2);
            for j in 0..=s + 1 {
                let left = if j <= s { outs[j].left } else { border_left };
                let right = if j == 0 {
                    border_right
                } else {
                    outs[j - 1].right
                };
                next.push(tape.concat(&[left, right]));
            }
            ys = next;
        }
    }

    let n_hat = infer_exact_size(&c_logits, n_blocks, l);
    let mut b_entries: BTreeMap<(usize, usize), f32> = BTreeMap::new();
    for (&(bi, bj), patch) in &b_logits {
        for r in 0..l {
            for c in 0..l {
                b_entries.insert((bi * l + r, bj * l + c), patch[r * l + c]);
            }
        }
    }
    let a_hat = remap_b_to_a(&b_entries, n_hat).expect("decode produced every needed B entry");

    DecodeResult {
        a_hat,
        n_hat,
        n_blocks,
        b_logits,
        c_logits,
        truncated,
        cell_invocations,
    }
}

/// Recovers the exact vertex count from the size-indicator logits: among the
/// candidates compatible with `n_blocks`, picks the one whose target pattern
/// `1{i + j <= n - 2}` agrees with the thresholded logits on the most
/// produced entries, preferring smaller counts on ties. For `l = 1` the only
/// candidate is `n_blocks` itself.
pub fn infer_exact_size(
    c_logits: &BTreeMap<(usize, usize), Vec<f32>>,
    n_blocks: usize,
    l: usize,
) -> usize {
    let lo = (n_blocks - 1) * l + 1;
    let hi = n_blocks * l;
    let mut best = lo;
    let mut best_score = -1isize;
    for n in lo..=hi {
        let mut score = 0isize;
        for (&(bi, bj), patch) in c_logits {
            for r in 0..l {
                for c in 0..l {
                    let (i, j) = (bi * l + r, bj * l + c);
                    let predicted = patch[r * l + c] >= 0.0;
                    let target = i + j + 2 <= n;
                    if predicted == target {
                        score += 1;
                    }
                }
            }
        }
        if score > best_score {
            best_score = score;
            best = n;
        }
    }
    best
}

/// Rebuilds the adjacency estimate from reindexed entries: for
/// `i + j <= n_hat - 2` the entry at `(i, j)` lands at 1-based matrix
/// position `(n_hat - i, j + 1)`, thresholded at `sigma >= 0.5`. The diagonal
/// stays zero and the upper triangle mirrors the lower.
pub fn remap_b_to_a(
    b_entries: &BTreeMap<(usize, usize), f32>,
    n_hat: usize,
) -> Result<AdjMatrix, CodecError> {
    let mut a = AdjMatrix::zeros(n_hat);
    if n_hat >= 2 {
        for i in 0..=n_hat - 2 {
            for j in 0..=n_hat - 2 - i {
                let &logit = b_entries
                    .get(&(i, j))
                    .ok_or(CodecError::MissingEntry(i, j))?;
                if logit >= 0.0 {
                    // 0-based row n_hat - 1 - i, column j; strictly lower triangle
                    a.set_sym(n_hat - 1 - i, j);
                }
            }
        }
    }
    Ok(a)
}

/// Writes an embedding as a little-endian float32 vector with a `u32` length
/// header.
pub fn write_embedding(path: &std::path::Path, values: &[f32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(4 + 4 * values.len());
    buf.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf)
}

pub fn read_embedding(path: &std::path::Path) -> Result<Vec<f32>, CodecError> {
    let bad = |msg: String| CodecError::BadEmbeddingFile {
        path: path.to_path_buf(),
        msg,
    };
    let bytes = std::fs::read(path).map_err(|e| bad(e.to_string()))?;
    if bytes.len() < 4 {
        return Err(bad("missing length header".into()));
    }
    let m = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if bytes.len() != 4 + 4 * m {
        return Err(bad(format!(
            "expected {} payload bytes, found {}",
            4 * m,
            bytes.len() - 4
        )));
    }
    Ok(bytes[4..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellConfig;
    use crate::graph::{canonical_order, CanonicalGraph};
    use crate::patch::to_patch_grid;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_model(m: usize, l: usize, seed: u64) -> ModelParams {
        ModelParams::init(
            CellConfig {
                m,
                l,
                encoder_hidden: vec![2],
                decoder_hidden: vec![2],
                vae: false,
            },
            seed,
        )
    }

    fn canonical_path(n: usize) -> CanonicalGraph {
        canonical_order(&Graph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap())
    }

    #[test]
    fn single_block_grid_takes_one_invocation() {
        let model = tiny_model(2, 4, 0);
        let grid = to_patch_grid(&canonical_path(3), 4);
        let (_, invocations) = embed(&model, &grid);
        assert_eq!(invocations, 1);
    }

    #[test]
    fn four_vertices_at_unit_patch_take_ten_invocations() {
        let model = tiny_model(2, 1, 0);
        let grid = to_patch_grid(&canonical_path(4), 1);
        let (_, invocations) = embed(&model, &grid);
        assert_eq!(invocations, 10);
    }

    #[test]
    fn thousand_vertices_patch_ten_take_5050_invocations() {
        let model = tiny_model(2, 10, 0);
        let g = canonical_path(1000);
        let grid = to_patch_grid(&g, 10);
        assert_eq!(grid.n_blocks(), 100);
        let (_, invocations) = embed(&model, &grid);
        assert_eq!(invocations, 5050);
    }

    #[test]
    fn encoding_is_invariant_to_within_layer_order() {
        let model = tiny_model(4, 2, 9);
        let grid = to_patch_grid(&canonical_path(9), 2);
        let mut tape_a = Tape::new();
        let plain = encode_on_tape(&mut tape_a, &model, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut tape_b = Tape::new();
        let shuffled = encode_scheduled(&mut tape_b, &model, &grid, |_s, mut blocks| {
            blocks.shuffle(&mut rng);
            blocks
        });
        let a: Vec<u32> = tape_a
            .value(plain.root)
            .iter()
            .map(|f| f.to_bits())
            .collect();
        let b: Vec<u32> = tape_b
            .value(shuffled.root)
            .iter()
            .map(|f| f.to_bits())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn teacher_decode_mirrors_encoder_invocation_count() {
        let model = tiny_model(4, 1, 1);
        for nb in [1usize, 2, 5, 8] {
            let mut tape = Tape::new();
            let root = tape.vector(&[0.1, -0.2, 0.3, 0.4]);
            let trace = decode_teacher_forced(&mut tape, &model, root, nb);
            assert_eq!(trace.cell_invocations, nb * (nb + 1) / 2);
            assert_eq!(trace.blocks.len(), nb * (nb + 1) / 2);
        }
    }

    #[test]
    fn untrained_decode_terminates_within_the_cap() {
        let model = tiny_model(4, 1, 123);
        let result = decode(
            &model,
            &[0.5, -0.5, 0.25, 0.1],
            8,
            StopRule::TargetConsistent,
        );
        assert!(result.n_blocks <= 8);
        if !result.truncated {
            assert!(result.n_hat >= 1);
        }
        assert_eq!(result.a_hat.n(), result.n_hat);
    }

    #[test]
    fn free_decode_invocations_match_the_triangular_count() {
        let model = tiny_model(4, 1, 5);
        let result = decode(&model, &[0.0; 4], 6, StopRule::TargetConsistent);
        let nb = result.n_blocks;
        assert_eq!(result.cell_invocations, nb * (nb + 1) / 2);
    }

    #[test]
    fn verbatim_stop_rule_runs_one_extra_antidiagonal() {
        // force sigma(C) ~ 0 from the first antidiagonal: all weights zero,
        // C output bias strongly negative
        let mut model = tiny_model(4, 1, 0);
        for p in model.store.iter_mut() {
            p.values.fill(0.0);
        }
        let (m, l2) = (4, 1);
        let bias_id = model.f_dec.layers.last().unwrap().b;
        let mut bias = vec![0.0f32; 2 * m + 2 * l2];
        bias[2 * m + l2] = -40.0;
        model.store.get_mut(bias_id).values = bias;

        let target = decode(&model, &[0.1; 4], 8, StopRule::TargetConsistent);
        assert_eq!(target.n_blocks, 1);
        assert!(!target.truncated);
        let verbatim = decode(&model, &[0.1; 4], 8, StopRule::Verbatim);
        assert_eq!(verbatim.n_blocks, 2);
        assert!(!verbatim.truncated);
        assert!(
            verbatim.c_logits.contains_key(&(1, 0)),
            "second antidiagonal produced"
        );
    }

    #[test]
    fn remap_places_the_three_entries_of_a_3x3_estimate() {
        let mut b = BTreeMap::new();
        b.insert((0, 0), 5.0); // -> A[3,1]
        b.insert((0, 1), -5.0); // -> A[3,2]
        b.insert((1, 0), 5.0); // -> A[2,1]
        let a = remap_b_to_a(&b, 3).unwrap();
        assert!(a.get(2, 0));
        assert!(!a.get(2, 1));
        assert!(a.get(1, 0));
        // symmetry and zero diagonal
        assert!(a.get(0, 1));
        for i in 0..3 {
            assert!(!a.get(i, i));
        }
    }

    #[test]
    fn remap_of_a_single_vertex_is_all_zero() {
        let a = remap_b_to_a(&BTreeMap::new(), 1).unwrap();
        assert_eq!(a.n(), 1);
        assert!(!a.get(0, 0));
    }

    #[test]
    fn remap_five_vertices_matches_enumerated_formula() {
        // positive logit everywhere: every strictly-lower-triangle entry set
        let mut b = BTreeMap::new();
        for i in 0..5 {
            for j in 0..5 {
                if i + j <= 3 {
                    b.insert((i, j), 1.0);
                }
            }
        }
        let a = remap_b_to_a(&b, 5).unwrap();
        for i in 0..=3usize {
            for j in 0..=3 - i {
                assert!(
                    a.get(4 - i, j),
                    "B({i},{j}) must land at row {}, col {j}",
                    4 - i
                );
            }
        }
        for i in 0..5 {
            assert!(!a.get(i, i));
        }
    }

    #[test]
    fn remap_reports_missing_entries() {
        let b = BTreeMap::new();
        assert_eq!(
            remap_b_to_a(&b, 3).unwrap_err(),
            CodecError::MissingEntry(0, 0)
        );
    }

    #[test]
    fn remap_is_a_bijection_onto_the_strict_lower_triangle() {
        let n = 7usize;
        let mut hits = std::collections::HashSet::new();
        for i in 0..=n - 2 {
            for j in 0..=n - 2 - i {
                let (row, col) = (n - 1 - i, j);
                assert!(row > col, "target must be strictly below the diagonal");
                assert!(hits.insert((row, col)), "duplicate target ({row}, {col})");
            }
        }
        assert_eq!(hits.len(), n * (n - 1) / 2);
    }

    #[test]
    fn unit_patch_size_inference_returns_the_block_count() {
        let mut c = BTreeMap::new();
        for s in 0..5usize {
            for j in 0..=s {
                c.insert((s - j, j), vec![0.0f32]);
            }
        }
        assert_eq!(infer_exact_size(&c, 5, 1), 5);
    }

    #[test]
    fn exact_size_recovered_from_a_perfect_pattern() {
        // l = 4, true n = 6 -> 2 block antidiagonals
        let (l, n, nb) = (4usize, 6usize, 2usize);
        let mut c = BTreeMap::new();
        for bi in 0..nb {
            for bj in 0..nb - bi {
                let mut patch = vec![0.0f32; l * l];
                for r in 0..l {
                    for cc in 0..l {
                        let (i, j) = (bi * l + r, bj * l + cc);
                        patch[r * l + cc] = if i + j + 2 <= n { 4.0 } else { -4.0 };
                    }
                }
                c.insert((bi, bj), patch);
            }
        }
        assert_eq!(infer_exact_size(&c, nb, l), 6);
    }

    #[test]
    fn all_zero_logits_resolve_deterministically() {
        let (l, nb) = (4usize, 2usize);
        let mut c = BTreeMap::new();
        for bi in 0..nb {
            for bj in 0..nb - bi {
                c.insert((bi, bj), vec![0.0f32; l * l]);
            }
        }
        let first = infer_exact_size(&c, nb, l);
        for _ in 0..5 {
            assert_eq!(infer_exact_size(&c, nb, l), first);
        }
    }

    #[test]
    fn embedding_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let values = vec![0.5f32, -1.25, 3.75];
        write_embedding(&path, &values).unwrap();
        assert_eq!(read_embedding(&path).unwrap(), values);
        assert_eq!(std::fs::read(&path).unwrap().len(), 4 + 12);
    }

    #[test]
    fn truncated_embedding_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        std::fs::write(&path, [3u8, 0, 0, 0, 1, 2]).unwrap();
        assert!(matches!(
            read_embedding(&path),
            Err(CodecError::BadEmbeddingFile { .. })
        ));
    }
}
