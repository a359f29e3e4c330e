//! Independent float64 scalar re-implementation of the cells, the recursion
//! schedules and the loss, used as the ground truth for forward agreement
//! and finite-difference gradient checks. It reads parameters by name only
//! and never touches the tape machinery it is checking.

use std::collections::HashMap;

use regae_core::cells::ModelParams;
use regae_core::graph::CanonicalGraph;
use regae_core::loss::LossWeights;
use regae_core::patch::{to_patch_grid, PatchGrid};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

pub fn bce_logit(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

/// Snapshot of all parameters in float64, keyed by name.
#[derive(Clone)]
pub struct Oracle {
    pub m: usize,
    pub l: usize,
    pub values: HashMap<String, Vec<f64>>,
    pub shapes: HashMap<String, Vec<usize>>,
}

impl Oracle {
    pub fn new(model: &ModelParams) -> Self {
        let mut values = HashMap::new();
        let mut shapes = HashMap::new();
        for p in model.store.iter() {
            values.insert(p.name.clone(), p.values.iter().map(|&v| v as f64).collect());
            shapes.insert(p.name.clone(), p.shape.clone());
        }
        Oracle {
            m: model.config.m,
            l: model.config.l,
            values,
            shapes,
        }
    }

    pub fn perturb(&mut self, name: &str, index: usize, delta: f64) {
        self.values.get_mut(name).expect("parameter exists")[index] += delta;
    }

    fn layer_count(&self, prefix: &str) -> usize {
        (0..)
            .take_while(|i| self.values.contains_key(&format!("{prefix}.w{i}")))
            .count()
    }

    /// ELU hidden layers, linear output, mirroring the published structure.
    pub fn mlp(&self, prefix: &str, input: &[f64]) -> Vec<f64> {
        let layers = self.layer_count(prefix);
        let mut h = input.to_vec();
        for i in 0..layers {
            let w = &self.values[&format!("{prefix}.w{i}")];
            let b = &self.values[&format!("{prefix}.b{i}")];
            let shape = &self.shapes[&format!("{prefix}.w{i}")];
            let (rows, cols) = (shape[0], shape[1]);
            assert_eq!(h.len(), cols, "oracle mlp {prefix} layer {i} input size");
            let mut out = vec![0.0f64; rows];
            for r in 0..rows {
                let mut acc = b[r];
                for c in 0..cols {
                    acc += w[r * cols + c] * h[c];
                }
                out[r] = acc;
            }
            if i + 1 < layers {
                for v in &mut out {
                    *v = elu(*v);
                }
            }
            h = out;
        }
        h
    }

    /// The published encoder equation evaluated coordinate by coordinate.
    pub fn encoder_cell(&self, x0: Option<&[f64]>, x1: Option<&[f64]>, patch: &[f64]) -> Vec<f64> {
        let m = self.m;
        let zero = vec![0.0f64; m];
        let x0 = x0.unwrap_or(&zero);
        let x1 = x1.unwrap_or(&zero);
        let mut input = Vec::with_capacity(2 * m + patch.len());
        input.extend_from_slice(x0);
        input.extend_from_slice(x1);
        input.extend_from_slice(patch);
        let u = self.mlp("f_e", &input);
        let mut out = vec![0.0f64; m];
        for k in 0..m {
            let g0 = sigmoid(u[k]);
            let g1 = sigmoid(u[m + k]);
            let avg = x0[k] * g0 + x1[k] * (1.0 - g0);
            out[k] = avg * g1 + elu(u[2 * m + k]) * (1.0 - g1);
        }
        out
    }

    /// The published decoder equation: left/right gated halves plus logits.
    pub fn decoder_cell(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.m;
        let h = m / 2;
        let l2 = self.l * self.l;
        let u = self.mlp("f_d", y);
        let mut left = vec![0.0f64; h];
        let mut right = vec![0.0f64; h];
        for k in 0..h {
            left[k] = y[k] * sigmoid(u[k]) + elu(u[2 * h + k]) * (1.0 - sigmoid(u[k]));
            right[k] = y[h + k] * sigmoid(u[h + k]) + elu(u[3 * h + k]) * (1.0 - sigmoid(u[h + k]));
        }
        let b = u[4 * h..4 * h + l2].to_vec();
        let c = u[4 * h + l2..4 * h + 2 * l2].to_vec();
        (left, right, b, c)
    }

    pub fn border_cell(&self, prefix: &str, y: &[f64]) -> Vec<f64> {
        let h = self.m / 2;
        let u = self.mlp(prefix, y);
        (0..h)
            .map(|k| y[k] * sigmoid(u[k]) + elu(u[h + k]) * (1.0 - sigmoid(u[k])))
            .collect()
    }

    /// Full encoder recursion; returns the root embedding.
    pub fn encode(&self, grid: &PatchGrid) -> Vec<f64> {
        let nb = grid.n_blocks();
        let mut x: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
        for k in 1..=nb {
            let patch: Vec<f64> = grid.block(k, k).iter().map(|&v| v as f64).collect();
            x.insert((k, k), self.encoder_cell(None, None, &patch));
        }
        for span in 1..nb {
            for j in 1..=nb - span {
                let i = j + span;
                let patch: Vec<f64> = grid.block(i, j).iter().map(|&v| v as f64).collect();
                let below = x[&(i - 1, j)].clone();
                let right = x[&(i, j + 1)].clone();
                x.insert(
                    (i, j),
                    self.encoder_cell(Some(&below), Some(&right), &patch),
                );
            }
        }
        x[&(nb, 1)].clone()
    }

    /// Teacher-forced decoder recursion; returns `(B, C)` logits keyed by
    /// 0-based block coordinates.
    #[allow(clippy::type_complexity)]
    pub fn decode_teacher(
        &self,
        root: &[f64],
        n_blocks: usize,
    ) -> (
        HashMap<(usize, usize), Vec<f64>>,
        HashMap<(usize, usize), Vec<f64>>,
    ) {
        let h = self.m / 2;
        let mut b_out = HashMap::new();
        let mut c_out = HashMap::new();
        let mut ys: Vec<Vec<f64>> = vec![root.to_vec()];
        for s in 0..n_blocks {
            let outs: Vec<_> = ys.iter().map(|y| self.decoder_cell(y)).collect();
            for (j, (_, _, b, c)) in outs.iter().enumerate() {
                b_out.insert((s - j, j), b.clone());
                c_out.insert((s - j, j), c.clone());
            }
            if s + 1 < n_blocks {
                let border_left = self.border_cell("f_d1", &ys[s][..h]);
                let border_right = self.border_cell("f_d2", &ys[0][h..]);
                let mut next = Vec::with_capacity(s + 2);
                for j in 0..=s + 1 {
                    let left = if j <= s {
                        outs[j].0.clone()
                    } else {
                        border_left.clone()
                    };
                    let right = if j == 0 {
                        border_right.clone()
                    } else {
                        outs[j - 1].1.clone()
                    };
                    let mut y = left;
                    y.extend_from_slice(&right);
                    next.push(y);
                }
                ys = next;
            }
        }
        (b_out, c_out)
    }

    /// Class-split reconstruction loss evaluated from scratch.
    pub fn reconstruction_loss(
        &self,
        b: &HashMap<(usize, usize), Vec<f64>>,
        c: &HashMap<(usize, usize), Vec<f64>>,
        grid: &PatchGrid,
        root: &[f64],
        weights: &LossWeights,
    ) -> f64 {
        let l = self.l;
        let n = grid.vertex_count();
        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        let mut c_sum = 0.0f64;
        let mut c_count = 0usize;
        for (&(bi, bj), patch) in b {
            let c_patch = &c[&(bi, bj)];
            for r in 0..l {
                for cc in 0..l {
                    let (i, j) = (bi * l + r, bj * l + cc);
                    let inside = i + j + 2 <= n;
                    let c_target = if inside { 1.0 } else { 0.0 };
                    c_sum += bce_logit(c_patch[r * l + cc], c_target);
                    c_count += 1;
                    let logit = patch[r * l + cc];
                    if inside {
                        if grid.entry(n - i, j + 1) == 1.0 {
                            ones.push(bce_logit(logit, 1.0));
                        } else {
                            zeros.push(bce_logit(logit, 0.0));
                        }
                    } else if i + j < n {
                        zeros.push(bce_logit(logit, 0.0));
                    }
                }
            }
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let norm: f64 = root.iter().map(|&v| v * v).sum();
        weights.rpb as f64 * mean(&ones)
            + (1.0 - weights.rpb as f64) * mean(&zeros)
            + weights.mask_weight as f64 * (c_sum / c_count as f64)
            + weights.emb_norm_weight as f64 * norm
    }

    /// End-to-end plain-mode loss of one graph (encode, teacher decode,
    /// class-split loss with the root-norm penalty).
    pub fn graph_loss(&self, graph: &CanonicalGraph, weights: &LossWeights) -> f64 {
        let grid = to_patch_grid(graph, self.l);
        let root = self.encode(&grid);
        let (b, c) = self.decode_teacher(&root, grid.n_blocks());
        self.reconstruction_loss(&b, &c, &grid, &root, weights)
    }
}
