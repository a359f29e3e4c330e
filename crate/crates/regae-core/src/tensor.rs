//! Minimal dense float32 tensors with reverse-mode gradients.
//!
//! A [`Tape`] records every primitive applied during a forward pass;
//! [`Tape::backward`] then walks the record in reverse and accumulates
//! gradients into the parameters reachable from the loss. A parameter used
//! many times (the recursion reuses cell weights once per block) receives the
//! sum of its per-use gradients: binding a parameter is memoized, so all uses
//! share one node.
//!
//! Shape errors are programming errors here, not runtime conditions, and
//! panic with the primitive name and the offending shapes.

use std::collections::HashMap;

use crate::optim::{ParamId, ParamStore};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    ParamUse(ParamId),
    MatMul { a: Var, b: Var },
    MatVec { w: Var, x: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sigmoid { x: Var },
    Elu { x: Var },
    Exp { x: Var },
    Scale { x: Var, c: f32 },
    AddScalar { x: Var },
    Sum { x: Var },
    Mean { x: Var },
    SqNorm { x: Var },
    Concat { parts: Vec<Var> },
    Slice { x: Var, start: usize },
    BceWithLogits { logits: Var, targets: Vec<f32> },
    Gather { x: Var, indices: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    values: Vec<f32>,
    op: Op,
}

/// Append-only record of one forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
}

pub(crate) fn sigmoid_f32(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn elu_f32(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

/// Numerically stable binary cross-entropy from a logit.
pub(crate) fn bce_logit_f32(z: f32, t: f32) -> f32 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f32] {
        &self.nodes[v.0].values
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar_value(&self, v: Var) -> f32 {
        debug_assert_eq!(self.nodes[v.0].values.len(), 1);
        self.nodes[v.0].values[0]
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<f32>, op: Op) -> Var {
        debug_assert_eq!(numel(&shape), values.len());
        self.nodes.push(Node { shape, values, op });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant input.
    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<f32>) -> Var {
        assert_eq!(
            numel(&shape),
            values.len(),
            "constant: {} values do not fill shape {:?}",
            values.len(),
            shape
        );
        self.push(shape, values, Op::Leaf)
    }

    pub fn vector(&mut self, values: &[f32]) -> Var {
        self.constant(vec![values.len()], values.to_vec())
    }

    pub fn zeros(&mut self, len: usize) -> Var {
        self.constant(vec![len], vec![0.0; len])
    }

    /// Binds a parameter onto the tape. Uses are memoized: every call for the
    /// same parameter returns the same node, which is what makes gradients of
    /// reused parameters accumulate.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let p = store.get(id);
        let v = self.push(p.shape.clone(), p.values.clone(), Op::ParamUse(id));
        self.bound.insert(id, v);
        v
    }

    /// `[r, k] x [k, c] -> [r, c]` matrix product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            panic!("matmul: incompatible shapes {sa:?} and {sb:?}");
        }
        let (r, k, c) = (sa[0], sa[1], sb[1]);
        let (va, vb) = (&self.nodes[a.0].values, &self.nodes[b.0].values);
        let mut out = vec![0.0f32; r * c];
        for i in 0..r {
            for t in 0..k {
                let ait = va[i * k + t];
                if ait == 0.0 {
                    continue;
                }
                for j in 0..c {
                    out[i * c + j] += ait * vb[t * c + j];
                }
            }
        }
        self.push(vec![r, c], out, Op::MatMul { a, b })
    }

    /// `[r, k] x [k] -> [r]` matrix-vector product.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (sw, sx) = (self.shape(w).to_vec(), self.shape(x).to_vec());
        if sw.len() != 2 || sx.len() != 1 || sw[1] != sx[0] {
            panic!("matvec: incompatible shapes {sw:?} and {sx:?}");
        }
        let (r, k) = (sw[0], sw[1]);
        let (vw, vx) = (&self.nodes[w.0].values, &self.nodes[x.0].values);
        let mut out = vec![0.0f32; r];
        for i in 0..r {
            let row = &vw[i * k..(i + 1) * k];
            let mut acc = 0.0f32;
            for t in 0..k {
                acc += row[t] * vx[t];
            }
            out[i] = acc;
        }
        self.push(vec![r], out, Op::MatVec { w, x })
    }

    fn binary_elementwise(
        &mut self,
        name: &str,
        a: Var,
        b: Var,
    ) -> (Vec<usize>, Vec<f32>, Vec<f32>) {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            panic!("{name}: incompatible shapes {sa:?} and {sb:?}");
        }
        (
            sa.to_vec(),
            self.nodes[a.0].values.clone(),
            self.nodes[b.0].values.clone(),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (shape, va, vb) = self.binary_elementwise("add", a, b);
        let out = va.iter().zip(&vb).map(|(x, y)| x + y).collect();
        self.push(shape, out, Op::Add { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (shape, va, vb) = self.binary_elementwise("mul", a, b);
        let out = va.iter().zip(&vb).map(|(x, y)| x * y).collect();
        self.push(shape, out, Op::Mul { a, b })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let out = self.nodes[x.0]
            .values
            .iter()
            .map(|&v| sigmoid_f32(v))
            .collect();
        self.push(shape, out, Op::Sigmoid { x })
    }

    pub fn elu(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let out = self.nodes[x.0].values.iter().map(|&v| elu_f32(v)).collect();
        self.push(shape, out, Op::Elu { x })
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let out = self.nodes[x.0].values.iter().map(|&v| v.exp()).collect();
        self.push(shape, out, Op::Exp { x })
    }

    pub fn scale(&mut self, x: Var, c: f32) -> Var {
        let shape = self.shape(x).to_vec();
        let out = self.nodes[x.0].values.iter().map(|&v| v * c).collect();
        self.push(shape, out, Op::Scale { x, c })
    }

    pub fn add_scalar(&mut self, x: Var, c: f32) -> Var {
        let shape = self.shape(x).to_vec();
        let out = self.nodes[x.0].values.iter().map(|&v| v + c).collect();
        self.push(shape, out, Op::AddScalar { x })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.nodes[x.0].values.iter().sum();
        self.push(vec![], vec![total], Op::Sum { x })
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let vals = &self.nodes[x.0].values;
        assert!(!vals.is_empty(), "mean: empty input");
        let total: f32 = vals.iter().sum();
        let m = total / vals.len() as f32;
        self.push(vec![], vec![m], Op::Mean { x })
    }

    /// Squared L2 norm, a scalar.
    pub fn sq_norm(&mut self, x: Var) -> Var {
        let total = self.nodes[x.0].values.iter().map(|&v| v * v).sum();
        self.push(vec![], vec![total], Op::SqNorm { x })
    }

    /// Concatenation of 1-D vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat: no parts");
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                panic!("concat: expected 1-D parts, got shape {:?}", self.shape(p));
            }
            out.extend_from_slice(&self.nodes[p.0].values);
        }
        let len = out.len();
        self.push(
            vec![len],
            out,
            Op::Concat {
                parts: parts.to_vec(),
            },
        )
    }

    /// Contiguous slice of a 1-D vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let sx = self.shape(x).to_vec();
        if sx.len() != 1 || start + len > sx[0] {
            panic!("slice: [{start}, {start}+{len}) out of shape {sx:?}");
        }
        let out = self.nodes[x.0].values[start..start + len].to_vec();
        self.push(vec![len], out, Op::Slice { x, start })
    }

    /// Per-element binary cross-entropy of logits against constant targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f32]) -> Var {
        let shape = self.shape(logits).to_vec();
        if numel(&shape) != targets.len() {
            panic!(
                "bce_with_logits: {} targets for logits of shape {:?}",
                targets.len(),
                shape
            );
        }
        let out = self.nodes[logits.0]
            .values
            .iter()
            .zip(targets)
            .map(|(&z, &t)| bce_logit_f32(z, t))
            .collect();
        self.push(
            shape,
            out,
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
            },
        )
    }

    /// Masked selection: picks the listed flat indices into a 1-D vector.
    pub fn gather(&mut self, x: Var, indices: Vec<usize>) -> Var {
        let n = self.nodes[x.0].values.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            panic!("gather: index {bad} out of bounds for {n} elements");
        }
        let out = indices.iter().map(|&i| self.nodes[x.0].values[i]).collect();
        self.push(vec![indices.len()], out, Op::Gather { x, indices })
    }

    /// Reverse pass from a scalar loss; accumulates into `store` gradients.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) {
        assert_eq!(
            self.nodes[loss.0].values.len(),
            1,
            "backward: loss must be scalar, got shape {:?}",
            self.nodes[loss.0].shape
        );
        let mut grads: Vec<Option<Vec<f32>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::ParamUse(pid) => {
                    let p = store.get_mut(*pid);
                    for (pg, gg) in p.grad.iter_mut().zip(&g) {
                        *pg += gg;
                    }
                }
                Op::MatMul { a, b } => {
                    let (r, c) = (node.shape[0], node.shape[1]);
                    let k = self.nodes[a.0].shape[1];
                    let va = &self.nodes[a.0].values;
                    let vb = &self.nodes[b.0].values;
                    {
                        let ga = Self::slot(&mut grads, a.0, r * k);
                        for i in 0..r {
                            for t in 0..k {
                                let mut acc = 0.0;
                                for j in 0..c {
                                    acc += g[i * c + j] * vb[t * c + j];
                                }
                                ga[i * k + t] += acc;
                            }
                        }
                    }
                    let gb = Self::slot(&mut grads, b.0, k * c);
                    for t in 0..k {
                        for j in 0..c {
                            let mut acc = 0.0;
                            for i in 0..r {
                                acc += va[i * k + t] * g[i * c + j];
                            }
                            gb[t * c + j] += acc;
                        }
                    }
                }
                Op::MatVec { w, x } => {
                    let r = node.shape[0];
                    let k = self.nodes[x.0].shape[0];
                    let vw = &self.nodes[w.0].values;
                    let vx = &self.nodes[x.0].values;
                    {
                        let gw = Self::slot(&mut grads, w.0, r * k);
                        for i in 0..r {
                            let gi = g[i];
                            if gi == 0.0 {
                                continue;
                            }
                            for t in 0..k {
                                gw[i * k + t] += gi * vx[t];
                            }
                        }
                    }
                    let gx = Self::slot(&mut grads, x.0, k);
                    for i in 0..r {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for t in 0..k {
                            gx[t] += gi * vw[i * k + t];
                        }
                    }
                }
                Op::Add { a, b } => {
                    for &side in &[a.0, b.0] {
                        let gs = Self::slot(&mut grads, side, g.len());
                        for (o, &gg) in gs.iter_mut().zip(&g) {
                            *o += gg;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let va = self.nodes[a.0].values.clone();
                    let vb = self.nodes[b.0].values.clone();
                    {
                        let ga = Self::slot(&mut grads, a.0, g.len());
                        for ((o, &gg), &v) in ga.iter_mut().zip(&g).zip(&vb) {
                            *o += gg * v;
                        }
                    }
                    let gb = Self::slot(&mut grads, b.0, g.len());
                    for ((o, &gg), &v) in gb.iter_mut().zip(&g).zip(&va) {
                        *o += gg * v;
                    }
                }
                Op::Sigmoid { x } => {
                    let gx = Self::slot(&mut grads, x.0, g.len());
                    for ((o, &gg), &s) in gx.iter_mut().zip(&g).zip(&node.values) {
                        *o += gg * s * (1.0 - s);
                    }
                }
                Op::Elu { x } => {
                    let ins = self.nodes[x.0].values.clone();
                    let gx = Self::slot(&mut grads, x.0, g.len());
                    for (k, (o, &gg)) in gx.iter_mut().zip(&g).enumerate() {
                        let d = if ins[k] > 0.0 {
                            1.0
                        } else {
                            node.values[k] + 1.0
                        };
                        *o += gg * d;
                    }
                }
                Op::Exp { x } => {
                    let gx = Self::slot(&mut grads, x.0, g.len());
                    for ((o, &gg), &e) in gx.iter_mut().zip(&g).zip(&node.values) {
                        *o += gg * e;
                    }
                }
                Op::Scale { x, c } => {
                    let gx = Self::slot(&mut grads, x.0, g.len());
                    for (o, &gg) in gx.iter_mut().zip(&g) {
                        *o += gg * c;
                    }
                }
                Op::AddScalar { x } => {
                    let gx = Self::slot(&mut grads, x.0, g.len());
                    for (o, &gg) in gx.iter_mut().zip(&g) {
                        *o += gg;
                    }
                }
                Op::Sum { x } => {
                    let n = self.nodes[x.0].values.len();
                    let gx = Self::slot(&mut grads, x.0, n);
                    for o in gx.iter_mut() {
                        *o += g[0];
                    }
                }
                Op::Mean { x } => {
                    let n = self.nodes[x.0].values.len();
                    let gx = Self::slot(&mut grads, x.0, n);
                    let d = g[0] / n as f32;
                    for o in gx.iter_mut() {
                        *o += d;
                    }
                }
                Op::SqNorm { x } => {
                    let vx = self.nodes[x.0].values.clone();
                    let gx = Self::slot(&mut grads, x.0, vx.len());
                    for (o, &v) in gx.iter_mut().zip(&vx) {
                        *o += 2.0 * v * g[0];
                    }
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p.0].values.len();
                        let gp = Self::slot(&mut grads, p.0, len);
                        for (o, &gg) in gp.iter_mut().zip(&g[offset..offset + len]) {
                            *o += gg;
                        }
                        offset += len;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.nodes[x.0].values.len();
                    let gx = Self::slot(&mut grads, x.0, n);
                    for (k, &gg) in g.iter().enumerate() {
                        gx[start + k] += gg;
                    }
                }
                Op::BceWithLogits { logits, targets } => {
                    let vz = self.nodes[logits.0].values.clone();
                    let gz = Self::slot(&mut grads, logits.0, vz.len());
                    for k in 0..vz.len() {
                        gz[k] += g[k] * (sigmoid_f32(vz[k]) - targets[k]);
                    }
                }
                Op::Gather { x, indices } => {
                    let n = self.nodes[x.0].values.len();
                    let gx = Self::slot(&mut grads, x.0, n);
                    for (k, &i) in indices.iter().enumerate() {
                        gx[i] += g[k];
                    }
                }
            }
        }
    }

    fn slot(grads: &mut [Option<Vec<f32>>], id: usize, len: usize) -> &mut Vec<f32> {
        grads[id].get_or_insert_with(|| vec![0.0; len])
    }
}
