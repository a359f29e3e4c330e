//! Lower-triangular `l x l` block decomposition of the adjacency matrix.
//!
//! A graph with `n` vertices splits into `ceil(n/l)` block rows. Block
//! `(I, J)` (1-based, `J <= I`) covers global rows `(I-1)*l+1 ..= I*l` and
//! columns `(J-1)*l+1 ..= J*l`. Entries strictly below the diagonal inside
//! the matrix carry the adjacency bit; entries at or above the diagonal and
//! entries past `n` are filled with -1.

use crate::graph::CanonicalGraph;

/// Triangular index of 1-based block coordinates `(I, J)`, `J <= I`.
fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(1 <= j && j <= i);
    (i - 1) * i / 2 + (j - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    l: usize,
    n: usize,
    n_blocks: usize,
    /// Row-major `l*l` entries over {-1, 0, 1}, one per lower-triangle block.
    blocks: Vec<Vec<f32>>,
}

impl PatchGrid {
    pub fn patch_side(&self) -> usize {
        self.l
    }

    /// True vertex count of the source graph.
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Entries of block `(I, J)`, 1-based with `J <= I`, row-major.
    pub fn block(&self, i: usize, j: usize) -> &[f32] {
        &self.blocks[tri_index(i, j)]
    }

    /// Entry at global 1-based matrix position `(gi, gj)`; positions must lie
    /// inside an existing lower-triangle block.
    pub fn entry(&self, gi: usize, gj: usize) -> f32 {
        let (bi, bj) = ((gi - 1) / self.l + 1, (gj - 1) / self.l + 1);
        let (r, c) = ((gi - 1) % self.l, (gj - 1) % self.l);
        self.block(bi, bj)[r * self.l + c]
    }
}

/// Decomposes a canonical graph into its patch grid.
pub fn to_patch_grid(g: &CanonicalGraph, l: usize) -> PatchGrid {
    assert!(l >= 1, "patch side must be positive");
    let n = g.vertex_count();
    let n_blocks = n.div_ceil(l);
    let mut blocks = Vec::with_capacity(n_blocks * (n_blocks + 1) / 2);
    for bi in 1..=n_blocks {
        for bj in 1..=bi {
            let mut data = vec![-1.0f32; l * l];
            for r in 0..l {
                let gi = (bi - 1) * l + r + 1;
                if gi > n {
                    continue;
                }
                for c in 0..l {
                    let gj = (bj - 1) * l + c + 1;
                    if gj >= gi || gj > n {
                        continue;
                    }
                    data[r * l + c] = if g.graph.has_edge(gi - 1, gj - 1) {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
            blocks.push(data);
        }
    }
    PatchGrid {
        l,
        n,
        n_blocks,
        blocks,
    }
}
