//! Dataset ingestion and preparation: the synthetic grid family, the TU
//! text format, train/valid/test splitting with permutation augmentation,
//! and the on-disk edge-list format.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{canonical_order, permute_graph, CanonicalGraph, Graph};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: non-integer token '{token}'")]
    NonIntegerToken {
        file: PathBuf,
        line: usize,
        token: String,
    },
    #[error("{file}:{line}: {msg}")]
    Malformed {
        file: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{file}:{line}: edge ({a}, {b}) crosses graphs {ga} and {gb}")]
    CrossGraphEdge {
        file: PathBuf,
        line: usize,
        a: usize,
        b: usize,
        ga: usize,
        gb: usize,
    },
    #[error("dataset contains an empty graph (id {0}); graphs must have n >= 1")]
    EmptyGraph(usize),
    #[error("split ratios {0:?} do not sum to 1")]
    BadRatios([f64; 3]),
    #[error("cannot split an empty dataset")]
    EmptyDataset,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}:{line}: invalid graph line '{text}'")]
    BadGraphLine {
        file: PathBuf,
        line: usize,
        text: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The `p x q` lattice grid: vertex `(r, c) = r*q + c`, edges to the right
/// and downward neighbors. `p*q` vertices, `p*(q-1) + q*(p-1)` edges.
pub fn grid_graph(p: usize, q: usize) -> Graph {
    let mut edges = Vec::new();
    for r in 0..p {
        for c in 0..q {
            let v = r * q + c;
            if c + 1 < q {
                edges.push((v, v + 1));
            }
            if r + 1 < p {
                edges.push((v, v + q));
            }
        }
    }
    Graph::new(p * q, edges).expect("lattice edges are valid")
}

/// All `p x q` grids for `p, q` in `lo..=hi` (ordered pairs).
pub fn generate_grid_range(lo: usize, hi: usize) -> Vec<Graph> {
    let mut out = Vec::new();
    for p in lo..=hi {
        for q in lo..=hi {
            out.push(grid_graph(p, q));
        }
    }
    out
}

/// The 49-graph grid dataset: all grids with sides in 2..=8.
pub fn generate_grid_dataset() -> Vec<Graph> {
    generate_grid_range(2, 8)
}

/// Five tiny graphs for desk-scale memorization runs: triangle, path-4,
/// star-4, 2x2 grid, 5-cycle.
pub fn memorization_set() -> Vec<Graph> {
    vec![
        Graph::new(3, [(0, 1), (1, 2), (2, 0)]).expect("triangle"),
        Graph::new(4, [(0, 1), (1, 2), (2, 3)]).expect("path"),
        Graph::new(4, [(0, 1), (0, 2), (0, 3)]).expect("star"),
        grid_graph(2, 2),
        Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).expect("cycle"),
    ]
}

/// Summary statistics of a graph list.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetStats {
    pub count: usize,
    pub avg_nodes: f64,
    pub max_nodes: usize,
    pub avg_edges: f64,
}

pub fn dataset_stats(graphs: &[Graph]) -> DatasetStats {
    let count = graphs.len();
    let total_nodes: usize = graphs.iter().map(Graph::vertex_count).sum();
    let total_edges: usize = graphs.iter().map(Graph::edge_count).sum();
    DatasetStats {
        count,
        avg_nodes: total_nodes as f64 / count.max(1) as f64,
        max_nodes: graphs.iter().map(Graph::vertex_count).max().unwrap_or(0),
        avg_edges: total_edges as f64 / count.max(1) as f64,
    }
}

/// Result of loading a TU-format dataset.
#[derive(Debug)]
pub struct TuDataset {
    pub graphs: Vec<(Graph, i64)>,
    /// Directed duplicates collapsed and self-loops dropped during loading.
    pub dropped_self_loops: usize,
    pub collapsed_duplicates: usize,
}

fn read_lines(path: &Path) -> Result<Vec<String>, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(io_err(path))?);
    }
    Ok(lines)
}

fn parse_int(tok: &str, file: &Path, line: usize) -> Result<i64, DataError> {
    tok.trim()
        .parse::<i64>()
        .map_err(|_| DataError::NonIntegerToken {
            file: file.to_path_buf(),
            line,
            token: tok.trim().to_string(),
        })
}

/// Loads the standard TU layout from `dir`:
/// `<name>_A.txt` (1-indexed `i, j` edge pairs), `<name>_graph_indicator.txt`
/// (vertex -> graph id), `<name>_graph_labels.txt` (graph id -> class).
///
/// Both directions of an undirected edge collapse into one; self-loops are
/// dropped and counted.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<TuDataset, DataError> {
    let a_path = dir.join(format!("{name}_A.txt"));
    let ind_path = dir.join(format!("{name}_graph_indicator.txt"));
    let lab_path = dir.join(format!("{name}_graph_labels.txt"));

    let indicator = read_lines(&ind_path)?;
    // graph id (1-based) of each vertex, plus each vertex's local index
    let mut graph_of = Vec::with_capacity(indicator.len());
    let mut local_index = Vec::with_capacity(indicator.len());
    let mut sizes: Vec<usize> = Vec::new();
    for (i, tok) in indicator.iter().enumerate() {
        if tok.trim().is_empty() {
            continue;
        }
        let gid = parse_int(tok, &ind_path, i + 1)?;
        if gid < 1 {
            return Err(DataError::Malformed {
                file: ind_path.clone(),
                line: i + 1,
                msg: format!("graph id {gid} < 1"),
            });
        }
        let gid = gid as usize;
        if gid > sizes.len() {
            sizes.resize(gid, 0);
        }
        graph_of.push(gid);
        local_index.push(sizes[gid - 1]);
        sizes[gid - 1] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(DataError::EmptyGraph(g + 1));
    }

    let mut edge_sets: Vec<std::collections::HashSet<(usize, usize)>> =
        sizes.iter().map(|_| Default::default()).collect();
    let mut dropped_self_loops = 0usize;
    let mut collapsed_duplicates = 0usize;
    for (i, text) in read_lines(&a_path)?.iter().enumerate() {
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let mut parts = text.split(',');
        let (a_tok, b_tok) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(DataError::Malformed {
                    file: a_path.clone(),
                    line: i + 1,
                    msg: format!("expected 'i, j', got '{text}'"),
                })
            }
        };
        let a = parse_int(a_tok, &a_path, i + 1)?;
        let b = parse_int(b_tok, &a_path, i + 1)?;
        let bounds = 1..=(graph_of.len() as i64);
        if !bounds.contains(&a) || !bounds.contains(&b) {
            return Err(DataError::Malformed {
                file: a_path.clone(),
                line: i + 1,
                msg: format!("vertex pair ({a}, {b}) outside 1..={}", graph_of.len()),
            });
        }
        let (a, b) = (a as usize - 1, b as usize - 1);
        if graph_of[a] != graph_of[b] {
            return Err(DataError::CrossGraphEdge {
                file: a_path.clone(),
                line: i + 1,
                a: a + 1,
                b: b + 1,
                ga: graph_of[a],
                gb: graph_of[b],
            });
        }
        if a == b {
            dropped_self_loops += 1;
            continue;
        }
        let (u, v) = (local_index[a], local_index[b]);
        if !edge_sets[graph_of[a] - 1].insert((u.min(v), u.max(v))) {
            collapsed_duplicates += 1;
        }
    }

    let labels = read_lines(&lab_path)?;
    let mut label_of = Vec::new();
    for (i, tok) in labels.iter().enumerate() {
        if tok.trim().is_empty() {
            continue;
        }
        label_of.push(parse_int(tok, &lab_path, i + 1)?);
    }
    if label_of.len() != sizes.len() {
        return Err(DataError::Malformed {
            file: lab_path.clone(),
            line: label_of.len() + 1,
            msg: format!("{} labels for {} graphs", label_of.len(), sizes.len()),
        });
    }

    let graphs = sizes
        .iter()
        .zip(edge_sets)
        .zip(&label_of)
        .map(|((&n, edges), &label)| {
            let g = Graph::new(n, edges).expect("TU edges validated during parse");
            (g, label)
        })
        .collect();
    Ok(TuDataset {
        graphs,
        dropped_self_loops,
        collapsed_duplicates,
    })
}

/// A 70/15/15 split of canonicalized graphs plus their permuted copies.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<CanonicalGraph>,
    pub valid: Vec<CanonicalGraph>,
    pub test: Vec<CanonicalGraph>,
    pub augmentation_factor: usize,
    pub manifest: SplitManifest,
}

/// Everything needed to rebuild the split bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub augmentation_factor: usize,
    pub train_base: Vec<usize>,
    pub valid_base: Vec<usize>,
    pub test_base: Vec<usize>,
}

/// Splits base graphs by shuffled index before augmentation, then adds `n_aug`
/// permuted copies of each base graph to its own subset. Each copy (and the
/// base) is canonicalized independently.
pub fn split_dataset(
    graphs: &[Graph],
    ratios: [f64; 3],
    n_aug: usize,
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    if graphs.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::BadRatios(ratios));
    }
    for (id, g) in graphs.iter().enumerate() {
        if g.vertex_count() == 0 {
            return Err(DataError::EmptyGraph(id));
        }
    }
    let k = graphs.len();
    let mut ids: Vec<usize> = (0..k).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n_train = (ratios[0] * k as f64).round() as usize;
    let n_valid = (ratios[1] * k as f64).round() as usize;
    let n_train = n_train.min(k);
    let n_valid = n_valid.min(k - n_train);

    let train_base = ids[..n_train].to_vec();
    let valid_base = ids[n_train..n_train + n_valid].to_vec();
    let test_base = ids[n_train + n_valid..].to_vec();

    let mut augment = |base: &[usize]| -> Vec<CanonicalGraph> {
        let mut out = Vec::with_capacity(base.len() * (n_aug + 1));
        for &id in base {
            out.push(canonical_order(&graphs[id]));
            for _ in 0..n_aug {
                let copy_seed: u64 = rng.random();
                out.push(canonical_order(&permute_graph(&graphs[id], copy_seed)));
            }
        }
        out
    };
    let train = augment(&train_base);
    let valid = augment(&valid_base);
    let test = augment(&test_base);

    let manifest = SplitManifest {
        seed,
        ratios,
        augmentation_factor: n_aug,
        train_base,
        valid_base,
        test_base,
    };
    Ok(DatasetSplit {
        train,
        valid,
        test,
        augmentation_factor: n_aug,
        manifest,
    })
}

/// The memorization set as a ready split: all five graphs serve as train,
/// validation and test at once, which is the intended use of that dataset.
pub fn memorization_split() -> DatasetSplit {
    let graphs: Vec<CanonicalGraph> = memorization_set().iter().map(canonical_order).collect();
    let ids: Vec<usize> = (0..graphs.len()).collect();
    DatasetSplit {
        train: graphs.clone(),
        valid: graphs.clone(),
        test: graphs,
        augmentation_factor: 0,
        manifest: SplitManifest {
            seed: 0,
            ratios: [0.7, 0.15, 0.15],
            augmentation_factor: 0,
            train_base: ids.clone(),
            valid_base: ids.clone(),
            test_base: ids,
        },
    }
}

/// Writes a graph as a line-based edge list: first line `n`, then `i j` per
/// edge with 0-based endpoints.
pub fn write_graph(path: &Path, g: &Graph) -> Result<(), DataError> {
    let mut buf = format!("{}\n", g.vertex_count());
    for &(a, b) in g.edges() {
        buf.push_str(&format!("{a} {b}\n"));
    }
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_graph(path: &Path) -> Result<Graph, DataError> {
    let lines = read_lines(path)?;
    let mut it = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (ln, first) = it.next().ok_or_else(|| DataError::BadGraphLine {
        file: path.to_path_buf(),
        line: 1,
        text: String::new(),
    })?;
    let n = parse_int(first, path, ln + 1)? as usize;
    let mut edges = Vec::new();
    for (ln, text) in it {
        let mut parts = text.split_whitespace();
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(DataError::BadGraphLine {
                    file: path.to_path_buf(),
                    line: ln + 1,
                    text: text.clone(),
                })
            }
        };
        let a = parse_int(a, path, ln + 1)? as usize;
        let b = parse_int(b, path, ln + 1)? as usize;
        edges.push((a, b));
    }
    Graph::new(n, edges).map_err(|e| DataError::BadGraphLine {
        file: path.to_path_buf(),
        line: 0,
        text: e.to_string(),
    })
}

/// Loads a dataset path: either a single edge-list file or a directory of
/// `*.txt` edge-list files taken in sorted filename order.
pub fn load_graph_path(path: &Path) -> Result<Vec<Graph>, DataError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        files.iter().map(|f| read_graph(f)).collect()
    } else {
        Ok(vec![read_graph(path)?])
    }
}

pub fn write_manifest(path: &Path, manifest: &SplitManifest) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes the 49 grid graphs plus a stats summary into `dir`.
pub fn write_grid_dataset(dir: &Path) -> Result<DatasetStats, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for p in 2..=8 {
        for q in 2..=8 {
            let g = grid_graph(p, q);
            write_graph(&dir.join(format!("grid_{p}x{q}.txt")), &g)?;
        }
    }
    let stats = dataset_stats(&generate_grid_dataset());
    let summary = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    text.push('\n');
    fs::write(&summary, text).map_err(io_err(&summary))?;
    Ok(stats)
}
