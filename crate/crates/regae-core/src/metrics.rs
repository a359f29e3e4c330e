//! Free-running evaluation: encode, decode with the stop rule, compare.
//!
//! Precision/recall/F1 target the ones class over strictly-lower-triangle
//! entries, computed per graph and averaged with weight equal to the true
//! vertex count. When predicted and true sizes differ, both matrices are
//! padded with zero rows/columns (the diagonal stays zero) before counting.

use serde::{Deserialize, Serialize};

use crate::cells::ModelParams;
use crate::codec::{decode, embed, AdjMatrix, DecodeResult, StopRule};
use crate::graph::CanonicalGraph;
use crate::patch::to_patch_grid;

/// Aggregated evaluation metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Fraction of graphs whose vertex count was recovered exactly.
    pub size_accuracy: f64,
    /// Mean absolute size error divided by the mean true size.
    pub mean_size_error: f64,
    pub graphs: usize,
}

/// Per-graph evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerGraphEval {
    pub n: usize,
    pub n_hat: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub truncated: bool,
}

/// Class-1 precision/recall/F1 from a confusion count, with the degenerate
/// conventions: both classes empty scores 1.0, one-sided emptiness scores 0.
fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    if tp + fp == 0 && tp + fn_ == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let r = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };
    (p, r, f1)
}

/// Compares a prediction against the truth over the padded lower triangle.
pub fn compare_adjacency(truth: &AdjMatrix, predicted: &AdjMatrix) -> (f64, f64, f64) {
    let n = truth.n().max(predicted.n());
    let t = truth.padded(n);
    let p = predicted.padded(n);
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for i in 0..n {
        for j in 0..i {
            match (t.get(i, j), p.get(i, j)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    prf(tp, fp, fn_)
}

fn eval_one(
    model: &ModelParams,
    graph: &CanonicalGraph,
    max_blocks: usize,
    stop_rule: StopRule,
) -> PerGraphEval {
    let grid = to_patch_grid(graph, model.config.l);
    let (embedding, _) = embed(model, &grid);
    let result: DecodeResult = decode(model, &embedding, max_blocks, stop_rule);
    let truth = AdjMatrix::from_graph(&graph.graph);
    let (precision, recall, f1) = compare_adjacency(&truth, &result.a_hat);
    PerGraphEval {
        n: graph.vertex_count(),
        n_hat: result.n_hat,
        precision,
        recall,
        f1,
        truncated: result.truncated,
    }
}

/// Evaluates every graph and aggregates with weight equal to the true size.
/// `threads > 1` splits the graphs across scoped threads; rows are merged in
/// input order, so results do not depend on the thread count.
pub fn evaluate(
    graphs: &[CanonicalGraph],
    model: &ModelParams,
    max_blocks: usize,
    stop_rule: StopRule,
    threads: usize,
) -> (MetricsReport, Vec<PerGraphEval>) {
    let rows: Vec<PerGraphEval> = if threads <= 1 || graphs.len() < 2 {
        graphs
            .iter()
            .map(|g| eval_one(model, g, max_blocks, stop_rule))
            .collect()
    } else {
        let threads = threads.min(graphs.len());
        let chunk = graphs.len().div_ceil(threads);
        let mut rows: Vec<Option<PerGraphEval>> = vec![None; graphs.len()];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (c, slice) in graphs.chunks(chunk).enumerate() {
                handles.push((
                    c * chunk,
                    scope.spawn(move || {
                        slice
                            .iter()
                            .map(|g| eval_one(model, g, max_blocks, stop_rule))
                            .collect::<Vec<_>>()
                    }),
                ));
            }
            for (base, handle) in handles {
                for (k, row) in handle
                    .join()
                    .expect("evaluation thread panicked")
                    .into_iter()
                    .enumerate()
                {
                    rows[base + k] = Some(row);
                }
            }
        });
        rows.into_iter()
            .map(|r| r.expect("all rows filled"))
            .collect()
    };

    let report = summarize(&rows);
    (report, rows)
}

/// Size-weighted aggregation of per-graph rows.
pub fn summarize(rows: &[PerGraphEval]) -> MetricsReport {
    if rows.is_empty() {
        return MetricsReport {
            f1: 0.0,
            precision: 0.0,
            recall: 0.0,
            size_accuracy: 0.0,
            mean_size_error: 0.0,
            graphs: 0,
        };
    }
    let weight_sum: f64 = rows.iter().map(|r| r.n as f64).sum();
    let wmean = |f: &dyn Fn(&PerGraphEval) -> f64| -> f64 {
        rows.iter().map(|r| r.n as f64 * f(r)).sum::<f64>() / weight_sum
    };
    let exact = rows.iter().filter(|r| r.n_hat == r.n).count();
    let abs_err: f64 = rows
        .iter()
        .map(|r| (r.n_hat as f64 - r.n as f64).abs())
        .sum();
    MetricsReport {
        f1: wmean(&|r| r.f1),
        precision: wmean(&|r| r.precision),
        recall: wmean(&|r| r.recall),
        size_accuracy: exact as f64 / rows.len() as f64,
        mean_size_error: abs_err / weight_sum,
        graphs: rows.len(),
    }
}

/// Mean and standard deviation of reports across seeds (sample std, zero for
/// a single run).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub mean: MetricsReport,
    pub std: MetricsReport,
}

pub fn aggregate_reports(reports: &[MetricsReport]) -> AggregateReport {
    assert!(!reports.is_empty(), "nothing to aggregate");
    let k = reports.len() as f64;
    let stat = |f: fn(&MetricsReport) -> f64| -> (f64, f64) {
        let mean = reports.iter().map(f).sum::<f64>() / k;
        let std = if reports.len() < 2 {
            0.0
        } else {
            (reports.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        };
        (mean, std)
    };
    let f1 = stat(|r| r.f1);
    let precision = stat(|r| r.precision);
    let recall = stat(|r| r.recall);
    let size_accuracy = stat(|r| r.size_accuracy);
    let mean_size_error = stat(|r| r.mean_size_error);
    let graphs = reports.iter().map(|r| r.graphs).sum();
    AggregateReport {
        runs: reports.len(),
        mean: MetricsReport {
            f1: f1.0,
            precision: precision.0,
            recall: recall.0,
            size_accuracy: size_accuracy.0,
            mean_size_error: mean_size_error.0,
            graphs,
        },
        std: MetricsReport {
            f1: f1.1,
            precision: precision.1,
            recall: recall.1,
            size_accuracy: size_accuracy.1,
            mean_size_error: mean_size_error.1,
            graphs,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn adj(n: usize, edges: &[(usize, usize)]) -> AdjMatrix {
        AdjMatrix::from_graph(&Graph::new(n, edges.iter().copied()).unwrap())
    }

    #[test]
    fn identical_graphs_score_perfectly() {
        let a = adj(4, &[(0, 1), (1, 2), (2, 3)]);
        let (p, r, f1) = compare_adjacency(&a, &a.clone());
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_predictions_with_true_edges_score_zero() {
        let truth = adj(3, &[(0, 1)]);
        let empty = AdjMatrix::zeros(3);
        let (p, r, f1) = compare_adjacency(&truth, &empty);
        assert_eq!(r, 0.0);
        assert_eq!(f1, 0.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn edgeless_pair_counts_as_perfect() {
        let truth = AdjMatrix::zeros(3);
        let predicted = AdjMatrix::zeros(3);
        assert_eq!(compare_adjacency(&truth, &predicted), (1.0, 1.0, 1.0));
    }

    #[test]
    fn size_mismatch_pads_with_zero_diagonal() {
        // truth n = 4 path, prediction n = 5 with the same edges plus one
        // spurious edge touching the padded vertex
        let truth = adj(4, &[(0, 1), (1, 2), (2, 3)]);
        let predicted = adj(5, &[(0, 1), (1, 2), (2, 3), (4, 0)]);
        let (p, r, f1) = compare_adjacency(&truth, &predicted);
        // padded lower triangle: tp = 3, fp = 1, fn = 0
        let (ep, er) = (3.0 / 4.0, 1.0);
        assert!((p - ep).abs() < 1e-12);
        assert!((r - er).abs() < 1e-12);
        assert!((f1 - 2.0 * ep * er / (ep + er)).abs() < 1e-12);
    }

    #[test]
    fn hand_padded_identical_content_differs_only_in_size() {
        let truth = adj(4, &[(0, 1), (1, 2), (2, 3)]);
        let predicted = adj(5, &[(0, 1), (1, 2), (2, 3)]);
        let (p, r, f1) = compare_adjacency(&truth, &predicted);
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
        let rows = vec![PerGraphEval {
            n: 4,
            n_hat: 5,
            precision: p,
            recall: r,
            f1,
            truncated: false,
        }];
        let report = summarize(&rows);
        assert_eq!(report.size_accuracy, 0.0);
        assert!((report.mean_size_error - 0.25).abs() < 1e-12);
    }

    #[test]
    fn summary_weights_by_graph_size() {
        let rows = vec![
            PerGraphEval {
                n: 1,
                n_hat: 1,
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                truncated: false,
            },
            PerGraphEval {
                n: 3,
                n_hat: 3,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                truncated: false,
            },
        ];
        let report = summarize(&rows);
        assert!((report.f1 - 0.75).abs() < 1e-12);
        assert_eq!(report.size_accuracy, 1.0);
        assert_eq!(report.mean_size_error, 0.0);
    }

    #[test]
    fn aggregation_reports_mean_and_sample_std() {
        let mk = |f1: f64| MetricsReport {
            f1,
            precision: f1,
            recall: f1,
            size_accuracy: 1.0,
            mean_size_error: 0.0,
            graphs: 2,
        };
        let agg = aggregate_reports(&[mk(0.4), mk(0.6)]);
        assert!((agg.mean.f1 - 0.5).abs() < 1e-12);
        let expect_std = ((0.01f64 + 0.01) / 1.0).sqrt();
        assert!((agg.std.f1 - expect_std).abs() < 1e-12);
        assert_eq!(agg.runs, 2);
    }
}
