//! All-pairs Pearson correlation over a voxel set with a cache-blocked
//! parallel kernel, plus the thresholded sparse edge set it produces.
//!
//! Rows are already z-scored (population statistics), so the correlation
//! matrix is (1/T) S S^T. The kernel walks tile_size x tile_size output
//! blocks of the upper triangle; each worker owns disjoint blocks and a
//! private edge buffer. Every pair's dot product runs the same fixed-order
//! four-lane summation, so results are bit-identical for any tile size or
//! worker count; the merge step just concatenates and sorts.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{BrainGraph, Edge};
use crate::parallel::run_with_workers;
use crate::voxels::{zscore, VoxelSet};

#[derive(Debug, Clone)]
pub struct PccConfig {
    /// Edges keep pairs with signed correlation strictly above this.
    pub threshold: f64,
    /// Voxels per tile edge in the blocked kernel.
    pub tile_size: usize,
    /// Worker threads; `None` means use the ambient pool.
    pub workers: Option<usize>,
}

impl Default for PccConfig {
    fn default() -> Self {
        PccConfig {
            threshold: 0.9,
            tile_size: 512,
            workers: None,
        }
    }
}

impl PccConfig {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(
                "threshold",
                format!("{} not in (0, 1)", self.threshold),
            ));
        }
        if self.tile_size == 0 {
            return Err(Error::invalid("tile_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// Pearson's correlation coefficient between two equal-length series.
///
/// Result is clamped to [-1, 1] against rounding. Zero-variance input is an
/// error; post-ingest rows always have positive variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("series", "need at least 2 samples"));
    }
    let t = x.len() as f64;
    let mx = x.iter().sum::<f64>() / t;
    let my = y.iter().sum::<f64>() / t;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Number of unordered pairs n(n-1)/2, exact in u64 for n up to 2^32 - 1.
pub fn pair_count(n: u64) -> u64 {
    if n < 2 {
        return 0;
    }
    if n % 2 == 0 {
        (n / 2) * (n - 1)
    } else {
        n * ((n - 1) / 2)
    }
}

/// Fixed-order four-lane dot product of f32 rows in f64.
///
/// The summation order depends only on the row length, never on tiling or
/// scheduling, which is what makes the whole kernel deterministic.
#[inline]
fn dot_rows(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let quads = a.len() / 4;
    for i in 0..quads {
        let j = i * 4;
        acc[0] += a[j] as f64 * b[j] as f64;
        acc[1] += a[j + 1] as f64 * b[j + 1] as f64;
        acc[2] += a[j + 2] as f64 * b[j + 2] as f64;
        acc[3] += a[j + 3] as f64 * b[j + 3] as f64;
    }
    for j in quads * 4..a.len() {
        acc[j % 4] += a[j] as f64 * b[j] as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Collects per-tile edge buffers into one sorted, duplicate-free list and
/// keeps the running degree counts used by the ~100-edges-per-node check.
pub struct EdgeAccumulator {
    degrees: Vec<u32>,
    edges: Vec<Edge>,
}

impl EdgeAccumulator {
    pub fn new(n: usize) -> Self {
        EdgeAccumulator {
            degrees: vec![0; n],
            edges: Vec::new(),
        }
    }

    pub fn absorb(&mut self, tile_edges: Vec<Edge>) {
        for e in &tile_edges {
            self.degrees[e.src as usize] += 1;
            self.degrees[e.dst as usize] += 1;
        }
        self.edges.extend(tile_edges);
    }

    /// Sorted canonical edge list plus per-node degrees. Tiles cover disjoint
    /// index pairs, so sorting alone restores the global order.
    pub fn finish(mut self) -> (Vec<Edge>, Vec<u32>) {
        self.edges
            .sort_unstable_by_key(|e| ((e.src as u64) << 32) | e.dst as u64);
        debug_assert!(self
            .edges
            .windows(2)
            .all(|w| (w[0].src, w[0].dst) < (w[1].src, w[1].dst)));
        (self.edges, self.degrees)
    }
}

/// All-pairs correlation of the voxel set, thresholded into a sparse graph.
///
/// The edge set is exactly `{ (u,v), u<v : corr(u,v) > threshold }` with the
/// signed correlation as weight; output is independent of `tile_size` and
/// `workers`.
pub fn correlate_all(vs: &VoxelSet, cfg: &PccConfig) -> Result<BrainGraph> {
    cfg.validate()?;
    let n = vs.n();
    if n < 2 {
        return Err(Error::invalid("voxel set", "need at least 2 voxels"));
    }
    let t = vs.t_len();
    let inv_t = 1.0 / t as f64;
    let tau = cfg.threshold;
    let tile = cfg.tile_size;
    let series = vs.series();
    let blocks = n.div_ceil(tile);

    let mut tasks = Vec::with_capacity(blocks * (blocks + 1) / 2);
    for bi in 0..blocks {
        for bj in bi..blocks {
            tasks.push((bi, bj));
        }
    }

    let buffers: Vec<Vec<Edge>> = run_with_workers(cfg.workers, || {
        tasks
            .par_iter()
            .map(|&(bi, bj)| {
                let (u0, u1) = (bi * tile, ((bi + 1) * tile).min(n));
                let (v0, v1) = (bj * tile, ((bj + 1) * tile).min(n));
                let mut out = Vec::new();
                for u in u0..u1 {
                    let row_u = series.row(u);
                    let row_u = row_u.to_slice().expect("row-major");
                    let start = if bi == bj { u + 1 } else { v0 };
                    for v in start..v1 {
                        let row_v = series.row(v);
                        let row_v = row_v.to_slice().expect("row-major");
                        let r = (dot_rows(row_u, row_v) * inv_t).clamp(-1.0, 1.0);
                        if r > tau {
                            out.push(Edge {
                                src: u as u32,
                                dst: v as u32,
                                weight: r as f32,
                            });
                        }
                    }
                }
                out
            })
            .collect()
    });

    let mut acc = EdgeAccumulator::new(n);
    for buf in buffers {
        acc.absorb(buf);
    }
    let (edges, _degrees) = acc.finish();
    BrainGraph::from_voxels(vs, edges)
}

/// Mean degree and degree histogram of a graph.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeReport {
    pub mean_degree: f64,
    pub histogram: BTreeMap<u32, u32>,
}

pub fn degree_report(g: &BrainGraph) -> DegreeReport {
    let mut degrees = vec![0u32; g.n()];
    for e in g.edges() {
        degrees[e.src as usize] += 1;
        degrees[e.dst as usize] += 1;
    }
    let mut histogram = BTreeMap::new();
    for d in &degrees {
        *histogram.entry(*d).or_insert(0) += 1;
    }
    DegreeReport {
        mean_degree: g.mean_degree(),
        histogram,
    }
}

/// One-line JSON record emitted by `build-graph --stats`.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelateStats {
    pub n: usize,
    pub edge_count: usize,
    pub mean_degree: f64,
    pub wall_time_seconds: f64,
    pub pairs_per_second: f64,
}

/// Throughput report for the `bench` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub voxels: usize,
    pub t_len: usize,
    pub pairs: u64,
    pub edge_count: usize,
    pub wall_seconds: f64,
    pub pairs_per_second: f64,
    pub tile_size: usize,
}

/// Generates a synthetic z-scored voxel set of the requested size, runs the
/// full correlation kernel on it, and reports throughput.
pub fn bench_correlate(voxels: usize, t_len: usize, cfg: &PccConfig, seed: u64) -> Result<BenchReport> {
    if voxels < 2 || t_len < 2 {
        return Err(Error::invalid("bench", "need voxels >= 2 and t >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(voxels * t_len);
    let mut coords = Vec::with_capacity(voxels);
    let mut raw = vec![0.0f64; t_len];
    for i in 0..voxels {
        loop {
            for v in raw.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            if let Some(z) = zscore(&raw) {
                rows.extend(z.iter().map(|&v| v as f32));
                break;
            }
        }
        coords.push([i as u32, 0, 0]);
    }
    let series = Array2::from_shape_vec((voxels, t_len), rows).expect("shape");
    let vs = VoxelSet::new(coords, series)?;

    let start = Instant::now();
    let g = correlate_all(&vs, cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let pairs = pair_count(voxels as u64);
    Ok(BenchReport {
        voxels,
        t_len,
        pairs,
        edge_count: g.edges().len(),
        wall_seconds: wall,
        pairs_per_second: pairs as f64 / wall.max(1e-9),
        tile_size: cfg.tile_size,
    })
}
