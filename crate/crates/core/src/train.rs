//! Stratified splitting, Adam training on binary cross-entropy, and grid
//! search over learning rate, batch size, and hidden units.
//!
//! Determinism contract: for a fixed seed, training is bit-identical for any
//! worker count. Per-graph backward passes may run in parallel inside a
//! batch, but gradients are reduced in dataset-index order.

use std::time::Instant;

use ndarray::Array2;
use once_cell::sync::OnceCell;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::GraphSource;
use crate::error::{Error, Result};
use crate::gnn::{
    backward_prepared, forward_prepared, init_params, Arch, ModelParams, ModelSpec, PreparedGraph,
};
use crate::metrics::{accuracy, auroc, f1};
use crate::parallel::run_with_workers;

#[derive(Debug, Clone)]
pub struct SplitSpec {
    /// Train/validation/test fractions; must sum to 1.
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            fractions: [0.8, 0.1, 0.1],
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

const MIN_PER_CLASS: usize = 10;

/// Stratified split: each class is shuffled and cut round(f_train*m) /
/// round(f_val*m) / remainder, so overall proportions hold per class.
pub fn split(source: &dyn GraphSource, spec: &SplitSpec) -> Result<Split> {
    let total: f64 = spec.fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 || spec.fractions.iter().any(|&f| f < 0.0) {
        return Err(Error::invalid(
            "split fractions",
            format!("{:?} do not sum to 1", spec.fractions),
        ));
    }
    let labels: Vec<u8> = (0..source.len()).map(|i| source.label(i)).collect();
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        if l > 1 {
            return Err(Error::invalid("label", format!("{l} not in {{0,1}}")));
        }
        by_class[l as usize].push(i);
    }
    for (label, idxs) in by_class.iter().enumerate() {
        if idxs.len() < MIN_PER_CLASS {
            return Err(Error::ClassTooSmall {
                label: label as u8,
                count: idxs.len(),
                min: MIN_PER_CLASS,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for idxs in by_class.iter_mut() {
        idxs.shuffle(&mut rng);
        let m = idxs.len();
        let n_train = (spec.fractions[0] * m as f64).round() as usize;
        let n_val = (spec.fractions[1] * m as f64).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= m {
            return Err(Error::invalid(
                "split",
                format!("class of {m} graphs leaves an empty part"),
            ));
        }
        out.train.extend(&idxs[..n_train]);
        out.val.extend(&idxs[n_train..n_train + n_val]);
        out.test.extend(&idxs[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Adam with the standard constants; lr = 0 leaves parameters untouched.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &ModelParams) -> Self {
        let shapes: Vec<Array2<f64>> = params
            .tensors
            .iter()
            .map(|t| Array2::zeros(t.value.dim()))
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Array2<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((tensor, g), (m, v)) in params
            .tensors
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(&mut tensor.value)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Curves {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

pub struct TrainedModel {
    pub params: ModelParams,
    pub curves: Curves,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Lazily prepares graph tensors once per dataset index; shared across a
/// whole grid search so repeated epochs do not re-derive operators.
pub struct PreparedCache<'a> {
    source: &'a dyn GraphSource,
    arch: Arch,
    slots: Vec<OnceCell<std::sync::Arc<PreparedGraph>>>,
}

impl<'a> PreparedCache<'a> {
    pub fn new(source: &'a dyn GraphSource, arch: Arch) -> Self {
        PreparedCache {
            source,
            arch,
            slots: (0..source.len()).map(|_| OnceCell::new()).collect(),
        }
    }

    fn get(&self, idx: usize) -> Result<std::sync::Arc<PreparedGraph>> {
        self.slots[idx]
            .get_or_try_init(|| {
                let g = self.source.load(idx)?;
                Ok(std::sync::Arc::new(PreparedGraph::new(&g, self.arch)))
            })
            .cloned()
    }

    fn label(&self, idx: usize) -> u8 {
        self.source.label(idx)
    }
}

/// Minibatch Adam on BCE; returns the parameters of the epoch with the best
/// validation accuracy (earliest epoch on ties).
pub fn train_model(
    cache: &PreparedCache,
    train_idx: &[usize],
    val_idx: &[usize],
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    if train_idx.is_empty() {
        return Err(Error::invalid("train", "empty training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be >= 1"));
    }
    let t_len = cache.get(train_idx[0])?.t_len();
    let mut params = init_params(spec, t_len, cfg.seed)?;
    let mut adam = Adam::new(cfg.lr, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut curves = Curves {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_accuracy: Vec::with_capacity(cfg.epochs),
    };
    let mut best: Option<(f64, usize, ModelParams)> = None;

    let mut order: Vec<usize> = train_idx.to_vec();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            // reduction in dataset-index order keeps training reproducible
            // for any worker count
            let mut batch: Vec<usize> = chunk.to_vec();
            batch.sort_unstable();
            let results: Vec<_> = run_with_workers(cfg.workers, || {
                batch
                    .par_iter()
                    .map(|&idx| {
                        let prep = cache.get(idx)?;
                        backward_prepared(&prep, spec, &params, cache.label(idx))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;

            let scale = 1.0 / results.len() as f64;
            let mut grads: Vec<Array2<f64>> = params
                .tensors
                .iter()
                .map(|t| Array2::zeros(t.value.dim()))
                .collect();
            for r in &results {
                epoch_loss += r.loss;
                for (acc, g) in grads.iter_mut().zip(&r.tensors) {
                    *acc += g;
                }
            }
            for g in grads.iter_mut() {
                *g *= scale;
            }
            adam.step(&mut params, &grads);
        }
        let mean_loss = epoch_loss / order.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::NumericFailure { layer: usize::MAX });
        }

        let (preds, _scores, labels) = predict(cache, val_idx, spec, &params, cfg.workers)?;
        let val_acc = accuracy(&preds, &labels)?;
        curves.train_loss.push(mean_loss);
        curves.val_accuracy.push(val_acc);
        if best.as_ref().map_or(true, |(b, _, _)| val_acc > *b) {
            best = Some((val_acc, epoch, params.clone()));
        }
    }

    let (best_val_accuracy, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainedModel {
        params,
        curves,
        best_epoch,
        best_val_accuracy,
    })
}

/// Scores and thresholded predictions (p >= 0.5 -> class 1) over indices.
pub fn predict(
    cache: &PreparedCache,
    indices: &[usize],
    spec: &ModelSpec,
    params: &ModelParams,
    workers: Option<usize>,
) -> Result<(Vec<u8>, Vec<f64>, Vec<u8>)> {
    let scores: Vec<f64> = run_with_workers(workers, || {
        indices
            .par_iter()
            .map(|&idx| {
                let prep = cache.get(idx)?;
                forward_prepared(&prep, spec, params)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let preds: Vec<u8> = scores.iter().map(|&p| (p >= 0.5) as u8).collect();
    let labels: Vec<u8> = indices.iter().map(|&i| cache.label(i)).collect();
    Ok((preds, scores, labels))
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub hidden_units: Vec<usize>,
    pub epochs: usize,
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty()
            || self.batch_sizes.is_empty()
            || self.hidden_units.is_empty()
        {
            return Err(Error::invalid("grid", "empty hyperparameter list"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("grid", "epochs must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub lr: f64,
    pub batch_size: usize,
    pub hidden_units: usize,
    /// Best-epoch validation accuracy; absent if the cell failed numerically.
    pub val_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub arch: Arch,
    pub cells: Vec<CellResult>,
    pub chosen: CellResult,
    pub test_accuracy: f64,
    pub test_f1: f64,
    pub test_auroc: f64,
    pub test_scores: Vec<f64>,
    pub test_predictions: Vec<u8>,
    pub test_labels: Vec<u8>,
    pub curves: Curves,
    pub split: Split,
    pub seed: u64,
    pub wall_seconds: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-cell seed derived from the cell's own hyperparameters, so results do
/// not depend on evaluation order.
fn cell_seed(base: u64, lr: f64, batch: usize, hidden: usize) -> u64 {
    let mut s = splitmix64(base ^ lr.to_bits());
    s = splitmix64(s ^ batch as u64);
    splitmix64(s ^ hidden as u64)
}

/// Trains every grid cell, picks the best validation accuracy (ties: lowest
/// lr, then smallest batch, then fewest units), and evaluates the winner on
/// the test set exactly once. Cells that fail numerically are recorded and
/// skipped; the grid errors only if every cell failed.
pub fn grid_search(
    source: &dyn GraphSource,
    split: &Split,
    arch: Arch,
    base_spec: &ModelSpec,
    grid: &GridSpec,
    seed: u64,
    workers: Option<usize>,
) -> Result<ExperimentResult> {
    grid_search_with_model(source, split, arch, base_spec, grid, seed, workers).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VecSource;
    use crate::graph::BrainGraph;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use std::sync::Mutex;

    struct LabelsOnly(Vec<u8>);

    impl GraphSource for LabelsOnly {
        fn len(&self) -> usize {
            self.0.len()
        }
        fn label(&self, idx: usize) -> u8 {
            self.0[idx]
        }
        fn load(&self, _idx: usize) -> Result<std::sync::Arc<BrainGraph>> {
            unreachable!("split never loads graphs")
        }
    }

    #[test]
    fn split_100_graphs_stratified() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let src = LabelsOnly(labels.clone());
        let s = split(&src, &SplitSpec::new(3)).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.val.len(), 10);
        assert_eq!(s.test.len(), 10);
        for part in [&s.train, &s.val, &s.test] {
            let pos = part.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(pos * 2, part.len(), "stratification broken");
        }
        // disjoint and exhaustive
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let src = LabelsOnly((0..40).map(|i| (i % 2) as u8).collect());
        let a = split(&src, &SplitSpec::new(9)).unwrap();
        let b = split(&src, &SplitSpec::new(9)).unwrap();
        assert_eq!(a, b);
        let c = split(&src, &SplitSpec::new(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_small_class() {
        let mut labels = vec![0u8; 15];
        labels.extend(vec![1u8; 9]);
        let src = LabelsOnly(labels);
        assert!(matches!(
            split(&src, &SplitSpec::new(0)),
            Err(Error::ClassTooSmall { label: 1, count: 9, .. })
        ));
    }

    #[test]
    fn split_rejects_single_class() {
        let src = LabelsOnly(vec![0u8; 20]);
        assert!(matches!(
            split(&src, &SplitSpec::new(0)),
            Err(Error::ClassTooSmall { label: 1, count: 0, .. })
        ));
    }

    /// Single-node graphs whose series sign determines the label; linearly
    /// separable for the FFN.
    fn toy_source(per_class: usize, seed: u64) -> VecSource {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut graphs = Vec::new();
        for i in 0..2 * per_class {
            let label = (i % 2) as u8;
            let sign = if label == 1 { 1.0f32 } else { -1.0 };
            let series = Array2::from_shape_fn((1, 4), |(_, j)| {
                let base = if j < 2 { 1.0 } else { -1.0 };
                sign * base + rng.random_range(-0.1..0.1)
            });
            graphs.push(
                BrainGraph::new(vec![[0, 0, 0]], series, vec![], Some(label)).unwrap(),
            );
        }
        VecSource::new(graphs).unwrap()
    }

    fn ffn_spec() -> ModelSpec {
        ModelSpec {
            arch: Arch::Ffn,
            hidden_units: 4,
            num_mp_layers: 1,
            gat_heads: 1,
        }
    }

    #[test]
    fn zero_lr_leaves_params_at_init() {
        let src = toy_source(12, 0);
        let cache = PreparedCache::new(&src, Arch::Ffn);
        let idx: Vec<usize> = (0..src.len()).collect();
        let spec = ffn_spec();
        let cfg = TrainConfig {
            lr: 0.0,
            batch_size: 4,
            epochs: 3,
            seed: 5,
            workers: Some(1),
        };
        let trained = train_model(&cache, &idx, &idx, &spec, &cfg).unwrap();
        let fresh = init_params(&spec, 4, cfg.seed).unwrap();
        for (a, b) in trained.params.tensors.iter().zip(&fresh.tensors) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn separable_toy_reaches_full_train_accuracy() {
        let src = toy_source(12, 1);
        let cache = PreparedCache::new(&src, Arch::Ffn);
        let idx: Vec<usize> = (0..src.len()).collect();
        let cfg = TrainConfig {
            lr: 0.05,
            batch_size: 4,
            epochs: 50,
            seed: 5,
            workers: Some(1),
        };
        let trained = train_model(&cache, &idx, &idx, &ffn_spec(), &cfg).unwrap();
        let (preds, _, labels) = predict(&cache, &idx, &ffn_spec(), &trained.params, Some(1)).unwrap();
        assert_abs_diff_eq!(accuracy(&preds, &labels).unwrap(), 1.0);
    }

    #[test]
    fn training_is_deterministic_across_worker_counts() {
        let src = toy_source(12, 2);
        let idx: Vec<usize> = (0..src.len()).collect();
        let mut losses = Vec::new();
        for workers in [1usize, 2, 8] {
            let cache = PreparedCache::new(&src, Arch::Ffn);
            let cfg = TrainConfig {
                lr: 0.01,
                batch_size: 5,
                epochs: 4,
                seed: 77,
                workers: Some(workers),
            };
            let trained = train_model(&cache, &idx, &idx, &ffn_spec(), &cfg).unwrap();
            losses.push(trained.curves.train_loss.clone());
        }
        assert_eq!(losses[0], losses[1], "1 vs 2 workers diverged");
        assert_eq!(losses[0], losses[2], "1 vs 8 workers diverged");
    }

    fn toy_split(src: &VecSource) -> Split {
        split(src, &SplitSpec::new(0)).unwrap()
    }

    #[test]
    fn single_cell_grid_equals_train_model() {
        let src = toy_source(12, 3);
        let s = toy_split(&src);
        let grid = GridSpec {
            learning_rates: vec![0.05],
            batch_sizes: vec![4],
            hidden_units: vec![4],
            epochs: 20,
        };
        let result = grid_search(&src, &s, Arch::Ffn, &ffn_spec(), &grid, 9, Some(1)).unwrap();
        assert_eq!(result.cells.len(), 1);

        let cache = PreparedCache::new(&src, Arch::Ffn);
        let cfg = TrainConfig {
            lr: 0.05,
            batch_size: 4,
            epochs: 20,
            seed: cell_seed(9, 0.05, 4, 4),
            workers: Some(1),
        };
        let trained = train_model(&cache, &s.train, &s.val, &ffn_spec(), &cfg).unwrap();
        assert_eq!(
            result.chosen.val_accuracy.unwrap(),
            trained.best_val_accuracy
        );
    }

    #[test]
    fn grid_prefers_learning_cell_over_zero_lr() {
        let src = toy_source(12, 4);
        let s = toy_split(&src);
        let grid = GridSpec {
            learning_rates: vec![0.0, 0.05],
            batch_sizes: vec![4],
            hidden_units: vec![4],
            epochs: 25,
        };
        let result = grid_search(&src, &s, Arch::Ffn, &ffn_spec(), &grid, 11, Some(1)).unwrap();
        assert_abs_diff_eq!(result.chosen.lr, 0.05);
    }

    #[test]
    fn grid_result_invariant_to_cell_order() {
        let src = toy_source(12, 5);
        let s = toy_split(&src);
        let forward = GridSpec {
            learning_rates: vec![0.01, 0.05],
            batch_sizes: vec![4, 8],
            hidden_units: vec![2],
            epochs: 8,
        };
        let reversed = GridSpec {
            learning_rates: vec![0.05, 0.01],
            batch_sizes: vec![8, 4],
            hidden_units: vec![2],
            epochs: 8,
        };
        let a = grid_search(&src, &s, Arch::Ffn, &ffn_spec(), &forward, 13, Some(1)).unwrap();
        let b = grid_search(&src, &s, Arch::Ffn, &ffn_spec(), &reversed, 13, Some(1)).unwrap();
        assert_eq!(a.chosen.lr, b.chosen.lr);
        assert_eq!(a.chosen.batch_size, b.chosen.batch_size);
        assert_eq!(a.test_accuracy, b.test_accuracy);
        assert_eq!(a.test_scores, b.test_scores);
    }

    #[test]
    fn reported_test_accuracy_matches_saved_predictions() {
        let src = toy_source(12, 6);
        let s = toy_split(&src);
        let grid = GridSpec {
            learning_rates: vec![0.05],
            batch_sizes: vec![4],
            hidden_units: vec![4],
            epochs: 15,
        };
        let r = grid_search(&src, &s, Arch::Ffn, &ffn_spec(), &grid, 17, Some(1)).unwrap();
        let recomputed = accuracy(&r.test_predictions, &r.test_labels).unwrap();
        assert_eq!(recomputed, r.test_accuracy);
        let re_pred: Vec<u8> = r.test_scores.iter().map(|&p| (p >= 0.5) as u8).collect();
        assert_eq!(re_pred, r.test_predictions);
    }

    #[test]
    fn numeric_failure_cell_is_recorded_not_fatal() {
        let src = toy_source(12, 7);
        let s = toy_split(&src);
        let grid = GridSpec {
            learning_rates: vec![1e300, 0.05],
            batch_sizes: vec![4],
            hidden_units: vec![4],
            epochs: 10,
        };
        let r = grid_search(&src, &s, Arch::Ffn, &ffn_spec(), &grid, 19, Some(1)).unwrap();
        let failed: Vec<_> = r.cells.iter().filter(|c| c.failure.is_some()).collect();
        assert_eq!(failed.len(), 1);
        assert_abs_diff_eq!(failed[0].lr, 1e300);
        assert_abs_diff_eq!(r.chosen.lr, 0.05);
    }

    #[test]
    fn all_cells_failing_is_grid_error() {
        let src = toy_source(12, 8);
        let s = toy_split(&src);
        let grid = GridSpec {
            learning_rates: vec![1e300],
            batch_sizes: vec![4],
            hidden_units: vec![4],
            epochs: 5,
        };
        assert!(matches!(
            grid_search(&src, &s, Arch::Ffn, &ffn_spec(), &grid, 23, Some(1)),
            Err(Error::GridExhausted)
        ));
    }

    struct LoggingSource<'a> {
        inner: &'a VecSource,
        log: Mutex<Vec<usize>>,
    }

    impl GraphSource for LoggingSource<'_> {
        fn len(&self) -> usize {
            self.inner.len()
        }
        fn label(&self, idx: usize) -> u8 {
            self.inner.label(idx)
        }
        fn load(&self, idx: usize) -> Result<std::sync::Arc<BrainGraph>> {
            self.log.lock().unwrap().push(idx);
            self.inner.load(idx)
        }
    }

    #[test]
    fn test_graphs_untouched_before_final_evaluation() {
        let src = toy_source(12, 9);
        let s = toy_split(&src);
        let logging = LoggingSource {
            inner: &src,
            log: Mutex::new(Vec::new()),
        };
        let grid = GridSpec {
            learning_rates: vec![0.01, 0.05],
            batch_sizes: vec![4],
            hidden_units: vec![2],
            epochs: 5,
        };
        grid_search(&logging, &s, Arch::Ffn, &ffn_spec(), &grid, 29, Some(1)).unwrap();
        let log = logging.log.into_inner().unwrap();
        let is_test: Vec<bool> = log.iter().map(|i| s.test.contains(i)).collect();
        let first_test = is_test.iter().position(|&t| t).expect("test used");
        assert!(
            is_test[first_test..].iter().all(|&t| t),
            "a train/val graph was loaded after test evaluation began: {log:?}"
        );
        for i in &s.test {
            assert_eq!(log.iter().filter(|&&x| x == *i).count(), 1);
        }
    }
}

/// As [`grid_search`], also returning the winning model for checkpointing.
pub fn grid_search_with_model(
    source: &dyn GraphSource,
    split: &Split,
    arch: Arch,
    base_spec: &ModelSpec,
    grid: &GridSpec,
    seed: u64,
    workers: Option<usize>,
) -> Result<(ExperimentResult, ModelParams)> {
    grid.validate()?;
    let start = Instant::now();
    let cache = PreparedCache::new(source, arch);

    let mut results: Vec<CellResult> = Vec::new();
    let mut trained_cells: Vec<Option<TrainedModel>> = Vec::new();
    for &lr in &grid.learning_rates {
        for &batch in &grid.batch_sizes {
            for &hidden in &grid.hidden_units {
                let spec = ModelSpec {
                    arch,
                    hidden_units: hidden,
                    ..*base_spec
                };
                let cfg = TrainConfig {
                    lr,
                    batch_size: batch,
                    epochs: grid.epochs,
                    seed: cell_seed(seed, lr, batch, hidden),
                    workers,
                };
                log::debug!(
                    "grid cell arch={} lr={lr} batch={batch} hidden={hidden}",
                    arch.name()
                );
                match train_model(&cache, &split.train, &split.val, &spec, &cfg) {
                    Ok(trained) => {
                        results.push(CellResult {
                            lr,
                            batch_size: batch,
                            hidden_units: hidden,
                            val_accuracy: Some(trained.best_val_accuracy),
                            best_epoch: Some(trained.best_epoch),
                            failure: None,
                        });
                        trained_cells.push(Some(trained));
                    }
                    Err(e @ Error::NumericFailure { .. }) => {
                        log::warn!("grid cell failed numerically: {e}");
                        results.push(CellResult {
                            lr,
                            batch_size: batch,
                            hidden_units: hidden,
                            val_accuracy: None,
                            best_epoch: None,
                            failure: Some(e.to_string()),
                        });
                        trained_cells.push(None);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let winner = results
        .iter()
        .enumerate()
        .filter(|(i, _)| trained_cells[*i].is_some())
        .min_by(|(_, a), (_, b)| {
            let av = a.val_accuracy.expect("trained");
            let bv = b.val_accuracy.expect("trained");
            bv.total_cmp(&av)
                .then(a.lr.total_cmp(&b.lr))
                .then(a.batch_size.cmp(&b.batch_size))
                .then(a.hidden_units.cmp(&b.hidden_units))
        })
        .map(|(i, _)| i)
        .ok_or(Error::GridExhausted)?;

    let chosen = results[winner].clone();
    let trained = trained_cells[winner].take().expect("winner trained");
    let spec = ModelSpec {
        arch,
        hidden_units: chosen.hidden_units,
        ..*base_spec
    };
    let (preds, scores, labels) = predict(&cache, &split.test, &spec, &trained.params, workers)?;
    let result = ExperimentResult {
        arch,
        cells: results,
        chosen,
        test_accuracy: accuracy(&preds, &labels)?,
        test_f1: f1(&preds, &labels)?,
        test_auroc: auroc(&scores, &labels)?,
        test_scores: scores,
        test_predictions: preds,
        test_labels: labels,
        curves: trained.curves,
        split: split.clone(),
        seed,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((result, trained.params))
}
