//! The four graph-level classifiers: FFN, GCN, GAT, GCRN.
//!
//! All four share the same readout: per-node hidden states are mean-pooled
//! into one vector, a linear head maps it to a logit, and the sigmoid of the
//! logit is the class-1 probability. They differ only in how node states are
//! computed:
//!
//! * FFN: two linear layers per node, no edge information at all.
//! * GCN: degree-normalized structural convolutions (self-loops included).
//! * GAT: multi-head additive attention over each neighborhood; heads are
//!   concatenated on hidden layers and averaged on the final layer.
//! * GCRN: a gated graph-convolutional recurrence fed one scalar sample per
//!   node per time step; coordinates join the pooled vector at the head.
//!
//! Gradients come from a small reverse-mode tape (`tape` module) and are
//! validated against central finite differences in the test suite.

mod graph_ops;
mod tape;

pub use graph_ops::{Propagation, Segments};

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BrainGraph, NeighborList};
use crate::wire::{Reader, Writer};
use tape::{GcrnParamIds, NodeId, Tape};

pub const MDL1_MAGIC: [u8; 4] = *b"MDL1";

/// Negative slope of the attention LeakyReLU.
const GAT_LEAKY_SLOPE: f64 = 0.2;

/// Sigmoid outputs are clamped into the open interval (0, 1) so downstream
/// log-loss arithmetic stays finite even when the logit saturates.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Ffn,
    Gcn,
    Gat,
    Gcrn,
}

impl Arch {
    pub fn name(&self) -> &'static str {
        match self {
            Arch::Ffn => "ffn",
            Arch::Gcn => "gcn",
            Arch::Gat => "gat",
            Arch::Gcrn => "gcrn",
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            Arch::Ffn => 0,
            Arch::Gcn => 1,
            Arch::Gat => 2,
            Arch::Gcrn => 3,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0 => Arch::Ffn,
            1 => Arch::Gcn,
            2 => Arch::Gat,
            3 => Arch::Gcrn,
            other => return Err(Error::invalid("arch byte", format!("{other}"))),
        })
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ffn" => Arch::Ffn,
            "gcn" => Arch::Gcn,
            "gat" => Arch::Gat,
            "gcrn" => Arch::Gcrn,
            other => return Err(Error::invalid("arch", other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub hidden_units: usize,
    /// Message-passing depth for GCN/GAT; FFN and GCRN ignore it.
    pub num_mp_layers: usize,
    /// Attention heads; only GAT reads it.
    pub gat_heads: usize,
}

impl ModelSpec {
    pub fn new(arch: Arch, hidden_units: usize) -> Self {
        ModelSpec {
            arch,
            hidden_units,
            num_mp_layers: 2,
            gat_heads: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::invalid("hidden_units", "must be >= 1"));
        }
        if self.num_mp_layers == 0 {
            return Err(Error::invalid("num_mp_layers", "must be >= 1"));
        }
        if self.gat_heads == 0 {
            return Err(Error::invalid("gat_heads", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NamedTensor {
    pub name: String,
    pub value: Array2<f64>,
}

/// All trainable tensors of one model instance, in declaration order.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub t_len: usize,
    pub tensors: Vec<NamedTensor>,
}

/// Tensor names and shapes in declaration order for one spec.
fn expected_shapes(spec: &ModelSpec, t_len: usize) -> Vec<(String, (usize, usize))> {
    let h = spec.hidden_units;
    let d_in = 3 + t_len;
    let mut out = Vec::new();
    match spec.arch {
        Arch::Ffn => {
            out.push(("ffn.w1".to_string(), (d_in, h)));
            out.push(("ffn.b1".to_string(), (1, h)));
            out.push(("ffn.w2".to_string(), (h, 1)));
            out.push(("ffn.b2".to_string(), (1, 1)));
        }
        Arch::Gcn => {
            let mut d = d_in;
            for l in 0..spec.num_mp_layers {
                out.push((format!("gcn.l{l}.w"), (d, h)));
                out.push((format!("gcn.l{l}.b"), (1, h)));
                d = h;
            }
            out.push(("head.w".to_string(), (h, 1)));
            out.push(("head.b".to_string(), (1, 1)));
        }
        Arch::Gat => {
            let k = spec.gat_heads;
            let mut d = d_in;
            for l in 0..spec.num_mp_layers {
                let last = l + 1 == spec.num_mp_layers;
                for head in 0..k {
                    out.push((format!("gat.l{l}.h{head}.w"), (d, h)));
                    out.push((format!("gat.l{l}.h{head}.a"), (2 * h, 1)));
                }
                let width = if last { h } else { k * h };
                out.push((format!("gat.l{l}.b"), (1, width)));
                d = width;
            }
            out.push(("head.w".to_string(), (h, 1)));
            out.push(("head.b".to_string(), (1, 1)));
        }
        Arch::Gcrn => {
            for gate in ["z", "r", "h"] {
                out.push((format!("gcrn.w{gate}"), (1 + h, h)));
                out.push((format!("gcrn.b{gate}"), (1, h)));
            }
            out.push(("head.w".to_string(), (h + 3, 1)));
            out.push(("head.b".to_string(), (1, 1)));
        }
    }
    out
}

/// Seeded initialization: weights uniform in ±sqrt(6/(fan_in+fan_out)),
/// biases zero.
pub fn init_params(spec: &ModelSpec, t_len: usize, seed: u64) -> Result<ModelParams> {
    spec.validate()?;
    if t_len == 0 {
        return Err(Error::ZeroDim { what: "time dim" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = expected_shapes(spec, t_len)
        .into_iter()
        .map(|(name, (rows, cols))| {
            let is_bias = name.rsplit('.').next().is_some_and(|s| s.starts_with('b'));
            let value = if is_bias {
                Array2::zeros((rows, cols))
            } else {
                let s = (6.0 / (rows + cols) as f64).sqrt();
                Array2::from_shape_fn((rows, cols), |_| rng.random_range(-s..s))
            };
            NamedTensor { name, value }
        })
        .collect();
    Ok(ModelParams {
        spec: *spec,
        t_len,
        tensors,
    })
}

impl ModelParams {
    fn check_consistent(&self, spec: &ModelSpec) -> Result<()> {
        if self.spec != *spec {
            return Err(Error::invalid("params", "spec mismatch"));
        }
        let expect = expected_shapes(spec, self.t_len);
        if expect.len() != self.tensors.len() {
            return Err(Error::invalid("params", "tensor count mismatch"));
        }
        for ((name, shape), t) in expect.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.value.dim() {
                return Err(Error::invalid(
                    "params",
                    format!("tensor {} has unexpected name/shape", t.name),
                ));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.magic(&MDL1_MAGIC);
        w.u8(self.spec.arch.to_byte());
        w.u32(self.spec.hidden_units as u32);
        w.u32(self.spec.num_mp_layers as u32);
        w.u32(self.spec.gat_heads as u32);
        w.u32(self.t_len as u32);
        w.u32(self.tensors.len() as u32);
        for t in &self.tensors {
            w.u16(t.name.len() as u16);
            w.bytes(t.name.as_bytes());
            w.u32(t.value.nrows() as u32);
            w.u32(t.value.ncols() as u32);
        }
        for t in &self.tensors {
            for &v in t.value.iter() {
                w.f64(v);
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "MDL1 checkpoint");
        r.magic(&MDL1_MAGIC)?;
        let arch = Arch::from_byte(r.u8()?)?;
        let spec = ModelSpec {
            arch,
            hidden_units: r.u32()? as usize,
            num_mp_layers: r.u32()? as usize,
            gat_heads: r.u32()? as usize,
        };
        let t_len = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut manifest = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.bytes(name_len)?.to_vec())
                .map_err(|_| Error::invalid("tensor name", "not utf-8"))?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            manifest.push((name, rows, cols));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, rows, cols) in manifest {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(r.f64()?);
            }
            tensors.push(NamedTensor {
                name,
                value: Array2::from_shape_vec((rows, cols), data).expect("shape"),
            });
        }
        r.finish()?;
        let params = ModelParams {
            spec,
            t_len,
            tensors,
        };
        params.check_consistent(&spec)?;
        Ok(params)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(e, path.as_ref()))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(e, path.as_ref()))?;
        Self::from_bytes(&bytes)
    }
}

/// Graph tensors shared across many forward passes of one architecture.
pub struct PreparedGraph {
    n: usize,
    t_len: usize,
    /// n x (3 + T): coordinates then series, per node.
    features: Arc<Array2<f64>>,
    prop: Option<Arc<Propagation>>,
    segments: Option<Arc<Segments>>,
    sources: Option<Arc<Vec<u32>>>,
    targets: Option<Arc<Vec<u32>>>,
    /// 1 x 3 mean of node coordinates (GCRN head input).
    coords_mean: Option<Array2<f64>>,
}

impl PreparedGraph {
    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn new(g: &BrainGraph, arch: Arch) -> Self {
        let n = g.n();
        let t = g.t_len();
        let mut features = Array2::zeros((n, 3 + t));
        for v in 0..n {
            let c = g.coords()[v];
            features[(v, 0)] = c[0] as f64;
            features[(v, 1)] = c[1] as f64;
            features[(v, 2)] = c[2] as f64;
            for (j, &s) in g.series_row(v).iter().enumerate() {
                features[(v, 3 + j)] = s as f64;
            }
        }

        let nl: Option<NeighborList> = match arch {
            Arch::Ffn => None,
            _ => Some(g.neighbor_list()),
        };
        let prop = match arch {
            Arch::Gcn | Arch::Gcrn => Some(Arc::new(Propagation::kipf(nl.as_ref().unwrap()))),
            _ => None,
        };
        let (segments, sources, targets) = if arch == Arch::Gat {
            let segs = Segments::with_self_loops(nl.as_ref().unwrap());
            let sources = Arc::new(segs.sources().to_vec());
            let targets = Arc::new(segs.targets().to_vec());
            (Some(Arc::new(segs)), Some(sources), Some(targets))
        } else {
            (None, None, None)
        };
        let coords_mean = (arch == Arch::Gcrn).then(|| {
            features
                .slice(ndarray::s![.., ..3])
                .mean_axis(Axis(0))
                .expect("non-empty")
                .insert_axis(Axis(0))
        });

        PreparedGraph {
            n,
            t_len: t,
            features: Arc::new(features),
            prop,
            segments,
            sources,
            targets,
            coords_mean,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

struct ForwardPass {
    tape: Tape,
    logit: NodeId,
    param_ids: Vec<NodeId>,
}

fn check_finite(tape: &Tape, id: NodeId, layer: usize) -> Result<()> {
    if tape.value(id).iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericFailure { layer })
    }
}

fn build_forward(prep: &PreparedGraph, spec: &ModelSpec, params: &ModelParams) -> Result<ForwardPass> {
    spec.validate()?;
    params.check_consistent(spec)?;
    if params.t_len != prep.t_len {
        return Err(Error::LengthMismatch {
            left: params.t_len,
            right: prep.t_len,
        });
    }

    let mut tape = Tape::new();
    let param_ids: Vec<NodeId> = params
        .tensors
        .iter()
        .map(|t| tape.param(t.value.clone()))
        .collect();
    let p = |i: usize| param_ids[i];

    let logit = match spec.arch {
        Arch::Ffn => {
            let x = tape.constant(prep.features.as_ref().clone());
            let m = tape.matmul(x, p(0));
            let m = tape.add_row(m, p(1));
            // pre-activation: relu would turn NaN into 0 and hide the failure
            check_finite(&tape, m, 0)?;
            let h1 = tape.relu(m);
            let z = tape.matmul(h1, p(2));
            let z = tape.add_row(z, p(3));
            let logit = tape.mean_rows(z);
            check_finite(&tape, logit, 1)?;
            logit
        }
        Arch::Gcn => {
            let prop = prep.prop.as_ref().expect("prepared for gcn").clone();
            let mut h = tape.constant(prep.features.as_ref().clone());
            for l in 0..spec.num_mp_layers {
                let m = tape.matmul(h, p(2 * l));
                let s = tape.propagate(m, prop.clone());
                let s = tape.add_row(s, p(2 * l + 1));
                check_finite(&tape, s, l)?;
                h = tape.relu(s);
            }
            let pooled = tape.mean_rows(h);
            let z = tape.matmul(pooled, p(2 * spec.num_mp_layers));
            let logit = tape.add_row(z, p(2 * spec.num_mp_layers + 1));
            check_finite(&tape, logit, spec.num_mp_layers)?;
            logit
        }
        Arch::Gat => {
            let segs = prep.segments.as_ref().expect("prepared for gat").clone();
            let sources = prep.sources.as_ref().expect("prepared for gat").clone();
            let targets = prep.targets.as_ref().expect("prepared for gat").clone();
            let k = spec.gat_heads;
            let hid = spec.hidden_units;
            let mut idx = 0usize;
            let mut h = tape.constant(prep.features.as_ref().clone());
            for l in 0..spec.num_mp_layers {
                let last = l + 1 == spec.num_mp_layers;
                let mut head_outs = Vec::with_capacity(k);
                for _head in 0..k {
                    let w = p(idx);
                    let a = p(idx + 1);
                    idx += 2;
                    let wh = tape.matmul(h, w);
                    let a_self = tape.slice_rows(a, 0, hid);
                    let a_neigh = tape.slice_rows(a, hid, hid);
                    let s_self = tape.matmul(wh, a_self);
                    let s_neigh = tape.matmul(wh, a_neigh);
                    let e_self = tape.gather(s_self, targets.clone());
                    let e_neigh = tape.gather(s_neigh, sources.clone());
                    let e = tape.add(e_self, e_neigh);
                    let e = tape.leaky_relu(e, GAT_LEAKY_SLOPE);
                    let alpha = tape.seg_softmax(e, segs.clone());
                    let vals = tape.gather(wh, sources.clone());
                    head_outs.push(tape.seg_weighted_sum(vals, alpha, segs.clone()));
                }
                let bias = p(idx);
                idx += 1;
                let combined = if last {
                    let mut acc = head_outs[0];
                    for &o in &head_outs[1..] {
                        acc = tape.add(acc, o);
                    }
                    let avg = tape.scale(acc, 1.0 / k as f64);
                    let out = tape.add_row(avg, bias);
                    check_finite(&tape, out, l)?;
                    out
                } else {
                    let mut acc = head_outs[0];
                    for &o in &head_outs[1..] {
                        acc = tape.concat_cols(acc, o);
                    }
                    let acc = tape.add_row(acc, bias);
                    check_finite(&tape, acc, l)?;
                    tape.relu(acc)
                };
                h = combined;
            }
            let pooled = tape.mean_rows(h);
            let z = tape.matmul(pooled, p(idx));
            let logit = tape.add_row(z, p(idx + 1));
            check_finite(&tape, logit, spec.num_mp_layers)?;
            logit
        }
        Arch::Gcrn => {
            let prop = prep.prop.as_ref().expect("prepared for gcrn").clone();
            let ids = GcrnParamIds {
                wz: p(0),
                bz: p(1),
                wr: p(2),
                br: p(3),
                wh: p(4),
                bh: p(5),
            };
            let h_final = tape.gcrn_unroll(
                ids,
                prop,
                prep.features.clone(),
                3,
                spec.hidden_units,
                0,
            )?;
            let pooled = tape.mean_rows(h_final);
            let cm = tape.constant(prep.coords_mean.as_ref().expect("prepared for gcrn").clone());
            let cat = tape.concat_cols(pooled, cm);
            let z = tape.matmul(cat, p(6));
            let logit = tape.add_row(z, p(7));
            check_finite(&tape, logit, 1)?;
            logit
        }
    };

    Ok(ForwardPass {
        tape,
        logit,
        param_ids,
    })
}

fn prob_from_logit(logit: f64) -> f64 {
    tape::stable_sigmoid(logit).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Binary cross-entropy from the raw logit; returns (loss, dloss/dlogit, p).
fn bce_with_logit(logit: f64, target: u8) -> (f64, f64, f64) {
    let y = target as f64;
    let loss = logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p();
    let p = tape::stable_sigmoid(logit);
    (loss, p - y, prob_from_logit(logit))
}

/// Class-1 probability for one graph.
pub fn model_forward(g: &BrainGraph, spec: &ModelSpec, params: &ModelParams) -> Result<f64> {
    let prep = PreparedGraph::new(g, spec.arch);
    forward_prepared(&prep, spec, params)
}

pub fn forward_prepared(prep: &PreparedGraph, spec: &ModelSpec, params: &ModelParams) -> Result<f64> {
    let fw = build_forward(prep, spec, params)?;
    Ok(prob_from_logit(fw.tape.value(fw.logit)[(0, 0)]))
}

/// Gradients of the binary cross-entropy loss for one (graph, target) pair,
/// one tensor per parameter in declaration order.
#[derive(Debug, Clone)]
pub struct ModelGradients {
    pub tensors: Vec<Array2<f64>>,
    pub loss: f64,
    pub prob: f64,
}

pub fn model_backward(
    g: &BrainGraph,
    spec: &ModelSpec,
    params: &ModelParams,
    target: u8,
) -> Result<ModelGradients> {
    let prep = PreparedGraph::new(g, spec.arch);
    backward_prepared(&prep, spec, params, target)
}

pub fn backward_prepared(
    prep: &PreparedGraph,
    spec: &ModelSpec,
    params: &ModelParams,
    target: u8,
) -> Result<ModelGradients> {
    if target > 1 {
        return Err(Error::invalid("target", format!("{target} not in {{0,1}}")));
    }
    let fw = build_forward(prep, spec, params)?;
    let logit = fw.tape.value(fw.logit)[(0, 0)];
    let (loss, dlogit, prob) = bce_with_logit(logit, target);
    let grads = fw
        .tape
        .backward(fw.logit, Array2::from_elem((1, 1), dlogit));
    let tensors = fw
        .param_ids
        .iter()
        .zip(&params.tensors)
        .map(|(&pid, t)| {
            grads[pid]
                .clone()
                .unwrap_or_else(|| Array2::zeros(t.value.dim()))
        })
        .collect();
    Ok(ModelGradients {
        tensors,
        loss,
        prob,
    })
}

/// Standalone structural convolution: relu(S (h W) + b) with the self-loop
/// normalized operator S.
pub fn gcn_layer(
    h: &Array2<f64>,
    adj: &NeighborList,
    w: &Array2<f64>,
    b: &Array2<f64>,
) -> Array2<f64> {
    let prop = Arc::new(Propagation::kipf(adj));
    let mut tape = Tape::new();
    let hid = tape.constant(h.clone());
    let wid = tape.constant(w.clone());
    let bid = tape.constant(b.clone());
    let m = tape.matmul(hid, wid);
    let s = tape.propagate(m, prop);
    let s = tape.add_row(s, bid);
    let out = tape.relu(s);
    tape.value(out).clone()
}

/// One attention head's parameters: projection and the 2h attention vector
/// (self half first, neighbor half second).
#[derive(Debug, Clone)]
pub struct GatHead {
    pub w: Array2<f64>,
    pub a: Array2<f64>,
}

/// Standalone attention layer over N(v) ∪ {v}. Hidden layers concatenate
/// heads and apply ReLU; the final layer averages heads with no activation.
pub fn gat_layer(
    h: &Array2<f64>,
    adj: &NeighborList,
    heads: &[GatHead],
    bias: &Array2<f64>,
    final_layer: bool,
) -> Array2<f64> {
    assert!(!heads.is_empty());
    let hid = heads[0].w.ncols();
    let segs = Arc::new(Segments::with_self_loops(adj));
    let sources = Arc::new(segs.sources().to_vec());
    let targets = Arc::new(segs.targets().to_vec());
    let mut tape = Tape::new();
    let x = tape.constant(h.clone());
    let mut outs = Vec::with_capacity(heads.len());
    for head in heads {
        let w = tape.constant(head.w.clone());
        let a = tape.constant(head.a.clone());
        let wh = tape.matmul(x, w);
        let a_self = tape.slice_rows(a, 0, hid);
        let a_neigh = tape.slice_rows(a, hid, hid);
        let s_self = tape.matmul(wh, a_self);
        let s_neigh = tape.matmul(wh, a_neigh);
        let e_self = tape.gather(s_self, targets.clone());
        let e_neigh = tape.gather(s_neigh, sources.clone());
        let e = tape.add(e_self, e_neigh);
        let e = tape.leaky_relu(e, GAT_LEAKY_SLOPE);
        let alpha = tape.seg_softmax(e, segs.clone());
        let vals = tape.gather(wh, sources.clone());
        outs.push(tape.seg_weighted_sum(vals, alpha, segs.clone()));
    }
    let b = tape.constant(bias.clone());
    let out = if final_layer {
        let mut acc = outs[0];
        for &o in &outs[1..] {
            acc = tape.add(acc, o);
        }
        let avg = tape.scale(acc, 1.0 / heads.len() as f64);
        tape.add_row(avg, b)
    } else {
        let mut acc = outs[0];
        for &o in &outs[1..] {
            acc = tape.concat_cols(acc, o);
        }
        let s = tape.add_row(acc, b);
        tape.relu(s)
    };
    tape.value(out).clone()
}

/// Gate parameters of the recurrent cell.
#[derive(Debug, Clone)]
pub struct GcrnGateParams {
    pub wz: Array2<f64>,
    pub bz: Array2<f64>,
    pub wr: Array2<f64>,
    pub br: Array2<f64>,
    pub wh: Array2<f64>,
    pub bh: Array2<f64>,
}

/// One step of the gated graph recurrence.
pub fn gcrn_cell(
    x_t: &[f64],
    h_prev: &Array2<f64>,
    adj: &NeighborList,
    gates: &GcrnGateParams,
) -> Array2<f64> {
    let prop = Propagation::kipf(adj);
    let x = ndarray::Array1::from_vec(x_t.to_vec());
    let (h, _) = graph_ops::gcrn_step(
        x.view(),
        h_prev,
        &prop,
        &gates.wz,
        &gates.bz,
        &gates.wr,
        &gates.br,
        &gates.wh,
        &gates.bh,
    );
    h
}

/// Two-linear-layer per-node baseline; consults no edges.
pub fn ffn_forward(g: &BrainGraph, params: &ModelParams) -> Result<f64> {
    if params.spec.arch != Arch::Ffn {
        return Err(Error::invalid("params", "not an FFN checkpoint"));
    }
    model_forward(g, &params.spec, params)
}
