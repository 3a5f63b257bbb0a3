//! Fixed graph operators shared by the architectures: the self-loop
//! degree-normalized propagation matrix, neighborhood segments for
//! attention, and the single gated recurrence step.

use ndarray::{Array2, ArrayView1};
use std::ops::Range;

use crate::graph::NeighborList;
use crate::gnn::tape::stable_sigmoid;

/// Symmetric propagation operator with self-loops:
/// entry (v,u) = 1/sqrt(d̂_v d̂_u) for u in N(v) plus (v,v) = 1/d̂_v,
/// where d̂ = degree + 1. Edge weights are not used; the convolution is
/// structural.
#[derive(Debug)]
pub struct Propagation {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Propagation {
    pub fn kipf(nl: &NeighborList) -> Self {
        let n = nl.n();
        let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((nl.degree(v) + 1) as f64).sqrt()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nl.total_entries() + n);
        let mut vals = Vec::with_capacity(nl.total_entries() + n);
        offsets.push(0);
        for v in 0..n {
            let mut self_inserted = false;
            for &(u, _w) in nl.neighbors(v) {
                if !self_inserted && (u as usize) > v {
                    cols.push(v as u32);
                    vals.push(inv_sqrt[v] * inv_sqrt[v]);
                    self_inserted = true;
                }
                cols.push(u);
                vals.push(inv_sqrt[v] * inv_sqrt[u as usize]);
            }
            if !self_inserted {
                cols.push(v as u32);
                vals.push(inv_sqrt[v] * inv_sqrt[v]);
            }
            offsets.push(cols.len());
        }
        Propagation {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// S * x with a fixed per-row summation order.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let (rows, d) = x.dim();
        debug_assert_eq!(rows, self.n);
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0f64; self.n * d];
        for v in 0..self.n {
            let orow = &mut out[v * d..(v + 1) * d];
            for k in self.offsets[v]..self.offsets[v + 1] {
                let c = self.cols[k] as usize;
                let w = self.vals[k];
                let xrow = &xs[c * d..(c + 1) * d];
                for j in 0..d {
                    orow[j] += w * xrow[j];
                }
            }
        }
        Array2::from_shape_vec((self.n, d), out).expect("shape")
    }
}

/// Directed neighborhoods N(v) ∪ {v} flattened per target node, entries
/// sorted by source id inside each segment. Segment s corresponds to target
/// node s; `sources` and `targets` give each entry's endpoints.
#[derive(Debug)]
pub struct Segments {
    offsets: Vec<usize>,
    sources: Vec<u32>,
    targets: Vec<u32>,
}

impl Segments {
    pub fn with_self_loops(nl: &NeighborList) -> Self {
        let n = nl.n();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut sources = Vec::with_capacity(nl.total_entries() + n);
        let mut targets = Vec::with_capacity(nl.total_entries() + n);
        offsets.push(0);
        for v in 0..n {
            let mut self_inserted = false;
            for &(u, _w) in nl.neighbors(v) {
                if !self_inserted && (u as usize) > v {
                    sources.push(v as u32);
                    targets.push(v as u32);
                    self_inserted = true;
                }
                sources.push(u);
                targets.push(v as u32);
            }
            if !self_inserted {
                sources.push(v as u32);
                targets.push(v as u32);
            }
            offsets.push(sources.len());
        }
        Segments {
            offsets,
            sources,
            targets,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_entries(&self) -> usize {
        self.sources.len()
    }

    pub fn range(&self, s: usize) -> Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn targets(&self) -> &[u32] {
        &self.targets
    }
}

/// Gate activations of one recurrence step, kept for backward.
pub(crate) struct GcrnGates {
    pub z: Array2<f64>,
    pub r: Array2<f64>,
    pub h_tilde: Array2<f64>,
    /// [x_t ‖ H_prev]
    pub c: Array2<f64>,
    /// [x_t ‖ r ⊙ H_prev]
    pub ch: Array2<f64>,
}

/// One gated graph recurrence step:
/// z = σ(GConv_z[x‖H]), r = σ(GConv_r[x‖H]), h~ = tanh(GConv_h[x‖r⊙H]),
/// H' = z⊙H + (1−z)⊙h~, each GConv being propagate(C·W) + b without
/// nonlinearity.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gcrn_step(
    x_t: ArrayView1<f64>,
    h_prev: &Array2<f64>,
    prop: &Propagation,
    wz: &Array2<f64>,
    bz: &Array2<f64>,
    wr: &Array2<f64>,
    br: &Array2<f64>,
    wh: &Array2<f64>,
    bh: &Array2<f64>,
) -> (Array2<f64>, GcrnGates) {
    let n = h_prev.nrows();
    let d = h_prev.ncols();

    let mut c = Array2::zeros((n, d + 1));
    c.column_mut(0).assign(&x_t);
    c.slice_mut(ndarray::s![.., 1..]).assign(h_prev);

    let az = prop.apply(&c.dot(wz)) + &bz.row(0);
    let z = az.mapv(stable_sigmoid);
    let ar = prop.apply(&c.dot(wr)) + &br.row(0);
    let r = ar.mapv(stable_sigmoid);

    let mut ch = Array2::zeros((n, d + 1));
    ch.column_mut(0).assign(&x_t);
    {
        let gated = &r * h_prev;
        ch.slice_mut(ndarray::s![.., 1..]).assign(&gated);
    }
    let ah = prop.apply(&ch.dot(wh)) + &bh.row(0);
    let h_tilde = ah.mapv(f64::tanh);

    let h_next = &z * h_prev + &z.mapv(|v| 1.0 - v) * &h_tilde;
    (
        h_next,
        GcrnGates {
            z,
            r,
            h_tilde,
            c,
            ch,
        },
    )
}
