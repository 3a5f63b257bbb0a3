//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! Every forward op evaluates eagerly and records what its backward needs.
//! The op set is exactly what the four architectures use: dense matmul,
//! elementwise maps, a fixed sparse propagation operator, per-neighborhood
//! softmax/weighted-sum for attention, and a fused recurrence op for the
//! gated graph cell (which checkpoints hidden states and recomputes gate
//! activations on the way back instead of taping all T steps).
//!
//! Leaves are either `param` (differentiated) or `constant` (input data);
//! backward skips any branch that cannot reach a param, so e.g. the large
//! d(loss)/d(features) matmul is never formed.

use std::sync::Arc;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::gnn::graph_ops::{gcrn_step, Propagation, Segments};

pub(crate) type NodeId = usize;

#[derive(Clone, Copy)]
pub(crate) struct GcrnParamIds {
    pub wz: NodeId,
    pub bz: NodeId,
    pub wr: NodeId,
    pub br: NodeId,
    pub wh: NodeId,
    pub bh: NodeId,
}

struct GcrnUnrollNode {
    p: GcrnParamIds,
    prop: Arc<Propagation>,
    x_seq: Arc<Array2<f64>>,
    /// Column of `x_seq` where the per-step scalars start.
    col_start: usize,
    /// H_0 .. H_T; gates are recomputed from these during backward.
    states: Vec<Array2<f64>>,
}

// A few ops (elementwise mul, sigmoid, tanh, mean_all) are only reached by
// the gradient-check tests today but belong to the op set; keep them.
#[allow(dead_code)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// (n x d) plus a broadcast (1 x d) row.
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    OneMinus(NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Propagate(NodeId, Arc<Propagation>),
    MeanRows(NodeId),
    MeanAll(NodeId),
    ConcatCols(NodeId, NodeId),
    SliceRows(NodeId, usize, usize),
    Gather(NodeId, Arc<Vec<u32>>),
    SegSoftmax(NodeId, Arc<Segments>),
    SegWeightedSum {
        values: NodeId,
        weights: NodeId,
        segs: Arc<Segments>,
    },
    GcrnUnroll(Box<GcrnUnrollNode>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

pub(crate) struct Tape {
    nodes: Vec<Node>,
}

#[allow(dead_code)]
impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].needs_grad
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    /// Differentiated leaf.
    pub fn param(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Data leaf; no gradient is propagated into it.
    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.dot(&self.nodes[b].value);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a].value + &self.nodes[b].value;
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Add(a, b), ng)
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let r = &self.nodes[row].value;
        debug_assert_eq!(r.nrows(), 1);
        let v = &self.nodes[a].value + &r.row(0);
        let ng = self.needs(a) || self.needs(row);
        self.push(v, Op::AddRow(a, row), ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a].value * &self.nodes[b].value;
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a].value * c;
        let ng = self.needs(a);
        self.push(v, Op::Scale(a, c), ng)
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.mapv(|x| 1.0 - x);
        let ng = self.needs(a);
        self.push(v, Op::OneMinus(a), ng)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.mapv(|x| x.max(0.0));
        let ng = self.needs(a);
        self.push(v, Op::Relu(a), ng)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let v = self.nodes[a]
            .value
            .mapv(|x| if x > 0.0 { x } else { slope * x });
        let ng = self.needs(a);
        self.push(v, Op::LeakyRelu(a, slope), ng)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.mapv(stable_sigmoid);
        let ng = self.needs(a);
        self.push(v, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.mapv(f64::tanh);
        let ng = self.needs(a);
        self.push(v, Op::Tanh(a), ng)
    }

    pub fn propagate(&mut self, a: NodeId, prop: Arc<Propagation>) -> NodeId {
        let v = prop.apply(&self.nodes[a].value);
        let ng = self.needs(a);
        self.push(v, Op::Propagate(a, prop), ng)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a].value;
        let v = x
            .mean_axis(Axis(0))
            .expect("non-empty")
            .insert_axis(Axis(0));
        let ng = self.needs(a);
        self.push(v, Op::MeanRows(a), ng)
    }

    /// Mean over every entry, as a 1x1 matrix.
    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a].value;
        let m = x.sum() / (x.len() as f64);
        let ng = self.needs(a);
        self.push(Array2::from_elem((1, 1), m), Op::MeanAll(a), ng)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let left = &self.nodes[a].value;
        let right = &self.nodes[b].value;
        let v = ndarray::concatenate(Axis(1), &[left.view(), right.view()]).expect("same rows");
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::ConcatCols(a, b), ng)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.nodes[a]
            .value
            .slice(ndarray::s![start..start + len, ..])
            .to_owned();
        let ng = self.needs(a);
        self.push(v, Op::SliceRows(a, start, len), ng)
    }

    pub fn gather(&mut self, a: NodeId, idx: Arc<Vec<u32>>) -> NodeId {
        let x = &self.nodes[a].value;
        let d = x.ncols();
        let mut v = Array2::zeros((idx.len(), d));
        for (row, &i) in idx.iter().enumerate() {
            v.row_mut(row).assign(&x.row(i as usize));
        }
        let ng = self.needs(a);
        self.push(v, Op::Gather(a, idx), ng)
    }

    /// Softmax over each segment of an (entries x 1) score column.
    pub fn seg_softmax(&mut self, a: NodeId, segs: Arc<Segments>) -> NodeId {
        let x = &self.nodes[a].value;
        debug_assert_eq!(x.ncols(), 1);
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0f64; xs.len()];
        for s in 0..segs.n_segments() {
            let range = segs.range(s);
            let m = xs[range.clone()]
                .iter()
                .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut sum = 0.0;
            for e in range.clone() {
                let v = (xs[e] - m).exp();
                out[e] = v;
                sum += v;
            }
            for e in range {
                out[e] /= sum;
            }
        }
        let v = Array2::from_shape_vec((xs.len(), 1), out).expect("shape");
        let ng = self.needs(a);
        self.push(v, Op::SegSoftmax(a, segs), ng)
    }

    /// out[s] = sum over entries e of segment s of weights[e] * values[e].
    pub fn seg_weighted_sum(
        &mut self,
        values: NodeId,
        weights: NodeId,
        segs: Arc<Segments>,
    ) -> NodeId {
        let vals = &self.nodes[values].value;
        let w = &self.nodes[weights].value;
        debug_assert_eq!(w.ncols(), 1);
        let d = vals.ncols();
        let mut out = Array2::zeros((segs.n_segments(), d));
        for s in 0..segs.n_segments() {
            let mut row = out.row_mut(s);
            for e in segs.range(s) {
                let we = w[(e, 0)];
                row.scaled_add(we, &vals.row(e));
            }
        }
        let ng = self.needs(values) || self.needs(weights);
        self.push(
            out,
            Op::SegWeightedSum {
                values,
                weights,
                segs,
            },
            ng,
        )
    }

    /// Runs the gated graph recurrence over all time steps (columns
    /// `col_start..` of `x_seq`) and returns H_T.
    ///
    /// Fails with a numeric error if any intermediate state goes non-finite,
    /// so saturation inside the recurrence cannot silently wash out.
    pub fn gcrn_unroll(
        &mut self,
        p: GcrnParamIds,
        prop: Arc<Propagation>,
        x_seq: Arc<Array2<f64>>,
        col_start: usize,
        hidden: usize,
        failure_layer: usize,
    ) -> Result<NodeId> {
        let n = x_seq.nrows();
        let t_len = x_seq.ncols() - col_start;
        let mut states = Vec::with_capacity(t_len + 1);
        states.push(Array2::zeros((n, hidden)));
        for t in 0..t_len {
            let (h_next, _) = gcrn_step(
                x_seq.column(col_start + t),
                &states[t],
                &prop,
                &self.nodes[p.wz].value,
                &self.nodes[p.bz].value,
                &self.nodes[p.wr].value,
                &self.nodes[p.br].value,
                &self.nodes[p.wh].value,
                &self.nodes[p.bh].value,
            );
            if !h_next.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericFailure {
                    layer: failure_layer,
                });
            }
            states.push(h_next);
        }
        let value = states.last().expect("at least H_0").clone();
        Ok(self.push(
            value,
            Op::GcrnUnroll(Box::new(GcrnUnrollNode {
                p,
                prop,
                x_seq,
                col_start,
                states,
            })),
            true,
        ))
    }

    /// Reverse sweep from `seed` (seeded with `seed_grad`); returns one grad
    /// slot per node, populated for params and intermediates on a grad path.
    pub fn backward(&self, seed: NodeId, seed_grad: Array2<f64>) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[seed] = Some(seed_grad);
        for id in (0..=seed).rev() {
            if grads[id].is_none() || matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            let g = grads[id].take().expect("checked above");
            match &self.nodes[id].op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let ga = g.dot(&self.nodes[*b].value.t());
                        add_grad(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = self.nodes[*a].value.t().dot(&g);
                        add_grad(&mut grads, *b, gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        add_grad(&mut grads, *a, g.clone());
                    }
                    if self.needs(*b) {
                        add_grad(&mut grads, *b, g);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.needs(*row) {
                        let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        add_grad(&mut grads, *row, gr);
                    }
                    if self.needs(*a) {
                        add_grad(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        let ga = &g * &self.nodes[*b].value;
                        add_grad(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = &g * &self.nodes[*a].value;
                        add_grad(&mut grads, *b, gb);
                    }
                }
                Op::Scale(a, c) => {
                    if self.needs(*a) {
                        add_grad(&mut grads, *a, &g * *c);
                    }
                }
                Op::OneMinus(a) => {
                    if self.needs(*a) {
                        add_grad(&mut grads, *a, -&g);
                    }
                }
                Op::Relu(a) => {
                    if self.needs(*a) {
                        let mask = self.nodes[id]
                            .value
                            .mapv(|y| if y > 0.0 { 1.0 } else { 0.0 });
                        add_grad(&mut grads, *a, &g * &mask);
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    if self.needs(*a) {
                        let s = *slope;
                        let mask = self.nodes[*a].value.mapv(|x| if x > 0.0 { 1.0 } else { s });
                        add_grad(&mut grads, *a, &g * &mask);
                    }
                }
                Op::Sigmoid(a) => {
                    if self.needs(*a) {
                        let y = &self.nodes[id].value;
                        let ga = &g * &(y * &y.mapv(|v| 1.0 - v));
                        add_grad(&mut grads, *a, ga);
                    }
                }
                Op::Tanh(a) => {
                    if self.needs(*a) {
                        let y = &self.nodes[id].value;
                        let ga = &g * &y.mapv(|v| 1.0 - v * v);
                        add_grad(&mut grads, *a, ga);
                    }
                }
                Op::Propagate(a, prop) => {
                    // S is symmetric, so the adjoint is another apply
                    if self.needs(*a) {
                        add_grad(&mut grads, *a, prop.apply(&g));
                    }
                }
                Op::MeanRows(a) => {
                    if self.needs(*a) {
                        let n = self.nodes[*a].value.nrows();
                        let scaled = &g.row(0) / n as f64;
                        let mut ga = Array2::zeros(self.nodes[*a].value.dim());
                        for mut row in ga.rows_mut() {
                            row.assign(&scaled);
                        }
                        add_grad(&mut grads, *a, ga);
                    }
                }
                Op::MeanAll(a) => {
                    if self.needs(*a) {
                        let dim = self.nodes[*a].value.dim();
                        let scale = g[(0, 0)] / (dim.0 * dim.1) as f64;
                        add_grad(&mut grads, *a, Array2::from_elem(dim, scale));
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.nodes[*a].value.ncols();
                    if self.needs(*a) {
                        let ga = g.slice(ndarray::s![.., ..ca]).to_owned();
                        add_grad(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = g.slice(ndarray::s![.., ca..]).to_owned();
                        add_grad(&mut grads, *b, gb);
                    }
                }
                Op::SliceRows(a, start, len) => {
                    if self.needs(*a) {
                        let mut ga = Array2::zeros(self.nodes[*a].value.dim());
                        ga.slice_mut(ndarray::s![*start..*start + *len, ..])
                            .assign(&g);
                        add_grad(&mut grads, *a, ga);
                    }
                }
                Op::Gather(a, idx) => {
                    if self.needs(*a) {
                        let mut ga = Array2::zeros(self.nodes[*a].value.dim());
                        for (row, &i) in idx.iter().enumerate() {
                            let mut target = ga.row_mut(i as usize);
                            target += &g.row(row);
                        }
                        add_grad(&mut grads, *a, ga);
                    }
                }
                Op::SegSoftmax(a, segs) => {
                    if self.needs(*a) {
                        let y = &self.nodes[id].value;
                        let ys = y.as_slice().expect("standard layout");
                        let gs = g.as_slice().expect("standard layout");
                        let mut ga = vec![0.0f64; ys.len()];
                        for s in 0..segs.n_segments() {
                            let range = segs.range(s);
                            let dot: f64 = range.clone().map(|e| gs[e] * ys[e]).sum();
                            for e in range {
                                ga[e] = ys[e] * (gs[e] - dot);
                            }
                        }
                        add_grad(
                            &mut grads,
                            *a,
                            Array2::from_shape_vec((ys.len(), 1), ga).expect("shape"),
                        );
                    }
                }
                Op::SegWeightedSum {
                    values,
                    weights,
                    segs,
                } => {
                    let vals = &self.nodes[*values].value;
                    let w = &self.nodes[*weights].value;
                    let d = vals.ncols();
                    let needs_vals = self.needs(*values);
                    let needs_w = self.needs(*weights);
                    let mut gv = Array2::zeros(vals.dim());
                    let mut gw = Array2::zeros(w.dim());
                    for s in 0..segs.n_segments() {
                        let gout = g.row(s);
                        for e in segs.range(s) {
                            if needs_vals {
                                let we = w[(e, 0)];
                                let mut gve = gv.row_mut(e);
                                gve.scaled_add(we, &gout);
                            }
                            if needs_w {
                                let mut acc = 0.0;
                                let ve = vals.row(e);
                                for j in 0..d {
                                    acc += gout[j] * ve[j];
                                }
                                gw[(e, 0)] = acc;
                            }
                        }
                    }
                    if needs_vals {
                        add_grad(&mut grads, *values, gv);
                    }
                    if needs_w {
                        add_grad(&mut grads, *weights, gw);
                    }
                }
                Op::GcrnUnroll(u) => {
                    self.gcrn_backward(u, g, &mut grads);
                }
            }
        }
        grads
    }

    /// Backprop-through-time for the fused recurrence: walks steps in reverse,
    /// recomputing gate activations from the checkpointed states.
    fn gcrn_backward(
        &self,
        u: &GcrnUnrollNode,
        g_out: Array2<f64>,
        grads: &mut Vec<Option<Array2<f64>>>,
    ) {
        let wz = &self.nodes[u.p.wz].value;
        let bz = &self.nodes[u.p.bz].value;
        let wr = &self.nodes[u.p.wr].value;
        let br = &self.nodes[u.p.br].value;
        let wh = &self.nodes[u.p.wh].value;
        let bh = &self.nodes[u.p.bh].value;

        let mut gwz = Array2::zeros(wz.dim());
        let mut gbz = Array2::zeros(bz.dim());
        let mut gwr = Array2::zeros(wr.dim());
        let mut gbr = Array2::zeros(br.dim());
        let mut gwh = Array2::zeros(wh.dim());
        let mut gbh = Array2::zeros(bh.dim());

        let t_len = u.x_seq.ncols() - u.col_start;
        let mut g_h = g_out;
        for t in (0..t_len).rev() {
            let h_prev = &u.states[t];
            let (_, gates) = gcrn_step(
                u.x_seq.column(u.col_start + t),
                h_prev,
                &u.prop,
                wz,
                bz,
                wr,
                br,
                wh,
                bh,
            );

            let dz = &g_h * &(h_prev - &gates.h_tilde);
            let dh_tilde = &g_h * &gates.z.mapv(|v| 1.0 - v);
            let mut g_h_prev = &g_h * &gates.z;

            // candidate gate: h~ = tanh(S(Ch Wh) + bh)
            let d_ah = &dh_tilde * &gates.h_tilde.mapv(|v| 1.0 - v * v);
            gbh += &d_ah.sum_axis(Axis(0)).insert_axis(Axis(0));
            let d_mh = u.prop.apply(&d_ah);
            gwh += &gates.ch.t().dot(&d_mh);
            let d_ch = d_mh.dot(&wh.t());
            let d_rh = d_ch.slice(ndarray::s![.., 1..]).to_owned();
            let dr = &d_rh * h_prev;
            g_h_prev += &(&d_rh * &gates.r);

            // update gate
            let d_az = &dz * &(&gates.z * &gates.z.mapv(|v| 1.0 - v));
            gbz += &d_az.sum_axis(Axis(0)).insert_axis(Axis(0));
            let d_mz = u.prop.apply(&d_az);
            gwz += &gates.c.t().dot(&d_mz);
            let d_cz = d_mz.dot(&wz.t());

            // reset gate
            let d_ar = &dr * &(&gates.r * &gates.r.mapv(|v| 1.0 - v));
            gbr += &d_ar.sum_axis(Axis(0)).insert_axis(Axis(0));
            let d_mr = u.prop.apply(&d_ar);
            gwr += &gates.c.t().dot(&d_mr);
            let d_cr = d_mr.dot(&wr.t());

            let d_c = &d_cz + &d_cr;
            g_h_prev += &d_c.slice(ndarray::s![.., 1..]);
            g_h = g_h_prev;
        }

        add_grad(grads, u.p.wz, gwz);
        add_grad(grads, u.p.bz, gbz);
        add_grad(grads, u.p.wr, gwr);
        add_grad(grads, u.p.br, gbr);
        add_grad(grads, u.p.wh, gwh);
        add_grad(grads, u.p.bh, gbh);
    }
}

fn add_grad(grads: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
    match &mut grads[id] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
