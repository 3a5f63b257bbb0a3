//! Correlation graphs over voxels and the BGR1 on-disk container.
//!
//! Edges are stored once in canonical undirected form (src < dst, sorted
//! lexicographically); the symmetric view is materialized on demand by
//! [`BrainGraph::neighbor_list`]. Graphs are immutable after construction and
//! safe to share across threads read-only.
//!
//! BGR1 layout (little-endian): magic `BGR1`, u32 n, u32 t_len,
//! u32 edge_count, u8 label_flag, u8 label, n * 3 u32 coords,
//! n * t_len f32 series, edge_count * (u32 src, u32 dst, f32 weight).

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::voxels::VoxelSet;
use crate::wire::{Reader, Writer};

pub const BGR1_MAGIC: [u8; 4] = *b"BGR1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub weight: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainGraph {
    coords: Vec<[u32; 3]>,
    series: Array2<f32>,
    edges: Vec<Edge>,
    label: Option<u8>,
}

impl BrainGraph {
    pub fn new(
        coords: Vec<[u32; 3]>,
        series: Array2<f32>,
        edges: Vec<Edge>,
        label: Option<u8>,
    ) -> Result<Self> {
        let n = coords.len();
        if series.nrows() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: series.nrows(),
            });
        }
        if let Some(l) = label {
            if l > 1 {
                return Err(Error::invalid("label", format!("{l} not in {{0,1}}")));
            }
        }
        let mut prev: Option<(u32, u32)> = None;
        for e in &edges {
            if e.src as usize >= n || e.dst as usize >= n {
                return Err(Error::invalid(
                    "edge",
                    format!("({},{}) out of range for n={n}", e.src, e.dst),
                ));
            }
            if e.src >= e.dst {
                return Err(Error::invalid(
                    "edge",
                    format!("({},{}) not in canonical src<dst form", e.src, e.dst),
                ));
            }
            if let Some(p) = prev {
                if p >= (e.src, e.dst) {
                    return Err(Error::invalid(
                        "edge list",
                        format!("not strictly sorted at ({},{})", e.src, e.dst),
                    ));
                }
            }
            if !e.weight.is_finite() || e.weight <= -1.0 || e.weight > 1.0 {
                return Err(Error::invalid(
                    "edge weight",
                    format!("{} outside (-1, 1]", e.weight),
                ));
            }
            prev = Some((e.src, e.dst));
        }
        Ok(BrainGraph {
            coords,
            series,
            edges,
            label,
        })
    }

    pub fn from_voxels(vs: &VoxelSet, edges: Vec<Edge>) -> Result<Self> {
        BrainGraph::new(vs.coords().to_vec(), vs.series().clone(), edges, None)
    }

    pub fn with_label(mut self, label: u8) -> Result<Self> {
        if label > 1 {
            return Err(Error::invalid("label", format!("{label} not in {{0,1}}")));
        }
        self.label = Some(label);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn t_len(&self) -> usize {
        self.series.ncols()
    }

    pub fn coords(&self) -> &[[u32; 3]] {
        &self.coords
    }

    pub fn series(&self) -> &Array2<f32> {
        &self.series
    }

    pub fn series_row(&self, v: usize) -> &[f32] {
        self.series.row(v).to_slice().expect("series is row-major")
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / self.n() as f64
    }

    /// Node features: `[x, y, z]` cast to reals, then the node's series.
    pub fn node_feature_vector(&self, v: usize) -> Result<Vec<f64>> {
        if v >= self.n() {
            return Err(Error::NodeOutOfRange { node: v, n: self.n() });
        }
        let mut out = Vec::with_capacity(3 + self.t_len());
        out.extend(self.coords[v].iter().map(|&c| c as f64));
        out.extend(self.series_row(v).iter().map(|&s| s as f64));
        Ok(out)
    }

    /// Symmetric adjacency view: every undirected edge appears in both
    /// endpoint lists, each list sorted by neighbor id.
    pub fn neighbor_list(&self) -> NeighborList {
        let n = self.n();
        let mut degree = vec![0usize; n];
        for e in &self.edges {
            degree[e.src as usize] += 1;
            degree[e.dst as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for d in &degree {
            acc += d;
            offsets.push(acc);
        }
        let mut fill = offsets.clone();
        let mut entries = vec![(0u32, 0f32); acc];
        // Edges are sorted by (src,dst); incoming entries (src < v) land before
        // outgoing (dst > v), so each per-node list comes out sorted by id.
        for e in &self.edges {
            entries[fill[e.src as usize]] = (e.dst, e.weight);
            fill[e.src as usize] += 1;
            entries[fill[e.dst as usize]] = (e.src, e.weight);
            fill[e.dst as usize] += 1;
        }
        NeighborList { offsets, entries }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n();
        let t = self.t_len();
        let cap = 20 + n * 12 + n * t * 4 + self.edges.len() * 12;
        let mut w = Writer::with_capacity(cap);
        w.magic(&BGR1_MAGIC);
        w.u32(n as u32);
        w.u32(t as u32);
        w.u32(self.edges.len() as u32);
        w.u8(self.label.is_some() as u8);
        w.u8(self.label.unwrap_or(0));
        for c in &self.coords {
            w.u32(c[0]);
            w.u32(c[1]);
            w.u32(c[2]);
        }
        for row in self.series.rows() {
            for &v in row.to_slice().expect("row-major") {
                w.f32(v);
            }
        }
        for e in &self.edges {
            w.u32(e.src);
            w.u32(e.dst);
            w.f32(e.weight);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "BGR1 graph");
        r.magic(&BGR1_MAGIC)?;
        let n = r.u32()? as usize;
        let t = r.u32()? as usize;
        let edge_count = r.u32()? as usize;
        let label_flag = r.u8()?;
        let label_byte = r.u8()?;
        if n == 0 {
            return Err(Error::ZeroDim { what: "node count" });
        }
        if t == 0 {
            return Err(Error::ZeroDim { what: "time dim" });
        }
        if label_flag > 1 {
            return Err(Error::invalid("label flag", format!("{label_flag}")));
        }
        let label = (label_flag == 1).then_some(label_byte);
        let mut coords = Vec::with_capacity(n);
        for _ in 0..n {
            coords.push([r.u32()?, r.u32()?, r.u32()?]);
        }
        let series = Array2::from_shape_vec((n, t), r.f32_vec(n * t)?).expect("shape");
        let mut edges = Vec::with_capacity(edge_count);
        for _ in 0..edge_count {
            edges.push(Edge {
                src: r.u32()?,
                dst: r.u32()?,
                weight: r.f32()?,
            });
        }
        r.finish()?;
        BrainGraph::new(coords, series, edges, label)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(e, path.as_ref()))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(e, path.as_ref()))?;
        Self::from_bytes(&bytes)
    }
}

/// CSR-style symmetric adjacency: `neighbors(v)` yields (id, weight) pairs
/// sorted by id. Total entries across nodes equal 2 * |edges|.
#[derive(Debug, Clone)]
pub struct NeighborList {
    offsets: Vec<usize>,
    entries: Vec<(u32, f32)>,
}

impl NeighborList {
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[(u32, f32)] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn total_entries(&self) -> usize {
        self.entries.len()
    }
}
