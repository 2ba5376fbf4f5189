//! Grid-to-graph construction for the message-passing estimator.
//!
//! Every resource element is a node; node `v` for grid position `(m, n)` is
//! `v = m * num_symbols + n` — the same subcarrier-major order the grid and
//! feature tensors use. Each node receives directed edges from its `k`
//! nearest pilot REs under the squared integer grid distance `(dm)^2 +
//! (dn)^2`, ties broken by smaller pilot node id. Every node therefore has
//! the same in-degree `min(k, num_pilots)`, so the adjacency is a single
//! flat array with constant stride.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::grid::{GridConfig, ResourceGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("invalid graph config: {0}")]
    InvalidConfig(String),
}

/// Static topology: constant-degree pilot-to-node adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    num_subcarriers: usize,
    num_symbols: usize,
    degree: usize,
    /// Node ids of the pilot REs, ascending.
    pilot_nodes: Vec<u32>,
    /// `degree` source pilot node ids per node, node-major, each block
    /// sorted by (distance^2, pilot node id).
    neighbors: Vec<u32>,
}

impl GraphTopology {
    /// Builds the k-nearest-pilot topology for an `num_subcarriers x
    /// num_symbols` grid.
    pub fn build(
        num_subcarriers: usize,
        num_symbols: usize,
        pilot_positions: &[(usize, usize)],
        k: usize,
    ) -> Result<Self, GraphError> {
        let err = |m: &str| Err(GraphError::InvalidConfig(String::from(m)));
        if num_subcarriers == 0 || num_symbols == 0 {
            return err("grid dimensions must be positive");
        }
        if pilot_positions.is_empty() {
            return err("at least one pilot position is required");
        }
        if k == 0 {
            return err("k must be >= 1");
        }
        let num_nodes = num_subcarriers * num_symbols;
        if num_nodes > u32::MAX as usize {
            return err("grid too large for u32 node ids");
        }
        for &(m, n) in pilot_positions {
            if m >= num_subcarriers || n >= num_symbols {
                return err("pilot position outside the grid");
            }
        }

        let mut pilot_nodes: Vec<u32> = pilot_positions
            .iter()
            .map(|&(m, n)| (m * num_symbols + n) as u32)
            .collect();
        pilot_nodes.sort_unstable();
        if pilot_nodes.windows(2).any(|w| w[0] == w[1]) {
            return err("duplicate pilot position");
        }

        let degree = k.min(pilot_nodes.len());
        let mut neighbors = Vec::with_capacity(num_nodes * degree);
        // (distance^2, pilot node id) scratch, rebuilt per node.
        let mut scratch: Vec<(u64, u32)> = Vec::with_capacity(pilot_nodes.len());
        for m in 0..num_subcarriers {
            for n in 0..num_symbols {
                scratch.clear();
                for &(pm, pn) in pilot_positions {
                    let dm = m as i64 - pm as i64;
                    let dn = n as i64 - pn as i64;
                    let d2 = (dm * dm + dn * dn) as u64;
                    scratch.push((d2, (pm * num_symbols + pn) as u32));
                }
                if degree < scratch.len() {
                    scratch.select_nth_unstable(degree - 1);
                }
                let head = &mut scratch[..degree];
                head.sort_unstable();
                neighbors.extend(head.iter().map(|&(_, id)| id));
            }
        }

        Ok(GraphTopology { num_subcarriers, num_symbols, degree, pilot_nodes, neighbors })
    }

    /// Topology for a grid config's own pilot pattern.
    pub fn from_config(config: &GridConfig, k: usize) -> Result<Self, GraphError> {
        config.validate().map_err(|e| GraphError::InvalidConfig(e.to_string()))?;
        Self::build(config.num_subcarriers(), config.num_symbols, &config.pilot_positions(), k)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn num_nodes(&self) -> usize {
        self.num_subcarriers * self.num_symbols
    }

    /// Uniform in-degree of every node.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_edges(&self) -> usize {
        self.num_nodes() * self.degree
    }

    pub fn num_pilots(&self) -> usize {
        self.pilot_nodes.len()
    }

    /// Node ids of the pilot REs, ascending.
    pub fn pilot_nodes(&self) -> &[u32] {
        &self.pilot_nodes
    }

    #[inline]
    pub fn node_to_grid(&self, v: u32) -> (usize, usize) {
        let v = v as usize;
        (v / self.num_symbols, v % self.num_symbols)
    }

    #[inline]
    pub fn grid_to_node(&self, m: usize, n: usize) -> u32 {
        (m * self.num_symbols + n) as u32
    }

    /// Source pilot node ids feeding node `v`, sorted by (distance^2, id).
    #[inline]
    pub fn neighbors_of(&self, v: usize) -> &[u32] {
        &self.neighbors[v * self.degree..(v + 1) * self.degree]
    }

    /// All directed edges as (source pilot node, destination node).
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .map(move |(i, &src)| (src, (i / self.degree) as u32))
    }

    /// How many destination nodes each pilot feeds, in `pilot_nodes` order.
    pub fn pilot_out_degrees(&self) -> Vec<usize> {
        let mut counts = Vec::new();
        counts.resize(self.pilot_nodes.len(), 0usize);
        for &src in &self.neighbors {
            let idx = self.pilot_nodes.binary_search(&src).expect("neighbor is a pilot");
            counts[idx] += 1;
        }
        counts
    }
}

/// Node features in node-id order: `[re, im]` per node, flattened.
pub fn features_from_grid(grid: &ResourceGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.as_slice().len() * 2);
    for z in grid.as_slice() {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

/// Widens a packed f32 re/im tensor (already in node-id order) to f64.
pub fn features_from_f32(input: &[f32]) -> Vec<f64> {
    input.iter().map(|&x| x as f64).collect()
}

/// Repacks flattened `[re, im]` node values as complex numbers.
pub fn features_to_complex(features: &[f64]) -> Vec<Complex64> {
    features.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}
