//! Graph generation from a graphon, packed adjacency storage and edge-list IO.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Graphon;
use crate::rng::{indexed_stream, open_unit, stream};

/// Number of dyads `i < j` on `n` vertices.
pub fn dyad_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of dyad `(i, j)`, `i < j`, in upper-triangular row order.
#[inline]
pub fn dyad_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`dyad_index`].
pub fn dyad_from_index(n: usize, idx: usize) -> (usize, usize) {
    // row i starts at i*n - i(i+1)/2; walk from a float estimate
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * idx as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as usize;
    i = i.min(n.saturating_sub(2));
    while i > 0 && row_start(n, i) > idx {
        i -= 1;
    }
    while i + 1 < n && row_start(n, i + 1) <= idx {
        i += 1;
    }
    (i, idx - row_start(n, i) + i + 1)
}

fn row_start(n: usize, i: usize) -> usize {
    i * n - i * (i + 1) / 2
}

/// Symmetric 0/1 array over dyads with zero diagonal, stored as packed
/// upper-triangular bits. Also used as a dyad mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    bits: Vec<u64>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Adjacency { n, bits: vec![0; dyad_count(n).div_ceil(64)] }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        let total = dyad_count(n);
        for (w, word) in a.bits.iter_mut().enumerate() {
            let lo = w * 64;
            let len = (total - lo).min(64);
            *word = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        }
        a
    }

    /// Build from an edge list; self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut a = Self::empty(n);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i != j {
                a.set(i, j, true);
            }
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.get_index(dyad_index(self.n, a, b))
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i != j, "diagonal dyads are always zero");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.set_index(dyad_index(self.n, a, b), value);
    }

    #[inline]
    pub fn set_index(&mut self, idx: usize, value: bool) {
        let mask = 1u64 << (idx % 64);
        if value {
            self.bits[idx / 64] |= mask;
        } else {
            self.bits[idx / 64] &= !mask;
        }
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Linear dyad indices of set entries, ascending.
    pub fn set_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                (rest != 0).then(|| {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    w * 64 + b
                })
            })
        })
    }

    /// Edges `(i, j)` with `i < j` in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..n.saturating_sub(1) {
            let (lo, hi) = (row_start(n, i), row_start(n, i + 1));
            let mut idx = lo;
            while idx < hi {
                let word = self.bits[idx / 64] >> (idx % 64);
                if word == 0 {
                    idx = (idx / 64 + 1) * 64;
                    continue;
                }
                idx += word.trailing_zeros() as usize;
                if idx < hi {
                    out.push((i, idx - lo + i + 1));
                }
                idx += 1;
            }
        }
        out
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for (i, j) in self.edges() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Sorted neighbour lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, j) in self.edges() {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Number of triangles, by intersecting dense row bitsets.
    pub fn triangle_count(&self) -> u64 {
        let n = self.n;
        let words = n.div_ceil(64);
        let mut rows = vec![0u64; n * words];
        let edges = self.edges();
        for &(i, j) in &edges {
            rows[i * words + j / 64] |= 1 << (j % 64);
            rows[j * words + i / 64] |= 1 << (i % 64);
        }
        let total: u64 = edges
            .par_iter()
            .map(|&(i, j)| {
                let (ri, rj) = (&rows[i * words..(i + 1) * words], &rows[j * words..(j + 1) * words]);
                ri.iter().zip(rj).map(|(a, b)| (a & b).count_ones() as u64).sum::<u64>()
            })
            .sum();
        total / 3
    }

    /// Bitwise complement over dyads.
    pub fn complement(&self) -> Adjacency {
        let mut out = Adjacency::complete(self.n);
        for (o, w) in out.bits.iter_mut().zip(&self.bits) {
            *o &= !w;
        }
        out
    }

    /// Entries set in `self` but not in `mask`.
    pub fn without(&self, mask: &Adjacency) -> Adjacency {
        assert_eq!(self.n, mask.n);
        let bits = self.bits.iter().zip(&mask.bits).map(|(a, m)| a & !m).collect();
        Adjacency { n: self.n, bits }
    }

    /// Relabelled copy with `out(i, j) = self(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Adjacency {
        let mut out = Adjacency::empty(self.n);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.get(perm[i], perm[j]) {
                    out.set(i, j, true);
                }
            }
        }
        out
    }
}

/// Latent positions together with the adjacency they generated.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentGraph {
    pub positions: Vec<f64>,
    pub adj: Adjacency,
}

impl LatentGraph {
    pub fn new(positions: Vec<f64>, adj: Adjacency) -> Result<Self> {
        if positions.len() != adj.n() {
            return Err(Error::Dimension(format!(
                "{} positions for a graph on {} vertices",
                positions.len(),
                adj.n()
            )));
        }
        if let Some(u) = positions.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(Error::InvalidInput(format!("latent position {u} outside (0, 1)")));
        }
        Ok(LatentGraph { positions, adj })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }
}

/// `n` i.i.d. uniforms on the open unit interval.
pub fn sample_positions(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, "positions");
    (0..n).map(|_| open_unit(&mut rng)).collect()
}

/// Edges `A_ij = 1{xi_ij <= p(U_i, U_j)}` with `xi` read from per-row streams.
///
/// Row `i` draws `xi_{i,i+1}, ..., xi_{i,n-1}` from its own counter stream.
pub fn sample_edges_with<F>(positions: &[f64], seed: u64, prob: F) -> Adjacency
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let n = positions.len();
    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = indexed_stream(seed, "edges", i as u64);
            let ui = positions[i];
            ((i + 1)..n)
                .filter(|&j| rng.random::<f64>() <= prob(ui, positions[j]))
                .map(|j| j as u32)
                .collect()
        })
        .collect();
    let mut adj = Adjacency::empty(n);
    for (i, row) in rows.into_iter().enumerate() {
        for j in row {
            adj.set_index(dyad_index(n, i, j as usize), true);
        }
    }
    adj
}

/// Draw `U` and then `A | U` from `g`.
pub fn sample_graph(g: &Graphon, n: usize, seed: u64) -> Result<LatentGraph> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let positions = sample_positions(n, seed);
    let adj = sample_edges_with(&positions, seed, |x, y| g.eval(x, y));
    Ok(LatentGraph { positions, adj })
}

/// A sample that keeps its dyad uniforms `xi` (upper-triangular row order).
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSample {
    pub graph: LatentGraph,
    pub xi: Vec<f64>,
}

impl CoupledSample {
    pub fn xi(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.xi[dyad_index(self.graph.n(), a, b)]
    }

    /// Rebuild edges after relabelling vertex `i` as `perm[i]`:
    /// `U'_i = U_{perm[i]}`, `xi'_{ij} = xi_{perm[i] perm[j]}`.
    pub fn rederive_permuted(&self, g: &Graphon, perm: &[usize]) -> Result<LatentGraph> {
        let n = self.graph.n();
        check_permutation(perm, n)?;
        let positions: Vec<f64> = perm.iter().map(|&p| self.graph.positions[p]).collect();
        let mut adj = Adjacency::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if self.xi(perm[i], perm[j]) <= g.eval(positions[i], positions[j]) {
                    adj.set(i, j, true);
                }
            }
        }
        Ok(LatentGraph { positions, adj })
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidInput("not a permutation".into()));
    }
    Ok(())
}

/// As [`sample_graph`], also returning the dyad uniforms.
pub fn sample_coupled(g: &Graphon, n: usize, seed: u64) -> Result<CoupledSample> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let positions = sample_positions(n, seed);
    let xi: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = indexed_stream(seed, "edges", i as u64);
            ((i + 1)..n).map(move |_| rng.random::<f64>()).collect::<Vec<_>>()
        })
        .collect();
    let mut adj = Adjacency::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let idx = dyad_index(n, i, j);
            if xi[idx] <= g.eval(positions[i], positions[j]) {
                adj.set_index(idx, true);
            }
        }
    }
    Ok(CoupledSample { graph: LatentGraph { positions, adj }, xi })
}

/// Vertices sorted by latent position, ties by index.
pub fn position_order(positions: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]).then(a.cmp(&b)));
    order
}

/// Ordered empirical graphon as an `n x n` row-major 0/1 surface.
pub fn empirical_step_graphon(lg: &LatentGraph) -> Vec<f64> {
    let n = lg.n();
    let order = position_order(&lg.positions);
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            if lg.adj.get(order[a], order[b]) {
                out[a * n + b] = 1.0;
            }
        }
    }
    out
}

/// Parse an undirected edge list ("i j" per line, `#` comments).
///
/// The vertex count is the larger of `min_n` and one plus the largest id.
pub fn read_edge_list(text: &str, min_n: usize) -> Result<Adjacency> {
    let mut edges = Vec::new();
    let mut n = min_n;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next_id = || -> Result<usize> {
            fields
                .next()
                .ok_or_else(|| Error::Parse { line: lineno + 1, msg: "expected two vertex ids".into() })?
                .parse::<usize>()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })
        };
        let (i, j) = (next_id()?, next_id()?);
        n = n.max(i + 1).max(j + 1);
        edges.push((i, j));
    }
    Adjacency::from_edges(n, edges)
}

pub fn write_edge_list(adj: &Adjacency) -> String {
    let mut out = format!("# n={}\n", adj.n());
    for (i, j) in adj.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    out
}

/// Positions as CSV `vertex,u`.
pub fn write_positions(positions: &[f64]) -> String {
    let mut out = String::from("vertex,u\n");
    for (i, u) in positions.iter().enumerate() {
        out.push_str(&format!("{i},{u}\n"));
    }
    out
}

pub fn read_positions(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno + 1, msg };
        let (v, u) = line.split_once(',').ok_or_else(|| err("expected vertex,u".into()))?;
        let v: usize = v.trim().parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
        if v != out.len() {
            return Err(err(format!("vertex {v} out of order")));
        }
        out.push(u.trim().parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?);
    }
    Ok(out)
}

/// Header line `# n=<count>` written by [`write_edge_list`], if present.
pub fn edge_list_vertex_hint(text: &str) -> usize {
    text.lines()
        .next()
        .and_then(|l| l.trim().strip_prefix("# n="))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}
