//! Homogeneous Erdős–Rényi graphs, undirected `G(n, p)` and directed `D(n, p)`.
//!
//! Edge slots are ordered row-major: for undirected models the pairs `(i, j)`
//! with `i < j`, for directed models the ordered pairs `(i, j)` with `i != j`.
//! Both sampling and enumeration walk the slots in that order, and bit `s` of
//! an enumeration mask is the indicator of slot `s`.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{self, SampleRng};
use crate::{Error, Result};

/// Largest number of edge slots [`enumerate_weighted`] accepts.
pub const ENUMERATION_SLOT_CAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErModel {
    n: usize,
    p: f64,
    directed: bool,
}

impl ErModel {
    pub fn new(n: usize, p: f64, directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("n must be at least 1"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidModel("p must lie in [0, 1]"));
        }
        Ok(Self { n, p, directed })
    }

    pub fn undirected(n: usize, p: f64) -> Result<Self> {
        Self::new(n, p, false)
    }

    pub fn directed(n: usize, p: f64) -> Result<Self> {
        Self::new(n, p, true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn slots(&self) -> usize {
        edge_slots(self.n, self.directed)
    }

    pub fn is_enumerable(&self) -> bool {
        self.slots() <= ENUMERATION_SLOT_CAP
    }
}

/// The edge-probability family `p(n) = min(1, c * ln(n)^a / n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRule {
    pub c: f64,
    pub a: f64,
}

impl RegimeRule {
    pub fn new(c: f64, a: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument("regime scale c must be positive"));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument("regime exponent a must be non-negative"));
        }
        Ok(Self { c, a })
    }

    pub fn p(&self, n: usize) -> Result<f64> {
        regime_p(*self, n)
    }
}

pub fn regime_p(rule: RegimeRule, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("regime needs n >= 2"));
    }
    let nf = n as f64;
    let p = rule.c * libm::pow(libm::log(nf), rule.a) / nf;
    Ok(p.min(1.0))
}

pub fn edge_slots(n: usize, directed: bool) -> usize {
    if directed {
        n * n.saturating_sub(1)
    } else {
        n * n.saturating_sub(1) / 2
    }
}

fn row_slots(n: usize, directed: bool, i: usize) -> usize {
    if directed {
        n - 1
    } else {
        n - 1 - i
    }
}

/// The node pair behind slot `s`.
pub fn slot_pair(n: usize, directed: bool, s: usize) -> (usize, usize) {
    debug_assert!(s < edge_slots(n, directed));
    if directed {
        let i = s / (n - 1);
        let r = s % (n - 1);
        (i, if r < i { r } else { r + 1 })
    } else {
        let mut rest = s;
        let mut i = 0;
        while rest >= n - 1 - i {
            rest -= n - 1 - i;
            i += 1;
        }
        (i, i + 1 + rest)
    }
}

/// Simple graph on nodes `0..n`, stored as sorted (out-)neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    directed: bool,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Graph {
    pub fn empty(n: usize, directed: bool) -> Self {
        Self { n, directed, offsets: vec![0; n + 1], targets: Vec::new() }
    }

    /// Build from edges listed in slot order (each undirected edge once, `i < j`).
    fn from_slot_edges(n: usize, directed: bool, edges: &[(u32, u32)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j) in edges {
            counts[i as usize + 1] += 1;
            if !directed {
                counts[j as usize + 1] += 1;
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut targets = vec![0u32; offsets[n]];
        // Edges arrive sorted by (i, j); filling both ends in that order keeps
        // every row sorted.
        for &(i, j) in edges {
            targets[cursor[i as usize]] = j;
            cursor[i as usize] += 1;
            if !directed {
                targets[cursor[j as usize]] = i;
                cursor[j as usize] += 1;
            }
        }
        Self { n, directed, offsets, targets }
    }

    /// Build from an arbitrary edge list. Undirected edges may be given in
    /// either orientation but only once.
    pub fn from_edges(n: usize, directed: bool, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n {
                return Err(Error::NodeOutOfRange { node: i, n });
            }
            if j >= n {
                return Err(Error::NodeOutOfRange { node: j, n });
            }
            if i == j {
                return Err(Error::InvalidArgument("self-loops are not allowed"));
            }
            adj[i * n + j] = true;
            if !directed {
                adj[j * n + i] = true;
            }
        }
        Self::from_adjacency(n, directed, &adj)
    }

    /// Build from a row-major `n x n` boolean adjacency matrix.
    pub fn from_adjacency(n: usize, directed: bool, adj: &[bool]) -> Result<Self> {
        if adj.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: adj.len() });
        }
        let mut edges = Vec::new();
        for i in 0..n {
            if adj[i * n + i] {
                return Err(Error::InvalidArgument("adjacency diagonal must be false"));
            }
            for j in 0..n {
                if !directed && adj[i * n + j] != adj[j * n + i] {
                    return Err(Error::InvalidArgument("undirected adjacency must be symmetric"));
                }
                let keep = if directed { i != j } else { i < j };
                if keep && adj[i * n + j] {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        Ok(Self::from_slot_edges(n, directed, &edges))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Neighbours of `i` (out-neighbours for directed graphs), ascending.
    ///
    /// # Panics
    /// If `i >= n`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Degree of `i`; the out-degree for directed graphs.
    pub fn degree(&self, i: usize) -> Result<usize> {
        if i >= self.n {
            return Err(Error::NodeOutOfRange { node: i, n: self.n });
        }
        Ok(self.offsets[i + 1] - self.offsets[i])
    }

    pub fn out_degree(&self, i: usize) -> Result<usize> {
        self.degree(i)
    }

    #[inline]
    pub(crate) fn degree_unchecked(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.targets.len()
        } else {
            self.targets.len() / 2
        }
    }

    pub fn has_isolated_node(&self) -> bool {
        (0..self.n).any(|i| self.degree_unchecked(i) == 0)
    }

    /// Row-major `n x n` adjacency matrix.
    pub fn adjacency(&self) -> Vec<bool> {
        let n = self.n;
        let mut adj = vec![false; n * n];
        for i in 0..n {
            for &j in self.neighbors(i) {
                adj[i * n + j as usize] = true;
            }
        }
        adj
    }
}

/// Draw a graph from `model`.
///
/// The slot sequence is scanned with geometric skips: the gap to the next
/// present edge is `floor(ln U / ln(1 - p))` for `U` uniform on `(0, 1)`, which
/// is exactly the law of independent Bernoulli(`p`) indicators consumed in slot
/// order. The map `(model, seed) -> graph` is fixed by [`rng::GENERATOR_ID`].
pub fn sample(model: &ErModel, seed: u64) -> Graph {
    let mut rng = rng::rng_from_seed(seed);
    sample_with(model, &mut rng)
}

pub(crate) fn sample_with(model: &ErModel, rng: &mut SampleRng) -> Graph {
    let (n, directed, p) = (model.n, model.directed, model.p);
    let total = edge_slots(n, directed);
    if p <= 0.0 || total == 0 {
        return Graph::empty(n, directed);
    }
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity((p * total as f64 * 1.1) as usize + 16);
    if p >= 1.0 {
        for s in 0..total {
            let (i, j) = slot_pair(n, directed, s);
            edges.push((i as u32, j as u32));
        }
        return Graph::from_slot_edges(n, directed, &edges);
    }
    let log_q = libm::log1p(-p);
    let mut row = 0usize;
    let mut row_start = 0usize;
    let mut next = 0usize;
    loop {
        let skip = libm::floor(libm::log(rng::open01(rng)) / log_q);
        if skip >= (total - next) as f64 {
            break;
        }
        let s = next + skip as usize;
        while s >= row_start + row_slots(n, directed, row) {
            row_start += row_slots(n, directed, row);
            row += 1;
        }
        let r = s - row_start;
        let j = if directed {
            if r < row {
                r
            } else {
                r + 1
            }
        } else {
            row + 1 + r
        };
        edges.push((row as u32, j as u32));
        next = s + 1;
        if next >= total {
            break;
        }
    }
    Graph::from_slot_edges(n, directed, &edges)
}

/// Every graph of an enumerable model with its probability, in mask order.
pub fn enumerate_weighted(model: &ErModel) -> Result<Enumeration> {
    let slots = model.slots();
    if slots > ENUMERATION_SLOT_CAP {
        return Err(Error::TooLargeToEnumerate { slots, cap: ENUMERATION_SLOT_CAP });
    }
    let pairs = (0..slots)
        .map(|s| {
            let (i, j) = slot_pair(model.n, model.directed, s);
            (i as u32, j as u32)
        })
        .collect();
    Ok(Enumeration { model: *model, pairs, mask: 0, end: 1u64 << slots, scratch: Vec::new() })
}

pub struct Enumeration {
    model: ErModel,
    pairs: Vec<(u32, u32)>,
    mask: u64,
    end: u64,
    scratch: Vec<(u32, u32)>,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        (self.end - self.mask) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == self.end
    }
}

impl Iterator for Enumeration {
    type Item = (Graph, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.mask >= self.end {
            return None;
        }
        let mask = self.mask;
        self.mask += 1;
        self.scratch.clear();
        for (s, &pair) in self.pairs.iter().enumerate() {
            if mask >> s & 1 == 1 {
                self.scratch.push(pair);
            }
        }
        let present = self.scratch.len() as f64;
        let absent = (self.pairs.len() - self.scratch.len()) as f64;
        let p = self.model.p;
        let prob = libm::pow(p, present) * libm::pow(1.0 - p, absent);
        Some((Graph::from_slot_edges(self.model.n, self.model.directed, &self.scratch), prob))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let len = self.len();
        (len, Some(len))
    }
}

impl ExactSizeIterator for Enumeration {}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_well_formed(g: &Graph) {
        let n = g.n();
        let adj = g.adjacency();
        for i in 0..n {
            assert!(!adj[i * n + i]);
            if !g.is_directed() {
                for j in 0..n {
                    assert_eq!(adj[i * n + j], adj[j * n + i]);
                }
            }
            assert!(g.degree(i).unwrap() < n.max(1));
        }
    }

    #[test]
    fn p_one_gives_complete_graph() {
        let g = sample(&ErModel::undirected(3, 1.0).unwrap(), 99);
        assert_eq!(g.edge_count(), 3);
        for i in 0..3 {
            assert_eq!(g.degree(i).unwrap(), 2);
        }
    }

    #[test]
    fn p_zero_gives_empty_graph() {
        let g = sample(&ErModel::directed(4, 0.0).unwrap(), 5);
        for i in 0..4 {
            assert_eq!(g.out_degree(i).unwrap(), 0);
        }
    }

    #[test]
    fn degree_counts() {
        let g = Graph::empty(5, false);
        assert_eq!(g.degree(3).unwrap(), 0);
        let k5 = sample(&ErModel::undirected(5, 1.0).unwrap(), 0);
        assert!((0..5).all(|i| k5.degree(i).unwrap() == 4));
        let d = Graph::from_edges(3, true, &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(d.out_degree(0).unwrap(), 2);
        assert_eq!(d.out_degree(1).unwrap(), 0);
        assert_eq!(d.out_degree(2).unwrap(), 0);
        assert_eq!(d.degree(3), Err(Error::NodeOutOfRange { node: 3, n: 3 }));
    }

    #[test]
    fn regime_examples() {
        let p = regime_p(RegimeRule::new(1.0, 1.0).unwrap(), 100).unwrap();
        assert!((p - 0.046_051_701_859_880_91).abs() < 1e-15);
        let p = regime_p(RegimeRule::new(1.0, 0.0).unwrap(), 10).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
        assert_eq!(regime_p(RegimeRule::new(1000.0, 1.0).unwrap(), 10).unwrap(), 1.0);
        assert!(regime_p(RegimeRule::new(1.0, 1.0).unwrap(), 1).is_err());
        assert!(RegimeRule::new(0.0, 1.0).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(ErModel::undirected(0, 0.5).is_err());
        assert!(ErModel::undirected(3, 1.5).is_err());
        assert!(ErModel::undirected(3, -0.1).is_err());
        assert!(ErModel::undirected(3, f64::NAN).is_err());
    }

    #[test]
    fn slot_order_is_row_major() {
        let und: Vec<_> = (0..6).map(|s| slot_pair(4, false, s)).collect();
        assert_eq!(und, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let dir: Vec<_> = (0..6).map(|s| slot_pair(3, true, s)).collect();
        assert_eq!(dir, [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }

    #[test]
    fn enumeration_small_cases() {
        let p = 0.3;
        let two: Vec<_> = enumerate_weighted(&ErModel::undirected(2, p).unwrap()).unwrap().collect();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].0.edge_count(), 0);
        assert!((two[0].1 - 0.7).abs() < 1e-15);
        assert!((two[1].1 - 0.3).abs() < 1e-15);

        let three = enumerate_weighted(&ErModel::undirected(3, p).unwrap()).unwrap();
        assert_eq!(three.len(), 8);
        let total: f64 = three.map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let dir: Vec<_> = enumerate_weighted(&ErModel::directed(2, p).unwrap()).unwrap().collect();
        assert_eq!(dir.len(), 4);
        assert!(dir[1].0.has_edge(0, 1) && !dir[1].0.has_edge(1, 0));
        assert!(dir[2].0.has_edge(1, 0) && !dir[2].0.has_edge(0, 1));
    }

    #[test]
    fn enumeration_rejects_large_models() {
        let err = enumerate_weighted(&ErModel::undirected(9, 0.5).unwrap()).err().unwrap();
        assert_eq!(err, Error::TooLargeToEnumerate { slots: 36, cap: 30 });
        assert!(enumerate_weighted(&ErModel::undirected(8, 0.5).unwrap()).is_ok());
        assert!(enumerate_weighted(&ErModel::directed(7, 0.5).unwrap()).is_err());
        assert!(ErModel::directed(6, 0.5).unwrap().is_enumerable());
        assert!(ErModel::directed(5, 0.5).unwrap().is_enumerable());
    }

    #[test]
    fn enumeration_probabilities_sum_to_one() {
        for &(n, directed) in &[(1, false), (2, false), (4, false), (5, false), (3, true), (4, true)] {
            for &p in &[0.0, 0.2, 0.5, 0.8, 1.0] {
                let model = ErModel::new(n, p, directed).unwrap();
                let mut total = 0.0;
                let mut seen = alloc::collections::BTreeSet::new();
                for (g, w) in enumerate_weighted(&model).unwrap() {
                    assert_well_formed(&g);
                    assert!(seen.insert(g.adjacency()));
                    total += w;
                }
                assert!((total - 1.0).abs() < 1e-12, "n={n} p={p}: {total}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_well_formed() {
        for &directed in &[false, true] {
            let model = ErModel::new(40, 0.2, directed).unwrap();
            for seed in 0..50 {
                let g = sample(&model, seed);
                assert_eq!(g, sample(&model, seed));
                assert_well_formed(&g);
            }
            assert_ne!(sample(&model, 1), sample(&model, 2));
        }
    }

    #[test]
    fn adjacency_round_trip() {
        let g = sample(&ErModel::undirected(12, 0.4).unwrap(), 17);
        let h = Graph::from_adjacency(12, false, &g.adjacency()).unwrap();
        assert_eq!(g, h);
        assert!(Graph::from_adjacency(2, false, &[false, true, false, false]).is_err());
        assert!(Graph::from_adjacency(2, true, &[true, false, false, false]).is_err());
    }
}
