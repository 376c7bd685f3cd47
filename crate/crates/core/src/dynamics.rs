//! The opinion recursion `x(t+1) = H x(t) + B x(0)` on a fixed graph.
//!
//! Row `i` of the influence matrix `H` spreads `alpha_i` uniformly over the
//! (out-)neighbours of `i`; an isolated node keeps `alpha_i` on its own
//! diagonal entry, so it never moves away from its intrinsic opinion.
//! `B = diag(1 - alpha_i)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Matrix, Vector};
use crate::rand_graph::Graph;
use crate::{Error, Result};

/// Agent parameters: condescendence `alpha_i <= alpha_bar < 1` and intrinsic
/// opinions `x0_i` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionConfig {
    alpha: Vec<f64>,
    alpha_bar: f64,
    x0: Vec<f64>,
}

impl OpinionConfig {
    pub fn new(alpha: Vec<f64>, alpha_bar: f64, x0: Vec<f64>) -> Result<Self> {
        if !(alpha_bar > 0.0 && alpha_bar < 1.0) {
            return Err(Error::InvalidConfig("alpha_bar must lie in (0, 1)"));
        }
        if alpha.len() != x0.len() {
            return Err(Error::DimensionMismatch { expected: alpha.len(), got: x0.len() });
        }
        if alpha.iter().any(|a| !(0.0..=alpha_bar).contains(a)) {
            return Err(Error::InvalidConfig("every alpha_i must lie in [0, alpha_bar]"));
        }
        if x0.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidConfig("every x0_i must lie in [0, 1]"));
        }
        Ok(Self { alpha, alpha_bar, x0 })
    }

    /// Every agent gets the same `alpha`, with `alpha_bar = alpha`.
    pub fn uniform(alpha: f64, x0: Vec<f64>) -> Result<Self> {
        Self::new(vec![alpha; x0.len()], alpha, x0)
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// The constant forcing term `B x(0)`.
    pub fn forcing(&self) -> Vector {
        Vector::from_iterator(self.n(), self.alpha.iter().zip(&self.x0).map(|(a, x)| (1.0 - a) * x))
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        Self::new(self.alpha.clone(), self.alpha_bar, x0)
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.n() });
        }
        Ok(())
    }
}

/// Dense influence matrix `H(G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    entries: Matrix,
    alpha_bar: f64,
}

impl InfluenceMatrix {
    /// Wrap a matrix that is already known to be an influence matrix (for
    /// example `E(H)`), checking non-negativity and the row-sum budget.
    pub fn from_matrix(entries: Matrix, alpha_bar: f64) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        if entries.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument("influence entries must be non-negative"));
        }
        if entries.row_iter().any(|r| r.sum() > alpha_bar * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument("influence row sums must not exceed alpha_bar"));
        }
        Ok(Self { entries, alpha_bar })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix {
        self.entries
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }
}

pub fn build_influence(g: &Graph, cfg: &OpinionConfig) -> Result<InfluenceMatrix> {
    let n = g.n();
    cfg.check_dim(n)?;
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        let nb = g.neighbors(i);
        let a = cfg.alpha[i];
        if nb.is_empty() {
            h[(i, i)] = a;
        } else {
            let w = a / nb.len() as f64;
            for &j in nb {
                h[(i, j as usize)] = w;
            }
        }
    }
    Ok(InfluenceMatrix { entries: h, alpha_bar: cfg.alpha_bar })
}

fn check_vec(h: &InfluenceMatrix, cfg: &OpinionConfig, x: &Vector) -> Result<()> {
    cfg.check_dim(h.n())?;
    if x.len() != h.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), got: x.len() });
    }
    Ok(())
}

/// One application of the recursion: `H x + B x(0)`.
pub fn step(h: &InfluenceMatrix, cfg: &OpinionConfig, x: &Vector) -> Result<Vector> {
    check_vec(h, cfg, x)?;
    Ok(&h.entries * x + cfg.forcing())
}

/// `x(t)` obtained from `x(0)` by `t` applications of [`step`].
pub fn iterate(h: &InfluenceMatrix, cfg: &OpinionConfig, t: usize) -> Result<Vector> {
    cfg.check_dim(h.n())?;
    let forcing = cfg.forcing();
    let mut x = Vector::from_column_slice(cfg.x0());
    for _ in 0..t {
        x = &h.entries * &x + &forcing;
    }
    Ok(x)
}

/// The stable opinion: the solution of `(I - H) x = B x(0)`.
pub fn stable_solve(h: &InfluenceMatrix, cfg: &OpinionConfig) -> Result<Vector> {
    let n = h.n();
    cfg.check_dim(n)?;
    let a = Matrix::identity(n, n) - &h.entries;
    linalg::lu_solve(a, &cfg.forcing())
}

/// `||(I - H) x - B x(0)||_inf`.
pub fn residual(h: &InfluenceMatrix, cfg: &OpinionConfig, x: &Vector) -> f64 {
    let r = x - &h.entries * x - cfg.forcing();
    r.amax()
}

/// Upper bound on the number of steps [`stable_iterate`] takes:
/// `ceil(ln(tol (1 - alpha_bar)) / ln(alpha_bar)) + 1`.
pub fn iteration_cap(alpha_bar: f64, tol: f64) -> usize {
    let target = tol * (1.0 - alpha_bar);
    if target >= 1.0 {
        return 1;
    }
    libm::ceil(libm::log(target) / libm::log(alpha_bar)).max(0.0) as usize + 1
}

/// Fixed-point iteration from `x(0)` until successive iterates differ by at
/// most `tol (1 - alpha_bar)` in sup norm. The returned vector is within `tol`
/// of the stable opinion.
pub fn stable_iterate(h: &InfluenceMatrix, cfg: &OpinionConfig, tol: f64) -> Result<(Vector, usize)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    cfg.check_dim(h.n())?;
    let stop = tol * (1.0 - cfg.alpha_bar);
    let cap = iteration_cap(cfg.alpha_bar, tol);
    let forcing = cfg.forcing();
    let mut x = Vector::from_column_slice(cfg.x0());
    let mut steps = 0;
    loop {
        let next = &h.entries * &x + &forcing;
        steps += 1;
        let diff = linalg::max_abs_diff(next.as_slice(), x.as_slice());
        x = next;
        if diff <= stop || steps >= cap {
            return Ok((x, steps));
        }
    }
}

/// One row of `H(G)`: either `alpha_i` on the diagonal of an isolated node or
/// a constant weight on every neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfluenceRow<'a> {
    Isolated(f64),
    Spread { weight: f64, targets: &'a [u32] },
}

/// `H(G)` applied without materialising it; used when `n` is large.
#[derive(Debug, Clone, Copy)]
pub struct SparseInfluence<'a> {
    graph: &'a Graph,
    alpha: &'a [f64],
}

impl<'a> SparseInfluence<'a> {
    pub fn new(graph: &'a Graph, cfg: &'a OpinionConfig) -> Result<Self> {
        cfg.check_dim(graph.n())?;
        Ok(Self { graph, alpha: cfg.alpha() })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// `out = H x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let nb = self.graph.neighbors(i);
            *o = if nb.is_empty() {
                self.alpha[i] * x[i]
            } else {
                let s: f64 = nb.iter().map(|&j| x[j as usize]).sum();
                self.alpha[i] * s / nb.len() as f64
            };
        }
    }

    /// Row `i` of `H`.
    #[inline]
    pub fn row(&self, i: usize) -> InfluenceRow<'a> {
        let nb = self.graph.neighbors(i);
        if nb.is_empty() {
            InfluenceRow::Isolated(self.alpha[i])
        } else {
            InfluenceRow::Spread { weight: self.alpha[i] / nb.len() as f64, targets: nb }
        }
    }

    /// `acc += weight * (row i of H)`.
    #[inline]
    pub fn add_row(&self, i: usize, weight: f64, acc: &mut [f64]) {
        let nb = self.graph.neighbors(i);
        if nb.is_empty() {
            acc[i] += weight * self.alpha[i];
        } else {
            let w = weight * self.alpha[i] / nb.len() as f64;
            for &j in nb {
                acc[j as usize] += w;
            }
        }
    }

    /// Sparse counterpart of [`stable_iterate`].
    pub fn stable_iterate(&self, cfg: &OpinionConfig, tol: f64) -> (Vec<f64>, usize) {
        let n = self.n();
        let stop = tol * (1.0 - cfg.alpha_bar());
        let cap = iteration_cap(cfg.alpha_bar(), tol);
        let forcing: Vec<f64> = cfg.alpha().iter().zip(cfg.x0()).map(|(a, x)| (1.0 - a) * x).collect();
        let mut x = cfg.x0().to_vec();
        let mut next = vec![0.0; n];
        let mut steps = 0;
        loop {
            self.apply(&x, &mut next);
            let mut diff = 0.0f64;
            for i in 0..n {
                next[i] += forcing[i];
                diff = diff.max((next[i] - x[i]).abs());
            }
            core::mem::swap(&mut x, &mut next);
            steps += 1;
            if diff <= stop || steps >= cap {
                return (x, steps);
            }
        }
    }

    pub fn to_dense(&self, alpha_bar: f64) -> InfluenceMatrix {
        let n = self.n();
        let mut entries = Matrix::zeros(n, n);
        let mut row = vec![0.0; n];
        for i in 0..n {
            row.iter_mut().for_each(|v| *v = 0.0);
            self.add_row(i, 1.0, &mut row);
            for (j, v) in row.iter().enumerate() {
                entries[(i, j)] = *v;
            }
        }
        InfluenceMatrix { entries, alpha_bar }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rand_graph::{sample, ErModel};
    use approx::assert_abs_diff_eq;

    fn edge2() -> Graph {
        Graph::from_edges(2, false, &[(0, 1)]).unwrap()
    }

    fn cfg(alpha: f64, x0: &[f64]) -> OpinionConfig {
        OpinionConfig::uniform(alpha, x0.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(OpinionConfig::new(vec![0.5], 1.0, vec![0.2]).is_err());
        assert!(OpinionConfig::new(vec![0.5], 0.0, vec![0.2]).is_err());
        assert!(OpinionConfig::new(vec![0.6], 0.5, vec![0.2]).is_err());
        assert!(OpinionConfig::new(vec![0.5], 0.5, vec![1.2]).is_err());
        assert!(OpinionConfig::new(vec![0.5, 0.5], 0.5, vec![0.2]).is_err());
        assert!(OpinionConfig::new(vec![0.0, 0.5], 0.5, vec![0.2, 1.0]).is_ok());
    }

    #[test]
    fn influence_examples() {
        let h = build_influence(&edge2(), &cfg(0.5, &[0.0, 1.0])).unwrap();
        assert_eq!(h.entries(), &Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        let h = build_influence(&Graph::empty(2, false), &cfg(0.5, &[0.0, 1.0])).unwrap();
        assert_eq!(h.entries(), &(Matrix::identity(2, 2) * 0.5));
        let k3 = sample(&ErModel::undirected(3, 1.0).unwrap(), 0);
        let h = build_influence(&k3, &cfg(0.5, &[0.0, 0.0, 1.0])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.entries()[(i, j)], if i == j { 0.0 } else { 0.25 });
            }
        }
        assert_eq!(
            build_influence(&k3, &cfg(0.5, &[0.0, 1.0])).err(),
            Some(Error::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn step_examples() {
        let c = cfg(0.5, &[0.0, 1.0]);
        let h = build_influence(&edge2(), &c).unwrap();
        let x0 = Vector::from_column_slice(c.x0());
        let x1 = step(&h, &c, &x0).unwrap();
        assert_abs_diff_eq!(x1.as_slice(), &[0.5, 0.5][..], epsilon = 1e-15);
        let star = stable_solve(&h, &c).unwrap();
        let again = step(&h, &c, &star).unwrap();
        assert_abs_diff_eq!(again.as_slice(), star.as_slice(), epsilon = 1e-15);

        let h0 = build_influence(&Graph::empty(2, false), &c).unwrap();
        assert_abs_diff_eq!(step(&h0, &c, &x0).unwrap().as_slice(), c.x0(), epsilon = 1e-15);
        assert!(step(&h, &c, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn iterate_examples() {
        let c = cfg(0.5, &[0.0, 1.0]);
        let h = build_influence(&edge2(), &c).unwrap();
        assert_eq!(iterate(&h, &c, 0).unwrap().as_slice(), c.x0());
        let x0 = Vector::from_column_slice(c.x0());
        assert_eq!(iterate(&h, &c, 1).unwrap(), step(&h, &c, &x0).unwrap());
        let far = iterate(&h, &c, 80).unwrap();
        assert_abs_diff_eq!(far.as_slice(), &[1.0 / 3.0, 2.0 / 3.0][..], epsilon = 1e-14);
    }

    #[test]
    fn stable_solve_examples() {
        let c = cfg(0.3, &[0.1, 0.9, 0.4]);
        let h = build_influence(&Graph::empty(3, false), &c).unwrap();
        assert_abs_diff_eq!(stable_solve(&h, &c).unwrap().as_slice(), c.x0(), epsilon = 1e-15);

        let c = cfg(0.5, &[0.0, 1.0]);
        let h = build_influence(&edge2(), &c).unwrap();
        let x = stable_solve(&h, &c).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[1.0 / 3.0, 2.0 / 3.0][..], epsilon = 1e-15);
        assert!(residual(&h, &c, &x) <= 2e-12);

        let c = cfg(0.5, &[0.0, 0.0, 1.0]);
        let k3 = sample(&ErModel::undirected(3, 1.0).unwrap(), 0);
        let h = build_influence(&k3, &c).unwrap();
        let x = stable_solve(&h, &c).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[0.2, 0.2, 0.6][..], epsilon = 1e-15);
    }

    #[test]
    fn single_node_graph_keeps_its_opinion() {
        let c = cfg(0.7, &[0.25]);
        let h = build_influence(&Graph::empty(1, false), &c).unwrap();
        assert_abs_diff_eq!(stable_solve(&h, &c).unwrap()[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn stubborn_agents_keep_their_opinion() {
        let c = OpinionConfig::new(vec![0.0, 0.5, 0.0], 0.5, vec![0.3, 0.8, 0.6]).unwrap();
        let g = Graph::from_edges(3, false, &[(0, 1), (1, 2)]).unwrap();
        let h = build_influence(&g, &c).unwrap();
        let x = stable_solve(&h, &c).unwrap();
        assert_abs_diff_eq!(x[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(x[2], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn stable_iterate_examples() {
        let c = cfg(0.5, &[0.0, 1.0]);
        let h = build_influence(&edge2(), &c).unwrap();
        let (x, steps) = stable_iterate(&h, &c, 1e-10).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[1.0 / 3.0, 2.0 / 3.0][..], epsilon = 1e-10);
        assert!(steps <= iteration_cap(0.5, 1e-10));

        let h0 = build_influence(&Graph::empty(2, false), &c).unwrap();
        let (x, steps) = stable_iterate(&h0, &c, 1e-10).unwrap();
        assert_abs_diff_eq!(x.as_slice(), c.x0(), epsilon = 1e-10);
        assert!(steps < iteration_cap(0.5, 1e-10));
        assert!(stable_iterate(&h, &c, 0.0).is_err());
    }

    #[test]
    fn iteration_cap_holds_on_random_instances() {
        use rand::Rng;
        let model = ErModel::undirected(50, 0.1).unwrap();
        let tol = 1e-9;
        for seed in 0..100 {
            let mut rng = crate::rng::rng_from_seed(seed + 1000);
            let alpha: Vec<f64> = (0..50).map(|_| 0.8 * rng.random::<f64>()).collect();
            let x0: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
            let c = OpinionConfig::new(alpha, 0.8, x0).unwrap();
            let g = sample(&model, seed);
            let h = build_influence(&g, &c).unwrap();
            let (x, steps) = stable_iterate(&h, &c, tol).unwrap();
            assert!(steps <= iteration_cap(0.8, tol));
            let direct = stable_solve(&h, &c).unwrap();
            assert!((x - direct).amax() <= tol);
        }
    }

    #[test]
    fn sparse_matches_dense() {
        for &directed in &[false, true] {
            let model = ErModel::new(30, 0.15, directed).unwrap();
            let c = OpinionConfig::new(
                (0..30).map(|i| 0.05 * (i % 10) as f64).collect(),
                0.45,
                (0..30).map(|i| (i as f64) / 29.0).collect(),
            )
            .unwrap();
            for seed in 0..10 {
                let g = sample(&model, seed);
                let dense = build_influence(&g, &c).unwrap();
                let sparse = SparseInfluence::new(&g, &c).unwrap();
                assert_eq!(sparse.to_dense(c.alpha_bar()), dense);
                let (x, _) = sparse.stable_iterate(&c, 1e-12);
                let y = stable_solve(&dense, &c).unwrap();
                assert!(linalg::max_abs_diff(&x, y.as_slice()) <= 1e-12);
            }
        }
    }
}
