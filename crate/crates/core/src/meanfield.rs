//! Mean-field surrogate: the expected influence matrix `E(H)` in closed form
//! and the stable solution of the recursion driven by it.
//!
//! Given an edge `i -> j`, the remaining `n - 2` potential neighbours of `i`
//! are Binomial(`n - 2`, `p`), and `E(1 / (1 + Bin(m, p))) = (1 - q^(m+1)) /
//! ((m + 1) p)`. Hence
//!
//! ```text
//! E(H)_ij = alpha_i (1 - q^(n-1)) / (n - 1)     (i != j)
//! E(H)_ii = alpha_i q^(n-1)                      (node i isolated)
//! ```
//!
//! with `q = 1 - p`, for undirected and directed models alike.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{self, OpinionConfig};
use crate::linalg::{self, CompensatedSum, Matrix, Vector};
use crate::rand_graph::{self, ErModel};
use crate::{Error, Result};

/// `E(H)` kept in its rank-one-plus-diagonal form
/// `diag(alpha) (off J + (diag - off) I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedInfluence {
    alpha: Vec<f64>,
    off: f64,
    diag: f64,
}

impl ExpectedInfluence {
    pub fn new(model: &ErModel, cfg: &OpinionConfig) -> Result<Self> {
        let n = model.n();
        if n < 2 {
            return Err(Error::InvalidModel("the mean-field matrix needs n >= 2"));
        }
        cfg.check_dim(n)?;
        let isolated = isolation_probability(n, model.p());
        Ok(Self { alpha: cfg.alpha().to_vec(), off: (1.0 - isolated) / (n - 1) as f64, diag: isolated })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Per-unit-alpha off-diagonal entry `(1 - q^(n-1)) / (n - 1)`.
    pub fn off_diagonal(&self) -> f64 {
        self.off
    }

    /// Per-unit-alpha diagonal entry `q^(n-1)`.
    pub fn diagonal(&self) -> f64 {
        self.diag
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n();
        Matrix::from_fn(n, n, |i, j| self.alpha[i] * if i == j { self.diag } else { self.off })
    }

    /// `out = y^T E(H)` in `O(n)`.
    pub fn left_apply(&self, y: &[f64], out: &mut [f64]) {
        let s: f64 = y.iter().zip(&self.alpha).map(|(v, a)| v * a).sum();
        let c = self.diag - self.off;
        for ((o, v), a) in out.iter_mut().zip(y).zip(&self.alpha) {
            *o = self.off * s + c * v * a;
        }
    }

    /// Row `i` of `sum_k coeffs[k] E(H)^k`, accumulated in `O(n len(coeffs))`.
    pub fn series_row(&self, i: usize, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n();
        let mut cur = vec![0.0; n];
        let mut next = vec![0.0; n];
        cur[i] = 1.0;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &b) in coeffs.iter().enumerate() {
            if k > 0 {
                self.left_apply(&cur, &mut next);
                core::mem::swap(&mut cur, &mut next);
            }
            if b != 0.0 {
                for (o, v) in out.iter_mut().zip(&cur) {
                    *o += b * v;
                }
            }
        }
    }

    /// Solve `(I - E(H)) x = f` by Sherman–Morrison in `O(n)`.
    pub fn solve_shifted(&self, f: &[f64]) -> Vec<f64> {
        let c = self.diag - self.off;
        let m: Vec<f64> = self.alpha.iter().map(|a| 1.0 - c * a).collect();
        let num: f64 = f.iter().zip(&m).map(|(f, m)| f / m).sum();
        let den = 1.0 - self.off * self.alpha.iter().zip(&m).map(|(a, m)| a / m).sum::<f64>();
        let s = num / den;
        f.iter().zip(&m).zip(&self.alpha).map(|((f, m), a)| (f + self.off * a * s) / m).collect()
    }
}

/// `q^(n-1)`, the probability that a given node is isolated.
pub fn isolation_probability(n: usize, p: f64) -> f64 {
    libm::pow(1.0 - p, (n - 1) as f64)
}

pub fn expected_influence(model: &ErModel, cfg: &OpinionConfig) -> Result<Matrix> {
    Ok(ExpectedInfluence::new(model, cfg)?.to_dense())
}

/// `sum_G P(G) H(G)` by enumeration; an oracle for [`expected_influence`].
pub fn expected_influence_oracle(model: &ErModel, cfg: &OpinionConfig) -> Result<Matrix> {
    let n = model.n();
    cfg.check_dim(n)?;
    let mut acc = Matrix::zeros(n, n);
    for (g, w) in rand_graph::enumerate_weighted(model)? {
        let h = dynamics::build_influence(&g, cfg)?;
        acc += h.entries() * w;
    }
    Ok(acc)
}

/// Mean-field system for one model and configuration.
#[derive(Debug, Clone)]
pub struct MeanFieldSystem {
    model: ErModel,
    cfg: OpinionConfig,
    expected: ExpectedInfluence,
}

impl MeanFieldSystem {
    pub fn new(model: ErModel, cfg: OpinionConfig) -> Result<Self> {
        let expected = ExpectedInfluence::new(&model, &cfg)?;
        Ok(Self { model, cfg, expected })
    }

    pub fn model(&self) -> &ErModel {
        &self.model
    }

    pub fn config(&self) -> &OpinionConfig {
        &self.cfg
    }

    pub fn expected(&self) -> &ExpectedInfluence {
        &self.expected
    }

    /// Dense LU solve of `(I - E(H)) x = B x(0)`.
    pub fn stable(&self) -> Result<Vector> {
        let n = self.model.n();
        let a = Matrix::identity(n, n) - self.expected.to_dense();
        linalg::lu_solve(a, &self.cfg.forcing())
    }

    /// The same solution through the structured `O(n)` solve.
    pub fn stable_structured(&self) -> Vector {
        let f = self.cfg.forcing();
        Vector::from_vec(self.expected.solve_shifted(f.as_slice()))
    }
}

/// Stable mean-field opinion `(I - E(H))^{-1} B x(0)`.
pub fn meanfield_stable(model: &ErModel, cfg: &OpinionConfig) -> Result<Vector> {
    MeanFieldSystem::new(*model, cfg.clone())?.stable()
}

fn check_moment_args(p: f64, k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument("p must lie in [0, 1]"));
    }
    Ok(())
}

/// `E(1 / (X + k))` for `X ~ Binomial(n_trials, p)` via the finite alternating
/// identity
///
/// ```text
/// sum_{s=1}^{k-1} (-1)^(s+1) T_s  +  (-1)^(k-1) T_k (1 - q^(n+k)),
/// T_s = prod_{h=1}^{s} (k - h + 1) / (n + h)  /  (k p^s)
/// ```
///
/// Each `T_s` is obtained from `T_{s-1}` by one multiply and one divide and the
/// alternating terms are summed with compensation.
pub fn neg_binomial_moment(n_trials: u32, p: f64, k: u32) -> Result<f64> {
    check_moment_args(p, k)?;
    if p == 0.0 || n_trials == 0 {
        return Ok(1.0 / k as f64);
    }
    if p == 1.0 {
        return Ok(1.0 / (n_trials + k) as f64);
    }
    let nf = n_trials as f64;
    let mut t = 1.0 / ((nf + 1.0) * p);
    let mut sum = CompensatedSum::default();
    let mut sign = 1.0;
    for s in 1..k {
        sum.add(sign * t);
        t *= (k - s) as f64 / ((nf + s as f64 + 1.0) * p);
        sign = -sign;
    }
    // 1 - q^(n+k) without cancellation for small p.
    let tail = -libm::expm1((nf + k as f64) * libm::log1p(-p));
    sum.add(sign * t * tail);
    Ok(sum.value())
}

/// Direct sum `sum_t C(n, t) p^t q^(n-t) / (t + k)`.
pub fn neg_binomial_moment_bruteforce(n_trials: u32, p: f64, k: u32) -> Result<f64> {
    check_moment_args(p, k)?;
    let n = n_trials as f64;
    let mut binom = 1.0;
    let mut acc = 0.0;
    for t in 0..=n_trials {
        let tf = t as f64;
        if t > 0 {
            binom *= (n - tf + 1.0) / tf;
        }
        acc += binom * libm::pow(p, tf) * libm::pow(1.0 - p, n - tf) / (tf + k as f64);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(n: usize, alpha: f64) -> OpinionConfig {
        OpinionConfig::uniform(alpha, vec![0.5; n]).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let m = expected_influence(&ErModel::undirected(2, 0.5).unwrap(), &uniform(2, 0.5)).unwrap();
        assert_abs_diff_eq!(m, Matrix::from_element(2, 2, 0.25), epsilon = 1e-15);

        let c = OpinionConfig::new(vec![0.8, 0.3, 0.1], 0.8, vec![0.0; 3]).unwrap();
        let m = expected_influence(&ErModel::undirected(3, 0.5).unwrap(), &c).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 2)], 0.3, epsilon = 1e-15);

        let m = expected_influence(&ErModel::undirected(4, 1.0).unwrap(), &uniform(4, 0.6)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(m[(i, j)], if i == j { 0.0 } else { 0.2 }, epsilon = 1e-15);
            }
        }
        assert!(expected_influence(&ErModel::undirected(1, 0.5).unwrap(), &uniform(1, 0.5)).is_err());
    }

    #[test]
    fn oracle_examples() {
        let m = ErModel::undirected(2, 0.5).unwrap();
        let c = uniform(2, 0.5);
        let closed = expected_influence(&m, &c).unwrap();
        assert_abs_diff_eq!(expected_influence_oracle(&m, &c).unwrap(), closed, epsilon = 1e-15);
        for &(n, directed) in &[(3, false), (3, true)] {
            for &p in &[0.2, 0.5, 0.9] {
                let m = ErModel::new(n, p, directed).unwrap();
                let c = OpinionConfig::new(vec![0.7, 0.2, 0.45], 0.7, vec![0.0; 3]).unwrap();
                assert_abs_diff_eq!(
                    expected_influence_oracle(&m, &c).unwrap(),
                    expected_influence(&m, &c).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
        assert!(expected_influence_oracle(&ErModel::undirected(9, 0.5).unwrap(), &uniform(9, 0.5)).is_err());
    }

    #[test]
    fn row_sums_equal_alpha() {
        for &n in &[2usize, 5, 50, 1000] {
            for &p in &[0.0, 0.01, 0.3, 1.0] {
                let c = OpinionConfig::new((0..n).map(|i| 0.9 * (i as f64) / n as f64).collect(), 0.9, vec![0.0; n])
                    .unwrap();
                let e = ExpectedInfluence::new(&ErModel::undirected(n, p).unwrap(), &c).unwrap();
                let rowsum = e.diagonal() + (n - 1) as f64 * e.off_diagonal();
                assert_abs_diff_eq!(rowsum, 1.0, epsilon = 1e-14);
                if n <= 50 {
                    let d = e.to_dense();
                    for i in 0..n {
                        assert_abs_diff_eq!(d.row(i).sum(), c.alpha()[i], epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn stable_examples() {
        let m = ErModel::undirected(2, 0.5).unwrap();
        let c = OpinionConfig::uniform(0.5, vec![0.0, 1.0]).unwrap();
        let x = meanfield_stable(&m, &c).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[0.25, 0.75][..], epsilon = 1e-15);

        let ones = OpinionConfig::uniform(0.8, vec![1.0; 6]).unwrap();
        let x = meanfield_stable(&ErModel::directed(6, 0.3).unwrap(), &ones).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[1.0; 6][..], epsilon = 1e-12);

        let c = OpinionConfig::uniform(0.6, vec![0.1, 0.7, 0.3]).unwrap();
        let x = meanfield_stable(&ErModel::undirected(3, 0.0).unwrap(), &c).unwrap();
        assert_abs_diff_eq!(x.as_slice(), c.x0(), epsilon = 1e-15);
    }

    #[test]
    fn structured_paths_match_dense() {
        let n = 40;
        let c = OpinionConfig::new(
            (0..n).map(|i| 0.85 * ((i * 7) % 11) as f64 / 10.0).collect(),
            0.85,
            (0..n).map(|i| ((i * 3) % 17) as f64 / 16.0).collect(),
        )
        .unwrap();
        for &p in &[0.0, 0.02, 0.3, 1.0] {
            let sys = MeanFieldSystem::new(ErModel::undirected(n, p).unwrap(), c.clone()).unwrap();
            let dense = sys.stable().unwrap();
            assert!((sys.stable_structured() - &dense).amax() < 1e-13);

            let e = sys.expected();
            let d = e.to_dense();
            let coeffs = [0.5, -1.0, 0.25, 2.0];
            let reference = Matrix::identity(n, n) * coeffs[0] + &d * coeffs[1] + &d * &d * coeffs[2]
                + &d * &d * &d * coeffs[3];
            let mut row = vec![0.0; n];
            for i in [0, 13, n - 1] {
                e.series_row(i, &coeffs, &mut row);
                for j in 0..n {
                    assert_abs_diff_eq!(row[j], reference[(i, j)], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn moment_examples() {
        assert_abs_diff_eq!(neg_binomial_moment(2, 0.5, 1).unwrap(), 7.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(neg_binomial_moment(1, 0.5, 2).unwrap(), 5.0 / 12.0, epsilon = 1e-15);
        for k in 1..5 {
            assert_eq!(neg_binomial_moment(0, 0.3, k).unwrap(), 1.0 / k as f64);
            assert_eq!(neg_binomial_moment(7, 0.0, k).unwrap(), 1.0 / k as f64);
            assert_eq!(neg_binomial_moment(7, 1.0, k).unwrap(), 1.0 / (7 + k) as f64);
        }
        assert_abs_diff_eq!(neg_binomial_moment_bruteforce(2, 0.5, 1).unwrap(), 7.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(neg_binomial_moment_bruteforce(1, 0.9, 1).unwrap(), 0.55, epsilon = 1e-15);
        assert!(neg_binomial_moment(3, 0.5, 0).is_err());
        assert!(neg_binomial_moment(3, 1.5, 1).is_err());
    }

    #[test]
    fn moment_matches_bruteforce_on_grid() {
        let mut worst = 0.0f64;
        for n in 0..=25 {
            for k in 1..=6 {
                for step in 1..=9 {
                    let p = step as f64 / 10.0;
                    let a = neg_binomial_moment(n, p, k).unwrap();
                    let b = neg_binomial_moment_bruteforce(n, p, k).unwrap();
                    worst = worst.max((a - b).abs() / b);
                }
            }
        }
        assert!(worst <= 1e-9, "worst relative error {worst}");
    }

    #[test]
    fn moment_is_decreasing_in_k_and_trials() {
        for step in 1..=9 {
            let p = step as f64 / 10.0;
            for n in 0..20 {
                for k in 1..6 {
                    let here = neg_binomial_moment(n, p, k).unwrap();
                    assert!(neg_binomial_moment(n, p, k + 1).unwrap() < here);
                    assert!(neg_binomial_moment(n + 1, p, k).unwrap() < here);
                }
            }
        }
    }

    #[test]
    fn conditional_degree_identity_matches_moment() {
        // E(1/(1 + Bin(n-2, p))) is the k = 1 moment.
        for &n in &[2u32, 3, 10, 57] {
            for &p in &[0.1, 0.5, 0.9] {
                let closed = (1.0 - isolation_probability(n as usize, p)) / ((n - 1) as f64 * p);
                assert_abs_diff_eq!(neg_binomial_moment(n - 2, p, 1).unwrap(), closed, epsilon = 1e-14);
            }
        }
    }
}
