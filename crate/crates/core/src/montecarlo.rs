//! Expectations over the random graph: exact by enumeration for tiny models,
//! Monte Carlo with Hoeffding intervals otherwise, and the gaps between those
//! expectations and their mean-field counterparts.
//!
//! Sample `s` of a run uses the graph drawn with seed `mix(master_seed, s)`.
//! Samples are grouped into fixed chunks of [`CHUNK`] consecutive indices;
//! each chunk is summed in index order and the chunk sums are folded in chunk
//! order, so the floating-point result does not depend on the executor.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{self, InfluenceRow, OpinionConfig, SparseInfluence};
use crate::linalg::{Matrix, Vector};
use crate::matfun::{self, PowerSeriesSpec, VectorNorm};
use crate::meanfield::{ExpectedInfluence, MeanFieldSystem};
use crate::rand_graph::{self, ErModel, Graph};
use crate::rng;
use crate::{Error, Result};

/// Samples per reduction chunk.
pub const CHUNK: usize = 32;

/// Above this size per-graph work switches from dense to sparse kernels.
pub const DENSE_LIMIT: usize = 64;

/// Runs independent jobs and hands their results back in job order.
pub trait Executor: Sync {
    /// Evaluate `map(j)` for `j in 0..jobs` and call `fold(j, result)` for
    /// every job in increasing `j`.
    fn map_fold<T, M, F>(&self, jobs: usize, map: M, fold: F)
    where
        T: Send,
        M: Fn(usize) -> T + Sync + Send,
        F: FnMut(usize, T);

    /// Milliseconds on a monotonic clock, when one is available.
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_fold<T, M, F>(&self, jobs: usize, map: M, mut fold: F)
    where
        T: Send,
        M: Fn(usize) -> T + Sync + Send,
        F: FnMut(usize, T),
    {
        for j in 0..jobs {
            fold(j, map(j));
        }
    }

    #[cfg(feature = "std")]
    fn now_ms(&self) -> f64 {
        std_clock_ms()
    }
}

#[cfg(feature = "std")]
fn std_clock_ms() -> f64 {
    use std::sync::OnceLock;
    use std::time::Instant;
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub samples: usize,
    pub delta: f64,
    pub master_seed: u64,
}

impl McSettings {
    pub fn new(samples: usize, delta: f64, master_seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument("at least one sample is required"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument("delta must lie in (0, 1)"));
        }
        Ok(Self { samples, delta, master_seed })
    }

    /// Hoeffding halfwidth `sqrt(ln(2/delta) / (2N))` for `[0, 1]` variables.
    pub fn halfwidth(&self) -> f64 {
        hoeffding_halfwidth(self.samples, self.delta)
    }
}

pub fn hoeffding_halfwidth(samples: usize, delta: f64) -> f64 {
    libm::sqrt(libm::log(2.0 / delta) / (2.0 * samples as f64))
}

/// Monte Carlo mean with its per-entry Hoeffding halfwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult<T> {
    pub mean: T,
    pub samples: usize,
    pub delta: f64,
    /// Per-entry halfwidth: range of the entries times `sqrt(ln(2/delta)/(2N))`.
    pub ci_halfwidth: f64,
    pub master_seed: u64,
    pub wall_ms: f64,
}

/// How each sampled graph's stable opinion is computed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StableMethod {
    /// Dense LU up to [`DENSE_LIMIT`] nodes, sparse fixed-point iteration to
    /// `1e-12` above it.
    #[default]
    Auto,
    Dense,
    Iterative { tol: f64 },
}

impl StableMethod {
    fn resolve(self, n: usize) -> Self {
        match self {
            Self::Auto if n <= DENSE_LIMIT => Self::Dense,
            Self::Auto => Self::Iterative { tol: 1e-12 },
            other => other,
        }
    }
}

pub(crate) fn stable_of(g: &Graph, cfg: &OpinionConfig, method: StableMethod) -> Result<Vec<f64>> {
    match method.resolve(g.n()) {
        StableMethod::Iterative { tol } => Ok(SparseInfluence::new(g, cfg)?.stable_iterate(cfg, tol).0),
        _ => {
            let h = dynamics::build_influence(g, cfg)?;
            Ok(dynamics::stable_solve(&h, cfg)?.as_slice().to_vec())
        }
    }
}

pub(crate) fn sample_graph(model: &ErModel, mc: &McSettings, index: usize) -> Graph {
    rand_graph::sample(model, rng::mix(mc.master_seed, index as u64))
}

fn chunks(samples: usize) -> usize {
    samples.div_ceil(CHUNK)
}

fn chunk_range(c: usize, samples: usize) -> core::ops::Range<usize> {
    c * CHUNK..((c + 1) * CHUNK).min(samples)
}

/// Chunked sum of a per-sample vector quantity.
pub(crate) fn mc_vector_sum<E, F>(exec: &E, len: usize, mc: &McSettings, per_sample: F) -> Result<Vec<f64>>
where
    E: Executor,
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync + Send,
{
    let mut total = vec![0.0; len];
    let mut failure = None;
    exec.map_fold(
        chunks(mc.samples),
        |c| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; len];
            for s in chunk_range(c, mc.samples) {
                per_sample(s, &mut acc)?;
            }
            Ok(acc)
        },
        |_, part| match part {
            Ok(acc) => total.iter_mut().zip(&acc).for_each(|(t, a)| *t += a),
            Err(e) => {
                failure.get_or_insert(e);
            }
        },
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Monte Carlo estimate of `E(x(G, inf))`.
pub fn estimate_stable_mean<E: Executor>(
    exec: &E,
    model: &ErModel,
    cfg: &OpinionConfig,
    mc: &McSettings,
    method: StableMethod,
) -> Result<EstimateResult<Vector>> {
    let n = model.n();
    cfg.check_dim(n)?;
    let start = exec.now_ms();
    let sum = mc_vector_sum(exec, n, mc, |s, acc| {
        let x = stable_of(&sample_graph(model, mc, s), cfg, method)?;
        acc.iter_mut().zip(&x).for_each(|(a, v)| *a += v);
        Ok(())
    })?;
    let inv = 1.0 / mc.samples as f64;
    Ok(EstimateResult {
        mean: Vector::from_iterator(n, sum.iter().map(|v| v * inv)),
        samples: mc.samples,
        delta: mc.delta,
        ci_halfwidth: mc.halfwidth(),
        master_seed: mc.master_seed,
        wall_ms: exec.now_ms() - start,
    })
}

/// `sum_G P(G) x(G, inf)` by enumeration.
pub fn exact_stable_mean(model: &ErModel, cfg: &OpinionConfig) -> Result<Vector> {
    let n = model.n();
    cfg.check_dim(n)?;
    let mut acc = Vector::zeros(n);
    for (g, w) in rand_graph::enumerate_weighted(model)? {
        let h = dynamics::build_influence(&g, cfg)?;
        acc += dynamics::stable_solve(&h, cfg)? * w;
    }
    Ok(acc)
}

/// Rows of `sum_k b_k H^k` for a sparse `H`, accumulated row by row with the
/// support of `e_i^T H^k` tracked explicitly.
struct RowSeries {
    cur: Vec<f64>,
    next: Vec<f64>,
    cur_idx: Vec<u32>,
    next_idx: Vec<u32>,
    stamp: Vec<u32>,
    generation: u32,
}

impl RowSeries {
    fn new(n: usize) -> Self {
        Self {
            cur: vec![0.0; n],
            next: vec![0.0; n],
            cur_idx: Vec::with_capacity(n),
            next_idx: Vec::with_capacity(n),
            stamp: vec![0; n],
            generation: 0,
        }
    }

    fn start(&mut self, i: usize) {
        self.cur_idx.clear();
        self.cur_idx.push(i as u32);
        self.cur[i] = 1.0;
    }

    /// `cur <- cur^T H`.
    fn advance(&mut self, h: &SparseInfluence<'_>) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let gen = self.generation;
        self.next_idx.clear();
        for &l in &self.cur_idx {
            let l = l as usize;
            let v = self.cur[l];
            self.cur[l] = 0.0;
            match h.row(l) {
                InfluenceRow::Isolated(a) => {
                    if self.stamp[l] != gen {
                        self.stamp[l] = gen;
                        self.next_idx.push(l as u32);
                    }
                    self.next[l] += v * a;
                }
                InfluenceRow::Spread { weight, targets } => {
                    let w = v * weight;
                    for &j in targets {
                        let j = j as usize;
                        if self.stamp[j] != gen {
                            self.stamp[j] = gen;
                            self.next_idx.push(j as u32);
                        }
                        self.next[j] += w;
                    }
                }
            }
        }
        core::mem::swap(&mut self.cur, &mut self.next);
        core::mem::swap(&mut self.cur_idx, &mut self.next_idx);
    }

    fn clear(&mut self) {
        for &j in &self.cur_idx {
            self.cur[j as usize] = 0.0;
        }
        self.cur_idx.clear();
    }

    /// `acc_row += scale * e_i^T sum_k coeffs[k] H^k`.
    fn accumulate(&mut self, h: &SparseInfluence<'_>, i: usize, coeffs: &[f64], scale: f64, acc_row: &mut [f64]) {
        self.start(i);
        if let Some(&b0) = coeffs.first() {
            acc_row[i] += scale * b0;
        }
        for &b in coeffs.iter().skip(1) {
            self.advance(h);
            if b != 0.0 {
                let sb = scale * b;
                for &j in &self.cur_idx {
                    acc_row[j as usize] += sb * self.cur[j as usize];
                }
            }
        }
        self.clear();
    }

    /// `e_i^T (sum_k coeffs[k] H^k) e_i`.
    fn diagonal(&mut self, h: &SparseInfluence<'_>, i: usize, coeffs: &[f64]) -> f64 {
        self.start(i);
        let mut acc = coeffs.first().copied().unwrap_or(0.0);
        for &b in coeffs.iter().skip(1) {
            self.advance(h);
            acc += b * self.cur[i];
        }
        self.clear();
        acc
    }
}

fn series_coefficients(series: &PowerSeriesSpec, order: usize) -> Vec<f64> {
    (0..=order).map(|k| series.coeff(k)).collect()
}

/// Largest `alpha_i`; every `H(G)` and `E(H)` has exactly this `||.||_*`.
fn influence_norm(cfg: &OpinionConfig) -> f64 {
    cfg.alpha().iter().fold(0.0, |m, a| m.max(*a))
}

/// Bound on the magnitude range of the entries of `phi(H)`.
fn series_entry_range(series: &PowerSeriesSpec, r: f64, order: usize) -> f64 {
    let s = series.abs_sum(r);
    let nonnegative = (0..=order).all(|k| series.coeff(k) >= 0.0);
    if nonnegative {
        s
    } else {
        2.0 * s
    }
}

/// Monte Carlo mean of `phi(H(G))` with every sample truncated at
/// `truncation_order(series, ||H||_*, eps)`.
pub fn estimate_phi_mean<E: Executor>(
    exec: &E,
    model: &ErModel,
    cfg: &OpinionConfig,
    series: &PowerSeriesSpec,
    eps: f64,
    mc: &McSettings,
) -> Result<EstimateResult<Matrix>> {
    let n = model.n();
    cfg.check_dim(n)?;
    if cfg.alpha_bar() >= series.radius() {
        return Err(Error::OutsideRadius { norm: cfg.alpha_bar(), radius: series.radius() });
    }
    let r = influence_norm(cfg);
    let order = matfun::truncation_order(series, r, eps)?;
    let coeffs = series_coefficients(series, order);
    let start = exec.now_ms();
    let sum = mc_vector_sum(exec, n * n, mc, |s, acc| {
        let g = sample_graph(model, mc, s);
        if n <= DENSE_LIMIT {
            let h = dynamics::build_influence(&g, cfg)?;
            let phi = matfun::horner(series, h.entries(), order);
            for i in 0..n {
                for j in 0..n {
                    acc[i * n + j] += phi[(i, j)];
                }
            }
        } else {
            let h = SparseInfluence::new(&g, cfg)?;
            let mut rows = RowSeries::new(n);
            for i in 0..n {
                rows.accumulate(&h, i, &coeffs, 1.0, &mut acc[i * n..(i + 1) * n]);
            }
        }
        Ok(())
    })?;
    let inv = 1.0 / mc.samples as f64;
    Ok(EstimateResult {
        mean: Matrix::from_row_iterator(n, n, sum.iter().map(|v| v * inv)),
        samples: mc.samples,
        delta: mc.delta,
        ci_halfwidth: series_entry_range(series, r, order) * mc.halfwidth(),
        master_seed: mc.master_seed,
        wall_ms: exec.now_ms() - start,
    })
}

/// Monte Carlo mean of `H(G)^k`.
pub fn estimate_power_mean<E: Executor>(
    exec: &E,
    model: &ErModel,
    cfg: &OpinionConfig,
    k: usize,
    mc: &McSettings,
) -> Result<EstimateResult<Matrix>> {
    estimate_phi_mean(exec, model, cfg, &PowerSeriesSpec::monomial(k), 1.0, mc)
}

/// `sum_G P(G) phi(H(G))` by enumeration, each term through [`matfun::apply_series`].
pub fn exact_phi_mean(model: &ErModel, cfg: &OpinionConfig, series: &PowerSeriesSpec, eps: f64) -> Result<Matrix> {
    let n = model.n();
    cfg.check_dim(n)?;
    let mut acc = Matrix::zeros(n, n);
    for (g, w) in rand_graph::enumerate_weighted(model)? {
        let h = dynamics::build_influence(&g, cfg)?;
        acc += matfun::apply_series(series, h.entries(), eps)? * w;
    }
    Ok(acc)
}

/// `sum_G P(G) H(G)^k` by enumeration.
pub fn exact_power_mean(model: &ErModel, cfg: &OpinionConfig, k: usize) -> Result<Matrix> {
    let n = model.n();
    cfg.check_dim(n)?;
    let mut acc = Matrix::zeros(n, n);
    for (g, w) in rand_graph::enumerate_weighted(model)? {
        let h = dynamics::build_influence(&g, cfg)?.into_entries();
        let mut p = Matrix::identity(n, n);
        for _ in 0..k {
            p = &p * &h;
        }
        acc += p * w;
    }
    Ok(acc)
}

/// Exact enumeration or Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Exact,
    MonteCarlo(McSettings),
}

/// A gap value with its (conservative) confidence radius; `ci = 0` for exact
/// estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub value: f64,
    pub ci: f64,
    pub wall_ms: f64,
}

/// Size up to which mean-field quantities use dense factorizations.
const MEANFIELD_DENSE_LIMIT: usize = 256;

/// `x_bar(inf)`, dense for small `n` and through the structured solve above
/// [`MEANFIELD_DENSE_LIMIT`].
pub fn meanfield_solution(model: &ErModel, cfg: &OpinionConfig) -> Result<Vector> {
    let sys = MeanFieldSystem::new(*model, cfg.clone())?;
    if model.n() <= MEANFIELD_DENSE_LIMIT {
        sys.stable()
    } else {
        Ok(sys.stable_structured())
    }
}

/// `||E(x(G, inf)) - x_bar(inf)||` in the requested vector norm.
///
/// For Monte Carlo estimates `ci` is the norm of the vector whose entries all
/// equal the per-entry Hoeffding halfwidth: with `l_inf` it holds
/// simultaneously for all entries with probability at least `1 - n delta`.
pub fn gap_stable<E: Executor>(
    exec: &E,
    model: &ErModel,
    cfg: &OpinionConfig,
    norm: VectorNorm,
    estimator: &Estimator,
) -> Result<Gap> {
    if let VectorNorm::Rho(r) = norm {
        VectorNorm::rho(r)?;
    }
    let start = exec.now_ms();
    let mf = meanfield_solution(model, cfg)?;
    let (mean, ci) = match estimator {
        Estimator::Exact => (exact_stable_mean(model, cfg)?, 0.0),
        Estimator::MonteCarlo(mc) => {
            let est = estimate_stable_mean(exec, model, cfg, mc, StableMethod::Auto)?;
            (est.mean, norm.from_entry_bound(model.n(), est.ci_halfwidth))
        }
    };
    let diff: Vec<f64> = mean.iter().zip(mf.iter()).map(|(a, b)| a - b).collect();
    Ok(Gap { value: norm.eval(&diff)?, ci, wall_ms: exec.now_ms() - start })
}

/// `phi(E(H))`, row by row, in the same truncation as the sampled side.
fn meanfield_phi_rows(
    model: &ErModel,
    cfg: &OpinionConfig,
    series: &PowerSeriesSpec,
    eps: f64,
) -> Result<Matrix> {
    let n = model.n();
    let e = ExpectedInfluence::new(model, cfg)?;
    if n <= MEANFIELD_DENSE_LIMIT {
        return matfun::apply_series(series, &e.to_dense(), eps);
    }
    let order = matfun::truncation_order(series, influence_norm(cfg), eps)?;
    let coeffs = series_coefficients(series, order);
    let mut out = Matrix::zeros(n, n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        e.series_row(i, &coeffs, &mut row);
        for j in 0..n {
            out[(i, j)] = row[j];
        }
    }
    Ok(out)
}

/// `||E(phi(H)) - phi(E(H))||_*`.
///
/// The Monte Carlo `ci` is `n` times the per-entry halfwidth, a row-sum bound
/// that ignores any cancellation; the two series truncations add at most
/// `2 eps` on top of it.
pub fn gap_phi<E: Executor>(
    exec: &E,
    model: &ErModel,
    cfg: &OpinionConfig,
    series: &PowerSeriesSpec,
    eps: f64,
    estimator: &Estimator,
) -> Result<Gap> {
    if cfg.alpha_bar() >= series.radius() {
        return Err(Error::OutsideRadius { norm: cfg.alpha_bar(), radius: series.radius() });
    }
    let start = exec.now_ms();
    let n = model.n();
    let mf = meanfield_phi_rows(model, cfg, series, eps)?;
    let (mean, ci) = match estimator {
        Estimator::Exact => (exact_phi_mean(model, cfg, series, eps)?, 0.0),
        Estimator::MonteCarlo(mc) => {
            let est = estimate_phi_mean(exec, model, cfg, series, eps, mc)?;
            (est.mean, n as f64 * est.ci_halfwidth)
        }
    };
    Ok(Gap { value: matfun::norm_star(&(mean - mf))?, ci, wall_ms: exec.now_ms() - start })
}

/// `||E(H^k) - E(H)^k||_*`.
pub fn gap_power<E: Executor>(
    exec: &E,
    model: &ErModel,
    cfg: &OpinionConfig,
    k: usize,
    estimator: &Estimator,
) -> Result<Gap> {
    let series = PowerSeriesSpec::monomial(k);
    let start = exec.now_ms();
    let n = model.n();
    let mf = meanfield_phi_rows(model, cfg, &series, 1.0)?;
    let (mean, ci) = match estimator {
        Estimator::Exact => (exact_power_mean(model, cfg, k)?, 0.0),
        Estimator::MonteCarlo(mc) => {
            let est = estimate_power_mean(exec, model, cfg, k, mc)?;
            (est.mean, n as f64 * est.ci_halfwidth)
        }
    };
    Ok(Gap { value: matfun::norm_star(&(mean - mf))?, ci, wall_ms: exec.now_ms() - start })
}

/// Mean diagonal entry of `phi(H(G))` and of `phi(E(H))` when every
/// `alpha_i` equals `alpha`, read from `rows` diagonal entries per sample, with
/// the Hoeffding halfwidth of the sampled mean.
struct ExchangeableDiagonal {
    sampled: f64,
    meanfield: f64,
    halfwidth: f64,
}

fn exchangeable_diagonal<E: Executor>(
    exec: &E,
    model: &ErModel,
    alpha: f64,
    series: &PowerSeriesSpec,
    eps: f64,
    mc: &McSettings,
    rows: usize,
) -> Result<ExchangeableDiagonal> {
    let n = model.n();
    let cfg = OpinionConfig::uniform(alpha, vec![0.0; n])?;
    if alpha >= series.radius() {
        return Err(Error::OutsideRadius { norm: alpha, radius: series.radius() });
    }
    if rows == 0 {
        return Err(Error::InvalidArgument("at least one row per sample is required"));
    }
    let rows = rows.min(n);
    let order = matfun::truncation_order(series, alpha, eps)?;
    let coeffs = series_coefficients(series, order);
    let e = ExpectedInfluence::new(model, &cfg)?;
    let mut mf_row = vec![0.0; n];
    e.series_row(0, &coeffs, &mut mf_row);
    let sum = mc_vector_sum(exec, 1, mc, |s, acc| {
        let g = sample_graph(model, mc, s);
        let h = SparseInfluence::new(&g, &cfg)?;
        let mut kernel = RowSeries::new(n);
        let mut diag = 0.0;
        for t in 0..rows {
            diag += kernel.diagonal(&h, (s * rows + t) % n, &coeffs);
        }
        acc[0] += diag / rows as f64;
        Ok(())
    })?;
    Ok(ExchangeableDiagonal {
        sampled: sum[0] / mc.samples as f64,
        meanfield: mf_row[0],
        halfwidth: series_entry_range(series, alpha, order) * mc.halfwidth(),
    })
}

/// `||E(phi(H)) - phi(E(H))||_*` for a model where every `alpha_i` equals
/// `alpha`, estimated from `rows` diagonal entries per sampled graph.
///
/// Relabelling nodes leaves both matrices unchanged, so each has the form
/// `a I + b (J - I)`, and both have row sums `phi(alpha)` because every row
/// of `H(G)` and of `E(H)` sums to `alpha`. The norm is therefore exactly
/// `2 |E(phi(H)_ii) - phi(E(H))_ii|`, which only needs diagonal entries.
/// `ci` is twice the Hoeffding halfwidth of that diagonal mean.
pub fn gap_phi_exchangeable<E: Executor>(
    exec: &E,
    model: &ErModel,
    alpha: f64,
    series: &PowerSeriesSpec,
    eps: f64,
    mc: &McSettings,
    rows: usize,
) -> Result<Gap> {
    let start = exec.now_ms();
    let d = exchangeable_diagonal(exec, model, alpha, series, eps, mc, rows)?;
    Ok(Gap {
        value: 2.0 * (d.sampled - d.meanfield).abs(),
        ci: 2.0 * d.halfwidth,
        wall_ms: exec.now_ms() - start,
    })
}

/// `||E(x(G, inf)) - x_bar(inf)||` when every `alpha_i` equals `alpha`.
///
/// With a constant `alpha`, `E((I - H)^{-1})` and `(I - E(H))^{-1}` are both
/// `a I + b (J - I)` with row sums `1 / (1 - alpha)`, so
///
/// ```text
/// E(x(G, inf)) - x_bar(inf) = (1 - alpha) (a - a_bar) (n x0 - sum(x0) 1) / (n - 1)
/// ```
///
/// and only the mean diagonal entry `a` of the sampled resolvent has to be
/// estimated. `ci` scales its halfwidth by the same factor; the truncation at
/// `eps` adds at most `(1 - alpha) 2 eps ||v||` on top.
#[allow(clippy::too_many_arguments)]
pub fn gap_stable_exchangeable<E: Executor>(
    exec: &E,
    model: &ErModel,
    alpha: f64,
    x0: &[f64],
    norm: VectorNorm,
    eps: f64,
    mc: &McSettings,
    rows: usize,
) -> Result<Gap> {
    let n = model.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    if let VectorNorm::Rho(r) = norm {
        VectorNorm::rho(r)?;
    }
    let start = exec.now_ms();
    let d = exchangeable_diagonal(exec, model, alpha, &PowerSeriesSpec::Resolvent, eps, mc, rows)?;
    let total: f64 = x0.iter().sum();
    let v: Vec<f64> = x0.iter().map(|x| (n as f64 * x - total) / (n - 1) as f64).collect();
    let scale = (1.0 - alpha) * norm.eval(&v)?;
    Ok(Gap {
        value: scale * (d.sampled - d.meanfield).abs(),
        ci: scale * d.halfwidth,
        wall_ms: exec.now_ms() - start,
    })
}
