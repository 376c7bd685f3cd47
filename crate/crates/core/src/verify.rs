//! Checkable inequalities behind the concentration results: conditional
//! expectations of truncated inverse degrees along trails, their upper and
//! lower bounds, the exact factorization of directed repetition-free trails,
//! and empirical decay rates of power gaps.
//!
//! Throughout, `f_i = 1/deg(i)` (out-degree for directed models) when the
//! degree is positive and `0` otherwise, and `1_c = 1` is the event that
//! every consecutive pair of the trail `c` is an edge.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::OpinionConfig;
use crate::linalg::CompensatedSum;
use crate::montecarlo::{self, Estimator, Executor};
use crate::rand_graph::{self, ErModel, Graph, RegimeRule};
use crate::{Error, Result};

/// Size from which the asymptotic lower bounds are asserted by default.
pub const DEFAULT_N0: usize = 10;

/// Relative slack allowed for rounding when comparing against a bound.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// Tolerance of the directed factorization identity.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-14;

fn check_p_open(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("p must lie in (0, 1]"))
    }
}

/// `E(f_i | 1_ij = 1) = (1 - (1-p)^(n-1)) / ((n-1) p)`.
pub fn cond_expect_f_given_edge(n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two nodes"));
    }
    check_p_open(p)?;
    let m = (n - 1) as f64;
    Ok(-libm::expm1(m * libm::log1p(-p)) / (m * p))
}

/// Whether a check is enforced, and how it came out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Evaluated but outside the regime where the inequality is claimed.
    Recorded,
    /// The conditioning event has probability zero.
    Undefined,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Recorded => "recorded",
            Self::Undefined => "undefined",
        }
    }
}

/// One evaluated inequality. `margin >= 0` means the inequality holds.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub params: String,
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub status: CheckStatus,
}

impl CheckRow {
    fn upper(check: &'static str, params: String, lhs: f64, bound: f64, asserted: bool) -> Self {
        Self::finish(check, params, lhs, bound, bound - lhs, asserted)
    }

    fn lower(check: &'static str, params: String, lhs: f64, bound: f64, asserted: bool) -> Self {
        Self::finish(check, params, lhs, bound, lhs - bound, asserted)
    }

    fn finish(check: &'static str, params: String, lhs: f64, bound: f64, margin: f64, asserted: bool) -> Self {
        let slack = BOUND_TOLERANCE * lhs.abs().max(bound.abs());
        let status = if !asserted {
            CheckStatus::Recorded
        } else if margin >= -slack {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self { check, params, lhs, bound, margin, status }
    }

    fn relative_margin(&self) -> f64 {
        let scale = self.bound.abs().max(self.lhs.abs());
        if scale > 0.0 {
            self.margin / scale
        } else {
            self.margin
        }
    }
}

/// Regime in which the single-edge lower bound is asserted.
pub fn edge_regime_holds(n: usize, p: f64, n0: usize) -> bool {
    n >= n0 && n >= 2 && p >= 2.0 * libm::log(n as f64) / n as f64
}

/// Regime in which the repetition-free lower bound is asserted:
/// `n >= n0` and `p >= k! log(n) / (n - k)`.
pub fn path_regime_holds(n: usize, p: f64, k: usize, n0: usize) -> bool {
    n >= n0.max(3) && k < n && p >= factorial(k) * libm::log(n as f64) / (n - k) as f64
}

/// `1/(np) <= E(f_i | 1_ij = 1) <= 1/((n-1)p)`; the upper half always, the
/// lower half only inside [`edge_regime_holds`].
pub fn edge_sandwich(n: usize, p: f64, n0: usize) -> Result<[CheckRow; 2]> {
    let v = cond_expect_f_given_edge(n, p)?;
    let params = format!("n={n} p={p}");
    Ok([
        CheckRow::upper("edge-upper", params.clone(), v, 1.0 / ((n - 1) as f64 * p), true),
        CheckRow::lower("edge-lower", params, v, 1.0 / (n as f64 * p), edge_regime_holds(n, p, n0)),
    ])
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Upper bounds on `E(prod_r f_{i_r}^{m_r} | 1_c = 1)` for a trail whose
/// first `k` nodes visit `i_r` exactly `m_r` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepetitionBound {
    /// `prod_r m_r! / (p^{m_r} (n-k)^{m_r})`.
    pub product: f64,
    /// `k! / (p^k (n-k)^k)`.
    pub coarse: f64,
}

pub fn repetition_bound(n: usize, p: f64, k: usize, multiplicities: &[u32]) -> Result<RepetitionBound> {
    check_p_open(p)?;
    if multiplicities.iter().map(|m| *m as usize).sum::<usize>() != k {
        return Err(Error::InvalidArgument("multiplicities must sum to k"));
    }
    if k >= n {
        return Err(Error::InvalidArgument("need k < n"));
    }
    let scale = p * (n - k) as f64;
    let product = multiplicities
        .iter()
        .map(|&m| factorial(m as usize) / libm::pow(scale, m as f64))
        .product();
    Ok(RepetitionBound { product, coarse: factorial(k) / libm::pow(scale, k as f64) })
}

/// `(1 - 1/log n)^k / ((n-k) p)^k`, the lower bound for trails without
/// repetitions among their first `k` nodes.
pub fn path_lower_bound(n: usize, p: f64, k: usize) -> Result<f64> {
    check_p_open(p)?;
    if n < 3 {
        return Err(Error::InvalidArgument("need n >= 3"));
    }
    if k >= n {
        return Err(Error::InvalidArgument("need k < n"));
    }
    let base = (1.0 - 1.0 / libm::log(n as f64)) / ((n - k) as f64 * p);
    Ok(libm::pow(base, k as f64))
}

/// `k^(k - |c|) / (p^k (n-k)^k)`, the directed bound where `|c|` counts the
/// distinct edges of the trail.
pub fn directed_repetition_bound(n: usize, p: f64, k: usize, path_len: usize) -> Result<f64> {
    check_p_open(p)?;
    if k >= n {
        return Err(Error::InvalidArgument("need k < n"));
    }
    if path_len > k {
        return Err(Error::InvalidArgument("a trail of size k has at most k distinct edges"));
    }
    let scale = p * (n - k) as f64;
    Ok(libm::pow(k as f64, (k - path_len) as f64) / libm::pow(scale, k as f64))
}

/// An ordered node sequence `c_1 .. c_{k+1}` (0-based), repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrailSpec {
    nodes: Vec<usize>,
}

impl TrailSpec {
    pub fn new(nodes: Vec<usize>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("a trail needs at least two nodes"));
        }
        Ok(Self { nodes })
    }

    /// The size `k`, one less than the number of nodes.
    pub fn size(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.nodes.iter().find(|&&v| v >= n) {
            Some(&node) => Err(Error::NodeOutOfRange { node, n }),
            None => Ok(()),
        }
    }

    /// Some `c_r = c_{r+1}`; such a trail is never a path.
    pub fn has_consecutive_repeat(&self) -> bool {
        self.nodes.windows(2).any(|w| w[0] == w[1])
    }

    /// The first `k` nodes are pairwise distinct.
    pub fn is_repetition_free(&self) -> bool {
        let head = &self.nodes[..self.size()];
        head.iter().enumerate().all(|(r, v)| !head[..r].contains(v))
    }

    /// `(i_r, m_r)`: distinct nodes among the first `k`, in order of first
    /// appearance, with their visit counts.
    pub fn multiplicities(&self) -> Vec<(usize, u32)> {
        let mut out: Vec<(usize, u32)> = Vec::new();
        for &v in &self.nodes[..self.size()] {
            match out.iter_mut().find(|(u, _)| *u == v) {
                Some((_, m)) => *m += 1,
                None => out.push((v, 1)),
            }
        }
        out
    }

    /// `|c|`: the number of distinct edges traversed (unordered pairs when
    /// undirected), ignoring self-pairs.
    pub fn distinct_edges(&self, directed: bool) -> usize {
        self.edges(directed).len()
    }

    fn edges(&self, directed: bool) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for w in self.nodes.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let e = if directed || w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
            if !out.contains(&e) {
                out.push(e);
            }
        }
        out
    }

    fn vertex_set(&self) -> Vec<usize> {
        let mut v = self.nodes.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn label(&self) -> String {
        let mut s = String::new();
        for (r, v) in self.nodes.iter().enumerate() {
            if r > 0 {
                s.push('-');
            }
            s.push_str(&format!("{v}"));
        }
        s
    }
}

/// All `n^(k+1)` trails of size `k`, in lexicographic order.
pub fn all_trails(n: usize, k: usize) -> Vec<TrailSpec> {
    let count = n.pow((k + 1) as u32);
    (0..count)
        .map(|mut idx| {
            let mut nodes = vec![0; k + 1];
            for slot in nodes.iter_mut().rev() {
                *slot = idx % n;
                idx /= n;
            }
            TrailSpec { nodes }
        })
        .collect()
}

/// Exact trail quantities over the enumerated graph space.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailExpectations {
    /// `P(1_c = 1)`.
    pub path_probability: f64,
    /// `E(prod_{r<=k} f_{c_r} | 1_c = 1)`, `None` when the event is null.
    pub f_conditional: Option<f64>,
    /// `E(H_c | 1_c = 1)`, `None` when the event is null.
    pub h_conditional: Option<f64>,
    /// `E(H_c)` with `H_c = prod_r H_{c_r c_{r+1}}`.
    pub joint: f64,
    /// `E(H)_c = prod_r E(H_{c_r c_{r+1}})`.
    pub product: f64,
}

impl TrailExpectations {
    /// `E(H_c | 1_c = 1)`, or [`Error::UndefinedConditional`].
    pub fn conditional(&self) -> Result<f64> {
        self.h_conditional.ok_or(Error::UndefinedConditional)
    }
}

#[derive(Default, Clone, Copy)]
struct TrailSums {
    mass: CompensatedSum,
    f: CompensatedSum,
    h: CompensatedSum,
    joint: CompensatedSum,
}

fn influence_entry(g: &Graph, alpha: &[f64], deg: &[usize], i: usize, j: usize) -> f64 {
    if i == j {
        if deg[i] == 0 {
            alpha[i]
        } else {
            0.0
        }
    } else if g.has_edge(i, j) {
        alpha[i] / deg[i] as f64
    } else {
        0.0
    }
}

/// Enumerates the model once and evaluates every trail against every graph.
pub fn exact_trail_expectations(
    model: &ErModel,
    cfg: &OpinionConfig,
    trails: &[TrailSpec],
) -> Result<Vec<TrailExpectations>> {
    let n = model.n();
    cfg.check_dim(n)?;
    for t in trails {
        t.check_range(n)?;
    }
    let alpha = cfg.alpha();
    let mut sums = vec![TrailSums::default(); trails.len()];
    let mut mean_h = vec![CompensatedSum::default(); n * n];
    let mut deg = vec![0usize; n];
    for (g, w) in rand_graph::enumerate_weighted(model)? {
        for (i, d) in deg.iter_mut().enumerate() {
            *d = g.degree_unchecked(i);
        }
        for i in 0..n {
            for j in 0..n {
                mean_h[i * n + j].add(w * influence_entry(&g, alpha, &deg, i, j));
            }
        }
        for (t, s) in trails.iter().zip(sums.iter_mut()) {
            let nodes = t.nodes();
            let mut hc = 1.0;
            for e in nodes.windows(2) {
                hc *= influence_entry(&g, alpha, &deg, e[0], e[1]);
            }
            s.joint.add(w * hc);
            let is_path = nodes.windows(2).all(|e| e[0] != e[1] && g.has_edge(e[0], e[1]));
            if is_path {
                let fc: f64 = nodes[..t.size()].iter().map(|&v| 1.0 / deg[v] as f64).product();
                s.mass.add(w);
                s.f.add(w * fc);
                s.h.add(w * hc);
            }
        }
    }
    Ok(trails
        .iter()
        .zip(&sums)
        .map(|(t, s)| {
            let mass = s.mass.value();
            let defined = mass > 0.0;
            TrailExpectations {
                path_probability: mass,
                f_conditional: defined.then(|| s.f.value() / mass),
                h_conditional: defined.then(|| s.h.value() / mass),
                joint: s.joint.value(),
                product: t.nodes().windows(2).map(|e| mean_h[e[0] * n + e[1]].value()).product(),
            }
        })
        .collect())
}

/// [`exact_trail_expectations`] for a single trail.
pub fn exact_conditional_trail_expectations(
    model: &ErModel,
    cfg: &OpinionConfig,
    trail: &TrailSpec,
) -> Result<TrailExpectations> {
    Ok(exact_trail_expectations(model, cfg, core::slice::from_ref(trail))?.remove(0))
}

/// `E((shift + X)^-power)` for `X ~ Binomial(trials, p)`, `shift >= 1`.
pub fn inverse_binomial_moment(trials: usize, p: f64, shift: usize, power: u32) -> f64 {
    let term = |t: usize| libm::pow((shift + t) as f64, -(power as f64));
    if p <= 0.0 || trials == 0 {
        return term(0);
    }
    if p >= 1.0 {
        return term(trials);
    }
    let nt = trials as f64;
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let lnf = libm::lgamma(nt + 1.0);
    let mut acc = CompensatedSum::default();
    for t in 0..=trials {
        let tf = t as f64;
        let lpmf = lnf - libm::lgamma(tf + 1.0) - libm::lgamma(nt - tf + 1.0) + tf * lp + (nt - tf) * lq;
        if lpmf > -745.0 {
            acc.add(libm::exp(lpmf) * term(t));
        }
    }
    acc.value()
}

/// `E(prod_{r<=k} f_{c_r} | 1_c = 1)` for any `n`.
///
/// Only the edges among the trail's own vertices are enumerated; each vertex
/// `u` has `Binomial(n - |V(c)|, p)` further neighbours, independent across
/// vertices and of the enumerated edges.
pub fn conditional_f_product(model: &ErModel, trail: &TrailSpec) -> Result<f64> {
    let n = model.n();
    let p = model.p();
    let directed = model.is_directed();
    trail.check_range(n)?;
    if trail.has_consecutive_repeat() || p == 0.0 {
        return Err(Error::UndefinedConditional);
    }
    let verts = trail.vertex_set();
    let v = verts.len();
    let local = |x: usize| verts.binary_search(&x).unwrap_or(0);
    let required: Vec<(usize, usize)> =
        trail.edges(directed).into_iter().map(|(a, b)| (local(a), local(b))).collect();
    let mut free = Vec::new();
    for a in 0..v {
        for b in 0..v {
            let admissible = if directed { a != b } else { a < b };
            if admissible && !required.contains(&(a, b)) {
                free.push((a, b));
            }
        }
    }
    let mults: Vec<(usize, u32)> = trail.multiplicities().into_iter().map(|(u, m)| (local(u), m)).collect();
    let outside = n - v;
    // Inverse moments depend only on (internal degree, power); both are small.
    let mut memo: Vec<((usize, u32), f64)> = Vec::new();
    let mut moment = |d: usize, m: u32| -> f64 {
        if let Some((_, val)) = memo.iter().find(|(key, _)| *key == (d, m)) {
            return *val;
        }
        let val = inverse_binomial_moment(outside, p, d, m);
        memo.push(((d, m), val));
        val
    };
    let mut total = CompensatedSum::default();
    let mut deg = vec![0usize; v];
    for mask in 0u64..(1u64 << free.len()) {
        deg.iter_mut().for_each(|d| *d = 0);
        let mut weight = 1.0;
        for (a, b) in &required {
            deg[*a] += 1;
            if !directed {
                deg[*b] += 1;
            }
        }
        for (bit, (a, b)) in free.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                weight *= p;
                deg[*a] += 1;
                if !directed {
                    deg[*b] += 1;
                }
            } else {
                weight *= 1.0 - p;
            }
        }
        if weight == 0.0 {
            continue;
        }
        let value: f64 = mults.iter().map(|&(u, m)| moment(deg[u], m)).product();
        total.add(weight * value);
    }
    Ok(total.value())
}

fn model_label(model: &ErModel) -> &'static str {
    if model.is_directed() {
        "dir"
    } else {
        "und"
    }
}

/// Bound checks for one trail given its conditional `E(prod f | 1_c = 1)`.
fn trail_checks(model: &ErModel, trail: &TrailSpec, value: f64, n0: usize) -> Vec<CheckRow> {
    let (n, p, k) = (model.n(), model.p(), trail.size());
    let mut rows = Vec::new();
    if k >= n {
        return rows;
    }
    let params = || format!("model={} n={n} p={p} k={k} trail={}", model_label(model), trail.label());
    let mults: Vec<u32> = trail.multiplicities().iter().map(|(_, m)| *m).collect();
    if let Ok(b) = repetition_bound(n, p, k, &mults) {
        rows.push(CheckRow::upper("repetition-product", params(), value, b.product, true));
        rows.push(CheckRow::upper("repetition-coarse", params(), b.product, b.coarse, true));
    }
    if trail.is_repetition_free() && n >= 3 {
        if let Ok(b) = path_lower_bound(n, p, k) {
            rows.push(CheckRow::lower("path-lower", params(), value, b, path_regime_holds(n, p, k, n0)));
        }
    }
    if model.is_directed() {
        if let Ok(b) = directed_repetition_bound(n, p, k, trail.distinct_edges(true)) {
            rows.push(CheckRow::upper("directed-repetition", params(), value, b, true));
        }
    }
    rows
}

/// Keeps, per check id, the row with the smallest relative margin; a failure
/// anywhere makes the kept row fail.
fn worst_per_check(rows: Vec<CheckRow>, scope: &str, count: usize) -> Vec<CheckRow> {
    let mut out: Vec<CheckRow> = Vec::new();
    let mut failed: Vec<&'static str> = Vec::new();
    for row in rows {
        if row.status == CheckStatus::Fail && !failed.contains(&row.check) {
            failed.push(row.check);
        }
        match out.iter_mut().find(|r| r.check == row.check) {
            Some(kept) if row.relative_margin() < kept.relative_margin() => *kept = row,
            Some(_) => {}
            None => out.push(row),
        }
    }
    for row in &mut out {
        if failed.contains(&row.check) {
            row.status = CheckStatus::Fail;
        }
        let worst = row.params.rsplit("trail=").next().unwrap_or("").into();
        let worst: String = worst;
        row.params = format!("{scope} trails={count} worst={worst}");
    }
    out
}

/// Tiny-model grid checked by full enumeration: undirected `n` in
/// `{3, 4, 5}`, directed `n` in `{3, 4}`, `p` in `{0.3, 0.5, 0.7}`, `k` in
/// `{1, 2, 3}` with `k < n`, over every trail that can be a path.
pub fn enumerated_grid(n0: usize) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let models = [(3, false), (4, false), (5, false), (3, true), (4, true)];
    for (n, directed) in models {
        for p in [0.3, 0.5, 0.7] {
            let model = ErModel::new(n, p, directed)?;
            let cfg = OpinionConfig::uniform(0.5, vec![0.0; n])?;
            for k in 1..=3usize {
                if k >= n {
                    continue;
                }
                let trails: Vec<TrailSpec> =
                    all_trails(n, k).into_iter().filter(|t| !t.has_consecutive_repeat()).collect();
                let exact = exact_trail_expectations(&model, &cfg, &trails)?;
                let mut group = Vec::new();
                for (t, e) in trails.iter().zip(&exact) {
                    let value = e.f_conditional.ok_or(Error::UndefinedConditional)?;
                    group.extend(trail_checks(&model, t, value, n0));
                }
                let scope = format!("model={} n={n} p={p} k={k}", model_label(&model));
                rows.extend(worst_per_check(group, &scope, trails.len()));
            }
        }
    }
    Ok(rows)
}

/// Representative trails of size `k`: a simple path, a closed cycle and a
/// back-and-forth walk.
pub fn representative_trails(k: usize) -> Vec<TrailSpec> {
    let mut out = vec![TrailSpec { nodes: (0..=k).collect() }];
    if k >= 2 {
        let mut cycle: Vec<usize> = (0..k).collect();
        cycle.push(0);
        out.push(TrailSpec { nodes: cycle });
        out.push(TrailSpec { nodes: (0..=k).map(|r| r % 2).collect() });
    }
    out
}

/// Larger models, checked through [`conditional_f_product`]: `n` in
/// `{10, 100, 1000}` with `p = 3 log(n) / n`, both orientations.
pub fn closed_form_grid(n0: usize) -> Result<Vec<CheckRow>> {
    let rule = RegimeRule::new(3.0, 1.0)?;
    let mut rows = Vec::new();
    for n in [10usize, 100, 1000] {
        let p = rule.p(n)?;
        rows.extend(edge_sandwich(n, p, n0)?);
        for directed in [false, true] {
            let model = ErModel::new(n, p, directed)?;
            for k in 1..=3 {
                for t in representative_trails(k) {
                    let value = conditional_f_product(&model, &t)?;
                    rows.extend(trail_checks(&model, &t, value, n0));
                }
            }
        }
    }
    Ok(rows)
}

/// `max |E(H_c) - E(H)_c|` over repetition-free trails of size `k`, with the
/// number of trails examined.
pub fn factorization_defect(model: &ErModel, cfg: &OpinionConfig, k: usize) -> Result<(f64, usize)> {
    let trails: Vec<TrailSpec> =
        all_trails(model.n(), k).into_iter().filter(TrailSpec::is_repetition_free).collect();
    let exact = exact_trail_expectations(model, cfg, &trails)?;
    let worst = exact.iter().map(|e| (e.joint - e.product).abs()).fold(0.0, f64::max);
    Ok((worst, trails.len()))
}

/// Factorization rows for directed `n` in `{2, 3, 4}`, `k <= min(3, n)`,
/// `p` in `{0.3, 0.5, 0.7}`.
pub fn factorization_grid() -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for n in 2..=4usize {
        let alpha: Vec<f64> = (0..n).map(|i| 0.3 + 0.15 * i as f64).collect();
        let cfg = OpinionConfig::new(alpha, 0.8, vec![0.0; n])?;
        for p in [0.3, 0.5, 0.7] {
            let model = ErModel::directed(n, p)?;
            for k in 1..=n.min(3) {
                let (defect, count) = factorization_defect(&model, &cfg, k)?;
                let params = format!("model=dir n={n} p={p} k={k} trails={count}");
                let margin = FACTORIZATION_TOLERANCE - defect;
                let status = if margin >= 0.0 { CheckStatus::Pass } else { CheckStatus::Fail };
                rows.push(CheckRow {
                    check: "directed-factorization",
                    params,
                    lhs: defect,
                    bound: FACTORIZATION_TOLERANCE,
                    margin,
                    status,
                });
            }
        }
    }
    Ok(rows)
}

/// Every grid above, in order.
pub fn lemma_grid(n0: usize) -> Result<Vec<CheckRow>> {
    let mut rows = enumerated_grid(n0)?;
    rows.extend(closed_form_grid(n0)?);
    rows.extend(factorization_grid()?);
    Ok(rows)
}

pub fn violations(rows: &[CheckRow]) -> usize {
    rows.iter().filter(|r| r.status == CheckStatus::Fail).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendRow {
    pub n: usize,
    pub p: f64,
    pub gap: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerGapTrend {
    pub k: usize,
    pub rows: Vec<TrendRow>,
    /// Least-squares slope of `log gap` against `log n`, when every gap is
    /// positive and there are at least two rungs.
    pub slope: Option<f64>,
}

/// `||E(H^k) - E(H)^k||_*` along an increasing ladder of sizes; `instance`
/// supplies the model and configuration for each size.
pub fn power_gap_trend<E, F>(
    exec: &E,
    ns: &[usize],
    k: usize,
    instance: F,
    estimator: &Estimator,
) -> Result<PowerGapTrend>
where
    E: Executor,
    F: Fn(usize) -> Result<(ErModel, OpinionConfig)>,
{
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("the size ladder must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let (model, cfg) = instance(n)?;
        let gap = montecarlo::gap_power(exec, &model, &cfg, k, estimator)?;
        rows.push(TrendRow { n, p: model.p(), gap: gap.value, ci: gap.ci });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.gap)).collect();
    Ok(PowerGapTrend { k, slope: loglog_slope(&points), rows })
}

/// Least-squares slope of `log y` on `log x`; `None` unless all values are
/// positive and at least two distinct `x` are given.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let m = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ly: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Exact `||E(H^2) - E(H)^2||_*` for a directed model with constant `alpha`.
///
/// Out-rows are independent, so only the walks `i -> i -> j` correlate:
/// the diagonal entry is `alpha^2 (s - s^2)` and each off-diagonal entry is
/// `-alpha^2 s (1 - s) / (n - 1)` with `s = (1-p)^(n-1)`.
pub fn directed_square_gap(n: usize, p: f64, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two nodes"));
    }
    let s = libm::pow(1.0 - p, (n - 1) as f64);
    Ok(2.0 * alpha * alpha * s * (1.0 - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield;
    use approx::assert_relative_eq;

    #[test]
    fn edge_conditional_examples() {
        assert_relative_eq!(cond_expect_f_given_edge(2, 0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(cond_expect_f_given_edge(3, 0.5).unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(cond_expect_f_given_edge(3, 0.9).unwrap(), 0.55, epsilon = 1e-15);
        assert!(cond_expect_f_given_edge(1, 0.5).is_err());
        assert!(cond_expect_f_given_edge(4, 0.0).is_err());
        for n in 2..8 {
            let v = cond_expect_f_given_edge(n, 0.35).unwrap();
            let m = meanfield::neg_binomial_moment((n - 2) as u32, 0.35, 1).unwrap();
            assert_relative_eq!(v, m, max_relative = 1e-13);
        }
    }

    #[test]
    fn edge_sandwich_examples() {
        let [up, low] = edge_sandwich(2, 0.5, DEFAULT_N0).unwrap();
        assert_eq!((up.lhs, up.bound, low.bound), (1.0, 2.0, 1.0));
        assert_eq!(up.status, CheckStatus::Pass);
        assert_eq!(low.status, CheckStatus::Recorded);
        assert!(low.margin >= 0.0);

        let [up, low] = edge_sandwich(100, 0.1, DEFAULT_N0).unwrap();
        assert_relative_eq!(low.bound, 0.1, epsilon = 1e-15);
        assert_relative_eq!(up.bound, 0.101_010_101_010_101, epsilon = 1e-12);
        assert_eq!((up.status, low.status), (CheckStatus::Pass, CheckStatus::Pass));

        let [up, low] = edge_sandwich(3, 0.5, DEFAULT_N0).unwrap();
        assert_relative_eq!(low.bound, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(up.lhs, 0.75, epsilon = 1e-15);
        assert_eq!(up.status, CheckStatus::Pass);
    }

    #[test]
    fn bound_formulas() {
        let b = repetition_bound(10, 0.5, 1, &[1]).unwrap();
        assert_relative_eq!(b.product, 1.0 / (0.5 * 9.0), epsilon = 1e-15);
        let b = repetition_bound(10, 0.5, 2, &[2]).unwrap();
        assert_relative_eq!(b.product, 0.125, epsilon = 1e-15);
        assert!(repetition_bound(10, 0.5, 3, &[2]).is_err());
        assert!(repetition_bound(3, 0.5, 3, &[1, 1, 1]).is_err());
        for split in [&[3u32][..], &[2, 1], &[1, 1, 1], &[1, 2]] {
            let b = repetition_bound(12, 0.4, 3, split).unwrap();
            assert!(b.product <= b.coarse);
        }

        let n = 20usize;
        let expect = (1.0 / (19.0 * 0.3)) * (1.0 - 1.0 / libm::log(20.0));
        assert_relative_eq!(path_lower_bound(n, 0.3, 1).unwrap(), expect, epsilon = 1e-15);
        assert!(path_lower_bound(2, 0.3, 1).is_err());

        assert_relative_eq!(directed_repetition_bound(10, 0.5, 3, 3).unwrap(), 1.0 / (0.125 * 343.0));
        assert_relative_eq!(directed_repetition_bound(10, 0.5, 3, 2).unwrap(), 0.069_970_845_481_049_56, epsilon = 1e-15);
    }

    #[test]
    fn trail_structure() {
        let t = TrailSpec::new(vec![0, 1, 0, 2]).unwrap();
        assert_eq!(t.size(), 3);
        assert_eq!(t.multiplicities(), vec![(0, 2), (1, 1)]);
        assert!(!t.is_repetition_free());
        assert_eq!(t.distinct_edges(false), 2);
        assert_eq!(t.distinct_edges(true), 3);
        assert!(TrailSpec::new(vec![1]).is_err());
        let loop_ = TrailSpec::new(vec![1, 1, 2]).unwrap();
        assert!(loop_.has_consecutive_repeat());
        assert!(TrailSpec::new(vec![0, 1, 2, 0]).unwrap().is_repetition_free());
        assert_eq!(all_trails(3, 2).len(), 27);
    }

    #[test]
    fn undirected_path_example() {
        let model = ErModel::undirected(3, 0.5).unwrap();
        let cfg = OpinionConfig::uniform(0.5, vec![0.0; 3]).unwrap();
        let t = TrailSpec::new(vec![0, 1, 2]).unwrap();
        let e = exact_conditional_trail_expectations(&model, &cfg, &t).unwrap();
        // deg(1) = 2 on the path, deg(0) = 1 + 1_{02}
        assert_relative_eq!(e.f_conditional.unwrap(), 0.75 * 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.conditional().unwrap(), 0.25 * 0.375, epsilon = 1e-15);
        assert_relative_eq!(e.path_probability, 0.25, epsilon = 1e-15);
        assert!(e.conditional().unwrap() <= repetition_bound(3, 0.5, 2, &[1, 1]).unwrap().coarse);
        assert!(e.conditional().unwrap() >= path_lower_bound(3, 0.5, 2).unwrap());
        assert_relative_eq!(e.joint, e.path_probability * e.conditional().unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn undefined_conditional_for_self_pairs() {
        let model = ErModel::undirected(3, 0.5).unwrap();
        let cfg = OpinionConfig::uniform(0.5, vec![0.0; 3]).unwrap();
        let t = TrailSpec::new(vec![0, 0, 1]).unwrap();
        let e = exact_conditional_trail_expectations(&model, &cfg, &t).unwrap();
        assert_eq!(e.conditional(), Err(Error::UndefinedConditional));
        assert_eq!(e.joint, 0.0);
        assert_eq!(conditional_f_product(&model, &t), Err(Error::UndefinedConditional));
        let back = TrailSpec::new(vec![0, 1, 1]).unwrap();
        let e = exact_conditional_trail_expectations(&model, &cfg, &back).unwrap();
        assert_eq!(e.path_probability, 0.0);
    }

    #[test]
    fn directed_factorization_and_undirected_repetition() {
        let model = ErModel::directed(3, 0.5).unwrap();
        let cfg = OpinionConfig::new(vec![0.5, 0.3, 0.7], 0.7, vec![0.0; 3]).unwrap();
        let e = exact_conditional_trail_expectations(&model, &cfg, &TrailSpec::new(vec![0, 1, 2]).unwrap()).unwrap();
        assert!((e.joint - e.product).abs() <= FACTORIZATION_TOLERANCE);

        let und = ErModel::undirected(3, 0.5).unwrap();
        let cfg = OpinionConfig::uniform(0.5, vec![0.0; 3]).unwrap();
        let t = TrailSpec::new(vec![0, 1, 0]).unwrap();
        let e = exact_conditional_trail_expectations(&und, &cfg, &t).unwrap();
        assert!((e.joint - e.product).abs() > 1e-3);
        let bound = repetition_bound(3, 0.5, 2, &[1, 1]).unwrap();
        assert!(e.f_conditional.unwrap() <= bound.product);
    }

    #[test]
    fn closed_form_conditional_matches_enumeration() {
        for (n, directed) in [(4, false), (5, false), (3, true), (4, true)] {
            for p in [0.3, 0.8] {
                let model = ErModel::new(n, p, directed).unwrap();
                let cfg = OpinionConfig::uniform(0.5, vec![0.0; n]).unwrap();
                for k in 1..=3 {
                    let trails: Vec<TrailSpec> =
                        all_trails(n, k).into_iter().filter(|t| !t.has_consecutive_repeat()).collect();
                    let exact = exact_trail_expectations(&model, &cfg, &trails).unwrap();
                    for (t, e) in trails.iter().zip(exact) {
                        let fast = conditional_f_product(&model, t).unwrap();
                        assert_relative_eq!(fast, e.f_conditional.unwrap(), max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_moments() {
        for (m, p) in [(0usize, 0.4), (7, 0.25), (30, 0.9), (400, 0.01)] {
            let a = inverse_binomial_moment(m, p, 1, 1);
            let b = meanfield::neg_binomial_moment(m as u32, p, 1).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-11);
        }
        assert_relative_eq!(inverse_binomial_moment(5, 1.0, 2, 2), 1.0 / 49.0, max_relative = 1e-15);
        assert_eq!(inverse_binomial_moment(5, 0.0, 2, 2), 0.25);
        let tail = inverse_binomial_moment(3000, 0.7, 1, 2);
        assert!(tail > 0.0 && tail < 1.0 / (2100.0f64 * 2100.0) * 1.1);
    }

    #[test]
    fn enumerated_grid_has_no_violations() {
        let rows = enumerated_grid(DEFAULT_N0).unwrap();
        assert_eq!(violations(&rows), 0, "{rows:#?}");
        assert!(rows.iter().any(|r| r.check == "directed-repetition"));
    }

    #[test]
    fn closed_form_grid_has_no_violations() {
        let rows = closed_form_grid(DEFAULT_N0).unwrap();
        assert_eq!(violations(&rows), 0, "{rows:#?}");
        let asserted_lower = rows.iter().filter(|r| r.check == "path-lower" && r.status == CheckStatus::Pass).count();
        assert!(asserted_lower > 0);
    }

    #[test]
    fn factorization_grid_is_exact() {
        let rows = factorization_grid().unwrap();
        assert!(rows.iter().all(|r| r.status == CheckStatus::Pass), "{rows:#?}");
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0].iter().map(|&x: &f64| (x, 3.0 / x)).collect();
        assert_relative_eq!(loglog_slope(&pts).unwrap(), -1.0, epsilon = 1e-12);
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_none());
        assert!(loglog_slope(&[(2.0, 1.0)]).is_none());
    }

    #[test]
    fn power_trend_examples() {
        let exec = montecarlo::Sequential;
        let cfg2 = |n: usize| {
            let x0 = if n == 2 { vec![0.0, 1.0] } else { vec![0.5; n] };
            Ok((ErModel::undirected(n, 0.5)?, OpinionConfig::uniform(0.5, x0)?))
        };
        let t = power_gap_trend(&exec, &[2], 2, cfg2, &Estimator::Exact).unwrap();
        assert_relative_eq!(t.rows[0].gap, 0.25, epsilon = 1e-15);
        assert!(t.slope.is_none());
        let zero = power_gap_trend(&exec, &[2, 3, 4], 0, cfg2, &Estimator::Exact).unwrap();
        assert!(zero.rows.iter().all(|r| r.gap == 0.0));
        assert!(power_gap_trend(&exec, &[3, 2], 1, cfg2, &Estimator::Exact).is_err());
    }

    #[test]
    fn directed_square_gap_matches_enumeration() {
        for n in 2..=4 {
            let model = ErModel::directed(n, 0.4).unwrap();
            let cfg = OpinionConfig::uniform(0.6, vec![0.0; n]).unwrap();
            let exact = montecarlo::gap_power(&montecarlo::Sequential, &model, &cfg, 2, &Estimator::Exact).unwrap();
            assert_relative_eq!(directed_square_gap(n, 0.4, 0.6).unwrap(), exact.value, max_relative = 1e-12);
        }
    }
}
