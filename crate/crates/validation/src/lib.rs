//! Acceptance runs, one function per criterion. Each returns whether the
//! criterion holds and a one-line summary of what was measured.

use std::sync::OnceLock;
use std::time::Instant;

use opinion_mf::core::dynamics::{self, OpinionConfig};
use opinion_mf::core::matfun::{PowerSeriesSpec, VectorNorm};
use opinion_mf::core::meanfield;
use opinion_mf::core::montecarlo::{self, Estimator, McSettings, Sequential};
use opinion_mf::core::optdemo::{self, AffineObjective, OptDemoSpec};
use opinion_mf::core::rand_graph::{self, ErModel};
use opinion_mf::core::{rng, verify, Matrix, Vector};
use opinion_mf::rules::{AlphaRule, ModelKind, NormSpec, Target, X0Rule};
use opinion_mf::sweep::{self, EstimatorSpec, Regime, SweepConfig, SweepRow};
use opinion_mf::RayonExecutor;
use rand::Rng;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    Outcome { pass, detail, seconds: start.elapsed().as_secs_f64() }
}

fn within(o: Outcome, limit_s: f64) -> Outcome {
    if o.seconds <= limit_s {
        return o;
    }
    Outcome { pass: false, detail: format!("{}; over the {limit_s} s budget", o.detail), ..o }
}

pub const LADDER: [usize; 7] = [64, 128, 256, 512, 1024, 2048, 4096];
pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const SAMPLES: usize = 2000;
pub const DELTA: f64 = 1e-3;
/// Constant `alpha` used by the Monte Carlo ladders.
pub const SWEEP_ALPHA: f64 = 0.5;

fn executor() -> RayonExecutor {
    RayonExecutor::from_env().expect("thread pool")
}

fn random_config<R: Rng>(rng: &mut R, n: usize, alpha_bar: f64) -> OpinionConfig {
    let alpha = (0..n).map(|_| alpha_bar * rng.random::<f64>()).collect();
    let x0 = (0..n).map(|_| rng.random::<f64>()).collect();
    OpinionConfig::new(alpha, alpha_bar, x0).unwrap()
}

pub fn closed_form_expected_influence() -> Outcome {
    within(
        timed(|| {
            let mut rng = rng::rng_from_seed(101);
            let mut worst = 0.0f64;
            let mut cases = 0;
            let models = (2..=6).map(|n| (n, false)).chain((2..=4).map(|n| (n, true)));
            for (n, directed) in models {
                for p in [0.2, 0.5, 0.8] {
                    let model = ErModel::new(n, p, directed).unwrap();
                    for _ in 0..5 {
                        let cfg = random_config(&mut rng, n, 0.9);
                        let closed = meanfield::expected_influence(&model, &cfg).unwrap();
                        let mut oracle = Matrix::zeros(n, n);
                        for (g, w) in rand_graph::enumerate_weighted(&model).unwrap() {
                            oracle += dynamics::build_influence(&g, &cfg).unwrap().entries() * w;
                        }
                        worst = worst.max((closed - oracle).amax());
                        cases += 1;
                    }
                }
            }
            (worst <= 1e-12, format!("{cases} cases, max |closed form - enumeration| = {worst:.2e}"))
        }),
        10.0,
    )
}

pub fn canonical_scenario() -> Outcome {
    within(
        timed(|| {
            let model = ErModel::undirected(2, 0.5).unwrap();
            let cfg = OpinionConfig::uniform(0.5, vec![0.0, 1.0]).unwrap();
            let e = montecarlo::exact_stable_mean(&model, &cfg).unwrap();
            let mf = meanfield::meanfield_stable(&model, &cfg).unwrap();
            let gap = montecarlo::gap_stable(&Sequential, &model, &cfg, VectorNorm::Inf, &Estimator::Exact).unwrap();
            let err = (e[0] - 1.0 / 6.0)
                .abs()
                .max((e[1] - 5.0 / 6.0).abs())
                .max((mf[0] - 0.25).abs())
                .max((mf[1] - 0.75).abs())
                .max((gap.value - 1.0 / 12.0).abs());
            (
                err <= 1e-12,
                format!(
                    "E(x) = ({:.12}, {:.12}), x_bar = ({:.12}, {:.12}), gap = {:.12}, max error {err:.1e}",
                    e[0], e[1], mf[0], mf[1], gap.value
                ),
            )
        }),
        1.0,
    )
}

pub fn inverse_moment_identity() -> Outcome {
    within(
        timed(|| {
            let mut worst = 0.0f64;
            for n in 0..=25u32 {
                for k in 1..=6u32 {
                    for step in 1..=9 {
                        let p = step as f64 / 10.0;
                        let a = meanfield::neg_binomial_moment(n, p, k).unwrap();
                        let b = meanfield::neg_binomial_moment_bruteforce(n, p, k).unwrap();
                        worst = worst.max(((a - b) / b).abs());
                    }
                }
            }
            (worst <= 1e-8, format!("max relative error {worst:.2e} over n <= 25, k <= 6, p in 0.1..0.9"))
        }),
        1.0,
    )
}

pub fn fixed_point_contract() -> Outcome {
    within(
        timed(|| {
            let mut rng = rng::rng_from_seed(404);
            let mut worst_residual = 0.0f64;
            let mut worst_excess = f64::NEG_INFINITY;
            let mut ok = true;
            for trial in 0..100 {
                let n = rng.random_range(2..=200usize);
                let alpha_bar = if trial % 2 == 0 { 0.5 } else { 0.9 };
                let model = ErModel::new(n, rng.random::<f64>(), rng.random()).unwrap();
                let cfg = random_config(&mut rng, n, alpha_bar);
                let g = rand_graph::sample(&model, rng.random());
                let h = dynamics::build_influence(&g, &cfg).unwrap();
                let star = dynamics::stable_solve(&h, &cfg).unwrap();
                let res = dynamics::residual(&h, &cfg, &star);
                worst_residual = worst_residual.max(res / n as f64);
                ok &= res <= 1e-12 * n as f64;
                let d0 = (Vector::from_column_slice(cfg.x0()) - &star).amax();
                let mut x = Vector::from_column_slice(cfg.x0());
                for t in 1..=60 {
                    x = dynamics::step(&h, &cfg, &x).unwrap();
                    let excess = (&x - &star).amax() - alpha_bar.powi(t) * d0;
                    worst_excess = worst_excess.max(excess);
                    ok &= excess <= 1e-12;
                }
            }
            (
                ok,
                format!(
                    "100 instances, max residual/n {worst_residual:.1e}, \
                     max ||x(t)-x*|| - a^t ||x(0)-x*|| = {worst_excess:.1e}"
                ),
            )
        }),
        30.0,
    )
}

pub fn row_stochasticity() -> Outcome {
    within(
        timed(|| {
            let mut rng = rng::rng_from_seed(505);
            let mut worst = 0.0f64;
            for _ in 0..50 {
                let n = rng.random_range(2..=400usize);
                let model = ErModel::new(n, rng.random::<f64>(), rng.random()).unwrap();
                let alpha_bar = rng.random_range(0.05..0.95);
                let mut cfg = random_config(&mut rng, n, alpha_bar);
                cfg = cfg.with_x0(vec![1.0; n]).unwrap();
                let g = rand_graph::sample(&model, rng.random());
                let h = dynamics::build_influence(&g, &cfg).unwrap();
                let x = dynamics::stable_solve(&h, &cfg).unwrap();
                let mf = montecarlo::meanfield_solution(&model, &cfg).unwrap();
                worst = worst.max(x.iter().chain(mf.iter()).fold(0.0f64, |m, v| m.max((v - 1.0).abs())));
            }
            (worst <= 1e-10, format!("50 models, max |x - 1| over stable and mean-field = {worst:.1e}"))
        }),
        10.0,
    )
}

pub fn bound_grid() -> Outcome {
    within(
        timed(|| {
            let rows = verify::lemma_grid(verify::DEFAULT_N0).unwrap();
            let bad = verify::violations(&rows);
            let sandwich = rows.iter().filter(|r| r.check.starts_with("edge-")).count();
            (bad == 0, format!("{} checks ({sandwich} closed-form sandwich), {bad} violations", rows.len()))
        }),
        120.0,
    )
}

pub fn directed_factorization() -> Outcome {
    within(
        timed(|| {
            let rows = verify::factorization_grid().unwrap();
            let worst = rows.iter().map(|r| r.lhs).fold(0.0f64, f64::max);
            let trails: usize = rows
                .iter()
                .filter_map(|r| r.params.rsplit("trails=").next().and_then(|t| t.parse::<usize>().ok()))
                .sum();
            (
                verify::violations(&rows) == 0 && worst <= 1e-14,
                format!("{} models, {trails} trails, max |E(H_c) - E(H)_c| = {worst:.1e}", rows.len()),
            )
        }),
        120.0,
    )
}

fn ladder_config(model: ModelKind, ladder: &[usize], regime: Regime, norm: NormSpec, target: Target) -> SweepConfig {
    SweepConfig {
        model,
        n_ladder: ladder.to_vec(),
        regime,
        alpha_rule: AlphaRule::Const(SWEEP_ALPHA),
        x0_rule: X0Rule::Uniform,
        norm,
        target,
        estimator: EstimatorSpec {
            exact: false,
            samples: SAMPLES,
            delta: DELTA,
            master_seeds: SEEDS.to_vec(),
            eps: 1e-8,
            rows_per_sample: 1,
        },
        data_seed: 0,
        output: None,
    }
}

const LOG_REGIME: Regime = Regime { c: 3.0, a: 1.0 };

/// Undirected stable-opinion ladder, shared by the undirected trend and the
/// directed/undirected contrast.
fn undirected_stable_rows() -> &'static [SweepRow] {
    static ROWS: OnceLock<Vec<SweepRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let cfg = ladder_config(ModelKind::Und, &LADDER, LOG_REGIME, NormSpec::Inf, Target::Stable);
        sweep::run_sweep(&cfg, &executor()).unwrap()
    })
}

fn medians_text(t: &sweep::TrendSummary) -> String {
    t.medians.iter().map(|(n, m)| format!("{n}:{m:.3e}")).collect::<Vec<_>>().join(" ")
}

pub fn undirected_trend() -> Outcome {
    timed(|| {
        let t = sweep::trend_summary(undirected_stable_rows());
        (
            t.passes(),
            format!(
                "medians {}; strictly decreasing {}, gap(4096)/gap(64) = {:.3} (needs <= 0.5)",
                medians_text(&t),
                t.strictly_decreasing,
                t.endpoint_ratio
            ),
        )
    })
}

pub fn directed_rate_contrast() -> Outcome {
    timed(|| {
        let power = sweep::run_sweep(
            &ladder_config(ModelKind::Dir, &LADDER, LOG_REGIME, NormSpec::Inf, Target::Power(2)),
            &executor(),
        )
        .unwrap();
        let directed_stable = sweep::run_sweep(
            &ladder_config(ModelKind::Dir, &[2048], LOG_REGIME, NormSpec::Inf, Target::Stable),
            &executor(),
        )
        .unwrap();
        let undirected = undirected_stable_rows();
        let mut passing = 0;
        let mut per_seed = Vec::new();
        for &seed in &SEEDS {
            let points: Vec<(f64, f64)> =
                power.iter().filter(|r| r.master_seed == seed).map(|r| (r.n as f64, r.gap)).collect();
            let slope = verify::loglog_slope(&points);
            let dir = directed_stable.iter().find(|r| r.master_seed == seed).unwrap().gap;
            let und = undirected.iter().find(|r| r.master_seed == seed && r.n == 2048).unwrap().gap;
            let slope_ok = slope.is_some_and(|s| (-1.3..=-0.7).contains(&s));
            if slope_ok && dir < und {
                passing += 1;
            }
            per_seed.push(format!(
                "seed {seed}: slope {} dir {dir:.2e} und {und:.2e}",
                slope.map_or("n/a".into(), |s| format!("{s:.2}"))
            ));
        }
        let exact: Vec<(f64, f64)> = LADDER
            .iter()
            .map(|&n| {
                let p = rand_graph::regime_p(rand_graph::RegimeRule::new(3.0, 1.0).unwrap(), n).unwrap();
                (n as f64, verify::directed_square_gap(n, p, SWEEP_ALPHA).unwrap())
            })
            .collect();
        let exact_slope = verify::loglog_slope(&exact).unwrap();
        let ci = power.iter().map(|r| r.ci).fold(0.0f64, f64::max);
        (
            passing >= 3,
            format!(
                "{passing}/5 seeds pass; {}; closed-form k=2 gap slope {exact_slope:.2} \
                 (gap(64) = {:.1e}, Monte Carlo ci up to {ci:.1e})",
                per_seed.join("; "),
                exact[0].1
            ),
        )
    })
}

pub fn directed_rho_trend() -> Outcome {
    timed(|| {
        let ladder = [64, 128, 256, 512, 1024];
        let regime = Regime { c: 3.0, a: 2.0 };
        let mut ok = true;
        let mut parts = Vec::new();
        for rho in [1.5, 2.0, 4.0] {
            let cfg = ladder_config(ModelKind::Dir, &ladder, regime, NormSpec::Rho(rho), Target::Stable);
            let rows = sweep::run_sweep(&cfg, &executor()).unwrap();
            let t = sweep::trend_summary(&rows);
            let ci = rows.iter().map(|r| r.ci).fold(0.0f64, f64::max);
            ok &= t.passes();
            parts.push(format!(
                "rho={rho}: medians {} ratio {:.3} decreasing {} (ci up to {ci:.1e})",
                medians_text(&t),
                t.endpoint_ratio,
                t.strictly_decreasing
            ));
        }
        (ok, parts.join("; "))
    })
}

pub fn series_generality() -> Outcome {
    timed(|| {
        let eps = 1e-10;
        let mut ok = true;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut largest = 0.0f64;
        let mut rng = rng::rng_from_seed(1111);
        for series in [PowerSeriesSpec::Exponential, PowerSeriesSpec::Resolvent] {
            for n in 2..=6 {
                let model = ErModel::undirected(n, 0.5).unwrap();
                let cfg = random_config(&mut rng, n, 0.8);
                let exact = montecarlo::gap_phi(&Sequential, &model, &cfg, &series, eps, &Estimator::Exact).unwrap();
                let mc = McSettings::new(SAMPLES, DELTA, 7 + n as u64).unwrap();
                let est = montecarlo::gap_phi(&Sequential, &model, &cfg, &series, eps, &Estimator::MonteCarlo(mc))
                    .unwrap();
                let excess = (est.value - exact.value).abs() - (est.ci + 2.0 * eps);
                worst_excess = worst_excess.max(excess);
                largest = largest.max(exact.value);
                ok &= exact.value.is_finite() && excess <= 0.0;
            }
        }
        let mut parts = vec![format!(
            "exact n=2..6 finite (max {largest:.3e}), max(|mc - exact| - ci - 2eps) = {worst_excess:.2e}"
        )];
        for target in [Target::Exp, Target::Resolvent] {
            let mut cfg = ladder_config(ModelKind::Und, &[64, 128, 256, 512, 1024], LOG_REGIME, NormSpec::Inf, target);
            cfg.alpha_rule = AlphaRule::Const(0.8);
            cfg.estimator.master_seeds = vec![1, 2, 3];
            let rows = sweep::run_sweep(&cfg, &executor()).unwrap();
            let t = sweep::trend_summary(&rows);
            ok &= t.strictly_decreasing;
            parts.push(format!("{target}: medians {} decreasing {}", medians_text(&t), t.strictly_decreasing));
        }
        (ok, parts.join("; "))
    })
}

pub fn optimization_demo() -> Outcome {
    within(
        timed(|| {
            let model = ErModel::undirected(4, 0.5).unwrap();
            let mut rng = rng::rng_from_seed(1212);
            let (mut coincide, mut value_ok, mut sub_ok, mut single) = (0, 0, 0, 0);
            for _ in 0..20 {
                let cfg = random_config(&mut rng, 4, 0.9);
                let objectives: Vec<AffineObjective> = (0..20)
                    .map(|_| AffineObjective {
                        a: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                        b: rng.random_range(-1.0..1.0),
                    })
                    .collect();
                let mut spec = OptDemoSpec::new(objectives, None).unwrap();
                spec.lipschitz = Some(spec.lipschitz_bound());
                let r = optdemo::opt_demo_affine(&Sequential, &model, &cfg, &spec, &Estimator::Exact).unwrap();
                coincide += usize::from(r.coincide);
                value_ok += usize::from(r.value_certified == Some(true));
                sub_ok += usize::from(r.suboptimality_certified == Some(true));
                single += usize::from(r.suboptimality_within_single == Some(true));
            }
            (
                coincide == 20 && value_ok == 20 && sub_ok == 20,
                format!(
                    "argmins coincide {coincide}/20, |min F - min G| <= L gap {value_ok}/20, \
                     suboptimality <= 2 L gap {sub_ok}/20 (<= L gap: {single}/20)"
                ),
            )
        }),
        60.0,
    )
}
