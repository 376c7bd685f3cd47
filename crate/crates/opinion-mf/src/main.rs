use std::fs::File;
use std::io::{self as stdio, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use opinion_mf::core::dynamics::{self, OpinionConfig};
use opinion_mf::core::meanfield::{self, ExpectedInfluence};
use opinion_mf::core::montecarlo::{self, Estimator, Executor, McSettings};
use opinion_mf::core::optdemo::{self, AffineObjective, OptDemoSpec};
use opinion_mf::core::rand_graph::{self, ErModel, RegimeRule};
use opinion_mf::core::{rng, verify};
use opinion_mf::io::{self, RunMetadata};
use opinion_mf::rules::{self, AlphaRule, ModelKind, NormSpec, Target, X0Rule};
use opinion_mf::sweep::{self, SweepConfig};
use opinion_mf::{Error, RayonExecutor, Result};
use rand::Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "opinion-mf", version, about = "Opinion dynamics on Erdős–Rényi graphs and their mean-field surrogate")]
struct Cli {
    /// Seed for graph sampling, Monte Carlo and random instance data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one graph and print it in the adjacency text format.
    Sample(ModelArgs),
    /// List every graph of a small model with its probability.
    Enumerate(ModelArgs),
    /// Stable opinion of a graph read from a file.
    Stable(StableArgs),
    /// Mean-field stable opinion.
    Meanfield(InstanceArgs),
    /// Gap between the expected stable opinion (or matrix function) and its mean-field value.
    Gap(GapArgs),
    /// Gap over a ladder of graph sizes described by a TOML config.
    Sweep(SweepArgs),
    /// Check the moment bounds on the built-in grid.
    Verify(VerifyArgs),
    /// Finite-parameter optimization demo with affine objectives.
    Optdemo(OptDemoArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "und")]
    model: ModelKind,
    #[arg(long)]
    n: usize,
    /// Edge probability.
    #[arg(long, conflicts_with = "regime", required_unless_present = "regime")]
    p: Option<f64>,
    /// `c,a` for p = min(1, c ln(n)^a / n).
    #[arg(long, value_parser = parse_regime)]
    regime: Option<RegimeRule>,
}

impl ModelArgs {
    fn model(&self) -> Result<ErModel> {
        let p = match (self.p, self.regime) {
            (Some(p), _) => p,
            (None, Some(rule)) => rule.p(self.n)?,
            (None, None) => return Err(Error::Invalid("either --p or --regime is required".into())),
        };
        self.model.model(self.n, p)
    }
}

fn parse_regime(s: &str) -> std::result::Result<RegimeRule, String> {
    let (c, a) = s.split_once(',').ok_or("expected c,a")?;
    let c: f64 = c.trim().parse().map_err(|_| "c is not a number")?;
    let a: f64 = a.trim().parse().map_err(|_| "a is not a number")?;
    RegimeRule::new(c, a).map_err(|e| e.to_string())
}

#[derive(Args)]
struct DataArgs {
    /// `const:a`, `uniform:a`, or `random` (uniform on [0, alpha-bar]).
    #[arg(long, default_value = "const:0.5")]
    alpha: String,
    #[arg(long)]
    alpha_bar: Option<f64>,
    /// `uniform`/`random`, `ones`, `const:v` or `file:path`.
    #[arg(long, default_value = "uniform")]
    x0: X0Rule,
}

impl DataArgs {
    fn alpha_rule(&self) -> Result<AlphaRule> {
        let rule = match self.alpha.trim() {
            "random" => {
                let bar = self.alpha_bar.ok_or_else(|| Error::Invalid("--alpha random needs --alpha-bar".into()))?;
                format!("uniform:{bar}").parse()?
            }
            s => s.parse()?,
        };
        match (rule, self.alpha_bar) {
            (AlphaRule::Const(a), Some(bar)) if a > bar => {
                Err(Error::Invalid(format!("alpha {a} exceeds --alpha-bar {bar}")))
            }
            _ => Ok(rule),
        }
    }

    fn config(&self, n: usize, seed: u64) -> Result<OpinionConfig> {
        rules::draw_config(n, self.alpha_rule()?, &self.x0, rng::mix(seed, n as u64))
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// Exact enumeration instead of Monte Carlo.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
}

impl EstimatorArgs {
    fn estimator(&self, seed: u64) -> Result<Estimator> {
        Ok(if self.exact {
            Estimator::Exact
        } else {
            Estimator::MonteCarlo(McSettings::new(self.samples, self.delta, seed)?)
        })
    }

    fn describe(&self) -> Value {
        if self.exact {
            json!({ "kind": "exact" })
        } else {
            json!({ "kind": "monte-carlo", "samples": self.samples, "delta": self.delta })
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct StableArgs {
    /// Graph in the adjacency text format.
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Also report x(t) after this many steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct GapArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// `inf` or `rho:r` (also `rho=r`).
    #[arg(long, default_value = "inf")]
    norm: NormSpec,
    /// `stable`, `power:k`, `phi:exp` or `phi:resolvent`.
    #[arg(long, default_value = "stable")]
    target: Target,
    /// Series truncation tolerance for matrix-function targets.
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Exit with status 2 unless the median gap decreases strictly and at
    /// least halves between the ladder endpoints.
    #[arg(long)]
    assert: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Smallest n at which the asymptotic inequalities are enforced.
    #[arg(long, default_value_t = verify::DEFAULT_N0)]
    n0: usize,
}

#[derive(Args)]
struct OptDemoArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Number of random affine objectives (the size of the parameter set).
    #[arg(long, default_value_t = 20)]
    thetas: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Lipschitz constant for the certificate; defaults to the largest l1 norm
    /// of the slopes.
    #[arg(long)]
    lipschitz: Option<f64>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

/// A command result: a JSON document and, when it has one, a flat table.
struct Report {
    json: Value,
    table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    default: Format,
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdio::stdout().lock()),
    })
}

fn emit(report: Report, format: Option<Format>, out: &Option<PathBuf>, threads: usize) -> Result<()> {
    let mut w = open_out(out)?;
    match format.unwrap_or(report.default) {
        Format::Json => {
            let mut doc = report.json;
            if let Value::Object(map) = &mut doc {
                map.insert("metadata".into(), serde_json::to_value(RunMetadata::new(threads))?);
            }
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let (header, rows) =
                report.table.ok_or_else(|| Error::Invalid("this command has no CSV output, use --format json".into()))?;
            let mut csv = csv::Writer::from_writer(&mut w);
            csv.write_record(&header)?;
            for row in rows {
                csv.write_record(&row)?;
            }
            csv.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

fn vector_table(name: &'static str, v: &[f64]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    (vec!["node", name], v.iter().enumerate().map(|(i, x)| vec![i.to_string(), x.to_string()]).collect())
}

fn model_json(m: &ErModel) -> Value {
    json!({ "model": if m.is_directed() { "dir" } else { "und" }, "n": m.n(), "p": m.p() })
}

fn enumerate(args: &ModelArgs) -> Result<Report> {
    let model = args.model()?;
    let mut rows = Vec::new();
    let mut graphs = Vec::new();
    for (index, (g, prob)) in rand_graph::enumerate_weighted(&model)?.enumerate() {
        let mut edges = Vec::new();
        for i in 0..g.n() {
            for &j in g.neighbors(i) {
                if g.is_directed() || i < j as usize {
                    edges.push((i, j as usize));
                }
            }
        }
        let text: Vec<String> = edges.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        rows.push(vec![index.to_string(), text.join(";"), prob.to_string()]);
        graphs.push(json!({ "index": index, "edges": edges, "probability": prob }));
    }
    Ok(Report {
        json: json!({ "model": model_json(&model), "graphs": graphs }),
        table: Some((vec!["index", "edges", "probability"], rows)),
        default: Format::Json,
    })
}

fn stable(args: &StableArgs, seed: u64) -> Result<Report> {
    let file = File::open(&args.graph).map_err(|e| Error::Invalid(format!("{}: {e}", args.graph.display())))?;
    let g = io::read_graph(BufReader::new(file))?;
    let cfg = args.data.config(g.n(), seed)?;
    let h = dynamics::build_influence(&g, &cfg)?;
    let x = dynamics::stable_solve(&h, &cfg)?;
    let residual = dynamics::residual(&h, &cfg, &x);
    let mut json = json!({
        "n": g.n(),
        "directed": g.is_directed(),
        "alpha": cfg.alpha(),
        "x0": cfg.x0(),
        "stable": x.as_slice(),
        "residual": residual,
    });
    if let Some(t) = args.steps {
        json["steps"] = t.into();
        json["iterate"] = dynamics::iterate(&h, &cfg, t)?.as_slice().into();
    }
    Ok(Report { json, table: Some(vector_table("stable", x.as_slice())), default: Format::Json })
}

fn meanfield_cmd(args: &InstanceArgs, seed: u64) -> Result<Report> {
    let model = args.model.model()?;
    let cfg = args.data.config(model.n(), seed)?;
    let x = meanfield::meanfield_stable(&model, &cfg)?;
    let e = ExpectedInfluence::new(&model, &cfg)?;
    Ok(Report {
        json: json!({
            "model": model_json(&model),
            "alpha": cfg.alpha(),
            "x0": cfg.x0(),
            "isolation_probability": e.diagonal(),
            "off_diagonal_per_alpha": e.off_diagonal(),
            "meanfield": x.as_slice(),
        }),
        table: Some(vector_table("meanfield", x.as_slice())),
        default: Format::Json,
    })
}

fn gap_cmd<E: Executor>(exec: &E, args: &GapArgs, seed: u64) -> Result<Report> {
    let model = args.instance.model.model()?;
    let cfg = args.instance.data.config(model.n(), seed)?;
    if args.norm != NormSpec::Inf {
        if !model.is_directed() {
            return Err(Error::Invalid(
                "rho norms are only supported on directed models: whether the stable-opinion gap vanishes \
                 in rho norms on undirected graphs is an open question"
                    .into(),
            ));
        }
        if args.target != Target::Stable {
            return Err(Error::Invalid("rho norms apply to the stable target only".into()));
        }
    }
    let estimator = args.estimator.estimator(seed)?;
    let gap = match args.target {
        Target::Stable => montecarlo::gap_stable(exec, &model, &cfg, args.norm.vector_norm()?, &estimator)?,
        Target::Power(k) => montecarlo::gap_power(exec, &model, &cfg, k, &estimator)?,
        t => {
            let series = t.series().expect("matrix target");
            montecarlo::gap_phi(exec, &model, &cfg, &series, args.eps, &estimator)?
        }
    };
    let json = json!({
        "model": model_json(&model),
        "alpha": args.instance.data.alpha_rule()?.to_string(),
        "x0": args.instance.data.x0.to_string(),
        "norm": args.norm.to_string(),
        "target": args.target.to_string(),
        "estimator": args.estimator.describe(),
        "seed": seed,
        "gap": gap.value,
        "ci": gap.ci,
        "wall_ms": gap.wall_ms,
    });
    let row = vec![
        model_json(&model)["model"].as_str().unwrap_or_default().to_string(),
        model.n().to_string(),
        model.p().to_string(),
        args.norm.to_string(),
        args.target.to_string(),
        if args.estimator.exact { "0".into() } else { args.estimator.samples.to_string() },
        seed.to_string(),
        gap.value.to_string(),
        gap.ci.to_string(),
        gap.wall_ms.to_string(),
    ];
    Ok(Report {
        json,
        table: Some((vec!["model", "n", "p", "norm", "target", "samples", "master_seed", "gap", "ci", "wall_ms"], vec![row])),
        default: Format::Json,
    })
}

fn verify_cmd(args: &VerifyArgs) -> Result<(Report, usize)> {
    let rows = verify::lemma_grid(args.n0)?;
    let bad = verify::violations(&rows);
    let table = rows
        .iter()
        .map(|r| {
            vec![
                r.check.to_string(),
                r.params.clone(),
                r.lhs.to_string(),
                r.bound.to_string(),
                r.margin.to_string(),
                r.status.as_str().to_string(),
            ]
        })
        .collect();
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "lemma": r.check, "params": r.params, "lhs": r.lhs,
                "bound": r.bound, "margin": r.margin, "status": r.status.as_str(),
            })
        })
        .collect();
    Ok((
        Report {
            json: json!({ "n0": args.n0, "violations": bad, "rows": json_rows }),
            table: Some((vec!["lemma", "params", "lhs", "bound", "margin", "status"], table)),
            default: Format::Csv,
        },
        bad,
    ))
}

fn random_objectives(n: usize, count: usize, seed: u64) -> Vec<AffineObjective> {
    let mut rng = rng::rng_from_seed(seed);
    (0..count)
        .map(|_| AffineObjective {
            a: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            b: rng.random_range(-1.0..1.0),
        })
        .collect()
}

fn optdemo_cmd<E: Executor>(exec: &E, args: &OptDemoArgs, seed: u64) -> Result<Report> {
    let model = args.instance.model.model()?;
    let cfg = args.instance.data.config(model.n(), seed)?;
    let estimator = args.estimator.estimator(seed)?;
    let mut trials = Vec::new();
    let mut table = Vec::new();
    for t in 0..args.trials {
        let objectives = random_objectives(model.n(), args.thetas, rng::mix(seed ^ 0x6f70_7464_656d_6f00, t as u64));
        let mut spec = OptDemoSpec::new(objectives, args.lipschitz)?;
        spec.lipschitz.get_or_insert(spec.lipschitz_bound());
        let r = optdemo::opt_demo_affine(exec, &model, &cfg, &spec, &estimator)?;
        table.push(vec![
            t.to_string(),
            r.theta_expected.to_string(),
            r.theta_mean_value.to_string(),
            r.theta_meanfield.to_string(),
            r.coincide.to_string(),
            r.suboptimality.to_string(),
            r.value_difference.to_string(),
            r.gap.to_string(),
            r.lipschitz.unwrap_or_default().to_string(),
            r.value_certified.map_or(String::new(), |b| b.to_string()),
            r.suboptimality_certified.map_or(String::new(), |b| b.to_string()),
        ]);
        trials.push(json!({
            "trial": t,
            "theta_expected": r.theta_expected,
            "theta_mean_value": r.theta_mean_value,
            "theta_meanfield": r.theta_meanfield,
            "coincide": r.coincide,
            "suboptimality": r.suboptimality,
            "value_difference": r.value_difference,
            "gap": r.gap,
            "lipschitz": r.lipschitz,
            "value_certified": r.value_certified,
            "suboptimality_certified": r.suboptimality_certified,
            "suboptimality_within_single": r.suboptimality_within_single,
        }));
    }
    Ok(Report {
        json: json!({
            "model": model_json(&model),
            "estimator": args.estimator.describe(),
            "thetas": args.thetas,
            "trials": trials,
        }),
        table: Some((
            vec![
                "trial",
                "theta_expected",
                "theta_mean_value",
                "theta_meanfield",
                "coincide",
                "suboptimality",
                "value_difference",
                "gap",
                "lipschitz",
                "value_certified",
                "suboptimality_certified",
            ],
            table,
        )),
        default: Format::Json,
    })
}

fn sweep_cmd<E: Executor>(exec: &E, cli: &Cli, args: &SweepArgs, threads: usize) -> Result<ExitCode> {
    let cfg = SweepConfig::load(&args.config)?;
    let rows = sweep::run_sweep(&cfg, exec)?;
    match (cli.out.as_deref().or(cfg.output.as_deref()), cli.format) {
        (_, Some(Format::Json)) => {
            let mut w = open_out(&cli.out)?;
            let doc = json!({ "metadata": RunMetadata::new(threads), "config": cfg, "rows": rows });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
        (Some(path), _) => sweep::write_outputs(&cfg, &rows, path, threads)?,
        (None, _) => io::write_csv(&rows, stdio::stdout().lock())?,
    }
    if args.assert {
        let summary = sweep::trend_summary(&rows);
        for (n, m) in &summary.medians {
            eprintln!("n={n} median gap={m:.6e}");
        }
        eprintln!(
            "strictly decreasing: {}, endpoint ratio: {:.4}",
            summary.strictly_decreasing, summary.endpoint_ratio
        );
        if !summary.passes() {
            eprintln!("trend assertion failed");
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let exec = RayonExecutor::from_env()?;
    let threads = exec.threads();
    let report = match &cli.command {
        Command::Sample(args) => {
            let g = rand_graph::sample(&args.model()?, cli.seed);
            let mut w = open_out(&cli.out)?;
            match cli.format {
                Some(Format::Json) => {
                    let doc = json!({
                        "n": g.n(),
                        "directed": g.is_directed(),
                        "adjacency": (0..g.n()).map(|i| g.neighbors(i).to_vec()).collect::<Vec<_>>(),
                        "seed": cli.seed,
                        "metadata": RunMetadata::new(threads),
                    });
                    serde_json::to_writer_pretty(&mut w, &doc)?;
                    writeln!(w)?;
                }
                Some(Format::Csv) => return Err(Error::Invalid("sample writes the adjacency text format or json".into())),
                None => io::write_graph(&g, &mut w)?,
            }
            w.flush()?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Enumerate(args) => enumerate(args)?,
        Command::Stable(args) => stable(args, cli.seed)?,
        Command::Meanfield(args) => meanfield_cmd(args, cli.seed)?,
        Command::Gap(args) => gap_cmd(&exec, args, cli.seed)?,
        Command::Sweep(args) => return sweep_cmd(&exec, cli, args, threads),
        Command::Verify(args) => {
            let (report, bad) = verify_cmd(args)?;
            emit(report, cli.format, &cli.out, threads)?;
            if bad > 0 {
                eprintln!("{bad} bound violation(s)");
                return Ok(ExitCode::from(2));
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Optdemo(args) => optdemo_cmd(&exec, args, cli.seed)?,
    };
    emit(report, cli.format, &cli.out, threads)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
