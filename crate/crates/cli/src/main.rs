use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use svardag::benchmark::{run_plan, BenchmarkPlan, Method, SweepVariable};
use svardag::io::{read_matrix, read_time_series, write_matrix, write_time_series};
use svardag::metrics::MetricsReport;
use svardag::simulate::{simulate_svarm, SvarmSpec};
use svardag::{build_lagged_design, SolverConfig, SolverResult, TimeSeries};

#[derive(Parser)]
#[command(name = "svardag", version, about = "Non-negative DAG learning from SVAR time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random SVAR process and write X, W* and stacked A*.
    Simulate {
        #[command(flatten)]
        settings: SettingArgs,
        /// Time series output, T rows by N columns.
        #[arg(long)]
        out_x: PathBuf,
        #[arg(long)]
        out_w: Option<PathBuf>,
        /// Stacked lag matrices, N*P rows by N columns.
        #[arg(long)]
        out_a: Option<PathBuf>,
    },
    /// Estimate W and A from a time-series CSV.
    Learn {
        #[command(flatten)]
        settings: SettingArgs,
        /// Time series input, T rows by N columns, optional header.
        #[arg(long)]
        input: PathBuf,
        /// cvx or baseline.
        #[arg(long, default_value = "cvx")]
        method: String,
        #[arg(long)]
        out_w: Option<PathBuf>,
        #[arg(long)]
        out_a: Option<PathBuf>,
        /// Run summary (also printed to stdout).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Ground-truth W; prints metrics when given.
        #[arg(long)]
        true_w: Option<PathBuf>,
        /// Ground-truth stacked A.
        #[arg(long, requires = "true_w")]
        true_a: Option<PathBuf>,
    },
    /// Sweep one instance parameter over synthetic realizations.
    Benchmark {
        #[command(flatten)]
        settings: SettingArgs,
        /// samples, nodes or lags.
        #[arg(long)]
        sweep: String,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        realizations: usize,
        /// Comma-separated subset of cvx, baseline.
        #[arg(long, value_delimiter = ',', default_value = "cvx,baseline")]
        methods: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Write NaN in the runtime column so reruns are byte-identical.
        #[arg(long)]
        no_runtime: bool,
    },
}

/// Flags shared by every subcommand. Each one overrides the same key from
/// `--config`, which in turn overrides the built-in defaults.
#[derive(Args, Default)]
struct SettingArgs {
    /// Flat key=value file, keys as the flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    avg_degree_w: Option<f64>,
    #[arg(long)]
    avg_degree_a: Option<f64>,
    #[arg(long)]
    weight_low: Option<f64>,
    #[arg(long)]
    weight_high: Option<f64>,
    #[arg(long)]
    decay_rate: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    lambda_w: Option<f64>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    h_tol: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Allow negative lag coefficients (l1 on |A|).
    #[arg(long)]
    signed_a: bool,
    /// Plain projected gradient instead of the accelerated variant.
    #[arg(long)]
    no_accelerate: bool,
}

impl SettingArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let mut out = Vec::new();
        push(&mut out, "nodes", &self.nodes);
        push(&mut out, "lags", &self.lags);
        push(&mut out, "samples", &self.samples);
        push(&mut out, "seed", &self.seed);
        push(&mut out, "avg_degree_w", &self.avg_degree_w);
        push(&mut out, "avg_degree_a", &self.avg_degree_a);
        push(&mut out, "weight_low", &self.weight_low);
        push(&mut out, "weight_high", &self.weight_high);
        push(&mut out, "decay_rate", &self.decay_rate);
        push(&mut out, "noise_sigma", &self.noise_sigma);
        push(&mut out, "burn_in", &self.burn_in);
        push(&mut out, "s", &self.s);
        push(&mut out, "lambda_w", &self.lambda_w);
        push(&mut out, "lambda_a", &self.lambda_a);
        push(&mut out, "alpha0", &self.alpha0);
        push(&mut out, "c0", &self.c0);
        push(&mut out, "beta", &self.beta);
        push(&mut out, "gamma", &self.gamma);
        push(&mut out, "max_outer", &self.max_outer);
        push(&mut out, "h_tol", &self.h_tol);
        push(&mut out, "inner_tol", &self.inner_tol);
        push(&mut out, "max_inner", &self.max_inner);
        push(&mut out, "tau", &self.tau);
        if self.signed_a {
            out.push(("signed_a", "true".into()));
        }
        if self.no_accelerate {
            out.push(("accelerate", "false".into()));
        }
        out
    }

    fn resolve(&self) -> Result<Settings> {
        let mut settings = Settings::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("{}: cannot read config", path.display()))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), idx + 1))?;
                settings
                    .set(&key.trim().replace('-', "_"), value.trim())
                    .map_err(|e| anyhow!("{}:{}: {e}", path.display(), idx + 1))?;
            }
        }
        for (key, value) in self.overrides() {
            settings.set(key, &value).map_err(|e| anyhow!("--{}: {e}", key.replace('_', "-")))?;
        }
        Ok(settings)
    }
}

struct Settings {
    spec: SvarmSpec,
    solver: SolverConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self { spec: SvarmSpec::new(20, 2, 4000, 0), solver: SolverConfig::default() }
    }
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(value: &str) -> Result<T> {
            value.parse().map_err(|_| anyhow!("invalid value {value:?}"))
        }
        let (spec, cfg) = (&mut self.spec, &mut self.solver);
        match key {
            "nodes" => spec.n = parse(value)?,
            "lags" => spec.p = parse(value)?,
            "samples" => spec.t = parse(value)?,
            "seed" => {
                spec.seed = parse(value)?;
                cfg.seed = spec.seed;
            }
            "avg_degree_w" => spec.avg_degree_w = parse(value)?,
            "avg_degree_a" => spec.avg_degree_a = parse(value)?,
            "weight_low" => spec.weight_low = parse(value)?,
            "weight_high" => spec.weight_high = parse(value)?,
            "decay_rate" => spec.decay_rate = parse(value)?,
            "noise_sigma" => spec.noise_sigma = parse(value)?,
            "burn_in" => spec.burn_in = parse(value)?,
            "s" => cfg.s = parse(value)?,
            "lambda_w" => cfg.lambda_w = parse(value)?,
            "lambda_a" => cfg.lambda_a = parse(value)?,
            "alpha0" => cfg.alpha0 = parse(value)?,
            "c0" => cfg.c0 = parse(value)?,
            "beta" => cfg.beta = parse(value)?,
            "gamma" => cfg.gamma = parse(value)?,
            "max_outer" => cfg.max_outer = parse(value)?,
            "h_tol" => cfg.h_tol = parse(value)?,
            "inner_tol" => cfg.inner_tol = parse(value)?,
            "max_inner" => cfg.max_inner = parse(value)?,
            "tau" => cfg.tau = parse(value)?,
            "signed_a" => cfg.signed_a = parse(value)?,
            "accelerate" => cfg.accelerate = parse(value)?,
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }
}

fn parse_method(s: &str) -> Result<Method> {
    Method::parse(s).ok_or_else(|| anyhow!("unknown method {s:?} (expected cvx or baseline)"))
}

fn simulate(settings: &Settings, out_x: &Path, out_w: Option<&Path>, out_a: Option<&Path>) -> Result<()> {
    let gt = simulate_svarm(&settings.spec)?;
    write_time_series(out_x, gt.x.matrix())?;
    if let Some(path) = out_w {
        write_matrix(path, gt.w_true.matrix())?;
    }
    if let Some(path) = out_a {
        write_matrix(path, &gt.a_true.stacked())?;
    }
    println!("companion_radius={}", gt.companion_radius);
    Ok(())
}

fn summary_text(method: Method, res: &SolverResult) -> String {
    let mut out = String::new();
    writeln!(out, "method={}", method.label()).unwrap();
    writeln!(out, "h_final={}", res.h_final).unwrap();
    writeln!(out, "outer_iterations={}", res.outer_iterations()).unwrap();
    writeln!(out, "termination={}", res.termination.as_str()).unwrap();
    writeln!(out, "removed_edges={}", res.removed_edges.len()).unwrap();
    writeln!(out, "edges={}", res.w_hat.iter().filter(|&&v| v != 0.0).count()).unwrap();
    out.push_str("outer,score,h,lagrangian,alpha,c,inner_iterations\n");
    for (k, r) in res.objective_trace.iter().enumerate() {
        writeln!(out, "{k},{},{},{},{},{},{}", r.score, r.h, r.lagrangian, r.alpha, r.c, r.inner_iterations).unwrap();
    }
    out
}

struct LearnPaths<'a> {
    input: &'a Path,
    out_w: Option<&'a Path>,
    out_a: Option<&'a Path>,
    summary: Option<&'a Path>,
    true_w: Option<&'a Path>,
    true_a: Option<&'a Path>,
}

fn learn(settings: &Settings, method: Method, paths: LearnPaths) -> Result<()> {
    let x = TimeSeries::new(read_time_series(paths.input)?)
        .with_context(|| format!("{}: invalid time series", paths.input.display()))?;
    let (n, p) = (x.n(), settings.spec.p);
    let design = build_lagged_design(&x, p).with_context(|| format!("{}", paths.input.display()))?;
    let res = method.run(&design, &settings.solver)?;

    if let Some(path) = paths.out_w {
        write_matrix(path, &res.w_hat)?;
    }
    if let Some(path) = paths.out_a {
        write_matrix(path, &res.a_hat.stacked())?;
    }
    let summary = summary_text(method, &res);
    if let Some(path) = paths.summary {
        fs::write(path, &summary).with_context(|| format!("{}: cannot write summary", path.display()))?;
    }
    print!("{summary}");

    if let Some(w_path) = paths.true_w {
        let w_true = read_matrix(w_path, n)?;
        let a_true = match paths.true_a {
            Some(a_path) => read_matrix(a_path, n)?,
            None => nalgebra::DMatrix::zeros(n * p, n),
        };
        let report = MetricsReport::compute(&res.w_hat, &res.a_hat.stacked(), &w_true, &a_true, settings.solver.tau)
            .with_context(|| format!("{}: ground truth does not match the estimate", w_path.display()))?;
        for (name, value) in report.named_values() {
            println!("{name}={value}");
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn benchmark(
    settings: Settings,
    sweep: &str,
    values: Vec<usize>,
    realizations: usize,
    methods: &[String],
    out: &Path,
    no_runtime: bool,
) -> Result<()> {
    let sweep_variable =
        SweepVariable::parse(sweep).ok_or_else(|| anyhow!("unknown sweep {sweep:?} (expected samples, nodes or lags)"))?;
    let methods = methods.iter().map(|m| parse_method(m)).collect::<Result<Vec<_>>>()?;
    let plan = BenchmarkPlan {
        sweep_variable,
        sweep_values: values,
        realizations,
        spec: settings.spec,
        solver: settings.solver,
        methods,
        record_runtime: !no_runtime,
    };
    let outcome = run_plan(&plan)?;
    for f in outcome.failures() {
        if let Err(e) = &f.outcome {
            eprintln!("skipped {} value={} seed={}: {e}", f.method.label(), f.value, f.seed);
        }
    }
    fs::write(out, outcome.to_csv()).with_context(|| format!("{}: cannot write benchmark", out.display()))?;
    println!("wrote {} rows to {}", outcome.rows.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { settings, out_x, out_w, out_a } => {
            simulate(&settings.resolve()?, &out_x, out_w.as_deref(), out_a.as_deref())
        }
        Command::Learn { settings, input, method, out_w, out_a, summary, true_w, true_a } => learn(
            &settings.resolve()?,
            parse_method(&method)?,
            LearnPaths {
                input: &input,
                out_w: out_w.as_deref(),
                out_a: out_a.as_deref(),
                summary: summary.as_deref(),
                true_w: true_w.as_deref(),
                true_a: true_a.as_deref(),
            },
        ),
        Command::Benchmark { settings, sweep, values, realizations, methods, out, no_runtime } => {
            benchmark(settings.resolve()?, &sweep, values, realizations, &methods, &out, no_runtime)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
