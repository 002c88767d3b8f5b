//! Parameter sweeps over synthetic instances with median / quartile reporting.
//!
//! Realization `i` of every cell is simulated with seed `base_seed + i`, and
//! every method in the plan runs on the same design, so comparisons are paired.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::baseline::{learn_baseline, BaselineConfig};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, MetricsReport};
use crate::model::{build_lagged_design, is_dag, threshold_support};
use crate::simulate::{simulate_svarm, SvarmSpec};
use crate::solver::{learn, SolverConfig, SolverResult, Termination};

pub const CSV_HEADER: &str = "value,method,metric,median,p25,p75,mean_runtime_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Samples,
    Nodes,
    Lags,
}

impl SweepVariable {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "samples" => Some(Self::Samples),
            "nodes" => Some(Self::Nodes),
            "lags" => Some(Self::Lags),
            _ => None,
        }
    }

    fn apply(&self, spec: &mut SvarmSpec, value: usize) {
        match self {
            Self::Samples => spec.t = value,
            Self::Nodes => spec.n = value,
            Self::Lags => spec.p = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Log-det constrained non-negative estimator.
    Cvx,
    /// DYNOTEARS-style trace-exponential estimator.
    Baseline,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cvx" => Some(Self::Cvx),
            "baseline" => Some(Self::Baseline),
            _ => None,
        }
    }

    /// Label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Cvx => "cvx",
            Self::Baseline => "dynotears-style",
        }
    }

    pub fn run(&self, design: &crate::model::LaggedDesign, cfg: &SolverConfig) -> Result<SolverResult> {
        match self {
            Self::Cvx => learn(design, cfg),
            Self::Baseline => learn_baseline(design, &BaselineConfig::from(cfg)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<usize>,
    pub realizations: usize,
    /// Fixed instance settings; the swept field and the seed are overridden.
    pub spec: SvarmSpec,
    pub solver: SolverConfig,
    pub methods: Vec<Method>,
    /// Report wall-clock runtimes. When off the runtime column is `NaN`, which
    /// makes the CSV byte-reproducible.
    pub record_runtime: bool,
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.sweep_values.is_empty() {
            return bad("sweep values must be non-empty");
        }
        if self.sweep_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep values must be strictly increasing");
        }
        if self.realizations == 0 {
            return bad("need at least one realization");
        }
        if self.methods.is_empty() {
            return bad("need at least one method");
        }
        self.solver.validate()
    }

    fn cell_spec(&self, value: usize, realization: usize) -> SvarmSpec {
        let mut spec = self.spec.clone();
        self.sweep_variable.apply(&mut spec, value);
        spec.seed = self.spec.seed.wrapping_add(realization as u64);
        spec
    }
}

/// Condensed outcome of one `learn` call.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub metrics: MetricsReport,
    pub runtime_s: f64,
    pub h_final: f64,
    /// Thresholded support passes the topological-sort check.
    pub support_is_dag: bool,
    pub termination: Termination,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub value: usize,
    pub method: Method,
    pub realization: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunStats, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub value: usize,
    pub method: Method,
    pub metric: String,
    /// `None` when at least half of the realizations failed.
    pub summary: Option<crate::metrics::Summary>,
    pub mean_runtime_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub runs: Vec<RunRecord>,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.outcome.is_err())
    }

    pub fn row(&self, value: usize, method: Method, metric: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.value == value && r.method == method && r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |x| format!("{x}"));
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.value,
                r.method.label(),
                r.metric,
                fmt(r.summary.map(|s| s.median)),
                fmt(r.summary.map(|s| s.p25)),
                fmt(r.summary.map(|s| s.p75)),
                fmt(r.mean_runtime_s),
            )
            .unwrap();
        }
        out
    }
}

fn evaluate_run(method: Method, spec: &SvarmSpec, cfg: &SolverConfig) -> Result<RunStats> {
    let gt = simulate_svarm(spec)?;
    let design = build_lagged_design(&gt.x, spec.p)?;
    let start = Instant::now();
    let res = method.run(&design, cfg)?;
    let runtime_s = start.elapsed().as_secs_f64();
    let metrics = MetricsReport::compute(
        &res.w_hat,
        &res.a_hat.stacked(),
        gt.w_true.matrix(),
        &gt.a_true.stacked(),
        cfg.tau,
    )?;
    Ok(RunStats {
        metrics,
        runtime_s,
        h_final: res.h_final,
        support_is_dag: is_dag(&threshold_support(&res.w_hat, 0.0)),
        termination: res.termination,
        outer_iterations: res.outer_iterations(),
    })
}

/// Runs every (value, realization, method) job on the rayon pool and
/// aggregates the results into sorted rows.
pub fn run_plan(plan: &BenchmarkPlan) -> Result<BenchmarkOutcome> {
    plan.validate()?;
    let jobs: Vec<(usize, usize, Method)> = plan
        .sweep_values
        .iter()
        .flat_map(|&v| (0..plan.realizations).flat_map(move |i| plan.methods.iter().map(move |&m| (v, i, m))))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(value, realization, method)| {
            let spec = plan.cell_spec(value, realization);
            let outcome = evaluate_run(method, &spec, &plan.solver).map_err(|e| e.to_string());
            RunRecord { value, method, realization, seed: spec.seed, outcome }
        })
        .collect();
    let rows = aggregate_rows(plan, &runs);
    Ok(BenchmarkOutcome { runs, rows })
}

fn aggregate_rows(plan: &BenchmarkPlan, runs: &[RunRecord]) -> Vec<BenchmarkRow> {
    let mut rows = Vec::new();
    for &value in &plan.sweep_values {
        for &method in &plan.methods {
            let cell: Vec<&RunRecord> = runs.iter().filter(|r| r.value == value && r.method == method).collect();
            let ok: Vec<&RunStats> = cell.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let failed = cell.len() - ok.len();
            let valid = 2 * failed < cell.len();
            let mean_runtime = (plan.record_runtime && !ok.is_empty())
                .then(|| ok.iter().map(|s| s.runtime_s).sum::<f64>() / ok.len() as f64);

            let mut names: Vec<&'static str> = Vec::new();
            for s in &ok {
                for (name, _) in s.metrics.named_values() {
                    if !names.contains(&name) {
                        names.push(name);
                    }
                }
            }
            if names.is_empty() {
                // every run failed: still report the cell as invalid
                names.push("nfe_w");
            }
            for name in names {
                let values: Vec<f64> = ok
                    .iter()
                    .filter_map(|s| s.metrics.named_values().into_iter().find(|(k, _)| *k == name).map(|(_, v)| v))
                    .collect();
                let summary = if valid { aggregate(&values).ok() } else { None };
                rows.push(BenchmarkRow {
                    value,
                    method,
                    metric: name.to_string(),
                    summary,
                    mean_runtime_s: if valid { mean_runtime } else { None },
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.metric
            .cmp(&b.metric)
            .then_with(|| a.method.label().cmp(b.method.label()))
            .then_with(|| a.value.cmp(&b.value))
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> BenchmarkPlan {
        BenchmarkPlan {
            sweep_variable: SweepVariable::Samples,
            sweep_values: vec![200],
            realizations: 1,
            spec: SvarmSpec { avg_degree_w: 2.0, ..SvarmSpec::new(5, 1, 200, 3) },
            solver: SolverConfig::default(),
            methods: vec![Method::Cvx, Method::Baseline],
            record_runtime: false,
        }
    }

    #[test]
    fn plan_validation() {
        let mut p = small_plan();
        assert!(p.validate().is_ok());
        p.sweep_values = vec![3, 3];
        assert!(p.validate().is_err());
        p.sweep_values = vec![];
        assert!(p.validate().is_err());
        let mut p = small_plan();
        p.realizations = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn one_row_per_metric_and_method() {
        let out = run_plan(&small_plan()).unwrap();
        assert_eq!(out.rows.len(), 2 * 8);
        let csv = out.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 16);
        assert!(csv.contains("200,dynotears-style,f1_a,"));
        // sorted by metric first
        assert_eq!(out.rows[0].metric, "f1_a");
        assert_eq!(out.rows[0].method, Method::Cvx);
    }

    #[test]
    fn failed_cells_are_invalid() {
        // t = p makes every realization fail
        let mut plan = small_plan();
        plan.sweep_variable = SweepVariable::Lags;
        plan.sweep_values = vec![1, 400];
        plan.methods = vec![Method::Cvx];
        plan.spec.t = 300;
        plan.spec.n = 3;
        plan.spec.avg_degree_w = 1.0;
        let out = run_plan(&plan).unwrap();
        assert_eq!(out.failures().count(), 1);
        let bad = out.row(400, Method::Cvx, "nfe_w").unwrap();
        assert!(bad.summary.is_none());
        assert!(out.to_csv().contains("400,cvx,nfe_w,NaN,NaN,NaN,NaN"));
    }
}
