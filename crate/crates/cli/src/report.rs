//! Output schemas of the `solve` command and the shared method dispatch.
//!
//! The summary and run records carry a schema name and version; tests pin
//! their keys, so add fields rather than renaming them.

use std::path::Path;

use hpr_wbp::datagen::SyntheticConfig;
use hpr_wbp::ibp::{solve_ibp, IbpOptions};
use hpr_wbp::io::{write_history_csv, write_json, write_weighted_points_csv};
use hpr_wbp::problem::relative_obj_gap;
use hpr_wbp::solvers::{solve, Metrics};
use hpr_wbp::{Method, SolveReport, SolverOptions, WbpInstance};
use serde::Serialize;

pub const SUMMARY_SCHEMA: &str = "hpr-wbp-summary";
pub const SUMMARY_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct GeneratorRecord<'a> {
    pub generator: &'static str,
    pub version: &'static str,
    pub config: &'a SyntheticConfig,
}

impl<'a> GeneratorRecord<'a> {
    pub fn new(config: &'a SyntheticConfig) -> Self {
        Self {
            generator: "synthetic",
            version: env!("CARGO_PKG_VERSION"),
            config,
        }
    }
}

/// What was run, written before the solve starts.
#[derive(Serialize)]
pub struct RunManifest {
    pub instance: String,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_options: Option<SolverOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ibp_options: Option<IbpOptions>,
    pub out: String,
    pub threads: usize,
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub schema: &'static str,
    pub schema_version: u32,
    pub instance: &'a str,
    pub method: Method,
    pub num_samples: usize,
    pub m: usize,
    pub termination: &'static str,
    pub iterations: usize,
    pub elapsed_secs: f64,
    pub restarts: usize,
    pub switch_iteration: Option<usize>,
    pub primal_obj: f64,
    /// Absent for IBP, which has no LP dual.
    pub dual_obj: Option<f64>,
    /// `|primal - dual| / (1 + |dual|)`; absent for IBP.
    pub primal_dual_gap: Option<f64>,
    pub metrics: Metrics,
    pub threads: usize,
}

impl<'a> Summary<'a> {
    pub fn new(instance_path: &'a str, inst: &WbpInstance, rep: &SolveReport, threads: usize) -> Self {
        let dual = rep.dual_obj.is_finite().then_some(rep.dual_obj);
        Self {
            schema: SUMMARY_SCHEMA,
            schema_version: SUMMARY_VERSION,
            instance: instance_path,
            method: rep.method,
            num_samples: inst.num_samples(),
            m: inst.m(),
            termination: rep.termination.as_str(),
            iterations: rep.iterations,
            elapsed_secs: rep.elapsed_secs,
            restarts: rep.restarts,
            switch_iteration: rep.switch_iteration,
            primal_obj: rep.primal_obj,
            dual_obj: dual,
            primal_dual_gap: dual.map(|d| relative_obj_gap(rep.primal_obj, d)),
            metrics: rep.final_metrics,
            threads,
        }
    }
}

pub fn metric_kind(m: &Metrics) -> &'static str {
    match m {
        Metrics::Kkt(_) => "kkt",
        Metrics::Marginal { .. } => "marginal_err",
    }
}

pub fn run_method(
    inst: &WbpInstance,
    method: Method,
    lp: &SolverOptions,
    ibp: &IbpOptions,
) -> hpr_wbp::Result<SolveReport> {
    match method {
        Method::Ibp => solve_ibp(inst, ibp),
        _ => solve(inst, method, lp),
    }
}

/// Writes `history.csv`, `barycenter.csv` and `summary.json` into `out`.
pub fn write_solve_outputs(out: &Path, inst: &WbpInstance, rep: &SolveReport, run: &RunManifest) -> hpr_wbp::Result<()> {
    write_history_csv(&out.join("history.csv"), &rep.history)?;
    write_weighted_points_csv(&out.join("barycenter.csv"), inst.barycenter_supports(), rep.barycenter(inst))?;
    write_json(&out.join("summary.json"), &Summary::new(&run.instance, inst, rep, run.threads))
}
