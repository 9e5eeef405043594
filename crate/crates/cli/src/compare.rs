//! `compare`: every requested method on every instance, one row each.

use std::fs;
use std::path::Path;

use anyhow::Context;
use hpr_wbp::problem::relative_obj_gap;
use hpr_wbp::solvers::Metrics;
use hpr_wbp::{Method, SolveReport};
use serde::Deserialize;

use crate::report::{metric_kind, run_method};
use crate::{load_instance, CompareArgs, Failure};

pub const COMPARE_HEADER: [&str; 12] = [
    "instance",
    "method",
    "status",
    "termination",
    "iterations",
    "elapsed_secs",
    "metric_kind",
    "metric",
    "primal_obj",
    "reference_obj",
    "rel_obj_gap",
    "error",
];

/// Objective values supplied by an exact solver.
#[derive(Deserialize)]
struct OracleFile {
    objective: Option<f64>,
    #[serde(default)]
    objectives: std::collections::BTreeMap<String, f64>,
}

enum Reference {
    BestKkt,
    Oracle(OracleFile),
}

impl Reference {
    fn parse(arg: &str) -> Result<Self, Failure> {
        if arg == "best" {
            return Ok(Reference::BestKkt);
        }
        let text = fs::read_to_string(arg).with_context(|| format!("reading oracle file {arg}"))?;
        let oracle: OracleFile =
            serde_json::from_str(&text).with_context(|| format!("parsing oracle file {arg}"))?;
        if oracle.objective.is_none() && oracle.objectives.is_empty() {
            return Err(Failure::usage(format!("oracle file {arg} has neither `objective` nor `objectives`")));
        }
        Ok(Reference::Oracle(oracle))
    }

    fn objective(&self, instance: &str, runs: &[(Method, hpr_wbp::Result<SolveReport>)]) -> Option<f64> {
        match self {
            Reference::Oracle(o) => o.objectives.get(instance).copied().or(o.objective),
            Reference::BestKkt => runs
                .iter()
                .filter_map(|(_, r)| r.as_ref().ok())
                .filter_map(|r| match r.final_metrics {
                    Metrics::Kkt(k) if k.max_relative.is_finite() => Some((k.max_relative, r.primal_obj)),
                    _ => None,
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, obj)| obj),
        }
    }
}

pub struct Row {
    pub instance: String,
    pub method: Method,
    pub status: &'static str,
    pub termination: String,
    pub iterations: Option<usize>,
    pub elapsed_secs: Option<f64>,
    pub metric_kind: &'static str,
    pub metric: Option<f64>,
    pub primal_obj: Option<f64>,
    pub reference_obj: Option<f64>,
    pub rel_obj_gap: Option<f64>,
    pub error: String,
}

impl Row {
    fn fields(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        vec![
            self.instance.clone(),
            self.method.to_string(),
            self.status.to_string(),
            self.termination.clone(),
            self.iterations.map_or(String::new(), |k| k.to_string()),
            num(self.elapsed_secs),
            self.metric_kind.to_string(),
            num(self.metric),
            num(self.primal_obj),
            num(self.reference_obj),
            num(self.rel_obj_gap),
            self.error.clone(),
        ]
    }
}

pub fn run(args: &CompareArgs, _threads: usize) -> Result<(), Failure> {
    let mut methods = args.methods.clone();
    methods.dedup();
    if methods.len() < 2 {
        return Err(Failure::usage("compare needs at least two distinct methods"));
    }
    args.flags.validate_for(&methods)?;
    let reference = Reference::parse(&args.reference)?;
    let lp = args.flags.lp_options();
    let ibp = args.flags.ibp_options();

    let mut rows = Vec::new();
    for path in &args.instance {
        let name = path.display().to_string();
        let inst = load_instance(path)?;
        let runs: Vec<(Method, hpr_wbp::Result<SolveReport>)> = methods
            .iter()
            .map(|&m| {
                eprintln!("running {m} on {name}");
                (m, run_method(&inst, m, &lp, &ibp))
            })
            .collect();
        let obj_ref = reference.objective(&name, &runs);
        for (method, run) in &runs {
            rows.push(match run {
                Ok(rep) => Row {
                    instance: name.clone(),
                    method: *method,
                    status: "ok",
                    termination: rep.termination.as_str().to_string(),
                    iterations: Some(rep.iterations),
                    elapsed_secs: Some(rep.elapsed_secs),
                    metric_kind: metric_kind(&rep.final_metrics),
                    metric: Some(rep.final_metrics.headline()),
                    primal_obj: Some(rep.primal_obj),
                    reference_obj: obj_ref,
                    rel_obj_gap: obj_ref.map(|r| relative_obj_gap(rep.primal_obj, r)),
                    error: String::new(),
                },
                Err(e) => Row {
                    instance: name.clone(),
                    method: *method,
                    status: "failed",
                    termination: String::new(),
                    iterations: None,
                    elapsed_secs: None,
                    metric_kind: if *method == Method::Ibp { "marginal_err" } else { "kkt" },
                    metric: None,
                    primal_obj: None,
                    reference_obj: obj_ref,
                    rel_obj_gap: None,
                    error: e.to_string(),
                },
            });
        }
    }

    print!("{}", render_table(&rows));
    if let Some(out) = &args.out {
        write_csv(out, &rows)?;
    }
    Ok(())
}

fn write_csv(out: &Path, rows: &[Row]) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("compare.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(COMPARE_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Fixed-width text table of the main columns.
pub fn render_table(rows: &[Row]) -> String {
    let header = ["instance", "method", "status", "iters", "time[s]", "metric", "value", "obj", "rel_gap"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let sci = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3e}"));
            vec![
                r.instance.clone(),
                r.method.to_string(),
                if r.status == "ok" { r.termination.clone() } else { "FAILED".into() },
                r.iterations.map_or("-".into(), |k| k.to_string()),
                r.elapsed_secs.map_or("-".into(), |t| format!("{t:.3}")),
                r.metric_kind.to_string(),
                sci(r.metric),
                r.primal_obj.map_or("-".into(), |x| format!("{x:.8e}")),
                sci(r.rel_obj_gap),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |fields: &[String]| -> String {
        fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
            + "\n"
    };
    let mut s = line(&header.map(String::from));
    s += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for (r, c) in rows.iter().zip(&cells) {
        s += &line(c);
        if !r.error.is_empty() {
            s += &format!("    error: {}\n", r.error);
        }
    }
    s
}
