//! `solve`: one operating point.

use std::time::Instant;

use log::info;
use serde_json::{json, Value};
use tdflow::gsn::{solve_gsn, GsnReport};
use tdflow::netmodel::Network;
use tdflow::nrsolve::{solve_direct, Solution, SolveReport};

use crate::args::SolverKind;
use crate::config::{RunConfig, SolverConfig};
use crate::error::CliError;
use crate::inputs::{apply_scenario, load_case};
use crate::output::{ensure_dir, solution_file, strip_timings, summarize, summary_text, write_json, Summary, SCHEMA};

#[derive(Clone, Debug)]
pub enum RunReport {
    Direct(SolveReport),
    Gsn(GsnReport),
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub solution: Solution,
    pub report: RunReport,
    pub mismatch: f64,
    pub seconds: f64,
}

impl Solved {
    pub fn solver_name(&self) -> &'static str {
        match self.report {
            RunReport::Direct(_) => "direct",
            RunReport::Gsn(_) => "gsn",
        }
    }

    pub fn report_json(&self, summary: &Summary) -> Value {
        let body = match &self.report {
            RunReport::Direct(r) => json!({ "direct": r }),
            RunReport::Gsn(r) => json!({ "gsn": strip_timings(r) }),
        };
        let mut v = json!({
            "schema": SCHEMA,
            "solver": self.solver_name(),
            "converged": true,
            "mismatch": self.mismatch,
            "summary": summary,
        });
        v.as_object_mut().unwrap().extend(body.as_object().unwrap().clone());
        v
    }
}

pub fn run_solver(net: &Network, cfg: &SolverConfig) -> Result<Solved, CliError> {
    let start = Instant::now();
    let (solution, report) = match cfg.kind {
        SolverKind::Direct => {
            let (s, r) = solve_direct(net, &cfg.direct)?;
            (s, RunReport::Direct(r))
        }
        SolverKind::Gsn => {
            let (s, r) = solve_gsn(net, &cfg.gsn)?;
            (s, RunReport::Gsn(r))
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let mismatch = solution.mismatch().map_err(|e| CliError::internal(e.to_string()))?;
    Ok(Solved {
        solution,
        report,
        mismatch,
        seconds,
    })
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Summary, CliError> {
    let case = load_case(&cfg.inputs)?;
    let net = apply_scenario(&case.network, &cfg.scenario)?;
    ensure_dir(&cfg.out)?;
    let solved = run_solver(&net, &cfg.solver)?;
    info!(
        "{} solve of {} finished in {:.3} s, mismatch {:.3e}",
        solved.solver_name(),
        net.name,
        solved.seconds,
        solved.mismatch
    );
    let summary = summarize(&solved.solution, solved.solver_name(), solved.mismatch);
    write_json(&cfg.out.join("solution.json"), &solution_file(&solved.solution, solved.solver_name()))?;
    write_json(&cfg.out.join("report.json"), &solved.report_json(&summary))?;
    std::fs::write(cfg.out.join("summary.txt"), summary_text(&summary))?;
    Ok(summary)
}
