//! Validated run configuration assembled from the command line.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tdflow::gsn::GsnOptions;
use tdflow::nrsolve::{HomotopyMode, SolverOptions};

use crate::args::{Cli, Command, HomotopyArg, LfScope, SolverArgs, SolverKind};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    PvCurve,
    Generate,
    Bench,
}

#[derive(Clone, Debug, Default)]
pub struct Inputs {
    pub case: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    /// Feeder replicated by `bench`.
    pub feeder: Option<PathBuf>,
    pub keep_bus_load: bool,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub direct: SolverOptions,
    pub gsn: GsnOptions,
}

/// Modifications applied to the loaded network before solving.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub lf: f64,
    pub feeders_only: bool,
    pub der_scale: f64,
    pub remove_elements: Vec<u64>,
    pub outage_gens: Vec<u64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            lf: 1.0,
            feeders_only: false,
            der_scale: 1.0,
            remove_elements: vec![],
            outage_gens: vec![],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub lf_start: f64,
    pub lf_stop: f64,
    pub lf_step: f64,
    pub der_scenarios: Vec<f64>,
    pub contingency_elements: Vec<u64>,
    pub contingency_gens: Vec<u64>,
    pub poi: Option<u64>,
}

impl Sweep {
    /// Loading factors from start to stop inclusive, computed by index to avoid drift.
    pub fn loading_factors(&self) -> Vec<f64> {
        let n = ((self.lf_stop - self.lf_start) / self.lf_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let lf = self.lf_start + k as f64 * self.lf_step;
                (lf * 1e9).round() / 1e9
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Bench {
    pub ks: Vec<usize>,
    pub repeat: usize,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub inputs: Inputs,
    pub solver: SolverConfig,
    pub scenario: Scenario,
    pub sweep: Option<Sweep>,
    pub bench: Option<Bench>,
    pub out: PathBuf,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct OptionsFile {
    direct: Option<SolverOptions>,
    gsn: Option<GsnOptions>,
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} {} does not exist", path.display())))
    }
}

fn finite_positive(v: f64, what: &str) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} must be finite and positive, got {v}")))
    }
}

fn solver_config(args: &SolverArgs, default: SolverKind) -> Result<SolverConfig, CliError> {
    let (mut direct, mut gsn) = (SolverOptions::default(), GsnOptions::default());
    if let Some(path) = &args.options {
        require_file(path, "options file")?;
        let text = std::fs::read_to_string(path)?;
        let file: OptionsFile =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("options file {}: {e}", path.display())))?;
        direct = file.direct.unwrap_or(direct);
        gsn = file.gsn.unwrap_or(gsn);
    }
    let mut set = |f: &dyn Fn(&mut SolverOptions)| {
        f(&mut direct);
        f(&mut gsn.inner);
    };
    if let Some(t) = args.tol {
        finite_positive(t, "--tol")?;
        set(&|o| o.tolerance = t);
    }
    if let Some(d) = args.dvmax {
        finite_positive(d, "--dvmax")?;
        set(&|o| o.dv_max = d);
    }
    if let Some(g) = args.gamma {
        finite_positive(g, "--gamma")?;
        set(&|o| o.gamma = g);
    }
    if let Some(h) = args.homotopy {
        let mode = match h {
            HomotopyArg::Auto => HomotopyMode::Auto,
            HomotopyArg::On => HomotopyMode::On,
            HomotopyArg::Off => HomotopyMode::Off,
        };
        set(&|o| o.homotopy = mode);
    }
    if args.flat_start {
        set(&|o| o.flat_start = true);
    }
    if args.no_q_limits {
        set(&|o| o.q_limits = false);
    }
    if let Some(n) = args.max_iter {
        direct.max_iterations = n;
    }
    if let Some(t) = args.outer_tol {
        finite_positive(t, "--outer-tol")?;
        gsn.outer_tolerance = t;
    }
    if let Some(n) = args.max_epochs {
        gsn.max_epochs = n;
    }
    if let Some(w) = args.workers {
        gsn.workers = w;
    }
    gsn.strict_weak_coupling |= args.strict_weak_coupling;
    gsn.progress |= args.progress;
    if args.epoch_log.is_some() {
        gsn.epoch_log = args.epoch_log.clone();
    }
    if args.dump_matrix.is_some() {
        direct.dump_matrix = args.dump_matrix.clone();
    }
    direct.check().map_err(|e| CliError::input(e.to_string()))?;
    gsn.check().map_err(|e| CliError::input(e.to_string()))?;
    Ok(SolverConfig {
        kind: args.solver.unwrap_or(default),
        direct,
        gsn,
    })
}

fn case_inputs(case: &crate::args::CaseArgs) -> Result<Inputs, CliError> {
    if let Some(b) = &case.bundle {
        require_file(&b.join("manifest.json"), "bundle manifest")?;
    } else {
        let Some(c) = &case.case else {
            return Err(CliError::input("one of --case or --bundle is required"));
        };
        require_file(c, "transmission case")?;
        if let Some(m) = &case.map {
            require_file(m, "coupling map")?;
        }
    }
    Ok(Inputs {
        case: case.case.clone(),
        map: case.map.clone(),
        bundle: case.bundle.clone(),
        feeder: None,
        keep_bus_load: case.keep_bus_load,
    })
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<RunConfig, CliError> {
        match &cli.command {
            Command::Solve(a) => {
                let s = &a.scenario;
                finite_positive(s.lf, "--lf")?;
                if !(s.der_scale.is_finite() && s.der_scale >= 0.0) {
                    return Err(CliError::input(format!("--der-scale must be finite and non-negative, got {}", s.der_scale)));
                }
                Ok(RunConfig {
                    subcommand: Subcommand::Solve,
                    inputs: case_inputs(&a.case)?,
                    solver: solver_config(&a.solver, SolverKind::Direct)?,
                    scenario: Scenario {
                        lf: s.lf,
                        feeders_only: s.lf_scope == LfScope::Feeders,
                        der_scale: s.der_scale,
                        remove_elements: s.remove_elements.clone(),
                        outage_gens: s.outage_gens.clone(),
                    },
                    sweep: None,
                    bench: None,
                    out: a.out.clone(),
                })
            }
            Command::Pvcurve(a) => {
                for (v, what) in [(a.lf_start, "--lf-start"), (a.lf_stop, "--lf-stop"), (a.lf_step, "--lf-step")] {
                    finite_positive(v, what)?;
                }
                if a.lf_stop < a.lf_start {
                    return Err(CliError::input(format!(
                        "loading range is empty: start {} is above stop {}",
                        a.lf_start, a.lf_stop
                    )));
                }
                for &d in a.der_scenarios.iter().chain([&a.der_scale]) {
                    if !(d.is_finite() && d >= 0.0) {
                        return Err(CliError::input(format!("DER scale must be finite and non-negative, got {d}")));
                    }
                }
                Ok(RunConfig {
                    subcommand: Subcommand::PvCurve,
                    inputs: case_inputs(&a.case)?,
                    solver: solver_config(&a.solver, SolverKind::Direct)?,
                    scenario: Scenario {
                        feeders_only: a.lf_scope == LfScope::Feeders,
                        der_scale: a.der_scale,
                        ..Default::default()
                    },
                    sweep: Some(Sweep {
                        lf_start: a.lf_start,
                        lf_stop: a.lf_stop,
                        lf_step: a.lf_step,
                        der_scenarios: a.der_scenarios.clone(),
                        contingency_elements: a.contingency_elements.clone(),
                        contingency_gens: a.contingency_gens.clone(),
                        poi: a.poi,
                    }),
                    bench: None,
                    out: a.out.clone(),
                })
            }
            Command::Generate(a) => {
                let inputs = case_inputs(&a.case)?;
                if inputs.bundle.is_some() || inputs.map.is_none() {
                    return Err(CliError::input("generate needs --case and --map"));
                }
                Ok(RunConfig {
                    subcommand: Subcommand::Generate,
                    inputs,
                    solver: solver_config(&SolverArgs::default(), SolverKind::Direct)?,
                    scenario: Scenario::default(),
                    sweep: None,
                    bench: None,
                    out: a.out.clone(),
                })
            }
            Command::Bench(a) => {
                require_file(&a.case, "transmission case")?;
                require_file(&a.feeder, "feeder file")?;
                if a.k.is_empty() || a.k.contains(&0) {
                    return Err(CliError::input("--k needs positive feeder counts"));
                }
                if a.repeat == 0 {
                    return Err(CliError::input("--repeat must be at least 1"));
                }
                Ok(RunConfig {
                    subcommand: Subcommand::Bench,
                    inputs: Inputs {
                        case: Some(a.case.clone()),
                        feeder: Some(a.feeder.clone()),
                        ..Default::default()
                    },
                    solver: solver_config(&a.solver, SolverKind::Gsn)?,
                    scenario: Scenario::default(),
                    sweep: None,
                    bench: Some(Bench {
                        ks: a.k.clone(),
                        repeat: a.repeat,
                    }),
                    out: a.out.clone(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loading_factors_include_both_ends() {
        let s = Sweep {
            lf_start: 1.0,
            lf_stop: 2.0,
            lf_step: 0.1,
            der_scenarios: vec![],
            contingency_elements: vec![],
            contingency_gens: vec![],
            poi: None,
        };
        let lf = s.loading_factors();
        assert_eq!(lf.len(), 11);
        assert_eq!(lf[3], 1.3);
        assert_eq!(*lf.last().unwrap(), 2.0);
    }
}
