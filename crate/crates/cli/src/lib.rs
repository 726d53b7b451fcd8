//! Scenario-driven front end: read a JSON scenario, build the dynamics, run
//! the selected criteria and write CSV series, gnuplot scripts and a summary.

pub mod config;
pub mod output;
pub mod scenario;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use markovianity::criteria::{
    divisibility_report, divisibility_report_from_maps, extended_norm_series, fidelity_series, heisenberg_norm_series,
    negativity_series, relative_entropy_series, trace_distance_series, DivisibilityReport,
};
use markovianity::dynamics::{check_cumulant_legitimacy, commutative_family, propagate, reduced_dynamics};
use markovianity::{MapFamily, WitnessSeries};
use serde_json::{json, Value};

use crate::config::Method;
pub use crate::scenario::{build_scenario, parse_config, parse_override, CliError, Criterion, Dynamics, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NON_MARKOVIAN: i32 = 4;

const DEFAULT_OUT: &str = "markovianity-out";

#[derive(Debug, Parser)]
#[command(name = "markovianity", version, about = "Markovianity analysis of time-local quantum dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate a scenario and evaluate its criteria.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the scenario).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a tolerance, e.g. `divisibility=1e-8`.
        #[arg(long = "tol-override", value_name = "KEY=VAL")]
        tol_override: Vec<String>,
        /// Step used for the propagators `V_{t+delta,t}` (default: one grid step).
        #[arg(long)]
        delta: Option<f64>,
        /// Exit with status 4 when the verdict is non-Markovian.
        #[arg(long)]
        fail_on_nonmarkovian: bool,
    },
    /// Parse and statically check a scenario.
    Validate { config: PathBuf },
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub verdict: String,
    pub out_dir: PathBuf,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

fn numeric(e: markovianity::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<(Scenario, Option<PathBuf>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    let overrides = overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let scenario = build_scenario(&cfg, &overrides)?;
    Ok((scenario, cfg.output_dir))
}

fn build_family(s: &Scenario) -> Result<MapFamily, CliError> {
    match &s.dynamics {
        Dynamics::Generator(l, Method::Ode) => propagate(l, &s.grid).map_err(numeric),
        Dynamics::Generator(l, Method::ClosedForm) => commutative_family(l, &s.grid).map(|r| r.0).map_err(numeric),
        Dynamics::Microscopic(m) => reduced_dynamics(m, &s.grid).map_err(numeric),
    }
}

fn intervals(iv: &[(f64, f64)]) -> Value {
    Value::from(iv.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>())
}

fn unique(name: &str, used: &mut BTreeSet<String>) -> String {
    let mut candidate = name.to_string();
    let mut k = 2;
    while !used.insert(candidate.clone()) {
        candidate = format!("{name}_{k}");
        k += 1;
    }
    candidate
}

/// Runs a built scenario and writes every artifact into `out_dir`.
pub fn run_scenario(s: &Scenario, out_dir: &Path, delta: Option<f64>) -> Result<RunOutcome, CliError> {
    let family = build_family(s)?;
    let tol = &s.tolerances;
    let mut warnings: Vec<String> = Vec::new();

    let validity = family.validity();
    let (cp_tol, tp_tol) = (tol.get("cp"), tol.get("tp"));
    let not_cp = validity.iter().filter(|v| v.cp.min_choi_eigenvalue < -cp_tol).count();
    let not_tp = validity.iter().filter(|v| v.trace_defect > tp_tol).count();
    if not_cp > 0 {
        warnings.push(format!("family: {not_cp} map(s) fail the CP test"));
    }
    if not_tp > 0 {
        warnings.push(format!("family: {not_tp} map(s) fail the trace-preservation test"));
    }
    let worst_map = validity
        .iter()
        .map(|v| v.cp.min_choi_eigenvalue)
        .fold(f64::INFINITY, f64::min);

    let mut series: Vec<WitnessSeries> = Vec::new();
    let mut report: Option<DivisibilityReport> = None;
    let mut cumulant: Option<Vec<bool>> = None;
    for crit in &s.criteria {
        match crit {
            Criterion::Divisibility { delta: d } => {
                let step = delta.or(*d).unwrap_or(s.grid.step());
                let r = match &s.dynamics {
                    Dynamics::Generator(l, _) => {
                        divisibility_report(l, &s.grid, step, tol.get("divisibility")).map_err(|e| match e {
                            markovianity::Error::Argument(m) => CliError::Config(m),
                            other => numeric(other),
                        })?
                    }
                    Dynamics::Microscopic(_) => divisibility_report_from_maps(&family, tol.get("divisibility")),
                };
                report = Some(r);
            }
            Criterion::TraceDistance(pairs) => {
                for (name, a, b) in pairs {
                    series.push(trace_distance_series(&family, a, b).map_err(numeric)?.with_name(name.clone()));
                }
            }
            Criterion::Fidelity(pairs) => {
                for (name, a, b) in pairs {
                    series.push(fidelity_series(&family, a, b).map_err(numeric)?.with_name(name.clone()));
                }
            }
            Criterion::RelativeEntropy(kind, pairs) => {
                for (name, a, b) in pairs {
                    series.push(
                        relative_entropy_series(&family, a, b, *kind)
                            .map_err(numeric)?
                            .with_name(name.clone()),
                    );
                }
            }
            Criterion::HeisenbergNorm(a) => series.push(heisenberg_norm_series(&family, a).map_err(numeric)?),
            Criterion::ExtendedNorm(ws) => series.extend(extended_norm_series(&family, ws).map_err(numeric)?),
            Criterion::Negativity(w0) => series.push(negativity_series(&family, w0).map_err(numeric)?),
            Criterion::CumulantLegitimacy => {
                if let Dynamics::Generator(l, _) = &s.dynamics {
                    cumulant = Some(check_cumulant_legitimacy(l, &s.grid, tol.get("legitimacy")).map_err(numeric)?);
                }
            }
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut files = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<(), CliError> {
        let path = out_dir.join(name);
        output::write(&path, &body)?;
        files.push(path);
        Ok(())
    };
    emit("family_validity.csv", output::validity_csv(validity, cp_tol, tp_tol))?;

    let mut used = BTreeSet::new();
    let mut witness_json = serde_json::Map::new();
    let mut violation_json = serde_json::Map::new();
    for w in &series {
        let name = unique(w.name(), &mut used);
        emit(&format!("{name}.csv"), output::witness_csv(w))?;
        emit(&format!("{name}.gp"), output::gnuplot_script(&name))?;
        warnings.extend(w.warnings().iter().cloned());
        violation_json.insert(name.clone(), intervals(w.violation_intervals()));
        witness_json.insert(
            name,
            json!({
                "monotone": w.is_monotone(),
                "revivals": w.revivals(),
                "revival_peaks": intervals(w.revival_peaks()),
            }),
        );
    }

    let times = s.grid.nodes();
    let cumulant_json = match &cumulant {
        Some(flags) => {
            emit("cumulant_legitimacy.csv", output::boolean_csv(&times, flags))?;
            let first_bad = flags.iter().position(|b| !b).map(|i| times[i]);
            json!({ "all_legitimate": first_bad.is_none(), "first_illegitimate_t": first_bad })
        }
        None => Value::Null,
    };

    let verdict = match &report {
        Some(r) => {
            emit("divisibility.csv", output::divisibility_csv(r))?;
            emit("divisibility.gp", output::gnuplot_script("divisibility"))?;
            warnings.extend(r.warnings.iter().cloned());
            r.verdict.as_str().to_string()
        }
        None => "not_evaluated".to_string(),
    };
    let worst = report.as_ref().and_then(|r| r.worst_choi());
    let summary = json!({
        "schema_version": config::SCHEMA_VERSION,
        "verdict": verdict,
        "generator_class": s.class,
        "dimension": s.d,
        "grid": { "t_end": s.grid.t_end(), "n_steps": s.grid.n_steps() },
        "provenance": family.provenance().as_str(),
        "g_max": report.as_ref().and_then(|r| r.g_max()),
        "worst_choi_eigenvalue": worst.map(|(v, t)| json!({ "value": v, "t": t })),
        "divisibility_violation_intervals": report.as_ref().map(|r| intervals(&r.violation_intervals)),
        "violation_intervals": violation_json,
        "witnesses": witness_json,
        "cumulant_legitimacy": cumulant_json,
        "family": {
            "all_cp": not_cp == 0,
            "all_tp": not_tp == 0,
            "worst_map_choi_eigenvalue": worst_map,
        },
        "seed": s.seed,
        "tolerances": tol.as_map(),
        "warnings": warnings,
    });
    let text = serde_json::to_string_pretty(&summary).expect("serializable summary") + "\n";
    emit("summary.json", text)?;
    Ok(RunOutcome {
        verdict,
        out_dir: out_dir.to_path_buf(),
        summary,
        files,
    })
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Validate { config } => match load_scenario(&config, &[]) {
            Ok((s, _)) => {
                println!(
                    "ok: {} generator, d = {}, {} nodes, {} criteria",
                    s.class,
                    s.d,
                    s.grid.len(),
                    s.criteria.len()
                );
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                e.exit_code()
            }
        },
        Command::Run {
            config,
            out,
            tol_override,
            delta,
            fail_on_nonmarkovian,
        } => {
            let result = load_scenario(&config, &tol_override).and_then(|(s, cfg_out)| {
                let dir = out.or(cfg_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
                run_scenario(&s, &dir, delta)
            });
            match result {
                Ok(outcome) => {
                    println!("verdict: {}", outcome.verdict);
                    println!("output: {}", outcome.out_dir.display());
                    if fail_on_nonmarkovian && outcome.verdict == "non_markovian" {
                        EXIT_NON_MARKOVIAN
                    } else {
                        EXIT_OK
                    }
                }
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    e.exit_code()
                }
            }
        }
    }
}
