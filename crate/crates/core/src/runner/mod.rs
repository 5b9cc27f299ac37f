//! Batch experiment driver behind the `medrelax` binary.

mod config;
mod table;
mod verify;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::ShieldPlan;
use crate::med::{solve_med, SolverOptions};
use crate::oracle::{
    chain_tripartitions, cmi_decay_scan, decay_scan, linear_fit, solve_gibbs_with, write_scan_csv,
    GibbsSolution, LinearFit, OracleOptions, DEFAULT_MAX_SITES,
};
use crate::rounding::{
    end_to_end, run_rounding, EndToEndOptions, MarginalMode, MarginalSource, MedSource,
    RoundingOptions,
};

pub use config::{
    ExperimentConfig, Family, ModelSection, Pipeline, RoundingSection, ScanSection, Sweep,
    SweepPoint,
};
pub use table::{format_f64, to_csv, write_csv, Row, HEADER};
pub use verify::{verify_suite, CheckResult, Fault, VerifyOptions, VerifySummary, CHECKS};

/// Command-line overrides of config values.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_sites: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub failed_rows: usize,
    /// Points whose MED solve stopped before convergence.
    pub unconverged: Vec<String>,
}

#[derive(Default)]
struct PointOutput {
    rows: Vec<Row>,
    files: Vec<(PathBuf, String)>,
    unconverged: Option<String>,
}

fn params(p: &SweepPoint, radius: Option<usize>) -> String {
    let mut s = format!("n={};beta={}", p.sites(), p.beta);
    if let Some(r) = radius {
        s.push_str(&format!(";l={r}"));
    }
    s
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes the manifest, the only output that carries a timestamp.
pub fn write_manifest(out: &Path, command: &str, seed: u64, files: &[PathBuf]) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        command: &'a str,
        seed: u64,
        version: &'a str,
        created_unix: u64,
        files: Vec<String>,
    }
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let files = files
        .iter()
        .map(|f| f.strip_prefix(out).unwrap_or(f).display().to_string())
        .collect();
    let path = out.join("manifest.json");
    std::fs::write(
        &path,
        json(&Manifest {
            command,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            created_unix,
            files,
        })?,
    )?;
    Ok(path)
}

/// Runs the configured pipeline over every sweep point and writes its tables under
/// the output directory.
pub fn run(cfg: &ExperimentConfig, ov: &RunOverrides) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out = ov.out.clone().unwrap_or_else(|| cfg.out.clone());
    let oracle_opts = OracleOptions {
        max_sites: ov.max_sites.unwrap_or(DEFAULT_MAX_SITES),
        allow_oversize: false,
    };
    let points = cfg.points()?;
    for p in &points {
        oracle_opts.check(p.sites(), p.hamiltonian.local_dim())?;
        if let Some(r) = cfg.radii().iter().find(|&&r| r < p.hamiltonian.range()) {
            return Err(Error::Config(format!(
                "radius {r} is below the interaction range {} of {}",
                p.hamiltonian.range(),
                p.model_id
            )));
        }
    }
    std::fs::create_dir_all(&out)?;

    let radii = cfg.radii();
    let tasks: Vec<(usize, Option<usize>)> = if radii.is_empty() {
        (0..points.len()).map(|i| (i, None)).collect()
    } else {
        (0..points.len())
            .flat_map(|i| radii.iter().map(move |&r| (i, Some(r))))
            .collect()
    };
    let oracles: Vec<GibbsSolution> = points
        .par_iter()
        .map(|p| solve_gibbs_with(&p.hamiltonian, &oracle_opts))
        .collect::<Result<_>>()?;
    let outputs: Vec<PointOutput> = tasks
        .par_iter()
        .map(|&(i, r)| run_point(&cfg, &points[i], &oracles[i], r))
        .collect::<Result<_>>()?;

    let mut rows: Vec<Row> = Vec::new();
    let mut outcome = RunOutcome {
        out: out.clone(),
        ..Default::default()
    };
    for o in outputs {
        rows.extend(o.rows);
        for (rel, text) in o.files {
            let path = out.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, text)?;
            outcome.files.push(path);
        }
        outcome.unconverged.extend(o.unconverged);
    }
    if cfg.pipeline == Pipeline::Med {
        mark_gap_monotonicity(&mut rows);
    }
    if cfg.pipeline == Pipeline::Scans {
        outcome
            .files
            .extend(write_scans(&out, &points, &oracles, &cfg)?);
    } else {
        let table = out.join(match cfg.pipeline {
            Pipeline::Oracle => "free_energy.csv",
            Pipeline::Med => "med.csv",
            Pipeline::Rounding => "rounding.csv",
            Pipeline::EndToEnd => "end_to_end.csv",
            Pipeline::Scans => unreachable!(),
        });
        write_csv(&table, &rows)?;
        outcome.files.insert(0, table);
    }
    outcome.failed_rows = rows.iter().filter(|r| r.failed()).count();
    let manifest = write_manifest(&out, cfg.pipeline.name(), cfg.seed, &outcome.files)?;
    outcome.files.push(manifest);
    Ok(outcome)
}

fn run_point(
    cfg: &ExperimentConfig,
    p: &SweepPoint,
    oracle: &GibbsSolution,
    radius: Option<usize>,
) -> Result<PointOutput> {
    let h = &p.hamiltonian;
    let id = p.model_id.as_str();
    let par = params(p, radius);
    let f = oracle.free_energy();
    let mut o = PointOutput::default();
    match (cfg.pipeline, radius) {
        (Pipeline::Oracle, _) | (Pipeline::Scans, _) => {
            o.rows.extend([
                Row::value(id, &par, "free_energy", f),
                Row::value(id, &par, "energy", oracle.energy()),
                Row::value(id, &par, "entropy", oracle.entropy()),
                Row::value(id, &par, "log_partition", oracle.log_partition()),
            ]);
        }
        (Pipeline::Med, Some(r)) => {
            let plan = Arc::new(ShieldPlan::consecutive(h.lattice(), r, h.range())?);
            let mut sol = solve_med(h, plan, &solver_options(cfg))?;
            let cert = sol.certify(oracle, h)?;
            o.rows.extend([
                Row::upper(id, &par, "fmed", sol.value(), f, 1e-8),
                Row::value(id, &par, "gap", f - sol.value()),
                Row::upper(id, &par, "free_energy", f, sol.value() + cert.delta, 1e-7),
                Row::upper(
                    id,
                    &par,
                    "divergence_sum",
                    cert.divergence_sum,
                    cert.delta,
                    1e-7,
                ),
                Row::value(
                    id,
                    &par,
                    "consistency_residual",
                    sol.certificate.consistency_residual,
                ),
                Row::value(id, &par, "iterations", sol.iterations as f64),
                Row::value(id, &par, "projected_gradient", sol.projected_gradient),
            ]);
            if cfg.write_trace {
                let mut buf = Vec::new();
                sol.write_trace_csv(&mut buf)?;
                let text = String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))?;
                o.files
                    .push((PathBuf::from(format!("traces/{id}_l{r}.csv")), text));
            }
            if !sol.converged {
                o.unconverged = Some(format!("{id} l={r}"));
            }
        }
        (Pipeline::Rounding, Some(r)) => {
            let plan = ShieldPlan::consecutive(h.lattice(), r, h.range())?;
            let opts = rounding_options(cfg);
            let (run, converged) = match cfg.rounding.mode {
                MarginalMode::Oracle => (run_rounding(&plan, oracle, oracle, &opts)?, true),
                MarginalMode::Med => {
                    let src = MedSource::new(h.clone(), r, cfg.solver.clone());
                    let opts = RoundingOptions {
                        measure_doubled: false,
                        ..opts
                    };
                    let run = run_rounding(&plan, &src as &dyn MarginalSource, oracle, &opts)?;
                    (run, src.regions().iter().all(|g| g.converged))
                }
            };
            for l in &run.layers {
                o.rows.push(Row::upper(
                    id,
                    &format!("{par};k={}", l.step),
                    "layer_increment",
                    l.increment,
                    l.budget,
                    1e-9,
                ));
            }
            o.rows.push(Row::upper(
                id,
                &par,
                "final_error",
                run.final_error,
                run.final_budget,
                1e-9,
            ));
            o.files.push((
                PathBuf::from(format!("rounding/{id}_l{r}.json")),
                json(&run)?,
            ));
            if !converged {
                o.unconverged = Some(format!("{id} l={r}"));
            }
        }
        (Pipeline::EndToEnd, Some(r)) => {
            let opts = EndToEndOptions {
                radius: r,
                mode: cfg.rounding.mode,
                solver: solver_options(cfg),
                rounding: rounding_options(cfg),
            };
            let rep = end_to_end(h, oracle, &opts)?;
            o.rows.extend([
                Row::upper(id, &par, "fmed", rep.fmed, f, 1e-8),
                Row::upper(id, &par, "free_energy", f, rep.rounded_free_energy, 1e-8),
                Row::upper(
                    id,
                    &par,
                    "final_error",
                    rep.rounding.final_error,
                    rep.rounding.final_budget,
                    1e-9,
                ),
                Row::value(id, &par, "register_dim", rep.register_dim as f64),
            ]);
            if !(rep.fmed_converged && rep.med_regions_converged) {
                o.unconverged = Some(format!("{id} l={r}"));
            }
            o.files.push((
                PathBuf::from(format!("end_to_end/{id}_l{r}.json")),
                json(&rep)?,
            ));
        }
        (_, None) => unreachable!("validated configs give radii to these pipelines"),
    }
    Ok(o)
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        record_trace: cfg.solver.record_trace || cfg.write_trace,
        ..cfg.solver.clone()
    }
}

fn rounding_options(cfg: &ExperimentConfig) -> RoundingOptions {
    RoundingOptions {
        regularization: cfg.rounding.regularization,
        measure_doubled: cfg.rounding.measure_doubled,
        petz: cfg.quadrature.clone(),
    }
}

/// Gives every `gap` row a verdict: no larger than the gap at the previous radius
/// of the same model.
fn mark_gap_monotonicity(rows: &mut [Row]) {
    let mut last: Option<(String, f64)> = None;
    for r in rows.iter_mut().filter(|r| r.quantity == "gap") {
        let pass = match &last {
            Some((id, g)) if *id == r.model_id => r.value <= g + 1e-8,
            _ => true,
        };
        r.pass = Some(pass);
        last = Some((r.model_id.clone(), r.value));
    }
}

#[derive(Serialize)]
struct ScanSummary {
    model_id: String,
    region: Vec<usize>,
    /// Fit of log I against distance.
    cmi_fit: Option<LinearFit>,
    /// Fit of log ε against collar width.
    decay_fit: Option<LinearFit>,
}

fn log_fit(points: impl Iterator<Item = (f64, f64)>) -> Option<LinearFit> {
    let pts: Vec<_> = points
        .filter(|p| p.1 > 0.0)
        .map(|(x, y)| (x, y.ln()))
        .collect();
    linear_fit(&pts)
}

fn write_scans(
    out: &Path,
    points: &[SweepPoint],
    oracles: &[GibbsSolution],
    cfg: &ExperimentConfig,
) -> Result<Vec<PathBuf>> {
    let results: Vec<_> = points
        .par_iter()
        .zip(oracles)
        .map(|(p, sol)| {
            let n = p.sites();
            let region = cfg
                .scan
                .region
                .clone()
                .unwrap_or_else(|| (n / 4..n - n / 4).collect());
            let decay = decay_scan(sol, &p.hamiltonian, &region)?;
            let cmi = cmi_decay_scan(sol, p.hamiltonian.lattice(), &chain_tripartitions(n, 0))?;
            Ok((p.model_id.clone(), region, decay, cmi))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut decay_rows = Vec::new();
    let mut cmi_rows = Vec::new();
    let mut summaries = Vec::new();
    for (id, region, decay, cmi) in results {
        decay_rows.extend(decay.iter().map(|d| (id.clone(), d.width, d.epsilon)));
        cmi_rows.extend(cmi.iter().map(|c| (id.clone(), c.distance, c.cmi)));
        summaries.push(ScanSummary {
            cmi_fit: log_fit(cmi.iter().map(|c| (c.distance as f64, c.cmi))),
            decay_fit: log_fit(decay.iter().map(|d| (d.width as f64, d.epsilon))),
            model_id: id,
            region,
        });
    }
    let decay_path = out.join("decay.csv");
    write_scan_csv(std::fs::File::create(&decay_path)?, "width", &decay_rows)?;
    let cmi_path = out.join("cmi.csv");
    write_scan_csv(std::fs::File::create(&cmi_path)?, "distance", &cmi_rows)?;
    let summary_path = out.join("scans.json");
    std::fs::write(&summary_path, json(&summaries)?)?;
    Ok(vec![decay_path, cmi_path, summary_path])
}
