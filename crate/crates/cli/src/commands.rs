use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cdjp_core::cdjp::{mlp_run, ControlMode, MlpConfig, MlpStart};
use cdjp_core::control::{
    anneal_optimal, anneal_sample_control, evaluate_control, ControlInput, OptimalControlSolution,
    SampleControlSolution, ShootingProblem,
};
use cdjp_core::fock::{build_operators, ket_fidelity, DensityMatrix, FockDim};
use cdjp_core::gauss::run_gauss_benchmark;
use cdjp_core::schedule::{step_count, ControlSchedule};
use cdjp_core::stats::{
    compare, run_batch, BatchSpec, BatchStart, ComparisonReport, FidelityHistogram,
};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_json, Artifact, OutDir};
use crate::config::ExperimentConfig;

pub const OPTIMAL_FILE: &str = "optimal_solution.json";
pub const SAMPLE_FILE: &str = "sample_solution.json";

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn mlp(cfg: &ExperimentConfig, out: &OutDir) -> Result<()> {
    let Some(problem) = &cfg.problem else {
        let g = cfg.gauss.clone().unwrap_or_default();
        let ops = build_operators(FockDim::new(g.dim)?);
        let rep = run_gauss_benchmark(&g, &ops).context("gauss-analytic")?;
        let sched = ControlSchedule::constant(0.0, 0.0, g.dt, step_count(g.t_f, g.dt)?);
        println!("fidelity {:.6}", rep.fidelity);
        report(&[
            out.write_csv("mlp_path.csv", &rep.path.to_csv())?,
            out.write_csv("control.csv", &sched.to_csv())?,
        ]);
        return Ok(());
    };
    if cfg.mlp.bundle0.is_none() && cfg.mlp.mode.is_none() {
        if let Some(sol) = out.reusable::<OptimalControlSolution>(OPTIMAL_FILE, "optimal") {
            println!("using the bundle of {}", out.path(OPTIMAL_FILE).display());
            let csv = solution_path(&sol.problem, &sol.schedule, &sol.bundle0)?;
            report(&[
                out.write_csv("mlp_path.csv", &csv)?,
                out.write_csv("control.csv", &sol.schedule.to_csv())?,
            ]);
            return Ok(());
        }
    }
    let ops = problem.operators()?;
    let (psi0, target) = problem.kets()?;
    let bundle0 = match cfg.mlp.bundle0 {
        Some(b) => b,
        None => problem.initial_bundle_guess(&ops)?,
    };
    let mode = cfg.mlp.mode.clone().unwrap_or(ControlMode::Optimal {
        lambda1_max: problem.lambda1_max,
    });
    let mcfg = MlpConfig {
        tau: problem.tau,
        t_f: problem.t_f,
        dt: problem.dt,
        mode,
        shadow: None,
    };
    let (path, sched) =
        mlp_run(&MlpStart::Ket(psi0), &bundle0, &mcfg, &ops).context("cdjp-core")?;
    let fid = ket_fidelity(path.final_ket.as_ref().expect("ket start"), &target);
    println!("fidelity {fid:.6}  cost {:.6e}", path.cost);
    report(&[
        out.write_csv("mlp_path.csv", &path.to_csv())?,
        out.write_csv("control.csv", &sched.to_csv())?,
    ]);
    Ok(())
}

fn solution_path(
    problem: &ShootingProblem,
    sched: &ControlSchedule,
    bundle0: &cdjp_core::cdjp::ScalarBundle,
) -> Result<String> {
    let ev = evaluate_control(&ControlInput::Schedule(sched.clone()), bundle0, problem)
        .context("control-opt")?;
    Ok(ev.path.to_csv())
}

pub fn optimize(cfg: &ExperimentConfig, out: &OutDir) -> Result<()> {
    let problem = cfg.problem()?;
    let (sol, path_csv) = match out.reusable::<OptimalControlSolution>(OPTIMAL_FILE, "optimal") {
        Some(sol) => {
            println!("reusing {}", out.path(OPTIMAL_FILE).display());
            let csv = solution_path(&sol.problem, &sol.schedule, &sol.bundle0)?;
            (sol, csv)
        }
        None => {
            let (sol, path) = anneal_optimal(problem, &cfg.anneal).context("control-opt")?;
            (sol, path.to_csv())
        }
    };
    println!(
        "fidelity {:.6}  cost {:.6e}  K variation {:.2e}",
        sol.fidelity,
        sol.cost,
        k_variation(&path_csv)
    );
    if let Some(t) = cfg.target_fidelity {
        if sol.fidelity < t {
            eprintln!("warning: fidelity {:.4} below target {t}", sol.fidelity);
        }
    }
    if !sol.converged {
        eprintln!(
            "warning: NoConvergence, gate {} not reached; best-so-far written",
            problem.fidelity_gate
        );
    }
    let files = [
        out.write_csv("mlp_path.csv", &path_csv)?,
        out.write_csv("control.csv", &sol.schedule.to_csv())?,
        out.write_json(OPTIMAL_FILE, "optimal", &sol)?,
    ];
    report(&files);
    Ok(())
}

/// Relative K spread read back from the path CSV.
fn k_variation(csv: &str) -> f64 {
    let k: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter_map(|l| l.rsplit(',').next()?.parse().ok())
        .collect();
    let (lo, hi) = k
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let scale = k.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        (hi - lo) / scale
    } else {
        0.0
    }
}

pub fn sample_control(cfg: &ExperimentConfig, out: &OutDir) -> Result<()> {
    let problem = cfg.problem()?;
    let s = &cfg.sample;
    let (sol, path_csv) = match out.reusable::<SampleControlSolution>(SAMPLE_FILE, "sample") {
        Some(sol) => {
            println!("reusing {}", out.path(SAMPLE_FILE).display());
            let csv = solution_path(&sol.problem, &sol.schedule, &sol.bundle0)?;
            (sol, csv)
        }
        None => {
            let (sol, path) =
                anneal_sample_control(problem, &s.anneal, s.n_c, s.gate).context("control-opt")?;
            (sol, path.to_csv())
        }
    };
    println!("fidelity {:.6}  cost {:.6e}", sol.fidelity, sol.cost);
    if !sol.converged {
        eprintln!(
            "warning: NoConvergence, gate {} not reached; best-so-far written",
            s.gate
        );
    }
    let files = [
        out.write_csv("sample_mlp_path.csv", &path_csv)?,
        out.write_csv("sample_control.csv", &sol.schedule.to_csv())?,
        out.write_json(SAMPLE_FILE, "sample", &sol)?,
    ];
    report(&files);
    Ok(())
}

/// The fields shared by both solution kinds.
#[derive(Deserialize)]
struct SolutionView {
    problem: ShootingProblem,
    problem_hash: String,
    schedule: ControlSchedule,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchReport {
    pub solution: String,
    pub solution_kind: String,
    pub solution_config_hash: String,
    pub problem_hash: String,
    pub n_traj: usize,
    pub failures: usize,
    pub mean_fidelity: f64,
    pub histogram: FidelityHistogram,
}

pub fn trajectories(cfg: &ExperimentConfig, out: &OutDir, solution: Option<&Path>) -> Result<()> {
    let file = solution
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.path(OPTIMAL_FILE));
    let art: Artifact<serde_json::Value> = read_json(&file)?;
    let kind = art.kind.as_str();
    if kind != "optimal" && kind != "sample" {
        bail!("{}: not a solution file (kind `{kind}`)", file.display());
    }
    let sol: SolutionView =
        serde_json::from_value(art.data).with_context(|| format!("parsing {}", file.display()))?;
    let p = &sol.problem;
    let ops = p.operators()?;
    let (psi0, target) = p.kets()?;
    let spec = BatchSpec {
        control: sol.schedule,
        start: BatchStart::Ket(psi0),
        target: DensityMatrix::from_ket(&target),
        n: cfg.batch.n_traj,
        base_seed: cfg.seed,
        tau: p.tau,
        t_f: p.t_f,
        dt: p.dt,
        thresholds: cfg.batch.thresholds.clone(),
    };
    let res = run_batch(&spec, &ops).context("experiment-stats")?;
    let mean = res.fidelities.iter().sum::<f64>() / res.fidelities.len().max(1) as f64;
    for t in &res.histogram.fractions_above {
        println!("{kind}: F > {:.2}: {:.2}%", t.threshold, 100.0 * t.fraction);
    }
    if res.failures > 0 {
        eprintln!("warning: {} trajectories lost positivity", res.failures);
    }
    let rep = BatchReport {
        solution: file.display().to_string(),
        solution_kind: kind.to_string(),
        solution_config_hash: art.config_hash,
        problem_hash: sol.problem_hash,
        n_traj: spec.n,
        failures: res.failures,
        mean_fidelity: mean,
        histogram: res.histogram.clone(),
    };
    let files = [
        out.write_csv(&format!("{kind}_histogram.csv"), &res.histogram.to_csv())?,
        out.write_csv(&format!("{kind}_trajectories.csv"), &res.trajectories_csv())?,
        out.write_json(&format!("{kind}_batch.json"), "batch", &rep)?,
    ];
    report(&files);
    Ok(())
}

pub fn gauss_bench(cfg: &ExperimentConfig, out: &OutDir) -> Result<()> {
    let g = cfg.gauss.clone().unwrap_or_default();
    let ops = build_operators(FockDim::new(g.dim)?);
    let rep = run_gauss_benchmark(&g, &ops).context("gauss-analytic")?;
    let (q3, q4, q5) = rep.steady;
    let rows = [
        ("q3", q3),
        ("q4", q4),
        ("q5", q5),
        ("xi_re", rep.xi.re),
        ("xi_im", rep.xi.im),
        ("max_dev_x", rep.max_dev_x),
        ("max_dev_p", rep.max_dev_p),
        ("max_dev_cov", rep.max_dev_cov),
        ("fit_residual", rep.fit_residual),
        ("fidelity", rep.fidelity),
    ];
    let mut table = String::from("quantity,value\n");
    for (k, v) in rows {
        table.push_str(&format!("{k},{v:.12e}\n"));
    }
    println!("steady (q3, q4, q5) = ({q3:.6}, {q4:.6}, {q5:.6})");
    println!(
        "max |dX| {:.3e}  max |dP| {:.3e}",
        rep.max_dev_x, rep.max_dev_p
    );
    let summary: serde_json::Map<String, serde_json::Value> = rows
        .iter()
        .map(|(k, v)| (k.to_string(), (*v).into()))
        .collect();
    let files = [
        out.write_csv("gauss_table.csv", &table)?,
        out.write_csv("gauss_bench.csv", &rep.to_csv())?,
        out.write_json("gauss_report.json", "gauss-bench", (&g, summary))?,
    ];
    report(&files);
    Ok(())
}

pub fn compare_batches(cfg: &ExperimentConfig, out: &OutDir) -> Result<()> {
    let load = |kind: &str| -> Result<BatchReport> {
        let path = out.path(&format!("{kind}_batch.json"));
        if !path.exists() {
            bail!(
                "{} missing; run `trajectories` on the {kind} solution first",
                path.display()
            );
        }
        Ok(read_json::<Artifact<BatchReport>>(&path)?.data)
    };
    let (opt, sample) = (load("optimal")?, load("sample")?);
    if opt.n_traj != sample.n_traj {
        eprintln!(
            "warning: batch sizes differ ({} vs {})",
            opt.n_traj, sample.n_traj
        );
    }
    let rep: ComparisonReport = compare(&opt.histogram, &sample.histogram, &cfg.batch.thresholds);
    print!("{}", rep.to_text());
    println!("optimal dominates: {}", rep.dominates());
    let files = [
        out.write_csv("comparison.csv", &rep.to_csv())?,
        out.write_csv("comparison.txt", &rep.to_text())?,
        out.write_json("comparison.json", "comparison", (&rep, rep.dominates()))?,
    ];
    report(&files);
    Ok(())
}
