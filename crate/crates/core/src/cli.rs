//! Command line front end: `solve`, `verify`, `spectrum` and `sweep`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::assembly::l2_error;
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::problem::Problem;
use crate::solver::{solve, SolveReport};
use crate::spectral::{
    analyze, dense_skeleton_operator, kernel_dim, sweep_wavenumber, verify_estimates, EstimateChecks, SpectralReport,
    SweepTable,
};
use crate::verify::{run_all, Relation, VerifyReport};

#[derive(Debug, Parser)]
#[command(name = "helmholtz-osm", version, about = "Skeleton-formulation domain decomposition for the 2D Helmholtz cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the skeleton equation and write the volume solution.
    Solve(CommonArgs),
    /// Run the randomized identity suites and write a pass/fail matrix.
    Verify(CommonArgs),
    /// Dense inf-sup, coercivity and kernel analysis.
    Spectrum(CommonArgs),
    /// Spectral analysis over the wavenumbers in `analysis.sweep_k`.
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

struct Context {
    config: ProblemConfig,
    out: PathBuf,
    seed: u64,
}

fn context(args: &CommonArgs) -> Result<Context> {
    let config = ProblemConfig::load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| config.output.dir.clone());
    let seed = args.seed.unwrap_or(config.output.seed);
    fs::create_dir_all(&out)?;
    Ok(Context { config, out, seed })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    skeleton_dim: usize,
    n_vertices: usize,
    solver: &'a SolveReport,
    final_relative_residual: f64,
    interface_mismatch: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnosis: Option<String>,
}

/// Explains a failed solve by the numerical kernel of the skeleton operator
/// when the dense analysis is affordable.
fn diagnose(problem: &Problem, cfg: &ProblemConfig) -> String {
    let opts = cfg.analysis_options();
    match dense_skeleton_operator(problem, opts.dense_cap).and_then(|m| Ok(singular_values(&m)?)) {
        Ok(sv) => {
            let kd = kernel_dim(&sv, opts.svd_threshold);
            let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
            if kd > 0 {
                format!(
                    "skeleton operator has a numerical kernel of dimension {kd} (sigma_min = {smin:.3e}); \
                     the cavity problem is at a resonance"
                )
            } else {
                format!("skeleton operator is nonsingular (sigma_min = {smin:.3e}); try more iterations")
            }
        }
        Err(e) => format!("no kernel diagnosis: {e}"),
    }
}

pub fn cmd_solve(args: &CommonArgs) -> Result<Outcome> {
    let ctx = context(args)?;
    let cfg = &ctx.config;
    let problem = Problem::build(cfg.to_spec()?)?;
    let f = problem.skeleton_rhs();
    let (q, report) = solve(&problem, &f, &cfg.solver_options());
    let rec = problem.recover_volume(&q);

    let mut sol = String::from("node,re,im\n");
    for (i, z) in rec.u.iter().enumerate() {
        writeln!(sol, "{i},{:.17e},{:.17e}", z.re, z.im).expect("write to string");
    }
    fs::write(ctx.out.join("solution.csv"), sol)?;

    let mut res = String::from("iteration,residual\n");
    for (i, r) in report.residual_history.iter().enumerate() {
        writeln!(res, "{i},{r:.17e}").expect("write to string");
    }
    fs::write(ctx.out.join("residuals.csv"), res)?;

    let l2 = cfg.manufactured_solution().map(|exact| {
        let (e, n) = l2_error(&problem.mesh, &rec.u, exact.as_ref());
        e / n
    });
    let diagnosis = (!report.converged).then(|| diagnose(&problem, cfg));
    let out = SolveOutput {
        skeleton_dim: problem.layout().len(),
        n_vertices: problem.n_vertices(),
        solver: &report,
        final_relative_residual: report.final_relative_residual(),
        interface_mismatch: rec.mismatch,
        l2_error: l2,
        diagnosis: diagnosis.clone(),
    };
    write_json(&ctx.out.join("report.json"), &out)?;

    let mut summary = format!(
        "{:?}: {} iterations, relative residual {:.3e}, converged = {}",
        report.method,
        report.iterations,
        report.final_relative_residual(),
        report.converged
    );
    if let Some(e) = l2 {
        write!(summary, ", relative L2 error {e:.3e}").expect("write to string");
    }
    if let Some(d) = diagnosis {
        write!(summary, "\n{d}").expect("write to string");
    }
    Ok(Outcome {
        pass: report.converged,
        summary,
    })
}

pub fn format_verify(report: &VerifyReport) -> String {
    let mut s = format!("seed {}\n", report.seed);
    for c in &report.checks {
        let rel = match c.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        writeln!(
            s,
            "{:<4} {:<48} {:.3e} {rel} {:.1e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        )
        .expect("write to string");
    }
    s
}

pub fn cmd_verify(args: &CommonArgs) -> Result<Outcome> {
    let ctx = context(args)?;
    let report = run_all(&ctx.config.to_spec()?, &ctx.config.analysis_options(), ctx.seed)?;
    write_json(&ctx.out.join("verify.json"), &report)?;
    let text = format_verify(&report);
    fs::write(ctx.out.join("verify.txt"), &text)?;
    Ok(Outcome {
        pass: report.all_pass(),
        summary: text,
    })
}

#[derive(Debug, Serialize)]
struct SpectrumOutput {
    report: SpectralReport,
    checks: EstimateChecks,
}

pub fn cmd_spectrum(args: &CommonArgs) -> Result<Outcome> {
    let ctx = context(args)?;
    let problem = Problem::build(ctx.config.to_spec()?)?;
    let report = analyze(&problem, &ctx.config.analysis_options())?;
    let checks = verify_estimates(&report);
    let summary = format!(
        "n_sigma {}: infsup_skeleton {:.4e}, coercivity {:.4e}, infsup_primary {:.4e}, norm_A {:.4}, \
         kernel {} / {}\n{checks:?}",
        report.n_sigma,
        report.infsup_skeleton,
        report.coercivity,
        report.infsup_primary,
        report.norm_a,
        report.kernel_dim_primary,
        report.kernel_dim_skeleton
    );
    write_json(&ctx.out.join("spectrum.json"), &SpectrumOutput { report, checks })?;
    Ok(Outcome {
        pass: checks.all(),
        summary,
    })
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut s = String::from(
        "k,n_sigma,infsup_primary,norm_A,infsup_skeleton,coercivity,kernel_primary,kernel_skeleton,\
         pass_thm_final,pass_cor_coercivity\n",
    );
    for row in &table.rows {
        let r = &row.report;
        writeln!(
            s,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{}",
            row.k,
            r.n_sigma,
            r.infsup_primary,
            r.norm_a,
            r.infsup_skeleton,
            r.coercivity,
            r.kernel_dim_primary,
            r.kernel_dim_skeleton,
            row.checks.thm_final,
            row.checks.cor_coercivity
        )
        .expect("write to string");
    }
    if let (Some(a), Some(b)) = (table.slope_infsup, table.slope_coercivity) {
        writeln!(s, "# slope_infsup_skeleton,{a:.6}").expect("write to string");
        writeln!(s, "# slope_coercivity,{b:.6}").expect("write to string");
    }
    s
}

pub fn cmd_sweep(args: &CommonArgs) -> Result<Outcome> {
    let ctx = context(args)?;
    let ks = &ctx.config.analysis.sweep_k;
    if ks.is_empty() {
        return Err(Error::Config("analysis.sweep_k is empty; list at least one wavenumber".into()));
    }
    let table = sweep_wavenumber(&ctx.config.to_spec()?, ks, &ctx.config.analysis_options())?;
    let csv = sweep_csv(&table);
    fs::write(ctx.out.join("sweep.csv"), &csv)?;
    Ok(Outcome {
        pass: table.rows.iter().all(|r| r.checks.all()),
        summary: csv,
    })
}
