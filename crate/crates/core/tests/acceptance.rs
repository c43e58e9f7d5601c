//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Reference configuration: unit square, 8×8 mesh, 2×2 partition, κ = k = 5,
//! γ = 1/k, Robin condition with Λ = k·M_Γ, seed 42.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use helmholtz_osm::assembly::KappaSq;
use helmholtz_osm::boundary_conditions::BcKind;
use helmholtz_osm::linalg::C64;
use helmholtz_osm::solver::{gmres_tinv, richardson};
use helmholtz_osm::spectral::{analyze, dirichlet_eigenvalue, sweep_wavenumber, verify_estimates, AnalysisOptions};
use helmholtz_osm::verify::{
    assembly_factorization, cauchy_decomposition, energy_identity, equivalence, exchange_axioms,
    scattering_isometry, transmission_characterization, SAMPLES,
};
use helmholtz_osm::{Problem, ProblemSpec, Result};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, limit: Option<Duration>) -> bool {
    limit.is_none_or(|l| elapsed <= l)
}

fn reference(kind: BcKind) -> Result<Problem> {
    Problem::build(ProblemSpec::reference().with_bc(kind))
}

fn exchange() -> Result<Outcome> {
    let p = reference(BcKind::Robin)?;
    let (inv, iso) = exchange_axioms(&p, SAMPLES, SEED);
    Ok(Outcome {
        pass: inv <= 1e-10 && iso <= 1e-10,
        detail: format!("involution {inv:.2e}, isometry {iso:.2e} (tol 1e-10)"),
    })
}

fn energy() -> Result<Outcome> {
    let p = reference(BcKind::Robin)?;
    let e = energy_identity(&p, SAMPLES, SEED);
    let iso = scattering_isometry(&p, SAMPLES, SEED);
    Ok(Outcome {
        pass: e <= 1e-10 && p.absorption_free() && iso <= 1e-11,
        detail: format!("energy defect {e:.2e} (tol 1e-10), isometry off the Γ block {iso:.2e} (tol 1e-11)"),
    })
}

fn transmission() -> Result<Outcome> {
    let p = reference(BcKind::Robin)?;
    let (good, bad) = transmission_characterization(&p, 50, SEED);
    Ok(Outcome {
        pass: good <= 1e-11 && bad >= 1e-3,
        detail: format!("admissible worst {good:.2e} (tol 1e-11), violating best {bad:.2e} (min 1e-3)"),
    })
}

fn formulations() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in BcKind::ALL {
        let eq = equivalence(&reference(kind)?, 1e-10)?;
        pass &= eq.converged && eq.error <= 1e-8 && eq.mismatch <= 1e-9;
        parts.push(format!("{} err {:.1e} mis {:.1e}", kind.name(), eq.error, eq.mismatch));
    }
    Ok(Outcome {
        pass,
        detail: parts.join(", "),
    })
}

fn coercivity() -> Result<Outcome> {
    let p = reference(BcKind::Robin)?;
    let r = analyze(&p, &AnalysisOptions::default())?;
    let bound = 0.5 * r.infsup_skeleton.powi(2) - 1e-9;
    Ok(Outcome {
        pass: r.n_sigma <= 500 && r.coercivity >= bound,
        detail: format!(
            "n_sigma {}, coercivity {:.4e} >= {:.4e}",
            r.n_sigma, r.coercivity, bound
        ),
    })
}

fn estimate_chain() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [BcKind::Robin, BcKind::Neumann, BcKind::Mixed] {
        let r = analyze(&reference(kind)?, &AnalysisOptions::default())?;
        let rhs = (1.0 + r.norm_a) * r.infsup_skeleton + 1e-9;
        pass &= r.infsup_primary <= rhs && verify_estimates(&r).thm_final;
        parts.push(format!("{} {:.3e} <= {:.3e}", kind.name(), r.infsup_primary, rhs));
    }
    Ok(Outcome {
        pass,
        detail: parts.join(", "),
    })
}

fn resonance() -> Result<Outcome> {
    let base = ProblemSpec::reference().with_bc(BcKind::Dirichlet);
    let lambda = dirichlet_eigenvalue(&Problem::build(base.clone())?.mesh)?;
    let opts = AnalysisOptions::default();
    let dims = |kappa_sq: f64| -> Result<(usize, usize)> {
        let p = Problem::build(base.clone().with_kappa_sq(KappaSq::Constant(C64::new(kappa_sq, 0.0))))?;
        let r = analyze(&p, &opts)?;
        Ok((r.kernel_dim_primary, r.kernel_dim_skeleton))
    };
    let at = dims(lambda)?;
    let off = dims(lambda * 1.01f64.powi(2))?;
    Ok(Outcome {
        pass: at == (1, 1) && off == (0, 0),
        detail: format!("κ² = {lambda:.6}: kernels {at:?}; κ·1.01: kernels {off:?}"),
    })
}

fn scaling() -> Result<Outcome> {
    let table = sweep_wavenumber(&ProblemSpec::reference(), &[5.0, 10.0, 20.0, 40.0], &AnalysisOptions::default())?;
    let a = table.slope_infsup.unwrap_or(f64::NAN);
    let b = table.slope_coercivity.unwrap_or(f64::NAN);
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("k={} ({:.3e}, {:.3e})", r.k, r.report.infsup_skeleton, r.report.coercivity))
        .collect();
    Ok(Outcome {
        pass: (-1.4..=-0.6).contains(&a) && (-2.6..=-1.4).contains(&b),
        detail: format!(
            "slope inf-sup {a:.3} in [-1.4, -0.6], slope coercivity {b:.3} in [-2.6, -1.4]; {}",
            rows.join(" ")
        ),
    })
}

fn solvers() -> Result<Outcome> {
    let p = reference(BcKind::Robin)?;
    let f = p.skeleton_rhs();
    let (_, rich) = richardson(&p, &f, 0.5, 1e-8, 5000);
    let (_, gm) = gmres_tinv(&p, &f, 1e-8, 200, 1000);
    let monotone = rich.residual_history.windows(2).all(|w| w[1] <= w[0]);
    Ok(Outcome {
        pass: monotone && rich.converged && gm.converged && gm.iterations < rich.iterations,
        detail: format!(
            "richardson {} its (monotone {monotone}, converged {}), gmres {} its",
            rich.iterations, rich.converged, gm.iterations
        ),
    })
}

fn assembly() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for kind in BcKind::ALL {
        worst = worst.max(assembly_factorization(&reference(kind)?)?);
    }
    let c = cauchy_decomposition(&reference(BcKind::Robin)?, 20, SEED);
    let members = c.cauchy_membership.max(c.witness).max(c.graph);
    Ok(Outcome {
        pass: worst <= 1e-13 && c.recomposition <= 1e-12 && c.cauchy_membership <= 1e-10 && c.witness <= 1e-10 && c.graph <= 1e-12,
        detail: format!(
            "R*AR defect {worst:.2e} (tol 1e-13), recomposition {:.2e} (tol 1e-12), membership {members:.2e}",
            c.recomposition
        ),
    })
}

type Criterion = (u32, &'static str, Option<u64>, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 10] = [
    (1, "exchange operator axioms", Some(5), exchange),
    (2, "scattering energy identity", Some(5), energy),
    (3, "transmission characterization", None, transmission),
    (4, "equivalence of formulations", Some(30), formulations),
    (5, "coercivity inequality", Some(60), coercivity),
    (6, "estimate chain", None, estimate_chain),
    (7, "kernel correspondence at resonance", None, resonance),
    (8, "wavenumber scaling", Some(600), scaling),
    (9, "solver behavior", None, solvers),
    (10, "assembly factorization", None, assembly),
];

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for (id, name, limit, run) in CRITERIA {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let limit = limit.map(Duration::from_secs);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && within(elapsed, limit), o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = limit.map(|l| format!(" / {}s", l.as_secs())).unwrap_or_default();
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
