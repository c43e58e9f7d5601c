//! Randomized identity suites run by `helmholtz-osm verify`. Each suite
//! reports a worst-case metric against a tolerance; the report contains no
//! timings so that a fixed seed reproduces it byte for byte.

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_global, restriction_adjoint, restriction_apply};
use crate::boundary_conditions::{BcKind, GammaPair};
use crate::error::Result;
use crate::fields::{random_vector, Dual, Primal, VolumeTuple};
use crate::linalg::{dense_complex, norm2, sp_matvec_real, ComplexLu, C64, I};
use crate::problem::{Problem, ProblemSpec};
use crate::solver::gmres_tinv;
use crate::spectral::{analyze, verify_estimates, AnalysisOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            tolerance,
            pass: value <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            tolerance,
            pass: value >= tolerance,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            relation: Relation::AtLeast,
            tolerance: 1.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// `max ‖Π²q − q‖/‖q‖` and `max |‖Πq‖/‖q‖ − 1|` in `T⁻¹` over `n` draws.
pub fn exchange_axioms(problem: &Problem, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed, 1);
    let t = &problem.impedance;
    let (mut inv, mut iso) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let q = Dual::random(problem.layout(), &mut r);
        let pq = problem.exchange_apply(&q);
        let nq = t.tinv_norm(&q);
        inv = inv.max(t.tinv_norm(&(&problem.exchange_apply(&pq) - &q)) / nq);
        iso = iso.max((t.tinv_norm(&pq) / nq - 1.0).abs());
    }
    (inv, iso)
}

/// Worst relative defect of `‖Sq‖² + 4|Im⟨Au, ū⟩| = ‖q‖²`.
pub fn energy_identity(problem: &Problem, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed, 2);
    let t = &problem.impedance;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let q = Dual::random(problem.layout(), &mut r);
        let (sq, u) = problem.scattering_with_state(&q);
        let nq2 = t.tinv_norm(&q).powi(2);
        let defect = t.tinv_norm(&sq).powi(2) + 4.0 * problem.absorption(&u).abs() - nq2;
        worst = worst.max(defect.abs() / nq2);
    }
    worst
}

/// Worst `|‖Sq‖/‖q‖ − 1|`. With a Robin condition the Γ block absorbs, so
/// only fields vanishing on the Γ block are drawn.
pub fn scattering_isometry(problem: &Problem, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed, 3);
    let t = &problem.impedance;
    let skip_gamma = problem.bc.kind() == BcKind::Robin;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let mut q = Dual::random(problem.layout(), &mut r);
        if skip_gamma {
            q.block_mut(problem.layout(), 0).fill(C64::new(0.0, 0.0));
        }
        let sq = problem.scattering_apply(&q);
        worst = worst.max((t.tinv_norm(&sq) / t.tinv_norm(&q) - 1.0).abs());
    }
    worst
}

fn transmission_defect(problem: &Problem, v: &Primal, p: &Dual) -> f64 {
    let t = &problem.impedance;
    let itv = t.t_apply(v).scale(I);
    let incoming = p + &itv;
    let r = &(p - &itv) + &problem.exchange_apply(&incoming);
    ratio(t.tinv_norm(&r), t.tinv_norm(&incoming))
}

/// Worst defect over single-trace / Neumann-jump pairs and the smallest
/// defect over pairs violating the transmission conditions.
pub fn transmission_characterization(problem: &Problem, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed, 4);
    let mut worst_good = 0.0f64;
    let mut best_bad = f64::INFINITY;
    let nsk = problem.basis.n_skeleton();
    for i in 0..n {
        let v = problem.basis.embed(&random_vector(&mut r, nsk));
        let p0 = Dual::random(problem.layout(), &mut r);
        let p = &p0 - &problem.exchange().project(&p0);
        worst_good = worst_good.max(transmission_defect(problem, &v, &p));
        let (vb, pb) = if i % 2 == 0 {
            (Primal::random(problem.layout(), &mut r), p.clone())
        } else {
            (v.clone(), p0)
        };
        best_bad = best_bad.min(transmission_defect(problem, &vb, &pb));
    }
    (worst_good, best_bad)
}

/// Dense `R*AR` in the ordering of `A_{Ω×Γ}`.
pub fn factorized_operator(problem: &Problem) -> Result<Array2<C64>> {
    let nv = problem.n_vertices();
    let n = nv + problem.n_gamma();
    let mut out = Array2::zeros((n, n));
    for c in 0..n {
        let mut z = Array1::<C64>::zeros(n);
        z[c] = C64::new(1.0, 0.0);
        let rz = restriction_apply(&problem.partition, &z.slice(s![..nv]).to_owned(), &z.slice(s![nv..]).to_owned())?;
        let col = restriction_adjoint(&problem.partition, nv, &problem.apply_a(&rz))?;
        out.column_mut(c).assign(&col);
    }
    Ok(out)
}

/// `max |R*AR − A_{Ω×Γ}| / max |A_{Ω×Γ}|`.
pub fn assembly_factorization(problem: &Problem) -> Result<f64> {
    let a = dense_complex(&problem.primary_system()?.matrix);
    let f = factorized_operator(problem)?;
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok((&f - &a).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyDefects {
    pub recomposition: f64,
    pub cauchy_membership: f64,
    pub witness: f64,
    pub graph: f64,
}

pub fn cauchy_decomposition(problem: &Problem, n: usize, seed: u64) -> CauchyDefects {
    let mut r = rng(seed, 5);
    let t = &problem.impedance;
    let mut d = CauchyDefects {
        recomposition: 0.0,
        cauchy_membership: 0.0,
        witness: 0.0,
        graph: 0.0,
    };
    for _ in 0..n {
        let v = Primal::random(problem.layout(), &mut r);
        let p = Dual::random(problem.layout(), &mut r);
        let dec = problem.cauchy_decompose(&v, &p);
        let rv = t.t_norm(&(&(&dec.cauchy.v + &dec.graph_v) - &v)) / t.t_norm(&v);
        let rp = t.tinv_norm(&(&(&dec.cauchy.p + &dec.graph_p) - &p)) / t.tinv_norm(&p);
        d.recomposition = d.recomposition.max(rv).max(rp);
        d.cauchy_membership = d
            .cauchy_membership
            .max(problem.cauchy_membership_residual(&dec.cauchy.v, &dec.cauchy.p));
        let (w1, w2) = problem.cauchy_witness_residual(&dec.cauchy);
        d.witness = d.witness.max(w1).max(w2);
        let g = &dec.graph_p - &t.t_apply(&dec.graph_v).scale(I);
        d.graph = d.graph.max(ratio(t.tinv_norm(&g), t.tinv_norm(&dec.graph_p)));
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub kind: BcKind,
    pub iterations: usize,
    pub converged: bool,
    /// Relative error against the monolithic solve in the `K + γ⁻²M` norm.
    pub error: f64,
    /// Largest disagreement between copies of a shared dof, relative to `max |u|`.
    pub mismatch: f64,
}

/// Skeleton GMRES solve mapped back to the volume, compared with a direct
/// solve of `A_{Ω×Γ}`.
pub fn equivalence(problem: &Problem, tol: f64) -> Result<Equivalence> {
    let f = problem.skeleton_rhs();
    let (q, report) = gmres_tinv(problem, &f, tol, 300, 2000);
    let rec = problem.recover_volume(&q);
    let sys = problem.primary_system()?;
    let lu = ComplexLu::new(&dense_complex(&sys.matrix))?;
    let z = lu.solve(sys.load.view());
    let nv = problem.n_vertices();
    let u = z.slice(s![..nv]).to_owned();
    let h = assemble_global(&problem.mesh, &problem.spec.coeffs)?.h;
    let hnorm = |x: &Array1<C64>| crate::linalg::dotc(x.view(), sp_matvec_real(&h, x.view()).view()).re.max(0.0).sqrt();
    let e = &rec.u - &u;
    let umax = u.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(Equivalence {
        kind: problem.bc.kind(),
        iterations: report.iterations,
        converged: report.converged,
        error: ratio(hnorm(&e), hnorm(&u)),
        mismatch: ratio(rec.mismatch, umax),
    })
}

/// `max ‖BB†v − v‖/‖v‖` and `max |⟨B*p, u⟩ − ⟨p, Bu⟩|/(‖p‖‖u‖)`.
pub fn trace_identities(problem: &Problem, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed, 6);
    let tr = &problem.traces;
    let sizes = tr.local_sizes();
    let (mut lift, mut adj) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let v = Primal::random(problem.layout(), &mut r);
        let back = tr.apply(&tr.harmonic_lift(&problem.dtn, &v));
        lift = lift.max((&back - &v).coef_norm() / v.coef_norm());
        let p = Dual::random(problem.layout(), &mut r);
        let u = VolumeTuple::random(problem.n_gamma(), &sizes, &mut r);
        let lhs = tr.adjoint(&p).pair(&u);
        let rhs = crate::fields::duality_pair(&p, &tr.apply(&u));
        adj = adj.max((lhs - rhs).norm() / (p.coef_norm() * u.coef_norm()));
    }
    (lift, adj)
}

/// `max Im⟨A_Γ(u), ū⟩ / ‖u‖²` over random Γ pairs.
pub fn boundary_dissipation(problem: &Problem, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed, 7);
    let ng = problem.n_gamma();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n {
        let u = GammaPair {
            alpha: random_vector(&mut r, ng),
            p: random_vector(&mut r, ng),
        };
        let au = problem.bc.apply(&u);
        let val = crate::linalg::dotu(au.alpha.view(), u.alpha.mapv(|c| c.conj()).view())
            + crate::linalg::dotu(au.p.view(), u.p.mapv(|c| c.conj()).view());
        let n2 = norm2(u.alpha.view()).powi(2) + norm2(u.p.view()).powi(2);
        worst = worst.max(val.im / n2);
    }
    worst
}

/// Worst `‖unwhiten(whiten(q)) − q‖` and `|‖whiten(q)‖₂ − ‖q‖_{T⁻¹}|`, relative.
pub fn whitening(problem: &Problem, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed, 8);
    let t = &problem.impedance;
    let (mut inv, mut nrm) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let q = Dual::random(problem.layout(), &mut r);
        let w = t.whiten(&q);
        inv = inv.max((&t.unwhiten(&w) - &q).coef_norm() / q.coef_norm());
        nrm = nrm.max((norm2(w.view()) / t.tinv_norm(&q) - 1.0).abs());
    }
    (inv, nrm)
}

pub const SAMPLES: usize = 100;

/// All suites on `spec`, plus the reference bc variants for the
/// equivalence check and the tampered-exchange negative control.
pub fn run_all(spec: &ProblemSpec, analysis: &AnalysisOptions, seed: u64) -> Result<VerifyReport> {
    let problem = Problem::build(spec.clone())?;
    let mut checks = Vec::new();

    let (inv, iso) = exchange_axioms(&problem, SAMPLES, seed);
    checks.push(Check::at_most("exchange.involution", inv, 1e-10));
    checks.push(Check::at_most("exchange.isometry", iso, 1e-10));

    checks.push(Check::at_most("scattering.energy_identity", energy_identity(&problem, SAMPLES, seed), 1e-10));
    if problem.absorption_free() {
        checks.push(Check::at_most("scattering.isometry", scattering_isometry(&problem, SAMPLES, seed), 1e-11));
    }

    let (good, bad) = transmission_characterization(&problem, 50, seed);
    checks.push(Check::at_most("transmission.admissible_pairs", good, 1e-11));
    checks.push(Check::at_least("transmission.violating_pairs", bad, 1e-3));

    let (lift, adj) = trace_identities(&problem, 20, seed);
    checks.push(Check::at_most("traces.lift_right_inverse", lift, 1e-13));
    checks.push(Check::at_most("traces.adjoint", adj, 1e-13));

    let (winv, wnorm) = whitening(&problem, 20, seed);
    checks.push(Check::at_most("impedance.whiten_inverse", winv, 1e-13));
    checks.push(Check::at_most("impedance.whiten_norm", wnorm, 1e-12));

    checks.push(Check::at_most("boundary.dissipation", boundary_dissipation(&problem, 50, seed), 1e-12));

    checks.push(Check::at_most("assembly.factorization", assembly_factorization(&problem)?, 1e-13));
    let c = cauchy_decomposition(&problem, 20, seed);
    checks.push(Check::at_most("cauchy.recomposition", c.recomposition, 1e-12));
    checks.push(Check::at_most("cauchy.membership", c.cauchy_membership, 1e-10));
    checks.push(Check::at_most("cauchy.witness", c.witness, 1e-10));
    checks.push(Check::at_most("cauchy.graph", c.graph, 1e-12));

    for kind in BcKind::ALL {
        let variant = Problem::build(spec.clone().with_bc(kind))?;
        let eq = equivalence(&variant, 1e-10)?;
        checks.push(Check::at_most(format!("equivalence.{}.error", kind.name()), eq.error, 1e-8));
        checks.push(Check::at_most(format!("equivalence.{}.mismatch", kind.name()), eq.mismatch, 1e-9));
    }

    if problem.layout().len() <= analysis.dense_cap {
        let report = analyze(&problem, analysis)?;
        let est = verify_estimates(&report);
        checks.push(Check::flag("spectral.final_estimate", est.thm_final));
        checks.push(Check::flag("spectral.coercivity_estimate", est.cor_coercivity));
        checks.push(Check::flag("spectral.kernel_match", est.kernel_match));
        checks.push(Check::flag("spectral.index_zero", est.index_zero));
        checks.push(Check::flag("spectral.norm_bound", est.norm_bound));
    }

    let mut tampered = Problem::build(spec.clone())?;
    tampered.tamper_exchange(1e-2);
    let (tinv, tiso) = exchange_axioms(&tampered, SAMPLES, seed);
    checks.push(Check::at_least(
        "negative_control.tampered_exchange_detected",
        tiso.max(tinv),
        1e-10,
    ));

    Ok(VerifyReport { seed, checks })
}
