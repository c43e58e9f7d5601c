mod common;

use std::sync::Arc;

use common::{dense_t, problem, rng};
use helmholtz_osm::assembly::KappaSq;
use helmholtz_osm::boundary_conditions::BcKind;
use helmholtz_osm::fields::{random_vector, Dual};
use helmholtz_osm::linalg::{to_complex, ComplexLu, C64, I};
use helmholtz_osm::solver::richardson;
use helmholtz_osm::spectral::{dirichlet_eigenvalue, primary_kernel_vector, skeleton_residual};
use helmholtz_osm::{Problem, ProblemSpec};
use ndarray::Array2;
use proptest::prelude::*;

fn small_problem() -> impl Strategy<Value = (usize, usize, f64, u64)> {
    (1usize..=3, 2usize..=3, 1.0f64..8.0, any::<u64>()).prop_map(|(p, m, k, seed)| (p * m, p, k, seed))
}

fn kind() -> impl Strategy<Value = BcKind> {
    prop_oneof![
        Just(BcKind::Dirichlet),
        Just(BcKind::Neumann),
        Just(BcKind::Robin),
        Just(BcKind::Mixed)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exchange_fixes_impedance_range_and_flips_jumps((n, np, k, seed) in small_problem()) {
        let p = problem(n, np, k, BcKind::Robin);
        let t = &p.impedance;
        let mut r = rng(seed);
        for _ in 0..10 {
            let tex = t.t_apply(&p.basis.embed(&random_vector(&mut r, p.basis.n_skeleton())));
            prop_assert!(t.tinv_norm(&(&p.exchange_apply(&tex) - &tex)) <= 1e-12 * t.tinv_norm(&tex));

            let q0 = Dual::random(p.layout(), &mut r);
            let jump = &q0 - &p.exchange().project(&q0);
            let flipped = &p.exchange_apply(&jump) + &jump;
            prop_assert!(t.tinv_norm(&flipped) <= 1e-12 * t.tinv_norm(&jump));

            // the two parts are T⁻¹-orthogonal
            let a = p.exchange().project(&q0);
            let ip: C64 = a.0.iter().zip(&t.t_solve(&jump).0).map(|(x, y)| x.conj() * y).sum();
            prop_assert!(ip.norm() <= 1e-12 * t.tinv_norm(&a) * t.tinv_norm(&jump) + 1e-300);
        }
    }

    #[test]
    fn scattering_is_an_isometry_without_absorption((n, np, k, seed) in small_problem(), bc in kind()) {
        let p = problem(n, np, k, bc);
        let t = &p.impedance;
        let mut r = rng(seed);
        for _ in 0..10 {
            let mut q = Dual::random(p.layout(), &mut r);
            if bc == BcKind::Robin {
                q.block_mut(p.layout(), 0).fill(C64::new(0.0, 0.0));
            }
            let ratio = t.tinv_norm(&p.scattering_apply(&q)) / t.tinv_norm(&q);
            prop_assert!((ratio - 1.0).abs() <= 1e-11, "{:?}: {}", bc, ratio);
        }
    }

    #[test]
    fn absorbing_medium_makes_scattering_contractive((n, np, k, seed) in small_problem(), eta in 0.5f64..5.0) {
        let spec = ProblemSpec::unit_square(n, np, k, BcKind::Dirichlet)
            .with_kappa_sq(KappaSq::Constant(C64::new(k * k, eta)));
        let p = Problem::build(spec).unwrap();
        let t = &p.impedance;
        let mut r = rng(seed);
        for _ in 0..10 {
            let mut q = Dual::random(p.layout(), &mut r);
            q.block_mut(p.layout(), 0).fill(C64::new(0.0, 0.0));
            let (sq, u) = p.scattering_with_state(&q);
            prop_assert!(t.tinv_norm(&sq) < t.tinv_norm(&q));
            prop_assert!(p.absorption(&u).abs() > 0.0);
        }
    }

    #[test]
    fn skeleton_operator_is_bounded_by_two((n, np, k, seed) in small_problem(), bc in kind()) {
        let p = problem(n, np, k, bc);
        let t = &p.impedance;
        let mut r = rng(seed);
        for _ in 0..10 {
            let q = Dual::random(p.layout(), &mut r);
            prop_assert!(t.tinv_norm(&p.skeleton_apply(&q)) <= 2.0 * t.tinv_norm(&q) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_identity_for_every_condition((n, np, k, seed) in small_problem(), bc in kind()) {
        let p = problem(n, np, k, bc);
        let t = &p.impedance;
        let mut r = rng(seed);
        for _ in 0..10 {
            let q = Dual::random(p.layout(), &mut r);
            let (sq, u) = p.scattering_with_state(&q);
            let lhs = t.tinv_norm(&sq).powi(2) + 4.0 * p.absorption(&u).abs();
            let rhs = t.tinv_norm(&q).powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }
    }

    #[test]
    fn cauchy_parts_recompose((n, np, k, seed) in small_problem()) {
        let p = problem(n, np, k, BcKind::Robin);
        let t = &p.impedance;
        let mut r = rng(seed);
        let v = helmholtz_osm::fields::Primal::random(p.layout(), &mut r);
        let q = Dual::random(p.layout(), &mut r);
        let d = p.cauchy_decompose(&v, &q);
        prop_assert!(t.t_norm(&(&(&d.cauchy.v + &d.graph_v) - &v)) <= 1e-12 * t.t_norm(&v));
        prop_assert!(t.tinv_norm(&(&(&d.cauchy.p + &d.graph_p) - &q)) <= 1e-12 * t.tinv_norm(&q));
        prop_assert!(p.cauchy_membership_residual(&d.cauchy.v, &d.cauchy.p) <= 1e-10);
        let (w1, w2) = p.cauchy_witness_residual(&d.cauchy);
        prop_assert!(w1.max(w2) <= 1e-10);
        // the graph part is (v', iTv')
        let g = &d.graph_p - &t.t_apply(&d.graph_v).scale(I);
        prop_assert!(t.tinv_norm(&g) <= 1e-12 * t.tinv_norm(&d.graph_p).max(1e-300));
    }
}

#[test]
fn exchange_matches_dense_formula() {
    // Π = 2 T E (Eᵀ T E)⁻¹ Eᵀ − I assembled from dense matrices
    let p = problem(4, 2, 3.0, BcKind::Robin);
    let t = dense_t(&p);
    let e = p.basis.dense();
    let g = e.t().dot(&t).dot(&e);
    let ginv = ComplexLu::new(&to_complex(&g)).unwrap();
    let n = t.nrows();
    let mut pi = Array2::<C64>::zeros((n, n));
    for c in 0..n {
        let col = to_complex(&e.t().to_owned()).column(c).to_owned();
        let y = ginv.solve(col.view());
        let te = to_complex(&t.dot(&e));
        let mut x = te.dot(&y) * C64::new(2.0, 0.0);
        x[c] -= C64::new(1.0, 0.0);
        pi.column_mut(c).assign(&x);
    }
    let q = Dual::random(p.layout(), &mut rng(3));
    let dense = pi.dot(&q.0);
    let err = (&dense - &p.exchange_apply(&q).0).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(err <= 1e-11 * q.coef_norm(), "{err}");
}

#[test]
fn zero_data_gives_zero_rhs_and_zero_recovery() {
    let spec = ProblemSpec::unit_square(4, 2, 3.0, BcKind::Robin).with_source(Arc::new(|_| C64::new(0.0, 0.0)));
    let p = Problem::build(spec).unwrap();
    let f = p.skeleton_rhs();
    assert_eq!(f.coef_norm(), 0.0);
    let rec = p.recover_volume(&Dual::zeros(p.layout()));
    assert_eq!(rec.u.iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
}

#[test]
fn skeleton_rhs_is_non_local() {
    // a source supported in one subdomain excites every block of f
    let spec = ProblemSpec::unit_square(8, 2, 3.0, BcKind::Robin)
        .with_source(Arc::new(|x| C64::new(f64::from(u8::from(x[0] < 0.5 && x[1] < 0.5)), 0.0)));
    let p = Problem::build(spec).unwrap();
    let f = p.skeleton_rhs();
    let active = (0..p.layout().n_blocks())
        .filter(|&b| f.block(p.layout(), b).iter().any(|z| z.norm() > 1e-14))
        .count();
    assert_eq!(active, p.layout().n_blocks());
}

#[test]
fn one_richardson_step_leaves_interface_mismatch() {
    let p = problem(8, 2, 5.0, BcKind::Robin);
    let f = p.skeleton_rhs();
    let (q, _) = richardson(&p, &f, 0.5, 0.0, 1);
    assert!(p.recover_volume(&q).mismatch > 1e-6);
    let (q, rep) = richardson(&p, &f, 0.5, 1e-12, 2000);
    assert!(rep.converged);
    assert!(p.recover_volume(&q).mismatch < 1e-9);
}

#[test]
fn transposed_problem_agrees_for_symmetric_operator() {
    let p = problem(4, 2, 3.0, BcKind::Robin);
    let pt = p.transposed().unwrap();
    let a = p.primary_system().unwrap().matrix.to_dense();
    let at = pt.primary_system().unwrap().matrix.to_dense();
    // the primary operator is complex symmetric, so A* coincides with A
    assert!((&a - &at.t()).iter().all(|z| z.norm() < 1e-13));
    let q = Dual::random(p.layout(), &mut rng(8));
    let d = (&p.skeleton_apply(&q) - &pt.skeleton_apply(&q)).coef_norm();
    assert!(d <= 1e-10 * q.coef_norm());
}

#[test]
fn kernel_vector_lifts_to_skeleton_kernel() {
    let base = ProblemSpec::unit_square(8, 2, 5.0, BcKind::Dirichlet);
    let lambda = dirichlet_eigenvalue(&Problem::build(base.clone()).unwrap().mesh).unwrap();
    let p = Problem::build(base.with_kappa_sq(KappaSq::Constant(C64::new(lambda, 0.0)))).unwrap();
    let z = primary_kernel_vector(&p).unwrap();
    let q = p.kernel_lift(&z).unwrap();
    assert!(q.coef_norm() > 0.0);
    assert!(skeleton_residual(&p, &q) <= 1e-7, "{}", skeleton_residual(&p, &q));
    assert!(p.kernel_lift(&z.slice(ndarray::s![1..]).to_owned()).is_err());
}
