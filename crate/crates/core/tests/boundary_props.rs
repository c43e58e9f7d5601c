mod common;

use common::{cmatvec, problem, rng};
use helmholtz_osm::assembly::boundary_mass;
use helmholtz_osm::boundary_conditions::{mixed_projector, BcKind, BoundaryCondition, BoundaryData, GammaPair};
use helmholtz_osm::fields::random_vector;
use helmholtz_osm::impedance::{gamma_impedance, TGammaKind};
use helmholtz_osm::linalg::{dotu, norm2, to_complex, ComplexLu, SpdFactor, C64, I};
use helmholtz_osm::problem::dirichlet_mask;
use ndarray::{concatenate, s, Array1, Array2, Axis};
use proptest::prelude::*;

struct Setup {
    t: Array2<f64>,
    mass: Array2<f64>,
    mask: Vec<bool>,
}

fn setup(n: usize, gamma: f64, tgamma: TGammaKind) -> Setup {
    let p = problem(n, 1, 1.0 / gamma, BcKind::Mixed);
    let gd = &p.partition.gamma_dofs;
    Setup {
        t: gamma_impedance(tgamma, &p.mesh, gd, gamma).unwrap(),
        mass: boundary_mass(&p.mesh, gd),
        mask: dirichlet_mask(&p.mesh, gd),
    }
}

fn conditions(s: &Setup, lambda_scale: f64) -> Vec<BoundaryCondition> {
    let d = BoundaryData::zero(s.t.nrows());
    vec![
        BoundaryCondition::dirichlet(s.t.clone(), &d).unwrap(),
        BoundaryCondition::neumann(s.t.clone(), &d).unwrap(),
        BoundaryCondition::robin(s.t.clone(), &s.mass * lambda_scale, &d).unwrap(),
        BoundaryCondition::mixed(s.t.clone(), s.mask.clone(), &d).unwrap(),
    ]
}

fn pair(r: &mut impl rand::Rng, n: usize) -> GammaPair {
    GammaPair {
        alpha: random_vector(r, n),
        p: random_vector(r, n),
    }
}

fn stack(u: &GammaPair) -> Array1<C64> {
    concatenate![Axis(0), u.alpha, u.p]
}

/// Dense `A_Γ` obtained column by column from `apply`.
fn dense_apply(bc: &BoundaryCondition) -> Array2<C64> {
    let n = bc.n();
    let mut m = Array2::zeros((2 * n, 2 * n));
    for c in 0..2 * n {
        let mut u = GammaPair {
            alpha: Array1::zeros(n),
            p: Array1::zeros(n),
        };
        if c < n {
            u.alpha[c] = C64::new(1.0, 0.0);
        } else {
            u.p[c - n] = C64::new(1.0, 0.0);
        }
        m.column_mut(c).assign(&stack(&bc.apply(&u)));
    }
    m
}

fn tinv_norm(t: &Array2<f64>, q: &Array1<C64>) -> f64 {
    let x = SpdFactor::new(t).unwrap().solve(q.view());
    q.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum::<f64>().sqrt()
}

fn params() -> impl Strategy<Value = (usize, f64, f64, bool, u64)> {
    (2usize..=6, 0.05f64..1.0, 0.1f64..20.0, any::<bool>(), any::<u64>())
}

fn kind_of(h1: bool) -> TGammaKind {
    if h1 {
        TGammaKind::BoundaryH1
    } else {
        TGammaKind::Collar
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operators_follow_their_definitions((n, gamma, lam, h1, seed) in params()) {
        let s = setup(n, gamma, kind_of(h1));
        let ng = s.t.nrows();
        let tinv = SpdFactor::new(&s.t).unwrap().solve_real(&Array2::eye(ng));
        let mut r = rng(seed);
        for bc in conditions(&s, lam) {
            for _ in 0..5 {
                let u = pair(&mut r, ng);
                let a = bc.apply(&u);
                let (ea, ep) = match bc.kind() {
                    BcKind::Dirichlet => (u.p.clone(), u.alpha.clone()),
                    BcKind::Neumann => (Array1::zeros(ng), cmatvec(&tinv, &u.p)),
                    BcKind::Robin => (cmatvec(&(&s.mass * lam), &u.alpha) * (-I), cmatvec(&tinv, &u.p)),
                    BcKind::Mixed => {
                        let th = bc.theta().unwrap();
                        let imt = Array2::eye(ng) - th;
                        (cmatvec(th, &u.p), cmatvec(&th.t().to_owned(), &u.alpha) + cmatvec(&tinv.dot(&imt), &u.p))
                    }
                };
                let scale = norm2(stack(&u).view());
                prop_assert!(norm2((&a.alpha - &ea).view()) <= 1e-12 * scale, "{:?}", bc.kind());
                prop_assert!(norm2((&a.p - &ep).view()) <= 1e-12 * scale, "{:?}", bc.kind());
            }
        }
    }

    #[test]
    fn boundary_operator_dissipates((n, gamma, lam, h1, seed) in params()) {
        let s = setup(n, gamma, kind_of(h1));
        let mut r = rng(seed);
        for bc in conditions(&s, lam) {
            for _ in 0..50 {
                let u = pair(&mut r, bc.n());
                let a = bc.apply(&u);
                let e = dotu(stack(&a).view(), stack(&u).mapv(|z| z.conj()).view());
                prop_assert!(e.im <= 1e-12 * norm2(stack(&u).view()).powi(2), "{:?}: {}", bc.kind(), e.im);
            }
        }
    }

    #[test]
    fn closed_form_inverse_matches_dense_solve((n, gamma, lam, h1, seed) in params()) {
        let s = setup(n, gamma, kind_of(h1));
        let mut r = rng(seed);
        for bc in conditions(&s, lam) {
            let ng = bc.n();
            let mut c = dense_apply(&bc);
            let it = to_complex(&s.t) * I;
            let mut aa = c.slice_mut(s![..ng, ..ng]);
            aa -= &it;
            let lu = ComplexLu::new(&c).unwrap();
            for _ in 0..5 {
                let rhs = pair(&mut r, ng);
                let x = bc.impedance_inverse(&rhs);
                let oracle = lu.solve(stack(&rhs).view());
                let err = norm2((&stack(&x) - &oracle).view());
                prop_assert!(err <= 1e-10 * norm2(oracle.view()), "{:?}: {}", bc.kind(), err);
                let back = bc.apply_impedance(&x);
                prop_assert!(norm2((&stack(&back) - &stack(&rhs)).view()) <= 1e-12 * norm2(stack(&rhs).view()).max(norm2(stack(&x).view())));
            }
        }
    }

    #[test]
    fn scattering_closed_form_and_norms((n, gamma, lam, h1, seed) in params()) {
        let s = setup(n, gamma, kind_of(h1));
        let mut r = rng(seed);
        for bc in conditions(&s, lam) {
            for _ in 0..10 {
                let q = random_vector(&mut r, bc.n());
                let sq = bc.scattering(q.view());
                let generic = bc.scattering_generic(q.view());
                prop_assert!(norm2((&sq - &generic).view()) <= 1e-11 * norm2(q.view()), "{:?}", bc.kind());
                let ratio = tinv_norm(&s.t, &sq) / tinv_norm(&s.t, &q);
                match bc.kind() {
                    BcKind::Dirichlet => prop_assert_eq!(&sq, &q),
                    BcKind::Neumann => prop_assert_eq!(&sq, &(-&q)),
                    BcKind::Mixed => prop_assert!((ratio - 1.0).abs() <= 1e-12),
                    BcKind::Robin => prop_assert!(ratio < 1.0),
                }
            }
        }
    }

    #[test]
    fn projector_is_impedance_orthogonal((n, gamma, _lam, h1, seed) in params()) {
        let s = setup(n, gamma, kind_of(h1));
        let ng = s.t.nrows();
        let th = mixed_projector(&s.t, &s.mask).unwrap();
        prop_assert!((th.dot(&th) - &th).iter().all(|x| x.abs() <= 1e-13 * th.len() as f64));
        let tinv = SpdFactor::new(&s.t).unwrap().solve_real(&Array2::eye(ng));
        let sym = tinv.dot(&th) - th.t().dot(&tinv);
        prop_assert!(sym.iter().all(|x| x.abs() <= 1e-12 * tinv.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
        let imt = Array2::eye(ng) - &th;
        let lhs = tinv.dot(&imt);
        let rhs = imt.t().dot(&tinv).dot(&imt);
        prop_assert!((&lhs - &rhs).iter().all(|x| x.abs() <= 1e-12 * tinv.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
        let mut r = rng(seed);
        let mut q = random_vector(&mut r, ng);
        for (k, &d) in s.mask.iter().enumerate() {
            if !d {
                q[k] = C64::new(0.0, 0.0);
            }
        }
        prop_assert!(norm2((&cmatvec(&th, &q) - &q).view()) <= 1e-13 * norm2(q.view()) * ng as f64);
    }
}

#[test]
fn mixed_limits_reduce_to_pure_conditions() {
    let s = setup(4, 0.2, TGammaKind::Collar);
    let ng = s.t.nrows();
    let d = BoundaryData::zero(ng);
    let all_d = BoundaryCondition::mixed(s.t.clone(), vec![true; ng], &d).unwrap();
    let dir = BoundaryCondition::dirichlet(s.t.clone(), &d).unwrap();
    let all_n = BoundaryCondition::mixed(s.t.clone(), vec![false; ng], &d).unwrap();
    let neu = BoundaryCondition::neumann(s.t.clone(), &d).unwrap();
    let mut r = rng(9);
    for _ in 0..5 {
        let rhs = pair(&mut r, ng);
        let a = all_d.impedance_inverse(&rhs);
        let b = dir.impedance_inverse(&rhs);
        assert!(norm2((&stack(&a) - &stack(&b)).view()) <= 1e-12 * norm2(stack(&b).view()));
        let a = all_n.impedance_inverse(&rhs);
        let b = neu.impedance_inverse(&rhs);
        assert!(norm2((&stack(&a) - &stack(&b)).view()) <= 1e-12 * norm2(stack(&b).view()));
    }
}

#[test]
fn robin_with_lambda_equal_to_impedance_absorbs_everything() {
    let s = setup(6, 0.2, TGammaKind::Collar);
    let bc = BoundaryCondition::robin(s.t.clone(), s.t.clone(), &BoundaryData::zero(s.t.nrows())).unwrap();
    let q = random_vector(&mut rng(4), s.t.nrows());
    assert!(norm2(bc.scattering(q.view()).view()) <= 1e-13 * norm2(q.view()));
}

#[test]
fn non_positive_robin_impedance_is_an_assumption_error() {
    let s = setup(4, 0.2, TGammaKind::Collar);
    let err = BoundaryCondition::robin(s.t.clone(), -&s.mass, &BoundaryData::zero(s.t.nrows())).unwrap_err();
    assert!(err.to_string().contains("(A3)"));
}
