#![allow(dead_code)]

use helmholtz_osm::boundary_conditions::BcKind;
use helmholtz_osm::fields::{Dual, Primal};
use helmholtz_osm::linalg::{SpdFactor, C64};
use helmholtz_osm::{Problem, ProblemSpec};
use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn problem(n: usize, p: usize, k: f64, kind: BcKind) -> Problem {
    Problem::build(ProblemSpec::unit_square(n, p, k, kind)).expect("problem builds")
}

pub fn reference(kind: BcKind) -> Problem {
    Problem::build(ProblemSpec::reference().with_bc(kind)).expect("problem builds")
}

/// Block diagonal `T` assembled densely from the individual blocks.
pub fn dense_t(p: &Problem) -> Array2<f64> {
    let n = p.layout().len();
    let mut t = Array2::zeros((n, n));
    for b in 0..p.layout().n_blocks() {
        let r = p.layout().range(b);
        t.slice_mut(s![r.clone(), r]).assign(p.impedance.block(b));
    }
    t
}

pub fn cmatvec(a: &Array2<f64>, x: &Array1<C64>) -> Array1<C64> {
    let re = a.dot(&x.mapv(|z| z.re));
    let im = a.dot(&x.mapv(|z| z.im));
    re.iter().zip(&im).map(|(&r, &i)| C64::new(r, i)).collect()
}

/// `sqrt(vᴴ M v)` for a real symmetric `M`.
pub fn quad_norm(m: &Array2<f64>, v: &Array1<C64>) -> f64 {
    let mv = cmatvec(m, v);
    v.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0).sqrt()
}

/// `‖q‖_{T⁻¹}` computed with an independent dense factorization of `T`.
pub fn tinv_norm_oracle(p: &Problem, q: &Dual) -> f64 {
    let t = dense_t(p);
    let f = SpdFactor::new(&t).unwrap();
    let x = f.solve(q.0.view());
    q.0.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum::<f64>().sqrt()
}

pub fn t_norm_oracle(p: &Problem, v: &Primal) -> f64 {
    quad_norm(&dense_t(p), &v.0)
}

pub fn max_abs(a: impl IntoIterator<Item = C64>) -> f64 {
    a.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}
