//! The multi-domain trace operator `B`, its adjoint, the harmonic lifting
//! `B†` and the single-trace embedding `E`.

use ndarray::{s, Array1, Array2};

use crate::fields::{Dual, Primal, SkeletonLayout, VolumeTuple};
use crate::geometry::SkeletonIndex;
use crate::impedance::LocalDtn;
use crate::linalg::C64;

/// Embedding of global skeleton coefficient vectors as single-valued traces.
#[derive(Debug, Clone)]
pub struct SingleTraceBasis {
    layout: SkeletonLayout,
    block_map: Vec<Vec<usize>>,
    n_skeleton: usize,
}

impl SingleTraceBasis {
    pub fn new(index: &SkeletonIndex) -> Self {
        SingleTraceBasis {
            layout: index.layout(),
            block_map: index.block_map.clone(),
            n_skeleton: index.n_skeleton(),
        }
    }

    pub fn layout(&self) -> &SkeletonLayout {
        &self.layout
    }

    pub fn n_skeleton(&self) -> usize {
        self.n_skeleton
    }

    pub fn block_map(&self, b: usize) -> &[usize] {
        &self.block_map[b]
    }

    /// `E x`: every block samples the global vector at its dofs.
    pub fn embed(&self, x: &Array1<C64>) -> Primal {
        assert_eq!(x.len(), self.n_skeleton, "skeleton vector length");
        Primal(self.block_map.iter().flat_map(|m| m.iter().map(|&k| x[k])).collect())
    }

    /// `Eᵀ q`: sums dual contributions of all blocks sharing a dof.
    pub fn adjoint(&self, q: &Dual) -> Array1<C64> {
        let mut out = Array1::zeros(self.n_skeleton);
        for (b, m) in self.block_map.iter().enumerate() {
            for (x, &k) in q.block(&self.layout, b).iter().zip(m) {
                out[k] += *x;
            }
        }
        out
    }

    /// Dense 0/1 matrix of `E`.
    pub fn dense(&self) -> Array2<f64> {
        let mut e = Array2::zeros((self.layout.len(), self.n_skeleton));
        let mut row = 0;
        for m in &self.block_map {
            for &k in m {
                e[[row, k]] = 1.0;
                row += 1;
            }
        }
        e
    }
}

/// Block trace operator on multi-domain volume tuples.
#[derive(Debug, Clone)]
pub struct Traces {
    layout: SkeletonLayout,
    n_interior: Vec<usize>,
}

impl Traces {
    pub fn new(layout: SkeletonLayout, n_interior: Vec<usize>) -> Self {
        assert_eq!(layout.n_blocks(), n_interior.len() + 1);
        Traces { layout, n_interior }
    }

    pub fn layout(&self) -> &SkeletonLayout {
        &self.layout
    }

    pub fn local_sizes(&self) -> Vec<usize> {
        self.n_interior
            .iter()
            .enumerate()
            .map(|(j, ni)| ni + self.layout.block_len(j + 1))
            .collect()
    }

    pub fn n_gamma(&self) -> usize {
        self.layout.block_len(0)
    }

    pub fn zero_tuple(&self) -> VolumeTuple {
        VolumeTuple::zeros(self.n_gamma(), &self.local_sizes())
    }

    /// `B u`: the α slot on Γ and the boundary tail of each subdomain vector.
    pub fn apply(&self, u: &VolumeTuple) -> Primal {
        let mut out = Primal::zeros(&self.layout);
        out.block_mut(&self.layout, 0).assign(&u.gamma_alpha);
        for (j, w) in u.omega.iter().enumerate() {
            out.block_mut(&self.layout, j + 1).assign(&w.slice(s![self.n_interior[j]..]));
        }
        out
    }

    /// `B* q`: scatter into the α-functional slot and boundary rows.
    pub fn adjoint(&self, q: &Dual) -> VolumeTuple {
        let mut out = self.zero_tuple();
        out.gamma_alpha.assign(&q.block(&self.layout, 0));
        for (j, w) in out.omega.iter_mut().enumerate() {
            w.slice_mut(s![self.n_interior[j]..]).assign(&q.block(&self.layout, j + 1));
        }
        out
    }

    /// Zero extension: boundary values copied, interior and p slots zero.
    pub fn zero_extension(&self, v: &Primal) -> VolumeTuple {
        let mut out = self.zero_tuple();
        out.gamma_alpha.assign(&v.block(&self.layout, 0));
        for (j, w) in out.omega.iter_mut().enumerate() {
            w.slice_mut(s![self.n_interior[j]..]).assign(&v.block(&self.layout, j + 1));
        }
        out
    }

    /// `B† v`: discrete `(−Δ + γ⁻²)`-harmonic extension in every subdomain,
    /// `(v_Γ, 0)` on Γ.
    pub fn harmonic_lift(&self, dtn: &[LocalDtn], v: &Primal) -> VolumeTuple {
        let mut out = self.zero_extension(v);
        for (j, w) in out.omega.iter_mut().enumerate() {
            let ni = self.n_interior[j];
            let ext = dtn[j].extend(v.block(&self.layout, j + 1));
            w.slice_mut(s![..ni]).assign(&ext);
        }
        out
    }

    /// `(B†)* φ` for a dual tuple `φ`.
    pub fn harmonic_lift_adjoint(&self, dtn: &[LocalDtn], phi: &VolumeTuple) -> Dual {
        let mut out = Dual::zeros(&self.layout);
        out.block_mut(&self.layout, 0).assign(&phi.gamma_alpha);
        for (j, w) in phi.omega.iter().enumerate() {
            out.block_mut(&self.layout, j + 1).assign(&dtn[j].extend_adjoint(w.view()));
        }
        out
    }
}
