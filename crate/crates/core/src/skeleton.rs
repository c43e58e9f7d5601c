//! Skeleton operators: the non-local exchange Π, the scattering operator S,
//! the right-hand side f of `(Id + ΠS) q = f`, volume recovery, and the
//! constructive maps onto Cauchy data.

use ndarray::{s, Array1, Array2};

use crate::assembly::restriction_apply;
use crate::boundary_conditions::GammaPair;
use crate::error::{Error, Result};
use crate::fields::{Dual, Primal, VolumeTuple};
use crate::impedance::BlockImpedance;
use crate::linalg::{real_matvec, SpdFactor, C64, I};
use crate::problem::Problem;
use crate::traces::SingleTraceBasis;

/// `Π q = 2 T E G⁻¹ Eᵀ q − q` with `G = EᵀTE`.
#[derive(Debug, Clone)]
pub struct ExchangeOperator {
    basis: SingleTraceBasis,
    range_blocks: Vec<Array2<f64>>,
    g_factor: SpdFactor,
}

impl ExchangeOperator {
    pub fn new(basis: &SingleTraceBasis, t: &BlockImpedance) -> Self {
        Self::with_range_blocks(basis, t.blocks().to_vec(), t.gram_factor().clone())
    }

    /// Exchange operator with an explicit choice of the blocks that map
    /// `E G⁻¹ Eᵀ q` back to dual fields.
    pub fn with_range_blocks(basis: &SingleTraceBasis, range_blocks: Vec<Array2<f64>>, g_factor: SpdFactor) -> Self {
        ExchangeOperator {
            basis: basis.clone(),
            range_blocks,
            g_factor,
        }
    }

    /// The `T⁻¹`-orthogonal projection `Q q = T E G⁻¹ Eᵀ q` onto `T(𝕏(Σ))`.
    pub fn project(&self, q: &Dual) -> Dual {
        let x = self.g_factor.solve(self.basis.adjoint(q).view());
        let v = self.basis.embed(&x);
        let layout = self.basis.layout();
        let mut out = Dual::zeros(layout);
        for (b, t) in self.range_blocks.iter().enumerate() {
            out.block_mut(layout, b).assign(&real_matvec(t.view(), v.block(layout, b)));
        }
        out
    }

    pub fn apply(&self, q: &Dual) -> Dual {
        let pq = self.project(q);
        &pq.scale(C64::new(2.0, 0.0)) - q
    }
}

/// Solution of `(Id + ΠS) q = f` mapped back to the volume.
#[derive(Debug, Clone)]
pub struct Recovery {
    /// Volume solution at mesh vertices.
    pub u: Array1<C64>,
    /// The boundary flux unknown `p` on Γ dofs.
    pub p_gamma: Array1<C64>,
    /// Multi-domain tuple `(A − iB*TB)⁻¹(B*q + ℓ)`.
    pub tuple: VolumeTuple,
    /// Dual skeleton field `q + iTBu`.
    pub p: Dual,
    /// Largest discrepancy between copies of a shared dof.
    pub mismatch: f64,
}

/// A pair of traces `(v, p)` of a local solution `u`: `Bu = v`, `Au = B*p`.
#[derive(Debug, Clone)]
pub struct CauchyPair {
    pub v: Primal,
    pub p: Dual,
    pub witness: VolumeTuple,
}

#[derive(Debug, Clone)]
pub struct CauchyDecomposition {
    pub cauchy: CauchyPair,
    /// `v'` such that the remaining part is `(v', iTv')`.
    pub graph_v: Primal,
    pub graph_p: Dual,
}

impl Problem {
    pub fn exchange(&self) -> &ExchangeOperator {
        &self.exchange
    }

    pub fn exchange_apply(&self, q: &Dual) -> Dual {
        self.exchange.apply(q)
    }

    /// Blockwise `A` on a multi-domain tuple.
    pub fn apply_a(&self, u: &VolumeTuple) -> VolumeTuple {
        let g = self.bc.apply(&GammaPair {
            alpha: u.gamma_alpha.clone(),
            p: u.gamma_p.clone(),
        });
        VolumeTuple {
            gamma_alpha: g.alpha,
            gamma_p: g.p,
            omega: self.a_dense.iter().zip(&u.omega).map(|(a, w)| a.dot(w)).collect(),
        }
    }

    /// `(A − iB*TB)⁻¹ φ` blockwise.
    pub fn local_impedance_solve(&self, phi: &VolumeTuple) -> VolumeTuple {
        let g = self.bc.impedance_inverse(&GammaPair {
            alpha: phi.gamma_alpha.clone(),
            p: phi.gamma_p.clone(),
        });
        VolumeTuple {
            gamma_alpha: g.alpha,
            gamma_p: g.p,
            omega: self.local.iter().zip(&phi.omega).map(|(lu, r)| lu.solve(r.view())).collect(),
        }
    }

    /// `S q` together with the local solution `u = (A − iB*TB)⁻¹B*q`.
    pub fn scattering_with_state(&self, q: &Dual) -> (Dual, VolumeTuple) {
        let u = self.local_impedance_solve(&self.traces.adjoint(q));
        let tbu = self.impedance.t_apply(&self.traces.apply(&u));
        (q + &tbu.scale(I * 2.0), u)
    }

    /// `S = Id + 2iTB(A − iB*TB)⁻¹B*`, with the closed form on Γ.
    pub fn scattering_apply(&self, q: &Dual) -> Dual {
        let layout = self.layout();
        let mut out = self.scattering_with_state(q).0;
        let sg = self.bc.scattering(q.block(layout, 0));
        out.block_mut(layout, 0).assign(&sg);
        out
    }

    /// `Im ⟨A u, ū⟩` summed over all blocks.
    pub fn absorption(&self, u: &VolumeTuple) -> f64 {
        self.apply_a(u).pair(&u.conj()).im
    }

    /// `f = −2i Π T B (A − iB*TB)⁻¹ ℓ`.
    pub fn skeleton_rhs_for(&self, load: &VolumeTuple) -> Dual {
        let u0 = self.local_impedance_solve(load);
        let tbu = self.impedance.t_apply(&self.traces.apply(&u0));
        self.exchange_apply(&tbu).scale(I * -2.0)
    }

    pub fn skeleton_rhs(&self) -> Dual {
        self.skeleton_rhs_for(&self.load_tuple())
    }

    /// `(Id + ΠS) q`.
    pub fn skeleton_apply(&self, q: &Dual) -> Dual {
        q + &self.exchange_apply(&self.scattering_apply(q))
    }

    /// `u = (A − iB*TB)⁻¹(B*q + ℓ)`, `p = q + iTBu`, and the global fields.
    pub fn recover_volume(&self, q: &Dual) -> Recovery {
        self.recover_volume_for(q, &self.load_tuple())
    }

    pub fn recover_volume_for(&self, q: &Dual, load: &VolumeTuple) -> Recovery {
        let rhs = self.traces.adjoint(q).add(load);
        let tuple = self.local_impedance_solve(&rhs);
        let p = q + &self.impedance.t_apply(&self.traces.apply(&tuple)).scale(I);
        let nv = self.n_vertices();
        let mut u = Array1::<C64>::zeros(nv);
        let mut set = vec![false; nv];
        let mut mismatch: f64 = 0.0;
        for (j, w) in tuple.omega.iter().enumerate() {
            for (x, v) in w.iter().zip(self.partition.local_dofs(j)) {
                if set[v] {
                    mismatch = mismatch.max((u[v] - x).norm());
                } else {
                    u[v] = *x;
                    set[v] = true;
                }
            }
        }
        for (x, &v) in tuple.gamma_alpha.iter().zip(&self.partition.gamma_dofs) {
            mismatch = mismatch.max((u[v] - x).norm());
        }
        Recovery {
            u,
            p_gamma: tuple.gamma_p.clone(),
            tuple,
            p,
            mismatch,
        }
    }

    /// Splits `(v, p)` into Cauchy data of `A` plus an element `(v', iTv')`
    /// of the graph of `iT`.
    pub fn cauchy_decompose(&self, v: &Primal, p: &Dual) -> CauchyDecomposition {
        let w = self.traces.zero_extension(v);
        let rhs = self.apply_a(&w).sub(&self.traces.adjoint(p));
        let y = self.local_impedance_solve(&rhs);
        let u1 = self.traces.apply(&y);
        let p1 = self.impedance.t_apply(&u1).scale(I);
        CauchyDecomposition {
            cauchy: CauchyPair {
                v: v - &u1,
                p: p - &p1,
                witness: w.sub(&y),
            },
            graph_v: u1,
            graph_p: p1,
        }
    }

    /// Relative residual of `p + iTv = S(p − iTv)`.
    pub fn cauchy_membership_residual(&self, v: &Primal, p: &Dual) -> f64 {
        let itv = self.impedance.t_apply(v).scale(I);
        let incoming = p - &itv;
        let outgoing = p + &itv;
        let r = &outgoing - &self.scattering_apply(&incoming);
        let scale = self.impedance.tinv_norm(&incoming).max(self.impedance.tinv_norm(&outgoing));
        if scale == 0.0 {
            0.0
        } else {
            self.impedance.tinv_norm(&r) / scale
        }
    }

    /// Relative residuals `‖Bw − v‖_T` and `‖Aw − B*p‖` of a Cauchy witness.
    pub fn cauchy_witness_residual(&self, pair: &CauchyPair) -> (f64, f64) {
        let bw = self.traces.apply(&pair.witness);
        let r1 = self.impedance.t_norm(&(&bw - &pair.v)) / self.impedance.t_norm(&pair.v).max(f64::MIN_POSITIVE);
        let aw = self.apply_a(&pair.witness);
        let bp = self.traces.adjoint(&pair.p);
        let r2 = aw.sub(&bp).coef_norm() / aw.coef_norm().max(bp.coef_norm()).max(f64::MIN_POSITIVE);
        (r1, r2)
    }

    /// Maps a kernel vector `z = (u, p)` of `A_{Ω×Γ}` to
    /// `q = (B†)* A R z − i T B R z`.
    pub fn kernel_lift(&self, z: &Array1<C64>) -> Result<Dual> {
        let nv = self.n_vertices();
        if z.len() != nv + self.n_gamma() {
            return Err(Error::Dimension(format!(
                "kernel vector has length {}, expected {}",
                z.len(),
                nv + self.n_gamma()
            )));
        }
        let rz = restriction_apply(&self.partition, &z.slice(s![..nv]).to_owned(), &z.slice(s![nv..]).to_owned())?;
        let v = self.traces.apply(&rz);
        let p = self.traces.harmonic_lift_adjoint(&self.dtn, &self.apply_a(&rz));
        Ok(&p - &self.impedance.t_apply(&v).scale(I))
    }
}
