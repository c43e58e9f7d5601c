//! A fully assembled decomposed cavity problem: mesh, partition, local forms,
//! impedances, boundary operator, loads and factored local impedance problems.

use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array1, Array2};

use crate::assembly::{
    assemble_load, assemble_primary, assemble_subdomain, boundary_load, boundary_mass, Coefficients,
    LocalForms, PrimarySystem, ScalarField,
};
use crate::boundary_conditions::{BcKind, BoundaryCondition, BoundaryData};
use crate::error::{Error, Result};
use crate::fields::{SkeletonLayout, VolumeTuple};
use crate::geometry::{build_rect_mesh, partition_checkerboard, skeleton_index, EdgeTag, Mesh, Partition, SkeletonIndex, TagMode};
use crate::impedance::{gamma_impedance, BlockImpedance, LocalDtn, TGammaKind};
use crate::linalg::{dense_complex, ComplexLu, C64, I};
use crate::skeleton::ExchangeOperator;
use crate::traces::{SingleTraceBasis, Traces};

/// Local factorizations of `C_j` with a reciprocal condition below this
/// threshold are treated as a violation of (A4).
pub const RCOND_THRESHOLD: f64 = 1e-12;

pub type Predicate = Arc<dyn Fn([f64; 2]) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct BcSpec {
    pub kind: BcKind,
    pub g_d: ScalarField,
    pub g_n: ScalarField,
    /// Robin impedance `Λ = lambda_scale · M_Γ`; `None` means `k`.
    pub lambda_scale: Option<f64>,
    /// Selects Dirichlet edges (by midpoint) for mixed conditions; `None`
    /// puts the bottom side `y = 0` on the Neumann part and the rest on the
    /// Dirichlet part.
    pub dirichlet_part: Option<Predicate>,
}

impl fmt::Debug for BcSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BcSpec")
            .field("kind", &self.kind)
            .field("lambda_scale", &self.lambda_scale)
            .finish_non_exhaustive()
    }
}

impl BcSpec {
    pub fn homogeneous(kind: BcKind) -> Self {
        let zero: ScalarField = Arc::new(|_| C64::new(0.0, 0.0));
        BcSpec {
            kind,
            g_d: zero.clone(),
            g_n: zero,
            lambda_scale: None,
            dirichlet_part: None,
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub px: usize,
    pub py: usize,
    pub coeffs: Coefficients,
    pub tgamma: TGammaKind,
    pub bc: BcSpec,
    pub source: ScalarField,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("size", &(self.width, self.height))
            .field("mesh", &(self.nx, self.ny))
            .field("partition", &(self.px, self.py))
            .field("coeffs", &self.coeffs)
            .field("tgamma", &self.tgamma)
            .field("bc", &self.bc)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Unit square, `n×n` mesh, `p×p` partition, `κ = k`, `γ = 1/k`, unit
    /// source, homogeneous boundary data.
    pub fn unit_square(n: usize, p: usize, k: f64, kind: BcKind) -> Self {
        ProblemSpec {
            width: 1.0,
            height: 1.0,
            nx: n,
            ny: n,
            px: p,
            py: p,
            coeffs: Coefficients::constant(k, 1.0 / k),
            tgamma: TGammaKind::Collar,
            bc: BcSpec::homogeneous(kind),
            source: Arc::new(|_| C64::new(1.0, 0.0)),
        }
    }

    /// 8×8 mesh, 2×2 partition, `k = 5`, Robin condition with `Λ = k·M_Γ`.
    pub fn reference() -> Self {
        Self::unit_square(8, 2, 5.0, BcKind::Robin)
    }

    pub fn with_bc(mut self, kind: BcKind) -> Self {
        self.bc.kind = kind;
        self
    }

    pub fn with_kappa_sq(mut self, kappa_sq: crate::assembly::KappaSq) -> Self {
        self.coeffs.kappa_sq = kappa_sq;
        self
    }

    pub fn with_source(mut self, source: ScalarField) -> Self {
        self.source = source;
        self
    }

    pub fn with_tgamma(mut self, tgamma: TGammaKind) -> Self {
        self.tgamma = tgamma;
        self
    }
}

/// Dirichlet dofs of a tagged mesh: vertices touching a Dirichlet edge.
pub fn dirichlet_mask(mesh: &Mesh, gamma_dofs: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; gamma_dofs.len()];
    for e in mesh.boundary_edges.iter().filter(|e| e.tag == EdgeTag::Dirichlet) {
        for v in e.vertices {
            mask[gamma_dofs.binary_search(&v).expect("boundary vertex")] = true;
        }
    }
    mask
}

pub struct Problem {
    pub spec: ProblemSpec,
    pub mesh: Mesh,
    pub partition: Partition,
    pub index: SkeletonIndex,
    pub basis: SingleTraceBasis,
    pub traces: Traces,
    pub forms: Vec<LocalForms>,
    pub dtn: Vec<LocalDtn>,
    pub impedance: BlockImpedance,
    pub bc: BoundaryCondition,
    pub volume_loads: Vec<Array1<C64>>,
    pub(crate) a_dense: Vec<Array2<C64>>,
    pub(crate) local: Vec<ComplexLu>,
    pub(crate) exchange: ExchangeOperator,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("spec", &self.spec)
            .field("skeleton_dim", &self.layout().len())
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn build(spec: ProblemSpec) -> Result<Self> {
        let mesh = build_rect_mesh(spec.nx, spec.ny, spec.width, spec.height)?;
        let mesh = if spec.bc.kind == BcKind::Mixed {
            let (w, h) = (spec.width, spec.height);
            let tol = 1e-9 * w.max(h);
            let part = spec.bc.dirichlet_part.clone();
            mesh.tag_boundary(
                move |x| {
                    let d = match &part {
                        Some(p) => p(x),
                        None => x[1] > tol,
                    };
                    if d {
                        EdgeTag::Dirichlet
                    } else {
                        EdgeTag::Neumann
                    }
                },
                TagMode::Mixed,
            )?
        } else {
            mesh
        };
        spec.coeffs.validate(&mesh)?;
        let partition = partition_checkerboard(&mesh, spec.px, spec.py)?;
        let index = skeleton_index(&partition);
        let basis = SingleTraceBasis::new(&index);
        let traces = Traces::new(
            index.layout(),
            (0..partition.n_subdomains()).map(|j| partition.n_interior(j)).collect(),
        );
        let forms = (0..partition.n_subdomains())
            .map(|j| assemble_subdomain(&mesh, &partition, j, &spec.coeffs))
            .collect::<Result<Vec<_>>>()?;
        let dtn = forms.iter().map(LocalDtn::from_forms).collect::<Result<Vec<_>>>()?;
        let gamma = &partition.gamma_dofs;
        let t_gamma = gamma_impedance(spec.tgamma, &mesh, gamma, spec.coeffs.gamma)?;
        let mut blocks = vec![t_gamma.clone()];
        blocks.extend(dtn.iter().map(|d| d.t.clone()));
        let impedance = BlockImpedance::new(blocks, &basis)?;
        let bc = build_bc(&spec, &mesh, gamma, t_gamma)?;
        let volume_loads = assemble_load(&mesh, &partition, spec.source.as_ref());
        let a_dense: Vec<Array2<C64>> = forms.iter().map(|f| dense_complex(&f.a)).collect();
        let local = factor_local(&a_dense, &impedance)?;
        let exchange = ExchangeOperator::new(&basis, &impedance);
        Ok(Problem {
            spec,
            mesh,
            partition,
            index,
            basis,
            traces,
            forms,
            dtn,
            impedance,
            bc,
            volume_loads,
            a_dense,
            local,
            exchange,
        })
    }

    pub fn layout(&self) -> &SkeletonLayout {
        self.impedance.layout()
    }

    pub fn n_subdomains(&self) -> usize {
        self.partition.n_subdomains()
    }

    pub fn n_gamma(&self) -> usize {
        self.partition.gamma_dofs.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.n_vertices()
    }

    /// Dense `A_j` in local ordering.
    pub fn local_operator(&self, j: usize) -> &Array2<C64> {
        &self.a_dense[j]
    }

    /// True when `μ` and `κ²` are real, so local problems do not absorb.
    pub fn absorption_free(&self) -> bool {
        use crate::assembly::KappaSq;
        let c = &self.spec.coeffs;
        c.mu.im == 0.0
            && match &c.kappa_sq {
                KappaSq::Constant(k) => k.im == 0.0,
                KappaSq::Affine { c0, cx, cy } => c0.im == 0.0 && cx.im == 0.0 && cy.im == 0.0,
                KappaSq::Function(f) => (0..self.mesh.triangles.len()).all(|t| f(self.mesh.centroid(t)).im == 0.0),
            }
    }

    /// Reciprocal condition estimates of the factored `C_j`.
    pub fn local_rconds(&self) -> Vec<f64> {
        self.local.iter().map(ComplexLu::rcond).collect()
    }

    /// The load tuple `ℓ = (ℓ_Γ, ℓ_{Ω_1}, …, ℓ_{Ω_J})`.
    pub fn load_tuple(&self) -> VolumeTuple {
        let l = self.bc.load();
        VolumeTuple {
            gamma_alpha: l.alpha.clone(),
            gamma_p: l.p.clone(),
            omega: self.volume_loads.clone(),
        }
    }

    /// Monolithic `A_{Ω×Γ}` and load assembled without the partition.
    pub fn primary_system(&self) -> Result<PrimarySystem> {
        assemble_primary(
            &self.mesh,
            &self.partition.gamma_dofs,
            &self.spec.coeffs,
            &self.bc,
            self.spec.source.as_ref(),
        )
    }

    /// The problem for the transposed operator `A*` (no conjugation).
    pub fn transposed(&self) -> Result<Problem> {
        let a_dense: Vec<Array2<C64>> = self.a_dense.iter().map(|a| a.t().to_owned()).collect();
        let local = factor_local(&a_dense, &self.impedance)?;
        Ok(Problem {
            spec: self.spec.clone(),
            mesh: self.mesh.clone(),
            partition: self.partition.clone(),
            index: self.index.clone(),
            basis: self.basis.clone(),
            traces: self.traces.clone(),
            forms: self.forms.clone(),
            dtn: self.dtn.clone(),
            impedance: self.impedance.clone(),
            bc: self.bc.transposed(),
            volume_loads: self.volume_loads.clone(),
            a_dense,
            local,
            exchange: self.exchange.clone(),
        })
    }

    /// Replaces the exchange operator by one whose range uses a
    /// non-symmetric perturbation of `T_1`, while all norms keep using the
    /// true `T`. Used as a negative control for the isometry checks.
    pub fn tamper_exchange(&mut self, eps: f64) {
        let mut blocks = self.impedance.blocks().to_vec();
        if blocks.len() > 1 && blocks[1].nrows() > 1 {
            blocks[1][[0, 1]] += eps;
        } else {
            let c = 1.min(blocks[0].ncols() - 1);
            blocks[0][[0, c]] += eps;
        }
        self.exchange = ExchangeOperator::with_range_blocks(&self.basis, blocks, self.impedance.gram_factor().clone());
    }
}

fn build_bc(spec: &ProblemSpec, mesh: &Mesh, gamma: &[usize], t_gamma: Array2<f64>) -> Result<BoundaryCondition> {
    let g_d: Array1<C64> = gamma.iter().map(|&v| (spec.bc.g_d)(mesh.vertices[v])).collect();
    match spec.bc.kind {
        BcKind::Dirichlet => BoundaryCondition::dirichlet(
            t_gamma,
            &BoundaryData {
                g_d,
                g_n_load: Array1::zeros(gamma.len()),
            },
        ),
        BcKind::Neumann | BcKind::Robin => {
            let data = BoundaryData {
                g_d,
                g_n_load: boundary_load(mesh, gamma, spec.bc.g_n.as_ref(), None),
            };
            if spec.bc.kind == BcKind::Neumann {
                BoundaryCondition::neumann(t_gamma, &data)
            } else {
                let scale = spec.bc.lambda_scale.unwrap_or(spec.coeffs.k);
                if !(scale > 0.0) {
                    return Err(Error::Assumption {
                        assumption: "(A3)",
                        detail: format!("Robin scale lambda_scale = {scale} must be positive"),
                    });
                }
                BoundaryCondition::robin(t_gamma, boundary_mass(mesh, gamma) * scale, &data)
            }
        }
        BcKind::Mixed => {
            let data = BoundaryData {
                g_d,
                g_n_load: boundary_load(mesh, gamma, spec.bc.g_n.as_ref(), Some(EdgeTag::Neumann)),
            };
            BoundaryCondition::mixed(t_gamma, dirichlet_mask(mesh, gamma), &data)
        }
    }
}

/// Factors `C_j = A_j − iB_jᵀT_jB_j` for every subdomain.
fn factor_local(a_dense: &[Array2<C64>], t: &BlockImpedance) -> Result<Vec<ComplexLu>> {
    a_dense
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let tj = t.block(j + 1);
            let ni = a.nrows() - tj.nrows();
            let mut c = a.clone();
            let mut bb = c.slice_mut(s![ni.., ni..]);
            bb.zip_mut_with(tj, |z, &x| *z -= I * x);
            let lu = ComplexLu::new(&c)?;
            if lu.is_singular() || lu.rcond() < RCOND_THRESHOLD {
                return Err(Error::LocalSolvability {
                    block: j + 1,
                    rcond: lu.rcond(),
                });
            }
            Ok(lu)
        })
        .collect()
}
