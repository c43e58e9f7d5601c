//! Real SPD block impedance `T = diag(T_Γ, T_1, …, T_J)` built from discrete
//! Dirichlet-to-Neumann maps of `−Δ + γ⁻²`, with block Cholesky factors, the
//! coupling Gram `G = EᵀTE`, impedance norms and whitening.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::assembly::{boundary_mass, boundary_stiffness, Coefficients, LocalForms};
use crate::error::{Error, Result};
use crate::fields::{Dual, Primal, SkeletonLayout};
use crate::geometry::{build_rect_mesh, Mesh};
use crate::linalg::{dense_real, real_matvec, SpdFactor, C64};
use crate::traces::SingleTraceBasis;

/// Discrete surrogate for the exterior impedance on Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TGammaKind {
    /// Schur complement of `K + γ⁻²M` on a one-cell exterior collar.
    #[default]
    Collar,
    /// Boundary stiffness plus `γ⁻¹` times boundary mass.
    BoundaryH1,
}

/// `H_bb − H_bi H_ii⁻¹ H_ib` for `H` ordered interior first. The result is
/// symmetrized so that `T = Tᵀ` holds exactly.
pub fn schur_dtn(h: &Array2<f64>, n_interior: usize) -> Result<Array2<f64>> {
    Ok(LocalDtn::new(h, n_interior)?.t)
}

/// Harmonic-extension data of one subdomain: the factored interior block of
/// `H_j`, the coupling `H_ib` and the resulting DtN matrix `T_j`.
#[derive(Debug, Clone)]
pub struct LocalDtn {
    pub h_ii: SpdFactor,
    pub h_ib: Array2<f64>,
    pub t: Array2<f64>,
}

impl LocalDtn {
    pub fn new(h: &Array2<f64>, n_interior: usize) -> Result<Self> {
        let n = h.nrows();
        let ni = n_interior;
        let hii = h.slice(s![..ni, ..ni]).to_owned();
        let h_ib = h.slice(s![..ni, ni..]).to_owned();
        let hbb = h.slice(s![ni.., ni..]).to_owned();
        let h_ii = SpdFactor::new(&hii)
            .map_err(|e| Error::Linalg(format!("interior block of the H1 Gram is singular: {e}")))?;
        let mut t = if ni == 0 {
            hbb
        } else {
            let x = h_ii.lower_solve_real(&h_ib);
            hbb - x.t().dot(&x)
        };
        let tt = t.t().to_owned();
        t = (&t + &tt) * 0.5;
        debug_assert_eq!(t.nrows(), n - ni);
        Ok(LocalDtn { h_ii, h_ib, t })
    }

    pub fn from_forms(forms: &LocalForms) -> Result<Self> {
        Self::new(&dense_real(&forms.h), forms.n_interior)
    }

    pub fn n_interior(&self) -> usize {
        self.h_ib.nrows()
    }

    /// Interior values `−H_ii⁻¹ H_ib v` of the discrete harmonic extension.
    pub fn extend(&self, v: ndarray::ArrayView1<C64>) -> Array1<C64> {
        if self.n_interior() == 0 {
            return Array1::zeros(0);
        }
        let r = real_matvec(self.h_ib.view(), v);
        -self.h_ii.solve(r.view())
    }

    /// Adjoint of the lifting: `φ_b − H_bi H_ii⁻¹ φ_i`.
    pub fn extend_adjoint(&self, phi: ndarray::ArrayView1<C64>) -> Array1<C64> {
        let ni = self.n_interior();
        let pb = phi.slice(s![ni..]).to_owned();
        if ni == 0 {
            return pb;
        }
        let y = self.h_ii.solve(phi.slice(s![..ni]));
        pb - real_matvec(self.h_ib.t(), y.view())
    }
}

/// Exterior impedance from a one-cell collar around the rectangle, with a
/// natural condition on the outer rim.
pub fn collar_impedance(mesh: &Mesh, gamma_dofs: &[usize], gamma: f64) -> Result<Array2<f64>> {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let ext = build_rect_mesh(nx + 2, ny + 2, mesh.width + 2.0 * mesh.hx(), mesh.height + 2.0 * mesh.hy())?;
    let collar: Vec<usize> = (0..ext.triangles.len())
        .filter(|&t| {
            let (i, j) = ext.cell_of_triangle(t);
            !(1..=nx).contains(&i) || !(1..=ny).contains(&j)
        })
        .collect();
    // ext vertex (i, j) sits on original vertex (i - 1, j - 1)
    let to_original = |v: usize| {
        let (i, j) = (v % (nx + 3), v / (nx + 3));
        if (1..=nx + 1).contains(&i) && (1..=ny + 1).contains(&j) {
            Some((j - 1) * (nx + 1) + (i - 1))
        } else {
            None
        }
    };
    let mut used: Vec<usize> = collar.iter().flat_map(|&t| ext.triangles[t]).collect();
    used.sort_unstable();
    used.dedup();
    let outer: Vec<usize> = used.iter().copied().filter(|&v| to_original(v).is_none()).collect();
    let mut index = vec![usize::MAX; ext.n_vertices()];
    for (k, &v) in outer.iter().enumerate() {
        index[v] = k;
    }
    for &v in &used {
        if let Some(o) = to_original(v) {
            let pos = gamma_dofs
                .binary_search(&o)
                .map_err(|_| Error::Mesh(format!("collar vertex {o} is not a boundary vertex")))?;
            index[v] = outer.len() + pos;
        }
    }
    let n = outer.len() + gamma_dofs.len();
    let mut h = Array2::<f64>::zeros((n, n));
    let sub = ext_sub_mesh(&ext, &collar);
    let forms = crate::assembly::assemble_global(&sub, &Coefficients::constant(0.0, gamma))?;
    for (v, (a, b)) in forms.h.iter() {
        let (ia, ib) = (index[a], index[b]);
        if ia != usize::MAX && ib != usize::MAX {
            h[[ia, ib]] += *v;
        }
    }
    schur_dtn(&h, outer.len())
}

fn ext_sub_mesh(ext: &Mesh, triangles: &[usize]) -> Mesh {
    let mut m = ext.clone();
    m.triangles = triangles.iter().map(|&t| ext.triangles[t]).collect();
    m
}

/// Boundary `H¹`-type impedance `K_Γ + γ⁻¹ M_Γ`.
pub fn boundary_h1_impedance(mesh: &Mesh, gamma_dofs: &[usize], gamma: f64) -> Array2<f64> {
    boundary_stiffness(mesh, gamma_dofs) + boundary_mass(mesh, gamma_dofs) / gamma
}

pub fn gamma_impedance(kind: TGammaKind, mesh: &Mesh, gamma_dofs: &[usize], gamma: f64) -> Result<Array2<f64>> {
    match kind {
        TGammaKind::Collar => collar_impedance(mesh, gamma_dofs, gamma),
        TGammaKind::BoundaryH1 => Ok(boundary_h1_impedance(mesh, gamma_dofs, gamma)),
    }
}

/// `T = diag(T_Γ, T_1, …, T_J)` with factors and the coupling Gram `G = EᵀTE`.
#[derive(Debug, Clone)]
pub struct BlockImpedance {
    layout: SkeletonLayout,
    blocks: Vec<Array2<f64>>,
    factors: Vec<SpdFactor>,
    g: Array2<f64>,
    g_factor: SpdFactor,
}

impl BlockImpedance {
    pub fn new(blocks: Vec<Array2<f64>>, basis: &SingleTraceBasis) -> Result<Self> {
        let layout = basis.layout().clone();
        if blocks.len() != layout.n_blocks() {
            return Err(Error::Dimension(format!(
                "{} impedance blocks for {} skeleton blocks",
                blocks.len(),
                layout.n_blocks()
            )));
        }
        let mut factors = Vec::with_capacity(blocks.len());
        for (b, t) in blocks.iter().enumerate() {
            if t.nrows() != layout.block_len(b) {
                return Err(Error::Dimension(format!("impedance block {b} has wrong size")));
            }
            factors.push(
                SpdFactor::new(t).map_err(|e| Error::Linalg(format!("impedance block {b}: {e}")))?,
            );
        }
        let n = basis.n_skeleton();
        let mut g = Array2::zeros((n, n));
        for (b, t) in blocks.iter().enumerate() {
            let map = basis.block_map(b);
            for (r, &gr) in map.iter().enumerate() {
                for (c, &gc) in map.iter().enumerate() {
                    g[[gr, gc]] += t[[r, c]];
                }
            }
        }
        let g_factor = SpdFactor::new(&g)?;
        Ok(BlockImpedance {
            layout,
            blocks,
            factors,
            g,
            g_factor,
        })
    }

    pub fn layout(&self) -> &SkeletonLayout {
        &self.layout
    }

    pub fn block(&self, b: usize) -> &Array2<f64> {
        &self.blocks[b]
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn factor(&self, b: usize) -> &SpdFactor {
        &self.factors[b]
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.g
    }

    pub fn gram_factor(&self) -> &SpdFactor {
        &self.g_factor
    }

    fn blockwise(&self, x: &Array1<C64>, f: impl Fn(usize, ndarray::ArrayView1<C64>) -> Array1<C64>) -> Array1<C64> {
        let mut out = Array1::zeros(x.len());
        for b in 0..self.layout.n_blocks() {
            let r = self.layout.range(b);
            let y = f(b, x.slice(s![r.clone()]));
            out.slice_mut(s![r]).assign(&y);
        }
        out
    }

    pub fn t_apply(&self, v: &Primal) -> Dual {
        Dual(self.blockwise(&v.0, |b, x| real_matvec(self.blocks[b].view(), x)))
    }

    pub fn t_solve(&self, p: &Dual) -> Primal {
        Primal(self.blockwise(&p.0, |b, x| self.factors[b].solve(x)))
    }

    /// `‖v‖_T = (vᴴ T v)^{1/2}`.
    pub fn t_norm(&self, v: &Primal) -> f64 {
        crate::linalg::norm2(self.blockwise(&v.0, |b, x| self.factors[b].upper_apply(x)).view())
    }

    /// `‖p‖_{T⁻¹} = (pᴴ T⁻¹ p)^{1/2}`.
    pub fn tinv_norm(&self, p: &Dual) -> f64 {
        crate::linalg::norm2(self.whiten(p).view())
    }

    /// `w = L⁻¹ p` blockwise, so that `‖w‖₂ = ‖p‖_{T⁻¹}`.
    pub fn whiten(&self, p: &Dual) -> Array1<C64> {
        self.blockwise(&p.0, |b, x| self.factors[b].lower_solve(x))
    }

    pub fn unwhiten(&self, w: &Array1<C64>) -> Dual {
        Dual(self.blockwise(w, |b, x| self.factors[b].lower_apply(x)))
    }

    /// Spectral condition number of each block.
    pub fn condition_numbers(&self) -> Result<Vec<f64>> {
        self.blocks
            .iter()
            .map(|t| {
                let e = crate::linalg::symmetric_eigenvalues(t)?;
                Ok(e[e.len() - 1] / e[0])
            })
            .collect()
    }
}
