//! P1 finite element forms on a triangulated rectangle: stiffness, mass and
//! κ²-weighted mass per subdomain, the γ-weighted H¹ Gram, volume and boundary
//! loads, the restriction to multi-domain tuples, and the monolithic operator
//! of the cavity problem.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use sprs::{CsMat, TriMat};

use crate::boundary_conditions::BoundaryCondition;
use crate::error::{Error, Result};
use crate::fields::VolumeTuple;
use crate::geometry::{EdgeTag, Mesh, Partition};
use crate::linalg::C64;

pub type ScalarField = Arc<dyn Fn([f64; 2]) -> C64 + Send + Sync>;

/// The squared wavenumber κ(x)².
#[derive(Clone)]
pub enum KappaSq {
    Constant(C64),
    /// `c0 + cx·x + cy·y`, integrated exactly.
    Affine { c0: C64, cx: C64, cy: C64 },
    /// General field, integrated with the centroid rule.
    Function(ScalarField),
}

impl fmt::Debug for KappaSq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaSq::Constant(c) => write!(f, "Constant({c})"),
            KappaSq::Affine { c0, cx, cy } => write!(f, "Affine({c0} + {cx} x + {cy} y)"),
            KappaSq::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl KappaSq {
    pub fn eval(&self, x: [f64; 2]) -> C64 {
        match self {
            KappaSq::Constant(c) => *c,
            KappaSq::Affine { c0, cx, cy } => c0 + cx * x[0] + cy * x[1],
            KappaSq::Function(f) => f(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Coefficients {
    pub mu: C64,
    pub kappa_sq: KappaSq,
    pub gamma: f64,
    pub k: f64,
}

impl Coefficients {
    /// Constant wavenumber `κ = k`, unit `μ`.
    pub fn constant(k: f64, gamma: f64) -> Self {
        Coefficients {
            mu: C64::new(1.0, 0.0),
            kappa_sq: KappaSq::Constant(C64::new(k * k, 0.0)),
            gamma,
            k,
        }
    }

    /// Checks `Re μ > 0`, `Im μ ≥ 0`, `γ > 0` and `Im κ² ≥ 0` at the points
    /// where κ² enters the quadrature.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if !(self.mu.re > 0.0) || self.mu.im < 0.0 {
            return Err(Error::Assumption {
                assumption: "(A2)",
                detail: format!("mu = {} must satisfy Re mu > 0 and Im mu >= 0", self.mu),
            });
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Assumption {
                assumption: "(A2)",
                detail: format!("gamma = {} must be positive", self.gamma),
            });
        }
        let bad = |x: [f64; 2]| {
            let v = self.kappa_sq.eval(x);
            v.im < 0.0 || !v.re.is_finite() || !v.im.is_finite()
        };
        let offending = match &self.kappa_sq {
            KappaSq::Constant(_) => bad([0.0, 0.0]).then_some([0.0, 0.0]),
            KappaSq::Affine { .. } => mesh.vertices.iter().copied().find(|&x| bad(x)),
            KappaSq::Function(_) => (0..mesh.triangles.len()).map(|t| mesh.centroid(t)).find(|&x| bad(x)),
        };
        if let Some(x) = offending {
            return Err(Error::Assumption {
                assumption: "(A2)",
                detail: format!(
                    "Im kappa^2 = {:e} < 0 at ({}, {})",
                    self.kappa_sq.eval(x).im,
                    x[0],
                    x[1]
                ),
            });
        }
        Ok(())
    }
}

struct Element {
    area: f64,
    grads: [[f64; 2]; 3],
}

fn element(mesh: &Mesh, t: usize) -> Result<Element> {
    let [p0, p1, p2] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let area = mesh.signed_area(t);
    if !(area > 0.0) {
        return Err(Error::Mesh(format!("triangle {t} has non-positive area {area:e}")));
    }
    let d = 2.0 * area;
    let grads = [
        [(p1[1] - p2[1]) / d, (p2[0] - p1[0]) / d],
        [(p2[1] - p0[1]) / d, (p0[0] - p2[0]) / d],
        [(p0[1] - p1[1]) / d, (p1[0] - p0[0]) / d],
    ];
    Ok(Element { area, grads })
}

fn element_stiffness(e: &Element) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = e.area * (e.grads[a][0] * e.grads[b][0] + e.grads[a][1] * e.grads[b][1]);
        }
    }
    k
}

fn element_mass(e: &Element) -> [[f64; 3]; 3] {
    let mut m = [[e.area / 12.0; 3]; 3];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = e.area / 6.0;
    }
    m
}

/// `∫ κ² φ_a φ_b` for κ² linear on the element with the given vertex values,
/// using `∫ φ_a φ_b φ_c = 2|T| n_a! n_b! n_c! / 5!`.
fn element_weighted_mass(e: &Element, kv: [C64; 3]) -> [[C64; 3]; 3] {
    let mut m = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let mut s = C64::new(0.0, 0.0);
            for (c, &kc) in kv.iter().enumerate() {
                let w = if a == b && b == c {
                    e.area / 10.0
                } else if a == b || a == c || b == c {
                    e.area / 30.0
                } else {
                    e.area / 60.0
                };
                s += kc * w;
            }
            m[a][b] = s;
        }
    }
    m
}

/// Assembled forms over the closure of one subdomain (or of the whole mesh),
/// ordered interior dofs first and boundary dofs last.
#[derive(Debug, Clone)]
pub struct LocalForms {
    pub k: CsMat<f64>,
    pub m: CsMat<f64>,
    pub mk: CsMat<C64>,
    /// `μ⁻¹K − M_κ`, complex symmetric.
    pub a: CsMat<C64>,
    /// `K + γ⁻²M`, real SPD.
    pub h: CsMat<f64>,
    pub n_interior: usize,
}

impl LocalForms {
    pub fn dim(&self) -> usize {
        self.k.rows()
    }

    pub fn n_boundary(&self) -> usize {
        self.dim() - self.n_interior
    }
}

fn assemble_forms(
    mesh: &Mesh,
    triangles: &[usize],
    index: impl Fn(usize) -> usize,
    n: usize,
    n_interior: usize,
    coeffs: &Coefficients,
) -> Result<LocalForms> {
    let mut k = TriMat::new((n, n));
    let mut m = TriMat::new((n, n));
    let mut mk = TriMat::new((n, n));
    for &t in triangles {
        let e = element(mesh, t)?;
        let ke = element_stiffness(&e);
        let me = element_mass(&e);
        let mke = match &coeffs.kappa_sq {
            KappaSq::Constant(c) => me.map(|row| row.map(|x| c * x)),
            KappaSq::Affine { .. } => {
                element_weighted_mass(&e, mesh.triangles[t].map(|v| coeffs.kappa_sq.eval(mesh.vertices[v])))
            }
            KappaSq::Function(f) => {
                let c = f(mesh.centroid(t));
                me.map(|row| row.map(|x| c * x))
            }
        };
        let dofs = mesh.triangles[t].map(&index);
        for a in 0..3 {
            for b in 0..3 {
                k.add_triplet(dofs[a], dofs[b], ke[a][b]);
                m.add_triplet(dofs[a], dofs[b], me[a][b]);
                mk.add_triplet(dofs[a], dofs[b], mke[a][b]);
            }
        }
    }
    let k: CsMat<f64> = k.to_csr();
    let m: CsMat<f64> = m.to_csr();
    let mk: CsMat<C64> = mk.to_csr();
    let inv_mu = coeffs.mu.inv();
    let kc = k.map(|&x| inv_mu * x);
    let a = &kc - &mk;
    let g2 = coeffs.gamma.powi(-2);
    let h = &k + &m.map(|&x| g2 * x);
    Ok(LocalForms {
        k,
        m,
        mk,
        a,
        h,
        n_interior,
    })
}

pub fn assemble_subdomain(mesh: &Mesh, partition: &Partition, j: usize, coeffs: &Coefficients) -> Result<LocalForms> {
    let n = partition.n_local(j);
    assemble_forms(
        mesh,
        &partition.triangles[j],
        |v| partition.local_index(j, v).expect("vertex of a subdomain triangle"),
        n,
        partition.n_interior(j),
        coeffs,
    )
}

/// Forms over all mesh vertices in global vertex order (`n_interior = 0`).
pub fn assemble_global(mesh: &Mesh, coeffs: &Coefficients) -> Result<LocalForms> {
    let all: Vec<usize> = (0..mesh.triangles.len()).collect();
    assemble_forms(mesh, &all, |v| v, mesh.n_vertices(), 0, coeffs)
}

/// `∫ f φ` on every triangle of `triangles` with the one-point centroid rule.
fn load_over(mesh: &Mesh, triangles: &[usize], index: impl Fn(usize) -> usize, n: usize, f: &dyn Fn([f64; 2]) -> C64) -> Array1<C64> {
    let mut l = Array1::zeros(n);
    for &t in triangles {
        let w = f(mesh.centroid(t)) * (mesh.signed_area(t) / 3.0);
        for v in mesh.triangles[t] {
            l[index(v)] += w;
        }
    }
    l
}

/// Volume source functional per subdomain, in local ordering.
pub fn assemble_load(mesh: &Mesh, partition: &Partition, f: &dyn Fn([f64; 2]) -> C64) -> Vec<Array1<C64>> {
    (0..partition.n_subdomains())
        .map(|j| {
            load_over(
                mesh,
                &partition.triangles[j],
                |v| partition.local_index(j, v).expect("vertex of a subdomain triangle"),
                partition.n_local(j),
                f,
            )
        })
        .collect()
}

pub fn assemble_global_load(mesh: &Mesh, f: &dyn Fn([f64; 2]) -> C64) -> Array1<C64> {
    let all: Vec<usize> = (0..mesh.triangles.len()).collect();
    load_over(mesh, &all, |v| v, mesh.n_vertices(), f)
}

fn gamma_position(gamma_dofs: &[usize], v: usize) -> usize {
    gamma_dofs.binary_search(&v).expect("boundary vertex in the Γ list")
}

/// Exact P1 mass matrix of the boundary curve on Γ dofs.
pub fn boundary_mass(mesh: &Mesh, gamma_dofs: &[usize]) -> Array2<f64> {
    let n = gamma_dofs.len();
    let mut m = Array2::zeros((n, n));
    for e in &mesh.boundary_edges {
        let h = mesh.edge_length(e);
        let [a, b] = e.vertices.map(|v| gamma_position(gamma_dofs, v));
        m[[a, a]] += h / 3.0;
        m[[b, b]] += h / 3.0;
        m[[a, b]] += h / 6.0;
        m[[b, a]] += h / 6.0;
    }
    m
}

/// P1 stiffness matrix of the boundary curve (tangential derivatives).
pub fn boundary_stiffness(mesh: &Mesh, gamma_dofs: &[usize]) -> Array2<f64> {
    let n = gamma_dofs.len();
    let mut k = Array2::zeros((n, n));
    for e in &mesh.boundary_edges {
        let h = mesh.edge_length(e);
        let [a, b] = e.vertices.map(|v| gamma_position(gamma_dofs, v));
        k[[a, a]] += 1.0 / h;
        k[[b, b]] += 1.0 / h;
        k[[a, b]] -= 1.0 / h;
        k[[b, a]] -= 1.0 / h;
    }
    k
}

/// `∫_e g φ` over boundary edges carrying `tag` (all edges if `None`), with
/// the midpoint rule; result indexed by Γ position.
pub fn boundary_load(mesh: &Mesh, gamma_dofs: &[usize], g: &dyn Fn([f64; 2]) -> C64, tag: Option<EdgeTag>) -> Array1<C64> {
    let mut l = Array1::zeros(gamma_dofs.len());
    for e in mesh.boundary_edges.iter().filter(|e| tag.is_none_or(|t| e.tag == t)) {
        let w = g(mesh.edge_midpoint(e)) * (0.5 * mesh.edge_length(e));
        for v in e.vertices {
            l[gamma_position(gamma_dofs, v)] += w;
        }
    }
    l
}

/// `R(u, p) = ((u|_Γ, p), u|_{Ω_1}, …, u|_{Ω_J})`.
pub fn restriction_apply(partition: &Partition, u: &Array1<C64>, p: &Array1<C64>) -> Result<VolumeTuple> {
    let nv = partition
        .boundary_dofs
        .iter()
        .chain(partition.interior_dofs.iter())
        .flatten()
        .max()
        .map_or(0, |m| m + 1);
    if u.len() < nv || p.len() != partition.gamma_dofs.len() {
        return Err(Error::Dimension(format!(
            "restriction expects a volume vector of length >= {nv} and a Γ vector of length {}, got {} and {}",
            partition.gamma_dofs.len(),
            u.len(),
            p.len()
        )));
    }
    Ok(VolumeTuple {
        gamma_alpha: partition.gamma_dofs.iter().map(|&v| u[v]).collect(),
        gamma_p: p.clone(),
        omega: (0..partition.n_subdomains())
            .map(|j| partition.local_dofs(j).iter().map(|&v| u[v]).collect())
            .collect(),
    })
}

/// `R*`: sums a dual tuple back into a global dual vector of length
/// `n_vertices + |Γ|` (volume entries followed by the p-slot on Γ).
pub fn restriction_adjoint(partition: &Partition, n_vertices: usize, d: &VolumeTuple) -> Result<Array1<C64>> {
    let ng = partition.gamma_dofs.len();
    if d.gamma_alpha.len() != ng || d.gamma_p.len() != ng || d.omega.len() != partition.n_subdomains() {
        return Err(Error::Dimension("dual tuple does not match the partition".into()));
    }
    let mut out = Array1::zeros(n_vertices + ng);
    for (k, &v) in partition.gamma_dofs.iter().enumerate() {
        out[v] += d.gamma_alpha[k];
        out[n_vertices + k] += d.gamma_p[k];
    }
    for (j, block) in d.omega.iter().enumerate() {
        if block.len() != partition.n_local(j) {
            return Err(Error::Dimension(format!("subdomain {j} block has wrong length")));
        }
        for (x, v) in block.iter().zip(partition.local_dofs(j)) {
            out[v] += *x;
        }
    }
    Ok(out)
}

/// The monolithic operator `A_{Ω×Γ}` over (vertex values) ⊕ (p on Γ dofs).
#[derive(Debug, Clone)]
pub struct PrimarySystem {
    pub matrix: CsMat<C64>,
    pub load: Array1<C64>,
    pub n_volume: usize,
}

impl PrimarySystem {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// Assembles `A_{Ω×Γ}` directly from the global forms and the boundary
/// operator, independently of any partition.
pub fn assemble_primary(
    mesh: &Mesh,
    gamma_dofs: &[usize],
    coeffs: &Coefficients,
    bc: &BoundaryCondition,
    source: &dyn Fn([f64; 2]) -> C64,
) -> Result<PrimarySystem> {
    let global = assemble_global(mesh, coeffs)?;
    let nv = mesh.n_vertices();
    let ng = gamma_dofs.len();
    let n = nv + ng;
    let mut tri = TriMat::new((n, n));
    for (v, (i, j)) in global.a.iter() {
        tri.add_triplet(i, j, *v);
    }
    let blocks = bc.block_matrices();
    let gi = |k: usize| gamma_dofs[k];
    for r in 0..ng {
        for c in 0..ng {
            let entries = [
                (gi(r), gi(c), blocks.alpha_alpha[[r, c]]),
                (gi(r), nv + c, blocks.alpha_p[[r, c]]),
                (nv + r, gi(c), blocks.p_alpha[[r, c]]),
                (nv + r, nv + c, blocks.p_p[[r, c]]),
            ];
            for (i, j, v) in entries {
                if v != C64::new(0.0, 0.0) {
                    tri.add_triplet(i, j, v);
                }
            }
        }
    }
    let mut load = Array1::zeros(n);
    let lv = assemble_global_load(mesh, source);
    load.slice_mut(ndarray::s![..nv]).assign(&lv);
    let lg = bc.load();
    for k in 0..ng {
        load[gi(k)] += lg.alpha[k];
        load[nv + k] = lg.p[k];
    }
    Ok(PrimarySystem {
        matrix: tri.to_csr(),
        load,
        n_volume: nv,
    })
}

/// Seven-point degree-5 rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
const QUAD7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const W1: f64 = 0.132_394_152_788_506;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// `(‖u_h − u‖_{L²}, ‖u‖_{L²})` for a P1 field `u_h` at the mesh vertices.
pub fn l2_error(mesh: &Mesh, u_h: &Array1<C64>, exact: &dyn Fn([f64; 2]) -> C64) -> (f64, f64) {
    let (mut err, mut norm) = (0.0, 0.0);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t).abs();
        let p = tri.map(|v| mesh.vertices[v]);
        for (lam, w) in QUAD7 {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let uh = lam[0] * u_h[tri[0]] + lam[1] * u_h[tri[1]] + lam[2] * u_h[tri[2]];
            let ue = exact(x);
            err += w * area * (uh - ue).norm_sqr();
            norm += w * area * ue.norm_sqr();
        }
    }
    (err.sqrt(), norm.sqrt())
}
