//! Boundary operators `A_Γ` acting on pairs `(α, p)` of a boundary trace and
//! a boundary flux, their impedance inverses `(A_Γ − iB_Γ*T_ΓB_Γ)⁻¹` in closed
//! form, the boundary scattering blocks `S_Γ` and the mixed projector Θ.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{real_matvec, to_complex, SpdFactor, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Dirichlet,
    Neumann,
    Robin,
    Mixed,
}

impl BcKind {
    pub const ALL: [BcKind; 4] = [BcKind::Dirichlet, BcKind::Neumann, BcKind::Robin, BcKind::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            BcKind::Dirichlet => "dirichlet",
            BcKind::Neumann => "neumann",
            BcKind::Robin => "robin",
            BcKind::Mixed => "mixed",
        }
    }
}

/// A pair of Γ vectors: `(α, p)` for unknowns, `(α-slot, p-slot)` for duals.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPair {
    pub alpha: Array1<C64>,
    pub p: Array1<C64>,
}

impl GammaPair {
    pub fn zeros(n: usize) -> Self {
        GammaPair {
            alpha: Array1::zeros(n),
            p: Array1::zeros(n),
        }
    }
}

/// The four Γ×Γ blocks of `A_Γ` in the splitting `(α, p)`.
#[derive(Debug, Clone)]
pub struct GammaBlocks {
    pub alpha_alpha: Array2<C64>,
    pub alpha_p: Array2<C64>,
    pub p_alpha: Array2<C64>,
    pub p_p: Array2<C64>,
}

#[derive(Debug, Clone)]
enum Variant {
    Dirichlet,
    Neumann,
    Robin { lambda: Array2<f64>, lambda_plus_t: SpdFactor },
    Mixed { theta: Array2<f64>, dirichlet_mask: Vec<bool> },
}

/// Boundary data of a problem: Dirichlet values at Γ dofs and the assembled
/// Neumann/Robin boundary functional.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub g_d: Array1<C64>,
    pub g_n_load: Array1<C64>,
}

impl BoundaryData {
    pub fn zero(n: usize) -> Self {
        BoundaryData {
            g_d: Array1::zeros(n),
            g_n_load: Array1::zeros(n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryCondition {
    t: Array2<f64>,
    t_factor: SpdFactor,
    variant: Variant,
    load: GammaPair,
}

impl BoundaryCondition {
    pub fn dirichlet(t: Array2<f64>, data: &BoundaryData) -> Result<Self> {
        let load = GammaPair {
            alpha: Array1::zeros(t.nrows()),
            p: data.g_d.clone(),
        };
        Self::build(t, Variant::Dirichlet, load)
    }

    pub fn neumann(t: Array2<f64>, data: &BoundaryData) -> Result<Self> {
        let load = GammaPair {
            alpha: data.g_n_load.clone(),
            p: Array1::zeros(t.nrows()),
        };
        Self::build(t, Variant::Neumann, load)
    }

    /// Robin condition with an SPD impedance `Λ` (typically `k` times the
    /// boundary mass matrix).
    pub fn robin(t: Array2<f64>, lambda: Array2<f64>, data: &BoundaryData) -> Result<Self> {
        let lambda_plus_t = SpdFactor::new(&(&lambda + &t)).map_err(|_| Error::Assumption {
            assumption: "(A3)",
            detail: "Lambda + T_Gamma is not positive definite; the Robin impedance must be positive".into(),
        })?;
        let min_eig = crate::linalg::symmetric_eigenvalues(&((&lambda + &lambda.t()) * 0.5))?[0];
        if !(min_eig > 0.0) {
            return Err(Error::Assumption {
                assumption: "(A3)",
                detail: format!("Robin impedance has smallest eigenvalue {min_eig:e} <= 0"),
            });
        }
        let load = GammaPair {
            alpha: data.g_n_load.clone(),
            p: Array1::zeros(t.nrows()),
        };
        Self::build(t, Variant::Robin { lambda, lambda_plus_t }, load)
    }

    /// Mixed condition. `dirichlet_mask[k]` marks Γ dofs on the Dirichlet
    /// part; `data.g_n_load` must already be restricted to Neumann edges.
    pub fn mixed(t: Array2<f64>, dirichlet_mask: Vec<bool>, data: &BoundaryData) -> Result<Self> {
        let theta = mixed_projector(&t, &dirichlet_mask)?;
        let gd: Array1<C64> = data
            .g_d
            .iter()
            .zip(&dirichlet_mask)
            .map(|(&g, &d)| if d { g } else { C64::new(0.0, 0.0) })
            .collect();
        let load = GammaPair {
            alpha: data.g_n_load.clone(),
            p: real_matvec(theta.t(), gd.view()),
        };
        Self::build(t, Variant::Mixed { theta, dirichlet_mask }, load)
    }

    fn build(t: Array2<f64>, variant: Variant, load: GammaPair) -> Result<Self> {
        let t_factor = SpdFactor::new(&t)?;
        Ok(BoundaryCondition {
            t,
            t_factor,
            variant,
            load,
        })
    }

    pub fn kind(&self) -> BcKind {
        match self.variant {
            Variant::Dirichlet => BcKind::Dirichlet,
            Variant::Neumann => BcKind::Neumann,
            Variant::Robin { .. } => BcKind::Robin,
            Variant::Mixed { .. } => BcKind::Mixed,
        }
    }

    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn t_gamma(&self) -> &Array2<f64> {
        &self.t
    }

    pub fn theta(&self) -> Option<&Array2<f64>> {
        match &self.variant {
            Variant::Mixed { theta, .. } => Some(theta),
            _ => None,
        }
    }

    pub fn dirichlet_mask(&self) -> Option<&[bool]> {
        match &self.variant {
            Variant::Mixed { dirichlet_mask, .. } => Some(dirichlet_mask),
            _ => None,
        }
    }

    pub fn lambda(&self) -> Option<&Array2<f64>> {
        match &self.variant {
            Variant::Robin { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    /// The Γ component `ℓ_Γ` of the right-hand side.
    pub fn load(&self) -> &GammaPair {
        &self.load
    }

    fn t_mul(&self, x: ArrayView1<C64>) -> Array1<C64> {
        real_matvec(self.t.view(), x)
    }

    fn t_inv(&self, x: ArrayView1<C64>) -> Array1<C64> {
        self.t_factor.solve(x)
    }

    /// `A_Γ(α, p)` as a dual pair.
    pub fn apply(&self, u: &GammaPair) -> GammaPair {
        match &self.variant {
            Variant::Dirichlet => GammaPair {
                alpha: u.p.clone(),
                p: u.alpha.clone(),
            },
            Variant::Neumann => GammaPair {
                alpha: Array1::zeros(self.n()),
                p: self.t_inv(u.p.view()),
            },
            Variant::Robin { lambda, .. } => GammaPair {
                alpha: real_matvec(lambda.view(), u.alpha.view()) * (-I),
                p: self.t_inv(u.p.view()),
            },
            Variant::Mixed { theta, .. } => {
                let tp = real_matvec(theta.view(), u.p.view());
                GammaPair {
                    alpha: tp.clone(),
                    p: real_matvec(theta.t(), u.alpha.view()) + self.t_inv((&u.p - &tp).view()),
                }
            }
        }
    }

    /// `(A_Γ − iB_Γ*T_ΓB_Γ)(α, p)`.
    pub fn apply_impedance(&self, u: &GammaPair) -> GammaPair {
        let mut out = self.apply(u);
        out.alpha = out.alpha - self.t_mul(u.alpha.view()) * I;
        out
    }

    /// Solves `(A_Γ − iB_Γ*T_ΓB_Γ)(α, p) = (x, y)` in closed form.
    pub fn impedance_inverse(&self, rhs: &GammaPair) -> GammaPair {
        let (x, y) = (&rhs.alpha, &rhs.p);
        match &self.variant {
            Variant::Dirichlet => GammaPair {
                alpha: y.clone(),
                p: x + &(self.t_mul(y.view()) * I),
            },
            Variant::Neumann => GammaPair {
                alpha: self.t_inv(x.view()) * I,
                p: self.t_mul(y.view()),
            },
            Variant::Robin { lambda_plus_t, .. } => GammaPair {
                alpha: lambda_plus_t.solve(x.view()) * I,
                p: self.t_mul(y.view()),
            },
            Variant::Mixed { theta, .. } => {
                let thx = real_matvec(theta.view(), x.view());
                let ty = self.t_mul(y.view());
                let th_ty = real_matvec(theta.view(), ty.view());
                GammaPair {
                    alpha: real_matvec(theta.t(), y.view()) + self.t_inv((x - &thx).view()) * I,
                    p: (&ty - &th_ty) + th_ty * I + thx,
                }
            }
        }
    }

    /// `S_Γ q` from the closed forms.
    pub fn scattering(&self, q: ArrayView1<C64>) -> Array1<C64> {
        match &self.variant {
            Variant::Dirichlet => q.to_owned(),
            Variant::Neumann => -q.to_owned(),
            Variant::Robin { lambda, lambda_plus_t } => {
                let y = lambda_plus_t.solve(q);
                real_matvec(lambda.view(), y.view()) - self.t_mul(y.view())
            }
            Variant::Mixed { theta, .. } => real_matvec(theta.view(), q) * 2.0 - q,
        }
    }

    /// `S_Γ q = q + 2iT_Γ α` where `(α, p) = (A_Γ − iB_Γ*T_ΓB_Γ)⁻¹(q, 0)`.
    pub fn scattering_generic(&self, q: ArrayView1<C64>) -> Array1<C64> {
        let u = self.impedance_inverse(&GammaPair {
            alpha: q.to_owned(),
            p: Array1::zeros(self.n()),
        });
        &q + &(self.t_mul(u.alpha.view()) * (I * 2.0))
    }

    /// Dense blocks of `A_Γ`.
    pub fn block_matrices(&self) -> GammaBlocks {
        let n = self.n();
        let zero = Array2::<C64>::zeros((n, n));
        let eye = to_complex(&Array2::eye(n));
        let tinv = to_complex(&self.t_factor.solve_real(&Array2::eye(n)));
        match &self.variant {
            Variant::Dirichlet => GammaBlocks {
                alpha_alpha: zero.clone(),
                alpha_p: eye.clone(),
                p_alpha: eye,
                p_p: zero,
            },
            Variant::Neumann => GammaBlocks {
                alpha_alpha: zero.clone(),
                alpha_p: zero.clone(),
                p_alpha: zero,
                p_p: tinv,
            },
            Variant::Robin { lambda, .. } => GammaBlocks {
                alpha_alpha: to_complex(lambda) * (-I),
                alpha_p: zero.clone(),
                p_alpha: zero,
                p_p: tinv,
            },
            Variant::Mixed { theta, .. } => {
                let th = to_complex(theta);
                let id_minus = &eye - &th;
                GammaBlocks {
                    alpha_alpha: zero,
                    alpha_p: th.clone(),
                    p_alpha: th.t().to_owned(),
                    p_p: tinv.dot(&id_minus),
                }
            }
        }
    }

    /// The same condition with `A_Γ` replaced by its (unconjugated) transpose.
    /// All four operators are symmetric, so this is a copy.
    pub fn transposed(&self) -> Self {
        self.clone()
    }
}

/// `Θ = E_D (E_Dᵀ T⁻¹ E_D)⁻¹ E_Dᵀ T⁻¹`: the `T⁻¹`-orthogonal projector onto
/// dual vectors supported on the marked dofs.
pub fn mixed_projector(t: &Array2<f64>, dirichlet_mask: &[bool]) -> Result<Array2<f64>> {
    let n = t.nrows();
    if dirichlet_mask.len() != n {
        return Err(Error::Dimension(format!(
            "Dirichlet mask has {} entries for {} boundary dofs",
            dirichlet_mask.len(),
            n
        )));
    }
    let d: Vec<usize> = (0..n).filter(|&k| dirichlet_mask[k]).collect();
    // The limits are the Neumann (Θ = 0) and Dirichlet (Θ = Id) conditions.
    if d.is_empty() {
        return Ok(Array2::zeros((n, n)));
    }
    if d.len() == n {
        return Ok(Array2::eye(n));
    }
    let tinv = SpdFactor::new(t)?.solve_real(&Array2::eye(n));
    let x = tinv.select(ndarray::Axis(1), &d);
    let s = x.select(ndarray::Axis(0), &d);
    let sol = SpdFactor::new(&s)?.solve_real(&x.t().to_owned());
    let mut theta = Array2::zeros((n, n));
    for (r, &k) in d.iter().enumerate() {
        theta.row_mut(k).assign(&sol.row(r));
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::random_vector;
    use crate::linalg::{dotu, norm2};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t_matrix() -> Array2<f64> {
        array![[3.0, -1.0, 0.0, -0.5], [-1.0, 3.0, -1.0, 0.0], [0.0, -1.0, 3.0, -1.0], [-0.5, 0.0, -1.0, 3.0]]
    }

    fn all_kinds() -> Vec<BoundaryCondition> {
        let t = t_matrix();
        let d = BoundaryData::zero(4);
        vec![
            BoundaryCondition::dirichlet(t.clone(), &d).unwrap(),
            BoundaryCondition::neumann(t.clone(), &d).unwrap(),
            BoundaryCondition::robin(t.clone(), Array2::eye(4) * 2.0, &d).unwrap(),
            BoundaryCondition::mixed(t, vec![true, true, false, false], &d).unwrap(),
        ]
    }

    #[test]
    fn dirichlet_swaps_pair() {
        let bc = &all_kinds()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = GammaPair {
            alpha: random_vector(&mut rng, 4),
            p: random_vector(&mut rng, 4),
        };
        let a = bc.apply(&u);
        assert_eq!((a.alpha, a.p), (u.p, u.alpha));
    }

    #[test]
    fn inverse_and_generic_scattering_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for bc in all_kinds() {
            for _ in 0..5 {
                let rhs = GammaPair {
                    alpha: random_vector(&mut rng, 4),
                    p: random_vector(&mut rng, 4),
                };
                let back = bc.apply_impedance(&bc.impedance_inverse(&rhs));
                let err = norm2((&back.alpha - &rhs.alpha).view()) + norm2((&back.p - &rhs.p).view());
                assert!(err < 1e-12, "{:?}: {err}", bc.kind());
                let q = random_vector(&mut rng, 4);
                let d = bc.scattering(q.view()) - bc.scattering_generic(q.view());
                assert!(norm2(d.view()) < 1e-12, "{:?}", bc.kind());
            }
        }
    }

    #[test]
    fn boundary_absorption_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for bc in all_kinds() {
            for _ in 0..50 {
                let u = GammaPair {
                    alpha: random_vector(&mut rng, 4),
                    p: random_vector(&mut rng, 4),
                };
                let a = bc.apply(&u);
                let e = dotu(a.alpha.view(), u.alpha.mapv(|z| z.conj()).view())
                    + dotu(a.p.view(), u.p.mapv(|z| z.conj()).view());
                let n2 = norm2(u.alpha.view()).powi(2) + norm2(u.p.view()).powi(2);
                assert!(e.im <= 1e-12 * n2);
            }
        }
    }

    #[test]
    fn projector_identities() {
        let t = t_matrix();
        let th = mixed_projector(&t, &[true, false, true, false]).unwrap();
        assert!((th.dot(&th) - &th).iter().all(|x| x.abs() < 1e-13));
        let tinv = SpdFactor::new(&t).unwrap().solve_real(&Array2::eye(4));
        let lhs = tinv.dot(&(Array2::eye(4) - &th));
        let imt = Array2::eye(4) - &th;
        let rhs = imt.t().dot(&tinv).dot(&imt);
        assert!((&lhs - &rhs).iter().all(|x| x.abs() < 1e-12));
        let q = array![1.0, 0.0, -2.0, 0.0];
        assert!((th.dot(&q) - &q).iter().all(|x| x.abs() < 1e-13));
        assert_eq!(mixed_projector(&t, &[false; 4]).unwrap(), Array2::<f64>::zeros((4, 4)));
        assert_eq!(mixed_projector(&t, &[true; 4]).unwrap(), Array2::<f64>::eye(4));
        assert!(mixed_projector(&t, &[true; 3]).is_err());
    }

    #[test]
    fn robin_with_lambda_equal_t_scatters_to_zero() {
        let t = t_matrix();
        let bc = BoundaryCondition::robin(t.clone(), t, &BoundaryData::zero(4)).unwrap();
        let q = array![C64::new(1.0, 2.0), C64::new(0.0, -1.0), C64::new(3.0, 0.0), C64::new(-1.0, 1.0)];
        assert!(norm2(bc.scattering(q.view()).view()) < 1e-13);
    }

    #[test]
    fn nonpositive_robin_impedance_rejected() {
        let err = BoundaryCondition::robin(t_matrix(), -Array2::eye(4), &BoundaryData::zero(4)).unwrap_err();
        assert!(err.to_string().contains("(A3)"));
    }
}
