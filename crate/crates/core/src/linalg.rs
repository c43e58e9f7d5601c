//! Thin wrappers over LAPACK for the dense kernels used everywhere else:
//! real Cholesky factors (impedance blocks, Gram matrices) and complex LU
//! with a reciprocal condition estimate (local impedance problems).

use lax::layout::MatrixLayout;
use lax::{Lapack, Pivot, Transpose};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Cholesky, Diag, EigValsh, SolveTriangular, SVD, UPLO};
use num_complex::Complex64;
use sprs::CsMat;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Lower Cholesky factor `A = L Lᵀ` of a real symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: Array2<f64>,
    // Column-major copy of `Lᵀ`; LAPACK's triangular solves copy row-major
    // operands on every call.
    lt: Array2<f64>,
}

fn fortran(a: ArrayView2<f64>) -> Array2<f64> {
    let mut f = Array2::zeros(a.raw_dim().f());
    f.assign(&a);
    f
}

impl SpdFactor {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "Cholesky of a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.is_empty() {
            return Ok(SpdFactor { l: a.clone(), lt: a.clone() });
        }
        let l = a
            .cholesky(UPLO::Lower)
            .map_err(|e| Error::Linalg(format!("matrix is not positive definite: {e}")))?;
        Ok(SpdFactor { lt: fortran(l.t()), l: fortran(l.view()) })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.l
    }

    /// `L⁻¹ B` for a real right-hand side block.
    pub fn lower_solve_real(&self, b: &Array2<f64>) -> Array2<f64> {
        if self.dim() == 0 {
            return b.clone();
        }
        self.l
            .solve_triangular(UPLO::Lower, Diag::NonUnit, b)
            .expect("triangular solve with a nonsingular factor")
    }

    /// `L⁻ᵀ B` for a real right-hand side block.
    pub fn upper_solve_real(&self, b: &Array2<f64>) -> Array2<f64> {
        if self.dim() == 0 {
            return b.clone();
        }
        self.lt
            .solve_triangular(UPLO::Upper, Diag::NonUnit, b)
            .expect("triangular solve with a nonsingular factor")
    }

    /// `A⁻¹ B` for a real right-hand side block.
    pub fn solve_real(&self, b: &Array2<f64>) -> Array2<f64> {
        self.upper_solve_real(&self.lower_solve_real(b))
    }

    pub fn solve(&self, b: ArrayView1<C64>) -> Array1<C64> {
        let r = split(b);
        join(&self.solve_real(&r))
    }

    /// `L⁻¹ b`.
    pub fn lower_solve(&self, b: ArrayView1<C64>) -> Array1<C64> {
        join(&self.lower_solve_real(&split(b)))
    }

    /// `L⁻ᵀ b`.
    pub fn upper_solve(&self, b: ArrayView1<C64>) -> Array1<C64> {
        join(&self.upper_solve_real(&split(b)))
    }

    /// `L w`.
    pub fn lower_apply(&self, w: ArrayView1<C64>) -> Array1<C64> {
        real_matvec(self.l.view(), w)
    }

    /// `Lᵀ w`.
    pub fn upper_apply(&self, w: ArrayView1<C64>) -> Array1<C64> {
        real_matvec(self.lt.view(), w)
    }
}

fn split(b: ArrayView1<C64>) -> Array2<f64> {
    let mut r = Array2::zeros((b.len(), 2));
    for (i, z) in b.iter().enumerate() {
        r[[i, 0]] = z.re;
        r[[i, 1]] = z.im;
    }
    r
}

fn join(r: &Array2<f64>) -> Array1<C64> {
    r.axis_iter(Axis(0)).map(|row| C64::new(row[0], row[1])).collect()
}

/// Real matrix times complex vector.
pub fn real_matvec(a: ArrayView2<f64>, x: ArrayView1<C64>) -> Array1<C64> {
    let re = x.mapv(|z| z.re);
    let im = x.mapv(|z| z.im);
    let yr = a.dot(&re);
    let yi = a.dot(&im);
    yr.iter().zip(yi.iter()).map(|(&r, &i)| C64::new(r, i)).collect()
}

/// Complex matrix times real matrix.
pub fn complex_times_real(a: &Array2<C64>, b: &Array2<f64>) -> Array2<C64> {
    let re = a.mapv(|z| z.re).dot(b);
    let im = a.mapv(|z| z.im).dot(b);
    ndarray::Zip::from(&re).and(&im).map_collect(|&r, &i| C64::new(r, i))
}

/// Real matrix times complex matrix.
pub fn real_times_complex(a: &Array2<f64>, b: &Array2<C64>) -> Array2<C64> {
    let re = a.dot(&b.mapv(|z| z.re));
    let im = a.dot(&b.mapv(|z| z.im));
    ndarray::Zip::from(&re).and(&im).map_collect(|&r, &i| C64::new(r, i))
}

pub fn to_complex(a: &Array2<f64>) -> Array2<C64> {
    a.mapv(|x| C64::new(x, 0.0))
}

/// LU factorization with partial pivoting of a dense complex matrix, together
/// with the LAPACK reciprocal condition estimate in the infinity norm.
#[derive(Debug, Clone)]
pub struct ComplexLu {
    n: usize,
    lu: Vec<C64>,
    ipiv: Pivot,
    rcond: f64,
}

impl ComplexLu {
    /// Factorizes `a`. An exactly singular matrix is not an error here; it
    /// reports `rcond = 0` and callers decide what to do with it.
    pub fn new(a: &Array2<C64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("LU of a {}x{} matrix", n, a.ncols())));
        }
        if n == 0 {
            return Ok(ComplexLu {
                n,
                lu: Vec::new(),
                ipiv: Vec::new(),
                rcond: 1.0,
            });
        }
        let anorm = a
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu: Vec<C64> = a.iter().copied().collect();
        let layout = Self::layout_for(n);
        match C64::lu(layout, &mut lu) {
            Ok(ipiv) => {
                let rcond = C64::rcond(layout, &lu, anorm)
                    .map_err(|e| Error::Linalg(e.to_string()))?;
                Ok(ComplexLu { n, lu, ipiv, rcond })
            }
            Err(lax::error::Error::LapackComputationalFailure { .. }) => Ok(ComplexLu {
                n,
                lu,
                ipiv: Vec::new(),
                rcond: 0.0,
            }),
            Err(e) => Err(Error::Linalg(e.to_string())),
        }
    }

    fn layout_for(n: usize) -> MatrixLayout {
        MatrixLayout::C {
            row: n as i32,
            lda: n as i32,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn is_singular(&self) -> bool {
        self.ipiv.len() != self.n
    }

    fn solve_with(&self, t: Transpose, b: ArrayView1<C64>) -> Array1<C64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        assert!(!self.is_singular(), "solve with an exactly singular LU factor");
        let mut x: Vec<C64> = b.to_vec();
        if self.n > 0 {
            C64::solve(Self::layout_for(self.n), t, &self.lu, &self.ipiv, &mut x)
                .expect("LU back substitution");
        }
        Array1::from(x)
    }

    pub fn solve(&self, b: ArrayView1<C64>) -> Array1<C64> {
        self.solve_with(Transpose::No, b)
    }

    /// Solves with the conjugate transpose `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: ArrayView1<C64>) -> Array1<C64> {
        self.solve_with(Transpose::Hermite, b)
    }
}

pub fn singular_values(a: &Array2<C64>) -> Result<Array1<f64>> {
    if a.is_empty() {
        return Ok(Array1::zeros(0));
    }
    let (_, s, _) = a.svd(false, false)?;
    Ok(s)
}

pub fn singular_values_real(a: &Array2<f64>) -> Result<Array1<f64>> {
    if a.is_empty() {
        return Ok(Array1::zeros(0));
    }
    let (_, s, _) = a.svd(false, false)?;
    Ok(s)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &Array2<C64>) -> Result<Array1<f64>> {
    Ok(a.eigvalsh(UPLO::Lower)?)
}

/// Eigenvalues of a real symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Result<Array1<f64>> {
    Ok(a.eigvalsh(UPLO::Lower)?)
}

/// Generalized eigenvalues of the symmetric pencil `(K, M)` with `M` SPD.
pub fn generalized_eigenvalues(k: &Array2<f64>, m: &Array2<f64>) -> Result<Array1<f64>> {
    let f = SpdFactor::new(m)?;
    let x = f.lower_solve_real(k);
    let c = f.lower_solve_real(&x.t().to_owned());
    let c = (&c + &c.t()) * 0.5;
    symmetric_eigenvalues(&c)
}

pub fn hermitian_part(a: &Array2<C64>) -> Array2<C64> {
    let ah = a.t().mapv(|z| z.conj());
    (a + &ah) * C64::new(0.5, 0.0)
}

pub fn norm2(x: ArrayView1<C64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Unconjugated dot product.
pub fn dotu(x: ArrayView1<C64>, y: ArrayView1<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// Conjugated dot product `xᴴ y`.
pub fn dotc(x: ArrayView1<C64>, y: ArrayView1<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn dense_real(a: &CsMat<f64>) -> Array2<f64> {
    a.to_dense()
}

pub fn dense_complex(a: &CsMat<C64>) -> Array2<C64> {
    a.to_dense()
}

/// Sparse complex matrix times complex vector.
pub fn sp_matvec(a: &CsMat<C64>, x: ArrayView1<C64>) -> Array1<C64> {
    let mut y = Array1::zeros(a.rows());
    for (v, (i, j)) in a.iter() {
        y[i] += v * x[j];
    }
    y
}

/// Sparse real matrix times complex vector.
pub fn sp_matvec_real(a: &CsMat<f64>, x: ArrayView1<C64>) -> Array1<C64> {
    let mut y = Array1::zeros(a.rows());
    for (v, (i, j)) in a.iter() {
        y[i] += x[j] * *v;
    }
    y
}

/// Maximum of `|a_ij - b_ij|` relative to the largest entry of `b`.
pub fn max_rel_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}
