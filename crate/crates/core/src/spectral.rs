//! Dense spectral analysis: inf-sup and coercivity constants of the whitened
//! skeleton operator, the inf-sup constant and continuity modulus of the
//! primary operator, kernel dimensions, and wavenumber sweeps.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eigh, SVD, UPLO};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_global, Coefficients};
use crate::error::{Error, Result};
use crate::fields::Dual;
use crate::geometry::Mesh;
use crate::linalg::{
    dense_complex, dense_real, sp_matvec, generalized_eigenvalues, hermitian_eigenvalues,
    hermitian_part, norm2, singular_values, ComplexLu, SpdFactor, C64,
};
use crate::problem::{Problem, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Largest skeleton dimension for which the dense operator is formed.
    pub dense_cap: usize,
    /// Largest primary dimension analysed with a full SVD; above it the
    /// extreme singular values come from Lanczos iterations.
    pub primary_dense_cap: usize,
    /// Singular values below `svd_threshold · σ_max` count as kernel.
    pub svd_threshold: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            dense_cap: 2000,
            primary_dense_cap: 2500,
            svd_threshold: 1e-8,
        }
    }
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(Error::CapExceeded { dim, cap })
    } else {
        Ok(())
    }
}

/// Builds a dense matrix column by column from a linear map on whitened
/// coordinates.
fn dense_from_map(n: usize, f: impl Fn(&Array1<C64>) -> Array1<C64>) -> Array2<C64> {
    let mut m = Array2::zeros((n, n));
    let mut e = Array1::<C64>::zeros(n);
    for k in 0..n {
        e[k] = C64::new(1.0, 0.0);
        m.column_mut(k).assign(&f(&e));
        e[k] = C64::new(0.0, 0.0);
    }
    m
}

/// Whitened `L⁻¹(Id + ΠS)L`.
pub fn dense_skeleton_operator(problem: &Problem, cap: usize) -> Result<Array2<C64>> {
    let n = problem.layout().len();
    check_cap(n, cap)?;
    let t = &problem.impedance;
    Ok(dense_from_map(n, |w| t.whiten(&problem.skeleton_apply(&t.unwhiten(w)))))
}

/// Whitened `L⁻¹ Π L`.
pub fn dense_exchange(problem: &Problem, cap: usize) -> Result<Array2<C64>> {
    let n = problem.layout().len();
    check_cap(n, cap)?;
    let t = &problem.impedance;
    Ok(dense_from_map(n, |w| t.whiten(&problem.exchange_apply(&t.unwhiten(w)))))
}

/// Whitened `L⁻¹ S L`.
pub fn dense_scattering(problem: &Problem, cap: usize) -> Result<Array2<C64>> {
    let n = problem.layout().len();
    check_cap(n, cap)?;
    let t = &problem.impedance;
    Ok(dense_from_map(n, |w| t.whiten(&problem.scattering_apply(&t.unwhiten(w)))))
}

pub fn kernel_dim(sv: &Array1<f64>, threshold: f64) -> usize {
    let smax = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s < threshold * smax).count()
}

fn min_max(sv: &Array1<f64>) -> (f64, f64) {
    (
        sv.iter().copied().fold(f64::INFINITY, f64::min),
        sv.iter().copied().fold(0.0, f64::max),
    )
}

/// Smallest eigenvalue of the Hermitian part `(M + Mᴴ)/2`.
pub fn coercivity_constant(m: &Array2<C64>) -> Result<f64> {
    Ok(hermitian_eigenvalues(&hermitian_part(m))?[0])
}

/// Gram matrix of the norm on (volume) ⊕ (Γ flux): `K + γ⁻²M` with `T_Γ`
/// added on the Γ trace, and `T_Γ⁻¹` on the flux. It is the pull-back of the
/// multi-domain block norm through the restriction `R`.
pub fn primary_gram(problem: &Problem) -> Result<Array2<f64>> {
    let global = assemble_global(&problem.mesh, &Coefficients {
        kappa_sq: crate::assembly::KappaSq::Constant(C64::new(0.0, 0.0)),
        ..problem.spec.coeffs.clone()
    })?;
    let nv = problem.n_vertices();
    let ng = problem.n_gamma();
    let mut w = Array2::zeros((nv + ng, nv + ng));
    w.slice_mut(s![..nv, ..nv]).assign(&dense_real(&global.h));
    let tg = problem.impedance.block(0);
    let gd = &problem.partition.gamma_dofs;
    for r in 0..ng {
        for c in 0..ng {
            w[[gd[r], gd[c]]] += tg[[r, c]];
        }
    }
    let tinv = problem.impedance.factor(0).solve_real(&Array2::eye(ng));
    w.slice_mut(s![nv.., nv..]).assign(&((&tinv + &tinv.t()) * 0.5));
    Ok(w)
}

/// `L⁻¹ A L⁻ᵀ` for a real SPD Gram `W = L Lᵀ`.
fn whiten_operator(a: &Array2<C64>, w: &SpdFactor) -> Array2<C64> {
    let re = w.lower_solve_real(&a.mapv(|z| z.re));
    let im = w.lower_solve_real(&a.mapv(|z| z.im));
    let re = w.lower_solve_real(&re.t().to_owned()).t().to_owned();
    let im = w.lower_solve_real(&im.t().to_owned()).t().to_owned();
    ndarray::Zip::from(&re).and(&im).map_collect(|&r, &i| C64::new(r, i))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimaryAnalysis {
    pub dim: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kernel_dim: usize,
    pub kernel_dim_transpose: usize,
    /// Whether all singular values were computed (false: Lanczos estimates).
    pub dense: bool,
}

/// Inf-sup constant of `A_{Ω×Γ}` in the norm of [`primary_gram`].
pub fn primary_analysis(problem: &Problem, opts: &AnalysisOptions) -> Result<PrimaryAnalysis> {
    let sys = problem.primary_system()?;
    let w = SpdFactor::new(&primary_gram(problem)?)?;
    let n = sys.dim();
    if n <= opts.primary_dense_cap {
        let a = dense_complex(&sys.matrix);
        let b = whiten_operator(&a, &w);
        let sv = singular_values(&b)?;
        let svt = singular_values(&b.t().to_owned())?;
        let (smin, smax) = min_max(&sv);
        return Ok(PrimaryAnalysis {
            dim: n,
            sigma_min: smin,
            sigma_max: smax,
            kernel_dim: kernel_dim(&sv, opts.svd_threshold),
            kernel_dim_transpose: kernel_dim(&svt, opts.svd_threshold),
            dense: true,
        });
    }
    let lu = ComplexLu::new(&dense_complex(&sys.matrix))?;
    // B = L⁻¹ A L⁻ᵀ, B⁻¹ = Lᵀ A⁻¹ L
    let a = &sys.matrix;
    let ah = sys.matrix.transpose_view().map(|c| c.conj()).to_csr();
    let b_apply = |x: &Array1<C64>| w.lower_solve(sp_matvec(a, w.upper_solve(x.view()).view()).view());
    let bh_apply = |x: &Array1<C64>| w.lower_solve(sp_matvec(&ah, w.upper_solve(x.view()).view()).view());
    let smax = lanczos_largest(n, |x| bh_apply(&b_apply(x)), 60, 1e-10).sqrt();
    let binv = |x: &Array1<C64>| w.upper_apply(lu.solve(w.lower_apply(x.view()).view()).view());
    let binv_h = |x: &Array1<C64>| w.upper_apply(lu.solve_adjoint(w.lower_apply(x.view()).view()).view());
    let inv_max = lanczos_largest(n, |x| binv_h(&binv(x)), 80, 1e-10);
    let smin = 1.0 / inv_max.sqrt();
    let kd = usize::from(lu.rcond() == 0.0 || smin < opts.svd_threshold * smax);
    Ok(PrimaryAnalysis {
        dim: n,
        sigma_min: smin,
        sigma_max: smax,
        kernel_dim: kd,
        kernel_dim_transpose: kd,
        dense: false,
    })
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator by
/// Lanczos with full reorthogonalization and restarts from the Ritz vector.
pub fn lanczos_largest(n: usize, apply: impl Fn(&Array1<C64>) -> Array1<C64>, m: usize, tol: f64) -> f64 {
    let m = m.min(n).max(1);
    let mut start: Array1<C64> = (0..n)
        .map(|i| C64::new(1.0 + ((i * 7919) % 13) as f64 / 13.0, ((i * 104729) % 7) as f64 / 7.0))
        .collect();
    let mut theta = 0.0;
    for _ in 0..20 {
        let nrm = norm2(start.view());
        let mut v = vec![&start / C64::new(nrm, 0.0)];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..m {
            let mut w = apply(&v[j]);
            let a = crate::linalg::dotc(v[j].view(), w.view()).re;
            alpha.push(a);
            for _ in 0..2 {
                for vi in &v {
                    let h = crate::linalg::dotc(vi.view(), w.view());
                    w.scaled_add(-h, vi);
                }
            }
            let b = norm2(w.view());
            if j + 1 == m || b < 1e-14 * a.abs().max(1e-300) {
                beta.push(b);
                break;
            }
            beta.push(b);
            v.push(w / C64::new(b, 0.0));
        }
        let k = alpha.len();
        let mut tri = Array2::<f64>::zeros((k, k));
        for i in 0..k {
            tri[[i, i]] = alpha[i];
            if i + 1 < k {
                tri[[i, i + 1]] = beta[i];
                tri[[i + 1, i]] = beta[i];
            }
        }
        let (ev, vecs) = tri.eigh(UPLO::Lower).expect("tridiagonal eigensolve");
        theta = ev[k - 1];
        let y = vecs.column(k - 1);
        let resid = (beta[k - 1] * y[k - 1]).abs();
        let mut ritz = Array1::<C64>::zeros(n);
        for (i, vi) in v.iter().enumerate().take(k) {
            ritz.scaled_add(C64::new(y[i], 0.0), vi);
        }
        if resid <= tol * theta.abs() || k == n {
            break;
        }
        start = ritz;
    }
    theta
}

/// `max_b ‖A_b‖` over the blocks of the multi-domain operator, each in its
/// own norm: `diag(T_Γ, T_Γ⁻¹)` on the Γ pair and `K_j + γ⁻²M_j` per subdomain.
pub fn continuity_modulus(problem: &Problem) -> Result<f64> {
    let ng = problem.n_gamma();
    let blocks = problem.bc.block_matrices();
    let mut ag = Array2::<C64>::zeros((2 * ng, 2 * ng));
    ag.slice_mut(s![..ng, ..ng]).assign(&blocks.alpha_alpha);
    ag.slice_mut(s![..ng, ng..]).assign(&blocks.alpha_p);
    ag.slice_mut(s![ng.., ..ng]).assign(&blocks.p_alpha);
    ag.slice_mut(s![ng.., ng..]).assign(&blocks.p_p);
    let tg = problem.impedance.block(0);
    let mut wg = Array2::<f64>::zeros((2 * ng, 2 * ng));
    wg.slice_mut(s![..ng, ..ng]).assign(tg);
    let tinv = problem.impedance.factor(0).solve_real(&Array2::eye(ng));
    wg.slice_mut(s![ng.., ng..]).assign(&((&tinv + &tinv.t()) * 0.5));
    let mut norm = min_max(&singular_values(&whiten_operator(&ag, &SpdFactor::new(&wg)?))?).1;
    for (j, f) in problem.forms.iter().enumerate() {
        let h = SpdFactor::new(&dense_real(&f.h))?;
        let sv = singular_values(&whiten_operator(problem.local_operator(j), &h))?;
        norm = norm.max(min_max(&sv).1);
    }
    Ok(norm)
}

/// Smallest eigenvalue of the pencil `(K, M)` restricted to vertices off the
/// outer boundary: the first discrete Dirichlet eigenvalue of `−Δ`.
pub fn dirichlet_eigenvalue(mesh: &Mesh) -> Result<f64> {
    let g = assemble_global(mesh, &Coefficients::constant(0.0, 1.0))?;
    let bnd = mesh.boundary_vertices();
    let inner: Vec<usize> = (0..mesh.n_vertices()).filter(|v| bnd.binary_search(v).is_err()).collect();
    if inner.is_empty() {
        return Err(Error::Mesh("mesh has no interior vertex".into()));
    }
    let k = dense_real(&g.k).select(ndarray::Axis(0), &inner).select(ndarray::Axis(1), &inner);
    let m = dense_real(&g.m).select(ndarray::Axis(0), &inner).select(ndarray::Axis(1), &inner);
    Ok(generalized_eigenvalues(&k, &m)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n_sigma: usize,
    pub infsup_skeleton: f64,
    pub sigma_max_skeleton: f64,
    pub coercivity: f64,
    pub infsup_primary: f64,
    pub norm_a: f64,
    pub kernel_dim_primary: usize,
    pub kernel_dim_skeleton: usize,
    pub kernel_dim_primary_transpose: usize,
    pub kernel_dim_skeleton_transpose: usize,
    pub primary_dense: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateChecks {
    /// `infsup_primary ≤ (1 + ‖A‖) infsup_skeleton + 1e-9`.
    pub thm_final: bool,
    /// `coercivity ≥ ½ infsup_skeleton² − 1e-9`.
    pub cor_coercivity: bool,
    pub kernel_match: bool,
    /// Both square operators have index 0: kernel and cokernel dimensions agree.
    pub index_zero: bool,
    /// Singular values of the whitened skeleton operator lie in `[0, 2]`.
    pub norm_bound: bool,
}

impl EstimateChecks {
    pub fn all(&self) -> bool {
        self.thm_final && self.cor_coercivity && self.kernel_match && self.index_zero && self.norm_bound
    }
}

pub const ESTIMATE_SLACK: f64 = 1e-9;

pub fn analyze(problem: &Problem, opts: &AnalysisOptions) -> Result<SpectralReport> {
    let m = dense_skeleton_operator(problem, opts.dense_cap)?;
    let sv = singular_values(&m)?;
    let svt = singular_values(&m.t().to_owned())?;
    let (smin, smax) = min_max(&sv);
    let coercivity = coercivity_constant(&m)?;
    let primary = primary_analysis(problem, opts)?;
    let norm_a = continuity_modulus(problem)?;
    Ok(SpectralReport {
        n_sigma: m.nrows(),
        infsup_skeleton: smin,
        sigma_max_skeleton: smax,
        coercivity,
        infsup_primary: primary.sigma_min,
        norm_a,
        kernel_dim_primary: primary.kernel_dim,
        kernel_dim_skeleton: kernel_dim(&sv, opts.svd_threshold),
        kernel_dim_primary_transpose: primary.kernel_dim_transpose,
        kernel_dim_skeleton_transpose: kernel_dim(&svt, opts.svd_threshold),
        primary_dense: primary.dense,
    })
}

pub fn verify_estimates(r: &SpectralReport) -> EstimateChecks {
    EstimateChecks {
        thm_final: r.infsup_primary <= (1.0 + r.norm_a) * r.infsup_skeleton + ESTIMATE_SLACK,
        cor_coercivity: r.coercivity >= 0.5 * r.infsup_skeleton.powi(2) - ESTIMATE_SLACK,
        kernel_match: r.kernel_dim_primary == r.kernel_dim_skeleton,
        index_zero: r.kernel_dim_primary == r.kernel_dim_primary_transpose
            && r.kernel_dim_skeleton == r.kernel_dim_skeleton_transpose,
        norm_bound: r.sigma_max_skeleton <= 2.0 + 1e-10,
    }
}

/// Mesh size of the sweep rule: `ceil(10k / 2π)` cells per unit length,
/// rounded up to a multiple of `multiple`.
pub fn sweep_resolution(k: f64, length: f64, multiple: usize) -> usize {
    let n = (10.0 * k * length / (2.0 * std::f64::consts::PI)).ceil().max(1.0) as usize;
    n.div_ceil(multiple) * multiple
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub nx: usize,
    pub report: SpectralReport,
    pub checks: EstimateChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub slope_infsup: Option<f64>,
    pub slope_coercivity: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || ys.iter().any(|&y| !(y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Runs the spectral analysis for each `k`, with `κ = k`, `γ = 1/k` and
/// the mesh given by [`sweep_resolution`]. `base` supplies everything else.
pub fn sweep_wavenumber(base: &ProblemSpec, ks: &[f64], opts: &AnalysisOptions) -> Result<SweepTable> {
    if ks.is_empty() {
        return Err(Error::Config("wavenumber list is empty".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut spec = base.clone();
        spec.nx = sweep_resolution(k, spec.width, spec.px);
        spec.ny = sweep_resolution(k, spec.height, spec.py);
        spec.coeffs.k = k;
        spec.coeffs.gamma = 1.0 / k;
        spec.coeffs.kappa_sq = crate::assembly::KappaSq::Constant(C64::new(k * k, 0.0));
        spec.bc.lambda_scale = None;
        let problem = Problem::build(spec.clone())?;
        let report = analyze(&problem, opts)?;
        let checks = verify_estimates(&report);
        rows.push(SweepRow {
            k,
            nx: spec.nx,
            report,
            checks,
        });
    }
    let (slope_infsup, slope_coercivity) = if rows.len() >= 2 {
        let ks: Vec<f64> = rows.iter().map(|r| r.k).collect();
        let inf: Vec<f64> = rows.iter().map(|r| r.report.infsup_skeleton).collect();
        let coe: Vec<f64> = rows.iter().map(|r| r.report.coercivity).collect();
        (loglog_slope(&ks, &inf), loglog_slope(&ks, &coe))
    } else {
        (None, None)
    };
    Ok(SweepTable {
        rows,
        slope_infsup,
        slope_coercivity,
    })
}

/// Random dual fields used by the sampling checks.
pub fn random_duals<R: rand::Rng>(problem: &Problem, count: usize, rng: &mut R) -> Vec<Dual> {
    (0..count).map(|_| Dual::random(problem.layout(), rng)).collect()
}

/// `q ↦ (Id + ΠS)q` applied to a kernel candidate: relative residual in `T⁻¹`.
pub fn skeleton_residual(problem: &Problem, q: &Dual) -> f64 {
    let t = &problem.impedance;
    t.tinv_norm(&problem.skeleton_apply(q)) / t.tinv_norm(q)
}

/// Right singular vector of the smallest singular value of the whitened
/// primary operator, mapped back to `(u, p)` coordinates.
pub fn primary_kernel_vector(problem: &Problem) -> Result<Array1<C64>> {
    let sys = problem.primary_system()?;
    let w = SpdFactor::new(&primary_gram(problem)?)?;
    let b = whiten_operator(&dense_complex(&sys.matrix), &w);
    let (_, _, vt) = b.svd(false, true)?;
    let vt = vt.expect("right singular vectors requested");
    let x: Array1<C64> = vt.row(vt.nrows() - 1).mapv(|z| z.conj());
    Ok(w.upper_solve(x.view()))
}

/// `L⁻¹ A L⁻ᵀ` where `W = L Lᵀ`.
pub fn whitened(a: &Array2<C64>, w: &Array2<f64>) -> Result<Array2<C64>> {
    Ok(whiten_operator(a, &SpdFactor::new(w)?))
}
