//! Iterative solvers for `(Id + ΠS) q = f` measured in the `T⁻¹` norm.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::fields::Dual;
use crate::linalg::{dotc, norm2, C64};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Richardson,
    #[default]
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    pub relax: f64,
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Gmres,
            relax: 0.5,
            tol: 1e-10,
            maxit: 1000,
            restart: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// `‖f − (Id + ΠS) q_n‖_{T⁻¹}` per iteration, starting with `q_0 = 0`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
    pub stagnated: bool,
    pub final_mismatch: Option<f64>,
}

impl SolveReport {
    pub fn final_relative_residual(&self) -> f64 {
        match (self.residual_history.first(), self.residual_history.last()) {
            (Some(&r0), Some(&r)) if r0 > 0.0 => r / r0,
            _ => 0.0,
        }
    }
}

/// Residual growth over this many consecutive steps counts as divergence.
const DIVERGENCE_WINDOW: usize = 10;
/// Window and ratio used to flag a stalled iteration.
const STAGNATION_WINDOW: usize = 20;
const STAGNATION_RATIO: f64 = 0.95;

fn stagnated(history: &[f64]) -> bool {
    let n = history.len();
    n > STAGNATION_WINDOW && history[n - 1] > STAGNATION_RATIO * history[n - 1 - STAGNATION_WINDOW]
}

/// `q_{n+1} = q_n − r((Id + ΠS) q_n − f)`.
pub fn richardson(problem: &Problem, f: &Dual, relax: f64, tol: f64, maxit: usize) -> (Dual, SolveReport) {
    let t = &problem.impedance;
    let f_norm = t.tinv_norm(f);
    let mut q = Dual::zeros(problem.layout());
    let mut history = vec![f_norm];
    let mut report = SolveReport {
        method: Method::Richardson,
        iterations: 0,
        residual_history: Vec::new(),
        converged: f_norm == 0.0,
        diverged: false,
        stagnated: false,
        final_mismatch: None,
    };
    if report.converged {
        report.residual_history = history;
        return (q, report);
    }
    let mut r = f.clone();
    let mut growth = 0;
    while report.iterations < maxit {
        q = &q + &r.scale(C64::new(relax, 0.0));
        report.iterations += 1;
        r = f - &problem.skeleton_apply(&q);
        let rn = t.tinv_norm(&r);
        growth = if rn > *history.last().unwrap() { growth + 1 } else { 0 };
        history.push(rn);
        if rn <= tol * f_norm {
            report.converged = true;
            break;
        }
        if growth >= DIVERGENCE_WINDOW {
            report.diverged = true;
            break;
        }
    }
    report.stagnated = !report.converged && stagnated(&history);
    report.residual_history = history;
    (q, report)
}

/// GMRES on the whitened operator `L⁻¹(Id + ΠS)L`, whose Euclidean residual
/// is the `T⁻¹` residual of the original system.
pub fn gmres_tinv(problem: &Problem, f: &Dual, tol: f64, restart: usize, maxit: usize) -> (Dual, SolveReport) {
    let t = &problem.impedance;
    let b = t.whiten(f);
    let op = |w: &Array1<C64>| t.whiten(&problem.skeleton_apply(&t.unwhiten(w)));
    let out = gmres(op, &b, tol, restart, maxit);
    let q = t.unwhiten(&out.x);
    let report = SolveReport {
        method: Method::Gmres,
        iterations: out.iterations,
        stagnated: !out.converged && stagnated(&out.history),
        residual_history: out.history,
        converged: out.converged,
        diverged: false,
        final_mismatch: None,
    };
    (q, report)
}

pub fn solve(problem: &Problem, f: &Dual, opts: &SolverOptions) -> (Dual, SolveReport) {
    match opts.method {
        Method::Richardson => richardson(problem, f, opts.relax, opts.tol, opts.maxit),
        Method::Gmres => gmres_tinv(problem, f, opts.tol, opts.restart, opts.maxit),
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutput {
    pub x: Array1<C64>,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Restarted GMRES with modified Gram-Schmidt Arnoldi and complex Givens
/// rotations, started from zero. Convergence is declared on the true
/// residual at the end of a cycle.
pub fn gmres<F>(apply: F, b: &Array1<C64>, tol: f64, restart: usize, maxit: usize) -> GmresOutput
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    let n = b.len();
    let bnorm = norm2(b.view());
    let mut x = Array1::<C64>::zeros(n);
    let mut history = vec![bnorm];
    if bnorm == 0.0 {
        return GmresOutput {
            x,
            history,
            iterations: 0,
            converged: true,
        };
    }
    let m = restart.max(1).min(n.max(1));
    let mut r = b.clone();
    let mut beta = bnorm;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < maxit {
        let mut v: Vec<Array1<C64>> = vec![&r / C64::new(beta, 0.0)];
        let mut h = Array2::<C64>::zeros((m + 1, m));
        let mut cs = vec![0.0; m];
        let mut sn = vec![C64::new(0.0, 0.0); m];
        let mut g = vec![C64::new(0.0, 0.0); m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;
        for j in 0..m {
            let mut w = apply(&v[j]);
            iterations += 1;
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dotc(vi.view(), w.view());
                    h[[i, j]] += hij;
                    w.scaled_add(-hij, vi);
                }
            }
            let hn = norm2(w.view());
            h[[j + 1, j]] = C64::new(hn, 0.0);
            for i in 0..j {
                let tmp = h[[i, j]] * cs[i] + sn[i] * h[[i + 1, j]];
                h[[i + 1, j]] = -sn[i].conj() * h[[i, j]] + h[[i + 1, j]] * cs[i];
                h[[i, j]] = tmp;
            }
            let a = h[[j, j]];
            let bb = h[[j + 1, j]];
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = C64::new(1.0, 0.0);
            } else {
                cs[j] = a.norm() / d;
                sn[j] = (a / a.norm()) * bb.conj() / d;
            }
            h[[j, j]] = a * cs[j] + sn[j] * bb;
            h[[j + 1, j]] = C64::new(0.0, 0.0);
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            k = j + 1;
            history.push(g[j + 1].norm());
            let breakdown = hn <= 1e-14 * bnorm;
            if g[j + 1].norm() <= tol * bnorm || iterations >= maxit || breakdown {
                break;
            }
            v.push(w / C64::new(hn, 0.0));
        }
        let mut y = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= h[[i, l]] * y[l];
            }
            y[i] = s / h[[i, i]];
        }
        for (i, yi) in y.iter().enumerate() {
            x.scaled_add(*yi, &v[i]);
        }
        r = b - &apply(&x);
        beta = norm2(r.view());
        *history.last_mut().unwrap() = beta;
        if beta <= tol * bnorm {
            converged = true;
            break;
        }
        if k < m && h[[k.saturating_sub(1), k.saturating_sub(1)]].norm() == 0.0 {
            break;
        }
    }
    GmresOutput {
        x,
        history,
        iterations,
        converged,
    }
}
