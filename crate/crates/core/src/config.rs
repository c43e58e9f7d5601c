//! TOML experiment configuration and its translation into a [`ProblemSpec`].
//!
//! ```toml
//! [geometry]
//! nx = 8
//! ny = 8
//!
//! [partition]
//! px = 2
//! py = 2
//!
//! [physics]
//! k = 5.0
//!
//! [bc]
//! kind = "robin"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{Coefficients, KappaSq, ScalarField};
use crate::boundary_conditions::BcKind;
use crate::error::{Error, Result};
use crate::geometry::{build_rect_mesh, partition_checkerboard};
use crate::impedance::TGammaKind;
use crate::linalg::{C64, I};
use crate::problem::{BcSpec, Predicate, ProblemSpec};
use crate::solver::{Method, SolverOptions};
use crate::spectral::{dirichlet_eigenvalue, AnalysisOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            width: 1.0,
            height: 1.0,
            nx: 8,
            ny: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub px: usize,
    pub py: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig { px: 2, py: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KappaMode {
    /// `κ = k` everywhere.
    #[default]
    Constant,
    /// `κ² = μ λ_h (1 + shift)²` with `λ_h` the smallest discrete Dirichlet
    /// eigenvalue of the mesh.
    Resonant,
    /// `κ² = k² (1 + i σ(x))` with `σ` growing quadratically across a layer
    /// along the outer boundary.
    AbsorbingLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Zero,
    #[default]
    Constant,
    /// Chosen so that `u = sin(πx/W) sin(πy/H)` solves the volume equation.
    SineMode,
}

/// Either a number or the string `"1/k"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Value(f64),
    Rule(String),
}

impl Default for GammaSetting {
    fn default() -> Self {
        GammaSetting::Rule("1/k".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub k: f64,
    pub mu_re: f64,
    pub mu_im: f64,
    pub kappa_mode: KappaMode,
    /// Relative shift of κ away from resonance (`resonant` mode only).
    pub resonance_shift: f64,
    pub layer_width: f64,
    pub layer_strength: f64,
    pub gamma: GammaSetting,
    pub tgamma: TGammaKind,
    pub source: SourceKind,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            k: 5.0,
            mu_re: 1.0,
            mu_im: 0.0,
            kappa_mode: KappaMode::Constant,
            resonance_shift: 0.0,
            layer_width: 0.1,
            layer_strength: 1.0,
            gamma: GammaSetting::default(),
            tgamma: TGammaKind::Collar,
            source: SourceKind::Constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataField {
    /// `amplitude · exp(i k (x cos θ + y sin θ))`.
    PlaneWave {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        angle: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Boundary data: a real constant or a structured field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundaryValue {
    Constant(f64),
    Field(DataField),
}

impl Default for BoundaryValue {
    fn default() -> Self {
        BoundaryValue::Constant(0.0)
    }
}

impl BoundaryValue {
    fn field(&self, k: f64) -> ScalarField {
        match *self {
            BoundaryValue::Constant(c) => Arc::new(move |_| C64::new(c, 0.0)),
            BoundaryValue::Field(DataField::PlaneWave { amplitude, angle }) => {
                let (c, s) = (angle.cos(), angle.sin());
                Arc::new(move |x| amplitude * (I * k * (x[0] * c + x[1] * s)).exp())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub kind: BcKind,
    #[serde(default)]
    pub g_d: BoundaryValue,
    #[serde(default)]
    pub g_n: BoundaryValue,
    /// Robin `Λ = lambda_scale · M_Γ`; defaults to `k`.
    #[serde(default)]
    pub lambda_scale: Option<f64>,
    /// Edges of the Dirichlet part for mixed conditions, e.g.
    /// `"x=0 or x=1 or y=1"`.
    #[serde(default)]
    pub gamma_d_predicate: Option<String>,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            kind: BcKind::Robin,
            g_d: BoundaryValue::default(),
            g_n: BoundaryValue::default(),
            lambda_scale: None,
            gamma_d_predicate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub relax: f64,
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig {
            method: d.method,
            relax: d.relax,
            tol: d.tol,
            maxit: d.maxit,
            restart: d.restart,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub dense_cap: usize,
    pub primary_dense_cap: usize,
    pub svd_threshold: f64,
    pub sweep_k: Vec<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let d = AnalysisOptions::default();
        AnalysisConfig {
            dense_cap: d.dense_cap,
            primary_dense_cap: d.primary_dense_cap,
            svd_threshold: d.svd_threshold,
            sweep_k: vec![5.0, 10.0, 20.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub geometry: Geometry,
    pub partition: PartitionConfig,
    pub physics: Physics,
    pub bc: BcConfig,
    pub solver: SolverConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

fn assumption(tag: &'static str, detail: impl Into<String>) -> Error {
    Error::Assumption {
        assumption: tag,
        detail: detail.into(),
    }
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ProblemConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn gamma(&self) -> Result<f64> {
        match &self.physics.gamma {
            GammaSetting::Value(g) => Ok(*g),
            GammaSetting::Rule(r) if r.replace(' ', "") == "1/k" => Ok(1.0 / self.physics.k),
            GammaSetting::Rule(r) => Err(Error::Config(format!("gamma must be a number or \"1/k\", got {r:?}"))),
        }
    }

    pub fn mu(&self) -> C64 {
        C64::new(self.physics.mu_re, self.physics.mu_im)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            method: self.solver.method,
            relax: self.solver.relax,
            tol: self.solver.tol,
            maxit: self.solver.maxit,
            restart: self.solver.restart,
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            dense_cap: self.analysis.dense_cap,
            primary_dense_cap: self.analysis.primary_dense_cap,
            svd_threshold: self.analysis.svd_threshold,
        }
    }

    /// Checks every constraint that does not need a factorization.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.width > 0.0 && g.height > 0.0) {
            return Err(assumption("(A1)", format!("domain {}x{} must have positive sides", g.width, g.height)));
        }
        let mesh = build_rect_mesh(g.nx, g.ny, g.width, g.height)?;
        partition_checkerboard(&mesh, self.partition.px, self.partition.py)?;
        let p = &self.physics;
        if !(p.k > 0.0 && p.k.is_finite()) {
            return Err(assumption("(A2)", format!("k = {} must be positive", p.k)));
        }
        if !(p.mu_re > 0.0) || p.mu_im < 0.0 {
            return Err(assumption(
                "(A2)",
                format!("mu = {} must satisfy Re mu > 0 and Im mu >= 0", self.mu()),
            ));
        }
        let gamma = self.gamma()?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(assumption("(A2)", format!("gamma = {gamma} must be positive")));
        }
        if p.kappa_mode == KappaMode::AbsorbingLayer && !(p.layer_strength >= 0.0 && p.layer_width > 0.0) {
            return Err(assumption(
                "(A2)",
                "absorbing layer needs layer_width > 0 and layer_strength >= 0 (Im kappa^2 >= 0)",
            ));
        }
        if let Some(l) = self.bc.lambda_scale {
            if !(l > 0.0) {
                return Err(assumption("(A3)", format!("Robin lambda_scale = {l} must be positive")));
            }
        }
        if let Some(pred) = &self.bc.gamma_d_predicate {
            if self.bc.kind != BcKind::Mixed {
                return Err(Error::Config("gamma_d_predicate only applies to kind = \"mixed\"".into()));
            }
            parse_predicate(pred, g.width.max(g.height))?;
        }
        let s = &self.solver;
        if !(s.relax > 0.0 && s.relax < 1.0) {
            return Err(Error::Config(format!("solver.relax = {} must lie in (0, 1)", s.relax)));
        }
        if !(s.tol > 0.0) || s.maxit == 0 || s.restart == 0 {
            return Err(Error::Config("solver needs tol > 0, maxit > 0 and restart > 0".into()));
        }
        if !(self.analysis.svd_threshold > 0.0 && self.analysis.svd_threshold < 1.0) {
            return Err(Error::Config("analysis.svd_threshold must lie in (0, 1)".into()));
        }
        if self.analysis.sweep_k.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("analysis.sweep_k entries must be positive".into()));
        }
        Ok(())
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        self.validate()?;
        let g = &self.geometry;
        let p = &self.physics;
        let mu = self.mu();
        let k = p.k;
        let kappa_sq = match p.kappa_mode {
            KappaMode::Constant => KappaSq::Constant(C64::new(k * k, 0.0)),
            KappaMode::Resonant => {
                let mesh = build_rect_mesh(g.nx, g.ny, g.width, g.height)?;
                let lambda = dirichlet_eigenvalue(&mesh)?;
                KappaSq::Constant(mu * lambda * (1.0 + p.resonance_shift).powi(2))
            }
            KappaMode::AbsorbingLayer => {
                let (w, h, d, s) = (g.width, g.height, p.layer_width, p.layer_strength);
                KappaSq::Function(Arc::new(move |x: [f64; 2]| {
                    let dist = x[0].min(w - x[0]).min(x[1]).min(h - x[1]);
                    let sigma = if dist < d { s * ((d - dist) / d).powi(2) } else { 0.0 };
                    C64::new(k * k, k * k * sigma)
                }))
            }
        };
        let coeffs = Coefficients {
            mu,
            kappa_sq: kappa_sq.clone(),
            gamma: self.gamma()?,
            k,
        };
        let source: ScalarField = match p.source {
            SourceKind::Zero => Arc::new(|_| C64::new(0.0, 0.0)),
            SourceKind::Constant => Arc::new(|_| C64::new(1.0, 0.0)),
            SourceKind::SineMode => {
                let (w, h) = (g.width, g.height);
                let lap = std::f64::consts::PI.powi(2) * (1.0 / (w * w) + 1.0 / (h * h));
                Arc::new(move |x| (mu * lap - kappa_sq.eval(x)) * sine_mode(x, w, h))
            }
        };
        let dirichlet_part = match &self.bc.gamma_d_predicate {
            Some(text) => Some(parse_predicate(text, g.width.max(g.height))?),
            None => None,
        };
        Ok(ProblemSpec {
            width: g.width,
            height: g.height,
            nx: g.nx,
            ny: g.ny,
            px: self.partition.px,
            py: self.partition.py,
            coeffs,
            tgamma: p.tgamma,
            bc: BcSpec {
                kind: self.bc.kind,
                g_d: self.bc.g_d.field(k),
                g_n: self.bc.g_n.field(k),
                lambda_scale: self.bc.lambda_scale,
                dirichlet_part,
            },
            source,
        })
    }

    /// The exact solution when the configuration is a manufactured problem:
    /// sine-mode source with homogeneous Dirichlet data.
    pub fn manufactured_solution(&self) -> Option<ScalarField> {
        let homogeneous = self.bc.g_d == BoundaryValue::Constant(0.0);
        if self.physics.source == SourceKind::SineMode && self.bc.kind == BcKind::Dirichlet && homogeneous {
            let (w, h) = (self.geometry.width, self.geometry.height);
            Some(Arc::new(move |x| C64::new(sine_mode(x, w, h), 0.0)))
        } else {
            None
        }
    }
}

fn sine_mode(x: [f64; 2], w: f64, h: f64) -> f64 {
    use std::f64::consts::PI;
    (PI * x[0] / w).sin() * (PI * x[1] / h).sin()
}

/// Parses clauses `x=c` / `y=c` joined by `or`.
pub fn parse_predicate(text: &str, scale: f64) -> Result<Predicate> {
    let tol = 1e-9 * scale;
    let mut clauses = Vec::new();
    for clause in text.split(" or ") {
        let clause = clause.trim();
        let (lhs, rhs) = clause
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("predicate clause {clause:?} is not of the form x=c or y=c")))?;
        let axis = match lhs.trim() {
            "x" => 0,
            "y" => 1,
            other => return Err(Error::Config(format!("unknown coordinate {other:?} in predicate"))),
        };
        let value: f64 = rhs
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad number {:?} in predicate", rhs.trim())))?;
        clauses.push((axis, value));
    }
    Ok(Arc::new(move |x: [f64; 2]| clauses.iter().any(|&(a, c)| (x[a] - c).abs() <= tol)))
}
