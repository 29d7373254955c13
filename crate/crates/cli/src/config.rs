//! TOML run configuration.
//!
//! Lengths are in units of the domain, times in units of the relaxation time
//! `1/Γ` when `Γ = 1`. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qtensor::basis::{harmonic_extension, BoundaryData, Face, FaceData, Geometry, HarmonicExtension};
use qtensor::sim::{Discretization, Integrator, Preset};
use qtensor::tensor::{Matrix, ModelParams, Viscosity};

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub modes: ModesConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub linearize: LinearizeConfig,
    #[serde(default)]
    pub contraction: ContractionConfig,
}

fn default_t_end() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// `"torus"` or `"rectangle"`.
    pub mode: String,
    pub d: usize,
    pub lengths: Vec<f64>,
    /// Face names such as `"x_low"`; rectangle only.
    #[serde(default)]
    pub dirichlet_faces: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    /// Tensor modes.
    pub n_q: usize,
    /// Velocity modes.
    pub n_u: usize,
    /// Quadrature points per axis; derived from the bases when absent.
    pub grid: Option<Vec<usize>>,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self { n_q: 24, n_u: 8, grid: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub xi: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub viscosity: ViscosityConfig,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            xi: p.xi,
            gamma: p.gamma,
            lambda: p.lambda,
            a: p.a,
            b: p.b,
            c: p.c,
            viscosity: ViscosityConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ViscosityConfig {
    Constant {
        nu0: f64,
    },
    /// `ν0 + ν1 / (1 + tr Q²)`.
    Rational {
        nu0: f64,
        nu1: f64,
    },
}

impl Default for ViscosityConfig {
    fn default() -> Self {
        ViscosityConfig::Constant { nu0: 1.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Snapshot file to start from instead of a preset.
    pub snapshot: Option<PathBuf>,
}

fn default_preset() -> String {
    "relax".into()
}

fn default_amplitude() -> f64 {
    0.1
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { preset: default_preset(), amplitude: default_amplitude(), snapshot: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub dirichlet: Vec<FaceConfig>,
    /// Neumann data; only checked by `verify`, the simulation uses `∂ₙQ = 0`.
    #[serde(default)]
    pub neumann: Vec<FaceConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceConfig {
    pub face: String,
    pub terms: Vec<TermConfig>,
}

/// `value · trig(freq_m s)` along the face.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub mode: usize,
    pub value: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// `"midpoint"` or `"rk45"`.
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Largest rk45 step.
    #[serde(default = "default_max_dt")]
    pub max_dt: f64,
}

fn default_kind() -> String {
    "midpoint".into()
}

fn default_dt() -> f64 {
    0.01
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_dt() -> f64 {
    0.05
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { kind: default_kind(), dt: default_dt(), tol: default_tol(), max_dt: default_max_dt() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Time between snapshots; only the final state when absent.
    pub snapshot_every: Option<f64>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), snapshot_every: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Spacing of the trajectory samples used by the weak residuals.
    pub output_dt: f64,
    /// Number of basis test functions per equation.
    pub tests: usize,
    pub weak_tolerance: f64,
    /// Relative slack of the energy inequality, multiplied by `1 + E(0)`.
    pub energy_slack: f64,
    pub phase_tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { output_dt: 0.0025, tests: 10, weak_tolerance: 1e-8, energy_slack: 1e-8, phase_tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearizeConfig {
    pub t_end: f64,
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearizeConfig {
    fn default() -> Self {
        Self { t_end: 0.05, steps: 64, tol: 1e-12, max_iter: 60 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionConfig {
    pub t_values: Vec<f64>,
    pub steps: usize,
    pub radius: f64,
    pub pairs: usize,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self { t_values: vec![0.4, 0.2, 0.1, 0.05], steps: 32, radius: 1.0, pairs: 8 }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Validation { key: key.into(), reason: reason.into() }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    parse_config(&text)
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<SimConfig, CliError> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.geometry()?;
        self.model_params()?;
        self.integrator()?;
        self.preset()?;
        self.boundary_data()?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", "must be finite and >= 0"));
        }
        if self.modes.n_q == 0 || self.modes.n_u == 0 {
            return Err(invalid("modes", "n_q and n_u must be positive"));
        }
        if let Some(g) = &self.modes.grid {
            if g.len() != self.geometry.d {
                return Err(invalid("modes.grid", "needs one entry per dimension"));
            }
        }
        if let Some(s) = self.output.snapshot_every {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("output.snapshot_every", "must be > 0"));
            }
        }
        if !(self.verify.output_dt > 0.0) {
            return Err(invalid("verify.output_dt", "must be > 0"));
        }
        if !(self.linearize.t_end > 0.0) || self.linearize.steps == 0 {
            return Err(invalid("linearize", "t_end must be > 0 and steps >= 1"));
        }
        if self.contraction.t_values.iter().any(|t| !(*t > 0.0)) || self.contraction.steps == 0 {
            return Err(invalid("contraction", "t_values must be > 0 and steps >= 1"));
        }
        if !(self.contraction.radius > 0.0) {
            return Err(invalid("contraction.radius", "must be > 0"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry, CliError> {
        let g = &self.geometry;
        if g.lengths.len() != g.d {
            return Err(invalid("geometry.lengths", format!("expected {} entries", g.d)));
        }
        match g.mode.as_str() {
            "torus" => {
                if !g.dirichlet_faces.is_empty() {
                    return Err(invalid("geometry.dirichlet_faces", "not allowed on the torus"));
                }
                Geometry::torus(&g.lengths).map_err(|e| invalid("geometry", e.to_string()))
            }
            "rectangle" => {
                if g.d != 2 {
                    return Err(invalid("geometry", "unsupported geometry: rectangle needs d = 2"));
                }
                let faces = g
                    .dirichlet_faces
                    .iter()
                    .map(|f| Face::parse(f))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| invalid("geometry.dirichlet_faces", e.to_string()))?;
                Geometry::rectangle(&g.lengths, &faces).map_err(|e| invalid("geometry", e.to_string()))
            }
            other => Err(invalid("geometry.mode", format!("unknown mode `{other}`"))),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let p = &self.params;
        let viscosity = match p.viscosity {
            ViscosityConfig::Constant { nu0 } => Viscosity::Constant { nu0 },
            ViscosityConfig::Rational { nu0, nu1 } => Viscosity::Rational { nu0, nu1 },
        };
        let mp = ModelParams { xi: p.xi, gamma: p.gamma, lambda: p.lambda, a: p.a, b: p.b, c: p.c, viscosity };
        mp.validate().map_err(|e| invalid("params", e.to_string()))?;
        Ok(mp)
    }

    pub fn integrator(&self) -> Result<Integrator, CliError> {
        let i = &self.integrator;
        match i.kind.as_str() {
            "midpoint" if i.dt > 0.0 && i.dt.is_finite() => Ok(Integrator::ImplicitMidpoint { dt: i.dt }),
            "midpoint" => Err(invalid("integrator.dt", "must be > 0")),
            "rk45" if i.tol > 0.0 && i.max_dt > 0.0 => Ok(Integrator::Rk45 { tol: i.tol, max_dt: i.max_dt }),
            "rk45" => Err(invalid("integrator", "tol and max_dt must be > 0")),
            other => Err(invalid("integrator.kind", format!("unknown integrator `{other}`"))),
        }
    }

    /// The tolerance the integrator is expected to meet, used to scale checks.
    pub fn integrator_tolerance(&self) -> f64 {
        match self.integrator.kind.as_str() {
            "rk45" => self.integrator.tol,
            _ => self.integrator.dt * self.integrator.dt,
        }
    }

    pub fn preset(&self) -> Result<Preset, CliError> {
        Preset::parse(&self.initial.preset).map_err(|e| invalid("initial.preset", e.to_string()))
    }

    pub fn discretization(&self) -> Discretization {
        Discretization { n_q: self.modes.n_q, n_u: self.modes.n_u, grid: self.modes.grid.clone() }
    }

    pub fn boundary_data(&self) -> Result<BoundaryData, CliError> {
        let d = self.geometry.d;
        let conv = |key: &str, list: &[FaceConfig]| -> Result<Vec<FaceData>, CliError> {
            list.iter()
                .map(|f| {
                    let face = Face::parse(&f.face).map_err(|e| invalid(key, e.to_string()))?;
                    let terms = f
                        .terms
                        .iter()
                        .map(|t| {
                            if t.value.len() != d || t.value.iter().any(|r| r.len() != d) {
                                return Err(invalid(key, format!("value on {} must be {d}x{d}", f.face)));
                            }
                            let rows: Vec<&[f64]> = t.value.iter().map(|r| r.as_slice()).collect();
                            let m = Matrix::from_rows(&rows).map_err(|e| invalid(key, e.to_string()))?;
                            Ok((t.mode, m))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(FaceData { face, terms })
                })
                .collect()
        };
        Ok(BoundaryData {
            dirichlet: conv("boundary.dirichlet", &self.boundary.dirichlet)?,
            neumann: conv("boundary.neumann", &self.boundary.neumann)?,
        })
    }

    /// The harmonic lift of the Dirichlet data, or `None` on the torus / without data.
    pub fn lift(&self) -> Result<Option<HarmonicExtension>, CliError> {
        let geom = self.geometry()?;
        let data = self.boundary_data()?;
        if geom.is_periodic() {
            if !data.dirichlet.is_empty() || !data.neumann.is_empty() {
                return Err(invalid("boundary", "boundary data is not allowed on the torus"));
            }
            return Ok(None);
        }
        Ok(Some(harmonic_extension(&geom, &data.dirichlet, &data.neumann)?))
    }
}
