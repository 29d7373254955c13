//! Eigenbases of the 𝕊₀-valued Laplacian (mixed Dirichlet/Neumann) and of the
//! Stokes operator, quadrature grids, projections, harmonic lifting of
//! Dirichlet data, and the Leray projection.

mod harmonic;
pub(crate) mod laplace;
mod leray;
mod quadrature;
mod stokes;
mod tables;

pub(crate) use harmonic::face_value;
pub use harmonic::{harmonic_extension, BoundaryData, FaceData, HarmonicExtension};
pub use laplace::{laplace_eigenpairs, laplace_eigenpairs_with_budget, LaplaceBasis, ScalarMode, TensorMode};
pub use leray::{leray_project, leray_project_periodic};
pub use quadrature::{gauss_legendre, Grid, GridKind};
pub use stokes::{
    stokes_eigenpairs, stokes_eigenpairs_rectangle, stokes_eigenpairs_with_budget, StokesBasis, StreamFunctionBasis,
    VectorMode,
};
pub use tables::{LaplaceTables, StokesTables};

use crate::error::{Error, Result};

/// Default upper bound on the number of modes a basis may hold.
pub const DEFAULT_MODE_BUDGET: usize = 8192;

/// Trigonometric factor type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    #[inline]
    pub fn eval(self, arg: f64) -> f64 {
        match self {
            Trig::Cos => arg.cos(),
            Trig::Sin => arg.sin(),
        }
    }

    /// Derivative of `eval` with respect to its argument.
    #[inline]
    pub fn deriv(self, arg: f64) -> f64 {
        match self {
            Trig::Cos => -arg.sin(),
            Trig::Sin => arg.cos(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Low,
    High,
}

/// An axis-aligned boundary face `x_axis = 0` (low) or `x_axis = L_axis` (high).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn new(axis: usize, side: Side) -> Self {
        Self { axis, side }
    }

    /// Parses names such as `x_low`, `y_high`, `z_low`.
    pub fn parse(name: &str) -> Result<Self> {
        let (ax, side) = name.split_once('_').ok_or_else(|| Error::InvalidInput(format!("bad face name `{name}`")))?;
        let axis = match ax {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return Err(Error::InvalidInput(format!("bad face axis in `{name}`"))),
        };
        let side = match side {
            "low" => Side::Low,
            "high" => Side::High,
            _ => return Err(Error::InvalidInput(format!("bad face side in `{name}`"))),
        };
        Ok(Self { axis, side })
    }

    pub fn name(&self) -> String {
        let ax = ["x", "y", "z"][self.axis];
        let side = match self.side {
            Side::Low => "low",
            Side::High => "high",
        };
        format!("{ax}_{side}")
    }

    /// Sign of the outward normal along `axis`.
    pub fn normal_sign(&self) -> f64 {
        match self.side {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }
}

/// Boundary condition type on a face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcType {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryMode {
    PeriodicTorus,
    Rectangle,
}

/// Computational domain: a periodic box, or a 2-D rectangle `[0,Lx]×[0,Ly]`
/// whose faces are split into Dirichlet and Neumann sets for `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    mode: GeometryMode,
    lengths: Vec<f64>,
    dirichlet: Vec<Face>,
}

impl Geometry {
    pub fn torus(lengths: &[f64]) -> Result<Self> {
        check_lengths(lengths)?;
        if !(2..=3).contains(&lengths.len()) {
            return Err(Error::Unsupported(format!("torus of dimension {}", lengths.len())));
        }
        Ok(Self { mode: GeometryMode::PeriodicTorus, lengths: lengths.to_vec(), dirichlet: Vec::new() })
    }

    /// A rectangle with whole faces in `dirichlet_faces`; every other face is Neumann.
    pub fn rectangle(lengths: &[f64], dirichlet_faces: &[Face]) -> Result<Self> {
        check_lengths(lengths)?;
        if lengths.len() != 2 {
            return Err(Error::Unsupported(format!(
                "unsupported geometry: rectangle mode requires d = 2, got d = {}",
                lengths.len()
            )));
        }
        let mut dirichlet: Vec<Face> = Vec::new();
        for f in dirichlet_faces {
            if f.axis >= 2 {
                return Err(Error::InvalidInput(format!("face {} outside a 2-D rectangle", f.name())));
            }
            if dirichlet.contains(f) {
                return Err(Error::InvalidInput(format!("face {} listed twice", f.name())));
            }
            dirichlet.push(*f);
        }
        Ok(Self { mode: GeometryMode::Rectangle, lengths: lengths.to_vec(), dirichlet })
    }

    #[inline]
    pub fn mode(&self) -> GeometryMode {
        self.mode
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    #[inline]
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn is_periodic(&self) -> bool {
        self.mode == GeometryMode::PeriodicTorus
    }

    /// All boundary faces (empty for the torus).
    pub fn faces(&self) -> Vec<Face> {
        if self.is_periodic() {
            return Vec::new();
        }
        (0..self.dim()).flat_map(|a| [Face::new(a, Side::Low), Face::new(a, Side::High)]).collect()
    }

    pub fn dirichlet_faces(&self) -> &[Face] {
        &self.dirichlet
    }

    pub fn neumann_faces(&self) -> Vec<Face> {
        self.faces().into_iter().filter(|f| !self.dirichlet.contains(f)).collect()
    }

    pub fn bc(&self, face: Face) -> BcType {
        if self.dirichlet.contains(&face) {
            BcType::Dirichlet
        } else {
            BcType::Neumann
        }
    }

    /// Boundary condition pair `(low, high)` along `axis` (rectangle only).
    pub fn axis_bcs(&self, axis: usize) -> (BcType, BcType) {
        (self.bc(Face::new(axis, Side::Low)), self.bc(Face::new(axis, Side::High)))
    }

    /// Short textual description used in output headers.
    pub fn describe(&self) -> String {
        let lens: Vec<String> = self.lengths.iter().map(|l| format!("{l}")).collect();
        match self.mode {
            GeometryMode::PeriodicTorus => format!("torus lengths={}", lens.join(",")),
            GeometryMode::Rectangle => {
                let names: Vec<String> = self.dirichlet.iter().map(|f| f.name()).collect();
                format!("rectangle lengths={} dirichlet={}", lens.join(","), names.join(","))
            }
        }
    }
}

fn check_lengths(lengths: &[f64]) -> Result<()> {
    if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidInput("domain lengths must be positive and finite".into()));
    }
    Ok(())
}

/// Sort comparator for eigenvalues with a relative tie tolerance.
pub(crate) fn cmp_eigen(a: f64, b: f64) -> std::cmp::Ordering {
    let scale = a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() <= 1e-12 * scale {
        std::cmp::Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
    }
}
