use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GalerkinSystem, SimState};
use crate::error::{Error, Result};
use crate::tensor::{raw, Matrix};

/// Named initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// `u₀ = 0`, a two-mode tensor perturbation.
    Relax,
    /// Sinusoidal shear flow through a uniaxial state aligned with the flow.
    Shear,
    /// Cellular (Taylor–Green type) vortex with a slowly rotating director.
    Vortex,
    /// Director rotating once across the domain, fluid at rest.
    UniaxialWave,
    /// Seeded uniform random coefficients with a decaying spectrum.
    Random,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Relax, Preset::Shear, Preset::Vortex, Preset::UniaxialWave, Preset::Random];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "relax" => Ok(Preset::Relax),
            "shear" => Ok(Preset::Shear),
            "vortex" => Ok(Preset::Vortex),
            "uniaxial_wave" => Ok(Preset::UniaxialWave),
            "random" => Ok(Preset::Random),
            _ => Err(Error::InvalidInput(format!("unknown preset `{name}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Relax => "relax",
            Preset::Shear => "shear",
            Preset::Vortex => "vortex",
            Preset::UniaxialWave => "uniaxial_wave",
            Preset::Random => "random",
        }
    }
}

/// `s (n⊗n − I/d)` for `n = (cos θ, sin θ, 0)`.
fn uniaxial(dim: usize, s: f64, theta: f64) -> Matrix {
    let n = [theta.cos(), theta.sin(), 0.0];
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            m.set(i, j, s * n[i] * n[j]);
        }
    }
    raw::s0_part(&m)
}

/// Galerkin initial state for a preset with overall amplitude `amplitude`.
/// On geometries with a lift the preset perturbs `Q̃`.
pub fn preset_state(sys: &GalerkinSystem, preset: Preset, amplitude: f64, seed: u64) -> Result<SimState> {
    if !amplitude.is_finite() {
        return Err(Error::InvalidInput("amplitude must be finite".into()));
    }
    let dim = sys.dim();
    let l = sys.geometry().lengths();
    let kx = 2.0 * PI / l[0];
    let ky = 2.0 * PI / l[1];
    if preset == Preset::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = SimState::zeros(0.0, sys.n_u(), sys.n_q());
        for (c, w) in s.u.iter_mut().zip(sys.stokes().eigenvalues()) {
            let z: f64 = rng.random_range(-1.0..1.0);
            *c = amplitude * z / (1.0 + w);
        }
        for (c, lam) in s.q.iter_mut().zip(sys.laplace().eigenvalues()) {
            let z: f64 = rng.random_range(-1.0..1.0);
            *c = amplitude * z / (1.0 + lam);
        }
        return Ok(s);
    }
    let pts = sys.grid().points();
    let mut u0 = vec![[0.0; 3]; pts.len()];
    let mut q0 = Vec::with_capacity(pts.len());
    let e = crate::tensor::s0_basis(dim);
    for (i, x) in pts.iter().enumerate() {
        let (u, q) = match preset {
            Preset::Relax => {
                ([0.0; 3], e[0] * (amplitude * (kx * x[0]).cos()) + e[1] * (0.5 * amplitude * (ky * x[1]).sin()))
            }
            Preset::Shear => ([amplitude * (ky * x[1]).sin(), 0.0, 0.0], uniaxial(dim, 0.5 * amplitude, 0.3)),
            Preset::Vortex => {
                let (sx, cx) = (kx * x[0]).sin_cos();
                let (sy, cy) = (ky * x[1]).sin_cos();
                let u = [amplitude * sx * cy / kx, -amplitude * cx * sy / ky, 0.0];
                (u, uniaxial(dim, 0.5 * amplitude, 0.5 * sx * sy))
            }
            Preset::UniaxialWave => ([0.0; 3], uniaxial(dim, amplitude, kx * x[0])),
            Preset::Random => unreachable!(),
        };
        u0[i] = u;
        q0.push(q + sys.tilde_values()[i]);
    }
    sys.init_state(&u0, &q0)
}
