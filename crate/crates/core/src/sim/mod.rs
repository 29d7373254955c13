//! The Galerkin ODE system for the velocity and Q-tensor coefficients, its
//! energy, and time integration.

mod integrate;
mod presets;

pub use integrate::{energy_identity_residual, run, step, Integrator, RunOutput, StepInfo, Trajectory};
pub use presets::{preset_state, Preset};

use crate::basis::{
    laplace_eigenpairs, stokes_eigenpairs, Geometry, GeometryMode, Grid, HarmonicExtension, LaplaceBasis,
    LaplaceTables, StokesBasis, StokesTables,
};
use crate::error::{check_dim, Error, Result};
use crate::tensor::{raw, Matrix, ModelParams};

/// Mode counts and quadrature resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    /// Number of tensor (Laplace) modes.
    pub n_q: usize,
    /// Number of velocity (Stokes) modes.
    pub n_u: usize,
    /// Grid shape; `None` picks the smallest grid on which the advection integrals are exact.
    pub grid: Option<Vec<usize>>,
}

/// Coefficients of the velocity and of `Q - Q̃` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Vec<f64>,
    pub q: Vec<f64>,
}

impl SimState {
    pub fn zeros(t: f64, n_u: usize, n_q: usize) -> Self {
        Self { t, u: vec![0.0; n_u], q: vec![0.0; n_q] }
    }

    /// `[u; q]` as one vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = self.u.clone();
        x.extend_from_slice(&self.q);
        x
    }

    pub fn from_vec(t: f64, x: &[f64], n_u: usize) -> Self {
        Self { t, u: x[..n_u].to_vec(), q: x[n_u..].to_vec() }
    }
}

/// A tensor field `Q̃ + Σ h_i e_i` together with its grid samples.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub coeffs: Vec<f64>,
    pub values: Vec<Matrix>,
    pub grads: Vec<[Matrix; 3]>,
}

/// A velocity field `Σ d_k v_k` together with its grid samples.
#[derive(Clone, Debug)]
pub struct VelocityField {
    pub coeffs: Vec<f64>,
    pub values: Vec<[f64; 3]>,
    pub grads: Vec<Matrix>,
}

/// Energy split and dissipation rates at one instant, plus per-step bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub bulk: f64,
    pub total: f64,
    /// `∫ν(Q)|Du|²`
    pub diss_visc: f64,
    /// `Γ∫|πₙH|²`
    pub diss_h: f64,
    /// `Γ∫|H|²` with the unprojected molecular field.
    pub diss_h_full: f64,
    /// Dissipation integrated over the step that ended at `t` (zero for the first report).
    pub step_dissipation: f64,
    /// `E(t) - E(t_prev) + step_dissipation` (zero for the first report).
    pub identity_residual: f64,
}

/// Everything the right-hand side produces at one state.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub u: VelocityField,
    pub q: TensorField,
    /// `L(Q)` on the grid.
    pub bulk_force: Vec<Matrix>,
    /// Coefficients of `πₙH`.
    pub pi_h: Vec<f64>,
    /// `πₙH` on the grid.
    pub pi_h_grid: Vec<Matrix>,
    pub d_dot: Vec<f64>,
    pub h_dot: Vec<f64>,
}

/// Bases, quadrature tables and parameters defining the Galerkin ODE.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    geom: Geometry,
    params: ModelParams,
    laplace: LaplaceBasis,
    stokes: StokesBasis,
    grid: Grid,
    lt: LaplaceTables,
    st: StokesTables,
    tilde: HarmonicExtension,
    tilde_val: Vec<Matrix>,
    tilde_grad: Vec<[Matrix; 3]>,
    tilde_dirichlet_energy: f64,
}

impl GalerkinSystem {
    pub fn new(
        geom: &Geometry,
        params: &ModelParams,
        disc: &Discretization,
        tilde: Option<HarmonicExtension>,
    ) -> Result<Self> {
        params.validate()?;
        let laplace = laplace_eigenpairs(geom, disc.n_q)?;
        let stokes = stokes_eigenpairs(geom, disc.n_u)?;
        Self::from_bases(geom, params, laplace, stokes, disc.grid.clone(), tilde)
    }

    pub fn from_bases(
        geom: &Geometry,
        params: &ModelParams,
        laplace: LaplaceBasis,
        stokes: StokesBasis,
        grid_shape: Option<Vec<usize>>,
        tilde: Option<HarmonicExtension>,
    ) -> Result<Self> {
        params.validate()?;
        let dim = geom.dim();
        let shape = match grid_shape {
            Some(s) => {
                check_dim(dim, s.len())?;
                s
            }
            None => default_grid_shape(geom, &laplace, &stokes),
        };
        let grid = Grid::for_geometry(geom, &shape);
        let lt = LaplaceTables::new(&laplace, &grid)?;
        let st = StokesTables::new(&stokes, &grid)?;
        let tilde = tilde.unwrap_or_else(|| HarmonicExtension::zero(dim));
        if geom.is_periodic() && !tilde.is_zero() {
            return Err(Error::Unsupported("boundary data on a torus".into()));
        }
        let (tilde_val, tilde_grad): (Vec<Matrix>, Vec<[Matrix; 3]>) =
            grid.points().iter().map(|x| tilde.eval(x)).unzip();
        let tilde_dirichlet_energy = grid
            .weights()
            .iter()
            .zip(&tilde_grad)
            .map(|(w, g)| w * (0..dim).map(|a| g[a].ddot(&g[a])).sum::<f64>())
            .sum();
        Ok(Self {
            geom: geom.clone(),
            params: *params,
            laplace,
            stokes,
            grid,
            lt,
            st,
            tilde,
            tilde_val,
            tilde_grad,
            tilde_dirichlet_energy,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Same bases and grid with different parameters.
    pub fn with_params(&self, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let mut s = self.clone();
        s.params = *params;
        Ok(s)
    }

    pub fn laplace(&self) -> &LaplaceBasis {
        &self.laplace
    }

    pub fn stokes(&self) -> &StokesBasis {
        &self.stokes
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn laplace_tables(&self) -> &LaplaceTables {
        &self.lt
    }

    pub fn stokes_tables(&self) -> &StokesTables {
        &self.st
    }

    pub fn tilde(&self) -> &HarmonicExtension {
        &self.tilde
    }

    pub fn tilde_values(&self) -> &[Matrix] {
        &self.tilde_val
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.geom.dim()
    }

    #[inline]
    pub fn n_u(&self) -> usize {
        self.stokes.len()
    }

    #[inline]
    pub fn n_q(&self) -> usize {
        self.laplace.len()
    }

    fn check_state(&self, u: &[f64], q: &[f64]) -> Result<()> {
        check_dim(self.n_u(), u.len())?;
        check_dim(self.n_q(), q.len())
    }

    pub fn velocity_field(&self, u: &[f64]) -> Result<VelocityField> {
        let (values, grads) = self.st.synthesize(u)?;
        Ok(VelocityField { coeffs: u.to_vec(), values, grads })
    }

    /// `Q̃ + Σ q_i e_i` on the grid.
    pub fn tensor_field(&self, q: &[f64]) -> Result<TensorField> {
        let (mut values, mut grads) = self.lt.synthesize_with_grad(q)?;
        if !self.tilde.is_zero() {
            for p in 0..values.len() {
                values[p] += self.tilde_val[p];
                for a in 0..self.dim() {
                    grads[p][a] += self.tilde_grad[p][a];
                }
            }
        }
        Ok(TensorField { coeffs: q.to_vec(), values, grads })
    }

    /// `ΔQ` on the grid (the lift is harmonic, so only the modes contribute).
    pub fn laplacian_grid(&self, q: &[f64]) -> Result<Vec<Matrix>> {
        let lap: Vec<f64> = q.iter().zip(self.lt.eigenvalues()).map(|(c, l)| -c * l).collect();
        self.lt.synthesize(&lap)
    }

    /// `H = λΔQ + L(Q)` on the grid and the coefficients of `πₙH`.
    pub fn molecular_field(&self, q: &[f64]) -> Result<(Vec<Matrix>, Vec<f64>)> {
        let tf = self.tensor_field(q)?;
        let lbulk: Vec<Matrix> = tf.values.iter().map(|m| raw::bulk_force(m, &self.params)).collect();
        let pi_h = self.project_h(q, &lbulk)?;
        let lap = self.laplacian_grid(q)?;
        let h = lap.iter().zip(&lbulk).map(|(d, l)| *d * self.params.lambda + *l).collect();
        Ok((h, pi_h))
    }

    fn project_h(&self, q: &[f64], lbulk: &[Matrix]) -> Result<Vec<f64>> {
        let lp = self.lt.project_tensor(lbulk)?;
        let lam = self.params.lambda;
        Ok(q.iter().zip(self.lt.eigenvalues()).zip(lp).map(|((c, ev), l)| -lam * ev * c + l).collect())
    }

    /// Evaluates the right-hand side and its intermediate fields.
    pub fn evaluate(&self, u: &[f64], q: &[f64]) -> Result<Evaluation> {
        self.check_state(u, q)?;
        let p = &self.params;
        let d = self.dim();
        let uf = self.velocity_field(u)?;
        let qf = self.tensor_field(q)?;
        let lbulk: Vec<Matrix> = qf.values.iter().map(|m| raw::bulk_force(m, p)).collect();
        let pi_h = self.project_h(q, &lbulk)?;
        let pi_h_grid = self.lt.synthesize(&pi_h)?;

        let npts = self.grid.len();
        let mut force = vec![[0.0; 3]; npts];
        let mut stress = Vec::with_capacity(npts);
        let mut qsrc = Vec::with_capacity(npts);
        for i in 0..npts {
            let v = &uf.values[i];
            let g = &uf.grads[i];
            let qm = &qf.values[i];
            let gq = &qf.grads[i];
            let ph = &pi_h_grid[i];
            let mut adv_q = Matrix::zeros(d);
            for a in 0..d {
                if v[a] != 0.0 {
                    adv_q += gq[a] * v[a];
                }
            }
            for j in 0..d {
                let mut f = ph.ddot(&gq[j]);
                for a in 0..d {
                    f += v[a] * g.get(a, j);
                }
                force[i][j] = f;
            }
            let nu = p.viscosity.value(qm);
            stress.push(g.sym() * nu + raw::coupling_stress(qm, ph, p.xi));
            qsrc.push(raw::s_full(g, qm, p.xi) - adv_q);
        }
        let d_dot: Vec<f64> = self.st.pair(Some(&force), Some(&stress)).into_iter().map(|v| -v).collect();
        let proj = self.lt.project_tensor(&qsrc)?;
        let h_dot = proj.iter().zip(&pi_h).map(|(s, h)| s + p.gamma * h).collect();
        Ok(Evaluation { u: uf, q: qf, bulk_force: lbulk, pi_h, pi_h_grid, d_dot, h_dot })
    }

    /// `(ḋ, ḣ)` of the Galerkin system.
    pub fn assemble_rhs(&self, state: &SimState) -> Result<(Vec<f64>, Vec<f64>)> {
        let e = self.evaluate(&state.u, &state.q)?;
        Ok((e.d_dot, e.h_dot))
    }

    /// Right-hand side on the stacked vector `[u; q]`.
    pub fn rhs_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_u() + self.n_q(), x.len())?;
        let e = self.evaluate(&x[..self.n_u()], &x[self.n_u()..])?;
        let mut out = e.d_dot;
        out.extend(e.h_dot);
        Ok(out)
    }

    /// Right-hand side and dissipation rate `∫ν|Du|² + Γ∫|πₙH|²` from one evaluation.
    pub(crate) fn rhs_and_dissipation(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(self.n_u() + self.n_q(), x.len())?;
        let e = self.evaluate(&x[..self.n_u()], &x[self.n_u()..])?;
        let w = self.grid.weights();
        let mut diss = 0.0;
        for i in 0..w.len() {
            let du = e.u.grads[i].sym();
            diss += w[i] * self.params.viscosity.value(&e.q.values[i]) * du.ddot(&du);
        }
        diss += self.params.gamma * e.pi_h.iter().map(|c| c * c).sum::<f64>();
        let mut out = e.d_dot;
        out.extend(e.h_dot);
        Ok((out, diss))
    }

    /// Energies and dissipation rates at `state` (bookkeeping fields zero).
    pub fn energy(&self, state: &SimState) -> Result<EnergyReport> {
        self.check_state(&state.u, &state.q)?;
        let p = &self.params;
        let uf = self.velocity_field(&state.u)?;
        let qf = self.tensor_field(&state.q)?;
        let w = self.grid.weights();
        let kinetic = 0.5 * state.u.iter().map(|c| c * c).sum::<f64>();
        let modal: f64 = state.q.iter().zip(self.lt.eigenvalues()).map(|(c, l)| l * c * c).sum();
        let elastic = 0.5 * p.lambda * (modal + self.tilde_dirichlet_energy);
        let mut bulk = 0.0;
        let mut diss_visc = 0.0;
        let mut lbulk = Vec::with_capacity(qf.values.len());
        for i in 0..qf.values.len() {
            let qm = &qf.values[i];
            bulk += w[i] * raw::bulk_energy(qm, p);
            let du = uf.grads[i].sym();
            diss_visc += w[i] * p.viscosity.value(qm) * du.ddot(&du);
            lbulk.push(raw::bulk_force(qm, p));
        }
        let pi_h = self.project_h(&state.q, &lbulk)?;
        let diss_h = p.gamma * pi_h.iter().map(|c| c * c).sum::<f64>();
        let lap = self.laplacian_grid(&state.q)?;
        let diss_h_full = p.gamma
            * lap
                .iter()
                .zip(&lbulk)
                .zip(w)
                .map(|((d, l), w)| {
                    let h = *d * p.lambda + *l;
                    w * h.ddot(&h)
                })
                .sum::<f64>();
        Ok(EnergyReport {
            t: state.t,
            kinetic,
            elastic,
            bulk,
            total: kinetic + elastic + bulk,
            diss_visc,
            diss_h,
            diss_h_full,
            step_dissipation: 0.0,
            identity_residual: 0.0,
        })
    }

    /// `total_energy`: kinetic, elastic, bulk and total at `state`.
    pub fn total_energy(&self, state: &SimState) -> Result<(f64, f64, f64, f64)> {
        let r = self.energy(state)?;
        Ok((r.kinetic, r.elastic, r.bulk, r.total))
    }

    /// Dissipation rate `∫ν|Du|² + Γ∫|πₙH|²` at a stacked state.
    pub fn dissipation(&self, x: &[f64]) -> Result<f64> {
        let s = SimState::from_vec(0.0, x, self.n_u());
        let r = self.energy(&s)?;
        Ok(r.diss_visc + r.diss_h)
    }

    /// Galerkin initial data: `u = 𝒫ₙu₀`, `Q = Q̃ + πₙ(Q₀ - Q̃)`.
    pub fn init_state(&self, u0: &[[f64; 3]], q0: &[Matrix]) -> Result<SimState> {
        check_dim(self.grid.len(), u0.len())?;
        check_dim(self.grid.len(), q0.len())?;
        for m in q0 {
            check_dim(self.dim(), m.dim())?;
            if !m.is_finite() {
                return Err(Error::InvalidInput("non-finite initial tensor".into()));
            }
            let dev = (raw::s0_part(m) - *m).max_abs();
            if dev > 1e-10 * m.max_abs().max(1.0) {
                return Err(Error::InvalidInput(format!("initial Q is not in S0 (deviation {dev:e})")));
            }
        }
        if u0.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput("non-finite initial velocity".into()));
        }
        let u = self.st.project_velocity(u0)?;
        let shifted: Vec<Matrix> = q0.iter().zip(&self.tilde_val).map(|(a, b)| *a - *b).collect();
        let q = self.lt.project_tensor(&shifted)?;
        Ok(SimState { t: 0.0, u, q })
    }

    /// Diagonal of the linear part of the right-hand side, used to precondition implicit solves.
    pub(crate) fn linear_diagonal(&self) -> Vec<f64> {
        let (lo, hi) = self.params.viscosity.bounds();
        let nu = 0.5 * (lo + hi);
        let mut a: Vec<f64> = self.st.eigenvalues().iter().map(|w| -0.5 * nu * w).collect();
        let p = &self.params;
        a.extend(self.lt.eigenvalues().iter().map(|l| -p.gamma * (p.lambda * l + p.a.max(0.0))));
        a
    }
}

/// Smallest grid on which the cubic advection integrand and the quartic bulk
/// projection are integrated exactly.
fn default_grid_shape(geom: &Geometry, laplace: &LaplaceBasis, stokes: &StokesBasis) -> Vec<usize> {
    use crate::basis::{ScalarMode, VectorMode};
    let dim = geom.dim();
    match geom.mode() {
        GeometryMode::PeriodicTorus => {
            let mut kmax = vec![0i64; dim];
            for s in laplace.scalars() {
                if let ScalarMode::Plane { wavevector, .. } = s {
                    for a in 0..dim {
                        kmax[a] = kmax[a].max(wavevector[a].abs());
                    }
                }
            }
            for m in stokes.modes() {
                if let VectorMode::Plane { wavevector, .. } = m {
                    for a in 0..dim {
                        kmax[a] = kmax[a].max(wavevector[a].abs());
                    }
                }
            }
            kmax.iter().map(|k| (4 * *k as usize + 2).max(8)).collect()
        }
        GeometryMode::Rectangle => {
            let mut mmax = [0usize; 2];
            for s in laplace.scalars() {
                if let ScalarMode::Product { index, .. } = s {
                    mmax[0] = mmax[0].max(index[0]);
                    mmax[1] = mmax[1].max(index[1]);
                }
            }
            let p = stokes.stream().map(|s| s.degree()).unwrap_or(0);
            (0..2).map(|a| 32usize.max(3 * mmax[a] + 16).max((3 * p + 12) / 2)).collect()
        }
    }
}
