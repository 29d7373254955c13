//! Independent checks of the discrete model: weak-form residuals, the energy
//! inequality, the `τ₁` identity, phase-space compatibility of initial data,
//! a finite-difference check of the bulk force, and discrete Sobolev norms.

use std::fmt;

use crate::basis::{face_value, gauss_legendre, BoundaryData, Grid, HarmonicExtension, LaplaceTables, StokesTables};
use crate::error::{check_dim, Error, Result};
use crate::sim::{EnergyReport, GalerkinSystem, Trajectory};
use crate::tensor::{raw, s0_basis, Matrix, ModelParams};

/// Outcome of one check. `passed` is `residual <= tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub context: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64, context: impl Into<String>) -> Self {
        Self { name: name.into(), residual, tolerance, passed: residual <= tolerance, context: context.into() }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} residual={:.3e} tolerance={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.residual,
            self.tolerance
        )?;
        if !self.context.is_empty() {
            write!(f, " {}", self.context)?;
        }
        Ok(())
    }
}

/// Gauss points per output interval for time integrals.
const TIME_GAUSS: usize = 4;

/// Time cutoff `φ(t) = (1 − t/T)²` and its derivative.
fn cutoff(t: f64, t_end: f64) -> (f64, f64) {
    let s = 1.0 - t / t_end;
    (s * s, -2.0 * s / t_end)
}

/// Cubic Hermite interpolation of a trajectory using the Galerkin vector field
/// at the nodes, sampled at Gauss points of every output interval.
struct TimeSamples {
    /// `(t, weight, x)`.
    nodes: Vec<(f64, f64, Vec<f64>)>,
    t_end: f64,
}

impl TimeSamples {
    fn new(sys: &GalerkinSystem, traj: &Trajectory) -> Result<Self> {
        if traj.states.len() < 2 {
            return Err(Error::InvalidInput("trajectory needs at least two states".into()));
        }
        let t0 = traj.states[0].t;
        let t_end = traj.states.last().map(|s| s.t).unwrap_or(t0);
        if t0 != 0.0 || !(t_end > 0.0) {
            return Err(Error::InvalidInput("trajectory must start at t = 0 and advance".into()));
        }
        let xs: Vec<Vec<f64>> = traj.states.iter().map(|s| s.to_vec()).collect();
        let fs = xs.iter().map(|x| sys.rhs_vec(x)).collect::<Result<Vec<_>>>()?;
        let (gp, gw) = gauss_legendre(TIME_GAUSS);
        let mut nodes = Vec::new();
        for n in 0..xs.len() - 1 {
            let (ta, tb) = (traj.states[n].t, traj.states[n + 1].t);
            let h = tb - ta;
            if !(h > 0.0) {
                return Err(Error::InvalidInput("trajectory times must increase".into()));
            }
            for (p, w) in gp.iter().zip(&gw) {
                let s = 0.5 * (p + 1.0);
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                let x = (0..xs[n].len())
                    .map(|i| h00 * xs[n][i] + h10 * h * fs[n][i] + h01 * xs[n + 1][i] + h11 * h * fs[n + 1][i])
                    .collect();
                nodes.push((ta + s * h, 0.5 * h * w, x));
            }
        }
        Ok(Self { nodes, t_end })
    }
}

/// Molecular field `H = λΔQ + L(Q)` on the grid and its projection `πₙH`.
fn molecular(sys: &GalerkinSystem, q: &[f64]) -> Result<(Vec<Matrix>, Vec<f64>)> {
    let p = sys.params();
    let lt = sys.laplace_tables();
    let qf = sys.tensor_field(q)?;
    let lap = sys.laplacian_grid(q)?;
    let h: Vec<Matrix> = qf.values.iter().zip(&lap).map(|(qm, l)| *l * p.lambda + raw::bulk_force(qm, p)).collect();
    let pi_h = lt.project_tensor(&h)?;
    Ok((h, pi_h))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Weak form of the velocity equation against `v(t, x) = φ(t) Σ c_k v_k(x)` with
/// `φ(t) = (1 − t/T)²`:
///
/// `−∫(u, ∂ₜv) − (u₀, v(0)) + ∫[(u·∇u, v) + (ν(Q)Du, Dv) + ((σ + ξτ₂)(Q, πₙH) − (2ξ/d)πₙH, ∇v) + (πₙH:∇Q, v)]`.
///
/// Spatial integrals use the system quadrature; time integrals use Gauss
/// points on each output interval of a cubic Hermite interpolant. `test` is
/// normalised to unit length. The context reports the change when `πₙH` is
/// replaced by the unprojected `H`.
pub fn weak_residual_u(sys: &GalerkinSystem, traj: &Trajectory, test: &[f64], tolerance: f64) -> Result<CheckReport> {
    check_dim(sys.n_u(), test.len())?;
    let nt = norm2(test);
    if nt == 0.0 {
        return Err(Error::InvalidInput("zero test function".into()));
    }
    let c: Vec<f64> = test.iter().map(|v| v / nt).collect();
    let ts = TimeSamples::new(sys, traj)?;
    let st = sys.stokes_tables();
    let n_u = sys.n_u();
    let dot = |a: &[f64]| a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();

    let u0 = &traj.states[0].u;
    let mut lhs = -dot(u0) * cutoff(0.0, ts.t_end).0;
    let mut gap = 0.0;
    for (t, w, x) in &ts.nodes {
        let (phi, dphi) = cutoff(*t, ts.t_end);
        let (u, q) = x.split_at(n_u);
        lhs -= w * dphi * dot(u);
        let (h, pi_h) = molecular(sys, q)?;
        let pi_grid = sys.laplace_tables().synthesize(&pi_h)?;
        let with_proj = velocity_integrand(sys, u, q, &pi_grid)?;
        let with_full = velocity_integrand(sys, u, q, &h)?;
        let (a, b) = (
            dot(&st.pair(Some(&with_proj.0), Some(&with_proj.1))),
            dot(&st.pair(Some(&with_full.0), Some(&with_full.1))),
        );
        lhs += w * phi * a;
        gap += w * phi * (b - a);
    }
    Ok(CheckReport::new("weak_residual_u", lhs.abs(), tolerance, format!("unprojected_H_gap={:.3e}", gap.abs())))
}

/// Force `(u·∇)u + X:∇Q` and stress `ν(Q)Du + (σ + ξτ₂)(Q, X) − (2ξ/d)X` on the grid.
fn velocity_integrand(
    sys: &GalerkinSystem,
    u: &[f64],
    q: &[f64],
    x: &[Matrix],
) -> Result<(Vec<[f64; 3]>, Vec<Matrix>)> {
    let p = sys.params();
    let d = sys.dim();
    let uf = sys.velocity_field(u)?;
    let qf = sys.tensor_field(q)?;
    let mut force = vec![[0.0; 3]; x.len()];
    let mut stress = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        for j in 0..d {
            let mut f = x[i].ddot(&qf.grads[i][j]);
            for a in 0..d {
                f += uf.values[i][a] * uf.grads[i].get(a, j);
            }
            force[i][j] = f;
        }
        let nu = p.viscosity.value(&qf.values[i]);
        stress.push(
            uf.grads[i].sym() * nu + raw::sigma(&qf.values[i], &x[i]) + raw::tau2(&qf.values[i], &x[i]) * p.xi
                - x[i] * (2.0 * p.xi / d as f64),
        );
    }
    Ok((force, stress))
}

/// Weak form of the tensor equation against `Ψ(t, x) = φ(t) Σ c_l e_l(x)`:
///
/// `−∫(Q, ∂ₜΨ) − (Q₀, Ψ(0)) + ∫((u·∇)Q − S(∇u, Q), Ψ) − Γ∫(πₙH, Ψ)`.
///
/// The context reports the change when `πₙH` is replaced by `H`.
pub fn weak_residual_q(sys: &GalerkinSystem, traj: &Trajectory, test: &[f64], tolerance: f64) -> Result<CheckReport> {
    check_dim(sys.n_q(), test.len())?;
    let nt = norm2(test);
    if nt == 0.0 {
        return Err(Error::InvalidInput("zero test function".into()));
    }
    let c: Vec<f64> = test.iter().map(|v| v / nt).collect();
    let ts = TimeSamples::new(sys, traj)?;
    let p = sys.params();
    let d = sys.dim();
    let lt = sys.laplace_tables();
    let n_u = sys.n_u();
    let dot = |a: &[f64]| a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();

    // (Q, e_l) by quadrature, so the lift enters exactly as it does in the weak form
    let pair_q = |q: &[f64]| -> Result<f64> { Ok(dot(&lt.project_tensor(&sys.tensor_field(q)?.values)?)) };
    let mut lhs = -pair_q(&traj.states[0].q)? * cutoff(0.0, ts.t_end).0;
    let mut gap = 0.0;
    for (t, w, x) in &ts.nodes {
        let (phi, dphi) = cutoff(*t, ts.t_end);
        let (u, q) = x.split_at(n_u);
        lhs -= w * dphi * pair_q(q)?;
        let uf = sys.velocity_field(u)?;
        let qf = sys.tensor_field(q)?;
        let src: Vec<Matrix> = (0..qf.values.len())
            .map(|i| {
                let mut adv = Matrix::zeros(d);
                for a in 0..d {
                    adv += qf.grads[i][a] * uf.values[i][a];
                }
                adv - raw::s_full(&uf.grads[i], &qf.values[i], p.xi)
            })
            .collect();
        let (h, pi_h) = molecular(sys, q)?;
        let full = dot(&lt.project_tensor(&h)?);
        let proj = dot(&pi_h);
        lhs += w * phi * (dot(&lt.project_tensor(&src)?) - p.gamma * proj);
        gap += w * phi * p.gamma * (full - proj);
    }
    Ok(CheckReport::new("weak_residual_q", lhs.abs(), tolerance, format!("unprojected_H_gap={:.3e}", gap.abs())))
}

/// Energy inequality `E(t) + ∫₀ᵗ(ν|Du|² + Γ|πₙH|²) ≤ E(0) + slack` along a run,
/// together with nonnegativity of every reported dissipation rate. The
/// same quantity with the unprojected `H` (trapezoidal in time) is reported
/// in the context; it exceeds the projected one by `Γ∫(|H|² − |πₙH|²) ≥ 0`.
pub fn energy_inequality_check(reports: &[EnergyReport], slack: f64) -> CheckReport {
    let Some(first) = reports.first() else {
        return CheckReport::new("energy_inequality", 0.0, slack, "no reports");
    };
    let e0 = first.total;
    let mut cum = 0.0;
    let mut cum_full = 0.0;
    let mut excess: f64 = 0.0;
    let mut negative: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for (k, r) in reports.iter().enumerate() {
        if k > 0 {
            let prev = &reports[k - 1];
            cum += r.step_dissipation;
            let rate = |e: &EnergyReport| e.diss_visc + e.diss_h_full;
            cum_full += 0.5 * (r.t - prev.t) * (rate(prev) + rate(r));
            negative = negative.max(-r.step_dissipation);
        }
        negative = negative.max(-r.diss_visc).max(-r.diss_h).max(-r.diss_h_full);
        excess = excess.max(r.total + cum - e0);
        identity = identity.max((r.total + cum - e0).abs());
        gap = gap.max(r.total + cum_full - e0);
    }
    let residual = excess.max(0.0).max(negative);
    CheckReport::new(
        "energy_inequality",
        residual,
        slack,
        format!("identity_residual={identity:.3e} unprojected_excess={gap:.3e}"),
    )
}

/// `∫τ₁(Q):∇v` against `∫(H(Q):∇Q)·v` with `τ₁ = −λ∇Q⊙∇Q` (`(∇Q⊙∇Q)_ij = ∂ᵢQ:∂ⱼQ`)
/// and `H = λΔQ + L(Q)`, on a uniform grid of `shape` and on the doubled grid.
/// The residual is taken on `shape`; the context carries the doubled-grid value.
pub fn tau1_weak_identity(sys: &GalerkinSystem, q: &[f64], v: &[f64], shape: &[usize]) -> Result<CheckReport> {
    let geom = sys.geometry();
    if !geom.is_periodic() {
        return Err(Error::Unsupported("tau1 identity check needs periodic geometry".into()));
    }
    check_dim(sys.n_q(), q.len())?;
    check_dim(sys.n_u(), v.len())?;
    check_dim(geom.dim(), shape.len())?;
    let coarse = tau1_residual(sys, q, v, shape)?;
    let fine_shape: Vec<usize> = shape.iter().map(|n| 2 * n).collect();
    let fine = tau1_residual(sys, q, v, &fine_shape)?;
    Ok(CheckReport::new("tau1_weak_identity", coarse, 1e-10, format!("grid={shape:?} refined_residual={fine:.3e}")))
}

fn tau1_residual(sys: &GalerkinSystem, q: &[f64], v: &[f64], shape: &[usize]) -> Result<f64> {
    let p = sys.params();
    let d = sys.dim();
    let grid = Grid::uniform(sys.geometry(), shape);
    let lt = LaplaceTables::new(sys.laplace(), &grid)?;
    let st = StokesTables::new(sys.stokes(), &grid)?;
    let (qv, qg) = lt.synthesize_with_grad(q)?;
    let lap_c: Vec<f64> = q.iter().zip(sys.laplace().eigenvalues()).map(|(c, l)| -c * l).collect();
    let lap = lt.synthesize(&lap_c)?;
    let (vv, vg) = st.synthesize(v)?;
    let w = grid.weights();
    let (mut lhs, mut rhs, mut scale) = (0.0, 0.0, 0.0);
    for k in 0..grid.len() {
        let mut a = 0.0;
        for i in 0..d {
            for j in 0..d {
                a -= p.lambda * qg[k][i].ddot(&qg[k][j]) * vg[k].get(i, j);
            }
        }
        let h = lap[k] * p.lambda + raw::bulk_force(&qv[k], p);
        let b: f64 = (0..d).map(|j| h.ddot(&qg[k][j]) * vv[k][j]).sum();
        lhs += w[k] * a;
        rhs += w[k] * b;
        scale += w[k] * a.abs();
    }
    Ok((lhs - rhs).abs() / scale.max(1.0))
}

/// Boundary compatibility of initial data `u₀ = Σ u0_k v_k`,
/// `Q₀ = lift + Σ q0_l e_l` on a rectangle:
/// (a) `Q₀ = Q_D` on Γ_D, (b) `∂ₙQ₀ = Q_N` on Γ_N, and
/// (c) the tensor right-hand side `−(u₀·∇)Q₀ + S(∇u₀, Q₀) + Γ(λΔQ₀ + L(Q₀))`
/// vanishes on Γ_D. Traces use closed-form evaluation at 65 points per face.
/// The residual is the largest of the three maxima.
pub fn phase_space_check(
    sys: &GalerkinSystem,
    u0: &[f64],
    lift: &HarmonicExtension,
    q0: &[f64],
    data: &BoundaryData,
    tolerance: f64,
) -> Result<CheckReport> {
    let geom = sys.geometry();
    if geom.is_periodic() {
        return Err(Error::Unsupported("phase-space check needs rectangle geometry".into()));
    }
    check_dim(sys.n_u(), u0.len())?;
    check_dim(sys.n_q(), q0.len())?;
    if lift.dim() != geom.dim() {
        return Err(Error::DimMismatch { expected: geom.dim(), got: lift.dim() });
    }
    let p = sys.params();
    let d = geom.dim();
    let samples = 65;
    let face_points = |axis: usize, high: bool| -> Vec<(f64, [f64; 3])> {
        let t = 1 - axis;
        let lt = geom.lengths()[t];
        (0..samples)
            .map(|k| {
                let s = lt * k as f64 / (samples - 1) as f64;
                let mut x = [0.0; 3];
                x[axis] = if high { geom.lengths()[axis] } else { 0.0 };
                x[t] = s;
                (s, x)
            })
            .collect()
    };
    let q_at = |x: &[f64; 3]| {
        let (lv, lg) = lift.eval(x);
        let (mv, mg) = sys.laplace().eval_field(q0, x);
        (lv + mv, [lg[0] + mg[0], lg[1] + mg[1], lg[2] + mg[2]])
    };

    let (mut trace, mut neumann, mut e_q): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for face in geom.dirichlet_faces() {
        let given = data.dirichlet.iter().find(|f| f.face == *face);
        for (s, x) in face_points(face.axis, face.normal_sign() > 0.0) {
            let (qv, qg) = q_at(&x);
            let want = given.map(|f| face_value(geom, f, s)).unwrap_or_else(|| Matrix::zeros(d));
            trace = trace.max((qv - want).norm());

            let (uv, ug) = sys.stokes().eval_field(u0, &x);
            let lap = lift.laplacian(&x) + sys.laplace().eval_laplacian(q0, &x);
            let mut adv = Matrix::zeros(d);
            for a in 0..d {
                adv += qg[a] * uv[a];
            }
            let rhs = raw::s_full(&ug, &qv, p.xi) - adv + (lap * p.lambda + raw::bulk_force(&qv, p)) * p.gamma;
            e_q = e_q.max(rhs.norm());
        }
    }
    for face in geom.neumann_faces() {
        let given = data.neumann.iter().find(|f| f.face == face);
        for (s, x) in face_points(face.axis, face.normal_sign() > 0.0) {
            let (_, qg) = q_at(&x);
            let dn = qg[face.axis] * face.normal_sign();
            let want = given.map(|f| face_value(geom, f, s)).unwrap_or_else(|| Matrix::zeros(d));
            neumann = neumann.max((dn - want).norm());
        }
    }
    let residual = trace.max(neumann).max(e_q);
    Ok(CheckReport::new(
        "phase_space",
        residual,
        tolerance,
        format!("dirichlet_trace={trace:.3e} neumann_trace={neumann:.3e} rhs_trace={e_q:.3e}"),
    ))
}

/// Central differences of `f_B` along the orthonormal 𝕊₀ basis against `−L(Q)`.
/// The residual is the largest relative error over `samples` (absolute where `L(Q) = 0`).
pub fn gradient_check_bulk(samples: &[Matrix], params: &ModelParams, step: f64) -> Result<CheckReport> {
    if !(1e-7..=1e-3).contains(&step) {
        return Err(Error::InvalidInput(format!("step {step} outside [1e-7, 1e-3]")));
    }
    let mut worst: f64 = 0.0;
    for q in samples {
        let basis = s0_basis(q.dim());
        let l = raw::bulk_force(q, params);
        let mut err = 0.0;
        for e in &basis {
            let fp = raw::bulk_energy(&(*q + *e * step), params);
            let fm = raw::bulk_energy(&(*q - *e * step), params);
            let fd = (fp - fm) / (2.0 * step);
            err += (fd + l.ddot(e)).powi(2);
        }
        let err = err.sqrt();
        let ln = l.norm();
        worst = worst.max(if ln > 0.0 { err / ln } else { err });
    }
    Ok(CheckReport::new("gradient_check_bulk", worst, 1e-6, format!("samples={} step={step:e}", samples.len())))
}

/// Which discrete norm to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    H2,
    Linf,
}

/// A field given by its coefficients in one of the system's bases.
#[derive(Clone, Copy, Debug)]
pub enum FieldRef<'a> {
    Velocity(&'a [f64]),
    Tensor(&'a [f64]),
}

/// Parseval norms with weights `1`, `1 + λₖ`, `(1 + λₖ)²`, or the grid maximum.
/// The lift is not included.
pub fn discrete_norm(sys: &GalerkinSystem, field: FieldRef<'_>, which: NormKind) -> Result<f64> {
    let (coeffs, eig) = match field {
        FieldRef::Velocity(c) => (c, sys.stokes().eigenvalues()),
        FieldRef::Tensor(c) => (c, sys.laplace().eigenvalues()),
    };
    check_dim(eig.len(), coeffs.len())?;
    let weighted = |pow: i32| coeffs.iter().zip(eig).map(|(c, l)| (1.0 + l).powi(pow) * c * c).sum::<f64>().sqrt();
    Ok(match which {
        NormKind::L2 => weighted(0),
        NormKind::H1 => weighted(1),
        NormKind::H2 => weighted(2),
        NormKind::Linf => match field {
            FieldRef::Velocity(c) => sys
                .stokes_tables()
                .synthesize_values(c)?
                .iter()
                .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
                .fold(0.0, f64::max),
            FieldRef::Tensor(c) => sys.laplace_tables().synthesize(c)?.iter().map(|m| m.norm()).fold(0.0, f64::max),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{harmonic_extension, Face, FaceData, Geometry};
    use crate::sim::{run, Discretization, Integrator, SimState};
    use std::f64::consts::PI;

    fn torus_sys(xi: f64) -> GalerkinSystem {
        let g = Geometry::torus(&[2.0 * PI, 2.0 * PI]).unwrap();
        let p = ModelParams { xi, ..Default::default() };
        GalerkinSystem::new(&g, &p, &Discretization { n_q: 12, n_u: 6, grid: None }, None).unwrap()
    }

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn equilibrium_weak_residuals_vanish() {
        let s = torus_sys(0.5);
        let traj = Trajectory { states: (0..=4).map(|k| SimState::zeros(0.25 * k as f64, s.n_u(), s.n_q())).collect() };
        for i in 0..3 {
            assert!(weak_residual_u(&s, &traj, &unit(s.n_u(), i), 1e-10).unwrap().passed);
            assert!(weak_residual_q(&s, &traj, &unit(s.n_q(), i), 1e-10).unwrap().passed);
        }
    }

    #[test]
    fn energy_check_catches_negated_dissipation() {
        let s = torus_sys(0.0);
        let mut x = SimState::zeros(0.0, s.n_u(), s.n_q());
        x.q[4] = 0.3;
        x.u[3] = 0.2;
        let out = run(&s, &x, &Integrator::Rk45 { tol: 1e-10, max_dt: 0.05 }, 0.3, None).unwrap();
        let e0 = out.reports[0].total;
        assert!(energy_inequality_check(&out.reports, 1e-8 * (1.0 + e0)).passed);
        let flipped: Vec<EnergyReport> = out
            .reports
            .iter()
            .map(|r| EnergyReport {
                diss_visc: -r.diss_visc,
                diss_h: -r.diss_h,
                diss_h_full: -r.diss_h_full,
                step_dissipation: -r.step_dissipation,
                ..*r
            })
            .collect();
        assert!(!energy_inequality_check(&flipped, 1e-8 * (1.0 + e0)).passed);
    }

    #[test]
    fn tau1_trivial_cases() {
        let s = torus_sys(0.0);
        let zero_q = vec![0.0; s.n_q()];
        let r = tau1_weak_identity(&s, &zero_q, &unit(s.n_u(), 3), &[8, 8]).unwrap();
        assert!(r.passed && r.residual == 0.0);
        let r = tau1_weak_identity(&s, &unit(s.n_q(), 5), &vec![0.0; s.n_u()], &[8, 8]).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn bulk_gradient_quadratic_is_exact() {
        let p = ModelParams { b: 0.0, c: 1e-300, ..Default::default() };
        let q = Matrix::from_rows(&[&[0.3, 0.2], &[0.2, -0.3]]).unwrap();
        let r = gradient_check_bulk(&[q], &p, 1e-3).unwrap();
        assert!(r.residual < 1e-12, "{}", r.residual);
        assert!(gradient_check_bulk(&[q], &p, 1e-1).is_err());
        let zero = gradient_check_bulk(&[Matrix::zeros(2)], &ModelParams::default(), 1e-5).unwrap();
        assert_eq!(zero.residual, 0.0);
    }

    #[test]
    fn norms_of_unit_modes() {
        let s = torus_sys(0.0);
        let i = s.laplace().eigenvalues().iter().position(|l| *l == 1.0).unwrap();
        let e = unit(s.n_q(), i);
        assert!((discrete_norm(&s, FieldRef::Tensor(&e), NormKind::L2).unwrap() - 1.0).abs() < 1e-15);
        assert!((discrete_norm(&s, FieldRef::Tensor(&e), NormKind::H1).unwrap().powi(2) - 2.0).abs() < 1e-14);
        let z = vec![0.0; s.n_u()];
        for k in [NormKind::L2, NormKind::H1, NormKind::H2, NormKind::Linf] {
            assert_eq!(discrete_norm(&s, FieldRef::Velocity(&z), k).unwrap(), 0.0);
        }
    }

    #[test]
    fn phase_space_detects_trace_mismatch() {
        let g =
            Geometry::rectangle(&[PI, PI], &[Face::parse("x_low").unwrap(), Face::parse("x_high").unwrap()]).unwrap();
        let s = GalerkinSystem::new(&g, &ModelParams::default(), &Discretization { n_q: 8, n_u: 4, grid: None }, None)
            .unwrap();
        let c = Matrix::from_rows(&[&[0.2, 0.0], &[0.0, -0.2]]).unwrap();
        let data = BoundaryData {
            dirichlet: vec![FaceData { face: Face::parse("x_low").unwrap(), terms: vec![(0, c)] }],
            neumann: vec![],
        };
        let zero = HarmonicExtension::zero(2);
        let r = phase_space_check(&s, &vec![0.0; s.n_u()], &zero, &vec![0.0; s.n_q()], &data, 1e-10).unwrap();
        assert!(!r.passed);
        assert!((r.residual - c.norm()).abs() < 1e-14);
        let lift = harmonic_extension(&g, &data.dirichlet, &[]).unwrap();
        let r = phase_space_check(&s, &vec![0.0; s.n_u()], &lift, &vec![0.0; s.n_q()], &data, 1e-10).unwrap();
        assert!(r.context.contains("dirichlet_trace=0.000e0"), "{}", r.context);
    }
}
