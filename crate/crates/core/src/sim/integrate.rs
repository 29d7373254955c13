use nalgebra::{DMatrix, DVector};

use super::{EnergyReport, GalerkinSystem, SimState};
use crate::error::{Error, Result};

/// Stage-equation tolerance of the implicit midpoint rule.
const STAGE_TOL: f64 = 1e-11;
const MAX_FIXED_POINT: usize = 50;
const MAX_NEWTON: usize = 20;

/// Time integrator choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integrator {
    /// Implicit midpoint rule with fixed step `dt`.
    ImplicitMidpoint { dt: f64 },
    /// Adaptive Dormand–Prince 5(4) with mixed tolerance `tol`, steps capped at `max_dt`.
    Rk45 { tol: f64, max_dt: f64 },
}

/// Diagnostics of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
    pub newton: bool,
    /// Dissipation integrated over the step by the integrator's own quadrature.
    pub dissipation: f64,
}

/// States at the requested output times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<SimState>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    /// One report for the initial state and one per accepted step.
    pub reports: Vec<EnergyReport>,
    pub steps: usize,
    pub rejected: usize,
}

impl RunOutput {
    /// `E(t_end) + ∫dissipation − E(0)`.
    pub fn cumulative_identity_residual(&self) -> f64 {
        let first = self.reports.first().map(|r| r.total).unwrap_or(0.0);
        let last = self.reports.last().map(|r| r.total).unwrap_or(0.0);
        let diss: f64 = self.reports.iter().map(|r| r.step_dissipation).sum();
        last + diss - first
    }
}

/// Per-step residuals `E(t_{k+1}) − E(t_k) + ∫_{t_k}^{t_{k+1}} dissipation`.
pub fn energy_identity_residual(reports: &[EnergyReport]) -> Vec<f64> {
    reports.windows(2).map(|w| w[1].total - w[0].total + w[1].step_dissipation).collect()
}

/// Advances `state` by one step of size `dt`.
///
/// For `Rk45` this is a single Dormand–Prince step without error control.
pub fn step(sys: &GalerkinSystem, state: &SimState, dt: f64, integrator: &Integrator) -> Result<(SimState, StepInfo)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let x = state.to_vec();
    let (xn, info) = match integrator {
        Integrator::ImplicitMidpoint { .. } => midpoint_step(sys, &x, dt)?,
        Integrator::Rk45 { .. } => {
            let (k1, d1) = sys.rhs_and_dissipation(&x)?;
            let r = dp_step(sys, &x, &k1, d1, dt)?;
            (r.x, StepInfo { iterations: 1, residual: 0.0, newton: false, dissipation: r.diss })
        }
    };
    Ok((SimState::from_vec(state.t + dt, &xn, sys.n_u()), info))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `y = x + h/2 f(y)` and returns `2y − x`.
fn midpoint_step(sys: &GalerkinSystem, x: &[f64], h: f64) -> Result<(Vec<f64>, StepInfo)> {
    let a = sys.linear_diagonal();
    let n = x.len();
    let mut y = x.to_vec();
    let mut res = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;
    for it in 1..=MAX_FIXED_POINT {
        iters = it;
        let fy = sys.rhs_vec(&y)?;
        let r: Vec<f64> = (0..n).map(|i| y[i] - x[i] - 0.5 * h * fy[i]).collect();
        res = max_abs(&r);
        if res <= STAGE_TOL * max_abs(&y).max(1.0) {
            converged = true;
            break;
        }
        if !res.is_finite() {
            break;
        }
        for i in 0..n {
            y[i] = (x[i] + 0.5 * h * (fy[i] - a[i] * y[i])) / (1.0 - 0.5 * h * a[i]);
        }
    }
    let mut newton = false;
    if !converged {
        newton = true;
        y = x.to_vec();
        for it in 1..=MAX_NEWTON {
            iters += 1;
            let fy = sys.rhs_vec(&y)?;
            let r: Vec<f64> = (0..n).map(|i| y[i] - x[i] - 0.5 * h * fy[i]).collect();
            res = max_abs(&r);
            if res <= STAGE_TOL * max_abs(&y).max(1.0) {
                converged = true;
                break;
            }
            if it == MAX_NEWTON || !res.is_finite() {
                break;
            }
            let jac = stage_jacobian(sys, &y, &fy, h)?;
            let dy = jac
                .lu()
                .solve(&DVector::from_vec(r))
                .ok_or_else(|| Error::LinearSolve("singular midpoint Jacobian".into()))?;
            for i in 0..n {
                y[i] -= dy[i];
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: iters, residual: res });
    }
    let diss = sys.dissipation(&y)?;
    let xn = (0..n).map(|i| 2.0 * y[i] - x[i]).collect();
    Ok((xn, StepInfo { iterations: iters, residual: res, newton, dissipation: h * diss }))
}

/// `I − h/2 ∂f/∂y` by forward differences.
fn stage_jacobian(sys: &GalerkinSystem, y: &[f64], fy: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = y.len();
    let mut jac = DMatrix::<f64>::identity(n, n);
    let mut yp = y.to_vec();
    for j in 0..n {
        let eps = 1e-7 * y[j].abs().max(1.0);
        yp[j] = y[j] + eps;
        let fp = sys.rhs_vec(&yp)?;
        yp[j] = y[j];
        for i in 0..n {
            jac[(i, j)] -= 0.5 * h * (fp[i] - fy[i]) / eps;
        }
    }
    Ok(jac)
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

struct DpResult {
    x: Vec<f64>,
    /// Dissipation integrated over the step (fifth-order weights).
    diss: f64,
    /// Error estimates for the state and for the dissipation integral.
    err: Vec<f64>,
    err_diss: f64,
    /// Right-hand side and dissipation rate at the new state (first-same-as-last).
    k_last: Vec<f64>,
    d_last: f64,
}

fn dp_step(sys: &GalerkinSystem, x: &[f64], k1: &[f64], d1: f64, h: f64) -> Result<DpResult> {
    let n = x.len();
    let mut ks: Vec<Vec<f64>> = vec![k1.to_vec()];
    let mut ds = vec![d1];
    let mut xs = x.to_vec();
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, k) in ks.iter().enumerate() {
                acc += A[s][j] * k[i];
            }
            xs[i] = x[i] + h * acc;
        }
        let (k, d) = sys.rhs_and_dissipation(&xs)?;
        ks.push(k);
        ds.push(d);
    }
    let mut err = vec![0.0; n];
    for i in 0..n {
        let mut e = 0.0;
        for s in 0..7 {
            let b5 = if s < 6 { A[6][s] } else { 0.0 };
            e += (b5 - B4[s]) * ks[s][i];
        }
        err[i] = h * e;
    }
    let mut diss = 0.0;
    let mut err_diss = 0.0;
    for s in 0..7 {
        let b5 = if s < 6 { A[6][s] } else { 0.0 };
        diss += b5 * ds[s];
        err_diss += (b5 - B4[s]) * ds[s];
    }
    Ok(DpResult {
        x: xs,
        diss: h * diss,
        err,
        err_diss: h * err_diss,
        k_last: ks.pop().unwrap(),
        d_last: ds.pop().unwrap(),
    })
}

/// Integrates from `init` to `t_end`, recording states at `outputs` (sorted, inside
/// `[init.t, t_end]`; defaults to the start and end times) and an energy report
/// after every step.
pub fn run(
    sys: &GalerkinSystem,
    init: &SimState,
    integrator: &Integrator,
    t_end: f64,
    outputs: Option<&[f64]>,
) -> Result<RunOutput> {
    let t0 = init.t;
    if !(t_end >= t0 && t_end.is_finite()) {
        return Err(Error::InvalidInput("t_end must be finite and not before the initial time".into()));
    }
    let outs: Vec<f64> = match outputs {
        Some(o) => o.to_vec(),
        None if t_end > t0 => vec![t0, t_end],
        None => vec![t0],
    };
    if outs.windows(2).any(|w| w[1] < w[0]) || outs.iter().any(|t| *t < t0 || *t > t_end) {
        return Err(Error::InvalidInput("output times must be sorted and inside the run interval".into()));
    }
    let mut stops: Vec<f64> = outs.clone();
    stops.push(t_end);
    stops.dedup();

    let scale = t_end.abs().max(1.0);
    let snap = 1e-12 * scale;
    let mut state = init.clone();
    let mut reports = vec![sys.energy(&state)?];
    let mut traj = Trajectory::default();
    let mut next_out = 0;
    let record = |state: &SimState, next_out: &mut usize, traj: &mut Trajectory| {
        while *next_out < outs.len() && outs[*next_out] <= state.t + snap {
            let mut s = state.clone();
            s.t = outs[*next_out];
            traj.states.push(s);
            *next_out += 1;
        }
    };
    record(&state, &mut next_out, &mut traj);
    let mut steps = 0;
    let mut rejected = 0;

    match *integrator {
        Integrator::ImplicitMidpoint { dt } => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidInput("dt must be positive".into()));
            }
            let mut stop = 0;
            while state.t < t_end - snap {
                while stops[stop] <= state.t + snap {
                    stop += 1;
                }
                let target = stops[stop];
                let mut h = dt.min(target - state.t);
                if target - (state.t + h) < snap {
                    h = target - state.t;
                }
                let x = state.to_vec();
                let (xn, info) = midpoint_step(sys, &x, h)?;
                let t = if (target - state.t - h).abs() < snap { target } else { state.t + h };
                state = SimState::from_vec(t, &xn, sys.n_u());
                push_report(sys, &state, info.dissipation, &mut reports)?;
                steps += 1;
                record(&state, &mut next_out, &mut traj);
            }
        }
        Integrator::Rk45 { tol, max_dt } => {
            if !(tol > 0.0 && max_dt > 0.0) {
                return Err(Error::InvalidInput("rk45 needs positive tol and max_dt".into()));
            }
            let mut x = state.to_vec();
            let (mut k1, mut d1) = sys.rhs_and_dissipation(&x)?;
            let mut h = initial_step(sys, &x, &k1, tol)?.min(max_dt);
            let mut stop = 0;
            while state.t < t_end - snap {
                while stops[stop] <= state.t + snap {
                    stop += 1;
                }
                let target = stops[stop];
                let hit = h >= target - state.t - snap;
                let hs = if hit { target - state.t } else { h };
                let r = dp_step(sys, &x, &k1, d1, hs)?;
                let mut acc = 0.0;
                for i in 0..x.len() {
                    let sc = tol + tol * x[i].abs().max(r.x[i].abs());
                    acc += (r.err[i] / sc).powi(2);
                }
                let sd = tol + tol * r.diss.abs();
                acc += (r.err_diss / sd).powi(2);
                let err = (acc / (x.len() + 1) as f64).sqrt();
                if !err.is_finite() {
                    return Err(Error::NonConvergence { iterations: steps, residual: err });
                }
                if err <= 1.0 {
                    x = r.x;
                    k1 = r.k_last;
                    d1 = r.d_last;
                    let t = if hit { target } else { state.t + hs };
                    state = SimState::from_vec(t, &x, sys.n_u());
                    push_report(sys, &state, r.diss, &mut reports)?;
                    steps += 1;
                    record(&state, &mut next_out, &mut traj);
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // a step shortened to hit an output time does not shrink the next one
                    h = if hit && hs < h { h } else { hs * fac }.min(max_dt);
                } else {
                    rejected += 1;
                    h = hs * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    if h < 1e-14 * scale {
                        return Err(Error::NonConvergence { iterations: steps, residual: err });
                    }
                }
            }
        }
    }
    Ok(RunOutput { trajectory: traj, reports, steps, rejected })
}

fn push_report(sys: &GalerkinSystem, state: &SimState, step_diss: f64, reports: &mut Vec<EnergyReport>) -> Result<()> {
    let mut r = sys.energy(state)?;
    let prev = reports.last().map(|p| p.total).unwrap_or(r.total);
    r.step_dissipation = step_diss;
    r.identity_residual = r.total - prev + step_diss;
    reports.push(r);
    Ok(())
}

/// Starting step size following Hairer, Nørsett & Wanner.
fn initial_step(sys: &GalerkinSystem, x: &[f64], f0: &[f64], tol: f64) -> Result<f64> {
    let n = x.len() as f64;
    let sc: Vec<f64> = x.iter().map(|v| tol + tol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = norm(x);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let x1: Vec<f64> = x.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let f1 = sys.rhs_vec(&x1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = norm(&diff);
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1))
}

#[cfg(test)]
mod tests {
    use super::super::{Discretization, GalerkinSystem};
    use super::*;
    use crate::basis::Geometry;
    use crate::tensor::ModelParams;
    use std::f64::consts::PI;

    fn sys(params: ModelParams) -> GalerkinSystem {
        let g = Geometry::torus(&[2.0 * PI, 2.0 * PI]).unwrap();
        GalerkinSystem::new(&g, &params, &Discretization { n_q: 12, n_u: 6, grid: None }, None).unwrap()
    }

    #[test]
    fn zero_state_is_fixed() {
        let s = sys(ModelParams::default());
        let z = SimState::zeros(0.0, s.n_u(), s.n_q());
        let (n, _) = step(&s, &z, 0.1, &Integrator::ImplicitMidpoint { dt: 0.1 }).unwrap();
        assert!(n.u.iter().chain(&n.q).all(|v| *v == 0.0));
        assert_eq!(n.t, 0.1);
    }

    #[test]
    fn midpoint_amplification_factor() {
        let params = ModelParams { b: 0.0, c: 1e-300, ..Default::default() };
        let s = sys(params);
        let mut z = SimState::zeros(0.0, s.n_u(), s.n_q());
        let k = 4;
        z.q[k] = 1e-4;
        let dt = 0.3;
        let (n, _) = step(&s, &z, dt, &Integrator::ImplicitMidpoint { dt }).unwrap();
        let zz = dt * (params.lambda * s.laplace().eigenvalues()[k] + params.a);
        let want = 1e-4 * (1.0 - zz / 2.0) / (1.0 + zz / 2.0);
        assert!((n.q[k] - want).abs() < 1e-15);
    }

    #[test]
    fn zero_length_run_returns_initial_state() {
        let s = sys(ModelParams::default());
        let mut z = SimState::zeros(0.0, s.n_u(), s.n_q());
        z.q[0] = 0.3;
        let out = run(&s, &z, &Integrator::Rk45 { tol: 1e-8, max_dt: 0.1 }, 0.0, None).unwrap();
        assert_eq!(out.trajectory.states, vec![z]);
        assert_eq!(out.reports.len(), 1);
    }

    #[test]
    fn rk45_hits_output_times() {
        let s = sys(ModelParams::default());
        let mut z = SimState::zeros(0.0, s.n_u(), s.n_q());
        z.q[1] = 0.2;
        z.u[2] = 0.1;
        let outs = [0.0, 0.05, 0.3, 0.31];
        let out = run(&s, &z, &Integrator::Rk45 { tol: 1e-9, max_dt: 0.1 }, 0.5, Some(&outs)).unwrap();
        assert_eq!(out.trajectory.times(), outs.to_vec());
        assert_eq!(out.reports.len(), out.steps + 1);
        let res = out.cumulative_identity_residual();
        assert!(res.abs() < 1e-8, "{res} {:?}", out.reports.last());
    }
}
