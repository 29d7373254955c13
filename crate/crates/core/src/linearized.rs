//! The principal part `𝒮(Q₀)` of the Galerkin system frozen at `Q₀`, the
//! remainder `𝒩(Q₀)`, the shifted operator `𝒩₀`, a linear evolution solver
//! for `ẋ − 𝒮x = y` with zero initial data, and the Picard iteration
//! `x ↦ ℒ⁻¹𝒩₀(x)` with contraction diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::sim::{GalerkinSystem, SimState};
use crate::tensor::{raw, Matrix};

/// A coefficient trajectory `x_n ≈ x(n dt)`, `n = 0..=N`, stacked as `[u; q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePair {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl StatePair {
    pub fn zeros(dt: f64, steps: usize, len: usize) -> Self {
        Self { dt, states: vec![vec![0.0; len]; steps + 1] }
    }

    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Whether the initial value vanishes (the homogeneous class).
    pub fn is_homogeneous(&self) -> bool {
        self.states.first().is_none_or(|x| x.iter().all(|v| *v == 0.0))
    }

    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + alpha * y).collect())
            .collect();
        Self { dt: self.dt, states }
    }
}

/// Right-hand sides `y_n = y(n dt)` against the velocity and tensor modes, stacked like [`StatePair`].
#[derive(Clone, Debug, PartialEq)]
pub struct RhsPair {
    pub dt: f64,
    pub values: Vec<Vec<f64>>,
}

impl RhsPair {
    /// Whether the initial value is admissible data for `len` unknowns. Every
    /// tensor mode vanishes on the Dirichlet faces, so only shape and
    /// finiteness can fail.
    pub fn is_compatible(&self, len: usize) -> bool {
        self.dt > 0.0 && self.values.first().is_some_and(|y0| y0.len() == len && y0.iter().all(|v| v.is_finite()))
    }
}

/// Outcome of the Picard iteration.
#[derive(Clone, Debug)]
pub struct PicardResult {
    /// Full trajectory `x̂ + x₀` at `t_n = n dt`.
    pub trajectory: Vec<SimState>,
    /// `‖x^{k+1} − x^k‖_X` for every iteration.
    pub distances: Vec<f64>,
    pub iterations: usize,
}

impl PicardResult {
    /// Geometric mean of successive distance ratios over the iterations whose
    /// distances stay above `floor`.
    pub fn mean_ratio(&self, floor: f64) -> Option<f64> {
        let d: Vec<f64> = self.distances.iter().copied().take_while(|v| *v > floor).collect();
        if d.len() < 2 {
            return None;
        }
        let k = (d.len() - 1) as f64;
        Some((d[d.len() - 1] / d[0]).powf(1.0 / k))
    }
}

/// `⟨𝒮(Q₀)(v, P), (v, P)⟩` split as `pairing = cross − remainder`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoercivityPairing {
    /// `−∫(σ + ξτ₂)(Q₀, λΔP):∇v + (2ξ/d)λ∫ΔP:∇v − λ∫S(∇v, Q₀):ΔP`, zero up to roundoff.
    pub cross: f64,
    /// Sum of the magnitudes of the two cross integrands.
    pub cross_scale: f64,
    /// `∫ν(Q₀)|Dv|² + Γλ²∫|ΔP|² − ∫(ΓλΔP + S(∇v, Q₀)):P`.
    pub remainder: f64,
    pub pairing: f64,
}

/// Operators of the system frozen at a reference tensor field `Q₀`.
#[derive(Clone, Debug)]
pub struct Linearization<'a> {
    sys: &'a GalerkinSystem,
    q0: Vec<f64>,
    q0_grid: Vec<Matrix>,
    nu0: Vec<f64>,
    principal: DMatrix<f64>,
}

impl<'a> Linearization<'a> {
    /// `q0` holds the coefficients of `Q₀ − Q̃`.
    pub fn new(sys: &'a GalerkinSystem, q0: &[f64]) -> Result<Self> {
        check_dim(sys.n_q(), q0.len())?;
        let q0_grid = sys.tensor_field(q0)?.values;
        let nu0 = q0_grid.iter().map(|q| sys.params().viscosity.value(q)).collect();
        let mut lin = Self { sys, q0: q0.to_vec(), q0_grid, nu0, principal: DMatrix::zeros(0, 0) };
        lin.principal = lin.assemble_principal()?;
        Ok(lin)
    }

    pub fn system(&self) -> &GalerkinSystem {
        self.sys
    }

    pub fn q0(&self) -> &[f64] {
        &self.q0
    }

    pub fn len(&self) -> usize {
        self.sys.n_u() + self.sys.n_q()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dense matrix of `𝒮(Q₀)` in coefficient space.
    pub fn principal_matrix(&self) -> &DMatrix<f64> {
        &self.principal
    }

    /// `𝒮(Q₀)(u, q)` in weak form:
    /// `−(ν(Q₀)Du, Dv_k) − ((σ + ξτ₂)(Q₀, λΔQ) − (2ξ/d)λΔQ, ∇v_k)` and
    /// `(ΓλΔQ + S(∇u, Q₀), e_l)`.
    pub fn apply_principal(&self, u: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let sys = self.sys;
        check_dim(sys.n_u(), u.len())?;
        check_dim(sys.n_q(), q.len())?;
        let p = sys.params();
        let uf = sys.velocity_field(u)?;
        let lap = sys.laplacian_grid(q)?;
        let mut stress = Vec::with_capacity(lap.len());
        let mut src = Vec::with_capacity(lap.len());
        for i in 0..lap.len() {
            let q0 = &self.q0_grid[i];
            let g = &uf.grads[i];
            stress.push(g.sym() * self.nu0[i] + raw::coupling_stress(q0, &(lap[i] * p.lambda), p.xi));
            src.push(raw::s_full(g, q0, p.xi));
        }
        let ur = sys.stokes_tables().pair(None, Some(&stress)).into_iter().map(|v| -v).collect();
        let proj = sys.laplace_tables().project_tensor(&src)?;
        let gl = p.gamma * p.lambda;
        let qr = proj.iter().zip(q).zip(sys.laplace_tables().eigenvalues()).map(|((s, c), l)| s - gl * l * c).collect();
        Ok((ur, qr))
    }

    fn assemble_principal(&self) -> Result<DMatrix<f64>> {
        let n_u = self.sys.n_u();
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let (ur, qr) = self.apply_principal(&e[..n_u], &e[n_u..])?;
            for (i, v) in ur.iter().chain(&qr).enumerate() {
                m[(i, j)] = *v;
            }
            e[j] = 0.0;
        }
        Ok(m)
    }

    /// The remainder `𝒩(Q₀)(u, q) = f(u, q) − 𝒮(Q₀)(u, q)`, assembled term by term:
    /// advection, viscosity difference, elastic force `πₙH:∇Q`, coupling-stress
    /// difference, `S` difference, and the bulk force.
    pub fn apply_nonlinear(&self, u: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let sys = self.sys;
        let p = sys.params();
        let d = sys.dim();
        let ev = sys.evaluate(u, q)?;
        let lap = sys.laplacian_grid(q)?;
        let npts = lap.len();
        let mut force = vec![[0.0; 3]; npts];
        let mut stress = Vec::with_capacity(npts);
        let mut src = Vec::with_capacity(npts);
        for i in 0..npts {
            let v = &ev.u.values[i];
            let g = &ev.u.grads[i];
            let qm = &ev.q.values[i];
            let gq = &ev.q.grads[i];
            let ph = &ev.pi_h_grid[i];
            let q0 = &self.q0_grid[i];
            let mut adv = Matrix::zeros(d);
            for a in 0..d {
                adv += gq[a] * v[a];
            }
            for j in 0..d {
                let mut f = ph.ddot(&gq[j]);
                for a in 0..d {
                    f += v[a] * g.get(a, j);
                }
                force[i][j] = f;
            }
            let dnu = p.viscosity.value(qm) - self.nu0[i];
            stress.push(
                g.sym() * dnu + raw::coupling_stress(qm, ph, p.xi)
                    - raw::coupling_stress(q0, &(lap[i] * p.lambda), p.xi),
            );
            src.push(raw::s_full(g, qm, p.xi) - raw::s_full(g, q0, p.xi) - adv + ev.bulk_force[i] * p.gamma);
        }
        let ur = sys.stokes_tables().pair(Some(&force), Some(&stress)).into_iter().map(|v| -v).collect();
        let qr = sys.laplace_tables().project_tensor(&src)?;
        Ok((ur, qr))
    }

    fn principal_apply_vec(&self, x: &[f64]) -> Vec<f64> {
        (&self.principal * DVector::from_column_slice(x)).iter().copied().collect()
    }

    fn nonlinear_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n_u = self.sys.n_u();
        let (a, b) = self.apply_nonlinear(&x[..n_u], &x[n_u..])?;
        Ok(a.into_iter().chain(b).collect())
    }

    /// `𝒩₀(x̂) = 𝒩(Q₀)(x̂ + x₀) + 𝒮(Q₀)x₀` at every time node.
    pub fn apply_n0(&self, x0: &[f64], xhat: &StatePair) -> Result<RhsPair> {
        check_dim(self.len(), x0.len())?;
        let s0 = self.principal_apply_vec(x0);
        let values = xhat
            .states
            .iter()
            .map(|xh| {
                check_dim(self.len(), xh.len())?;
                let full: Vec<f64> = xh.iter().zip(x0).map(|(a, b)| a + b).collect();
                let mut y = self.nonlinear_vec(&full)?;
                for (yi, si) in y.iter_mut().zip(&s0) {
                    *yi += si;
                }
                Ok(y)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RhsPair { dt: xhat.dt, values })
    }

    /// Solves `ẋ − 𝒮(Q₀)x = y`, `x(0) = 0` by the trapezoidal (Crank–Nicolson) form of
    /// the implicit midpoint rule on the nodes of `rhs`.
    pub fn solve_linear(&self, rhs: &RhsPair) -> Result<StatePair> {
        let n = self.len();
        let dt = rhs.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        if rhs.values.is_empty() {
            return Err(Error::InvalidInput("empty right-hand side".into()));
        }
        let eye = DMatrix::<f64>::identity(n, n);
        let lhs = &eye - &self.principal * (0.5 * dt);
        let rhs_m = &eye + &self.principal * (0.5 * dt);
        let lu = lhs.lu();
        let mut states = vec![vec![0.0; n]];
        let mut x = DVector::zeros(n);
        for w in rhs.values.windows(2) {
            check_dim(n, w[1].len())?;
            let y = DVector::from_iterator(n, w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * dt * (a + b)));
            let b = &rhs_m * &x + y;
            x = lu.solve(&b).ok_or_else(|| Error::LinearSolve("singular Crank–Nicolson matrix".into()))?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::LinearSolve("non-finite linear solution".into()));
            }
            states.push(x.iter().copied().collect());
        }
        Ok(StatePair { dt, states })
    }

    /// `sup_n (‖u_n‖_{H¹} + ‖q_n‖_{H²}) + (Σ_n dt (‖δu_n‖²_{L²} + ‖δq_n‖²_{H¹}))^{1/2}`
    /// with `δ` the forward difference quotient.
    pub fn x_norm(&self, x: &StatePair) -> f64 {
        let n_u = self.sys.n_u();
        let om = self.sys.stokes().eigenvalues();
        let la = self.sys.laplace().eigenvalues();
        let mut sup: f64 = 0.0;
        for s in &x.states {
            let hu: f64 = s[..n_u].iter().zip(om).map(|(c, w)| (1.0 + w) * c * c).sum();
            let hq: f64 = s[n_u..].iter().zip(la).map(|(c, l)| (1.0 + l).powi(2) * c * c).sum();
            sup = sup.max(hu.sqrt() + hq.sqrt());
        }
        let mut acc = 0.0;
        for w in x.states.windows(2) {
            let mut v = 0.0;
            for i in 0..w[0].len() {
                let dq = (w[1][i] - w[0][i]) / x.dt;
                let wt = if i < n_u { 1.0 } else { 1.0 + la[i - n_u] };
                v += wt * dq * dq;
            }
            acc += x.dt * v;
        }
        sup + acc.sqrt()
    }

    /// Picard iteration `x̂^{k+1} = ℒ⁻¹𝒩₀(x̂^k)` from `x̂⁰ = 0` on `steps` uniform
    /// steps of `[0, t_end]`, where `x0` holds the initial data `[u₀; q₀]`.
    pub fn picard_solve(
        &self,
        x0: &[f64],
        t_end: f64,
        steps: usize,
        tol: f64,
        max_iter: usize,
    ) -> Result<PicardResult> {
        check_dim(self.len(), x0.len())?;
        if steps == 0 || !(t_end > 0.0) {
            return Err(Error::InvalidInput("need t_end > 0 and at least one step".into()));
        }
        let dt = t_end / steps as f64;
        let mut xhat = StatePair::zeros(dt, steps, self.len());
        let mut distances = Vec::new();
        let mut growing = 0;
        for it in 1..=max_iter {
            let y = self.apply_n0(x0, &xhat)?;
            let next = self.solve_linear(&y)?;
            let dist = self.x_norm(&next.axpy(-1.0, &xhat));
            if let Some(prev) = distances.last() {
                if dist >= *prev && dist > 0.0 {
                    growing += 1;
                } else {
                    growing = 0;
                }
            }
            distances.push(dist);
            xhat = next;
            if !dist.is_finite() || growing >= 3 {
                return Err(Error::NonContraction { distances });
            }
            if dist <= tol {
                let trajectory = xhat
                    .states
                    .iter()
                    .enumerate()
                    .map(|(n, xh)| {
                        let full: Vec<f64> = xh.iter().zip(x0).map(|(a, b)| a + b).collect();
                        SimState::from_vec(n as f64 * dt, &full, self.sys.n_u())
                    })
                    .collect();
                return Ok(PicardResult { trajectory, distances, iterations: it });
            }
        }
        let residual = distances.last().copied().unwrap_or(f64::NAN);
        Err(Error::NonConvergence { iterations: max_iter, residual })
    }

    /// `max ‖Φ(x₁) − Φ(x₂)‖_X / ‖x₁ − x₂‖_X` over `n_pairs` seeded random pairs of
    /// homogeneous trajectories with X-norm at most `radius`, where `Φ = ℒ⁻¹𝒩₀`.
    pub fn contraction_ratio(
        &self,
        x0: &[f64],
        t_end: f64,
        steps: usize,
        radius: f64,
        n_pairs: usize,
        seed: u64,
    ) -> Result<f64> {
        check_dim(self.len(), x0.len())?;
        self.sampled_lipschitz(|x| self.solve_linear(&self.apply_n0(x0, x)?), t_end, steps, radius, n_pairs, seed)
    }

    /// The sampling behind [`Self::contraction_ratio`] for an arbitrary map on
    /// trajectories. Pairs closer than `1e-14` are skipped.
    pub fn sampled_lipschitz<F>(
        &self,
        map: F,
        t_end: f64,
        steps: usize,
        radius: f64,
        n_pairs: usize,
        seed: u64,
    ) -> Result<f64>
    where
        F: Fn(&StatePair) -> Result<StatePair>,
    {
        if steps == 0 || !(t_end > 0.0) || !(radius > 0.0) {
            return Err(Error::InvalidInput("need t_end > 0, radius > 0 and at least one step".into()));
        }
        let dt = t_end / steps as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: f64 = 0.0;
        for _ in 0..n_pairs {
            let x1 = self.random_trajectory(&mut rng, dt, steps, radius);
            let x2 = self.random_trajectory(&mut rng, dt, steps, radius);
            let den = self.x_norm(&x1.axpy(-1.0, &x2));
            if den < 1e-14 {
                continue;
            }
            let (p1, p2) = (map(&x1)?, map(&x2)?);
            best = best.max(self.x_norm(&p1.axpy(-1.0, &p2)) / den);
        }
        Ok(best)
    }

    /// `x(t) = s a + s² b`, `s = t/T`, with mode-weighted uniform coefficients,
    /// rescaled to X-norm `radius · r`, `r ∈ [1/2, 1)`.
    fn random_trajectory(&self, rng: &mut ChaCha8Rng, dt: f64, steps: usize, radius: f64) -> StatePair {
        let n_u = self.sys.n_u();
        let om = self.sys.stokes().eigenvalues();
        let la = self.sys.laplace().eigenvalues();
        let n = self.len();
        let weight = |i: usize| if i < n_u { 1.0 / (1.0 + om[i]) } else { 1.0 / (1.0 + la[i - n_u]).powi(2) };
        let a: Vec<f64> = (0..n).map(|i| weight(i) * rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|i| weight(i) * rng.random_range(-1.0..1.0)).collect();
        let r: f64 = rng.random_range(0.5..1.0);
        let states = (0..=steps)
            .map(|k| {
                let s = k as f64 / steps as f64;
                (0..n).map(|i| s * a[i] + s * s * b[i]).collect()
            })
            .collect();
        let mut x = StatePair { dt, states };
        let norm = self.x_norm(&x);
        if norm > 0.0 {
            let scale = radius * r / norm;
            x.states.iter_mut().for_each(|s| s.iter_mut().for_each(|v| *v *= scale));
        }
        x
    }

    /// Pairs `𝒮(Q₀)(v, P)` with `(v, P)`, using the `(I − λΔ)`-weighted product in the
    /// tensor slot, and splits it into the coupling cross terms and the remainder.
    pub fn coercivity_pairing(&self, v: &[f64], pm: &[f64]) -> Result<CoercivityPairing> {
        let sys = self.sys;
        let p = sys.params();
        let w = sys.grid().weights();
        let (ur, qr) = self.apply_principal(v, pm)?;
        let la = sys.laplace().eigenvalues();
        // (A, P) − λ(A, ΔP) with ΔP = −Σ λ_l P_l e_l
        let pairing = ur.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
            + qr.iter().zip(pm).zip(la).map(|((a, c), l)| a * c * (1.0 + p.lambda * l)).sum::<f64>();

        let uf = sys.velocity_field(v)?;
        let lap = sys.laplacian_grid(pm)?;
        let pf = sys.laplace_tables().synthesize(pm)?;
        let mut cross = 0.0;
        let mut cross_scale = 0.0;
        let mut visc = 0.0;
        let mut lap2 = 0.0;
        let mut rest = 0.0;
        for i in 0..w.len() {
            let g = &uf.grads[i];
            let q0 = &self.q0_grid[i];
            let s = raw::s_full(g, q0, p.xi);
            let x = lap[i] * p.lambda;
            let (c1, c2) = (raw::coupling_stress(q0, &x, p.xi).ddot(g), s.ddot(&x));
            cross -= w[i] * (c1 + c2);
            cross_scale += w[i] * (c1.abs() + c2.abs());
            let du = g.sym();
            visc += w[i] * self.nu0[i] * du.ddot(&du);
            lap2 += w[i] * lap[i].ddot(&lap[i]);
            rest += w[i] * (lap[i] * (p.gamma * p.lambda) + s).ddot(&pf[i]);
        }
        let remainder = visc + p.gamma * p.lambda * p.lambda * lap2 - rest;
        Ok(CoercivityPairing { cross, cross_scale, remainder, pairing })
    }
}
