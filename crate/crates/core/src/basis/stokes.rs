use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{cmp_eigen, gauss_legendre, Geometry, GeometryMode, Grid, Trig, DEFAULT_MODE_BUDGET};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// A divergence-free velocity eigenmode.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorMode {
    /// Uniform flow along `axis` (torus only, eigenvalue 0).
    Constant { axis: usize, norm: f64 },
    /// `norm · p · trig(k·x)` with `p ⟂ k`.
    Plane { wavevector: [i64; 3], k: [f64; 3], trig: Trig, polarization: [f64; 3], pol_index: usize, norm: f64 },
    /// Column of the stream-function eigenvector matrix (no-slip rectangle).
    Stream { column: usize },
}

/// Clamped polynomial stream functions `(1 - s²)² P_k(s)` on each axis of the
/// rectangle, and the Ritz eigenvectors of the Stokes operator in that space.
#[derive(Clone, Debug)]
pub struct StreamFunctionBasis {
    lengths: [f64; 2],
    degree: usize,
    /// One coefficient vector (length `degree²`, index `a * degree + b`) per mode.
    coeffs: Vec<Vec<f64>>,
}

impl StreamFunctionBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn coeffs(&self, column: usize) -> &[f64] {
        &self.coeffs[column]
    }

    /// Derivatives 0..=4 of every 1-D basis function at `x` on axis `axis`.
    pub fn eval_1d(&self, axis: usize, x: f64) -> Vec<[f64; 5]> {
        clamped_functions(self.degree, self.lengths[axis], x)
    }

    /// Mixed derivatives `∂x^α ∂y^β ψ` of mode `column` for `α, β ≤ 4` at a point.
    pub fn psi_derivs(&self, column: usize, x: &[f64; 3]) -> [[f64; 5]; 5] {
        let fx = self.eval_1d(0, x[0]);
        let fy = self.eval_1d(1, x[1]);
        let c = &self.coeffs[column];
        let p = self.degree;
        let mut out = [[0.0; 5]; 5];
        for a in 0..p {
            for b in 0..p {
                let cab = c[a * p + b];
                if cab == 0.0 {
                    continue;
                }
                for al in 0..5 {
                    for be in 0..(5 - al) {
                        out[al][be] += cab * fx[a][al] * fy[b][be];
                    }
                }
            }
        }
        out
    }
}

/// Derivatives `0..=4` of `(1 - s²)² P_k(s)`, `k < p`, mapped to `x ∈ [0, L]`.
pub(crate) fn clamped_functions(p: usize, length: f64, x: f64) -> Vec<[f64; 5]> {
    let s = 2.0 * x / length - 1.0;
    let scale = 2.0 / length;
    // Legendre values and derivatives up to order 4: leg[n][j]
    let mut leg = vec![[0.0f64; 5]; p.max(2)];
    leg[0] = [1.0, 0.0, 0.0, 0.0, 0.0];
    leg[1] = [s, 1.0, 0.0, 0.0, 0.0];
    for n in 1..p.saturating_sub(1) {
        let mut next = [0.0; 5];
        next[0] = ((2 * n + 1) as f64 * s * leg[n][0] - n as f64 * leg[n - 1][0]) / (n + 1) as f64;
        for j in 1..5 {
            next[j] = leg[n - 1][j] + (2 * n + 1) as f64 * leg[n][j - 1];
        }
        leg[n + 1] = next;
    }
    let one = 1.0 - s * s;
    let w = [one * one, -4.0 * s * one, -4.0 + 12.0 * s * s, 24.0 * s, 24.0];
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    (0..p)
        .map(|k| {
            let mut out = [0.0; 5];
            let mut sc = 1.0;
            for j in 0..5 {
                let mut v = 0.0;
                for i in 0..=j {
                    v += BINOM[j][i] * w[i] * leg[k][j - i];
                }
                out[j] = v * sc;
                sc *= scale;
            }
            out
        })
        .collect()
}

/// Orthonormal eigenbasis of the Stokes operator.
#[derive(Clone, Debug)]
pub struct StokesBasis {
    dim: usize,
    mode: GeometryMode,
    modes: Vec<VectorMode>,
    eigenvalues: Vec<f64>,
    stream: Option<StreamFunctionBasis>,
}

impl StokesBasis {
    #[inline]
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry_mode(&self) -> GeometryMode {
        self.mode
    }

    /// Eigenvalues `ω_i ≥ 0`, nondecreasing.
    #[inline]
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[VectorMode] {
        &self.modes
    }

    pub fn stream(&self) -> Option<&StreamFunctionBasis> {
        self.stream.as_ref()
    }

    /// Value and gradient (`G[i][j] = ∂_i v_j`) of mode `i` at `x`.
    pub fn eval_mode(&self, i: usize, x: &[f64; 3]) -> ([f64; 3], Matrix) {
        let d = self.dim;
        match &self.modes[i] {
            VectorMode::Constant { axis, norm } => {
                let mut v = [0.0; 3];
                v[*axis] = *norm;
                (v, Matrix::zeros(d))
            }
            VectorMode::Plane { k, trig, polarization: p, norm, .. } => {
                let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                let s = norm * trig.eval(arg);
                let ds = norm * trig.deriv(arg);
                let mut g = Matrix::zeros(d);
                for a in 0..d {
                    for b in 0..d {
                        g.set(a, b, k[a] * p[b] * ds);
                    }
                }
                ([p[0] * s, p[1] * s, p[2] * s], g)
            }
            VectorMode::Stream { column } => {
                let sf = self.stream.as_ref().expect("stream basis present for stream modes");
                let dd = sf.psi_derivs(*column, x);
                let mut g = Matrix::zeros(2);
                g.set(0, 0, dd[1][1]);
                g.set(0, 1, -dd[2][0]);
                g.set(1, 0, dd[0][2]);
                g.set(1, 1, -dd[1][1]);
                ([dd[0][1], -dd[1][0], 0.0], g)
            }
        }
    }

    /// Evaluates `Σ coeffs_i v_i` and its gradient at `x`.
    pub fn eval_field(&self, coeffs: &[f64], x: &[f64; 3]) -> ([f64; 3], Matrix) {
        let mut v = [0.0; 3];
        let mut g = Matrix::zeros(self.dim);
        for (i, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let (vi, gi) = self.eval_mode(i, x);
            for a in 0..3 {
                v[a] += c * vi[a];
            }
            g += gi * *c;
        }
        (v, g)
    }

    /// Relative strong-form eigen-residual of each mode on `grid`.
    ///
    /// Analytic modes use `‖-Δv - ω v‖ / max(ω, 1)`; stream-function modes use the
    /// pressure-free form `‖Δ²ψ + ω Δψ‖ / (ω ‖Δψ‖)`.
    pub fn eigen_residuals(&self, grid: &Grid) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let omega = self.eigenvalues[i];
                match &self.modes[i] {
                    VectorMode::Constant { .. } => 0.0,
                    VectorMode::Plane { k, trig, polarization: p, norm, .. } => {
                        let mut num = 0.0;
                        for (x, w) in grid.points().iter().zip(grid.weights()) {
                            let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                            let s = norm * trig.eval(arg);
                            let lap = -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * s;
                            for a in 0..self.dim {
                                let r = -lap * p[a] - omega * s * p[a];
                                num += w * r * r;
                            }
                        }
                        num.sqrt() / omega.max(1.0)
                    }
                    VectorMode::Stream { column } => {
                        let sf = self.stream.as_ref().unwrap();
                        let mut num = 0.0;
                        let mut den = 0.0;
                        for (x, w) in grid.points().iter().zip(grid.weights()) {
                            let dd = sf.psi_derivs(*column, x);
                            let lap = dd[2][0] + dd[0][2];
                            let bilap = dd[4][0] + 2.0 * dd[2][2] + dd[0][4];
                            let r = bilap + omega * lap;
                            num += w * r * r;
                            den += w * lap * lap;
                        }
                        num.sqrt() / (omega * den.sqrt())
                    }
                }
            })
            .collect()
    }

    pub fn describe_mode(&self, i: usize) -> String {
        match &self.modes[i] {
            VectorMode::Constant { axis, .. } => format!("k=0 axis={axis}"),
            VectorMode::Plane { wavevector, trig, pol_index, .. } => format!(
                "k=({}) {:?} pol={}",
                wavevector[..self.dim].iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
                trig,
                pol_index
            ),
            VectorMode::Stream { column } => format!("stream column={column}"),
        }
    }
}

/// First `n` Stokes eigenpairs on `geom` (default mode budget).
pub fn stokes_eigenpairs(geom: &Geometry, n: usize) -> Result<StokesBasis> {
    stokes_eigenpairs_with_budget(geom, n, DEFAULT_MODE_BUDGET)
}

pub fn stokes_eigenpairs_with_budget(geom: &Geometry, n: usize, budget: usize) -> Result<StokesBasis> {
    if n == 0 {
        return Err(Error::InvalidInput("at least one mode is required".into()));
    }
    if n > budget {
        return Err(Error::ModeBudget { requested: n, budget });
    }
    match geom.mode() {
        GeometryMode::PeriodicTorus => Ok(torus_stokes(geom, n)),
        GeometryMode::Rectangle => {
            let degree = ((3 * n) as f64).sqrt().ceil() as usize;
            rectangle_stokes(geom, n, degree.max(12))
        }
    }
}

fn torus_stokes(geom: &Geometry, n: usize) -> StokesBasis {
    let dim = geom.dim();
    let l = geom.lengths();
    let vol = geom.volume();
    let mut radius = 1i64;
    loop {
        let mut cands: Vec<(f64, [i64; 3], u8, usize, VectorMode)> = Vec::new();
        for axis in 0..dim {
            cands.push((0.0, [0; 3], 0, axis, VectorMode::Constant { axis, norm: (1.0 / vol).sqrt() }));
        }
        let mut idx = vec![-radius; dim];
        loop {
            let mut m = [0i64; 3];
            m[..dim].copy_from_slice(&idx);
            let first = m.iter().copied().find(|v| *v != 0);
            if first.is_some_and(|v| v > 0) {
                let mut k = [0.0; 3];
                for a in 0..dim {
                    k[a] = 2.0 * PI * m[a] as f64 / l[a];
                }
                let omega: f64 = k.iter().map(|v| v * v).sum();
                for (pi, pol) in polarizations(&k, dim).into_iter().enumerate() {
                    for trig in [Trig::Cos, Trig::Sin] {
                        cands.push((
                            omega,
                            m,
                            trig as u8,
                            pi,
                            VectorMode::Plane {
                                wavevector: m,
                                k,
                                trig,
                                polarization: pol,
                                pol_index: pi,
                                norm: (2.0 / vol).sqrt(),
                            },
                        ));
                    }
                }
            }
            let mut a = dim;
            let mut done = false;
            loop {
                if a == 0 {
                    done = true;
                    break;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= radius {
                    break;
                }
                idx[a] = -radius;
            }
            if done {
                break;
            }
        }
        cands.sort_by(|x, y| {
            cmp_eigen(x.0, y.0).then_with(|| x.1.cmp(&y.1)).then_with(|| x.2.cmp(&y.2)).then_with(|| x.3.cmp(&y.3))
        });
        let excluded = l.iter().map(|li| (2.0 * PI * (radius + 1) as f64 / li).powi(2)).fold(f64::INFINITY, f64::min);
        if cands.len() >= n && cmp_eigen(cands[n - 1].0, excluded) == std::cmp::Ordering::Less {
            cands.truncate(n);
            let eigenvalues = cands.iter().map(|c| c.0).collect();
            let modes = cands.into_iter().map(|c| c.4).collect();
            return StokesBasis { dim, mode: geom.mode(), modes, eigenvalues, stream: None };
        }
        radius += 1;
    }
}

/// Orthonormal polarization vectors spanning `k⟂`.
fn polarizations(k: &[f64; 3], dim: usize) -> Vec<[f64; 3]> {
    let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    if dim == 2 {
        return vec![[-k[1] / kn, k[0] / kn, 0.0]];
    }
    let mut j = 0;
    for a in 1..3 {
        if k[a].abs() < k[j].abs() {
            j = a;
        }
    }
    let mut e = [0.0; 3];
    e[j] = 1.0;
    let p1 = normalize(cross(k, &e));
    let khat = [k[0] / kn, k[1] / kn, k[2] / kn];
    let p2 = normalize(cross(&khat, &p1));
    vec![p1, p2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Ritz approximation of the no-slip Stokes eigenproblem on a rectangle using
/// `degree²` clamped stream functions: `K c = ω M c` with
/// `M = ∫∇ψ·∇χ` (the velocity mass matrix) and `K = ∫Δψ Δχ`.
pub(crate) fn rectangle_stokes(geom: &Geometry, n: usize, degree: usize) -> Result<StokesBasis> {
    if geom.dim() != 2 {
        return Err(Error::Unsupported("rectangle Stokes modes require d = 2".into()));
    }
    let p = degree;
    if n > p * p {
        return Err(Error::ModeBudget { requested: n, budget: p * p });
    }
    let lengths = [geom.lengths()[0], geom.lengths()[1]];
    let mats: Vec<[DMatrix<f64>; 3]> = lengths.iter().map(|&l| one_d_matrices(p, l)).collect();
    let (ax, ay) = (&mats[0], &mats[1]);
    let size = p * p;
    let mut mass = DMatrix::<f64>::zeros(size, size);
    let mut stiff = DMatrix::<f64>::zeros(size, size);
    for a in 0..p {
        for b in 0..p {
            let r = a * p + b;
            for c in 0..p {
                for e in 0..p {
                    let s = c * p + e;
                    mass[(r, s)] = ax[1][(a, c)] * ay[0][(b, e)] + ax[0][(a, c)] * ay[1][(b, e)];
                    stiff[(r, s)] = ax[2][(a, c)] * ay[0][(b, e)]
                        + 2.0 * ax[1][(a, c)] * ay[1][(b, e)]
                        + ax[0][(a, c)] * ay[2][(b, e)];
                }
            }
        }
    }
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearSolve("stream-function mass matrix is not positive definite".into()))?;
    let lower = chol.l();
    let x = lower.solve_lower_triangular(&stiff).ok_or_else(|| Error::LinearSolve("triangular solve failed".into()))?;
    let reduced = lower
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::LinearSolve("triangular solve failed".into()))?;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = reduced.symmetric_eigen();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let upper = lower.transpose();
    let mut coeffs = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    for &i in order.iter().take(n) {
        let y = eig.eigenvectors.column(i).into_owned();
        let c = upper.solve_upper_triangular(&y).ok_or_else(|| Error::LinearSolve("triangular solve failed".into()))?;
        let mut c: Vec<f64> = c.iter().copied().collect();
        // deterministic sign: largest-magnitude coefficient positive
        let imax = (0..c.len()).fold(0, |m, j| if c[j].abs() > c[m].abs() + 1e-12 { j } else { m });
        if c[imax] < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        coeffs.push(c);
        eigenvalues.push(eig.eigenvalues[i]);
    }
    let modes = (0..n).map(|column| VectorMode::Stream { column }).collect();
    Ok(StokesBasis {
        dim: 2,
        mode: GeometryMode::Rectangle,
        modes,
        eigenvalues,
        stream: Some(StreamFunctionBasis { lengths, degree: p, coeffs }),
    })
}

/// `[∫φφ, ∫φ'φ', ∫φ''φ'']` for the clamped 1-D functions on `[0, L]`.
fn one_d_matrices(p: usize, length: f64) -> [DMatrix<f64>; 3] {
    let (nodes, weights) = gauss_legendre(p + 8);
    let mut out = [DMatrix::zeros(p, p), DMatrix::zeros(p, p), DMatrix::zeros(p, p)];
    for (s, w) in nodes.iter().zip(&weights) {
        let x = 0.5 * length * (s + 1.0);
        let w = 0.5 * length * w;
        let f = clamped_functions(p, length, x);
        for (order, m) in out.iter_mut().enumerate() {
            for i in 0..p {
                for j in 0..p {
                    m[(i, j)] += w * f[i][order] * f[j][order];
                }
            }
        }
    }
    out
}

/// Rectangle Stokes basis with an explicit stream-function degree (for convergence studies).
pub fn stokes_eigenpairs_rectangle(geom: &Geometry, n: usize, degree: usize) -> Result<StokesBasis> {
    if geom.mode() != GeometryMode::Rectangle {
        return Err(Error::Unsupported("explicit stream-function degree applies to rectangles only".into()));
    }
    rectangle_stokes(geom, n, degree)
}
