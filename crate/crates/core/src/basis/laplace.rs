use std::cmp::Ordering;
use std::f64::consts::PI;

use super::{cmp_eigen, BcType, Geometry, GeometryMode, Trig, DEFAULT_MODE_BUDGET};
use crate::error::{Error, Result};
use crate::tensor::{s0_basis, Matrix};

/// One factor `norm · trig(freq · x)` of a separable eigenfunction on `[0, L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Factor1d {
    pub trig: Trig,
    pub freq: f64,
    pub norm: f64,
}

impl Factor1d {
    /// The `m`-th eigenfunction of `-d²/dx²` on `[0, L]` with boundary types `(low, high)`,
    /// normalized in `L²(0, L)`.
    ///
    /// `m` counts from 1 for Dirichlet–Dirichlet and from 0 otherwise.
    pub fn eigenfunction(bcs: (BcType, BcType), m: usize, length: f64) -> Self {
        let (trig, freq) = match bcs {
            (BcType::Dirichlet, BcType::Dirichlet) => (Trig::Sin, m as f64 * PI / length),
            (BcType::Neumann, BcType::Neumann) => (Trig::Cos, m as f64 * PI / length),
            (BcType::Dirichlet, BcType::Neumann) => (Trig::Sin, (m as f64 + 0.5) * PI / length),
            (BcType::Neumann, BcType::Dirichlet) => (Trig::Cos, (m as f64 + 0.5) * PI / length),
        };
        let norm = if freq == 0.0 { (1.0 / length).sqrt() } else { (2.0 / length).sqrt() };
        Self { trig, freq, norm }
    }

    /// Smallest admissible mode number for the boundary pair.
    pub fn first_index(bcs: (BcType, BcType)) -> usize {
        match bcs {
            (BcType::Dirichlet, BcType::Dirichlet) => 1,
            _ => 0,
        }
    }

    /// Value and first two derivatives at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let arg = self.freq * x;
        let v = self.trig.eval(arg);
        let dv = self.trig.deriv(arg);
        (self.norm * v, self.norm * self.freq * dv, -self.norm * self.freq * self.freq * v)
    }
}

/// A scalar eigenfunction of `-Δ` with the geometry's boundary conditions.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarMode {
    /// `norm · trig(k·x)` on the torus, `k = 2π m / L` componentwise.
    Plane { wavevector: [i64; 3], k: [f64; 3], trig: Trig, norm: f64 },
    /// `f_x(x) f_y(y)` on the rectangle.
    Product { index: [usize; 2], factors: [Factor1d; 2] },
}

impl ScalarMode {
    pub fn eigenvalue(&self) -> f64 {
        match self {
            ScalarMode::Plane { k, .. } => k.iter().map(|k| k * k).sum(),
            ScalarMode::Product { factors, .. } => factors.iter().map(|f| f.freq * f.freq).sum(),
        }
    }

    /// Integer label used for deterministic tie-breaking.
    pub fn label(&self) -> [i64; 3] {
        match self {
            ScalarMode::Plane { wavevector, .. } => *wavevector,
            ScalarMode::Product { index, .. } => [index[0] as i64, index[1] as i64, 0],
        }
    }

    fn trig_rank(&self) -> u8 {
        match self {
            ScalarMode::Plane { trig, .. } => *trig as u8,
            ScalarMode::Product { .. } => 0,
        }
    }

    /// Value and gradient at `x`.
    #[inline]
    pub fn eval(&self, x: &[f64; 3]) -> (f64, [f64; 3]) {
        match self {
            ScalarMode::Plane { k, trig, norm, .. } => {
                let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                let v = norm * trig.eval(arg);
                let dv = norm * trig.deriv(arg);
                (v, [k[0] * dv, k[1] * dv, k[2] * dv])
            }
            ScalarMode::Product { factors, .. } => {
                let (fx, dfx, _) = factors[0].eval(x[0]);
                let (fy, dfy, _) = factors[1].eval(x[1]);
                (fx * fy, [dfx * fy, fx * dfy, 0.0])
            }
        }
    }

    /// Laplacian at `x`, computed from second derivatives (not from the eigenvalue).
    pub fn laplacian(&self, x: &[f64; 3]) -> f64 {
        match self {
            ScalarMode::Plane { k, trig, norm, .. } => {
                let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                let v = norm * trig.eval(arg);
                -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * v
            }
            ScalarMode::Product { factors, .. } => {
                let (fx, _, ddfx) = factors[0].eval(x[0]);
                let (fy, _, ddfy) = factors[1].eval(x[1]);
                ddfx * fy + fx * ddfy
            }
        }
    }
}

/// A tensor-valued mode `φ_scalar(x) · E_direction`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorMode {
    pub scalar: usize,
    pub direction: usize,
}

/// Orthonormal eigenbasis of the 𝕊₀-valued Laplacian.
#[derive(Clone, Debug)]
pub struct LaplaceBasis {
    dim: usize,
    mode: GeometryMode,
    scalars: Vec<ScalarMode>,
    modes: Vec<TensorMode>,
    eigenvalues: Vec<f64>,
    directions: Vec<Matrix>,
}

impl LaplaceBasis {
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

    /// Eigenvalues `λ_i ≥ 0`, nondecreasing.
    #[inline]
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[TensorMode] {
        &self.modes
    }

    /// Distinct scalar eigenfunctions referenced by the tensor modes.
    pub fn scalars(&self) -> &[ScalarMode] {
        &self.scalars
    }

    /// Orthonormal 𝕊₀ directions.
    pub fn directions(&self) -> &[Matrix] {
        &self.directions
    }

    /// Value and gradient (`grad[i] = ∂_i e`) of tensor mode `i` at `x`.
    pub fn eval_mode(&self, i: usize, x: &[f64; 3]) -> (Matrix, [Matrix; 3]) {
        let tm = self.modes[i];
        let e = self.directions[tm.direction];
        let (v, g) = self.scalars[tm.scalar].eval(x);
        let z = Matrix::zeros(self.dim);
        let mut grad = [z; 3];
        for a in 0..self.dim {
            grad[a] = e * g[a];
        }
        (e * v, grad)
    }

    /// Evaluates `Σ coeffs_i e_i` and its gradient at `x`.
    pub fn eval_field(&self, coeffs: &[f64], x: &[f64; 3]) -> (Matrix, [Matrix; 3]) {
        let z = Matrix::zeros(self.dim);
        let mut val = z;
        let mut grad = [z; 3];
        for (i, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let (v, g) = self.eval_mode(i, x);
            val += v * *c;
            for a in 0..self.dim {
                grad[a] += g[a] * *c;
            }
        }
        (val, grad)
    }

    /// Evaluates `Δ(Σ coeffs_i e_i)` at `x` from second derivatives of the modes.
    pub fn eval_laplacian(&self, coeffs: &[f64], x: &[f64; 3]) -> Matrix {
        let mut out = Matrix::zeros(self.dim);
        for (i, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let tm = self.modes[i];
            out += self.directions[tm.direction] * (c * self.scalars[tm.scalar].laplacian(x));
        }
        out
    }

    /// Short description of mode `i` for metadata listings.
    pub fn describe_mode(&self, i: usize) -> String {
        let tm = self.modes[i];
        match &self.scalars[tm.scalar] {
            ScalarMode::Plane { wavevector, trig, .. } => format!(
                "k=({}) {:?} dir={}",
                wavevector[..self.dim].iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
                trig,
                tm.direction
            ),
            ScalarMode::Product { index, factors } => format!(
                "m=({},{}) {:?}x{:?} dir={}",
                index[0], index[1], factors[0].trig, factors[1].trig, tm.direction
            ),
        }
    }
}

/// First `n` eigenpairs of the 𝕊₀-valued Laplacian on `geom`, using the default mode budget.
pub fn laplace_eigenpairs(geom: &Geometry, n: usize) -> Result<LaplaceBasis> {
    laplace_eigenpairs_with_budget(geom, n, DEFAULT_MODE_BUDGET)
}

/// First `n` eigenpairs, ordered by eigenvalue, then integer wavevector, then
/// trig type, then 𝕊₀ direction.
pub fn laplace_eigenpairs_with_budget(geom: &Geometry, n: usize, budget: usize) -> Result<LaplaceBasis> {
    if n == 0 {
        return Err(Error::InvalidInput("at least one mode is required".into()));
    }
    if n > budget {
        return Err(Error::ModeBudget { requested: n, budget });
    }
    let dim = geom.dim();
    let directions = s0_basis(dim);
    let ndir = directions.len();
    let n_scalar = n.div_ceil(ndir);
    let scalars = lowest_scalar_modes(geom, n_scalar);

    let mut tensor: Vec<(usize, usize)> = (0..scalars.len()).flat_map(|s| (0..ndir).map(move |a| (s, a))).collect();
    tensor.sort_by(|&(s1, a1), &(s2, a2)| {
        cmp_eigen(scalars[s1].eigenvalue(), scalars[s2].eigenvalue())
            .then_with(|| scalars[s1].label().cmp(&scalars[s2].label()))
            .then_with(|| scalars[s1].trig_rank().cmp(&scalars[s2].trig_rank()))
            .then_with(|| a1.cmp(&a2))
    });
    tensor.truncate(n);

    // keep only referenced scalars, in first-use order
    let mut remap = vec![usize::MAX; scalars.len()];
    let mut kept = Vec::new();
    let mut modes = Vec::with_capacity(n);
    for (s, a) in tensor {
        if remap[s] == usize::MAX {
            remap[s] = kept.len();
            kept.push(scalars[s].clone());
        }
        modes.push(TensorMode { scalar: remap[s], direction: a });
    }
    let eigenvalues = modes.iter().map(|m| kept[m.scalar].eigenvalue()).collect();
    Ok(LaplaceBasis { dim, mode: geom.mode(), scalars: kept, modes, eigenvalues, directions })
}

/// The `count` lowest scalar eigenfunctions (sorted), enumerated over a growing index box.
pub(crate) fn lowest_scalar_modes(geom: &Geometry, count: usize) -> Vec<ScalarMode> {
    let mut radius = 1usize;
    loop {
        let (mut modes, excluded) = match geom.mode() {
            GeometryMode::PeriodicTorus => torus_box(geom, radius),
            GeometryMode::Rectangle => rectangle_box(geom, radius),
        };
        modes.sort_by(|a, b| {
            cmp_eigen(a.eigenvalue(), b.eigenvalue())
                .then_with(|| a.label().cmp(&b.label()))
                .then_with(|| a.trig_rank().cmp(&b.trig_rank()))
        });
        if modes.len() > count && modes[count].eigenvalue() < excluded {
            modes.truncate(count);
            return modes;
        }
        if modes.len() >= count && cmp_eigen(modes[count - 1].eigenvalue(), excluded) == Ordering::Less {
            modes.truncate(count);
            return modes;
        }
        radius += 1;
    }
}

/// Canonical half-space wavevectors with `|m_i| ≤ radius`; returns the modes and a
/// lower bound on every eigenvalue outside the box.
fn torus_box(geom: &Geometry, radius: usize) -> (Vec<ScalarMode>, f64) {
    let dim = geom.dim();
    let l = geom.lengths();
    let r = radius as i64;
    let vol = geom.volume();
    let mut out = Vec::new();
    let ranges: Vec<i64> = (-r..=r).collect();
    let mut idx = vec![0usize; dim];
    loop {
        let mut m = [0i64; 3];
        for a in 0..dim {
            m[a] = ranges[idx[a]];
        }
        let first_nonzero = m.iter().copied().find(|v| *v != 0);
        let canonical = first_nonzero.is_none_or(|v| v > 0);
        if canonical {
            let mut k = [0.0; 3];
            for a in 0..dim {
                k[a] = 2.0 * PI * m[a] as f64 / l[a];
            }
            if first_nonzero.is_none() {
                out.push(ScalarMode::Plane { wavevector: m, k, trig: Trig::Cos, norm: (1.0 / vol).sqrt() });
            } else {
                let norm = (2.0 / vol).sqrt();
                out.push(ScalarMode::Plane { wavevector: m, k, trig: Trig::Cos, norm });
                out.push(ScalarMode::Plane { wavevector: m, k, trig: Trig::Sin, norm });
            }
        }
        let mut a = dim;
        loop {
            if a == 0 {
                let excluded =
                    l.iter().map(|li| (2.0 * PI * (radius + 1) as f64 / li).powi(2)).fold(f64::INFINITY, f64::min);
                return (out, excluded);
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < ranges.len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

fn rectangle_box(geom: &Geometry, radius: usize) -> (Vec<ScalarMode>, f64) {
    let l = geom.lengths();
    let bx = geom.axis_bcs(0);
    let by = geom.axis_bcs(1);
    let (x0, y0) = (Factor1d::first_index(bx), Factor1d::first_index(by));
    let mut out = Vec::new();
    for mx in x0..=x0 + radius {
        for my in y0..=y0 + radius {
            let fx = Factor1d::eigenfunction(bx, mx, l[0]);
            let fy = Factor1d::eigenfunction(by, my, l[1]);
            out.push(ScalarMode::Product { index: [mx, my], factors: [fx, fy] });
        }
    }
    let ex = Factor1d::eigenfunction(bx, x0 + radius + 1, l[0]).freq.powi(2);
    let ey = Factor1d::eigenfunction(by, y0 + radius + 1, l[1]).freq.powi(2);
    (out, ex.min(ey))
}
