//! Pointwise algebra of symmetric trace-free tensors.
//!
//! Every constitutive tensor of the Beris–Edwards system is evaluated here:
//! the stretch/vorticity split of the velocity gradient, the commutator
//! `sigma`, the rewritten stress pieces `tau2`, `S1`, `S2`, the elastic
//! stress, and the Landau–de Gennes bulk potential with its negative
//! gradient `L = -Df_B`.
//!
//! Velocity gradients follow the convention `G[i][j] = ∂_i u_j`, so that
//! `tr(Q G) = Q_ij ∂_i u_j` for symmetric `Q`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{check_dim, Error, Result};

/// A dense `d×d` real matrix with `d ∈ {1, 2, 3}`, stored in a fixed 3×3 block.
///
/// Entries outside the leading `d×d` block are always zero.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix {
    dim: usize,
    m: [[f64; 3]; 3],
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.dim).map(|i| &self.m[i][..self.dim]).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!((1..=3).contains(&dim));
        Self { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = 1.0;
        }
        out
    }

    /// Builds a matrix from row slices; all rows must have length `rows.len()`.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!("matrix dimension {dim} not in 1..=3")));
        }
        let mut out = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            check_dim(dim, row.len())?;
            out.m[i][..dim].copy_from_slice(row);
        }
        Ok(out)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut out = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            out.m[i][i] = *v;
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.m[i][j] = v;
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// Frobenius contraction `A:B = Σ A_ij B_ij`.
    #[inline]
    pub fn ddot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    /// Frobenius norm `|A| = sqrt(A:A)`.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut s: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s = s.max(self.m[i][j].abs());
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    #[inline]
    pub fn sym(&self) -> Self {
        (*self + self.transpose()) * 0.5
    }

    #[inline]
    pub fn skew(&self) -> Self {
        (*self - self.transpose()) * 0.5
    }

    #[inline]
    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.m[i][k];
                if a != 0.0 {
                    for j in 0..d {
                        out.m[i][j] += a * other.m[k][j];
                    }
                }
            }
        }
        out
    }

    /// Matrix-vector product `A x` on the leading `d` entries.
    pub fn apply(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.m[i][j] * x[j];
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.m[i][..self.dim].to_vec()).collect()
    }
}

impl Add for Matrix {
    type Output = Matrix;
    #[inline]
    fn add(mut self, rhs: Matrix) -> Matrix {
        self += rhs;
        self
    }
}

impl AddAssign for Matrix {
    #[inline]
    fn add_assign(&mut self, rhs: Matrix) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] += rhs.m[i][j];
            }
        }
    }
}

impl Sub for Matrix {
    type Output = Matrix;
    #[inline]
    fn sub(mut self, rhs: Matrix) -> Matrix {
        self -= rhs;
        self
    }
}

impl SubAssign for Matrix {
    #[inline]
    fn sub_assign(&mut self, rhs: Matrix) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] -= rhs.m[i][j];
            }
        }
    }
}

impl Mul<f64> for Matrix {
    type Output = Matrix;
    #[inline]
    fn mul(mut self, rhs: f64) -> Matrix {
        for row in self.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= rhs;
            }
        }
        self
    }
}

impl Mul<Matrix> for Matrix {
    type Output = Matrix;
    #[inline]
    fn mul(self, rhs: Matrix) -> Matrix {
        self.matmul(&rhs)
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    #[inline]
    fn neg(self) -> Matrix {
        self * -1.0
    }
}

/// A symmetric trace-free tensor, the value set 𝕊₀ of the order parameter `Q`
/// and the molecular field `H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct S0Tensor(Matrix);

impl S0Tensor {
    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim))
    }

    /// Wraps `m` after checking membership in 𝕊₀ to a relative tolerance of `1e-12`.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidInput("non-finite tensor entries".into()));
        }
        let scale = m.max_abs().max(1.0);
        let asym = (m - m.transpose()).max_abs();
        let tr = m.trace().abs();
        if asym > 1e-12 * scale || tr > 1e-12 * scale {
            return Err(Error::InvalidInput(format!("tensor not in S0 (asymmetry {asym:e}, trace {tr:e})")));
        }
        Ok(Self(m))
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    /// Coordinates with respect to [`s0_basis`].
    pub fn components(&self) -> Vec<f64> {
        s0_basis(self.dim()).iter().map(|e| e.ddot(&self.0)).collect()
    }

    pub fn from_components(dim: usize, comps: &[f64]) -> Result<Self> {
        let basis = s0_basis(dim);
        check_dim(basis.len(), comps.len())?;
        let mut m = Matrix::zeros(dim);
        for (e, c) in basis.iter().zip(comps) {
            m += *e * *c;
        }
        Ok(Self(m))
    }
}

/// Number of independent components of 𝕊₀ in dimension `d`.
pub fn s0_dimension(dim: usize) -> usize {
    dim * (dim + 1) / 2 - 1
}

/// An orthonormal basis of 𝕊₀ under the Frobenius inner product.
///
/// `d = 2`: `diag(1,-1)/√2`, `(e12+e21)/√2`.
/// `d = 3`: `diag(1,-1,0)/√2`, `diag(1,1,-2)/√6`, then the off-diagonal
/// pairs `(12)`, `(13)`, `(23)` scaled by `1/√2`.
pub fn s0_basis(dim: usize) -> Vec<Matrix> {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let off = |i: usize, j: usize| {
        let mut m = Matrix::zeros(dim);
        m.m[i][j] = r2;
        m.m[j][i] = r2;
        m
    };
    match dim {
        2 => vec![Matrix::diag(&[r2, -r2]), off(0, 1)],
        3 => {
            let r6 = 1.0 / 6f64.sqrt();
            vec![Matrix::diag(&[r2, -r2, 0.0]), Matrix::diag(&[r6, r6, -2.0 * r6]), off(0, 1), off(0, 2), off(1, 2)]
        }
        _ => Vec::new(),
    }
}

/// A velocity gradient `G[i][j] = ∂_i u_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityGradient(pub Matrix);

impl VelocityGradient {
    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Shear viscosity law `ν(Q)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Viscosity {
    Constant {
        nu0: f64,
    },
    /// `ν0 + ν1 / (1 + tr Q²)`, bounded in `(ν0, ν0 + ν1]`.
    Rational {
        nu0: f64,
        nu1: f64,
    },
}

impl Viscosity {
    #[inline]
    pub fn value(&self, q: &Matrix) -> f64 {
        match *self {
            Viscosity::Constant { nu0 } => nu0,
            Viscosity::Rational { nu0, nu1 } => nu0 + nu1 / (1.0 + q.ddot(q)),
        }
    }

    /// Analytic bounds `(c0, c1)` with `c0 ≤ ν(Q) ≤ c1` for all `Q`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Viscosity::Constant { nu0 } => (nu0, nu0),
            Viscosity::Rational { nu0, nu1 } => (nu0, nu0 + nu1),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Viscosity::Constant { nu0 } if nu0 > 0.0 && nu0.is_finite() => Ok(()),
            Viscosity::Rational { nu0, nu1 } if nu0 > 0.0 && nu1 >= 0.0 && nu0.is_finite() && nu1.is_finite() => Ok(()),
            Viscosity::Constant { .. } => Err(Error::InvalidInput("nu0 must be > 0".into())),
            Viscosity::Rational { .. } => Err(Error::InvalidInput("nu0 must be > 0 and nu1 >= 0".into())),
        }
    }
}

/// Material constants of the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Shape parameter ξ.
    pub xi: f64,
    /// Relaxation rate Γ > 0.
    pub gamma: f64,
    /// Elastic constant λ > 0.
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    /// Quartic coefficient, must be positive.
    pub c: f64,
    pub viscosity: Viscosity,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { xi: 0.0, gamma: 1.0, lambda: 1.0, a: 1.0, b: 1.0, c: 1.0, viscosity: Viscosity::Constant { nu0: 1.0 } }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.xi, self.gamma, self.lambda, self.a, self.b, self.c].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("model constants must be finite".into()));
        }
        if self.c <= 0.0 {
            return Err(Error::InvalidInput("c must be > 0".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidInput("gamma must be > 0".into()));
        }
        if self.lambda <= 0.0 {
            return Err(Error::InvalidInput("lambda must be > 0".into()));
        }
        self.viscosity.validate()
    }
}

/// Symmetric trace-free part `(M + Mᵀ)/2 - (tr M / d) I`.
pub fn s0_project(m: &Matrix) -> Result<S0Tensor> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entries".into()));
    }
    Ok(S0Tensor(raw::s0_part(m)))
}

/// Splits `G` into the stretch `Du` (symmetric) and vorticity `Wu` (skew) parts.
pub fn sym_skew(g: &VelocityGradient) -> (Matrix, Matrix) {
    (g.0.sym(), g.0.skew())
}

/// `σ(Q, H) = QH - HQ`.
pub fn sigma(q: &S0Tensor, h: &S0Tensor) -> Result<Matrix> {
    check_dim(q.dim(), h.dim())?;
    Ok(raw::sigma(&q.0, &h.0))
}

/// `τ₂(Q, H) = -QH - HQ + 2 (Q + I/d) tr(QH)`.
pub fn tau2(q: &S0Tensor, h: &S0Tensor) -> Result<Matrix> {
    check_dim(q.dim(), h.dim())?;
    Ok(raw::tau2(&q.0, &h.0))
}

/// `S₁(∇u, Q) = Wu Q - Q Wu`.
pub fn s1(g: &VelocityGradient, q: &S0Tensor) -> Result<S0Tensor> {
    check_dim(q.dim(), g.0.dim)?;
    Ok(S0Tensor(raw::s1(&g.0, &q.0)))
}

/// `S₂(∇u, Q) = Du Q + Q Du - 2 (Q + I/d) tr(Q ∇u)`.
pub fn s2(g: &VelocityGradient, q: &S0Tensor) -> Result<Matrix> {
    check_dim(q.dim(), g.0.dim)?;
    Ok(raw::s2(&g.0, &q.0))
}

/// Full co-rotational term `S = S₁ + ξ S₂ + (2ξ/d) Du`, projected onto 𝕊₀.
///
/// The pre-projection value is already in 𝕊₀ when `tr G = 0`.
pub fn s_full(g: &VelocityGradient, q: &S0Tensor, params: &ModelParams) -> Result<S0Tensor> {
    check_dim(q.dim(), g.0.dim)?;
    Ok(S0Tensor(raw::s0_part(&raw::s_full(&g.0, &q.0, params.xi))))
}

/// Deviatoric elastic stress `-λ (∂_i Q : ∂_j Q)_{ij}`.
///
/// The isotropic part is dropped: it is a pressure contribution and vanishes
/// against divergence-free test fields.
pub fn tau_elastic(grad_q: &[S0Tensor], params: &ModelParams) -> Result<Matrix> {
    let dim = grad_q.first().map(|q| q.dim()).unwrap_or(0);
    if dim == 0 {
        return Err(Error::InvalidInput("empty gradient".into()));
    }
    check_dim(dim, grad_q.len())?;
    let mats: Vec<Matrix> = grad_q.iter().map(|q| q.0).collect();
    Ok(raw::tau_elastic(&mats, params.lambda))
}

/// Landau–de Gennes bulk potential `(a/2) tr Q² - (b/3) tr Q³ + (c/4) (tr Q²)²`.
///
/// The quartic term is written as `(tr Q²)²` so that `bulk_force` is exactly its
/// negative gradient; for `d ≤ 3` this equals `(c/2) tr Q⁴`.
pub fn bulk_energy(q: &S0Tensor, params: &ModelParams) -> f64 {
    raw::bulk_energy(&q.0, params)
}

/// `L(Q) = -aQ + b (Q² - tr(Q²)/d I) - c tr(Q²) Q`, the negative 𝕊₀-gradient of the bulk potential.
pub fn bulk_force(q: &S0Tensor, params: &ModelParams) -> S0Tensor {
    S0Tensor(raw::bulk_force(&q.0, params))
}

/// Left-hand side of the cancellation identity
/// `S(G,Q₁):Q₂ + (σ(Q₁,Q₂) + ξ τ₂(Q₁,Q₂) - (2ξ/d) Q₂):G`.
///
/// Requires `tr G = 0` up to `1e-10 · max(1, |G|∞)`.
pub fn cancellation_residual(q1: &S0Tensor, q2: &S0Tensor, g: &VelocityGradient, params: &ModelParams) -> Result<f64> {
    check_dim(q1.dim(), q2.dim())?;
    check_dim(q1.dim(), g.0.dim)?;
    let tr = g.0.trace();
    if tr.abs() > 1e-10 * g.0.max_abs().max(1.0) {
        return Err(Error::Precondition(format!("velocity gradient must be trace-free (tr = {tr:e})")));
    }
    Ok(raw::cancellation_residual(&q1.0, &q2.0, &g.0, params.xi))
}

/// Unchecked kernels on bare matrices; these are what the field assembly calls per quadrature point.
pub(crate) mod raw {
    use super::{Matrix, ModelParams};

    #[inline]
    pub fn s0_part(m: &Matrix) -> Matrix {
        let d = m.dim;
        let mut out = m.sym();
        let t = m.trace() / d as f64;
        for i in 0..d {
            out.m[i][i] -= t;
        }
        out
    }

    #[inline]
    fn shifted(q: &Matrix) -> Matrix {
        *q + Matrix::identity(q.dim) * (1.0 / q.dim as f64)
    }

    #[inline]
    pub fn sigma(q: &Matrix, h: &Matrix) -> Matrix {
        q.matmul(h) - h.matmul(q)
    }

    #[inline]
    pub fn tau2(q: &Matrix, h: &Matrix) -> Matrix {
        let qh = q.matmul(h);
        // tr(QH) = Q:H for symmetric arguments
        let tr = qh.trace();
        shifted(q) * (2.0 * tr) - qh - h.matmul(q)
    }

    #[inline]
    pub fn s1(g: &Matrix, q: &Matrix) -> Matrix {
        let w = g.skew();
        w.matmul(q) - q.matmul(&w)
    }

    #[inline]
    pub fn s2(g: &Matrix, q: &Matrix) -> Matrix {
        let du = g.sym();
        let tr = q.matmul(g).trace();
        du.matmul(q) + q.matmul(&du) - shifted(q) * (2.0 * tr)
    }

    #[inline]
    pub fn s_full(g: &Matrix, q: &Matrix, xi: f64) -> Matrix {
        let mut out = s1(g, q);
        if xi != 0.0 {
            out += s2(g, q) * xi;
            out += g.sym() * (2.0 * xi / g.dim as f64);
        }
        out
    }

    /// `(σ + ξ τ₂)(Q, X) - (2ξ/d) X`, the stress paired with `∇v` in the momentum balance.
    #[inline]
    pub fn coupling_stress(q: &Matrix, x: &Matrix, xi: f64) -> Matrix {
        let mut out = sigma(q, x);
        if xi != 0.0 {
            out += tau2(q, x) * xi;
            out -= *x * (2.0 * xi / q.dim as f64);
        }
        out
    }

    pub fn tau_elastic(grad_q: &[Matrix], lambda: f64) -> Matrix {
        let d = grad_q.len();
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let v = -lambda * grad_q[i].ddot(&grad_q[j]);
                out.m[i][j] = v;
                out.m[j][i] = v;
            }
        }
        out
    }

    #[inline]
    pub fn bulk_energy(q: &Matrix, p: &ModelParams) -> f64 {
        let q2 = q.matmul(q);
        let tr2 = q2.trace();
        let tr3 = q2.ddot(q);
        0.5 * p.a * tr2 - p.b / 3.0 * tr3 + 0.25 * p.c * tr2 * tr2
    }

    #[inline]
    pub fn bulk_force(q: &Matrix, p: &ModelParams) -> Matrix {
        let d = q.dim;
        let mut q2 = q.matmul(q);
        let tr2 = q2.trace();
        for i in 0..d {
            q2.m[i][i] -= tr2 / d as f64;
        }
        q2 * p.b - *q * (p.a + p.c * tr2)
    }

    #[inline]
    pub fn cancellation_residual(q1: &Matrix, q2: &Matrix, g: &Matrix, xi: f64) -> f64 {
        s_full(g, q1, xi).ddot(q2) + coupling_stress(q1, q2, xi).ddot(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_rows(&[&[a, b], &[c, d]]).unwrap()
    }

    fn s0(m: Matrix) -> S0Tensor {
        S0Tensor::new(m).unwrap()
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    #[test]
    fn s0_project_examples() {
        assert_eq!(s0_project(&Matrix::identity(2)).unwrap().into_matrix(), Matrix::zeros(2));
        let q = m2(1.0, 0.0, 0.0, -1.0);
        assert_eq!(s0_project(&q).unwrap().into_matrix(), q);
        assert_eq!(s0_project(&m2(0.0, 2.0, 0.0, 0.0)).unwrap().into_matrix(), m2(0.0, 1.0, 1.0, 0.0));
        let bad = m2(f64::NAN, 0.0, 0.0, 0.0);
        assert!(matches!(s0_project(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sym_skew_examples() {
        let g = VelocityGradient(m2(0.0, 1.0, -1.0, 0.0));
        let (du, wu) = sym_skew(&g);
        assert_eq!(du, Matrix::zeros(2));
        assert_eq!(wu, g.0);
        let g = VelocityGradient(m2(0.0, 2.0, 0.0, 0.0));
        let (du, wu) = sym_skew(&g);
        assert_eq!(du, m2(0.0, 1.0, 1.0, 0.0));
        assert_eq!(wu, m2(0.0, 1.0, -1.0, 0.0));
    }

    #[test]
    fn sigma_examples() {
        let q = s0(m2(1.0, 0.0, 0.0, -1.0));
        let h = s0(m2(0.0, 1.0, 1.0, 0.0));
        assert_eq!(sigma(&q, &h).unwrap(), m2(0.0, 2.0, -2.0, 0.0));
        assert_eq!(sigma(&q, &q).unwrap(), Matrix::zeros(2));
        assert_eq!(sigma(&q, &S0Tensor::zeros(2)).unwrap(), Matrix::zeros(2));
        assert!(matches!(sigma(&q, &S0Tensor::zeros(3)), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn tau2_examples() {
        let q = s0(m2(1.0, 0.0, 0.0, -1.0));
        assert!(close(&tau2(&q, &q).unwrap(), &(q.into_matrix() * 4.0), 1e-15));
        assert_eq!(tau2(&q, &S0Tensor::zeros(2)).unwrap(), Matrix::zeros(2));
        assert_eq!(tau2(&S0Tensor::zeros(2), &q).unwrap(), Matrix::zeros(2));
    }

    #[test]
    fn s1_s2_examples() {
        let g = VelocityGradient(m2(0.0, 1.0, -1.0, 0.0));
        let q = s0(m2(1.0, 0.0, 0.0, -1.0));
        assert_eq!(s1(&g, &q).unwrap().into_matrix(), m2(0.0, -2.0, -2.0, 0.0));
        let z = S0Tensor::zeros(2);
        assert_eq!(s1(&g, &z).unwrap().into_matrix(), Matrix::zeros(2));
        assert_eq!(s2(&g, &z).unwrap(), Matrix::zeros(2));
        let gs = VelocityGradient(m2(0.5, 1.0, 1.0, -0.5));
        assert_eq!(s1(&gs, &q).unwrap().into_matrix(), Matrix::zeros(2));
    }

    #[test]
    fn s_full_examples() {
        let g = VelocityGradient(m2(0.3, 1.0, -0.7, -0.3));
        let q = s0(m2(0.4, 0.2, 0.2, -0.4));
        let p0 = ModelParams { xi: 0.0, ..Default::default() };
        assert!(close(s_full(&g, &q, &p0).unwrap().matrix(), s1(&g, &q).unwrap().matrix(), 1e-15));
        let p1 = ModelParams { xi: 1.0, ..Default::default() };
        let g = VelocityGradient(m2(0.0, 1.0, 1.0, 0.0));
        let s = s_full(&g, &S0Tensor::zeros(2), &p1).unwrap();
        assert!(close(s.matrix(), &m2(0.0, 1.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn tau_elastic_examples() {
        let p = ModelParams { lambda: 2.0, ..Default::default() };
        let z = S0Tensor::zeros(2);
        assert_eq!(tau_elastic(&[z, z], &p).unwrap(), Matrix::zeros(2));
        let dq = s0(m2(1.0, 0.0, 0.0, -1.0));
        let t = tau_elastic(&[dq, z], &p).unwrap();
        assert_eq!(t, m2(-4.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn bulk_energy_examples() {
        let p = ModelParams::default();
        assert_eq!(bulk_energy(&S0Tensor::zeros(2), &p), 0.0);
        let q = s0(m2(1.0, 0.0, 0.0, -1.0));
        // tr Q² = 2, tr Q³ = 0: 1 + 4/4
        assert!((bulk_energy(&q, &p) - 2.0).abs() < 1e-15);
        // tr Q² = 6, tr Q³ = 6: 3 - 2 + 36/4
        let q3 = s0(Matrix::diag(&[2.0, -1.0, -1.0]));
        assert!((bulk_energy(&q3, &p) - 10.0).abs() < 1e-14);
    }

    #[test]
    fn bulk_force_examples() {
        let p = ModelParams::default();
        assert_eq!(bulk_force(&S0Tensor::zeros(3), &p).into_matrix(), Matrix::zeros(3));
        let q = s0(m2(1.0, 0.0, 0.0, -1.0));
        assert!(close(bulk_force(&q, &p).matrix(), &(q.into_matrix() * -3.0), 1e-15));
        let q3 = s0(Matrix::diag(&[2.0, -1.0, -1.0]));
        assert!(close(bulk_force(&q3, &p).matrix(), &Matrix::diag(&[-12.0, 6.0, 6.0]), 1e-13));
    }

    #[test]
    fn cancellation_examples() {
        let p = ModelParams { xi: 0.7, ..Default::default() };
        let q1 = s0(m2(0.3, -0.2, -0.2, -0.3));
        let q2 = s0(m2(-0.5, 0.9, 0.9, 0.5));
        let g = VelocityGradient(m2(0.4, 1.3, -0.6, -0.4));
        assert!(cancellation_residual(&q1, &q2, &g, &p).unwrap().abs() < 1e-15);
        assert!(cancellation_residual(&S0Tensor::zeros(2), &q2, &g, &p).unwrap().abs() < 1e-15);
        let p0 = ModelParams { xi: 0.0, ..Default::default() };
        let w = VelocityGradient(m2(0.0, 0.8, -0.8, 0.0));
        assert!(cancellation_residual(&q1, &q2, &w, &p0).unwrap().abs() < 1e-15);
        let bad = VelocityGradient(m2(1.0, 0.0, 0.0, 0.0));
        assert!(matches!(cancellation_residual(&q1, &q2, &bad, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = ModelParams { c: -1.0, ..Default::default() };
        assert_eq!(bad.validate().unwrap_err().to_string(), "invalid input: c must be > 0");
        let v = Viscosity::Rational { nu0: 0.5, nu1: 2.0 };
        let (c0, c1) = v.bounds();
        for s in [0.0, 0.1, 1.0, 10.0, 1e6] {
            let q = Matrix::diag(&[s, -s]);
            let nu = v.value(&q);
            assert!(c0 <= nu && nu <= c1);
        }
    }

    #[test]
    fn s0_basis_is_orthonormal() {
        for d in [2, 3] {
            let b = s0_basis(d);
            assert_eq!(b.len(), s0_dimension(d));
            for (i, ei) in b.iter().enumerate() {
                assert!(ei.trace().abs() < 1e-15);
                for (j, ej) in b.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((ei.ddot(ej) - expect).abs() < 1e-15);
                }
            }
        }
    }
}
