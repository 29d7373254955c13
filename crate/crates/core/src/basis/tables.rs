use nalgebra::DMatrix;

use super::{Grid, LaplaceBasis, StokesBasis, TensorMode, VectorMode};
use crate::error::{check_dim, Result};
use crate::tensor::Matrix;

/// Laplace modes tabulated on a quadrature grid.
///
/// Tensor fields on the grid are handled through their coordinates in the
/// orthonormal 𝕊₀ directions, so synthesis and projection reduce to scalar
/// transforms per direction.
#[derive(Clone, Debug)]
pub struct LaplaceTables {
    dim: usize,
    npts: usize,
    modes: Vec<TensorMode>,
    directions: Vec<Matrix>,
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    /// `val[s * npts + p]`
    val: Vec<f64>,
    /// `grad[(s * dim + a) * npts + p]`
    grad: Vec<f64>,
}

impl LaplaceTables {
    pub fn new(basis: &LaplaceBasis, grid: &Grid) -> Result<Self> {
        check_dim(basis.dim(), grid.dim())?;
        let dim = basis.dim();
        let npts = grid.len();
        let ns = basis.scalars().len();
        let mut val = vec![0.0; ns * npts];
        let mut grad = vec![0.0; ns * dim * npts];
        for (s, mode) in basis.scalars().iter().enumerate() {
            for (p, x) in grid.points().iter().enumerate() {
                let (v, g) = mode.eval(x);
                val[s * npts + p] = v;
                for a in 0..dim {
                    grad[(s * dim + a) * npts + p] = g[a];
                }
            }
        }
        Ok(Self {
            dim,
            npts,
            modes: basis.modes().to_vec(),
            directions: basis.directions().to_vec(),
            eigenvalues: basis.eigenvalues().to_vec(),
            weights: grid.weights().to_vec(),
            val,
            grad,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    #[inline]
    pub fn npts(&self) -> usize {
        self.npts
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn directions(&self) -> &[Matrix] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        check_dim(self.len(), coeffs.len())
    }

    fn to_matrices(&self, comps: &[Vec<f64>]) -> Vec<Matrix> {
        (0..self.npts)
            .map(|p| {
                let mut m = Matrix::zeros(self.dim);
                for (e, c) in self.directions.iter().zip(comps) {
                    if c[p] != 0.0 {
                        m += *e * c[p];
                    }
                }
                m
            })
            .collect()
    }

    /// Direction coordinates of `Σ c_i e_i` at every grid point.
    pub fn synthesize_components(&self, coeffs: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_coeffs(coeffs)?;
        let mut comps = vec![vec![0.0; self.npts]; self.directions.len()];
        for (tm, &c) in self.modes.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            let row = &self.val[tm.scalar * self.npts..(tm.scalar + 1) * self.npts];
            for (o, v) in comps[tm.direction].iter_mut().zip(row) {
                *o += c * v;
            }
        }
        Ok(comps)
    }

    /// Grid values of `Σ c_i e_i`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<Matrix>> {
        Ok(self.to_matrices(&self.synthesize_components(coeffs)?))
    }

    /// Grid values and gradients (`grad[p][a] = ∂_a Q`) of `Σ c_i e_i`.
    pub fn synthesize_with_grad(&self, coeffs: &[f64]) -> Result<(Vec<Matrix>, Vec<[Matrix; 3]>)> {
        self.check_coeffs(coeffs)?;
        let ndir = self.directions.len();
        let mut gcomps = vec![vec![0.0; self.npts]; ndir * self.dim];
        for (tm, &c) in self.modes.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            for a in 0..self.dim {
                let off = (tm.scalar * self.dim + a) * self.npts;
                let row = &self.grad[off..off + self.npts];
                for (o, v) in gcomps[tm.direction * self.dim + a].iter_mut().zip(row) {
                    *o += c * v;
                }
            }
        }
        let vals = self.synthesize(coeffs)?;
        let z = Matrix::zeros(self.dim);
        let grads = (0..self.npts)
            .map(|p| {
                let mut g = [z; 3];
                for (k, e) in self.directions.iter().enumerate() {
                    for (a, ga) in g.iter_mut().enumerate().take(self.dim) {
                        let c = gcomps[k * self.dim + a][p];
                        if c != 0.0 {
                            *ga += *e * c;
                        }
                    }
                }
                g
            })
            .collect();
        Ok((vals, grads))
    }

    /// Quadrature inner products `(f, e_i)` for grid samples `f`.
    ///
    /// Samples need not be in 𝕊₀; only their 𝕊₀ part contributes.
    pub fn project_tensor(&self, samples: &[Matrix]) -> Result<Vec<f64>> {
        check_dim(self.npts, samples.len())?;
        if let Some(m) = samples.first() {
            check_dim(self.dim, m.dim())?;
        }
        let comps: Vec<Vec<f64>> =
            self.directions.iter().map(|e| samples.iter().map(|m| m.ddot(e)).collect()).collect();
        Ok(self.project_components(&comps))
    }

    /// Quadrature inner products from direction coordinates.
    pub fn project_components(&self, comps: &[Vec<f64>]) -> Vec<f64> {
        let weighted: Vec<Vec<f64>> =
            comps.iter().map(|c| c.iter().zip(&self.weights).map(|(c, w)| c * w).collect()).collect();
        self.modes
            .iter()
            .map(|tm| {
                let row = &self.val[tm.scalar * self.npts..(tm.scalar + 1) * self.npts];
                row.iter().zip(&weighted[tm.direction]).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Tabulated scalar values of mode `i` (without the 𝕊₀ direction).
    pub fn scalar_values(&self, i: usize) -> &[f64] {
        let s = self.modes[i].scalar;
        &self.val[s * self.npts..(s + 1) * self.npts]
    }

    pub fn modes(&self) -> &[TensorMode] {
        &self.modes
    }
}

/// Stokes modes and their gradients tabulated on a quadrature grid.
#[derive(Clone, Debug)]
pub struct StokesTables {
    dim: usize,
    npts: usize,
    n: usize,
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    /// `val[(k * dim + a) * npts + p]`
    val: Vec<f64>,
    /// `grad[((k * dim + a) * dim + b) * npts + p]` for `∂_a v_b`
    grad: Vec<f64>,
}

impl StokesTables {
    pub fn new(basis: &StokesBasis, grid: &Grid) -> Result<Self> {
        check_dim(basis.dim(), grid.dim())?;
        let dim = basis.dim();
        let npts = grid.len();
        let n = basis.len();
        let mut val = vec![0.0; n * dim * npts];
        let mut grad = vec![0.0; n * dim * dim * npts];
        let stream_tab = basis.stream().map(|sf| StreamTabulation::new(sf, grid));
        for k in 0..n {
            match (&basis.modes()[k], &stream_tab) {
                (VectorMode::Stream { column }, Some(tab)) => {
                    let sf = basis.stream().unwrap();
                    // [ψ_y, ψ_x, ψ_xy, ψ_xx, ψ_yy] on the grid
                    let d = tab.derivs(sf.coeffs(*column));
                    for p in 0..npts {
                        val[(k * 2) * npts + p] = d[0][p];
                        val[(k * 2 + 1) * npts + p] = -d[1][p];
                        grad[(k * 4) * npts + p] = d[2][p];
                        grad[(k * 4 + 1) * npts + p] = -d[3][p];
                        grad[(k * 4 + 2) * npts + p] = d[4][p];
                        grad[(k * 4 + 3) * npts + p] = -d[2][p];
                    }
                }
                _ => {
                    for (p, x) in grid.points().iter().enumerate() {
                        let (v, g) = basis.eval_mode(k, x);
                        for a in 0..dim {
                            val[(k * dim + a) * npts + p] = v[a];
                            for b in 0..dim {
                                grad[((k * dim + a) * dim + b) * npts + p] = g.get(a, b);
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            dim,
            npts,
            n,
            eigenvalues: basis.eigenvalues().to_vec(),
            weights: grid.weights().to_vec(),
            val,
            grad,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn npts(&self) -> usize {
        self.npts
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grid values of `Σ c_k v_k`.
    pub fn synthesize_values(&self, coeffs: &[f64]) -> Result<Vec<[f64; 3]>> {
        check_dim(self.n, coeffs.len())?;
        let mut out = vec![[0.0; 3]; self.npts];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for a in 0..self.dim {
                let off = (k * self.dim + a) * self.npts;
                for (o, v) in out.iter_mut().zip(&self.val[off..off + self.npts]) {
                    o[a] += c * v;
                }
            }
        }
        Ok(out)
    }

    /// Grid values and gradients (`G[a][b] = ∂_a u_b`) of `Σ c_k v_k`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<(Vec<[f64; 3]>, Vec<Matrix>)> {
        let vals = self.synthesize_values(coeffs)?;
        let d = self.dim;
        let mut flat = vec![0.0; d * d * self.npts];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for ab in 0..d * d {
                let off = (k * d * d + ab) * self.npts;
                for (o, v) in
                    flat[ab * self.npts..(ab + 1) * self.npts].iter_mut().zip(&self.grad[off..off + self.npts])
                {
                    *o += c * v;
                }
            }
        }
        let grads = (0..self.npts)
            .map(|p| {
                let mut g = Matrix::zeros(d);
                for a in 0..d {
                    for b in 0..d {
                        g.set(a, b, flat[(a * d + b) * self.npts + p]);
                    }
                }
                g
            })
            .collect();
        Ok((vals, grads))
    }

    /// Quadrature inner products `(f, v_k)`.
    pub fn project_velocity(&self, samples: &[[f64; 3]]) -> Result<Vec<f64>> {
        check_dim(self.npts, samples.len())?;
        Ok(self.pair(Some(samples), None))
    }

    /// `Σ_p w_p (f·v_k + S:∇v_k)` for every mode; either part may be omitted.
    pub fn pair(&self, f: Option<&[[f64; 3]]>, s: Option<&[Matrix]>) -> Vec<f64> {
        let d = self.dim;
        let wf: Option<Vec<Vec<f64>>> =
            f.map(|f| (0..d).map(|a| f.iter().zip(&self.weights).map(|(v, w)| v[a] * w).collect()).collect());
        let ws: Option<Vec<Vec<f64>>> = s.map(|s| {
            (0..d * d).map(|ab| s.iter().zip(&self.weights).map(|(m, w)| m.get(ab / d, ab % d) * w).collect()).collect()
        });
        (0..self.n)
            .map(|k| {
                let mut acc = 0.0;
                if let Some(wf) = &wf {
                    for (a, wa) in wf.iter().enumerate() {
                        let off = (k * d + a) * self.npts;
                        acc += self.val[off..off + self.npts].iter().zip(wa).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                if let Some(ws) = &ws {
                    for (ab, wab) in ws.iter().enumerate() {
                        let off = (k * d * d + ab) * self.npts;
                        acc += self.grad[off..off + self.npts].iter().zip(wab).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                acc
            })
            .collect()
    }
}

/// Tensor-product evaluation of stream-function derivatives on a grid.
struct StreamTabulation {
    fx: [DMatrix<f64>; 3],
    fy: [DMatrix<f64>; 3],
    ny: usize,
}

impl StreamTabulation {
    fn new(sf: &super::StreamFunctionBasis, grid: &Grid) -> Self {
        let p = sf.degree();
        let build = |axis: usize| {
            let xs = grid.axis(axis);
            let mut m = [DMatrix::zeros(xs.len(), p), DMatrix::zeros(xs.len(), p), DMatrix::zeros(xs.len(), p)];
            for (i, &x) in xs.iter().enumerate() {
                let f = sf.eval_1d(axis, x);
                for (k, fk) in f.iter().enumerate() {
                    for (j, mj) in m.iter_mut().enumerate() {
                        mj[(i, k)] = fk[j];
                    }
                }
            }
            m
        };
        Self { fx: build(0), fy: build(1), ny: grid.axis(1).len() }
    }

    /// `[ψ_y, ψ_x, ψ_xy, ψ_xx, ψ_yy]`, each flattened with y fastest.
    fn derivs(&self, coeffs: &[f64]) -> [Vec<f64>; 5] {
        let p = self.fx[0].ncols();
        // C[a, b] with a along x
        let c = DMatrix::from_row_slice(p, p, coeffs);
        let eval = |ax: usize, ay: usize| {
            let m = &self.fx[ax] * &c * self.fy[ay].transpose();
            let nx = m.nrows();
            let mut out = vec![0.0; nx * self.ny];
            for i in 0..nx {
                for j in 0..self.ny {
                    out[i * self.ny + j] = m[(i, j)];
                }
            }
            out
        };
        [eval(0, 1), eval(1, 0), eval(1, 1), eval(2, 0), eval(0, 2)]
    }
}
