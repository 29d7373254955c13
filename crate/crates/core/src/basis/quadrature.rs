use super::{Geometry, GeometryMode};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_deriv(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    /// Uniform periodic grid with trapezoidal weights.
    Uniform,
    /// Tensor Gauss–Legendre grid.
    Gauss,
}

/// A tensor-product quadrature grid. Points are stored with the last axis
/// varying fastest.
#[derive(Clone, Debug)]
pub struct Grid {
    kind: GridKind,
    dim: usize,
    shape: Vec<usize>,
    axes: Vec<Vec<f64>>,
    axis_weights: Vec<Vec<f64>>,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Grid {
    /// Uniform grid with `shape[i]` points along axis `i` of the box `geom`.
    pub fn uniform(geom: &Geometry, shape: &[usize]) -> Self {
        let axes: Vec<Vec<f64>> = shape
            .iter()
            .zip(geom.lengths())
            .map(|(&n, &l)| (0..n).map(|j| l * j as f64 / n as f64).collect())
            .collect();
        let axis_weights = shape.iter().zip(geom.lengths()).map(|(&n, &l)| vec![l / n as f64; n]).collect();
        Self::from_axes(GridKind::Uniform, axes, axis_weights)
    }

    /// Tensor Gauss–Legendre grid with `shape[i]` nodes along axis `i`.
    pub fn gauss(geom: &Geometry, shape: &[usize]) -> Self {
        let mut axes = Vec::new();
        let mut axis_weights = Vec::new();
        for (&n, &l) in shape.iter().zip(geom.lengths()) {
            let (x, w) = gauss_legendre(n);
            axes.push(x.iter().map(|s| 0.5 * l * (s + 1.0)).collect());
            axis_weights.push(w.iter().map(|w| 0.5 * l * w).collect());
        }
        Self::from_axes(GridKind::Gauss, axes, axis_weights)
    }

    /// The natural grid for `geom`: uniform on the torus, Gauss–Legendre on the rectangle.
    pub fn for_geometry(geom: &Geometry, shape: &[usize]) -> Self {
        match geom.mode() {
            GeometryMode::PeriodicTorus => Self::uniform(geom, shape),
            GeometryMode::Rectangle => Self::gauss(geom, shape),
        }
    }

    fn from_axes(kind: GridKind, axes: Vec<Vec<f64>>, axis_weights: Vec<Vec<f64>>) -> Self {
        let dim = axes.len();
        let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let total: usize = shape.iter().product();
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut p = [0.0; 3];
            let mut w = 1.0;
            for a in 0..dim {
                p[a] = axes[a][idx[a]];
                w *= axis_weights[a][idx[a]];
            }
            points.push(p);
            weights.push(w);
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self { kind, dim, shape, axes, axis_weights, points, weights }
    }

    #[inline]
    pub fn kind(&self) -> GridKind {
        self.kind
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn axis_weights(&self, a: usize) -> &[f64] {
        &self.axis_weights[a]
    }

    #[inline]
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature of pointwise samples.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 17, 40] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q} exact={exact}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn uniform_grid_weights_sum_to_volume() {
        let g = Geometry::torus(&[2.0, 3.0]).unwrap();
        let grid = Grid::uniform(&g, &[8, 6]);
        assert_eq!(grid.len(), 48);
        assert!((grid.weights().iter().sum::<f64>() - 6.0).abs() < 1e-13);
        // last axis fastest
        assert_eq!(grid.points()[1], [0.0, 0.5, 0.0]);
    }
}
