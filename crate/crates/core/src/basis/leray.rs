use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Geometry, Grid, GridKind, StokesBasis, StokesTables};
use crate::error::{check_dim, Error, Result};

/// Leray projection onto divergence-free fields.
///
/// On the torus the projection is exact in Fourier space; on the rectangle the
/// field is projected onto the span of the supplied Stokes basis.
pub fn leray_project(
    samples: &[[f64; 3]],
    geom: &Geometry,
    grid: &Grid,
    stokes: &StokesBasis,
) -> Result<Vec<[f64; 3]>> {
    if geom.is_periodic() {
        return leray_project_periodic(samples, geom, grid);
    }
    let tables = StokesTables::new(stokes, grid)?;
    let coeffs = tables.project_velocity(samples)?;
    tables.synthesize_values(&coeffs)
}

/// `v̂ − k (k·v̂)/|k|²` for every Fourier mode of samples on a uniform periodic grid.
pub fn leray_project_periodic(samples: &[[f64; 3]], geom: &Geometry, grid: &Grid) -> Result<Vec<[f64; 3]>> {
    if !geom.is_periodic() || grid.kind() != GridKind::Uniform {
        return Err(Error::Unsupported("Fourier Leray projection needs a uniform periodic grid".into()));
    }
    check_dim(grid.len(), samples.len())?;
    check_dim(geom.dim(), grid.dim())?;
    let dim = geom.dim();
    let shape = grid.shape().to_vec();
    let mut fields: Vec<Vec<Complex64>> =
        (0..dim).map(|a| samples.iter().map(|v| Complex64::new(v[a], 0.0)).collect()).collect();
    let mut planner = FftPlanner::new();
    for f in fields.iter_mut() {
        fft_nd(&mut planner, f, &shape, false);
    }
    let strides: Vec<usize> = (0..dim).map(|a| shape[a + 1..].iter().product()).collect();
    for idx in 0..grid.len() {
        let mut k = [0.0; 3];
        for a in 0..dim {
            let j = (idx / strides[a]) % shape[a];
            let m = if j <= shape[a] / 2 { j as f64 } else { j as f64 - shape[a] as f64 };
            k[a] = 2.0 * PI * m / geom.lengths()[a];
        }
        let k2: f64 = k.iter().map(|v| v * v).sum();
        if k2 == 0.0 {
            continue;
        }
        let mut dot = Complex64::new(0.0, 0.0);
        for a in 0..dim {
            dot += fields[a][idx] * k[a];
        }
        for a in 0..dim {
            fields[a][idx] -= dot * (k[a] / k2);
        }
    }
    for f in fields.iter_mut() {
        fft_nd(&mut planner, f, &shape, true);
    }
    let scale = 1.0 / grid.len() as f64;
    Ok((0..grid.len())
        .map(|p| {
            let mut v = [0.0; 3];
            for a in 0..dim {
                v[a] = fields[a][p].re * scale;
            }
            v
        })
        .collect())
}

/// In-place unnormalized n-D FFT over a row-major array with the last axis fastest.
fn fft_nd(planner: &mut FftPlanner<f64>, data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let total = data.len();
    for (a, &n) in shape.iter().enumerate() {
        let stride: usize = shape[a + 1..].iter().product();
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in 0..total {
            // visit each line once: its first element has index 0 along axis a
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for j in 0..n {
                line[j] = data[start + j * stride];
            }
            fft.process(&mut line);
            for j in 0..n {
                data[start + j * stride] = line[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Geometry, Grid) {
        let g = Geometry::torus(&[2.0 * PI, 2.0 * PI]).unwrap();
        let grid = Grid::uniform(&g, &[16, 16]);
        (g, grid)
    }

    #[test]
    fn gradients_are_removed() {
        let (g, grid) = setup();
        let v: Vec<[f64; 3]> = grid
            .points()
            .iter()
            .map(|x| {
                let c = (x[0] + x[1]).cos();
                [c, c, 0.0]
            })
            .collect();
        let p = leray_project_periodic(&v, &g, &grid).unwrap();
        assert!(p.iter().all(|v| v[0].abs() < 1e-13 && v[1].abs() < 1e-13));
    }

    #[test]
    fn solenoidal_fields_are_fixed() {
        let (g, grid) = setup();
        let v: Vec<[f64; 3]> = grid.points().iter().map(|x| [x[1].sin(), (2.0 * x[0]).cos(), 0.0]).collect();
        let p = leray_project_periodic(&v, &g, &grid).unwrap();
        for (a, b) in v.iter().zip(&p) {
            assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn sin_x_is_annihilated() {
        // (sin x, 0) is parallel to its wavevector
        let (g, grid) = setup();
        let v: Vec<[f64; 3]> = grid.points().iter().map(|x| [x[0].sin(), 0.0, 0.0]).collect();
        let p = leray_project_periodic(&v, &g, &grid).unwrap();
        assert!(p.iter().all(|v| v[0].abs() < 1e-13 && v[1].abs() < 1e-13));
    }
}
