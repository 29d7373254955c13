use super::laplace::Factor1d;
use super::{BcType, Face, Geometry, Side};
use crate::error::{Error, Result};
use crate::tensor::{raw, Matrix};

/// Boundary data on one face, as a finite series in the unnormalized
/// tangential eigenfunctions `trig(freq_m s)` selected by the boundary types of
/// the two faces adjacent to it.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceData {
    pub face: Face,
    /// `(m, C_m)` pairs; `C_m` must lie in 𝕊₀.
    pub terms: Vec<(usize, Matrix)>,
}

/// Dirichlet data `Q_D` on Γ_D and Neumann data `Q_N` on Γ_N.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryData {
    pub dirichlet: Vec<FaceData>,
    pub neumann: Vec<FaceData>,
}

impl BoundaryData {
    pub fn is_homogeneous_neumann(&self) -> bool {
        self.neumann.iter().all(|f| f.terms.iter().all(|(_, c)| c.max_abs() == 0.0))
    }
}

#[derive(Clone, Debug)]
struct Term {
    coeff: Matrix,
    normal_axis: usize,
    side: Side,
    length: f64,
    opposite: BcType,
    tangent: Factor1d,
}

impl Term {
    /// Normal profile `g(ξ)`, `g'(ξ)`, `g''(ξ)` with `ξ` the distance from the face.
    fn profile(&self, xi: f64) -> (f64, f64, f64) {
        let a = self.tangent.freq;
        let l = self.length;
        if a == 0.0 {
            return match self.opposite {
                BcType::Dirichlet => (1.0 - xi / l, -1.0 / l, 0.0),
                BcType::Neumann => (1.0, 0.0, 0.0),
            };
        }
        let e = (-a * xi).exp();
        let r = (-2.0 * a * (l - xi)).exp();
        let r0 = (-2.0 * a * l).exp();
        let (g, dg) = match self.opposite {
            // sinh(a(L-ξ)) / sinh(aL)
            BcType::Dirichlet => (e * (1.0 - r) / (1.0 - r0), -a * e * (1.0 + r) / (1.0 - r0)),
            // cosh(a(L-ξ)) / cosh(aL)
            BcType::Neumann => (e * (1.0 + r) / (1.0 + r0), -a * e * (1.0 - r) / (1.0 + r0)),
        };
        (g, dg, a * a * g)
    }

    fn eval(&self, x: &[f64; 3]) -> (f64, [f64; 2], f64) {
        let n = self.normal_axis;
        let t = 1 - n;
        let (xi, sign) = match self.side {
            Side::Low => (x[n], 1.0),
            Side::High => (self.length - x[n], -1.0),
        };
        let (g, dg, ddg) = self.profile(xi);
        let arg = self.tangent.freq * x[t];
        let f = self.tangent.trig.eval(arg);
        let df = self.tangent.freq * self.tangent.trig.deriv(arg);
        let ddf = -self.tangent.freq * self.tangent.freq * f;
        let mut grad = [0.0; 2];
        grad[n] = sign * dg * f;
        grad[t] = g * df;
        (g * f, grad, ddg * f + g * ddf)
    }
}

/// The harmonic lift `Q̃` of Dirichlet data: `ΔQ̃ = 0`, `Q̃ = Q_D` on Γ_D,
/// `∂ₙQ̃ = 0` on Γ_N, built from separable closed-form terms.
#[derive(Clone, Debug)]
pub struct HarmonicExtension {
    dim: usize,
    terms: Vec<Term>,
    data: BoundaryData,
}

impl HarmonicExtension {
    /// The zero extension (torus, or homogeneous data).
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new(), data: BoundaryData::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn data(&self) -> &BoundaryData {
        &self.data
    }

    /// Value and gradient (`grad[a] = ∂_a Q̃`).
    pub fn eval(&self, x: &[f64; 3]) -> (Matrix, [Matrix; 3]) {
        let z = Matrix::zeros(self.dim);
        let mut v = z;
        let mut g = [z; 3];
        for t in &self.terms {
            let (s, gs, _) = t.eval(x);
            v += t.coeff * s;
            g[0] += t.coeff * gs[0];
            g[1] += t.coeff * gs[1];
        }
        (v, g)
    }

    /// `ΔQ̃(x)` evaluated from second derivatives of the closed form.
    pub fn laplacian(&self, x: &[f64; 3]) -> Matrix {
        let mut out = Matrix::zeros(self.dim);
        for t in &self.terms {
            out += t.coeff * t.eval(x).2;
        }
        out
    }
}

/// Value of the prescribed face data at the tangential coordinate `s`.
pub(crate) fn face_value(geom: &Geometry, data: &FaceData, s: f64) -> Matrix {
    let t = 1 - data.face.axis;
    let bcs = geom.axis_bcs(t);
    let mut out = Matrix::zeros(geom.dim());
    for (m, c) in &data.terms {
        let f = Factor1d::eigenfunction(bcs, *m, geom.lengths()[t]);
        out += *c * f.trig.eval(f.freq * s);
    }
    out
}

/// Builds `Q̃` from `Q_D` on Γ_D. `Q_N` is validated and kept for trace diagnostics
/// only; the lift always has zero normal derivative on Γ_N.
pub fn harmonic_extension(geom: &Geometry, q_d: &[FaceData], q_n: &[FaceData]) -> Result<HarmonicExtension> {
    if geom.is_periodic() {
        return Err(Error::Unsupported("harmonic extension requires rectangle geometry".into()));
    }
    let dim = geom.dim();
    let mut terms = Vec::new();
    let mut seen: Vec<Face> = Vec::new();
    for fd in q_d {
        if geom.bc(fd.face) != BcType::Dirichlet {
            return Err(Error::IncompatibleData(format!("Dirichlet data on non-Dirichlet face {}", fd.face.name())));
        }
        if seen.contains(&fd.face) {
            return Err(Error::IncompatibleData(format!("face {} given twice", fd.face.name())));
        }
        seen.push(fd.face);
        let n = fd.face.axis;
        let t = 1 - n;
        let bcs = geom.axis_bcs(t);
        let opposite = geom.bc(Face::new(n, if fd.face.side == Side::Low { Side::High } else { Side::Low }));
        for (m, c) in &fd.terms {
            check_s0(c, dim, fd.face)?;
            if *m < Factor1d::first_index(bcs) {
                return Err(Error::IncompatibleData(format!(
                    "mode {m} is not admissible on face {} (tangential faces {:?})",
                    fd.face.name(),
                    bcs
                )));
            }
            if c.max_abs() == 0.0 {
                continue;
            }
            terms.push(Term {
                coeff: *c,
                normal_axis: n,
                side: fd.face.side,
                length: geom.lengths()[n],
                opposite,
                tangent: Factor1d::eigenfunction(bcs, *m, geom.lengths()[t]),
            });
        }
    }
    for fd in q_n {
        if geom.bc(fd.face) != BcType::Neumann {
            return Err(Error::IncompatibleData(format!("Neumann data on non-Neumann face {}", fd.face.name())));
        }
        let bcs = geom.axis_bcs(1 - fd.face.axis);
        for (m, c) in &fd.terms {
            check_s0(c, dim, fd.face)?;
            if *m < Factor1d::first_index(bcs) {
                return Err(Error::IncompatibleData(format!("mode {m} is not admissible on face {}", fd.face.name())));
            }
        }
    }
    Ok(HarmonicExtension { dim, terms, data: BoundaryData { dirichlet: q_d.to_vec(), neumann: q_n.to_vec() } })
}

fn check_s0(c: &Matrix, dim: usize, face: Face) -> Result<()> {
    if c.dim() != dim || !c.is_finite() {
        return Err(Error::IncompatibleData(format!("bad coefficient on face {}", face.name())));
    }
    let dev = (raw::s0_part(c) - *c).max_abs();
    if dev > 1e-12 * c.max_abs().max(1.0) {
        return Err(Error::IncompatibleData(format!("coefficient on face {} is not in S0", face.name())));
    }
    Ok(())
}
