//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p qtensor-cli --test acceptance`. The process fails if
//! any criterion fails other than those listed in `KNOWN_FAILURES`, each of which
//! must still meet its own diagnostic assertion.

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtensor::basis::{harmonic_extension, BoundaryData, Face, FaceData, Geometry, HarmonicExtension, ScalarMode};
use qtensor::linearized::{Linearization, RhsPair};
use qtensor::sim::{preset_state, run, Discretization, GalerkinSystem, Integrator, Preset, SimState, Trajectory};
use qtensor::tensor::{cancellation_residual, s0_project, Matrix, ModelParams, VelocityGradient, Viscosity};
use qtensor::verification::{
    energy_inequality_check, gradient_check_bulk, phase_space_check, tau1_weak_identity, weak_residual_q,
    weak_residual_u,
};
use qtensor_cli::output::{parse_snapshot, snapshot_bytes};
use qtensor_cli::{cmd_simulate, parse_config};

/// Criteria that cannot meet their pinned tolerance; see the README.
const KNOWN_FAILURES: &[usize] = &[8];

struct Outcome {
    passed: bool,
    summary: String,
    /// For known failures: whether the diagnostic that explains the failure holds.
    diagnostic_ok: bool,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary, diagnostic_ok: true }
}

fn torus() -> Geometry {
    Geometry::torus(&[2.0 * PI, 2.0 * PI]).unwrap()
}

fn square(faces: &[&str]) -> Geometry {
    let f: Vec<Face> = faces.iter().map(|n| Face::parse(n).unwrap()).collect();
    Geometry::rectangle(&[PI, PI], &f).unwrap()
}

fn system(
    geom: &Geometry,
    params: ModelParams,
    n_q: usize,
    n_u: usize,
    lift: Option<HarmonicExtension>,
) -> GalerkinSystem {
    GalerkinSystem::new(geom, &params, &Discretization { n_q, n_u, grid: None }, lift).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            m.set(i, j, rng.random_range(-1.0..1.0));
        }
    }
    m
}

fn random_s0(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    s0_project(&random_matrix(rng, d)).unwrap().into_matrix()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect()
}

fn c1_cancellation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for d in [2, 3] {
        for xi in [-1.0, 0.0, 0.5, 1.0] {
            let p = ModelParams { xi, ..Default::default() };
            for _ in 0..1000 {
                let q1 = s0_project(&random_matrix(&mut rng, d)).unwrap();
                let q2 = s0_project(&random_matrix(&mut rng, d)).unwrap();
                let mut g = random_matrix(&mut rng, d);
                let tr = g.trace() / d as f64;
                for i in 0..d {
                    g.set(i, i, g.get(i, i) - tr);
                }
                let scale = g.norm() * q2.matrix().norm() * (1.0 + q1.matrix().norm()).powi(2);
                let r = cancellation_residual(&q1, &q2, &VelocityGradient(g), &p).unwrap();
                worst = worst.max(r.abs() / scale);
            }
        }
    }
    outcome(worst <= 1e-12, format!("max |residual|/scale = {worst:.2e} <= 1e-12 over 8000 samples"))
}

fn c2_lyapunov() -> Outcome {
    let p = ModelParams { xi: 0.5, ..Default::default() };
    let sys = system(&torus(), p, 256, 64, None);
    let init = preset_state(&sys, Preset::Random, 0.3, 11).unwrap();
    let rk = run(&sys, &init, &Integrator::Rk45 { tol: 1e-10, max_dt: 0.1 }, 1.0, None).unwrap();
    let e0 = rk.reports[0].total;
    let cum = rk.cumulative_identity_residual().abs();
    let worst_prefix = rk
        .reports
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r.step_dissipation;
            Some((r.total + *acc - e0).abs())
        })
        .fold(0.0, f64::max);
    let bound = 1e-8 * (1.0 + e0.abs());
    let mid = |dt: f64| {
        run(&sys, &init, &Integrator::ImplicitMidpoint { dt }, 1.0, None).unwrap().cumulative_identity_residual().abs()
    };
    let (r1, r2) = (mid(0.04), mid(0.02));
    let ratio = r1 / r2;
    outcome(
        worst_prefix <= bound && ratio >= 3.5,
        format!(
            "rk45: max_t |E(t)+D(t)-E(0)| = {worst_prefix:.2e} (final {cum:.2e}) <= {bound:.2e}; midpoint dt 0.04 -> 0.02: {r1:.2e} -> {r2:.2e}, ratio {ratio:.2} >= 3.5"
        ),
    )
}

fn c3_monotonicity() -> Outcome {
    let cases = [
        (Preset::Relax, 0.0),
        (Preset::Shear, 0.5),
        (Preset::Vortex, -0.5),
        (Preset::UniaxialWave, 1.0),
        (Preset::Random, 0.5),
    ];
    let mut all = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (preset, xi) in cases {
        let p = ModelParams { xi, viscosity: Viscosity::Rational { nu0: 0.5, nu1: 0.5 }, ..Default::default() };
        let sys = system(&torus(), p, 40, 12, None);
        let init = preset_state(&sys, preset, 0.5, 5).unwrap();
        let out = run(&sys, &init, &Integrator::Rk45 { tol: 1e-10, max_dt: 0.05 }, 2.0, None).unwrap();
        let slack = 1e-9 * (1.0 + out.reports[0].total.abs());
        let rise = out.reports.windows(2).map(|w| w[1].total - w[0].total).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(rise / slack);
        all &= rise <= slack && energy_inequality_check(&out.reports, slack).passed;
    }
    outcome(all, format!("5 presets (xi in {{0, 0.5, -0.5, 1, 0.5}}): max step increase / slack = {worst:.2e} <= 1, energy inequality holds"))
}

fn c4_bulk_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for d in [2, 3] {
        let samples: Vec<Matrix> = (0..100).map(|_| random_s0(&mut rng, d)).collect();
        let r = gradient_check_bulk(&samples, &ModelParams::default(), 1e-5).unwrap();
        worst = worst.max(r.residual);
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:.2e} <= 1e-6 (100 samples per d, step 1e-5)"))
}

/// Mass and stiffness deviations of scalar modes: `max|M − I|`, `max|K − diag λ| / max(λ, 1)`.
fn scalar_gram(scalars: &[ScalarMode], sys: &GalerkinSystem) -> (f64, f64) {
    let pts = sys.grid().points();
    let w = sys.grid().weights();
    let vals: Vec<Vec<(f64, [f64; 3])>> = scalars.iter().map(|s| pts.iter().map(|x| s.eval(x)).collect()).collect();
    let (mut gm, mut gk): (f64, f64) = (0.0, 0.0);
    for i in 0..scalars.len() {
        for j in 0..=i {
            let (mut m, mut k) = (0.0, 0.0);
            for p in 0..w.len() {
                let (a, b) = (&vals[i][p], &vals[j][p]);
                m += w[p] * a.0 * b.0;
                k += w[p] * (a.1[0] * b.1[0] + a.1[1] * b.1[1] + a.1[2] * b.1[2]);
            }
            let id = if i == j { 1.0 } else { 0.0 };
            gm = gm.max((m - id).abs());
            gk = gk.max((k - id * scalars[i].eigenvalue()).abs() / scalars[i].eigenvalue().max(1.0));
        }
    }
    (gm, gk)
}

/// Same for the velocity modes with `K = ∫∇v_i:∇v_j`.
fn vector_gram(sys: &GalerkinSystem) -> (f64, f64) {
    let pts = sys.grid().points();
    let w = sys.grid().weights();
    let n = sys.n_u();
    let vals: Vec<Vec<([f64; 3], Matrix)>> =
        (0..n).map(|i| pts.iter().map(|x| sys.stokes().eval_mode(i, x)).collect()).collect();
    let ev = sys.stokes().eigenvalues();
    let (mut gm, mut gk): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..=i {
            let (mut m, mut k) = (0.0, 0.0);
            for p in 0..w.len() {
                let (a, b) = (&vals[i][p], &vals[j][p]);
                m += w[p] * (a.0[0] * b.0[0] + a.0[1] * b.0[1] + a.0[2] * b.0[2]);
                k += w[p] * a.1.ddot(&b.1);
            }
            let id = if i == j { 1.0 } else { 0.0 };
            gm = gm.max((m - id).abs());
            gk = gk.max((k - id * ev[i]).abs() / ev[i].max(1.0));
        }
    }
    (gm, gk)
}

fn c5_eigenbasis() -> Outcome {
    let mut gram: f64 = 0.0;
    let mut weak: f64 = 0.0;
    let mut strong: f64 = 0.0;
    let dirs = |sys: &GalerkinSystem| {
        let dd = sys.laplace().directions();
        let mut dev: f64 = 0.0;
        for i in 0..dd.len() {
            for j in 0..dd.len() {
                dev = dev.max((dd[i].ddot(&dd[j]) - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        dev
    };
    let strong_res = |sys: &GalerkinSystem| {
        let mut r: f64 = 0.0;
        for s in sys.laplace().scalars() {
            for x in sys.grid().points() {
                r = r.max((s.laplacian(x) + s.eigenvalue() * s.eval(x).0).abs() / s.eigenvalue().max(1.0));
            }
        }
        r
    };

    let t = system(&torus(), ModelParams::default(), 512, 256, None);
    let (m, k) = scalar_gram(t.laplace().scalars(), &t);
    let (vm, vk) = vector_gram(&t);
    let stokes_strong = t.stokes().eigen_residuals(t.grid()).into_iter().fold(0.0, f64::max);
    gram = gram.max(m).max(vm).max(dirs(&t));
    weak = weak.max(k).max(vk);
    strong = strong.max(strong_res(&t)).max(stokes_strong);

    let sq = square(&["x_low", "x_high"]);
    let r = system(&sq, ModelParams::default(), 512, 40, None);
    let (m, k) = scalar_gram(r.laplace().scalars(), &r);
    let (vm, vk) = vector_gram(&r);
    gram = gram.max(m).max(vm).max(dirs(&r));
    weak = weak.max(k).max(vk);
    strong = strong.max(strong_res(&r));
    let ritz_strong = r.stokes().eigen_residuals(r.grid()).into_iter().fold(0.0, f64::max);

    // lowest mode: eigenvalue 1, proportional to sin x
    let l1 = r.laplace().eigenvalues()[0];
    let s0 = &r.laplace().scalars()[r.laplace().modes()[0].scalar];
    let pts = r.grid().points();
    let c = s0.eval(&pts[0]).0 / pts[0][0].sin();
    let shape = pts.iter().map(|x| (s0.eval(x).0 - c * x[0].sin()).abs()).fold(0.0, f64::max);
    let omega1 = r.stokes().eigenvalues()[0];

    let ok = gram <= 1e-12 && weak <= 1e-10 && strong <= 1e-10 && (l1 - 1.0).abs() <= 1e-12 && shape <= 1e-12;
    outcome(
        ok,
        format!(
            "Gram dev {gram:.2e} <= 1e-12; analytic residual {strong:.2e} and weak residual {weak:.2e} <= 1e-10 \
             (torus 512+256, rectangle 512+40 modes); rectangle lambda_1 = {l1} (sin x shape dev {shape:.1e}); \
             Ritz Stokes omega_1 = {omega1:.9} (strong residual {ritz_strong:.1e}, not analytic)"
        ),
    )
}

fn jitter(traj: &Trajectory, amp: f64, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = traj.clone();
    for s in out.states.iter_mut().skip(1) {
        for v in s.u.iter_mut().chain(s.q.iter_mut()) {
            *v += amp * rng.random_range(-1.0..1.0);
        }
    }
    out
}

fn c6_weak_residuals() -> Outcome {
    let tol = 1e-10;
    let mut worst: f64 = 0.0;
    let mut jitter_min = f64::INFINITY;
    let mut jitter_max: f64 = 0.0;
    let mut all_jitter_fail = true;
    let mut gap: f64 = 0.0;

    let td = BoundaryData {
        dirichlet: vec![FaceData {
            face: Face::parse("x_high").unwrap(),
            terms: vec![(0, Matrix::from_rows(&[&[0.2, 0.1], &[0.1, -0.2]]).unwrap())],
        }],
        neumann: vec![],
    };
    let sq = square(&["x_low", "x_high"]);
    let lift = harmonic_extension(&sq, &td.dirichlet, &[]).unwrap();
    let p = ModelParams { xi: 0.5, ..Default::default() };
    let cases = [system(&torus(), p, 40, 12, None), system(&sq, p, 30, 12, Some(lift))];
    for sys in &cases {
        let init = preset_state(sys, Preset::Random, 0.3, 3).unwrap();
        // the cubic-in-time interpolation error is O(spacing^4); 0.0025 keeps it below 1e-9
        let times: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
        let out = run(sys, &init, &Integrator::Rk45 { tol, max_dt: 0.01 }, 1.0, Some(&times)).unwrap();
        let jit = jitter(&out.trajectory, 1e-3, 9);
        for i in 0..10 {
            let mut cu = vec![0.0; sys.n_u()];
            cu[i] = 1.0;
            let mut cq = vec![0.0; sys.n_q()];
            cq[i] = 1.0;
            let ru = weak_residual_u(sys, &out.trajectory, &cu, 10.0 * tol).unwrap();
            let rq = weak_residual_q(sys, &out.trajectory, &cq, 10.0 * tol).unwrap();
            worst = worst.max(ru.residual).max(rq.residual);
            for ctx in [&ru.context, &rq.context] {
                if let Some(v) = ctx.strip_prefix("unprojected_H_gap=") {
                    gap = gap.max(v.parse().unwrap_or(0.0));
                }
            }
            let ju = weak_residual_u(sys, &jit, &cu, 10.0 * tol).unwrap();
            let jq = weak_residual_q(sys, &jit, &cq, 10.0 * tol).unwrap();
            all_jitter_fail &= !ju.passed && !jq.passed;
            jitter_min = jitter_min.min(ju.residual).min(jq.residual);
            jitter_max = jitter_max.max(ju.residual).max(jq.residual);
        }
    }
    outcome(
        worst <= 10.0 * tol && all_jitter_fail && jitter_max >= 1e-5,
        format!(
            "torus + rectangle, 10 u-tests + 10 Q-tests each: max residual {worst:.2e} <= {:.0e}; \
             jitter 1e-3: all fail, residuals in [{jitter_min:.1e}, {jitter_max:.1e}]; projected-vs-full H gap up to {gap:.1e}",
            10.0 * tol
        ),
    )
}

fn c7_tau1() -> Outcome {
    let sys = system(&torus(), ModelParams { xi: 0.5, ..Default::default() }, 80, 24, None);
    let mut q = vec![0.0; sys.n_q()];
    q[79] = 0.7;
    q[40] = 0.5;
    q[20] = 0.4;
    let mut v = vec![0.0; sys.n_u()];
    v[23] = 1.0;
    v[15] = 0.5;
    v[5] = 0.3;
    let resolved = tau1_weak_identity(&sys, &q, &v, &[24, 24]).unwrap();
    let coarse = tau1_weak_identity(&sys, &q, &v, &[6, 6]).unwrap();
    let fine = tau1_weak_identity(&sys, &q, &v, &[12, 12]).unwrap();
    let ratio = coarse.residual / fine.residual.max(f64::MIN_POSITIVE);
    outcome(
        resolved.residual <= 1e-10 && ratio >= 4.0,
        format!(
            "resolved (24^2) {:.2e} <= 1e-10; under-resolved 6^2 -> 12^2: {:.2e} -> {:.2e} (>= 4x)",
            resolved.residual, coarse.residual, fine.residual
        ),
    )
}

/// Crank–Nicolson value of `h' = −μh + 1`, `h(0) = 0`, after `n` steps of `dt`.
fn cn_value(mu: f64, dt: f64, n: usize) -> f64 {
    if mu == 0.0 {
        return n as f64 * dt;
    }
    let r = (1.0 - 0.5 * mu * dt) / (1.0 + 0.5 * mu * dt);
    (1.0 - r.powi(n as i32)) / mu
}

fn exact_value(mu: f64, t: f64) -> f64 {
    if mu == 0.0 {
        t
    } else {
        -(-mu * t).exp_m1() / mu
    }
}

fn c8_linear_solver() -> Outcome {
    let dt = 1e-3;
    let n = 1000;
    let mut rows = Vec::new();
    let mut pass = true;
    let mut diag = true;
    for (label, geom) in [("torus", torus()), ("rectangle", square(&["x_low", "x_high"]))] {
        let sys = system(&geom, ModelParams::default(), 8, 4, None);
        let lin = Linearization::new(&sys, &vec![0.0; sys.n_q()]).unwrap();
        let p = sys.params();
        for (slot, mu) in
            [(sys.n_u(), p.gamma * p.lambda * sys.laplace().eigenvalues()[0]), (0, 0.5 * sys.stokes().eigenvalues()[0])]
        {
            let mut y = vec![0.0; lin.len()];
            y[slot] = 1.0;
            let x = lin.solve_linear(&RhsPair { dt, values: vec![y; n + 1] }).unwrap();
            let got = x.states[n][slot];
            let others =
                x.states[n].iter().enumerate().filter(|(i, _)| *i != slot).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
            let err = (got - exact_value(mu, 1.0)).abs();
            let predicted = (cn_value(mu, dt, n) - exact_value(mu, 1.0)).abs();
            pass &= err <= 1e-8;
            diag &= (got - cn_value(mu, dt, n)).abs() <= 1e-12 && others <= 1e-12;
            let name = if slot == 0 { "d_1" } else { "h_1" };
            rows.push(format!("{label} {name} (rate {mu:.4}): error {err:.2e}, midpoint truncation {predicted:.2e}"));
        }
    }
    Outcome { passed: pass, summary: format!("{} (tolerance 1e-8)", rows.join("; ")), diagnostic_ok: diag }
}

fn c9_contraction() -> Outcome {
    let p = ModelParams { xi: 0.5, ..Default::default() };
    let sys = system(&torus(), p, 40, 12, None);
    let init = preset_state(&sys, Preset::Random, 0.3, 7).unwrap();
    let x0 = init.to_vec();
    let lin = Linearization::new(&sys, &init.q).unwrap();
    let ts = [0.4, 0.2, 0.1, 0.05];
    let steps = 64;
    let tol = 1e-12;
    let mut picard = Vec::new();
    let mut sampled = Vec::new();
    let mut last = None;
    for &t in &ts {
        let r = lin.picard_solve(&x0, t, steps, tol, 60).unwrap();
        picard.push(r.mean_ratio(1e3 * tol).unwrap());
        sampled.push(lin.contraction_ratio(&x0, t, 32, 1.0, 8, 1).unwrap());
        last = Some(r);
    }
    let r = last.unwrap();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let geometric = r.distances.windows(2).all(|w| w[1] < w[0]);
    let init0 = SimState { t: 0.0, ..init };
    let times: Vec<f64> = r.trajectory.iter().map(|s| s.t).collect();
    let direct = run(&sys, &init0, &Integrator::Rk45 { tol: 1e-12, max_dt: 0.005 }, 0.05, Some(&times)).unwrap();
    let diff = r
        .trajectory
        .iter()
        .zip(&direct.trajectory.states)
        .map(|(a, b)| a.to_vec().iter().zip(b.to_vec()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    outcome(
        decreasing(&picard) && decreasing(&sampled) && picard[3] < 1.0 && geometric && diff <= 1e-6,
        format!(
            "Picard ratios over T = 0.4..0.05: [{}]; sampled Lipschitz ratios (R = 1): [{}]; T = 0.05 converged in {} iterations, \
             distances monotone; fixed point vs rk45 L2 difference {diff:.2e} <= 1e-6",
            fmt(&picard),
            fmt(&sampled),
            r.iterations
        ),
    )
}

fn c10_coercivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let systems: Vec<GalerkinSystem> = [-1.0, 0.0, 0.5, 1.0]
        .iter()
        .map(|&xi| {
            let p = ModelParams { xi, viscosity: Viscosity::Rational { nu0: 1.0, nu1: 0.5 }, ..Default::default() };
            system(&torus(), p, 24, 12, None)
        })
        .collect();
    let mut worst_cross: f64 = 0.0;
    let mut worst_split: f64 = 0.0;
    for k in 0..200 {
        let sys = &systems[k % systems.len()];
        let q0 = random_vec(&mut rng, sys.n_q(), 0.5);
        let lin = Linearization::new(sys, &q0).unwrap();
        let v = random_vec(&mut rng, sys.n_u(), 1.0);
        let pm = random_vec(&mut rng, sys.n_q(), 1.0);
        let c = lin.coercivity_pairing(&v, &pm).unwrap();
        worst_cross = worst_cross.max(c.cross.abs() / c.cross_scale.max(1.0));
        worst_split = worst_split.max((c.pairing - (c.cross - c.remainder)).abs() / c.remainder.abs().max(1.0));
    }
    outcome(
        worst_cross <= 1e-12 && worst_split <= 1e-12,
        format!("200 triples: max |cross|/scale {worst_cross:.2e}, pairing vs (cross - remainder) {worst_split:.2e} <= 1e-12"),
    )
}

fn c11_phase_space() -> Outcome {
    let sq = square(&["x_low", "x_high"]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tol = 1e-10;

    // (1) Q_D = 0, xi = 0, u0 in span, Q0 = span perturbation: Delta Q0 = 0 on Gamma_D
    let sys = system(&sq, ModelParams::default(), 20, 8, None);
    let u0 = random_vec(&mut rng, sys.n_u(), 0.5);
    let q0 = random_vec(&mut rng, sys.n_q(), 0.5);
    let zero = HarmonicExtension::zero(2);
    let ex1 = phase_space_check(&sys, &u0, &zero, &q0, &BoundaryData::default(), tol).unwrap();

    // (2) Q0 = 0 against nonzero Q_D
    let c = Matrix::from_rows(&[&[0.3, 0.1], &[0.1, -0.3]]).unwrap();
    let data = BoundaryData {
        dirichlet: vec![
            FaceData { face: Face::parse("x_low").unwrap(), terms: vec![(0, c)] },
            FaceData { face: Face::parse("x_high").unwrap(), terms: vec![(0, c)] },
        ],
        neumann: vec![],
    };
    let ex2 = phase_space_check(&sys, &u0, &zero, &q0, &data, tol).unwrap();

    // (3) u0 = 0, Q0 = lift (harmonic, exact traces) with L(Q_D) != 0
    let lift = harmonic_extension(&sq, &data.dirichlet, &[]).unwrap();
    let sys3 = system(&sq, ModelParams::default(), 20, 8, Some(lift.clone()));
    let ex3 = phase_space_check(&sys3, &[0.0; 8], &lift, &[0.0; 20], &data, tol).unwrap();
    let ex3_only_rhs = ex3.context.contains("dirichlet_trace=0.000e0") && ex3.context.contains("neumann_trace=0.000e0");

    // same Q_D on the nematic minimum (a < 0, L(Q_D) = 0) is compatible
    let pm = ModelParams { a: -1.0, ..Default::default() };
    let s = (0.5f64).sqrt();
    let cmin = Matrix::from_rows(&[&[s, 0.0], &[0.0, -s]]).unwrap();
    let dmin = BoundaryData {
        dirichlet: vec![
            FaceData { face: Face::parse("x_low").unwrap(), terms: vec![(0, cmin)] },
            FaceData { face: Face::parse("x_high").unwrap(), terms: vec![(0, cmin)] },
        ],
        neumann: vec![],
    };
    let lmin = harmonic_extension(&sq, &dmin.dirichlet, &[]).unwrap();
    let sys4 = system(&sq, pm, 20, 8, Some(lmin.clone()));
    let ex4 = phase_space_check(&sys4, &[0.0; 8], &lmin, &q0, &dmin, tol).unwrap();

    let mismatch_ok = (ex2.residual - c.norm()).abs() <= 1e-12 || ex2.residual >= c.norm();
    outcome(
        ex1.passed && !ex2.passed && mismatch_ok && !ex3.passed && ex3_only_rhs && ex4.passed,
        format!(
            "membership example pass ({:.1e}); trace mismatch fail ({:.3e}, |Q_D| = {:.3e}); harmonic lift with L(Q_D) != 0 fails only the rhs trace ({:.3e}); minimiser data pass ({:.1e})",
            ex1.residual,
            ex2.residual,
            c.norm(),
            ex3.residual,
            ex4.residual
        ),
    )
}

fn c12_determinism() -> Outcome {
    let cfg_text = "seed = 17\nt_end = 0.2\n[geometry]\nmode = \"torus\"\nd = 2\nlengths = [6.283185307179586, 6.283185307179586]\n\
                    [modes]\nn_q = 24\nn_u = 8\n[params]\nxi = 0.5\n[initial]\npreset = \"random\"\namplitude = 0.3\n\
                    [integrator]\nkind = \"midpoint\"\ndt = 0.02\n[output]\nsnapshot_every = 0.05\n";
    let cfg = parse_config(cfg_text).unwrap();
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = cmd_simulate(&cfg, dirs[0].path()).unwrap();
    let b = cmd_simulate(&cfg, dirs[1].path()).unwrap();
    let mut other = cfg.clone();
    other.seed = 18;
    cmd_simulate(&other, dirs[2].path()).unwrap();

    let read = |d: &tempfile::TempDir, name: &str| fs::read(d.path().join(name)).unwrap();
    let mut names = vec!["energy.csv".to_string()];
    names.extend(a.snapshots.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()));
    let identical =
        a.snapshots.len() == b.snapshots.len() && names.iter().all(|n| read(&dirs[0], n) == read(&dirs[1], n));
    let seed_matters = read(&dirs[0], "energy.csv") != read(&dirs[2], "energy.csv");
    let rows = String::from_utf8(read(&dirs[0], "energy.csv")).unwrap().lines().count() - 1;

    let sys = qtensor_cli::commands::build_system(&cfg).unwrap();
    let mut round_trip = true;
    for p in &a.snapshots {
        let bytes = fs::read(p).unwrap();
        let st = parse_snapshot(&bytes).unwrap();
        round_trip &= snapshot_bytes(&sys, &st) == bytes;
    }
    outcome(
        identical && seed_matters && round_trip && rows == a.steps + 1,
        format!(
            "two runs byte-identical over {} files; other seed differs: {seed_matters}; snapshot write/read/write identical: {round_trip}; \
             energy rows {rows} = steps + 1",
            names.len()
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "cancellation identity", c1_cancellation),
        (2, "discrete Lyapunov identity", c2_lyapunov),
        (3, "energy monotonicity", c3_monotonicity),
        (4, "bulk gradient check", c4_bulk_gradient),
        (5, "eigenbasis exactness", c5_eigenbasis),
        (6, "weak-form residuals", c6_weak_residuals),
        (7, "tau1 identity", c7_tau1),
        (8, "linear solver closed forms", c8_linear_solver),
        (9, "contraction behaviour", c9_contraction),
        (10, "coercivity-structure identity", c10_coercivity),
        (11, "phase-space compatibility", c11_phase_space),
        (12, "determinism and round-trip", c12_determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {name}: {} [{secs:.1} s]", o.summary);
        let known = KNOWN_FAILURES.contains(&id);
        if (!o.passed && !known) || !o.diagnostic_ok {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures (known failures: {KNOWN_FAILURES:?})");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
