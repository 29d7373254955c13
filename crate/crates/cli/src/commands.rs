use std::fs;
use std::path::{Path, PathBuf};

use qtensor::basis::HarmonicExtension;
use qtensor::linearized::Linearization;
use qtensor::sim::{preset_state, run, GalerkinSystem, Integrator, SimState};
use qtensor::verification::{
    energy_inequality_check, gradient_check_bulk, phase_space_check, tau1_weak_identity, weak_residual_q,
    weak_residual_u, CheckReport,
};

use crate::config::SimConfig;
use crate::output::{read_snapshot, write_energy_log, write_snapshot};
use crate::{CliError, OUT_DIR_ENV};

/// `--out` wins over the environment, which wins over the config file.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &SimConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.dir.clone(),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// The Galerkin system described by `cfg`.
pub fn build_system(cfg: &SimConfig) -> Result<GalerkinSystem, CliError> {
    let lift = cfg.lift()?;
    Ok(GalerkinSystem::new(&cfg.geometry()?, &cfg.model_params()?, &cfg.discretization(), lift)?)
}

/// Initial state from the snapshot, or from the preset with the config seed.
pub fn initial_state(cfg: &SimConfig, sys: &GalerkinSystem) -> Result<SimState, CliError> {
    if let Some(path) = &cfg.initial.snapshot {
        let s = read_snapshot(path)?;
        if s.u.len() != sys.n_u() || s.q.len() != sys.n_q() {
            return Err(CliError::Snapshot(format!(
                "{} holds {}+{} coefficients, the configuration needs {}+{}",
                path.display(),
                s.u.len(),
                s.q.len(),
                sys.n_u(),
                sys.n_q()
            )));
        }
        return Ok(s);
    }
    Ok(preset_state(sys, cfg.preset()?, cfg.initial.amplitude, cfg.seed)?)
}

/// Result of `simulate`.
#[derive(Clone, Debug)]
pub struct SimulateSummary {
    pub steps: usize,
    pub rejected: usize,
    pub snapshots: Vec<PathBuf>,
    pub energy_log: PathBuf,
    pub identity_residual: f64,
}

/// Runs the configured simulation, writing `energy.csv` (one row per accepted
/// step plus the initial state) and `snapshot_NNNNN.bin` files.
pub fn cmd_simulate(cfg: &SimConfig, out: &Path) -> Result<SimulateSummary, CliError> {
    let data = cfg.boundary_data()?;
    if !data.is_homogeneous_neumann() {
        return Err(CliError::Validation {
            key: "boundary.neumann".into(),
            reason: "nonzero Neumann data is only checked by `verify`; the simulation uses zero normal derivative"
                .into(),
        });
    }
    let sys = build_system(cfg)?;
    let init = initial_state(cfg, &sys)?;
    let t_end = init.t + cfg.t_end;
    let mut times = vec![init.t];
    if let Some(every) = cfg.output.snapshot_every {
        let mut k = 1;
        while init.t + k as f64 * every < t_end {
            times.push(init.t + k as f64 * every);
            k += 1;
        }
    }
    if t_end > init.t {
        times.push(t_end);
    }
    let res = run(&sys, &init, &cfg.integrator()?, t_end, Some(&times))?;
    ensure_dir(out)?;
    let energy_log = out.join("energy.csv");
    write_energy_log(&res.reports, &energy_log)?;
    let mut snapshots = Vec::new();
    for (i, s) in res.trajectory.states.iter().enumerate() {
        let p = out.join(format!("snapshot_{i:05}.bin"));
        write_snapshot(&sys, s, &p)?;
        snapshots.push(p);
    }
    Ok(SimulateSummary {
        steps: res.steps,
        rejected: res.rejected,
        snapshots,
        energy_log,
        identity_residual: res.cumulative_identity_residual(),
    })
}

/// Runs the configured simulation and every applicable check, writing one
/// line per check to `verify.txt`.
pub fn cmd_verify(cfg: &SimConfig, out: &Path) -> Result<Vec<CheckReport>, CliError> {
    let sys = build_system(cfg)?;
    let init = initial_state(cfg, &sys)?;
    let mut reports = Vec::new();

    let t0 = init.t;
    let t_end = t0 + cfg.t_end;
    if t_end > t0 {
        let n = (cfg.t_end / cfg.verify.output_dt).ceil().max(1.0) as usize;
        let times: Vec<f64> = (0..=n).map(|k| t0 + cfg.t_end * k as f64 / n as f64).collect();
        let res = run(&sys, &init, &cfg.integrator()?, t_end, Some(&times))?;
        let e0 = res.reports[0].total;
        reports.push(energy_inequality_check(&res.reports, cfg.verify.energy_slack * (1.0 + e0.abs())));
        let mut traj = res.trajectory;
        // weak forms are posed on [0, T]
        traj.states.iter_mut().for_each(|s| s.t -= t0);
        for i in 0..cfg.verify.tests.min(sys.n_u()) {
            let mut c = vec![0.0; sys.n_u()];
            c[i] = 1.0;
            let mut r = weak_residual_u(&sys, &traj, &c, cfg.verify.weak_tolerance)?;
            r.name = format!("weak_residual_u[{i}]");
            reports.push(r);
        }
        for i in 0..cfg.verify.tests.min(sys.n_q()) {
            let mut c = vec![0.0; sys.n_q()];
            c[i] = 1.0;
            let mut r = weak_residual_q(&sys, &traj, &c, cfg.verify.weak_tolerance)?;
            r.name = format!("weak_residual_q[{i}]");
            reports.push(r);
        }
    }

    let samples: Vec<_> = sys.tensor_field(&init.q)?.values.into_iter().take(100).collect();
    reports.push(gradient_check_bulk(&samples, sys.params(), 1e-5)?);

    if sys.geometry().is_periodic() {
        let shape: Vec<usize> = sys.grid().shape().iter().map(|n| 2 * n).collect();
        reports.push(tau1_weak_identity(&sys, &init.q, &init.u, &shape)?);
    } else {
        let lift = cfg.lift()?.unwrap_or_else(|| HarmonicExtension::zero(sys.dim()));
        reports.push(phase_space_check(
            &sys,
            &init.u,
            &lift,
            &init.q,
            &cfg.boundary_data()?,
            cfg.verify.phase_tolerance,
        )?);
    }

    ensure_dir(out)?;
    let text: String = reports.iter().map(|r| format!("{r}\n")).collect();
    write_text(&out.join("verify.txt"), &text)?;
    Ok(reports)
}

/// Writes `eigen.csv` with one row per mode of both bases.
pub fn cmd_eigen(cfg: &SimConfig, out: &Path) -> Result<PathBuf, CliError> {
    let sys = build_system(cfg)?;
    let mut text = String::from("operator,index,eigenvalue,mode\n");
    for (i, ev) in sys.laplace().eigenvalues().iter().enumerate() {
        text.push_str(&format!("laplace,{i},{ev},\"{}\"\n", sys.laplace().describe_mode(i)));
    }
    for (i, ev) in sys.stokes().eigenvalues().iter().enumerate() {
        text.push_str(&format!("stokes,{i},{ev},\"{}\"\n", sys.stokes().describe_mode(i)));
    }
    ensure_dir(out)?;
    let path = out.join("eigen.csv");
    write_text(&path, &text)?;
    Ok(path)
}

/// Result of `linearize`.
#[derive(Clone, Debug)]
pub struct LinearizeSummary {
    pub iterations: usize,
    pub distances: Vec<f64>,
    /// Largest coefficient-space L² distance between the fixed point and an rk45 run.
    pub direct_difference: f64,
}

/// Picard iteration on `[0, linearize.t_end]` from the initial state, checked
/// against a tight rk45 run. Writes `picard.csv` and `linearize.txt`.
pub fn cmd_linearize(cfg: &SimConfig, out: &Path) -> Result<LinearizeSummary, CliError> {
    let sys = build_system(cfg)?;
    let mut init = initial_state(cfg, &sys)?;
    init.t = 0.0;
    let lc = &cfg.linearize;
    let lin = Linearization::new(&sys, &init.q)?;
    let pr = lin.picard_solve(&init.to_vec(), lc.t_end, lc.steps, lc.tol, lc.max_iter)?;
    let times: Vec<f64> = pr.trajectory.iter().map(|s| s.t).collect();
    let direct = run(&sys, &init, &Integrator::Rk45 { tol: 1e-12, max_dt: lc.t_end / 8.0 }, lc.t_end, Some(&times))?;
    let direct_difference = pr
        .trajectory
        .iter()
        .zip(&direct.trajectory.states)
        .map(|(a, b)| a.to_vec().iter().zip(b.to_vec()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    ensure_dir(out)?;
    let mut csv = String::from("iteration,distance\n");
    for (k, d) in pr.distances.iter().enumerate() {
        csv.push_str(&format!("{},{d}\n", k + 1));
    }
    write_text(&out.join("picard.csv"), &csv)?;
    write_text(
        &out.join("linearize.txt"),
        &format!(
            "T={} steps={} iterations={} final_distance={:e} direct_l2_difference={:e}\n",
            lc.t_end,
            lc.steps,
            pr.iterations,
            pr.distances.last().copied().unwrap_or(0.0),
            direct_difference
        ),
    )?;
    Ok(LinearizeSummary { iterations: pr.iterations, distances: pr.distances, direct_difference })
}

/// One row of the contraction scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionRow {
    pub t: f64,
    /// Sampled Lipschitz ratio of `ℒ⁻¹𝒩₀` on the ball of radius `R`.
    pub ratio: f64,
    /// Geometric mean of successive Picard distance ratios (NaN if Picard fails).
    pub picard_ratio: f64,
}

/// Scans `contraction.t_values`, writing `contraction.csv`.
pub fn cmd_contraction(cfg: &SimConfig, out: &Path) -> Result<Vec<ContractionRow>, CliError> {
    let sys = build_system(cfg)?;
    let mut init = initial_state(cfg, &sys)?;
    init.t = 0.0;
    let x0 = init.to_vec();
    let lin = Linearization::new(&sys, &init.q)?;
    let cc = &cfg.contraction;
    let mut rows = Vec::new();
    for &t in &cc.t_values {
        let ratio = lin.contraction_ratio(&x0, t, cc.steps, cc.radius, cc.pairs, cfg.seed)?;
        let picard_ratio = match lin.picard_solve(&x0, t, cc.steps, cfg.linearize.tol, cfg.linearize.max_iter) {
            Ok(r) => r.mean_ratio(1e3 * cfg.linearize.tol).unwrap_or(0.0),
            Err(qtensor::Error::NonContraction { .. }) | Err(qtensor::Error::NonConvergence { .. }) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        rows.push(ContractionRow { t, ratio, picard_ratio });
    }
    ensure_dir(out)?;
    let mut csv = String::from("T,ratio,picard_ratio\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.t, r.ratio, r.picard_ratio));
    }
    write_text(&out.join("contraction.csv"), &csv)?;
    Ok(rows)
}
