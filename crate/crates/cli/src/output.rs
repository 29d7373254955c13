//! Energy logs and binary snapshots.
//!
//! A snapshot is a UTF-8 header of `key: value` lines closed by `end-header`,
//! followed by `n_u + n_q` little-endian `f64` values: the velocity
//! coefficients in ascending mode order, then the tensor coefficients.

use std::fs;
use std::io::Write;
use std::path::Path;

use qtensor::sim::{EnergyReport, GalerkinSystem, SimState};

use crate::CliError;

pub const ENERGY_HEADER: &str = "t,kinetic,elastic,bulk,total,diss_visc,diss_H,identity_residual";
const SNAPSHOT_MAGIC: &str = "qtensor-snapshot 1";
const END_HEADER: &str = "end-header\n";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Energy log as CSV text. Floats use the shortest representation that
/// parses back to the same value.
pub fn energy_log(reports: &[EnergyReport]) -> String {
    let mut out = String::from(ENERGY_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.t, r.kinetic, r.elastic, r.bulk, r.total, r.diss_visc, r.diss_h, r.identity_residual
        ));
    }
    out
}

pub fn write_energy_log(reports: &[EnergyReport], path: &Path) -> Result<(), CliError> {
    fs::write(path, energy_log(reports)).map_err(io_err(path))
}

/// Serialises `state` with a header describing `sys`.
pub fn snapshot_bytes(sys: &GalerkinSystem, state: &SimState) -> Vec<u8> {
    let p = sys.params();
    let mut out = Vec::new();
    let header = format!(
        "{SNAPSHOT_MAGIC}\ngeometry: {}\ndim: {}\nn_u: {}\nn_q: {}\nparams: xi={} gamma={} lambda={} a={} b={} c={} viscosity={:?}\nt: {}\nt_bits: {:016x}\norder: velocity ascending, then tensor ascending\n{END_HEADER}",
        sys.geometry().describe(),
        sys.dim(),
        state.u.len(),
        state.q.len(),
        p.xi,
        p.gamma,
        p.lambda,
        p.a,
        p.b,
        p.c,
        p.viscosity,
        state.t,
        state.t.to_bits(),
    );
    out.extend_from_slice(header.as_bytes());
    for v in state.u.iter().chain(&state.q) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_snapshot(sys: &GalerkinSystem, state: &SimState, path: &Path) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&snapshot_bytes(sys, state)).map_err(io_err(path))
}

/// Parses a snapshot; the header is checked only for the fields needed to decode it.
pub fn parse_snapshot(bytes: &[u8]) -> Result<SimState, CliError> {
    let bad = |m: &str| CliError::Snapshot(m.to_string());
    let end = bytes
        .windows(END_HEADER.len())
        .position(|w| w == END_HEADER.as_bytes())
        .ok_or_else(|| bad("missing end-header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some(SNAPSHOT_MAGIC) {
        return Err(bad("not a qtensor snapshot"));
    }
    let (mut n_u, mut n_q, mut t) = (None, None, None);
    for line in lines {
        if let Some((k, v)) = line.split_once(": ") {
            match k {
                "n_u" => n_u = v.parse::<usize>().ok(),
                "n_q" => n_q = v.parse::<usize>().ok(),
                "t_bits" => t = u64::from_str_radix(v, 16).ok().map(f64::from_bits),
                _ => {}
            }
        }
    }
    let (n_u, n_q, t) = match (n_u, n_q, t) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(bad("header lacks n_u, n_q or t_bits")),
    };
    let payload = &bytes[end + END_HEADER.len()..];
    if payload.len() != 8 * (n_u + n_q) {
        return Err(bad(&format!("payload has {} bytes, expected {}", payload.len(), 8 * (n_u + n_q))));
    }
    let vals: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(SimState { t, u: vals[..n_u].to_vec(), q: vals[n_u..].to_vec() })
}

pub fn read_snapshot(path: &Path) -> Result<SimState, CliError> {
    parse_snapshot(&fs::read(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qtensor::basis::Geometry;
    use qtensor::sim::Discretization;
    use qtensor::tensor::ModelParams;

    fn sys() -> GalerkinSystem {
        let g = Geometry::torus(&[1.0, 2.0]).unwrap();
        GalerkinSystem::new(&g, &ModelParams::default(), &Discretization { n_q: 6, n_u: 4, grid: None }, None).unwrap()
    }

    #[test]
    fn zero_snapshot_payload() {
        let s = sys();
        let bytes = snapshot_bytes(&s, &SimState::zeros(0.0, 4, 6));
        let end = bytes.windows(END_HEADER.len()).position(|w| w == END_HEADER.as_bytes()).unwrap();
        let payload = &bytes[end + END_HEADER.len()..];
        assert_eq!(payload.len(), 8 * 10);
        assert!(payload.iter().all(|b| *b == 0));
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let s = sys();
        let st = SimState {
            t: 0.1 + 0.2,
            u: vec![1.0 / 3.0, -0.0, 1e-300, f64::MAX],
            q: (0..6).map(|i| (i as f64).sin()).collect(),
        };
        let back = parse_snapshot(&snapshot_bytes(&s, &st)).unwrap();
        assert_eq!(back.t.to_bits(), st.t.to_bits());
        assert!(back.u.iter().chain(&back.q).zip(st.u.iter().chain(&st.q)).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let s = sys();
        let mut bytes = snapshot_bytes(&s, &SimState::zeros(0.0, 4, 6));
        bytes.pop();
        assert!(parse_snapshot(&bytes).is_err());
    }

    #[test]
    fn energy_log_floats_round_trip() {
        let r = EnergyReport { t: 0.1, total: 1.0 / 3.0, ..Default::default() };
        let text = energy_log(&[r]);
        let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[4].to_bits(), (1.0f64 / 3.0).to_bits());
    }
}
