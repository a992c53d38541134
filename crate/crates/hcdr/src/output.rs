//! CSV traces, JSON summaries and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use hcdr_core::redundancy::{PlanResult, PlanRow};
use hcdr_core::sim::SimTrace;
use hcdr_core::{Method, QVec, Vec3, ACTUATED, PENDULUMS, UNACTUATED};
use nalgebra::Vector4;
use serde::Serialize;

/// Plan CSV columns, in order.
pub const PLAN_COLUMNS: [&str; 24] = [
    "time",
    "q_pmx",
    "q_pmy",
    "q_theta_a1",
    "q_theta_a2",
    "q_theta_a3",
    "qd_pmx",
    "qd_pmy",
    "qd_theta_a1",
    "qd_theta_a2",
    "qd_theta_a3",
    "q_pmz",
    "q_alpha",
    "q_beta",
    "qd_pmz",
    "qd_alpha",
    "qd_beta",
    "theta_p1",
    "theta_p2",
    "pe_x",
    "pe_y",
    "pe_z",
    "residual",
    "cost",
];

/// Coordinate names in q order.
pub const COORDINATES: [&str; 11] = [
    "pmx", "pmy", "pmz", "alpha", "beta", "gamma", "theta_p1", "theta_p2", "theta_a1", "theta_a2", "theta_a3",
];

/// Fixed-point text with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (11 - exponent).clamp(0, 40) as usize;
    format!("{v:.decimals$}")
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt12(v)))?;
    }
    w.flush()
}

fn plan_record(r: &PlanRow) -> Vec<f64> {
    let mut v = vec![r.time];
    v.extend(r.q_a().iter());
    v.extend(r.qd_a().iter());
    v.extend(r.q_u().iter());
    v.extend(r.qd_u().iter());
    v.extend(r.pendulum_angles());
    v.extend(r.end_effector.iter());
    v.push(r.residual);
    v.push(r.cost);
    v
}

pub fn write_plan_csv(path: &Path, plan: &PlanResult) -> std::io::Result<()> {
    let header: Vec<String> = PLAN_COLUMNS.iter().map(|s| s.to_string()).collect();
    write_csv(path, &header, plan.rows.iter().map(plan_record))
}

#[derive(Debug, thiserror::Error)]
pub enum PlanReadError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: header does not match the plan columns")]
    Header { path: String },
    #[error("{path}: row {row}: {message}")]
    Row { path: String, row: usize, message: String },
}

/// Read a plan written by [`write_plan_csv`]. Pendulum rates are
/// rebuilt by backward differences; diagnostic fields the file does not
/// carry are left at zero.
pub fn read_plan_csv(path: &Path, method: Method, sample_time: f64) -> Result<PlanResult, PlanReadError> {
    let name = path.display().to_string();
    let csv_err = |source| PlanReadError::Csv {
        path: name.clone(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(PLAN_COLUMNS.iter().copied()) {
        return Err(PlanReadError::Header { path: name });
    }
    let mut rows: Vec<PlanRow> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| PlanReadError::Row {
                path: name.clone(),
                row: i + 1,
                message: e.to_string(),
            })?;
        let mut q = QVec::zeros();
        let mut qd = QVec::zeros();
        for (k, &c) in ACTUATED.iter().enumerate() {
            q[c] = vals[1 + k];
            qd[c] = vals[6 + k];
        }
        for (k, &c) in UNACTUATED.iter().enumerate() {
            q[c] = vals[11 + k];
            qd[c] = vals[14 + k];
        }
        for (k, &c) in PENDULUMS.iter().enumerate() {
            q[c] = vals[17 + k];
            qd[c] = match rows.last() {
                Some(prev) => (q[c] - prev.q[c]) / sample_time,
                None => 0.0,
            };
        }
        let end_effector = Vec3::new(vals[19], vals[20], vals[21]);
        rows.push(PlanRow {
            time: vals[0],
            q,
            qd,
            end_effector,
            reference: end_effector,
            command_velocity: Vec3::zeros(),
            residual: vals[22],
            cost: vals[23],
            actuated_cost: 0.0,
            clamped: false,
            rank: 3,
            tensions: Vector4::zeros(),
            pendulum_residual: 0.0,
            pendulum_converged: true,
        });
    }
    Ok(PlanResult {
        method,
        sample_time,
        rows,
    })
}

pub fn sim_columns() -> Vec<String> {
    let mut h = vec!["time".to_string()];
    h.extend(COORDINATES.iter().map(|c| format!("q_{c}")));
    h.extend(COORDINATES.iter().map(|c| format!("qd_{c}")));
    h.extend(
        [
            "u_dT3", "u_dT4", "u_tau_p1", "u_tau_p2", "u_tau_a1", "u_tau_a2", "u_tau_a3",
        ]
        .map(String::from),
    );
    h.extend(["T_upper_right", "T_upper_left", "T_lower_right", "T_lower_left"].map(String::from));
    h.extend(["pe_x", "pe_y", "pe_z", "ref_x", "ref_y", "ref_z", "energy"].map(String::from));
    h
}

pub fn write_sim_csv(path: &Path, tr: &SimTrace) -> std::io::Result<()> {
    let rows = (0..tr.len()).map(|i| {
        let mut v = vec![tr.time[i]];
        v.extend(tr.q[i].iter());
        v.extend(tr.qd[i].iter());
        v.extend(tr.u[i].iter());
        v.extend(tr.tensions[i].iter());
        v.extend(tr.end_effector[i].iter());
        v.extend(tr.reference[i].iter());
        v.push(tr.energy[i]);
        v
    });
    write_csv(path, &sim_columns(), rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub scenario: String,
    pub method: String,
    pub control: bool,
    pub samples: usize,
    /// Componentwise maximum of |p_e - reference| (m).
    pub max_error: [f64; 3],
    /// Largest |qd_U|_inf after the last plant disturbance ends.
    pub post_pulse_unactuated_peak: f64,
    /// |qd_U|_2 at the final sample.
    pub final_unactuated_norm: f64,
    pub pulse_end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command_line: Vec<String>,
    pub params_sha256: String,
    pub scenario_sha256: String,
    pub version: String,
    pub wall_clock_s: f64,
    pub phases_s: BTreeMap<String, f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)
}
