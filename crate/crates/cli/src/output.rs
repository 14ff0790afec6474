//! CSV and JSON writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fracosc::dde::{OscillationClass, Trajectory};
use serde::Serialize;

/// Writes `t,u,v,w` with 17 significant digits.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["t", "u", "v", "w"])?;
    for (t, y) in traj.times().iter().zip(traj.states()) {
        w.write_record([t, &y[0], &y[1], &y[2]].map(|x| format!("{x:.16e}")))?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()
}

#[derive(Serialize)]
pub struct SimulationSummary {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub clamp_activations: usize,
    pub truncated_at: Option<f64>,
    pub classification: Option<OscillationClass>,
}

impl SimulationSummary {
    pub fn new(traj: &Trajectory, classification: Option<OscillationClass>) -> Self {
        SimulationSummary {
            t0: traj.t0(),
            t_end: traj.t_end(),
            dt: traj.step(),
            steps: traj.times().len().saturating_sub(1),
            clamp_activations: traj.clamp_activations(),
            truncated_at: traj.truncated(),
            classification,
        }
    }
}
