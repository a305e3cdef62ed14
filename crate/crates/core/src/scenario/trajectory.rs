//! Per-step simulation log and its CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First line of every trajectory file; bump on any column change.
pub const CSV_SCHEMA: &str = "# polycbf trajectory v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub time: f64,
    pub state: Vec<f64>,
    pub nominal: Vec<f64>,
    pub filtered: Vec<f64>,
    pub h_hat: f64,
    pub h_a: f64,
    pub h_s: f64,
    /// Constraint slack per agent; NaN when no filter runs.
    pub eta: Vec<f64>,
    pub active: Vec<bool>,
    pub baseline_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub agents: usize,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn new(state_labels: &[&str], input_labels: &[&str], agents: usize) -> Self {
        Self {
            state_labels: state_labels.iter().map(|s| s.to_string()).collect(),
            input_labels: input_labels.iter().map(|s| s.to_string()).collect(),
            agents,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        h.extend(self.state_labels.iter().cloned());
        h.extend(self.input_labels.iter().map(|l| format!("u0_{l}")));
        h.extend(self.input_labels.iter().map(|l| format!("u_{l}")));
        h.extend(["h_hat", "h_a", "h_s"].map(String::from));
        h.extend((0..self.agents).map(|k| format!("eta_{k}")));
        h.extend((0..self.agents).map(|k| format!("active_{k}")));
        h.push("baseline_failure".into());
        h
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut out = out;
        writeln!(out, "{CSV_SCHEMA}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(csv_error)?;
        for s in &self.steps {
            let mut row = vec![s.time.to_string()];
            row.extend(s.state.iter().map(f64::to_string));
            row.extend(s.nominal.iter().map(f64::to_string));
            row.extend(s.filtered.iter().map(f64::to_string));
            row.extend([s.h_hat, s.h_a, s.h_s].map(|v| v.to_string()));
            row.extend(s.eta.iter().map(f64::to_string));
            row.extend(s.active.iter().map(|&a| u8::from(a).to_string()));
            row.push(u8::from(s.baseline_failure).to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut input = std::io::BufReader::new(input);
        let mut first = String::new();
        std::io::BufRead::read_line(&mut input, &mut first)?;
        if first.trim_end() != CSV_SCHEMA {
            return Err(Error::Config(format!("unrecognized trajectory schema line {:?}", first.trim_end())));
        }
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
        let first_input = header.iter().position(|h| h.starts_with("u0_")).unwrap_or(header.len());
        let state_labels: Vec<&str> = header[1..first_input].iter().map(String::as_str).collect();
        let input_labels: Vec<&str> = header
            .iter()
            .filter_map(|h| h.strip_prefix("u0_"))
            .collect();
        let agents = header.iter().filter(|h| h.starts_with("eta_")).count();
        let mut traj = Trajectory::new(&state_labels, &input_labels, agents);
        if traj.header() != header {
            return Err(Error::Config("trajectory header does not follow the v1 column layout".into()));
        }
        let (ns, ni) = (state_labels.len(), input_labels.len());
        for record in r.records() {
            let record = record.map_err(csv_error)?;
            let values = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Config(format!("bad number {f:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            let mut at = 0;
            let mut take = |n: usize| {
                let slice = values[at..at + n].to_vec();
                at += n;
                slice
            };
            let time = take(1)[0];
            let state = take(ns);
            let nominal = take(ni);
            let filtered = take(ni);
            let h = take(3);
            let eta = take(agents);
            let active = take(agents).into_iter().map(|v| v != 0.0).collect();
            let baseline_failure = take(1)[0] != 0.0;
            traj.steps.push(TrajectoryStep {
                time,
                state,
                nominal,
                filtered,
                h_hat: h[0],
                h_a: h[1],
                h_s: h[2],
                eta,
                active,
                baseline_failure,
            });
        }
        Ok(traj)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path.as_ref())?)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Trajectory::new(&["x", "y"], &["v"], 1);
        for k in 0..3 {
            t.steps.push(TrajectoryStep {
                time: k as f64 * 0.1,
                state: vec![1.0 / 3.0, -2e-300],
                nominal: vec![0.1 + 0.2],
                filtered: vec![std::f64::consts::PI],
                h_hat: -0.0,
                h_a: 1e300,
                h_s: 5.0,
                eta: vec![f64::NAN],
                active: vec![k == 1],
                baseline_failure: k == 2,
            });
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.state_labels, t.state_labels);
        for (a, b) in back.steps.iter().zip(&t.steps) {
            assert_eq!(a.state, b.state);
            assert_eq!(a.time.to_bits(), b.time.to_bits());
            assert_eq!(a.h_hat.to_bits(), b.h_hat.to_bits());
            assert!(a.eta[0].is_nan());
            assert_eq!(a.active, b.active);
            assert_eq!(a.baseline_failure, b.baseline_failure);
        }
    }

    #[test]
    fn rejects_unknown_schema() {
        assert!(Trajectory::read_csv("time\n0\n".as_bytes()).is_err());
    }
}
