//! CSV and JSON writers.

use anyhow::{Context, Result};
use pairdisp_core::control::ControlledTrajectory;
use pairdisp_core::integrator::{ReflectedPath, System};
use serde::Serialize;
use std::fs;
use std::path::Path;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Writes a header and rows of numbers. Floats use the shortest round-trip form.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, x|u, y|v, z, k`.
pub fn write_path(path: &Path, p: &ReflectedPath) -> Result<()> {
    let header: [&str; 5] = match p.system {
        System::Xyz => ["t", "x", "y", "z", "k"],
        System::Uvz => ["t", "u", "v", "z", "k"],
        System::Aux => ["t", "U", "V", "Z", "k"],
        System::Eta => ["t", "eta", "unused", "unused", "k"],
    };
    let rows = (0..p.times.len()).map(|i| {
        let s = p.states[i];
        vec![p.times[i], s[0], s[1], s[2], p.k[i]]
    });
    write_csv(path, &header, rows)
}

/// Columns `t, x, y, z, k, U1, U2`.
pub fn write_controlled(path: &Path, tr: &ControlledTrajectory) -> Result<()> {
    let rows = (0..tr.times.len()).map(|i| vec![tr.times[i], tr.x[i], tr.y[i], tr.z[i], tr.k[i], tr.u1[i], tr.u2[i]]);
    write_csv(path, &["t", "x", "y", "z", "k", "U1", "U2"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("pairdisp-io-{}", std::process::id()));
        let p = dir.join("a.csv");
        write_csv(&p, &["a", "b"], vec![vec![0.1, 1e-300], vec![-2.5, f64::INFINITY]]).unwrap();
        let mut r = csv::Reader::from_path(&p).unwrap();
        let rows: Vec<Vec<f64>> =
            r.records().map(|x| x.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows, vec![vec![0.1, 1e-300], vec![-2.5, f64::INFINITY]]);
        fs::remove_dir_all(dir).unwrap();
    }
}
