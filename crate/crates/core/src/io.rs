//! On-disk formats: scattering cache, flow history, CSV series, snapshot
//! dumps and the plotting stub.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticProfile;
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::numerics::SpectralGrid;
use crate::pde::{Conserved, PdeState};
use crate::scattering::ReflectionCoefficient;

pub const CACHE_VERSION: u32 = 1;

/// Shortest form carrying 17 significant digits, enough to reload any f64
/// bit for bit.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCache {
    pub version: u32,
    /// Free-form description of the datum the coefficient came from.
    pub source: String,
    pub t: f64,
    pub grid: SpectralGrid,
    pub r: Vec<Complex64>,
    pub rho: f64,
    pub h1_norm: f64,
    pub h12_norm: f64,
    pub unitarity_max: Option<f64>,
}

impl ScatteringCache {
    pub fn new(source: &str, t: f64, r: &ReflectionCoefficient, unitarity_max: Option<f64>) -> Self {
        Self {
            version: CACHE_VERSION,
            source: source.into(),
            t,
            grid: r.grid,
            r: r.samples.clone(),
            rho: r.rho,
            h1_norm: r.h1_norm.value,
            h12_norm: r.h12_norm.value,
            unitarity_max,
        }
    }

    pub fn coefficient(&self) -> Result<ReflectionCoefficient> {
        ReflectionCoefficient::from_samples(self.grid, self.r.clone())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(format_err)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let cache: Self = serde_json::from_str(&fs::read_to_string(path)?).map_err(format_err)?;
        if cache.version != CACHE_VERSION {
            return Err(Error::Format(format!("cache version {} (expected {CACHE_VERSION})", cache.version)));
        }
        Ok(cache)
    }
}

/// One JSON object per accepted flow state.
pub fn write_flow_history(path: &Path, history: &[FlowState]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for s in history {
        serde_json::to_writer(&mut out, s).map_err(format_err)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_flow_history(path: &Path) -> Result<Vec<FlowState>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(format_err)?);
        }
    }
    Ok(out)
}

/// Header plus rows, every float at full precision.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Numeric CSV back into its header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty csv".into()))?.split(',').map(String::from).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.parse::<f64>().map_err(format_err)).collect())
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

pub const ASYMPTOTICS_HEADER: [&str; 5] = ["x", "t", "region", "u_asymptotic", "error_budget_exponent"];

pub fn write_asymptotics_csv(path: &Path, profiles: &[AsymptoticProfile]) -> Result<()> {
    let mut text = ASYMPTOTICS_HEADER.join(",");
    text.push('\n');
    for p in profiles {
        writeln!(
            text,
            "{},{},{},{},{}",
            fmt_f64(p.x),
            fmt_f64(p.t),
            p.region.label.name(),
            fmt_f64(p.u_asymptotic),
            fmt_f64(p.error_budget_exponent)
        )
        .expect("writing to a String cannot fail");
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
    pub conserved: Conserved,
    pub sup_norm: f64,
    pub boundary_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub version: u32,
    pub times: Vec<f64>,
    pub snapshots: Vec<SnapshotEntry>,
    /// Run-level diagnostics, such as conservation drift or the step size.
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
}

/// One `{x,u}` CSV per state plus `manifest.json`, all under `dir`.
pub fn write_snapshots(dir: &Path, states: &[PdeState], diagnostics: serde_json::Map<String, serde_json::Value>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let file = format!("snapshot_{i:04}.csv");
        let rows: Vec<Vec<f64>> = s.grid.points().into_iter().zip(&s.u).map(|(x, &u)| vec![x, u]).collect();
        write_csv(&dir.join(&file), &["x", "u"], &rows)?;
        entries.push(SnapshotEntry { t: s.t, file, conserved: s.conserved, sup_norm: s.sup_norm(), boundary_level: s.boundary_level });
    }
    let manifest = SnapshotManifest { version: CACHE_VERSION, times: states.iter().map(|s| s.t).collect(), snapshots: entries, diagnostics };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(format_err)?)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<SnapshotManifest> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(format_err)
}

/// Any serialisable report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value).map_err(format_err)?)?;
    Ok(())
}

const PLOT_STUB: &str = r#"#!/usr/bin/env python3
# Plots the CSV series written next to this file. Needs matplotlib.
import csv, glob, json, os, sys

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(path):
    with open(path) as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


for path in sorted(glob.glob(os.path.join(here, "**", "*.csv"), recursive=True)):
    header, rows = read(path)
    if not rows or "region" in header:
        continue
    cols = list(zip(*[[float(c) for c in r] for r in rows]))
    fig, ax = plt.subplots()
    for name, col in zip(header[1:], cols[1:]):
        ax.plot(cols[0], col, label=name)
    if header[0] == "t":
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(header[0])
    ax.legend()
    fig.savefig(path[:-4] + ".png", dpi=120)
    plt.close(fig)

for path in glob.glob(os.path.join(here, "**", "*report*.json"), recursive=True):
    with open(path) as f:
        print(path, json.load(f).get("verdict"))
"#;

pub fn write_plot_stub(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("plot.py");
    fs::write(&path, PLOT_STUB)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::UniformGrid;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("mkdv-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn seventeen_digits_reload_exactly() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn cache_round_trip_and_version_check() {
        let g = UniformGrid::new(4.0, 16).unwrap();
        let s: Vec<Complex64> = g.points().iter().map(|&z| Complex64::new((-z * z).exp() / 3.0, z / 7.0 * (-z * z).exp())).collect();
        let r = ReflectionCoefficient::from_samples(g, s).unwrap();
        let c = ScatteringCache::new("test", 0.0, &r, Some(1e-12));
        let p = tmp("cache").join("r.json");
        c.write(&p).unwrap();
        let back = ScatteringCache::read(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.coefficient().unwrap().samples, r.samples);
        let bumped = fs::read_to_string(&p).unwrap().replace("\"version\": 1", "\"version\": 99");
        fs::write(&p, bumped).unwrap();
        assert!(ScatteringCache::read(&p).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = tmp("csv").join("a.csv");
        let rows = vec![vec![1.0 / 3.0, -0.0], vec![1e-310, 2.0f64.sqrt()]];
        write_csv(&p, &["a", "b"], &rows).unwrap();
        let (h, back) = read_csv(&p).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        for (r, b) in rows.iter().zip(&back) {
            for (x, y) in r.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
