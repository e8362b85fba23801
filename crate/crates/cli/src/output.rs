//! Output files with reproducibility headers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use srd_core::ensemble::{DependenceRow, EnsembleStats, TailRow};
use srd_core::gronwall::MatrixRow;
use srd_core::solver::Trajectory;

/// Provenance carried by every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(command: &str, seed: u64, config_sha256: String) -> Self {
        Self {
            tool: "srd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_sha256,
        }
    }

    pub fn csv_header(&self) -> String {
        format!(
            "# tool={} version={} command={} seed={} config_sha256={}\n",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }
}

/// Writes `# meta` plus a header row and data rows.
pub fn write_csv(path: &Path, meta: &Meta, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(meta.csv_header().as_bytes())?;
    writeln!(f, "{}", columns.join(","))?;
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    meta: &'a Meta,
    result: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, result: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(&Wrapped { meta, result })?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn json_string<T: Serialize>(meta: &Meta, result: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Wrapped { meta, result })?)
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Reads the data rows of a CSV written by [`write_csv`].
pub fn data_rows(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().filter(|l| !l.starts_with('#')).skip(1).map(String::from).collect())
}

/// Columns `t, lzeta_i, diss_i, mass_i, min_i`; one row per record.
pub fn energy_csv(path: &Path, meta: &Meta, traj: &Trajectory) -> Result<()> {
    let ell = traj.min_value_per_component.len();
    let mut cols = vec!["t".to_string()];
    for prefix in ["lzeta", "diss", "mass", "min"] {
        cols.extend((0..ell).map(|i| format!("{prefix}_{i}")));
    }
    let rows: Vec<Vec<String>> = traj
        .diagnostics
        .iter()
        .map(|r| {
            let mut row = vec![num(r.time)];
            for v in [&r.lzeta_per_component, &r.dissipation_cum, &r.mass, &r.min_per_component] {
                row.extend(v.iter().map(|x| num(*x)));
            }
            row
        })
        .collect();
    write_csv(path, meta, &cols, &rows)
}

/// Long-format `(t, x, value)` raster of one component of a 1d trajectory.
pub fn raster_csv(path: &Path, meta: &Meta, traj: &Trajectory, component: usize) -> Result<()> {
    let first = traj.snapshots.first().context("trajectory has no snapshots")?;
    anyhow::ensure!(first.grid().dim() == 1, "rasters need a one-dimensional grid");
    anyhow::ensure!(component < first.ell(), "component {component} out of range");
    let mut rows = Vec::new();
    for s in &traj.snapshots {
        let u = s.component(component);
        for (idx, v) in u.values().iter().enumerate() {
            rows.push(vec![num(s.time), num(s.grid().coords(idx)[0]), num(*v)]);
        }
    }
    write_csv(path, meta, &["t".into(), "x".into(), "value".into()], &rows)
}

pub fn tail_csv(path: &Path, meta: &Meta, functional: &str, rows: &[TailRow]) -> Result<()> {
    let data: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![functional.to_string(), num(r.gamma), num(r.p_hat), num(r.ci_low), num(r.ci_high)])
        .collect();
    let cols = ["functional", "gamma", "p_hat", "ci_low", "ci_high"].map(String::from);
    write_csv(path, meta, &cols, &data)
}

pub fn dependence_csv(path: &Path, meta: &Meta, rows: &[DependenceRow]) -> Result<()> {
    let data: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![num(r.delta), num(r.mean_distance), num(r.stderr)])
        .collect();
    write_csv(path, meta, &["delta", "mean_distance", "stderr"].map(String::from), &data)
}

pub fn paths_csv(path: &Path, meta: &Meta, stats: &EnsembleStats) -> Result<()> {
    let cols = [
        "seed",
        "blown_up",
        "blowup_time",
        "sup_lzeta",
        "terminal_lzeta",
        "total_dissipation",
        "sup_lzeta0",
        "energy_bound",
        "min_value",
        "max_violation_fraction",
        "E11",
        "E12",
        "E21",
        "E22",
    ]
    .map(String::from);
    let data: Vec<Vec<String>> = stats
        .paths
        .iter()
        .map(|p| {
            let mut row = vec![
                p.seed.to_string(),
                p.blown_up.to_string(),
                p.blowup_time.map_or(String::new(), num),
                num(p.sup_lzeta),
                num(p.terminal_lzeta),
                num(p.total_dissipation),
                num(p.sup_lzeta0),
                num(p.energy_bound),
                num(p.min_values.iter().cloned().fold(f64::INFINITY, f64::min)),
                num(p.violation_fraction.iter().cloned().fold(0.0, f64::max)),
            ];
            match p.brusselator {
                Some(e) => row.extend(e.as_array().iter().map(|v| num(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row
        })
        .collect();
    write_csv(path, meta, &cols, &data)
}

pub fn gronwall_csv(path: &Path, meta: &Meta, rows: &[MatrixRow]) -> Result<()> {
    let cols = [
        "kappa",
        "volatility",
        "forcing",
        "gamma",
        "lhs",
        "lhs_upper",
        "rhs",
        "rhs_lower",
        "pass",
    ]
    .map(String::from);
    let data: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.kappa),
                num(r.volatility),
                r.forcing.clone(),
                num(r.gamma),
                num(r.check.lhs),
                num(r.check.lhs_upper),
                num(r.check.rhs),
                num(r.check.rhs_lower),
                r.check.pass.to_string(),
            ]
        })
        .collect();
    write_csv(path, meta, &cols, &data)
}

/// Snapshot binaries of every recorded state plus a manifest with the metadata.
pub fn write_snapshots(dir: &Path, meta: &Meta, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (k, s) in traj.snapshots.iter().enumerate() {
        for c in 0..s.ell() {
            let stem = dir.join(format!("rec{k:05}_c{c}"));
            let (bin, _) = srd_core::torus::write_snapshot(&stem, s, c)?;
            files.push(bin);
        }
    }
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    write_json(&dir.join("manifest.json"), meta, &names)?;
    Ok(files)
}
