//! Reading and writing the files of an output directory. Numbers in CSV
//! files use `{:.16e}`, which round-trips every `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hjlab_core::solver::Snapshot;
use hjlab_core::{EvolutionState, Grid};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> OutDir {
        OutDir { root: root.to_path_buf() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Fails with a message naming the missing file and the command producing it.
    pub fn read_json<T: DeserializeOwned>(&self, name: &str, producer: &str) -> Result<T> {
        let text = self.require(name, producer)?;
        serde_json::from_str(&text).with_context(|| format!("{name}: malformed"))
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            let mut first = true;
            for v in row {
                if !first {
                    text.push(',');
                }
                first = false;
                if !v.is_nan() {
                    write!(text, "{v:.16e}").expect("string write");
                }
            }
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    /// Rows of a CSV file written by `write_csv`; empty fields read as NaN.
    pub fn read_csv(&self, name: &str, producer: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let text = self.require(name, producer)?;
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| anyhow!("{name}: empty file"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|f| if f.is_empty() { Ok(f64::NAN) } else { f.parse::<f64>() })
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| anyhow!("{name}: line {}: {e}", i + 2))?;
            if row.len() != header.len() {
                bail!("{name}: line {}: expected {} fields", i + 2, header.len());
            }
            rows.push(row);
        }
        Ok((header, rows))
    }

    fn require(&self, name: &str, producer: &str) -> Result<String> {
        let p = self.path(name);
        if !p.is_file() {
            bail!("missing {} (run `hjlab {producer}` first)", p.display());
        }
        fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))
    }
}

fn coords(grid: &Grid, node: usize) -> Vec<f64> {
    grid.coords(node)[..grid.dim()].to_vec()
}

pub fn coord_header(grid: &Grid) -> Vec<&'static str> {
    if grid.dim() == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    }
}

/// `x[,y],<name>` rows for a nodal field.
pub fn write_field(out: &OutDir, file: &str, grid: &Grid, name: &str, values: &[f64]) -> Result<()> {
    let mut header = coord_header(grid);
    header.push(name);
    let rows = values.iter().enumerate().map(|(n, v)| {
        let mut r = coords(grid, n);
        r.push(*v);
        r
    });
    out.write_csv(file, &header, rows)
}

pub fn read_field(out: &OutDir, file: &str, producer: &str, grid: &Grid) -> Result<Vec<f64>> {
    let (_, rows) = out.read_csv(file, producer)?;
    if rows.len() != grid.len() {
        bail!("{file}: {} rows for a grid of {} nodes", rows.len(), grid.len());
    }
    Ok(rows.iter().map(|r| r[r.len() - 1]).collect())
}

/// Snapshots in long format: `time,x[,y],u`, nodes in grid order.
pub fn write_snapshots(out: &OutDir, grid: &Grid, snaps: &[Snapshot]) -> Result<()> {
    let mut header = vec!["time"];
    header.extend(coord_header(grid));
    header.push("u");
    let rows = snaps.iter().flat_map(|s| {
        s.u.iter().enumerate().map(move |(n, u)| {
            let mut r = vec![s.time];
            r.extend(coords(grid, n));
            r.push(*u);
            r
        })
    });
    out.write_csv("snapshots.csv", &header, rows)
}

pub fn read_snapshots(out: &OutDir, grid: &Grid) -> Result<Vec<Snapshot>> {
    let (_, rows) = out.read_csv("snapshots.csv", "evolve")?;
    let n = grid.len();
    if rows.len() % n != 0 {
        bail!("snapshots.csv: {} rows is not a multiple of the {n} grid nodes", rows.len());
    }
    Ok(rows
        .chunks(n)
        .map(|c| Snapshot {
            time: c[0][0],
            u: c.iter().map(|r| r[r.len() - 1]).collect(),
        })
        .collect())
}

/// Rebuilds the parts of an evolution used by the post-processing commands.
pub fn read_state(out: &OutDir, grid: &Grid, t: f64, dt: f64) -> Result<EvolutionState> {
    let u = read_field(out, "final.csv", "evolve", grid)?;
    let mut state = EvolutionState::new(u, dt);
    state.t = t;
    state.snapshots = read_snapshots(out, grid)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        let grid = Grid::interval(0.0, 1.0, 7).unwrap();
        let snaps: Vec<Snapshot> = (0..3)
            .map(|k| Snapshot {
                time: k as f64 / 3.0,
                u: (0..7).map(|n| (n as f64 * 0.1 + k as f64).sin() / 3.0).collect(),
            })
            .collect();
        write_snapshots(&out, &grid, &snaps).unwrap();
        let back = read_snapshots(&out, &grid).unwrap();
        for (a, b) in snaps.iter().zip(&back) {
            assert_eq!(a.time, b.time);
            assert_eq!(a.u, b.u);
        }
        out.write_csv("gap.csv", &["a", "b"], [vec![1.0, f64::NAN]]).unwrap();
        let (_, rows) = out.read_csv("gap.csv", "x").unwrap();
        assert!(rows[0][1].is_nan());
        let err = out.read_csv("nope.csv", "evolve").unwrap_err().to_string();
        assert!(err.contains("nope.csv") && err.contains("hjlab evolve"), "{err}");
    }
}
