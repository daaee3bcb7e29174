use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use specsolve_core::mesh::FeSpace;

/// Column layouts, fixed per artifact.
pub mod schema {
    pub const EIGENVALUES: &[&str] = &[
        "coarse_cells",
        "k",
        "lambda_fem",
        "lambda_ms",
        "abs_error",
        "l2_error",
        "h1_error",
    ];
    pub const FEM_CONVERGENCE: &[&str] = &["fine_cells", "k", "lambda", "abs_error", "l2_error", "h1_error"];
    pub const H_STUDY: &[&str] = &["coarse_cells", "k", "mean_fem", "mean_ms", "abs_error"];
    pub const S_STUDY: &[&str] = &["s", "k", "mean", "reference", "abs_error"];
    pub const N_STUDY: &[&str] = &["sampler", "n", "shifts", "k", "mean", "reference", "rms_error"];
    pub const Q_STUDY: &[&str] = &[
        "offline_sampler",
        "q_requested",
        "q_used",
        "k",
        "mean_pod",
        "mean_fem",
        "abs_error",
        "offline_seconds",
        "online_seconds",
    ];
    pub const SAMPLES: &[&str] = &["shift", "index", "k", "lambda", "functional"];
    /// `ipr_*` is the inverse participation ratio `int psi^4 / (int psi^2)^2`,
    /// a localization diagnostic (large when the state is concentrated).
    pub const LOCALIZATION: &[&str] = &["k", "lambda_fem", "lambda_ms", "abs_error", "rel_error", "ipr_fem", "ipr_ms"];
    pub const FIELD_1D: &[&str] = &["x", "value"];
    pub const FIELD_2D: &[&str] = &["x", "y", "value"];
}

/// Output directory with the emit switches applied.
pub struct Sink {
    pub dir: PathBuf,
    pub csv: bool,
    pub fields: bool,
    pub json: bool,
    written: Vec<PathBuf>,
}

impl Sink {
    /// Creates `dir` and checks that it is writable.
    pub fn create(dir: &Path, csv: bool, fields: bool, json: bool) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let probe = dir.join(".specsolve-write-probe");
        File::create(&probe)?;
        std::fs::remove_file(&probe)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            fields,
            json,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes a table; rows must match `header` in length.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if !self.csv {
            return Ok(());
        }
        let path = self.dir.join(name);
        write_table(&path, header, rows)?;
        self.written.push(path);
        Ok(())
    }

    /// Nodal field on the fine mesh: `x,value` or `x,y,value`.
    pub fn field(&mut self, name: &str, space: &FeSpace, values: &[f64]) -> Result<()> {
        if !self.fields {
            return Ok(());
        }
        let path = self.dir.join(name);
        let verts = space.mesh().vertices();
        anyhow::ensure!(verts.len() == values.len(), "field {name}: {} values for {} nodes", values.len(), verts.len());
        let dim = space.dim();
        let header = if dim == 1 { schema::FIELD_1D } else { schema::FIELD_2D };
        let rows: Vec<Vec<String>> = verts
            .iter()
            .zip(values)
            .map(|(p, v)| p.iter().take(dim).map(|c| num(*c)).chain([num(*v)]).collect())
            .collect();
        write_table(&path, header, &rows)?;
        self.written.push(path);
        Ok(())
    }

    /// Pretty JSON; floats are written in shortest round-trip form.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.json {
            return Ok(());
        }
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        anyhow::ensure!(r.len() == header.len(), "{}: row has {} columns, header {}", path.display(), r.len(), header.len());
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
