//! Plain-text data and model-grid files.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a file
//! and writing it again reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TensorMesh2D;
use crate::survey::{parse_floats, DatumGeometry, Survey};

const DATA_HEADER: &str = "# dipinv-data v1";
const GRID_HEADER: &str = "# dipinv-grid v1";

/// Observed data with its survey geometry and per-datum standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub survey: Survey,
    pub values: Vec<f64>,
    pub std: Vec<f64>,
}

impl DataSet {
    pub fn new(survey: Survey, values: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let n = survey.n_data();
        if values.len() != n || std.len() != n {
            return Err(Error::invalid(format!(
                "survey has {n} data but {} values and {} std were given",
                values.len(),
                std.len()
            )));
        }
        Ok(Self { survey, values, std })
    }

    /// `Ax Bx Mx Nx value std`, one datum per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{DATA_HEADER} n_data={}\n", self.values.len());
        for ((g, v), e) in self.survey.datum_geometry().iter().zip(&self.values).zip(&self.std) {
            let _ = writeln!(s, "{} {} {} {} {} {}", g.a, g.b, g.m, g.n, v, e);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let declared = match lines.next() {
            Some((_, h)) if h.starts_with(DATA_HEADER) => h
                .split_whitespace()
                .find_map(|w| w.strip_prefix("n_data="))
                .map(|n| n.parse::<usize>().map_err(|e| Error::parse(1, format!("bad n_data: {e}"))))
                .transpose()?,
            _ => return Err(Error::parse(1, format!("missing '{DATA_HEADER}' header"))),
        };
        let (mut rows, mut values, mut std) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let v = parse_floats(t, i + 1)?;
            if v.len() != 6 {
                return Err(Error::parse(i + 1, format!("expected 6 columns, found {}", v.len())));
            }
            if !(v[5] > 0.0) {
                return Err(Error::parse(i + 1, format!("std must be positive, got {}", v[5])));
            }
            rows.push(DatumGeometry { a: v[0], b: v[1], m: v[2], n: v[3] });
            values.push(v[4]);
            std.push(v[5]);
        }
        if let Some(n) = declared {
            if n != rows.len() {
                return Err(Error::parse(1, format!("header declares {n} data, found {}", rows.len())));
            }
        }
        let survey = Survey::from_geometry(&rows)?;
        Self::new(survey, values, std)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }
}

/// Cell values on an `nx`×`nz` grid, row-major from the surface down.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nz: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(nx: usize, nz: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || nz == 0 || values.len() != nx * nz {
            return Err(Error::invalid(format!(
                "grid {nx}x{nz} cannot hold {} values",
                values.len()
            )));
        }
        Ok(Self { nx, nz, values })
    }

    pub fn from_model(mesh: &TensorMesh2D, m: &[f64]) -> Result<Self> {
        Self::new(mesh.nx(), mesh.nz(), m.to_vec())
    }

    pub fn at(&self, ix: usize, iz: usize) -> f64 {
        self.values[iz * self.nx + ix]
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{GRID_HEADER}\n{} {}\n", self.nx, self.nz);
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, h)) if h == GRID_HEADER => {}
            Some((n, _)) => return Err(Error::parse(n, format!("missing '{GRID_HEADER}' header"))),
            None => return Err(Error::parse(1, "empty grid file")),
        }
        let (line, dims) = lines.next().ok_or_else(|| Error::parse(2, "missing 'nx nz' line"))?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|w| w.parse::<usize>().map_err(|e| Error::parse(line, format!("bad dimension {w:?}: {e}"))))
            .collect::<Result<_>>()?;
        let [nx, nz] = dims[..] else {
            return Err(Error::parse(line, "expected 'nx nz'"));
        };
        if nx == 0 || nz == 0 {
            return Err(Error::parse(line, "grid dimensions must be positive"));
        }
        let mut values = Vec::with_capacity(nx * nz);
        let mut rows = 0;
        let mut last = line;
        for (n, l) in lines {
            let v = parse_floats(l, n)?;
            if v.len() != nx {
                return Err(Error::parse(n, format!("expected {nx} values, found {}", v.len())));
            }
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::parse(n, format!("non-finite value {bad}")));
            }
            values.extend(v);
            rows += 1;
            last = n;
        }
        if rows != nz {
            return Err(Error::parse(last, format!("expected {nz} rows, found {rows}")));
        }
        Self::new(nx, nz, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Writes a file, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let wrap = |e: std::io::Error| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    std::fs::write(path, text).map_err(wrap)
}
