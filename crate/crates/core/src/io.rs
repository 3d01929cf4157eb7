//! CSV input/output.
//!
//! Schemas: potentials `x,q`; time series `t,value`; matrices as dense CSV
//! with the first row and column holding grid coordinates. Lines starting
//! with `#` are comments (used for metadata such as the config hash and the
//! `# domain=lower-triangle` flag on triangular kernels).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::grid::{PotentialSample, UniformGrid};
use crate::{Error, Result};

const SPACING_RTOL: f64 = 1e-9;

/// Parse a two-column CSV with the given header into (coords, values).
/// Coordinates must start at 0 and be strictly increasing with uniform
/// spacing within 1e-9 relative tolerance.
fn read_two_column(path: &Path, want_header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    let mut header_seen = false;
    for (row, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if !header_seen {
            if fields.len() < 2 || fields[0] != want_header[0] || fields[1] != want_header[1] {
                return Err(Error::Format {
                    row,
                    msg: format!(
                        "expected header `{},{}`, found `{line}`",
                        want_header[0], want_header[1]
                    ),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::Format {
                row,
                msg: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Format {
                row,
                msg: format!("cannot parse `{s}`: {e}"),
            })
        };
        let x = parse(fields[0])?;
        let v = parse(fields[1])?;
        if !x.is_finite() || !v.is_finite() {
            return Err(Error::Format {
                row,
                msg: "non-finite value".into(),
            });
        }
        xs.push(x);
        vs.push(v);
    }
    if !header_seen {
        return Err(Error::Format {
            row: 0,
            msg: "missing header".into(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Format {
            row: xs.len(),
            msg: "need at least 2 data rows".into(),
        });
    }
    if xs[0].abs() > SPACING_RTOL {
        return Err(Error::Format {
            row: 1,
            msg: format!("first coordinate must be 0, found {}", xs[0]),
        });
    }
    let h = xs[1] - xs[0];
    if h <= 0.0 {
        return Err(Error::Format {
            row: 2,
            msg: "coordinates must be strictly increasing".into(),
        });
    }
    for i in 1..xs.len() {
        let d = xs[i] - xs[i - 1];
        if (d - h).abs() > SPACING_RTOL * h.abs().max(1.0) {
            return Err(Error::Format {
                row: i + 1,
                msg: format!("non-uniform spacing: expected {h}, found {d}"),
            });
        }
    }
    Ok((xs, vs))
}

/// Read a potential from a CSV file with header `x,q`.
pub fn read_potential_csv(path: impl AsRef<Path>) -> Result<PotentialSample> {
    let (xs, vs) = read_two_column(path.as_ref(), ["x", "q"])?;
    let grid = UniformGrid::new(xs.len(), xs[xs.len() - 1])?;
    PotentialSample::new(grid, vs)
}

/// Read a time series from a CSV file with header `t,value`.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<(UniformGrid, Vec<f64>)> {
    let (ts, vs) = read_two_column(path.as_ref(), ["t", "value"])?;
    let grid = UniformGrid::new(ts.len(), ts[ts.len() - 1])?;
    Ok((grid, vs))
}

/// Write a two-column CSV with full double precision. `comments` are
/// emitted first as `# ...` lines.
pub fn write_series_csv(
    path: impl AsRef<Path>,
    header: [&str; 2],
    grid: &UniformGrid,
    values: &[f64],
    comments: &[String],
) -> Result<()> {
    if values.len() != grid.n_points() {
        return Err(Error::Contract(format!(
            "series has {} values on a grid of {} points",
            values.len(),
            grid.n_points()
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{},{}", header[0], header[1])?;
    for (x, v) in grid.nodes().zip(values) {
        writeln!(out, "{x},{v}")?;
    }
    Ok(())
}

/// Write a dense matrix as CSV, with the first row and first column holding
/// the grid coordinates (the corner cell is empty).
pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    row_coords: &UniformGrid,
    col_coords: &UniformGrid,
    values: &DMatrix<f64>,
    comments: &[String],
) -> Result<()> {
    if values.nrows() != row_coords.n_points() || values.ncols() != col_coords.n_points() {
        return Err(Error::Contract("matrix/grid dimension mismatch".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    write!(out, "")?;
    for x in col_coords.nodes() {
        write!(out, ",{x}")?;
    }
    writeln!(out)?;
    for i in 0..values.nrows() {
        write!(out, "{}", row_coords.node(i))?;
        for j in 0..values.ncols() {
            write!(out, ",{}", values[(i, j)])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
