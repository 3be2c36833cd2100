//! Trajectory CSV and JSON reports, written atomically.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use impdde::{Grid, Trajectory};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trajectory file: {0}")]
    Format(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(path))?;
    tmp.write_all(bytes).map_err(io(path))?;
    tmp.as_file().sync_all().map_err(io(path))?;
    tmp.persist(path).map_err(|e| OutputError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Rows `t, z1..zn, side`. The first node of every segment after the
/// first carries side `R` (the right limit at a breakpoint); every other
/// row is `L`.
pub fn trajectory_csv(z: &Trajectory) -> Result<Vec<u8>, OutputError> {
    let n = z.n();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("z{i}")));
    header.push("side".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(n + 2);
    for (si, k, t, v) in z.nodes() {
        row.clear();
        row.push(format!("{t:.16e}"));
        row.extend(v.iter().map(|x| format!("{x:.16e}")));
        row.push(if si > 0 && k == 0 { "R" } else { "L" }.to_string());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| OutputError::Format(e.to_string()))
}

pub fn write_trajectory(path: &Path, z: &Trajectory) -> Result<(), OutputError> {
    write_atomic(path, &trajectory_csv(z)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Rows of a trajectory file: `(t, values, is_right_limit)`.
pub fn read_rows(path: &Path) -> Result<Vec<(f64, Vec<f64>, bool)>, OutputError> {
    let mut text = String::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(io(path))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let width = r.headers()?.len();
    if width < 3 {
        return Err(OutputError::Format(format!("expected t, z1.., side columns, got {width}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|e| OutputError::Format(format!("row {}: {e}", line + 1)))
        };
        let t = num(0)?;
        let vals = (1..width - 1).map(num).collect::<Result<Vec<_>, _>>()?;
        let right = match &rec[width - 1] {
            "R" => true,
            "L" => false,
            s => return Err(OutputError::Format(format!("row {}: side must be L or R, got {s:?}", line + 1))),
        };
        rows.push((t, vals, right));
    }
    Ok(rows)
}

/// Rebuilds a trajectory written by [`write_trajectory`] on `grid`, which
/// must be the grid it was computed on.
pub fn read_trajectory(path: &Path, grid: Arc<Grid>) -> Result<Trajectory, OutputError> {
    let rows = read_rows(path)?;
    let n = rows.first().map_or(0, |r| r.1.len());
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for (i, (_, vals, right)) in rows.iter().enumerate() {
        if i == 0 || *right {
            blocks.push(Vec::new());
        }
        blocks.last_mut().expect("block").extend(vals);
    }
    let times = rows.iter().map(|r| r.0);
    let expected = grid.segments().iter().flat_map(|s| s.times.iter().copied());
    if rows.len() != grid.node_count() || times.zip(expected).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs())) {
        return Err(OutputError::Format("node times do not match the problem grid".into()));
    }
    Trajectory::from_segment_values(grid, n, blocks).map_err(|e| OutputError::Format(e.to_string()))
}

/// `out/foo.csv` → `out/foo.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}
