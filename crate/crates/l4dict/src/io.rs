//! File formats: the plain-text matrix format, CSV tables and JSON sidecars.
//!
//! Matrix text format: a header line `rows cols`, then one line per row with
//! the entries in `{:.16e}` notation separated by single spaces. Seventeen
//! significant digits make `load(save(m)) == m` bit for bit.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use l4dict_core::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Matrix(#[from] l4dict_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_matrix<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    writeln!(w, "{} {}", m.rows(), m.cols())?;
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for (j, x) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            use std::fmt::Write as _;
            write!(line, "{x:.16e}").expect("writing to a String");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<Matrix> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (hline, header) = lines.next().ok_or(IoError::Parse {
        line: 1,
        msg: "missing `rows cols` header".into(),
    })?;
    let header = header?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>().map_err(|e| IoError::Parse {
            line: hline,
            msg: format!("bad dimension {s:?}: {e}"),
        })
    };
    if dims.len() != 2 {
        return Err(IoError::Parse {
            line: hline,
            msg: format!("expected `rows cols`, found {header:?}"),
        });
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut data = Vec::with_capacity(rows.saturating_mul(cols));
    let mut seen_rows = 0;
    for (line, text) in lines {
        let text = text?;
        let before = data.len();
        for tok in text.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|e| IoError::Parse {
                line,
                msg: format!("bad number {tok:?}: {e}"),
            })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(IoError::Parse {
                line,
                msg: format!("expected {cols} entries, found {}", data.len() - before),
            });
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(IoError::Parse {
            line: hline,
            msg: format!("header declares {rows} rows, found {seen_rows}"),
        });
    }
    Ok(Matrix::new(rows, cols, data)?)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(file_err(path))?;
    write_matrix(BufWriter::new(f), m)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let f = File::open(path).map_err(file_err(path))?;
    read_matrix(BufReader::new(f))
}

pub fn save_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(file_err(path))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .map_err(file_err(path))?
        .read_to_string(&mut text)
        .map_err(file_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bytes).map_err(file_err(path))
}

pub fn create_dir(path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::create_dir_all(path).map_err(file_err(path))
}

/// Rows of a table, all rendered with `Display`, written as RFC 4180 CSV.
pub fn csv_bytes<S: AsRef<str>>(header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.into_inner().map_err(|e| IoError::Stream(e.into_error()))
}

/// Shortest round-trip rendering of a float; empty for `None`.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Replay record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// The effective configuration after flags were merged over the config file.
    pub config: serde_json::Value,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_json(dir.as_ref().join("manifest.json"), self)
    }
}
