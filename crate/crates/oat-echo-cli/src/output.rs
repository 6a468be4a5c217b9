//! Deterministic data export: CSV with `#` header comments, or a single
//! JSON document.  Floats are always printed with 17 significant digits so
//! identical configurations produce byte-identical files regardless of
//! thread count or platform rounding of shortest-representation printers.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

/// 17 significant digits, scientific.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// One table cell.
#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => {
                if x.is_nan() {
                    "nan".to_string()
                } else {
                    fmt_f(*x)
                }
            }
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::F(x) => {
                if x.is_finite() {
                    fmt_f(*x)
                } else {
                    "null".to_string()
                }
            }
            Cell::S(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
        }
    }
}

/// A full export: configuration echo, column names, rows.
pub struct Table {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# oat-echo v{}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# command: {}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    fn render_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"tool\": \"oat-echo\",");
        let _ = writeln!(out, "  \"version\": \"{}\",", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "  \"command\": \"{}\",", self.command);
        out.push_str("  \"config\": {");
        for (i, (k, v)) in self.config.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "\n    \"{k}\": \"{v}\"");
        }
        out.push_str("\n  },\n  \"columns\": [");
        for (i, c) in self.columns.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "\"{c}\"");
        }
        out.push_str("],\n  \"rows\": [");
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str("\n    [");
            for (j, cell) in row.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(&cell.json());
            }
            out.push(']');
        }
        out.push_str("\n  ]\n}\n");
        out
    }
}

/// Writes to a file, or to stdout when the path is `-`.
pub fn write_output(path: &str, contents: &str) -> io::Result<()> {
    if path == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        lock.write_all(contents.as_bytes())?;
        lock.flush()
    } else {
        let file = File::create(Path::new(path))?;
        let mut w = BufWriter::new(file);
        w.write_all(contents.as_bytes())?;
        w.flush()
    }
}
