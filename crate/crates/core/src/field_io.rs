//! Plain-text field files.
//!
//! ```text
//! # torus-field nx=<int> ny=<int> Lx=<float> Ly=<float>
//! <ny lines of nx space-separated values, 17 significant digits>
//! ```
//!
//! Writers may add further `#` comment lines after the first one (the CLI
//! echoes the effective run configuration there); readers skip them.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::torus::{Field, TorusGrid};

const MAGIC: &str = "# torus-field";

/// Full round-trip precision for `f64` (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_field<W: Write>(out: &mut W, field: &Field, comments: &[String]) -> Result<()> {
    let g = field.grid();
    writeln!(
        out,
        "{MAGIC} nx={} ny={} Lx={} Ly={}",
        g.nx(),
        g.ny(),
        fmt_f64(g.lx()),
        fmt_f64(g.ly())
    )?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    for row in field.values().chunks_exact(g.nx()) {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_field<R: BufRead>(input: R) -> Result<Field> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::FieldFormat("empty file".into()))??;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::FieldFormat(format!("bad header line: {header:?}")))?;

    let (mut nx, mut ny, mut lx, mut ly) = (None, None, None, None);
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::FieldFormat(format!("bad header token {tok:?}")))?;
        let bad = |_| Error::FieldFormat(format!("bad value for {key}: {val:?}"));
        match key {
            "nx" => nx = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "ny" => ny = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "Lx" => lx = Some(val.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "Ly" => ly = Some(val.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(Error::FieldFormat(format!("unknown header key {key:?}"))),
        }
    }
    let missing = |k: &str| Error::FieldFormat(format!("header lacks {k}"));
    let (nx, ny) = (
        nx.ok_or_else(|| missing("nx"))?,
        ny.ok_or_else(|| missing("ny"))?,
    );
    let (lx, ly) = (
        lx.ok_or_else(|| missing("Lx"))?,
        ly.ok_or_else(|| missing("Ly"))?,
    );
    let grid = TorusGrid::new(nx, ny, lx, ly).map_err(|e| Error::FieldFormat(e.to_string()))?;

    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        rows += 1;
        let before = values.len();
        for tok in trimmed.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::FieldFormat(format!("row {rows}: bad value {tok:?}")))?;
            values.push(v);
        }
        if values.len() - before != nx {
            return Err(Error::FieldFormat(format!(
                "row {rows}: expected {nx} values, got {}",
                values.len() - before
            )));
        }
    }
    if rows != ny {
        return Err(Error::FieldFormat(format!(
            "expected {ny} rows, got {rows}"
        )));
    }
    Field::new(grid, values).map_err(|e| Error::FieldFormat(e.to_string()))
}
