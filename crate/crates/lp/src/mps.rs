//! Fixed-format MPS export for cross-checking models with external solvers.
//!
//! Rows are named `R<index>`, columns `C<index>`, the objective `OBJ`.
//! Integer columns sit between `MARKER INTORG`/`INTEND` lines.

use std::fmt::Write as _;
use std::io::Write;

use crate::{LinearProgram, MipModel, Sense};

pub fn write_mps_string(name: &str, lp: &LinearProgram, integer: Option<&MipModel>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n N  OBJ\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let t = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {t}  R{i}");
    }
    out.push_str("COLUMNS\n");
    let flags = integer.map(|m| m.integer_flags());
    let mut in_int = false;
    let mut markers = 0;
    for (j, col) in lp.cols.iter().enumerate() {
        let is_int = flags.is_some_and(|f| f[j]);
        if is_int != in_int {
            let kind = if is_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(
                out,
                "    MARKER{markers:<6}  'MARKER'                 '{kind}'"
            );
            markers += 1;
            in_int = is_int;
        }
        let name = format!("C{j}");
        if col.cost != 0.0 {
            let _ = writeln!(out, "    {name:<8}  {:<8}  {:>12}", "OBJ", num(col.cost));
        }
        for &(i, v) in &col.entries {
            let _ = writeln!(out, "    {name:<8}  {:<8}  {:>12}", format!("R{i}"), num(v));
        }
        if col.cost == 0.0 && col.entries.is_empty() {
            let _ = writeln!(out, "    {name:<8}  {:<8}  {:>12}", "OBJ", "0");
        }
    }
    if in_int {
        let _ = writeln!(
            out,
            "    MARKER{markers:<6}  'MARKER'                 'INTEND'"
        );
    }
    out.push_str("RHS\n");
    for (i, row) in lp.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            let _ = writeln!(
                out,
                "    RHS       {:<8}  {:>12}",
                format!("R{i}"),
                num(row.rhs)
            );
        }
    }
    out.push_str("BOUNDS\n");
    for (j, col) in lp.cols.iter().enumerate() {
        let name = format!("C{j}");
        let (l, u) = (col.lower, col.upper);
        if l == u {
            let _ = writeln!(out, " FX BND       {name:<8}  {:>12}", num(l));
            continue;
        }
        if !l.is_finite() && !u.is_finite() {
            let _ = writeln!(out, " FR BND       {name}");
            continue;
        }
        if !l.is_finite() {
            let _ = writeln!(out, " MI BND       {name}");
        } else if l != 0.0 {
            let _ = writeln!(out, " LO BND       {name:<8}  {:>12}", num(l));
        }
        if u.is_finite() {
            let _ = writeln!(out, " UP BND       {name:<8}  {:>12}", num(u));
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps<W: Write>(
    w: &mut W,
    name: &str,
    lp: &LinearProgram,
    integer: Option<&MipModel>,
) -> std::io::Result<()> {
    w.write_all(write_mps_string(name, lp, integer).as_bytes())
}

fn num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.12e}")
    }
}
