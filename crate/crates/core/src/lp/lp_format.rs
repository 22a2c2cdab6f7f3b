use std::io::{self, Write};

use super::{LinearProgram, Relation};
use crate::scalar::Real;

fn sanitize(name: &str, fallback: &str, idx: usize) -> String {
    let cleaned: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' }).collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("{fallback}{idx}")
    } else {
        cleaned
    }
}

fn write_terms<T: Real, W: Write>(out: &mut W, terms: &[(usize, T)], names: &[String]) -> io::Result<()> {
    if terms.is_empty() {
        return write!(out, " 0 {}", names.first().map(String::as_str).unwrap_or("x0"));
    }
    for (pos, (j, a)) in terms.iter().enumerate() {
        let sign = if *a < T::zero() { "-" } else { "+" };
        if pos == 0 && sign == "+" {
            write!(out, " {} {}", a.abs(), names[*j])?;
        } else {
            write!(out, " {sign} {} {}", a.abs(), names[*j])?;
        }
    }
    Ok(())
}

/// Writes `lp` in CPLEX LP text format for cross-checking with external
/// solvers.
pub fn write_lp<T: Real, W: Write>(lp: &LinearProgram<T>, out: &mut W) -> io::Result<()> {
    let names: Vec<String> = lp.col_names.iter().enumerate().map(|(j, n)| sanitize(n, "x", j)).collect();
    writeln!(out, "\\ {} columns, {} rows", lp.num_vars(), lp.num_rows())?;
    if lp.offset != T::zero() {
        writeln!(out, "\\ objective offset {}", lp.offset)?;
    }
    writeln!(out, "MINIMIZE")?;
    write!(out, " obj:")?;
    let obj: Vec<(usize, T)> =
        lp.objective.iter().enumerate().filter(|(_, c)| **c != T::zero()).map(|(j, c)| (j, *c)).collect();
    write_terms(out, &obj, &names)?;
    writeln!(out)?;

    writeln!(out, "SUBJECT TO")?;
    for (i, row) in lp.rows.iter().enumerate() {
        write!(out, " {}:", sanitize(&row.name, "r", i))?;
        write_terms(out, &row.coeffs, &names)?;
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        writeln!(out, " {rel} {}", row.rhs)?;
    }

    writeln!(out, "BOUNDS")?;
    for (j, name) in names.iter().enumerate() {
        if lp.binary[j] {
            continue;
        }
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(out, " {name} free")?,
            (true, true) if lo == hi => writeln!(out, " {name} = {lo}")?,
            (true, true) => writeln!(out, " {lo} <= {name} <= {hi}")?,
            (true, false) if lo == T::zero() => {}
            (true, false) => writeln!(out, " {name} >= {lo}")?,
            (false, true) => writeln!(out, " -inf <= {name} <= {hi}")?,
        }
    }
    let binaries: Vec<&String> = names.iter().enumerate().filter(|(j, _)| lp.binary[*j]).map(|(_, n)| n).collect();
    if !binaries.is_empty() {
        writeln!(out, "BINARY")?;
        for name in binaries {
            writeln!(out, " {name}")?;
        }
    }
    writeln!(out, "END")
}
