use super::LpProblem;
use std::io::{self, Write};

fn term(out: &mut impl Write, first: bool, coef: f64, name: &str) -> io::Result<()> {
    let sign = if coef < 0.0 { " -" } else if first { "" } else { " +" };
    write!(out, "{sign} {} {name}", coef.abs())
}

/// Writes the problem in the CPLEX LP text layout, with variables `x<j>` and
/// rows `r<i>`, for cross-checking against external solvers.
pub fn write_lp_format(lp: &LpProblem, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    let mut first = true;
    for (j, &c) in lp.cost.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, &format!("x{j}"))?;
            first = false;
        }
    }
    if first {
        write!(out, " 0 x0")?;
    }
    writeln!(out)?;

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.n_eq];
    for &(r, c, v) in &lp.eq_matrix {
        rows[r].push((c, v));
    }
    writeln!(out, "Subject To")?;
    for (i, row) in rows.iter_mut().enumerate() {
        row.sort_by_key(|&(c, _)| c);
        write!(out, " r{i}:")?;
        if row.is_empty() {
            write!(out, " 0 x0")?;
        }
        for (k, &(c, v)) in row.iter().enumerate() {
            term(&mut out, k == 0, v, &format!("x{c}"))?;
        }
        writeln!(out, " = {}", lp.eq_rhs[i])?;
    }

    writeln!(out, "Bounds")?;
    for j in 0..lp.n_vars {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => writeln!(out, " x{j} = {l}")?,
            (true, true) => writeln!(out, " {l} <= x{j} <= {u}")?,
            (true, false) => writeln!(out, " x{j} >= {l}")?,
            (false, true) => writeln!(out, " -inf <= x{j} <= {u}")?,
            (false, false) => writeln!(out, " x{j} free")?,
        }
    }
    writeln!(out, "End")
}
