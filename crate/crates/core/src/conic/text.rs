//! Line-oriented debug format for [`ConicProgram`].
//!
//! ```text
//! conic-program v1
//! var scalar gamma_0
//! var hpsd 4 W_0
//! maximize 0 0:10 3:0.25
//! eq -25 1:1 17:1
//! nonneg 10 5:-1 9:1
//! soc 3.1 ; 0 4:0.5 ; 0 6:-0.5
//! logepi 2 0 0:1 ; 1 1:2.5
//! ```
//!
//! An expression is its constant followed by `coord:coef` pairs. `soc` lists
//! the bound then each entry, separated by `;`. `logepi` takes the log base,
//! the value expression and the argument expression. Variables are declared
//! in coordinate order (`hpsd n` occupies `n*n` coordinates, layout as in
//! [`HermitianVar`](super::HermitianVar)). Floats use Rust's shortest
//! round-trip formatting, so parsing reproduces the program bit for bit.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{AffineExpr, ConicProgram, Constraint, VarKind};
use crate::error::{validation, Result};

const HEADER: &str = "conic-program v1";

pub fn write_program(p: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for v in p.vars() {
        let name: String = v
            .name
            .chars()
            .map(|c| if c.is_whitespace() || c == ';' { '_' } else { c })
            .collect();
        match v.kind {
            VarKind::Scalar => writeln!(out, "var scalar {name}"),
            VarKind::HermitianPsd(n) => writeln!(out, "var hpsd {n} {name}"),
        }
        .unwrap();
    }
    writeln!(out, "maximize {}", expr_to_string(p.objective())).unwrap();
    for c in p.constraints() {
        match c {
            Constraint::Eq(e) => writeln!(out, "eq {}", expr_to_string(e)),
            Constraint::Nonneg(e) => writeln!(out, "nonneg {}", expr_to_string(e)),
            Constraint::Soc { bound, entries } => {
                let parts: Vec<String> = std::iter::once(bound).chain(entries).map(expr_to_string).collect();
                writeln!(out, "soc {}", parts.join(" ; "))
            }
            Constraint::LogEpi { value, arg, base } => {
                writeln!(out, "logepi {base} {} ; {}", expr_to_string(value), expr_to_string(arg))
            }
        }
        .unwrap();
    }
    out
}

fn expr_to_string(e: &AffineExpr) -> String {
    let mut s = format!("{}", e.constant);
    for (c, v) in &e.terms {
        write!(s, " {c}:{v}").unwrap();
    }
    s
}

pub fn parse_program(text: &str) -> Result<ConicProgram> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((n, other)) => return Err(validation(format!("line {n}: expected '{HEADER}', found '{other}'"))),
        None => return Err(validation("empty program text")),
    }
    let mut p = ConicProgram::new();
    for (lineno, line) in lines {
        let err = |msg: &str| validation(format!("line {lineno}: {msg}"));
        let (keyword, rest) = line.split_once(' ').unwrap_or((line, ""));
        match keyword {
            "var" => {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                match fields.as_slice() {
                    ["scalar", name] => {
                        p.add_scalar(*name);
                    }
                    ["hpsd", n, name] => {
                        let n: usize = n.parse().map_err(|_| err("bad block size"))?;
                        p.add_hermitian_psd(*name, n);
                    }
                    _ => return Err(err("malformed variable declaration")),
                }
            }
            "maximize" => p.maximize(parse_expr(rest).map_err(|m| err(&m))?),
            "eq" => p.add_eq(parse_expr(rest).map_err(|m| err(&m))?),
            "nonneg" => p.add_nonneg(parse_expr(rest).map_err(|m| err(&m))?),
            "soc" => {
                let mut parts = rest
                    .split(';')
                    .map(parse_expr)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|m| err(&m))?;
                if parts.is_empty() {
                    return Err(err("soc needs a bound"));
                }
                let bound = parts.remove(0);
                p.add_soc(bound, parts);
            }
            "logepi" => {
                let (base, exprs) = rest.split_once(' ').ok_or_else(|| err("logepi needs a base"))?;
                let base: f64 = base.parse().map_err(|_| err("bad log base"))?;
                let (value, arg) = exprs.split_once(';').ok_or_else(|| err("logepi needs value ; arg"))?;
                p.add_log_epi(
                    parse_expr(value).map_err(|m| err(&m))?,
                    parse_expr(arg).map_err(|m| err(&m))?,
                    base,
                );
            }
            other => return Err(err(&format!("unknown keyword '{other}'"))),
        }
    }
    p.validate()?;
    Ok(p)
}

fn parse_expr(s: &str) -> std::result::Result<AffineExpr, String> {
    let mut tokens = s.split_whitespace();
    let constant: f64 = tokens
        .next()
        .ok_or("empty expression")?
        .parse()
        .map_err(|_| format!("bad constant in '{s}'"))?;
    let mut terms = Vec::new();
    for tok in tokens {
        let (c, v) = tok.split_once(':').ok_or_else(|| format!("bad term '{tok}'"))?;
        let c: usize = c.parse().map_err(|_| format!("bad coordinate '{c}'"))?;
        let v: f64 = v.parse().map_err(|_| format!("bad coefficient '{v}'"))?;
        terms.push((c, v));
    }
    Ok(AffineExpr { terms, constant })
}
