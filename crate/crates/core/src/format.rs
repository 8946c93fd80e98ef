//! Plain-text MDP files.
//!
//! ```text
//! mdp <S> <A> <s0> <reset_action>
//! t <s> <a> <s'> <prob>
//! ```
//! One `t` line per nonzero entry; `#` starts a comment.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Row-sum tolerance accepted by the parser.
pub const PARSE_ROW_TOL: f64 = 1e-9;

pub fn write_mdp<W: Write>(mdp: &TabularMdp, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "mdp {} {} {} {}",
        mdp.num_states(),
        mdp.num_actions(),
        mdp.initial_state(),
        mdp.reset_action()
    )?;
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            for (t, p) in mdp.support(s, a) {
                writeln!(out, "t {s} {a} {t} {p:.16e}")?;
            }
        }
    }
    Ok(())
}

pub fn parse_mdp<R: BufRead>(input: R) -> Result<TabularMdp> {
    let mut header: Option<(usize, usize, usize, usize)> = None;
    let mut kernel: Vec<f64> = Vec::new();
    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = line.map_err(|e| err(e.to_string()))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let int = |tok: &str| -> Result<usize> {
            tok.parse()
                .map_err(|_| err(format!("expected a non-negative integer, got {tok:?}")))
        };
        match (fields[0], header) {
            ("mdp", None) if fields.len() == 5 => {
                let h = (int(fields[1])?, int(fields[2])?, int(fields[3])?, int(fields[4])?);
                if h.0 == 0 || h.1 == 0 || h.2 >= h.0 || h.3 >= h.1 {
                    return Err(err(format!("inconsistent header {content:?}")));
                }
                kernel = vec![0.0; h.0 * h.1 * h.0];
                header = Some(h);
            }
            ("t", Some((ns, na, _, _))) if fields.len() == 5 => {
                let (s, a, t) = (int(fields[1])?, int(fields[2])?, int(fields[3])?);
                if s >= ns || a >= na || t >= ns {
                    return Err(err(format!("index out of range in ({s}, {a}, {t})")));
                }
                let p: f64 = fields[4]
                    .parse()
                    .map_err(|_| err(format!("bad probability {:?}", fields[4])))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(err(format!("probability {p} outside [0, 1]")));
                }
                kernel[(s * na + a) * ns + t] += p;
            }
            _ => return Err(err(format!("unexpected line {content:?}"))),
        }
    }
    let (ns, na, s0, reset) = header.ok_or(Error::Parse {
        line: last_line,
        msg: "missing `mdp` header".into(),
    })?;
    for s in 0..ns {
        for a in 0..na {
            let sum: f64 = kernel[(s * na + a) * ns..(s * na + a + 1) * ns].iter().sum();
            if (sum - 1.0).abs() > PARSE_ROW_TOL {
                return Err(Error::Parse {
                    line: last_line,
                    msg: format!("row p(.|{s},{a}) sums to {sum}"),
                });
            }
        }
    }
    TabularMdp::with_tolerance(ns, na, kernel, s0, reset, PARSE_ROW_TOL).map_err(|e| Error::Parse {
        line: last_line,
        msg: e.to_string(),
    })
}

pub fn read_mdp_file(path: &Path) -> Result<TabularMdp> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mdp(BufReader::new(file))
}

pub fn write_mdp_file(mdp: &TabularMdp, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_mdp(mdp, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}
