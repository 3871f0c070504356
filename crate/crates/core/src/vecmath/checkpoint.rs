//! Parameter checkpoints.
//!
//! ```text
//! d=<int> seed=<uint64>
//! <decimal> <hexfloat>      (d lines)
//! ```
//!
//! The decimal column is the shortest round-trip representation; the hex
//! column is authoritative. Readers reject files where the two disagree.

use std::io::{BufRead, Write};

use super::hexfloat::{format_hex, parse_hex};
use super::ParamVector;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamVector,
    pub seed: u64,
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &ParamVector, seed: u64) -> Result<()> {
    writeln!(w, "d={} seed={}", params.len(), seed)?;
    for v in params {
        writeln!(w, "{} {}", v, format_hex(*v))?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Checkpoint> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("missing header".into()))??;
    let (d, seed) = parse_header(&header)?;
    let mut data = Vec::with_capacity(d);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let mut parts = line.split_whitespace();
        let (Some(dec), Some(hex), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Checkpoint(format!("line {lineno}: expected two fields")));
        };
        let exact = parse_hex(hex).ok_or_else(|| Error::Checkpoint(format!("line {lineno}: bad hex float {hex:?}")))?;
        let approx: f64 = dec
            .parse()
            .map_err(|_| Error::Checkpoint(format!("line {lineno}: bad decimal {dec:?}")))?;
        if approx.to_bits() != exact.to_bits() {
            return Err(Error::Checkpoint(format!(
                "line {lineno}: decimal {dec} disagrees with {hex}"
            )));
        }
        data.push(exact);
    }
    if data.len() != d {
        return Err(Error::Checkpoint(format!(
            "header declares d={d} but {} values follow",
            data.len()
        )));
    }
    let params = ParamVector::from_vec(data).map_err(|_| Error::Checkpoint("non-finite value".into()))?;
    Ok(Checkpoint { params, seed })
}

fn parse_header(line: &str) -> Result<(usize, u64)> {
    let bad = || Error::Checkpoint(format!("bad header {line:?}"));
    let mut parts = line.split_whitespace();
    let d = parts
        .next()
        .and_then(|p| p.strip_prefix("d="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let seed = parts
        .next()
        .and_then(|p| p.strip_prefix("seed="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((d, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let x = ParamVector::from_slice(&[0.1, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &x, 7).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "d=2 seed=7\n0.1 0x1.999999999999ap-4\n-2 -0x1p+1\n"
        );
    }

    #[test]
    fn rejects_inconsistent_files() {
        let cases = [
            "",
            "d=2 seed=1\n1 0x1p+0\n",
            "d=1 seed=1\n2 0x1p+0\n",
            "d=1\n1 0x1p+0\n",
            "d=1 seed=-1\n1 0x1p+0\n",
        ];
        for case in cases {
            assert!(read_checkpoint(case.as_bytes()).is_err(), "{case:?}");
        }
    }
}
