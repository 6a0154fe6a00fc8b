//! Line-oriented draws files: a header, then
//! `iteration<TAB>labels<TAB>gamma<TAB>log_posterior` per kept draw, with
//! 1-based comma-separated cluster labels and an ASCII 0/1 selection string.

use std::io::{self, BufRead, Write};

use mfmclust_core::sampler::Draw;
use mfmclust_core::{Partition, Selection};

pub const HEADER: &str = "iteration\tlabels\tgamma\tlog_posterior";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("draws line {line}: {message}")]
pub struct DrawsError {
    pub line: usize,
    pub message: String,
}

pub fn write_draw<W: Write>(out: &mut W, draw: &Draw) -> io::Result<()> {
    write!(out, "{}\t", draw.iteration)?;
    for (k, &l) in draw.partition.labels().iter().enumerate() {
        if k > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{}", l + 1)?;
    }
    writeln!(out, "\t{}\t{}", draw.selection.to_bitstring(), draw.log_posterior)
}

pub fn parse_draw(line: &str, line_no: usize) -> Result<Draw, DrawsError> {
    let bad = |message: String| DrawsError { line: line_no, message };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(bad(format!("expected 4 tab-separated fields, found {}", fields.len())));
    }
    let iteration = fields[0]
        .parse()
        .map_err(|_| bad(format!("bad iteration {:?}", fields[0])))?;
    let labels = fields[1]
        .split(',')
        .map(|s| match s.parse::<usize>() {
            Ok(l) if l >= 1 => Ok(l - 1),
            _ => Err(bad(format!("bad cluster label {s:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let selection = Selection::parse_bitstring(fields[2]).map_err(|e| bad(e.to_string()))?;
    let log_posterior = fields[3]
        .parse()
        .map_err(|_| bad(format!("bad log posterior {:?}", fields[3])))?;
    Ok(Draw {
        iteration,
        partition: Partition::new(labels),
        selection,
        log_posterior,
    })
}

/// Streams the draws of one file, checking the header.
pub fn read_draws<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Draw, DrawsError>> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) if h == HEADER => None,
        Some((_, Ok(h))) => Some(DrawsError {
            line: 1,
            message: format!("unexpected header {h:?}"),
        }),
        Some((_, Err(e))) => Some(DrawsError {
            line: 1,
            message: e.to_string(),
        }),
        None => Some(DrawsError {
            line: 1,
            message: "empty draws file".into(),
        }),
    };
    header.map(Err).into_iter().chain(
        lines
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.is_empty()))
            .map(|(k, l)| {
                let l = l.map_err(|e| DrawsError {
                    line: k + 1,
                    message: e.to_string(),
                })?;
                parse_draw(&l, k + 1)
            }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let draw = Draw {
            iteration: 12,
            partition: Partition::new(vec![0, 0, 1]),
            selection: Selection::parse_bitstring("0110").unwrap(),
            log_posterior: -12.345678901234567,
        };
        let mut buf = Vec::new();
        writeln!(buf, "{HEADER}").unwrap();
        write_draw(&mut buf, &draw).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("12\t1,1,2\t0110\t-12.345678901234567\n"));
        let back: Vec<Draw> = read_draws(text.as_bytes()).collect::<Result<_, _>>().unwrap();
        assert_eq!(back, vec![draw]);
    }

    #[test]
    fn bad_lines() {
        assert!(parse_draw("1\t0,1\t01\t-1", 2).is_err());
        assert!(parse_draw("1\t1,2\t00\t-1", 2).is_err());
        assert!(read_draws("nope\n".as_bytes()).next().unwrap().is_err());
    }
}
