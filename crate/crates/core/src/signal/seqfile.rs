//! Plain-text sparse sequence files.
//!
//! ```text
//! # comment
//! m 200
//! frames 3
//! 0 17 4.25
//! 0 93 -3.5
//! 2 17 4.75
//! ```
//!
//! After the header every line is `t index value`; missing entries are zero.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub fn write_sequence(sequence: &[Vec<f64>]) -> String {
    let m = sequence.first().map_or(0, Vec::len);
    let mut out = format!("m {m}\nframes {}\n", sequence.len());
    for (t, x) in sequence.iter().enumerate() {
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                let _ = writeln!(out, "{t} {i} {v}");
            }
        }
    }
    out
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

pub fn read_sequence(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut m: Option<usize> = None;
    let mut frames: Option<usize> = None;
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (fields[0], m, frames) {
            ("m", None, None) if fields.len() == 2 => match fields[1].parse::<usize>() {
                Ok(v) if v > 0 => m = Some(v),
                _ => return parse_err(line_no, format!("bad dimension '{}'", fields[1])),
            },
            ("frames", Some(mv), None) if fields.len() == 2 => match fields[1].parse::<usize>() {
                Ok(v) if v > 0 => {
                    frames = Some(v);
                    out = vec![vec![0.0; mv]; v];
                }
                _ => return parse_err(line_no, format!("bad frame count '{}'", fields[1])),
            },
            (_, Some(mv), Some(fv)) => {
                if fields.len() != 3 {
                    return parse_err(line_no, "expected 't index value'");
                }
                let t: usize = fields[0].parse().or_else(|_| parse_err(line_no, format!("bad time '{}'", fields[0])))?;
                let i: usize = fields[1].parse().or_else(|_| parse_err(line_no, format!("bad index '{}'", fields[1])))?;
                let v: f64 = fields[2].parse().or_else(|_| parse_err(line_no, format!("bad value '{}'", fields[2])))?;
                if t >= fv || i >= mv {
                    return parse_err(line_no, format!("entry ({t}, {i}) outside {fv} frames of length {mv}"));
                }
                if !v.is_finite() {
                    return parse_err(line_no, "value is not finite");
                }
                out[t][i] = v;
            }
            _ => return parse_err(line_no, "expected header 'm <dim>' then 'frames <count>'"),
        }
    }
    if frames.is_none() {
        return parse_err(text.lines().count().max(1), "missing header");
    }
    Ok(out)
}
