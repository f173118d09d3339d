//! Parsers for the small textual specs accepted on the command line.

use std::ops::RangeInclusive;
use std::path::Path;

use wlerg_core::basis::WaveletIndex;
use wlerg_core::detection::hierarchical_sbm_kernel;
use wlerg_core::kernel::{from_erdos_renyi, from_two_block, BandCoefficients};

use crate::{read_input, CliError, CliResult};

fn floats(list: &str, what: &str) -> CliResult<Vec<f64>> {
    list.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Validation(format!("{what}: '{s}': {e}"))))
        .collect()
}

/// `er:p`, `two-block:pin,pout`, `hier:q0,...,qJ`, or a path to kernel JSON.
pub fn parse_kernel(spec: &str) -> CliResult<BandCoefficients> {
    if let Some((kind, rest)) = spec.split_once(':') {
        let vals = floats(rest, kind)?;
        let coeffs = match (kind, vals.as_slice()) {
            ("er", [p]) => from_erdos_renyi(*p)?,
            ("two-block", [p_in, p_out]) => from_two_block(*p_in, *p_out)?,
            ("hier", q) => hierarchical_sbm_kernel(q)?,
            ("er" | "two-block", _) => {
                return Err(CliError::Validation(format!("wrong number of parameters in kernel spec '{spec}'")))
            }
            _ => return Err(CliError::Validation(format!("unknown kernel family '{kind}'"))),
        };
        return Ok(coeffs);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Validation(format!("kernel spec '{spec}' is neither a family nor a file")));
    }
    Ok(BandCoefficients::from_json(&read_input(path)?)?)
}

/// `a..b` or a single scale `a`.
pub fn parse_scales(text: &str) -> CliResult<RangeInclusive<u32>> {
    let bad = || CliError::Validation(format!("bad scale range '{text}' (expected a..b)"));
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a, b),
        None => (text, text),
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

/// `j1:l1:j2:l2=v`, with `j = -1` for the constant atom.
pub fn parse_coef(text: &str) -> CliResult<(WaveletIndex, WaveletIndex, f64)> {
    let bad = |msg: &str| CliError::Validation(format!("bad coefficient '{text}': {msg}"));
    let (idx, v) = text.split_once('=').ok_or_else(|| bad("missing '='"))?;
    let parts: Vec<&str> = idx.split(':').collect();
    if parts.len() != 4 {
        return Err(bad("expected j1:l1:j2:l2"));
    }
    let j = |s: &str| s.trim().parse::<i64>().map_err(|e| bad(&e.to_string()));
    let l = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(&e.to_string()));
    let r = WaveletIndex::from_pair(j(parts[0])?, l(parts[1])?)?;
    let s = WaveletIndex::from_pair(j(parts[2])?, l(parts[3])?)?;
    let v: f64 = v.trim().parse().map_err(|e: std::num::ParseFloatError| bad(&e.to_string()))?;
    Ok((r, s, v))
}
