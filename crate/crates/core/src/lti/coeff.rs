//! Plain-text coefficient files.
//!
//! Transfer function:
//! ```text
//! tf <sample_time> <pure_delay> <n_num> <n_den>
//! <numerator coefficients, one per line>
//! <denominator coefficients, one per line>
//! ```
//! FIR kernel:
//! ```text
//! fir <sample_time> <forward_shift> <n_taps>
//! <taps, one per line>
//! ```
//! Values are written with shortest round-trip formatting, so a write/read
//! cycle reproduces every coefficient bit for bit.

use super::{DiscreteTransferFunction, FirKernel};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub fn format_tf(tf: &DiscreteTransferFunction) -> String {
    let mut s = format!(
        "tf {} {} {} {}\n",
        tf.sample_time(),
        tf.pure_delay(),
        tf.numerator().len(),
        tf.denominator().len()
    );
    for c in tf.numerator().iter().chain(tf.denominator()) {
        let _ = writeln!(s, "{c}");
    }
    s
}

pub fn format_fir(kernel: &FirKernel, sample_time: f64) -> String {
    let mut s = format!(
        "fir {} {} {}\n",
        sample_time,
        kernel.forward_shift(),
        kernel.taps().len()
    );
    for c in kernel.taps() {
        let _ = writeln!(s, "{c}");
    }
    s
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_tf(text: &str, origin: &Path) -> Result<DiscreteTransferFunction> {
    let mut lines = tokens(text);
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::parse(origin, "empty file"))?
        .split_whitespace()
        .collect();
    if header.len() != 5 || header[0] != "tf" {
        return Err(Error::parse(origin, "expected header `tf <Ts> <delay> <n_num> <n_den>`"));
    }
    let bad = |what: &str| Error::parse(origin, format!("bad {what} in header"));
    let ts: f64 = header[1].parse().map_err(|_| bad("sample time"))?;
    let delay: usize = header[2].parse().map_err(|_| bad("delay"))?;
    let nn: usize = header[3].parse().map_err(|_| bad("numerator length"))?;
    let nd: usize = header[4].parse().map_err(|_| bad("denominator length"))?;
    let coeffs = parse_values(lines, nn + nd, origin)?;
    DiscreteTransferFunction::new(coeffs[..nn].to_vec(), coeffs[nn..].to_vec(), delay, ts)
}

pub fn parse_fir(text: &str, origin: &Path) -> Result<(FirKernel, f64)> {
    let mut lines = tokens(text);
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::parse(origin, "empty file"))?
        .split_whitespace()
        .collect();
    if header.len() != 4 || header[0] != "fir" {
        return Err(Error::parse(origin, "expected header `fir <Ts> <shift> <n_taps>`"));
    }
    let bad = |what: &str| Error::parse(origin, format!("bad {what} in header"));
    let ts: f64 = header[1].parse().map_err(|_| bad("sample time"))?;
    let shift: usize = header[2].parse().map_err(|_| bad("forward shift"))?;
    let n: usize = header[3].parse().map_err(|_| bad("tap count"))?;
    let taps = parse_values(lines, n, origin)?;
    let symmetric = n % 2 == 1 && shift == n / 2;
    let kernel = match symmetric {
        true => FirKernel::zero_phase(taps.clone()).or_else(|_| FirKernel::new(taps, shift))?,
        false => FirKernel::new(taps, shift)?,
    };
    Ok((kernel, ts))
}

pub(crate) fn parse_values<'a>(
    lines: impl Iterator<Item = &'a str>,
    expected: usize,
    origin: &Path,
) -> Result<Vec<f64>> {
    let values = lines
        .map(|l| l.parse::<f64>().map_err(|_| Error::parse(origin, format!("bad coefficient `{l}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            origin,
            format!("expected {expected} coefficients, found {}", values.len()),
        ));
    }
    Ok(values)
}

pub fn write_tf_file(path: &Path, tf: &DiscreteTransferFunction) -> Result<()> {
    std::fs::write(path, format_tf(tf)).map_err(|e| Error::io(path, e))
}

pub fn read_tf_file(path: &Path) -> Result<DiscreteTransferFunction> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tf(&text, path)
}

pub fn write_fir_file(path: &Path, kernel: &FirKernel, sample_time: f64) -> Result<()> {
    std::fs::write(path, format_fir(kernel, sample_time)).map_err(|e| Error::io(path, e))
}

pub fn read_fir_file(path: &Path) -> Result<(FirKernel, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fir(&text, path)
}
