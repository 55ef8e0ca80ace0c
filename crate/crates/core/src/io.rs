//! Binary field and coefficient files.
//!
//! ```text
//! GDPEF1\n
//! d N1 ... Nd B\n            B in {P, Z}
//! N x (re: f64 LE, im: f64 LE), row-major
//! ```
//!
//! Coefficient files use the magic `GDPEC1`, carry a third header line
//! `b1 b2` with the declared bounds, and store `d*d` complex entries per site
//! (row-major within each block).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::coefficients::{CoefficientField, SpectralBounds};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Domain, LatticeField};
use crate::scalar::Real;

pub const FIELD_MAGIC: &str = "GDPEF1";
pub const COEFF_MAGIC: &str = "GDPEC1";

fn write_domain_line<W: Write>(w: &mut W, domain: &Domain) -> Result<()> {
    let extents: Vec<String> = domain.extents().iter().map(|n| n.to_string()).collect();
    writeln!(
        w,
        "{} {} {}",
        domain.dim(),
        extents.join(" "),
        domain.boundary().code()
    )?;
    Ok(())
}

fn write_values<W: Write, T: Real>(w: &mut W, values: &[Complex<T>]) -> Result<()> {
    for z in values {
        w.write_all(&z.re.to_f64_lossy().to_le_bytes())?;
        w.write_all(&z.im.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

pub fn write_field<W: Write, T: Real>(mut w: W, field: &LatticeField<T>) -> Result<()> {
    writeln!(w, "{FIELD_MAGIC}")?;
    write_domain_line(&mut w, field.domain())?;
    write_values(&mut w, field.values())?;
    w.flush()?;
    Ok(())
}

pub fn write_coefficients<W: Write, T: Real>(mut w: W, b: &CoefficientField<T>) -> Result<()> {
    writeln!(w, "{COEFF_MAGIC}")?;
    write_domain_line(&mut w, b.domain())?;
    let bounds = b.bounds();
    writeln!(w, "{} {}", bounds.lower.to_f64_lossy(), bounds.upper.to_f64_lossy())?;
    write_values(&mut w, b.as_slice())?;
    w.flush()?;
    Ok(())
}

fn read_line<R: BufRead>(r: &mut R, what: &str) -> Result<String> {
    let mut buf = Vec::new();
    r.read_until(b'\n', &mut buf)?;
    if buf.last() != Some(&b'\n') {
        return Err(Error::Format(format!("truncated header: missing {what}")));
    }
    buf.pop();
    String::from_utf8(buf).map_err(|_| Error::Format(format!("{what} is not ASCII")))
}

fn parse_domain_line(line: &str) -> Result<Domain> {
    let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
    let bad = || Error::Format(format!("malformed domain line {line:?}"));
    let d: usize = tokens.first().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    if tokens.len() != d + 2 {
        return Err(bad());
    }
    let extents = tokens[1..=d]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let boundary = Boundary::from_code(tokens[d + 1]).ok_or_else(bad)?;
    Domain::new(extents, boundary)
}

fn read_values<R: Read, T: Real>(r: &mut R, count: usize) -> Result<Vec<Complex<T>>> {
    let bytes = count
        .checked_mul(16)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let mut raw = Vec::new();
    r.take(bytes as u64 + 1).read_to_end(&mut raw)?;
    if raw.len() != bytes {
        return Err(Error::Format(format!(
            "expected {bytes} payload bytes, found {}{}",
            raw.len().min(bytes),
            if raw.len() > bytes { " plus trailing data" } else { "" }
        )));
    }
    Ok(raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect())
}

fn expect_magic<R: BufRead>(r: &mut R, magic: &str) -> Result<()> {
    let line = read_line(r, "magic")?;
    if line != magic {
        return Err(Error::Format(format!("expected magic {magic}, found {line:?}")));
    }
    Ok(())
}

pub fn read_field<R: BufRead, T: Real>(mut r: R) -> Result<LatticeField<T>> {
    expect_magic(&mut r, FIELD_MAGIC)?;
    let domain = parse_domain_line(&read_line(&mut r, "domain line")?)?;
    let values = read_values(&mut r, domain.len())?;
    LatticeField::new(domain, values)
}

pub fn read_coefficients<R: BufRead, T: Real>(mut r: R) -> Result<CoefficientField<T>> {
    expect_magic(&mut r, COEFF_MAGIC)?;
    let domain = parse_domain_line(&read_line(&mut r, "domain line")?)?;
    let line = read_line(&mut r, "bounds line")?;
    let parsed: Vec<f64> = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("malformed bounds line {line:?}")))?;
    let [lower, upper] = parsed[..] else {
        return Err(Error::Format(format!("malformed bounds line {line:?}")));
    };
    let bounds = SpectralBounds::new(T::lit(lower), T::lit(upper))?;
    let d = domain.dim();
    let values = read_values(&mut r, domain.len() * d * d)?;
    CoefficientField::new(domain, values, bounds)
}

pub fn save_field<T: Real>(path: impl AsRef<Path>, field: &LatticeField<T>) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field)
}

pub fn load_field<T: Real>(path: impl AsRef<Path>) -> Result<LatticeField<T>> {
    read_field(BufReader::new(File::open(path)?))
}

pub fn save_coefficients<T: Real>(path: impl AsRef<Path>, b: &CoefficientField<T>) -> Result<()> {
    write_coefficients(BufWriter::new(File::create(path)?), b)
}

pub fn load_coefficients<T: Real>(path: impl AsRef<Path>) -> Result<CoefficientField<T>> {
    read_coefficients(BufReader::new(File::open(path)?))
}
