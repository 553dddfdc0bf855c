//! File formats: CSV tables for bulk data, JSON manifests for metadata and
//! scalar reports. Floats are written with 17 significant digits so files
//! round-trip exactly and downstream plotting tools see full precision.

use crate::counting::CountingCurve;
use crate::encoding::{EncodedMeasure, EncodingRule};
use crate::spectra::{Atom, SpectralMeasure};
use crate::transforms::{HeatSample, ZetaValue};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// 17 significant digits, scientific; parses back to the identical f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Spectrum metadata manifest written next to a spectrum CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumManifest {
    pub label: String,
    pub dimension: Option<u32>,
    pub volume: Option<f64>,
    pub gamma_expected: Option<f64>,
    pub lambda_max: f64,
    pub generator: String,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

impl SpectrumManifest {
    pub fn from_measure(
        sm: &SpectralMeasure,
        generator: &str,
        params: BTreeMap<String, String>,
        seed: Option<u64>,
    ) -> Self {
        Self {
            label: sm.label.clone(),
            dimension: sm.dimension,
            volume: sm.volume,
            gamma_expected: sm.gamma_expected,
            lambda_max: sm.lambda_max,
            generator: generator.to_string(),
            params,
            seed,
        }
    }
}

pub fn write_spectrum_csv<W: Write>(mut w: W, sm: &SpectralMeasure) -> Result<()> {
    writeln!(w, "lambda,weight")?;
    for a in sm.atoms() {
        writeln!(w, "{},{}", fmt_float(a.lambda), fmt_float(a.weight))?;
    }
    Ok(())
}

/// Reads a `lambda,weight` CSV, enforcing the spectral-measure invariants
/// (strictly increasing eigenvalues, positive weights) at load time.
pub fn read_spectrum_csv<R: Read>(
    r: R,
    manifest: Option<&SpectrumManifest>,
) -> Result<SpectralMeasure> {
    let reader = BufReader::new(r);
    let mut atoms: Vec<Atom> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            if line != "lambda,weight" {
                return Err(Error::Parse(format!("bad spectrum header: {line}")));
            }
            continue;
        }
        let mut parts = line.split(',');
        let lambda: f64 = parse_field(parts.next(), lineno, "lambda")?;
        let weight: f64 = parse_field(parts.next(), lineno, "weight")?;
        atoms.push(Atom { lambda, weight });
    }
    let lambda_max = match manifest {
        Some(m) => m.lambda_max,
        None => atoms.last().map(|a| a.lambda).unwrap_or(0.0),
    };
    SpectralMeasure::new(
        atoms,
        manifest.and_then(|m| m.dimension),
        manifest.and_then(|m| m.volume),
        manifest.and_then(|m| m.gamma_expected),
        lambda_max,
        manifest.map(|m| m.label.clone()).unwrap_or_else(|| "imported".to_string()),
    )
}

fn parse_field(field: Option<&str>, lineno: usize, name: &str) -> Result<f64> {
    let raw = field
        .ok_or_else(|| Error::Parse(format!("line {}: missing {name}", lineno + 1)))?
        .trim();
    raw.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {}: bad {name} value '{raw}'", lineno + 1)))
}

pub fn write_encoded_csv<W: Write>(mut w: W, em: &EncodedMeasure) -> Result<()> {
    writeln!(w, "C,weight")?;
    for a in em.atoms() {
        writeln!(w, "{},{}", fmt_float(a.c), fmt_float(a.weight))?;
    }
    Ok(())
}

/// Manifest for an encoded measure; the rule is serialized with full
/// precision as `{type, params}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodingManifest {
    pub rule: EncodingRule,
    pub edge: f64,
    pub source_label: String,
    pub above_edge: bool,
}

pub fn write_counting_csv<W: Write>(mut w: W, curve: &CountingCurve) -> Result<()> {
    writeln!(w, "y,N,N_smoothed,rho")?;
    for s in &curve.samples {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_float(s.y),
            fmt_float(s.n),
            fmt_float(s.n_smoothed),
            fmt_float(s.rho)
        )?;
    }
    Ok(())
}

pub fn write_heat_csv<W: Write>(mut w: W, samples: &[HeatSample]) -> Result<()> {
    writeln!(w, "t,theta,tail_bound")?;
    for s in samples {
        writeln!(w, "{},{},{}", fmt_float(s.t), fmt_float(s.theta), fmt_float(s.truncation_bound))?;
    }
    Ok(())
}

pub fn write_zeta_csv<W: Write>(mut w: W, samples: &[ZetaValue]) -> Result<()> {
    writeln!(w, "u,value,tail_bound")?;
    for s in samples {
        writeln!(w, "{},{},{}", fmt_float(s.u), fmt_float(s.value), fmt_float(s.tail_bound))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("json encode: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
