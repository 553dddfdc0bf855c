//! Heat traces, edge heat traces, spectral zeta values, the exact transfer
//! identities for affine encodings, and heat-coefficient extraction.
//!
//! Truncation tails are certified from the Weyl envelope
//! `N(Lambda) <= 2 gamma_d Lambda^{d/2}` for `Lambda >= lambda_max/2`
//! (the factor 2 is a safety margin over the asymptotic law).

use crate::encoding::{EncodedMeasure, EncodingRule};
use crate::spectra::SpectralMeasure;
use crate::{Error, Result};
use serde::Serialize;
use statrs::function::gamma::{gamma as gamma_fn, gamma_ur};

/// Certification state of a truncated-sum tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailStatus {
    /// Tail bound computed and below `1e-6 * value`.
    Certified,
    /// Tail bound computed but too large; the sample is not to be trusted.
    Unusable,
    /// No Weyl envelope available (missing gamma or dimension metadata).
    Unknown,
}

/// One heat-trace sample `Theta(t) = sum m_n exp(-t lambda_n)` with a
/// certified bound on the dropped tail.
#[derive(Debug, Clone, Serialize)]
pub struct HeatSample {
    pub t: f64,
    pub theta: f64,
    pub truncation_bound: f64,
    pub status: TailStatus,
}

const TAIL_USABLE_FRACTION: f64 = 1e-6;

/// Tail of `integral_{X}^{inf} e^{-t l} dN(l)` under `N <= 2 gamma l^{d/2}`:
/// integration by parts gives `2 gamma t^{-d/2} Gamma(d/2+1, tX)`.
fn heat_tail_bound(gamma: f64, d: u32, t: f64, lambda_max: f64) -> f64 {
    let s = d as f64 / 2.0 + 1.0;
    2.0 * gamma * t.powf(-(d as f64) / 2.0) * gamma_fn(s) * gamma_ur(s, t * lambda_max)
}

/// Truncated heat trace with certified tail control.
pub fn heat_trace(sm: &SpectralMeasure, t: f64) -> Result<HeatSample> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let theta: f64 = sm.atoms().iter().map(|a| a.weight * (-t * a.lambda).exp()).sum();
    let (bound, status) = match (sm.gamma_expected, sm.dimension) {
        (Some(g), Some(d)) => {
            let b = heat_tail_bound(g, d, t, sm.lambda_max);
            let st = if b <= TAIL_USABLE_FRACTION * theta {
                TailStatus::Certified
            } else {
                TailStatus::Unusable
            };
            (b, st)
        }
        _ => (f64::INFINITY, TailStatus::Unknown),
    };
    Ok(HeatSample { t, theta, truncation_bound: bound, status })
}

/// Edge heat trace `H_edge(s) = sum m_n exp(-s (edge - C_n))`. For affine
/// rules this equals `Theta(eps s)` exactly; tails are certified only then.
pub fn edge_heat(em: &EncodedMeasure, s: f64) -> Result<HeatSample> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
    }
    let theta: f64 =
        em.atoms().iter().map(|a| a.weight * (-s * (em.edge - a.c)).exp()).sum();
    let (bound, status) = match (em.rule, em.source.gamma_expected, em.source.dimension) {
        (EncodingRule::Affine { epsilon, .. }, Some(g), Some(d)) => {
            let b = heat_tail_bound(g, d, epsilon * s, em.source.lambda_max);
            let st = if b <= TAIL_USABLE_FRACTION * theta {
                TailStatus::Certified
            } else {
                TailStatus::Unusable
            };
            (b, st)
        }
        _ => (f64::INFINITY, TailStatus::Unknown),
    };
    Ok(HeatSample { t: s, theta, truncation_bound: bound, status })
}

/// One spectral-zeta sample `zeta(u) = sum_{lambda_n > 0} m_n lambda_n^{-u}`.
/// Zero modes are excluded (the sum diverges otherwise); their weight is
/// reported so the exclusion is visible in output metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ZetaValue {
    pub u: f64,
    pub value: f64,
    pub tail_bound: f64,
    pub status: TailStatus,
    pub excluded_weight: f64,
}

/// Rigorous tail under `N <= 2 gamma l^{d/2}`: integration by parts gives
/// `2 gamma u/(u - d/2) lambda_max^{d/2 - u}`.
fn zeta_tail_bound(gamma: f64, d: u32, u: f64, lambda_max: f64) -> f64 {
    let half_d = d as f64 / 2.0;
    2.0 * gamma * u / (u - half_d) * lambda_max.powf(half_d - u)
}

/// Truncated spectral zeta on the real half-line `u > d/2`.
pub fn zeta(sm: &SpectralMeasure, u: f64, tail_gamma: Option<f64>) -> Result<ZetaValue> {
    let d = sm
        .dimension
        .ok_or_else(|| Error::InvalidParameter("zeta needs the dimension metadata".into()))?;
    let half_d = d as f64 / 2.0;
    if !(u > half_d) {
        return Err(Error::Domain(format!("u = {u} is not above d/2 = {half_d}")));
    }
    let mut value = 0.0;
    let mut excluded = 0.0;
    for a in sm.atoms() {
        if a.lambda > 0.0 {
            value += a.weight * a.lambda.powf(-u);
        } else {
            excluded += a.weight;
        }
    }
    let gamma = tail_gamma.or(sm.gamma_expected);
    let (bound, status) = match gamma {
        Some(g) => {
            let b = zeta_tail_bound(g, d, u, sm.lambda_max);
            let st = if b <= TAIL_USABLE_FRACTION * value.abs() {
                TailStatus::Certified
            } else {
                TailStatus::Unusable
            };
            (b, st)
        }
        None => (f64::INFINITY, TailStatus::Unknown),
    };
    Ok(ZetaValue { u, value, tail_bound: bound, status, excluded_weight: excluded })
}

/// Edge zeta `sum m_n (edge - C_n)^{-u}` over atoms strictly below the
/// edge; equals `eps^{-u} zeta(u)` exactly for affine rules.
pub fn edge_zeta(em: &EncodedMeasure, u: f64) -> Result<f64> {
    if !em.rule.is_affine() {
        return Err(Error::NonAffineRule);
    }
    let d = em
        .source
        .dimension
        .ok_or_else(|| Error::InvalidParameter("edge_zeta needs the dimension metadata".into()))?;
    if !(u > d as f64 / 2.0) {
        return Err(Error::Domain(format!("u = {u} is not above d/2 = {}", d as f64 / 2.0)));
    }
    Ok(em
        .atoms()
        .iter()
        .filter(|a| a.c < em.edge)
        .map(|a| a.weight * (em.edge - a.c).powf(-u))
        .sum())
}

/// Least-squares extraction of the first two heat coefficients from
/// `(4 pi t)^{d/2} Theta(t) ~ a0 + a2 t` on a small-`t` grid.
#[derive(Debug, Clone, Serialize)]
pub struct SeeleyFit {
    pub a0_hat: f64,
    pub a2_hat: f64,
    #[serde(rename = "window")]
    pub fit_window: (f64, f64),
    pub residual_norm: f64,
}

fn seeley_fit_samples(samples: &[(f64, f64)], d: u32) -> Result<SeeleyFit> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} heat samples, need >= 3",
            samples.len()
        )));
    }
    let p = d as f64 / 2.0;
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(t, theta)| (t, (4.0 * std::f64::consts::PI * t).powf(p) * theta))
        .collect();
    let n = pts.len() as f64;
    let (mut st, mut stt, mut sz, mut stz) = (0.0, 0.0, 0.0, 0.0);
    for &(t, z) in &pts {
        st += t;
        stt += t * t;
        sz += z;
        stz += t * z;
    }
    let det = n * stt - st * st;
    if det.abs() <= 1e-12 * n * stt {
        return Err(Error::IllConditioned("heat-grid window is too narrow".into()));
    }
    let a2 = (n * stz - st * sz) / det;
    let a0 = (sz - a2 * st) / n;
    let residual_norm = (pts.iter().map(|&(t, z)| (z - a0 - a2 * t).powi(2)).sum::<f64>()
        / n)
        .sqrt();
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(0.0f64, f64::max);
    Ok(SeeleyFit { a0_hat: a0, a2_hat: a2, fit_window: (lo, hi), residual_norm })
}

/// Heat-coefficient fit on a spectral measure; every grid point must have a
/// certified tail.
pub fn seeley_fit(sm: &SpectralMeasure, t_grid: &[f64], d: u32) -> Result<SeeleyFit> {
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let hs = heat_trace(sm, t)?;
        if hs.status != TailStatus::Certified {
            return Err(Error::UncontrolledTail { t });
        }
        samples.push((t, hs.theta));
    }
    seeley_fit_samples(&samples, d)
}

/// Heat-coefficient fit on the edge side, from `H_edge(s)` samples.
pub fn seeley_fit_edge(em: &EncodedMeasure, s_grid: &[f64], d: u32) -> Result<SeeleyFit> {
    let mut samples = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let hs = edge_heat(em, s)?;
        if hs.status != TailStatus::Certified {
            return Err(Error::UncontrolledTail { t: s });
        }
        samples.push((s, hs.theta));
    }
    seeley_fit_samples(&samples, d)
}
