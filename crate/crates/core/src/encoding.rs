//! Monotone spectral encodings `C = a - phi(lambda)` and their numerical
//! inversion `Lambda(C)`.
//!
//! Three families: the affine rule `C = pi - eps*lambda`, polynomial-type
//! rules `C = a - b lambda^k L(lambda)` with a slowly varying factor `L`,
//! and perturbed-affine rules `C = pi - eps*lambda + delta(lambda)`.
//! Non-affine rules are validated for strict decrease on the support of the
//! measure being encoded (atoms plus a dense log-spaced probe grid).

use crate::spectra::SpectralMeasure;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Probe-grid size for monotonicity validation.
const PROBE_POINTS: usize = 1024;

/// `ln(e x)` for `x >= 1`, floored at 1 below (keeps the slowly varying
/// factors evaluable on all of `[0, infinity)`).
pub(crate) fn log_shifted(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else {
        1.0 + x.ln()
    }
}

/// `ln(ln(e^e x))` for `x >= 1`, floored at 1 below.
pub(crate) fn loglog_shifted(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else {
        (E + x.ln()).ln()
    }
}

/// Slowly varying factor `L(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SlowVariation {
    /// `L = ell_inf` constant.
    Const { ell_inf: f64 },
    /// `L(x) = (log(e x))^alpha`; decaying direction is `alpha < 0`.
    LogPower { alpha: f64 },
    /// `L(x) = (log(e x))^alpha (log log(e^e x))^beta`.
    LogLogPower { alpha: f64, beta: f64 },
}

impl SlowVariation {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowVariation::Const { ell_inf } => ell_inf,
            SlowVariation::LogPower { alpha } => log_shifted(x).powf(alpha),
            SlowVariation::LogLogPower { alpha, beta } => {
                log_shifted(x).powf(alpha) * loglog_shifted(x).powf(beta)
            }
        }
    }

    /// True when `L(x) -> 0` as `x -> infinity`.
    pub fn decays_to_zero(&self) -> bool {
        match *self {
            SlowVariation::Const { .. } => false,
            SlowVariation::LogPower { alpha } => alpha < 0.0,
            SlowVariation::LogLogPower { alpha, beta } => {
                alpha < 0.0 || (alpha == 0.0 && beta < 0.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let SlowVariation::Const { ell_inf } = *self {
            if !(ell_inf > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "constant slow factor must be positive, got {ell_inf}"
                )));
            }
        }
        Ok(())
    }
}

/// Admissible perturbation `delta(lambda)` of the affine rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum PerturbationSpec {
    /// `delta = lambda / (log(e lambda))^alpha`, `alpha > 0`.
    LogDistortion { alpha: f64 },
    /// `delta = lambda / ((log(e lambda))^alpha (log log(e^e lambda))^beta)`.
    IterLog { alpha: f64, beta: f64 },
    /// `delta = lambda L(lambda)` with `L -> 0`.
    SlowFactor { l: SlowVariation },
    /// `delta = c` constant.
    BoundedOffset { c: f64 },
    /// `delta = (log(e lambda))^beta`, `0 < beta < 1`.
    SubLog { beta: f64 },
    /// `delta = lambda L(lambda) (1 + theta(lambda))` with
    /// `theta = theta_amp / (1 + log(e lambda))^theta_rate`.
    OscBV { l: SlowVariation, theta_amp: f64, theta_rate: f64 },
    /// `delta = lambda^q`, `0 < q < 1` (sublinear power, outside RV_0).
    SubPower { q: f64 },
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbationSpec::LogDistortion { alpha } => {
                if !(alpha > 0.0) {
                    return Err(Error::InvalidParameter("LogDistortion needs alpha > 0".into()));
                }
            }
            PerturbationSpec::IterLog { alpha, .. } => {
                if !(alpha > 0.0) {
                    return Err(Error::InvalidParameter("IterLog needs alpha > 0".into()));
                }
            }
            PerturbationSpec::SlowFactor { l } => {
                l.validate()?;
                if !l.decays_to_zero() {
                    return Err(Error::InvalidParameter(
                        "SlowFactor needs a slowly varying factor with L -> 0".into(),
                    ));
                }
            }
            PerturbationSpec::BoundedOffset { .. } => {}
            PerturbationSpec::SubLog { beta } => {
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::InvalidParameter("SubLog needs beta in (0, 1)".into()));
                }
            }
            PerturbationSpec::OscBV { l, theta_rate, .. } => {
                l.validate()?;
                if !l.decays_to_zero() {
                    return Err(Error::InvalidParameter(
                        "OscBV needs a slowly varying factor with L -> 0".into(),
                    ));
                }
                if !(theta_rate > 0.0) {
                    return Err(Error::InvalidParameter("OscBV needs theta_rate > 0".into()));
                }
            }
            PerturbationSpec::SubPower { q } => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidParameter("SubPower needs q in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    /// `delta(lambda)`.
    pub fn delta(&self, lambda: f64) -> f64 {
        match *self {
            PerturbationSpec::LogDistortion { alpha } => lambda / log_shifted(lambda).powf(alpha),
            PerturbationSpec::IterLog { alpha, beta } => {
                lambda / (log_shifted(lambda).powf(alpha) * loglog_shifted(lambda).powf(beta))
            }
            PerturbationSpec::SlowFactor { l } => lambda * l.eval(lambda),
            PerturbationSpec::BoundedOffset { c } => c,
            PerturbationSpec::SubLog { beta } => log_shifted(lambda).powf(beta),
            PerturbationSpec::OscBV { l, theta_amp, theta_rate } => {
                let theta = theta_amp / (1.0 + log_shifted(lambda)).powf(theta_rate);
                lambda * l.eval(lambda) * (1.0 + theta)
            }
            PerturbationSpec::SubPower { q } => lambda.powf(q),
        }
    }

    /// Relative-error envelope `eta` of the inversion, per family:
    /// evaluated at `x = y/eps` except for `BoundedOffset`, whose error
    /// scale is `1/y` directly.
    pub fn envelope(&self, y: f64, epsilon: f64) -> f64 {
        let x = y / epsilon;
        match *self {
            PerturbationSpec::LogDistortion { alpha } => log_shifted(x).powf(-alpha),
            PerturbationSpec::IterLog { alpha, beta } => {
                log_shifted(x).powf(-alpha) * loglog_shifted(x).powf(-beta)
            }
            PerturbationSpec::SlowFactor { l } => l.eval(x).abs(),
            PerturbationSpec::BoundedOffset { .. } => 1.0 / y,
            PerturbationSpec::SubLog { beta } => log_shifted(x).powf(beta - 1.0),
            PerturbationSpec::OscBV { l, .. } => l.eval(x).abs(),
            PerturbationSpec::SubPower { q } => x.powf(q - 1.0),
        }
    }
}

/// A monotone encoding rule `lambda -> C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params")]
pub enum EncodingRule {
    Affine { a: f64, epsilon: f64 },
    PolyType { a: f64, b: f64, k: f64, l: SlowVariation },
    Perturbed { epsilon: f64, delta: PerturbationSpec },
}

impl EncodingRule {
    /// The canonical affine rule `C = pi - eps*lambda`.
    pub fn affine(epsilon: f64) -> Self {
        EncodingRule::Affine { a: PI, epsilon }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, EncodingRule::Affine { .. })
    }

    /// Upper edge `a` of the encoded measure.
    pub fn edge(&self) -> f64 {
        match *self {
            EncodingRule::Affine { a, .. } | EncodingRule::PolyType { a, .. } => a,
            EncodingRule::Perturbed { .. } => PI,
        }
    }

    /// Scale parameter for bulk normalizations (`eps` for affine/perturbed,
    /// `b` for polynomial-type rules).
    pub fn scale(&self) -> f64 {
        match *self {
            EncodingRule::Affine { epsilon, .. } | EncodingRule::Perturbed { epsilon, .. } => {
                epsilon
            }
            EncodingRule::PolyType { b, .. } => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EncodingRule::Affine { epsilon, .. } => {
                if !(epsilon > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "epsilon must be positive, got {epsilon}"
                    )));
                }
            }
            EncodingRule::PolyType { b, k, l, .. } => {
                if !(b > 0.0) {
                    return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
                }
                if !(k > 0.0) {
                    return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
                }
                l.validate()?;
            }
            EncodingRule::Perturbed { epsilon, delta } => {
                if !(epsilon > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "epsilon must be positive, got {epsilon}"
                    )));
                }
                delta.validate()?;
            }
        }
        Ok(())
    }

    /// `C(lambda)`.
    pub fn apply(&self, lambda: f64) -> f64 {
        match *self {
            EncodingRule::Affine { a, epsilon } => a - epsilon * lambda,
            EncodingRule::PolyType { a, b, k, l } => a - b * lambda.powf(k) * l.eval(lambda),
            EncodingRule::Perturbed { epsilon, delta } => {
                PI - epsilon * lambda + delta.delta(lambda)
            }
        }
    }

    /// Strict-decrease validation on the support of `measure`: all atom
    /// pairs plus `PROBE_POINTS` log-spaced probes on
    /// `[lambda_min + 1, lambda_max]`.
    pub fn validate_monotone(&self, measure: &SpectralMeasure) -> Result<()> {
        self.validate()?;
        if self.is_affine() {
            return Ok(());
        }
        let atoms = measure.atoms();
        for w in atoms.windows(2) {
            if !(self.apply(w[0].lambda) > self.apply(w[1].lambda)) {
                return Err(Error::MonotonicityViolation { lambda: w[1].lambda });
            }
        }
        let lo = atoms.first().map(|a| a.lambda).unwrap_or(0.0) + 1.0;
        let hi = measure.lambda_max;
        if hi > lo {
            let grid = crate::log_spaced(lo, hi, PROBE_POINTS);
            for w in grid.windows(2) {
                if !(self.apply(w[0]) > self.apply(w[1])) {
                    return Err(Error::MonotonicityViolation { lambda: w[1] });
                }
            }
        }
        Ok(())
    }
}

/// One atom of an encoded measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedAtom {
    pub c: f64,
    pub weight: f64,
}

/// Metadata carried over from the source spectral measure.
#[derive(Debug, Clone)]
pub struct SourceMeta {
    pub label: String,
    pub dimension: Option<u32>,
    pub volume: Option<f64>,
    pub gamma_expected: Option<f64>,
    pub lambda_max: f64,
}

/// Pushforward of a spectral measure under an encoding rule; atoms sorted
/// strictly decreasing in `C`.
#[derive(Debug, Clone)]
pub struct EncodedMeasure {
    atoms: Vec<EncodedAtom>,
    cum: Vec<f64>,
    pub rule: EncodingRule,
    pub edge: f64,
    pub source: SourceMeta,
    /// True when some atom encodes above the edge (possible under
    /// `BoundedOffset` with `c > 0`); such atoms are retained.
    pub above_edge: bool,
}

impl EncodedMeasure {
    /// Atoms in strictly decreasing `C`.
    pub fn atoms(&self) -> &[EncodedAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.rule.scale()
    }

    /// Mass of atoms with `C_n >= c`.
    pub fn mass_from(&self, c: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| a.c >= c);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Mass of the `k` atoms nearest the edge (largest `C`, smallest `y`).
    pub fn mass_nearest_edge(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// Edge distances `y_n = edge - C_n`, ascending.
    pub fn edge_distances(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| self.edge - a.c).collect()
    }
}

/// Pushforward of `measure` under `rule`. Weights are preserved exactly;
/// the order reverses.
pub fn encode(measure: &SpectralMeasure, rule: &EncodingRule) -> Result<EncodedMeasure> {
    rule.validate_monotone(measure)?;
    let edge = rule.edge();
    // ascending lambda maps to strictly descending C
    let atoms: Vec<EncodedAtom> = measure
        .atoms()
        .iter()
        .map(|a| EncodedAtom { c: rule.apply(a.lambda), weight: a.weight })
        .collect();
    for (i, w) in atoms.windows(2).enumerate() {
        if !(w[0].c > w[1].c) {
            // distinct eigenvalues collapsed to one encoded point
            return Err(Error::MonotonicityViolation {
                lambda: measure.atoms()[i + 1].lambda,
            });
        }
    }
    let above_edge = atoms.first().map(|a| a.c > edge).unwrap_or(false);
    let mut cum = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for a in &atoms {
        acc += a.weight;
        cum.push(acc);
    }
    Ok(EncodedMeasure {
        atoms,
        cum,
        rule: *rule,
        edge,
        source: SourceMeta {
            label: measure.label.clone(),
            dimension: measure.dimension,
            volume: measure.volume,
            gamma_expected: measure.gamma_expected,
            lambda_max: measure.lambda_max,
        },
        above_edge,
    })
}

/// Cap for bracket expansion in numeric inversion.
const INVERT_LAMBDA_CAP: f64 = 1e15;

/// Inverse `Lambda(C)` of a validated monotone rule: closed form where
/// available, bracketed bisection otherwise. The result satisfies
/// `|rule(Lambda) - C| <= 1e-10 * max(1, |C|)`.
pub fn invert_rule(rule: &EncodingRule, c: f64) -> Result<f64> {
    rule.validate()?;
    match *rule {
        EncodingRule::Affine { a, epsilon } => {
            if c > a {
                return Err(Error::Domain(format!("C = {c} above the edge {a}")));
            }
            Ok((a - c) / epsilon)
        }
        EncodingRule::Perturbed { epsilon, delta: PerturbationSpec::BoundedOffset { c: off } } => {
            let lambda = (PI - c + off) / epsilon;
            if lambda < 0.0 {
                return Err(Error::Domain(format!("C = {c} above rule(0)")));
            }
            Ok(lambda)
        }
        _ => {
            let c0 = rule.apply(0.0);
            if c >= c0 {
                return Err(Error::Domain(format!("C = {c} not below rule(0) = {c0}")));
            }
            let tol = 1e-10 * c.abs().max(1.0);
            // expand until the decreasing rule passes below c
            let mut hi = match *rule {
                EncodingRule::PolyType { a, b, k, .. } => ((a - c).max(1.0) / b).powf(1.0 / k),
                _ => (rule.edge() - c).max(1.0) / rule.scale(),
            }
            .max(1.0);
            let mut guard = 0;
            while rule.apply(hi) > c {
                hi *= 2.0;
                guard += 1;
                if hi > INVERT_LAMBDA_CAP || guard > 200 {
                    return Err(Error::BracketFailure { cap: INVERT_LAMBDA_CAP });
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = rule.apply(mid);
                if fm > c {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo) <= f64::EPSILON * hi.abs() {
                    break;
                }
            }
            let lambda = 0.5 * (lo + hi);
            if (rule.apply(lambda) - c).abs() <= tol {
                Ok(lambda)
            } else {
                Err(Error::BracketFailure { cap: hi })
            }
        }
    }
}

/// Theoretical relative-error envelope for a perturbed rule at edge
/// distance `y` (see [`PerturbationSpec::envelope`]).
pub fn theoretical_envelope(rule: &EncodingRule, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::InvalidParameter(format!("y must be positive, got {y}")));
    }
    match *rule {
        EncodingRule::Perturbed { epsilon, delta } => Ok(delta.envelope(y, epsilon)),
        _ => Err(Error::UnsupportedFamily),
    }
}
