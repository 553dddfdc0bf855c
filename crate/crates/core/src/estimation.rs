//! Tauberian estimators: dimension and Weyl constant from bulk edge-variable
//! counting data, encoding exponent `k`, remainder orders, two-term boundary
//! fits, and perturbation stability reports.
//!
//! All slope fits are unweighted OLS in log-log space; `r_squared` is
//! reported so callers can reject bad fits. Fit windows are caller-chosen
//! (window choice is the main bias knob), defaulting to the top decade of
//! available `y`.

use crate::counting::{smoothed_curve, CountingCurve, MollifierSpec};
use crate::encoding::{encode, invert_rule, theoretical_envelope, EncodingRule};
use crate::spectra::SpectralMeasure;
use crate::{log_spaced, Error, Result};
use serde::Serialize;

/// Local log-log slope over a window.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeEstimate {
    pub alpha_hat: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

/// OLS of `log N` against `log y` over samples inside `window`.
pub fn loglog_slope(samples: &[(f64, f64)], window: (f64, f64)) -> Result<SlopeEstimate> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("bad window ({lo}, {hi})")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(y, n) in samples {
        if y < lo || y > hi {
            continue;
        }
        if !(n > 0.0) {
            return Err(Error::InsufficientData(format!("nonpositive N = {n} at y = {y}")));
        }
        xs.push(y.ln());
        ys.push(n.ln());
    }
    let m = xs.len();
    if m < 3 {
        return Err(Error::InsufficientData(format!("{m} samples inside window, need >= 3")));
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("window collapses to a single abscissa".into()));
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + alpha * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot <= 1e-30 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeEstimate { alpha_hat: alpha, intercept, window, r_squared, n_points: m })
}

/// Dimension and Weyl-constant estimate: `d = 2 alpha`,
/// `gamma = eps^{d/2} * geometric mean of N / y^{d/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct WeylEstimate {
    pub d_hat: f64,
    pub gamma_hat: f64,
    pub slope: SlopeEstimate,
    pub epsilon: f64,
    /// Nearest integer dimension and its absolute deviation (convenience).
    pub d_nearest: i64,
    pub d_deviation: f64,
}

pub fn estimate_weyl(
    curve: &CountingCurve,
    epsilon: f64,
    window: (f64, f64),
) -> Result<WeylEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let slope = loglog_slope(&curve.raw_pairs(), window)?;
    let d_hat = 2.0 * slope.alpha_hat;
    // geometric mean of N / y^{alpha} equals exp(intercept) for OLS
    let gamma_hat = epsilon.powf(slope.alpha_hat) * slope.intercept.exp();
    let d_nearest = d_hat.round() as i64;
    Ok(WeylEstimate {
        d_hat,
        gamma_hat,
        epsilon,
        d_nearest,
        d_deviation: (d_hat - d_nearest as f64).abs(),
        slope,
    })
}

/// Encoding-exponent estimate `k = d / (2 alpha)` from a counting curve in
/// the bulk variable `x = a - C`.
#[derive(Debug, Clone, Serialize)]
pub struct KEstimate {
    pub k_hat: f64,
    pub slope: SlopeEstimate,
}

pub fn estimate_k(curve: &CountingCurve, d: u32, window: (f64, f64)) -> Result<KEstimate> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    let slope = loglog_slope(&curve.raw_pairs(), window)?;
    if !(slope.alpha_hat > 0.0) {
        return Err(Error::InsufficientData(format!(
            "nonpositive counting exponent {}",
            slope.alpha_hat
        )));
    }
    Ok(KEstimate { k_hat: d as f64 / (2.0 * slope.alpha_hat), slope })
}

/// Log-log slope of the residual `|N(y) - gamma eps^{-d/2} y^{d/2}|`.
pub fn remainder_probe(
    curve: &CountingCurve,
    d: u32,
    gamma: f64,
    epsilon: f64,
    window: (f64, f64),
) -> Result<SlopeEstimate> {
    let p = d as f64 / 2.0;
    let lead = gamma * epsilon.powf(-p);
    let mut resid: Vec<(f64, f64)> = Vec::new();
    let mut n_scale = 0.0f64;
    for s in &curve.samples {
        if s.y < window.0 || s.y > window.1 {
            continue;
        }
        n_scale = n_scale.max(s.n.abs());
        resid.push((s.y, (s.n - lead * s.y.powf(p)).abs()));
    }
    let floor = 1e-12 * n_scale.max(1.0);
    let live: Vec<(f64, f64)> = resid.iter().copied().filter(|&(_, r)| r > floor).collect();
    if live.len() < 3 {
        return Err(Error::DegenerateResidual);
    }
    loglog_slope(&live, window)
}

/// Two-term least squares `N ~ A y^{3/2} + B y` (boundary case, d = 3).
#[derive(Debug, Clone, Serialize)]
pub struct TwoTermFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
}

pub fn two_term_fit(curve: &CountingCurve, window: (f64, f64)) -> Result<TwoTermFit> {
    let pts: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .filter(|s| s.y >= window.0 && s.y <= window.1)
        .map(|s| (s.y, s.n))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} samples inside window, need >= 10",
            pts.len()
        )));
    }
    // normal equations for basis {y^{3/2}, y}
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(y, n) in &pts {
        let f1 = y.powf(1.5);
        let f2 = y;
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        b1 += f1 * n;
        b2 += f2 * n;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return Err(Error::IllConditioned("two-term window is too narrow".into()));
    }
    let a = (b1 * s22 - b2 * s12) / det;
    let b = (s11 * b2 - s12 * b1) / det;
    let mean_n = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_n).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|&(y, n)| (n - a * y.powf(1.5) - b * y).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-30 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(TwoTermFit { a, b, r_squared })
}

/// Stability report for a perturbed encoding: the recovered dimension plus
/// the fitted envelope constant of the inversion error
/// `|Lambda(C) / (y/eps) - 1| <= K eta(y/eps)`.
///
/// The envelope constant is measured on the inverse map itself; the
/// counting-side deviation from the leading Weyl term is reported
/// separately as `max_counting_dev` (it carries the geometry's own Weyl
/// remainder on top of the perturbation effect).
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub d_hat: f64,
    pub gamma_hat: f64,
    pub envelope_k: f64,
    pub max_counting_dev: Option<f64>,
    pub r_squared: f64,
}

/// Fitted envelope constant of the inversion error over a grid of edge
/// distances: `max |Lambda(edge - y)/(y/eps) - 1| / eta(y/eps)`.
pub fn envelope_constant(rule: &EncodingRule, edge: f64, y_grid: &[f64]) -> Result<f64> {
    let EncodingRule::Perturbed { epsilon, .. } = *rule else {
        return Err(Error::InvalidParameter("envelope constant needs a perturbed rule".into()));
    };
    let mut envelope_k = 0.0f64;
    for &y in y_grid {
        let lambda = invert_rule(rule, edge - y)?;
        let eta = theoretical_envelope(rule, y)?;
        let dev = (lambda / (y / epsilon) - 1.0).abs();
        if eta > 0.0 {
            envelope_k = envelope_k.max(dev / eta);
        }
    }
    Ok(envelope_k)
}

pub fn stability_report(
    sm: &SpectralMeasure,
    rule: &EncodingRule,
    window: (f64, f64),
    n_points: usize,
) -> Result<StabilityReport> {
    let EncodingRule::Perturbed { epsilon, .. } = *rule else {
        return Err(Error::InvalidParameter("stability_report needs a perturbed rule".into()));
    };
    if n_points < 8 {
        return Err(Error::InvalidParameter("n_points must be >= 8".into()));
    }
    let em = encode(sm, rule)?;
    let grid = log_spaced(window.0, window.1, n_points);
    let moll = MollifierSpec::new(1.0, 0.5)?;
    let curve = smoothed_curve(&em, &grid, moll)?;
    let est = estimate_weyl(&curve, epsilon, window)?;
    let envelope_k = envelope_constant(rule, em.edge, &grid)?;

    let max_counting_dev = match (sm.gamma_expected, sm.dimension) {
        (Some(gamma), Some(d)) => {
            let p = d as f64 / 2.0;
            let lead = gamma * epsilon.powf(-p);
            Some(
                curve
                    .samples
                    .iter()
                    .map(|s| (s.n / (lead * s.y.powf(p)) - 1.0).abs())
                    .fold(0.0f64, f64::max),
            )
        }
        _ => None,
    };

    Ok(StabilityReport {
        d_hat: est.d_hat,
        gamma_hat: est.gamma_hat,
        envelope_k,
        max_counting_dev,
        r_squared: est.slope.r_squared,
    })
}

/// Default fit window: the top decade of available `y`.
pub fn default_window(curve: &CountingCurve) -> (f64, f64) {
    let hi = curve.y_max();
    (hi / 10.0, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::CurveSample;
    use crate::encoding::{PerturbationSpec, SlowVariation};
    use crate::spectra::{sphere_spectrum, synthetic_spectrum, RemainderModel, SyntheticWeyl};
    use approx::assert_relative_eq;

    fn curve_from_pairs(pairs: Vec<(f64, f64)>) -> CountingCurve {
        CountingCurve {
            samples: pairs
                .into_iter()
                .map(|(y, n)| CurveSample { y, n, n_smoothed: n, rho: 0.0 })
                .collect(),
            epsilon: 1.0,
            mollifier: MollifierSpec::new(1.0, 0.5).unwrap(),
        }
    }

    fn s3_curve(lambda_max: f64, eps: f64, window: (f64, f64), n: usize) -> CountingCurve {
        let sm = sphere_spectrum(3, lambda_max).unwrap();
        let em = encode(&sm, &EncodingRule::affine(eps)).unwrap();
        let grid = log_spaced(window.0, window.1, n);
        smoothed_curve(&em, &grid, MollifierSpec::new(1.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn slope_recovers_exact_power_law() {
        let pairs: Vec<(f64, f64)> =
            log_spaced(1.0, 1e3, 20).into_iter().map(|y| (y, 2.0 * y.powf(1.5))).collect();
        let est = loglog_slope(&pairs, (1.0, 1e3)).unwrap();
        assert_relative_eq!(est.alpha_hat, 1.5, epsilon = 1e-12);
        assert_relative_eq!(est.intercept, 2f64.ln(), epsilon = 1e-12);
        assert!(est.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn slope_of_constant_is_zero() {
        let pairs: Vec<(f64, f64)> = log_spaced(1.0, 100.0, 10).into_iter().map(|y| (y, 7.0)).collect();
        let est = loglog_slope(&pairs, (1.0, 100.0)).unwrap();
        assert_relative_eq!(est.alpha_hat, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn slope_errors() {
        let pairs = vec![(1.0, 1.0), (2.0, 2.0)];
        assert!(matches!(loglog_slope(&pairs, (0.5, 3.0)), Err(Error::InsufficientData(_))));
        let bad = vec![(1.0, 1.0), (2.0, 0.0), (3.0, 3.0)];
        assert!(matches!(loglog_slope(&bad, (0.5, 4.0)), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn s3_counting_slope_in_window() {
        let curve = s3_curve(2e4, 1.0, (1e3, 1e4), 300);
        let est = loglog_slope(&curve.raw_pairs(), (1e3, 1e4)).unwrap();
        assert!((1.49..=1.51).contains(&est.alpha_hat), "alpha {}", est.alpha_hat);
    }

    #[test]
    fn weyl_estimate_exact_inputs() {
        // N = (1/3) eps^{-3/2} y^{3/2} with eps = 1
        let pairs: Vec<(f64, f64)> =
            log_spaced(10.0, 1e4, 40).into_iter().map(|y| (y, y.powf(1.5) / 3.0)).collect();
        let est = estimate_weyl(&curve_from_pairs(pairs), 1.0, (10.0, 1e4)).unwrap();
        assert_relative_eq!(est.d_hat, 3.0, epsilon = 1e-11);
        assert_relative_eq!(est.gamma_hat, 1.0 / 3.0, max_relative = 1e-11);
        assert_eq!(est.d_nearest, 3);

        // N = y/4 with eps = 4, d = 2: gamma = 4 * (1/4) = 1
        let pairs: Vec<(f64, f64)> =
            log_spaced(10.0, 1e4, 40).into_iter().map(|y| (y, y / 4.0)).collect();
        let est = estimate_weyl(&curve_from_pairs(pairs), 4.0, (10.0, 1e4)).unwrap();
        assert_relative_eq!(est.d_hat, 2.0, epsilon = 1e-11);
        assert_relative_eq!(est.gamma_hat, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn weyl_estimate_on_s3() {
        let curve = s3_curve(2e4, 1.0, (1e3, 1e4), 300);
        let est = estimate_weyl(&curve, 1.0, (1e3, 1e4)).unwrap();
        assert!((2.98..=3.02).contains(&est.d_hat), "d_hat {}", est.d_hat);
        assert!((0.32..=0.35).contains(&est.gamma_hat), "gamma_hat {}", est.gamma_hat);
    }

    #[test]
    fn gamma_hat_invariant_under_joint_rescaling() {
        // exact power-law input sampled at the atoms of a synthetic measure
        let spec = SyntheticWeyl { d: 2, gamma: 1.0, remainder: RemainderModel::None, seed: 0 };
        let sm = synthetic_spectrum(&spec, 3e3).unwrap();
        let mut gammas = Vec::new();
        let mut ds = Vec::new();
        for eps in [0.5, 1.0, 2.0] {
            let pairs: Vec<(f64, f64)> = sm
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| (eps * a.lambda, (i + 1) as f64))
                .collect();
            let window = (eps * 100.0, eps * 2e3);
            let est = estimate_weyl(&curve_from_pairs(pairs), eps, window).unwrap();
            gammas.push(est.gamma_hat);
            ds.push(est.d_hat);
        }
        for g in &gammas {
            assert_relative_eq!(*g, gammas[0], max_relative = 1e-6);
        }
        for d in &ds {
            assert!((d - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn k_estimate_exact_and_poly() {
        // exact N(a - x) = x^{3/4} with d = 3 gives k = 2
        let pairs: Vec<(f64, f64)> =
            log_spaced(1.0, 1e4, 30).into_iter().map(|x| (x, x.powf(0.75))).collect();
        let est = estimate_k(&curve_from_pairs(pairs), 3, (1.0, 1e4)).unwrap();
        assert_relative_eq!(est.k_hat, 2.0, epsilon = 1e-10);

        // S^3 under PolyType k = 2 in the bulk window x in [1e4, 1e6]
        let sm = sphere_spectrum(3, 1e6).unwrap();
        let rule = EncodingRule::PolyType {
            a: std::f64::consts::PI,
            b: 1.0,
            k: 2.0,
            l: SlowVariation::Const { ell_inf: 1.0 },
        };
        let em = encode(&sm, &rule).unwrap();
        let grid = log_spaced(1e4, 1e6, 250);
        let curve = smoothed_curve(&em, &grid, MollifierSpec::new(1.0, 0.5).unwrap()).unwrap();
        let est = estimate_k(&curve, 3, (1e4, 1e6)).unwrap();
        assert!((1.95..=2.05).contains(&est.k_hat), "k_hat {}", est.k_hat);

        // affine gives k = 1
        let em = encode(&sm, &EncodingRule::affine(1.0)).unwrap();
        let grid = log_spaced(1e4, 1e6, 250);
        let curve = smoothed_curve(&em, &grid, MollifierSpec::new(1.0, 0.5).unwrap()).unwrap();
        let est = estimate_k(&curve, 3, (1e4, 1e6)).unwrap();
        assert!((0.98..=1.02).contains(&est.k_hat), "k_hat {}", est.k_hat);
    }

    #[test]
    fn remainder_probe_synthetic_and_s3() {
        // synthetic d = 2 with a built-in y^{1/2} remainder
        let spec = SyntheticWeyl {
            d: 2,
            gamma: 1.0,
            remainder: RemainderModel::PowerLaw { coeff: 1.0, exponent: 0.5 },
            seed: 0,
        };
        let sm = synthetic_spectrum(&spec, 2e4).unwrap();
        let em = encode(&sm, &EncodingRule::affine(1.0)).unwrap();
        let grid = log_spaced(50.0, 1.5e4, 300);
        let curve = smoothed_curve(&em, &grid, MollifierSpec::new(1.0, 0.5).unwrap()).unwrap();
        let est = remainder_probe(&curve, 2, 1.0, 1.0, (50.0, 1.5e4)).unwrap();
        assert!((0.4..=0.6).contains(&est.alpha_hat), "slope {}", est.alpha_hat);

        // S^3: residual slope should stay near (d-1)/2 = 1
        let curve = s3_curve(1.2e5, 1.0, (1e3, 1e5), 300);
        let est = remainder_probe(&curve, 3, 1.0 / 3.0, 1.0, (1e3, 1e5)).unwrap();
        assert!(est.alpha_hat <= 1.2, "slope {}", est.alpha_hat);

        // exact power law: degenerate
        let pairs: Vec<(f64, f64)> =
            log_spaced(1.0, 100.0, 20).into_iter().map(|y| (y, y.powf(1.5) / 3.0)).collect();
        assert!(matches!(
            remainder_probe(&curve_from_pairs(pairs), 3, 1.0 / 3.0, 1.0, (1.0, 100.0)),
            Err(Error::DegenerateResidual)
        ));
    }

    #[test]
    fn two_term_fit_exact_basis() {
        let pairs: Vec<(f64, f64)> = log_spaced(10.0, 1e4, 60)
            .into_iter()
            .map(|y| (y, 2.0 * y.powf(1.5) + 5.0 * y))
            .collect();
        let fit = two_term_fit(&curve_from_pairs(pairs), (10.0, 1e4)).unwrap();
        assert_relative_eq!(fit.a, 2.0, max_relative = 1e-9);
        assert_relative_eq!(fit.b, 5.0, max_relative = 1e-9);
    }

    #[test]
    fn two_term_fit_needs_enough_points() {
        let pairs: Vec<(f64, f64)> =
            log_spaced(10.0, 100.0, 5).into_iter().map(|y| (y, y)).collect();
        assert!(matches!(
            two_term_fit(&curve_from_pairs(pairs), (10.0, 100.0)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn stability_reports_for_spec_examples() {
        let sm = sphere_spectrum(3, 1.3e6).unwrap();
        let window = (1e4, 1e6);

        let rule = EncodingRule::Perturbed {
            epsilon: 1.0,
            delta: PerturbationSpec::LogDistortion { alpha: 1.0 },
        };
        let rep = stability_report(&sm, &rule, window, 120).unwrap();
        assert!((2.95..=3.05).contains(&rep.d_hat), "d_hat {}", rep.d_hat);

        let rule = EncodingRule::Perturbed {
            epsilon: 1.0,
            delta: PerturbationSpec::BoundedOffset { c: 2.0 },
        };
        let rep = stability_report(&sm, &rule, window, 120).unwrap();
        assert!((2.99..=3.01).contains(&rep.d_hat), "d_hat {}", rep.d_hat);
        assert!(rep.envelope_k <= 5.0, "envelope_k {}", rep.envelope_k);

        let rule = EncodingRule::Perturbed {
            epsilon: 1.0,
            delta: PerturbationSpec::SubPower { q: 0.5 },
        };
        let rep = stability_report(&sm, &rule, window, 120).unwrap();
        assert!((2.98..=3.02).contains(&rep.d_hat), "d_hat {}", rep.d_hat);
        assert!(rep.envelope_k <= 5.0, "envelope_k {}", rep.envelope_k);
    }
}
