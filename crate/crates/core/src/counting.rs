//! Edge-variable counting, the exact composition identity, mollified
//! counting and bulk density, and clustering window statistics.
//!
//! Counting convention: `N_{mu_C}(C)` is the mass of encoded atoms with
//! `C_n >= C`; in the edge variable `y = edge - C` this is the ordinary
//! ascending step function `N(y) = sum_{y_n <= y} w_n`.

use crate::encoding::EncodedMeasure;
use crate::spectra::SpectralMeasure;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::OnceLock;

/// Mass of encoded atoms with `C_n >= c`.
pub fn count_edge(em: &EncodedMeasure, c: f64) -> f64 {
    em.mass_from(c)
}

/// Cumulative multiplicity of eigenvalues `<= lambda` (cadlag step).
pub fn count_lambda(sm: &SpectralMeasure, lambda: f64) -> f64 {
    sm.cumulative_to(lambda)
}

/// Result of checking the exact composition identity
/// `N_{mu_C}(C) = N_Delta((edge - C)/eps)` over a grid of `C` values.
#[derive(Debug, Clone, Serialize)]
pub struct CompositionReport {
    pub max_abs_discrepancy: f64,
    pub worst_c: Option<f64>,
    pub n_grid: usize,
    pub pass: bool,
}

/// Checks the composition identity on `c_grid`. The identity is claimed
/// only for affine rules; any other rule is rejected.
pub fn check_composition(
    sm: &SpectralMeasure,
    em: &EncodedMeasure,
    c_grid: &[f64],
) -> Result<CompositionReport> {
    let epsilon = match em.rule {
        crate::encoding::EncodingRule::Affine { epsilon, .. } => epsilon,
        _ => return Err(Error::NonAffineRule),
    };
    let mut max_abs = 0.0;
    let mut worst = None;
    for &c in c_grid {
        let lhs = count_edge(em, c);
        let rhs = count_lambda(sm, (em.edge - c) / epsilon);
        let d = (lhs - rhs).abs();
        if d > max_abs {
            max_abs = d;
            worst = Some(c);
        }
    }
    Ok(CompositionReport {
        max_abs_discrepancy: max_abs,
        worst_c: worst,
        n_grid: c_grid.len(),
        pass: max_abs == 0.0,
    })
}

/// Smooth symmetric bump `phi(t) = c exp(-1/(1-t^2))` on `(-1, 1)` with a
/// width law `h(y) = h0 y^theta`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MollifierSpec {
    pub h0: f64,
    pub theta: f64,
}

impl MollifierSpec {
    pub fn new(h0: f64, theta: f64) -> Result<Self> {
        if !(h0 > 0.0) {
            return Err(Error::InvalidParameter(format!("h0 must be positive, got {h0}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!("theta must be in (0, 1), got {theta}")));
        }
        Ok(Self { h0, theta })
    }

    /// Kernel half-width at edge distance `y`; `h(y) = o(y)` since theta < 1.
    pub fn width(&self, y: f64) -> f64 {
        self.h0 * y.powf(self.theta)
    }
}

fn bump_raw(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)
    }
}

fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    adaptive_simpson(&f, a, b, f(a), f(m), f(b), tol, 40)
}

/// Normalization constant `c` with `integral of c exp(-1/(1-t^2)) = 1`,
/// computed once by adaptive quadrature.
pub fn mollifier_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| 1.0 / integrate(bump_raw, -1.0, 1.0, 1e-14))
}

/// Normalized kernel `phi(t)`.
pub fn kernel_phi(t: f64) -> f64 {
    mollifier_norm() * bump_raw(t)
}

/// Kernel CDF `Psi(u) = integral_{-1}^{u} phi`, exploiting symmetry.
pub fn kernel_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let tail = mollifier_norm() * integrate(bump_raw, u.abs(), 1.0, 1e-14);
        if u >= 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

/// Mollified counting `N^{(h)}(y) = (N * phi_h)(y)` at fixed half-width `h`:
/// a finite weighted sum of kernel CDF values over atoms in the support.
/// Atoms are C-descending, so index `i` pairs with the i-th edge distance.
pub fn smoothed_at(em: &EncodedMeasure, y: f64, h: f64) -> f64 {
    smoothed_at_ys(em, &em.edge_distances(), y, h)
}

fn smoothed_at_ys(em: &EncodedMeasure, ys: &[f64], y: f64, h: f64) -> f64 {
    let lo = ys.partition_point(|&t| t <= y - h);
    let mut acc = em.mass_nearest_edge(lo);
    for (i, &yn) in ys.iter().enumerate().skip(lo) {
        if yn >= y + h {
            break;
        }
        acc += em.atoms()[i].weight * kernel_cdf((y - yn) / h);
    }
    acc
}

/// Mollified bulk density `rho^{(h)}(y) = sum_n w_n phi_h(y - y_n)`:
/// the exact kernel-derivative convolution against the step function.
pub fn rho_at(em: &EncodedMeasure, y: f64, h: f64) -> f64 {
    rho_at_ys(em, &em.edge_distances(), y, h)
}

fn rho_at_ys(em: &EncodedMeasure, ys: &[f64], y: f64, h: f64) -> f64 {
    let lo = ys.partition_point(|&t| t <= y - h);
    let mut acc = 0.0;
    for (i, &yn) in ys.iter().enumerate().skip(lo) {
        if yn >= y + h {
            break;
        }
        acc += em.atoms()[i].weight * kernel_phi((y - yn) / h) / h;
    }
    acc
}

/// One sample of a counting curve in the edge variable.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveSample {
    pub y: f64,
    pub n: f64,
    pub n_smoothed: f64,
    pub rho: f64,
}

/// Sampled `(y, N, N_smoothed, rho)` table, increasing in `y`.
#[derive(Debug, Clone)]
pub struct CountingCurve {
    pub samples: Vec<CurveSample>,
    pub epsilon: f64,
    pub mollifier: MollifierSpec,
}

impl CountingCurve {
    /// `(y, N)` pairs, the raw staircase.
    pub fn raw_pairs(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.y, s.n)).collect()
    }

    /// `(y, rho)` pairs, the mollified density.
    pub fn rho_pairs(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.y, s.rho)).collect()
    }

    pub fn y_max(&self) -> f64 {
        self.samples.last().map(|s| s.y).unwrap_or(0.0)
    }
}

/// Samples the counting function, its mollification, and the mollified
/// density on `y_grid` (strictly increasing, positive).
pub fn smoothed_curve(
    em: &EncodedMeasure,
    y_grid: &[f64],
    moll: MollifierSpec,
) -> Result<CountingCurve> {
    for w in y_grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidParameter("y_grid must be strictly increasing".into()));
        }
    }
    if let Some(&first) = y_grid.first() {
        if !(first > 0.0) {
            return Err(Error::InvalidParameter("y_grid must be positive".into()));
        }
    }
    let ys = em.edge_distances();
    let samples = y_grid
        .iter()
        .map(|&y| {
            let h = moll.width(y);
            CurveSample {
                y,
                n: count_edge(em, em.edge - y),
                n_smoothed: smoothed_at_ys(em, &ys, y, h),
                rho: rho_at_ys(em, &ys, y, h),
            }
        })
        .collect();
    Ok(CountingCurve { samples, epsilon: em.epsilon(), mollifier: moll })
}

/// Window statistics over `C in [c - delta, c]` (closed window).
#[derive(Debug, Clone, Serialize)]
pub struct WindowStats {
    #[serde(rename = "C")]
    pub c: f64,
    pub delta: f64,
    pub jump_total: f64,
    pub cluster_count: usize,
    pub mbar: Option<f64>,
}

/// Jump mass, distinct-cluster count, and average multiplicity
/// `mbar = jump_total / cluster_count` in a short window below `c`.
pub fn window_stats(em: &EncodedMeasure, c: f64, delta: f64) -> Result<WindowStats> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let y = em.edge - c;
    let ys = em.edge_distances();
    let lo = ys.partition_point(|&t| t < y);
    let hi = ys.partition_point(|&t| t <= y + delta);
    let mut jump_total = 0.0;
    for i in lo..hi {
        jump_total += em.atoms()[i].weight;
    }
    let cluster_count = hi - lo;
    let mbar = if cluster_count > 0 { Some(jump_total / cluster_count as f64) } else { None };
    Ok(WindowStats { c, delta, jump_total, cluster_count, mbar })
}

/// Analytic vs Monte-Carlo probability that the cluster at index `ell`
/// lands in a width-`delta` window whose endpoint is uniform over the
/// fundamental cell of length `eps (2 ell + d)`.
#[derive(Debug, Clone, Serialize)]
pub struct HitProbability {
    pub analytic: f64,
    pub empirical: f64,
    pub trials: u64,
}

pub fn edge_hit_probability(
    ell: u32,
    d: u32,
    epsilon: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<HitProbability> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let cell = epsilon * (2.0 * ell as f64 + d as f64);
    if !(delta > 0.0 && delta < cell) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, eps(2l+d)) = (0, {cell}), got {delta}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let u: f64 = rng.random_range(0.0..cell);
        if u <= delta {
            hits += 1;
        }
    }
    Ok(HitProbability { analytic: delta / cell, empirical: hits as f64 / trials as f64, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode, EncodingRule};
    use crate::spectra::sphere_spectrum;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn s3(lambda_max: f64, eps: f64) -> (crate::spectra::SpectralMeasure, EncodedMeasure) {
        let sm = sphere_spectrum(3, lambda_max).unwrap();
        let em = encode(&sm, &EncodingRule::affine(eps)).unwrap();
        (sm, em)
    }

    #[test]
    fn count_edge_s3_bulk_and_near_edge() {
        let (_, em) = s3(2e4, 1.0);
        assert_eq!(count_edge(&em, PI - 1e4), 338350.0);
        assert_eq!(count_edge(&em, PI - 3.5), 5.0);
        assert_eq!(count_edge(&em, PI + 1.0), 0.0);
    }

    #[test]
    fn count_lambda_steps() {
        let sm = sphere_spectrum(3, 100.0).unwrap();
        assert_eq!(count_lambda(&sm, 8.0), 14.0);
        assert_eq!(count_lambda(&sm, 7.999), 5.0);
        let gram = nalgebra::DMatrix::identity(2, 2);
        let torus = crate::spectra::torus_spectrum(&gram, 10.0).unwrap();
        assert_eq!(count_lambda(&torus, 1.0), 5.0);
    }

    #[test]
    fn composition_identity_is_exact() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for eps in [1.0f64, 0.25] {
            let (sm, em) = s3(2e4 / eps.min(1.0), eps);
            let grid: Vec<f64> = (0..1000).map(|_| rng.random_range(-1e4..PI)).collect();
            let report = check_composition(&sm, &em, &grid).unwrap();
            assert!(report.pass, "max discrepancy {}", report.max_abs_discrepancy);
            assert_eq!(report.max_abs_discrepancy, 0.0);
        }
    }

    #[test]
    fn composition_rejects_non_affine() {
        let sm = sphere_spectrum(3, 100.0).unwrap();
        let rule = EncodingRule::Perturbed {
            epsilon: 1.0,
            delta: crate::encoding::PerturbationSpec::BoundedOffset { c: 1.0 },
        };
        let em = encode(&sm, &rule).unwrap();
        assert!(matches!(check_composition(&sm, &em, &[0.0]), Err(crate::Error::NonAffineRule)));
    }

    #[test]
    fn epsilon_collapse_exact() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let sm = sphere_spectrum(3, 4e4).unwrap();
        let ems: Vec<EncodedMeasure> =
            [0.5, 1.0, 2.0].iter().map(|&e| encode(&sm, &EncodingRule::affine(e)).unwrap()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let lambda: f64 = rng.random_range(0.0..4.2e4);
            let counts: Vec<f64> = ems
                .iter()
                .map(|em| {
                    let eps = em.epsilon();
                    count_edge(em, PI - eps * lambda)
                })
                .collect();
            assert_eq!(counts[0], counts[1]);
            assert_eq!(counts[1], counts[2]);
        }
    }

    #[test]
    fn kernel_normalization_and_symmetry() {
        let total = integrate(kernel_phi, -1.0, 1.0, 1e-13);
        assert!((total - 1.0).abs() <= 1e-10, "integral = {total}");
        assert_relative_eq!(kernel_cdf(0.0), 0.5, epsilon = 1e-12);
        assert_eq!(kernel_cdf(-1.0), 0.0);
        assert_eq!(kernel_cdf(1.0), 1.0);
        for &u in &[-0.8, -0.3, 0.2, 0.6] {
            assert_relative_eq!(kernel_cdf(u) + kernel_cdf(-u), 1.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn smoothing_of_locally_constant_counting_is_exact() {
        let (_, em) = s3(100.0, 1.0);
        // atoms at y = 0, 3, 8, 15, ...: y = 5.5 with h = 1 sees none
        let n = count_edge(&em, PI - 5.5);
        assert_relative_eq!(smoothed_at(&em, 5.5, 1.0), n, epsilon = 1e-12);
    }

    #[test]
    fn smoothed_matches_direct_quadrature_oracle() {
        let (_, em) = s3(2e4, 1.0);
        let moll = MollifierSpec::new(1.0, 0.5).unwrap();
        for &y in &[1e3, 5e3, 1e4] {
            let h = moll.width(y);
            let fast = smoothed_at(&em, y, h);
            // oracle: direct quadrature of int N(y - t) phi_h(t) dt
            let oracle = integrate(
                |t| count_edge(&em, em.edge - (y - t)) * kernel_phi(t / h) / h,
                -h,
                h,
                1e-2,
            );
            assert_relative_eq!(fast, oracle, max_relative = 1e-5);
        }
    }

    #[test]
    fn smoothed_value_at_1e4_frozen_oracle() {
        // h = 100 window straddles the single cluster at y = 9999 of weight
        // 10^4; the exact mollified value is N(y-h) + m * Psi(0.01)
        let (_, em) = s3(2e4, 1.0);
        let v = smoothed_at(&em, 1e4, 100.0);
        let expected = 328350.0 + 1e4 * kernel_cdf(0.01);
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        let n = count_edge(&em, PI - 1e4);
        let dev = (v / n - 1.0).abs();
        assert!(dev < 2e-2, "dev = {dev}");
    }

    #[test]
    fn smoothed_stays_within_local_bounds() {
        let (_, em) = s3(2e4, 1.0);
        let moll = MollifierSpec::new(1.0, 0.5).unwrap();
        for &y in &[31.0, 100.0, 1234.5, 9999.0] {
            let h = moll.width(y);
            let lo = count_edge(&em, em.edge - (y - h));
            let hi = count_edge(&em, em.edge - (y + h));
            let mid = smoothed_at(&em, y, h);
            assert!(lo - 1e-9 <= mid && mid <= hi + 1e-9, "y = {y}: {lo} {mid} {hi}");
        }
    }

    #[test]
    fn rho_tracks_bulk_density_on_average() {
        let (_, em) = s3(4e4, 1.0);
        let moll = MollifierSpec::new(1.0, 0.5).unwrap();
        let grid = crate::log_spaced(5e3, 2e4, 400);
        let curve = smoothed_curve(&em, &grid, moll).unwrap();
        // single-point rho oscillates strongly (kernel width is about one
        // cluster spacing); the log-window mean tracks (d/2) gamma y^{1/2}
        let mean_ratio: f64 = curve
            .samples
            .iter()
            .map(|s| s.rho / (0.5 * s.y.sqrt()))
            .sum::<f64>()
            / curve.samples.len() as f64;
        assert!((0.9..=1.1).contains(&mean_ratio), "mean ratio {mean_ratio}");
        // frozen pointwise oracle at y = 1e4, h = 100: only the cluster at
        // 9999 contributes, rho = 1e4 * phi(0.01) / 100
        let rho = rho_at(&em, 1e4, 100.0);
        assert_relative_eq!(rho, 1e4 * kernel_phi(0.01) / 100.0, max_relative = 1e-12);
        assert!(curve.samples.iter().all(|s| s.rho >= -1e-8));
    }

    #[test]
    fn smoothed_density_integrates_back_at_fixed_width() {
        let (_, em) = s3(2e4, 1.0);
        let h = 40.0;
        let (y1, y2) = (800.0, 1200.0);
        let integral = integrate(|y| rho_at(&em, y, h), y1, y2, 1e-4);
        let diff = smoothed_at(&em, y2, h) - smoothed_at(&em, y1, h);
        assert_relative_eq!(integral, diff, max_relative = 1e-6);
    }

    #[test]
    fn window_stats_examples() {
        let (_, em) = s3(100.0, 1.0);
        // lambda window [0.1, 0.11]: no eigenvalues
        let w = window_stats(&em, PI - 0.1, 0.01).unwrap();
        assert_eq!(w.cluster_count, 0);
        assert!(w.mbar.is_none());
        // lambda window [8, 8.8]: the single cluster at 8 with weight 9
        let w = window_stats(&em, PI - 8.0, 0.8).unwrap();
        assert_eq!(w.cluster_count, 1);
        assert_eq!(w.jump_total, 9.0);
        assert_eq!(w.mbar, Some(9.0));
    }

    #[test]
    fn window_average_multiplicity_in_bulk() {
        let (_, em) = s3(2e4, 1.0);
        // anchor the window at the atom C_l with lambda_l <= 1e4 < lambda_{l+1}
        // (a window at literal C = -1e4 falls between clusters and is empty)
        let lambda_l = 9999.0;
        let c = PI - lambda_l;
        let delta = c.abs().powf(0.3);
        let w = window_stats(&em, c, delta).unwrap();
        assert_eq!(w.cluster_count, 1);
        let mbar = w.mbar.unwrap();
        let ratio = mbar / c.abs();
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn hit_probability_analytic_and_monte_carlo() {
        let hp = edge_hit_probability(2, 3, 1.0, 0.7, 100_000, 353).unwrap();
        assert_relative_eq!(hp.analytic, 0.1, epsilon = 1e-15);
        let sigma = (0.1 * 0.9 / 1e5f64).sqrt();
        assert!((hp.empirical - 0.1).abs() <= 3.0 * sigma, "empirical {}", hp.empirical);
        // delta equal to the cell length is out of the validity domain
        assert!(edge_hit_probability(0, 3, 1.0, 3.0, 10, 0).is_err());
    }
}
