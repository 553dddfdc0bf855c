//! Truncated Laplace spectra of model geometries, plus synthetic spectra
//! following a prescribed counting law.
//!
//! Every generator returns a [`SpectralMeasure`]: a sorted atomic measure
//! `sum_n m_n delta_{lambda_n}` with geometry metadata. Atoms closer than
//! `MERGE_TOL` (relative) are merged with summed weights.

use crate::bessel::spherical_bessel_zeros_upto;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use statrs::function::gamma::gamma as gamma_fn;

/// Relative tolerance below which two eigenvalues are considered equal.
pub const MERGE_TOL: f64 = 1e-12;

/// Default cap on enumerated lattice box points for torus spectra.
pub const DEFAULT_LATTICE_CAP: usize = 40_000_000;

/// One atom of a spectral measure: eigenvalue and multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub lambda: f64,
    pub weight: f64,
}

/// Sorted atomic spectral measure with geometry metadata.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    cum: Vec<f64>,
    pub dimension: Option<u32>,
    pub volume: Option<f64>,
    pub gamma_expected: Option<f64>,
    pub lambda_max: f64,
    pub label: String,
}

impl SpectralMeasure {
    pub fn new(
        atoms: Vec<Atom>,
        dimension: Option<u32>,
        volume: Option<f64>,
        gamma_expected: Option<f64>,
        lambda_max: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(lambda_max >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda_max must be nonnegative, got {lambda_max}"
            )));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !(a.lambda >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "atom {i} has negative eigenvalue {}",
                    a.lambda
                )));
            }
            if !(a.weight > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "atom {i} has nonpositive weight {}",
                    a.weight
                )));
            }
            if a.lambda > lambda_max {
                return Err(Error::InvalidParameter(format!(
                    "atom {i} exceeds lambda_max ({} > {lambda_max})",
                    a.lambda
                )));
            }
            if i > 0 && !(atoms[i - 1].lambda < a.lambda) {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalues not strictly increasing at index {i}"
                )));
            }
        }
        if let Some(g) = gamma_expected {
            if !(g > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "gamma_expected must be positive, got {g}"
                )));
            }
        }
        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.weight;
            cum.push(acc);
        }
        Ok(Self { atoms, cum, dimension, volume, gamma_expected, lambda_max, label: label.into() })
    }

    pub fn atoms(&self) -> &[Atom] {
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

    /// Cumulative multiplicity of eigenvalues `<= lambda` (cadlag step).
    pub fn cumulative_to(&self, lambda: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| a.lambda <= lambda);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: u32) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma_fn(d as f64 / 2.0 + 1.0)
}

/// Volume of the unit round sphere `S^d`.
pub fn sphere_volume(d: u32) -> f64 {
    2.0 * PI.powf((d as f64 + 1.0) / 2.0) / gamma_fn((d as f64 + 1.0) / 2.0)
}

/// Weyl constant `gamma_d = omega_d (2 pi)^{-d} Vol`.
pub fn weyl_gamma(d: u32, volume: f64) -> f64 {
    unit_ball_volume(d) / (2.0 * PI).powi(d as i32) * volume
}

/// Remainder shaping for synthetic spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RemainderModel {
    None,
    /// Adds `coeff * Lambda^exponent` to the counting law; `exponent < d/2`.
    PowerLaw { coeff: f64, exponent: f64 },
    /// Seeded uniform jitter on `[-amplitude, amplitude]` per eigenvalue.
    JitterUniform { amplitude: f64 },
}

/// Parameters of a synthetic Weyl-law spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticWeyl {
    pub d: u32,
    pub gamma: f64,
    pub remainder: RemainderModel,
    pub seed: u64,
}

/// Model geometry selector.
#[derive(Debug, Clone)]
pub enum GeometrySpec {
    Sphere { d: u32 },
    FlatTorus { gram: DMatrix<f64> },
    BergerSphere { k_param: f64 },
    LensSpace { p: u32, q: u32 },
    DirichletBall3,
    SyntheticWeyl(SyntheticWeyl),
}

impl GeometrySpec {
    pub fn generate(&self, lambda_max: f64) -> Result<SpectralMeasure> {
        match self {
            GeometrySpec::Sphere { d } => sphere_spectrum(*d, lambda_max),
            GeometrySpec::FlatTorus { gram } => torus_spectrum(gram, lambda_max),
            GeometrySpec::BergerSphere { k_param } => berger_spectrum(*k_param, lambda_max),
            GeometrySpec::LensSpace { p, q } => lens_spectrum(*p, *q, lambda_max),
            GeometrySpec::DirichletBall3 => ball3_spectrum(lambda_max),
            GeometrySpec::SyntheticWeyl(s) => synthetic_spectrum(s, lambda_max),
        }
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc * (n - k + i) as u128 / i as u128;
    }
    acc
}

/// Multiplicity of the degree-`l` spherical harmonic space on `S^d`.
pub fn sphere_multiplicity(d: u32, l: u32) -> f64 {
    let first = binomial((l + d) as u64, d as u64);
    let second = if l >= 2 { binomial((l + d - 2) as u64, d as u64) } else { 0 };
    (first - second) as f64
}

/// Laplace spectrum of the unit round sphere `S^d` up to `lambda_max`.
///
/// Eigenvalues `l(l+d-1)` with the exact harmonic-space multiplicities.
pub fn sphere_spectrum(d: u32, lambda_max: f64) -> Result<SpectralMeasure> {
    if d < 1 {
        return Err(Error::InvalidParameter("sphere dimension must be >= 1".into()));
    }
    if !(lambda_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda_max must be >= 0, got {lambda_max}")));
    }
    let mut atoms = Vec::new();
    let mut l = 0u32;
    loop {
        let lambda = l as f64 * (l as f64 + d as f64 - 1.0);
        if lambda > lambda_max {
            break;
        }
        atoms.push(Atom { lambda, weight: sphere_multiplicity(d, l) });
        l += 1;
    }
    let vol = sphere_volume(d);
    SpectralMeasure::new(
        atoms,
        Some(d),
        Some(vol),
        Some(weyl_gamma(d, vol)),
        lambda_max,
        format!("sphere_d{d}"),
    )
}

fn merge_sorted(mut raw: Vec<(f64, f64)>) -> Vec<Atom> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
    for (lambda, weight) in raw {
        if let Some(last) = atoms.last_mut() {
            let scale = last.lambda.abs().max(lambda.abs()).max(1e-300);
            if (lambda - last.lambda).abs() <= MERGE_TOL * scale {
                last.weight += weight;
                continue;
            }
        }
        atoms.push(Atom { lambda, weight });
    }
    atoms
}

/// Flat-torus spectrum: eigenvalues `k^T G k` over integer vectors `k`,
/// where `G` is the dual-lattice Gram matrix.
pub fn torus_spectrum(gram: &DMatrix<f64>, lambda_max: f64) -> Result<SpectralMeasure> {
    torus_spectrum_with_cap(gram, lambda_max, DEFAULT_LATTICE_CAP)
}

pub fn torus_spectrum_with_cap(
    gram: &DMatrix<f64>,
    lambda_max: f64,
    cap: usize,
) -> Result<SpectralMeasure> {
    let d = gram.nrows();
    if d == 0 || gram.ncols() != d {
        return Err(Error::InvalidParameter("gram matrix must be square and nonempty".into()));
    }
    if !(lambda_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda_max must be >= 0, got {lambda_max}")));
    }
    let sym_err = (gram - gram.transpose()).abs().max();
    if sym_err > 1e-12 * gram.abs().max().max(1.0) {
        return Err(Error::InvalidParameter("gram matrix is not symmetric".into()));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("gram matrix is not positive definite".into()))?;
    let det = chol.determinant();
    let inv = chol.inverse();

    // bounding box: k_i^2 <= Lambda * (G^{-1})_{ii}
    let bounds: Vec<i64> =
        (0..d).map(|i| (lambda_max * inv[(i, i)]).max(0.0).sqrt().floor() as i64).collect();
    let mut box_points: u128 = 1;
    for &b in &bounds {
        box_points = box_points.saturating_mul((2 * b + 1) as u128);
    }
    if box_points > cap as u128 {
        return Err(Error::LatticeCapExceeded { cap });
    }

    let mut raw: Vec<(f64, f64)> = Vec::new();
    let mut k: Vec<i64> = bounds.iter().map(|b| -b).collect();
    'outer: loop {
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += k[i] as f64 * gram[(i, j)] * k[j] as f64;
            }
        }
        if q <= lambda_max {
            raw.push((q, 1.0));
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == d {
                break 'outer;
            }
            if k[pos] < bounds[pos] {
                k[pos] += 1;
                break;
            }
            k[pos] = -bounds[pos];
            pos += 1;
        }
    }
    let atoms = merge_sorted(raw);
    let vol = (2.0 * PI).powi(d as i32) / det.sqrt();
    SpectralMeasure::new(
        atoms,
        Some(d as u32),
        Some(vol),
        Some(unit_ball_volume(d as u32) / det.sqrt()),
        lambda_max,
        format!("torus_d{d}"),
    )
}

/// Berger-sphere spectrum: `lambda_{n,m} = n(n+2) + (k^2-1) m^2`, `|m| <= n`,
/// each pair carrying weight `n+1`.
pub fn berger_spectrum(k_param: f64, lambda_max: f64) -> Result<SpectralMeasure> {
    if !(k_param > 0.0) {
        return Err(Error::InvalidParameter(format!("k_param must be positive, got {k_param}")));
    }
    if !(lambda_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda_max must be >= 0, got {lambda_max}")));
    }
    let shift = k_param * k_param - 1.0;
    let mut raw = Vec::new();
    let mut n = 0u64;
    loop {
        let nf = n as f64;
        let base = nf * (nf + 2.0);
        let min_lambda = if shift >= 0.0 { base } else { base + shift * nf * nf };
        if min_lambda > lambda_max {
            break;
        }
        for m in -(n as i64)..=(n as i64) {
            let lambda = base + shift * (m * m) as f64;
            if lambda <= lambda_max {
                raw.push((lambda, nf + 1.0));
            }
        }
        n += 1;
    }
    SpectralMeasure::new(
        merge_sorted(raw),
        Some(3),
        None,
        None,
        lambda_max,
        format!("berger_k{k_param}"),
    )
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Multiplicity of `lambda_n = n(n+2)` on the lens space `L(p, q)`:
/// weight-lattice count of pairs `(a, b)` in `{-n, -n+2, ..., n}^2` with
/// `a + q b = 0 (mod 2p)`. `q` is replaced by the odd representative of its
/// class mod `2p` (same lens space) so the congruence degenerates correctly
/// at `p = 1`.
pub fn lens_multiplicity(p: u32, q: u32, n: u32) -> f64 {
    let two_p = 2 * p as u64;
    let mut q_eff = q as u64 % two_p;
    if q_eff.is_multiple_of(2) {
        q_eff = (q_eff + p as u64) % two_p;
    }
    let mut counts = vec![0u64; two_p as usize];
    for i in 0..=n as u64 {
        // a = -n + 2i reduced mod 2p
        let a = (2 * i + (two_p - (n as u64 % two_p))) % two_p;
        counts[a as usize] += 1;
    }
    let mut total: u64 = 0;
    for (r, &cb) in counts.iter().enumerate() {
        if cb == 0 {
            continue;
        }
        let need = (two_p - (q_eff * r as u64) % two_p) % two_p;
        total += cb * counts[need as usize];
    }
    total as f64
}

/// Lens-space spectrum `L(p, q)`: a subset of the `S^3` spectrum with
/// reduced multiplicities; requires `gcd(p, q) = 1`.
pub fn lens_spectrum(p: u32, q: u32, lambda_max: f64) -> Result<SpectralMeasure> {
    if p < 1 || q < 1 {
        return Err(Error::InvalidParameter("lens space needs p >= 1 and q >= 1".into()));
    }
    if gcd(p as u64, q as u64) != 1 {
        return Err(Error::InvalidParameter(format!("p, q not coprime: gcd({p}, {q}) != 1")));
    }
    if !(lambda_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda_max must be >= 0, got {lambda_max}")));
    }
    let mut atoms = Vec::new();
    let mut n = 0u32;
    loop {
        let lambda = n as f64 * (n as f64 + 2.0);
        if lambda > lambda_max {
            break;
        }
        let weight = lens_multiplicity(p, q, n);
        if weight > 0.0 {
            atoms.push(Atom { lambda, weight });
        }
        n += 1;
    }
    let vol = sphere_volume(3) / p as f64;
    SpectralMeasure::new(
        atoms,
        Some(3),
        Some(vol),
        Some(weyl_gamma(3, vol)),
        lambda_max,
        format!("lens_p{p}_q{q}"),
    )
}

/// Dirichlet spectrum of the unit ball `B^3`: squares of the positive zeros
/// of the spherical Bessel functions `j_l`, with multiplicity `2l+1`.
pub fn ball3_spectrum(lambda_max: f64) -> Result<SpectralMeasure> {
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda_max must be > 0, got {lambda_max}")));
    }
    let x_max = lambda_max.sqrt();
    let mut raw = Vec::new();
    for (l, zeros) in spherical_bessel_zeros_upto(x_max)? {
        let weight = (2 * l + 1) as f64;
        for z in zeros {
            let lambda = z * z;
            if lambda <= lambda_max {
                raw.push((lambda, weight));
            }
        }
    }
    let vol = 4.0 * PI / 3.0;
    SpectralMeasure::new(
        merge_sorted(raw),
        Some(3),
        Some(vol),
        Some(weyl_gamma(3, vol)),
        lambda_max,
        "ball3_dirichlet",
    )
}

/// Synthetic spectrum following `N(lambda_n) = n` for the counting law
/// `N(Lambda) = gamma Lambda^{d/2}` plus the chosen remainder model.
/// Unit weights; deterministic given the seed.
pub fn synthetic_spectrum(spec: &SyntheticWeyl, lambda_max: f64) -> Result<SpectralMeasure> {
    if spec.d < 1 {
        return Err(Error::InvalidParameter("synthetic dimension must be >= 1".into()));
    }
    if !(spec.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", spec.gamma)));
    }
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda_max must be > 0, got {lambda_max}")));
    }
    let p = spec.d as f64 / 2.0;
    match spec.remainder {
        RemainderModel::PowerLaw { exponent, .. } if !(exponent < p) => {
            return Err(Error::InvalidParameter(format!(
                "remainder exponent must be < d/2 = {p}, got {exponent}"
            )));
        }
        RemainderModel::JitterUniform { amplitude } if !(amplitude > 0.0) => {
            return Err(Error::InvalidParameter("jitter amplitude must be positive".into()));
        }
        _ => {}
    }

    let base = |n: f64| (n / spec.gamma).powf(1.0 / p);
    let mut lambdas: Vec<f64> = Vec::new();
    match spec.remainder {
        RemainderModel::None => {
            let mut n = 1u64;
            loop {
                let lambda = base(n as f64);
                if lambda > lambda_max {
                    break;
                }
                lambdas.push(lambda);
                n += 1;
            }
        }
        RemainderModel::PowerLaw { coeff, exponent } => {
            let mut n = 1u64;
            loop {
                let lambda = solve_counting(spec.gamma, p, coeff, exponent, n as f64)?;
                if lambda > lambda_max {
                    break;
                }
                lambdas.push(lambda);
                n += 1;
            }
        }
        RemainderModel::JitterUniform { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut n = 1u64;
            loop {
                let center = base(n as f64);
                if center > lambda_max {
                    break;
                }
                let lambda = center + rng.random_range(-amplitude..=amplitude);
                if lambda <= lambda_max {
                    lambdas.push(lambda);
                }
                n += 1;
            }
        }
    }
    for (i, w) in lambdas.windows(2).enumerate() {
        if !(w[0] < w[1]) {
            return Err(Error::MonotonicityViolation { lambda: lambdas[i] });
        }
    }
    if let Some(first) = lambdas.first() {
        if *first < 0.0 {
            return Err(Error::MonotonicityViolation { lambda: *first });
        }
    }
    let atoms = lambdas.into_iter().map(|lambda| Atom { lambda, weight: 1.0 }).collect();
    SpectralMeasure::new(
        atoms,
        Some(spec.d),
        None,
        Some(spec.gamma),
        lambda_max,
        format!("synthetic_d{}", spec.d),
    )
}

/// Solve `gamma x^p + coeff x^e = n` for `x > 0` (Newton with bisection
/// fallback). `e < p`, so the law is eventually increasing.
fn solve_counting(gamma: f64, p: f64, coeff: f64, e: f64, n: f64) -> Result<f64> {
    let f = |x: f64| gamma * x.powf(p) + coeff * x.powf(e) - n;
    let fp = |x: f64| gamma * p * x.powf(p - 1.0) + coeff * e * x.powf(e - 1.0);
    let tol = 1e-10 * n.max(1.0);
    let mut x = (n / gamma).powf(1.0 / p);
    for _ in 0..60 {
        let fx = f(x);
        if fx.abs() <= tol {
            return Ok(x);
        }
        let d = fp(x);
        if !(d > 0.0) {
            break;
        }
        let step = fx / d;
        let next = x - step;
        if !(next > 0.0) {
            break;
        }
        x = next;
    }
    if f(x).abs() <= tol {
        return Ok(x);
    }
    // bisection fallback on an expanding bracket
    let mut lo = 1e-12;
    let mut hi = (n / gamma).powf(1.0 / p).max(1.0);
    let mut guard = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::BracketFailure { cap: hi });
        }
    }
    if f(lo) > 0.0 {
        return Err(Error::BracketFailure { cap: hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if f(0.5 * (lo + hi)).abs() <= tol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
