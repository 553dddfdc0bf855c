//! Spherical Bessel functions `j_l` and their positive zeros.
//!
//! Zeros are located by bracketed bisection between consecutive zeros of
//! `j_{l-1}` (interlacing of Bessel zeros), which is derivative-free and
//! robust. Function values use the closed forms for `l <= 1`, upward
//! recurrence in the oscillatory regime `x > l + 1`, and Miller's downward
//! recurrence otherwise.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Absolute bisection tolerance on zero locations.
pub const ZERO_TOL: f64 = 1e-12;

/// Spherical Bessel function of the first kind, `j_l(x)` for `x >= 0`.
pub fn spherical_jl(l: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    match l {
        0 => x.sin() / x,
        1 => x.sin() / (x * x) - x.cos() / x,
        _ => {
            if x > l as f64 + 1.0 {
                jl_upward(l, x)
            } else {
                jl_miller(l, x)
            }
        }
    }
}

fn jl_upward(l: u32, x: f64) -> f64 {
    let mut jm = x.sin() / x;
    let mut j = x.sin() / (x * x) - x.cos() / x;
    for k in 1..l {
        let jp = (2 * k + 1) as f64 / x * j - jm;
        jm = j;
        j = jp;
    }
    j
}

fn jl_miller(l: u32, x: f64) -> f64 {
    // start high enough above both l and x that the minimal solution
    // dominates on the way down
    let base = (l as f64).max(x).ceil() as u32;
    let start = base + 16 + (40.0 * base as f64).sqrt().ceil() as u32;
    let mut jp = 0.0_f64;
    let mut j = 1e-30_f64;
    let mut val = 0.0;
    let mut j0_un = 0.0;
    let mut j1_un = 0.0;
    for k in (0..=start).rev() {
        let jm = (2 * k + 3) as f64 / x * j - jp;
        jp = j;
        j = jm;
        if k == l {
            val = j;
        }
        if k == 1 {
            j1_un = j;
        }
        if k == 0 {
            j0_un = j;
        }
        if j.abs() > 1e250 {
            jp /= 1e250;
            j /= 1e250;
            val /= 1e250;
            j1_un /= 1e250;
        }
    }
    // normalize against whichever closed form is better conditioned
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if j0_un.abs() >= j1_un.abs() {
        val * j0 / j0_un
    } else {
        val * j1 / j1_un
    }
}

fn bisect_jl(l: u32, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = spherical_jl(l, lo);
    let fhi = spherical_jl(l, hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootFinding { l, lo, hi });
    }
    while hi - lo > ZERO_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = spherical_jl(l, mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Next zero of `j_l` strictly above `after`, found by marching in steps of
/// pi/8 until a sign change appears. Consecutive zeros of `j_l` are spaced
/// more than pi apart, so the march cannot skip a zero pair.
fn next_zero_above(l: u32, after: f64) -> Result<f64> {
    let step = PI / 8.0;
    let mut lo = after + 1e-9 * after.max(1.0);
    let mut flo = spherical_jl(l, lo);
    let cap = after + 64.0 * PI;
    while lo < cap {
        let hi = lo + step;
        let fhi = spherical_jl(l, hi);
        if flo == 0.0 {
            return Ok(lo);
        }
        if flo.signum() != fhi.signum() {
            return bisect_jl(l, lo, hi);
        }
        lo = hi;
        flo = fhi;
    }
    Err(Error::RootFinding { l, lo: after, hi: cap })
}

/// All positive zeros of `j_l` up to `x_max`, for every `l` that has at
/// least one. Returns `(l, zeros)` pairs in increasing `l`.
pub fn spherical_bessel_zeros_upto(x_max: f64) -> Result<Vec<(u32, Vec<f64>)>> {
    if !(x_max > 0.0) {
        return Err(Error::InvalidParameter(format!("x_max must be positive, got {x_max}")));
    }
    let mut out: Vec<(u32, Vec<f64>)> = Vec::new();
    if x_max < PI {
        return Ok(out);
    }
    // j_0(x) = sin(x)/x: zeros at k*pi
    let mut parent: Vec<f64> = (1..).map(|k| k as f64 * PI).take_while(|z| *z <= x_max).collect();
    out.push((0, parent.clone()));
    let mut parent_l = 0u32;
    loop {
        let l = parent_l + 1;
        let mut zeros = Vec::new();
        let mut k = 0usize;
        loop {
            // interlacing: the k-th zero of j_l lies between parent zeros k and k+1
            while parent.len() < k + 2 {
                let last = *parent.last().expect("parent level has at least one zero");
                parent.push(next_zero_above(parent_l, last)?);
            }
            let z = bisect_jl(l, parent[k], parent[k + 1])?;
            if z > x_max {
                break;
            }
            zeros.push(z);
            k += 1;
        }
        if zeros.is_empty() {
            break;
        }
        parent = zeros.clone();
        parent_l = l;
        out.push((l, zeros));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms_match_recurrences() {
        // j_2(x) = (3/x^3 - 1/x) sin x - 3/x^2 cos x
        let j2 = |x: f64| (3.0 / x.powi(3) - 1.0 / x) * x.sin() - 3.0 / (x * x) * x.cos();
        for &x in &[0.5, 1.0, 2.7, 5.0, 11.0, 40.0] {
            assert_relative_eq!(spherical_jl(2, x), j2(x), max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn miller_and_upward_agree_in_overlap() {
        for l in [3u32, 7, 15, 40] {
            for &x in &[l as f64 + 2.0, l as f64 + 10.0, 2.5 * l as f64 + 5.0] {
                let up = jl_upward(l, x);
                let down = jl_miller(l, x);
                assert_relative_eq!(up, down, max_relative = 1e-8, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn j0_zeros_are_multiples_of_pi() {
        let zeros = spherical_bessel_zeros_upto(10.0).unwrap();
        let (l0, z0) = &zeros[0];
        assert_eq!(*l0, 0);
        assert_eq!(z0.len(), 3);
        for (k, z) in z0.iter().enumerate() {
            assert_relative_eq!(*z, (k + 1) as f64 * PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_j1_zero_solves_tan_x_eq_x() {
        // independent oracle: bisect tan(x) - x on (pi, 3pi/2)
        let f = |x: f64| x.tan() - x;
        let (mut lo, mut hi) = (PI + 0.1, 1.5 * PI - 1e-9);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x1 = 0.5 * (lo + hi);
        assert_relative_eq!(x1, 4.493409457909064, epsilon = 1e-9);

        let zeros = spherical_bessel_zeros_upto(10.0).unwrap();
        let (l1, z1) = &zeros[1];
        assert_eq!(*l1, 1);
        assert_relative_eq!(z1[0], x1, epsilon = 1e-10);
    }

    #[test]
    fn zeros_interlace_between_levels() {
        let zeros = spherical_bessel_zeros_upto(60.0).unwrap();
        for w in zeros.windows(2) {
            let (_, a) = &w[0];
            let (_, b) = &w[1];
            for (k, zb) in b.iter().enumerate() {
                assert!(a[k] < *zb, "zero {k} fails interlacing");
                if k + 1 < a.len() {
                    assert!(*zb < a[k + 1], "zero {k} fails interlacing upper side");
                }
            }
        }
    }
}
