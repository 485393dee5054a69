//! First-order Bessel function and the `somb` point-spread profile.
//!
//! `J1` is evaluated piecewise:
//!
//! * `|x| <= 3`: ascending power series. The terms sum in magnitude to
//!   `I1(3) ~ 4`, so cancellation costs less than one digit.
//! * `3 < |x| <= 60`: Bessel's integral `J1(x) = (1/2pi) * int cos(t - x sin t) dt`
//!   over one period, evaluated by the trapezoid rule with `M = ceil(|x|) + 48`
//!   nodes. The rule is exact up to aliased orders `J_{kM +- 1}(x)`, which are
//!   below `1e-20` for this choice of `M`.
//! * `|x| > 60`: Hankel asymptotic expansion, truncated at its smallest term
//!   (`~exp(-2|x|)`, i.e. below `1e-50`).

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 3.0;
const ASYMPTOTIC_LIMIT: f64 = 60.0;

/// `sum_k (-1)^k (x^2/4)^k / (k! (k+1)!)`, i.e. `J1(x) / (x/2)`.
fn reduced_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * (k + 1.0));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) || k > 200.0 {
            return sum;
        }
    }
}

fn bessel_integral(x: f64) -> f64 {
    let m = x.abs().ceil() as usize + 48;
    let step = 2.0 * PI / m as f64;
    let mut acc = 0.0;
    for j in 0..m {
        let t = j as f64 * step;
        acc += (t - x * t.sin()).cos();
    }
    acc / m as f64
}

fn hankel_asymptotic(x: f64) -> f64 {
    // mu = 4 n^2 with n = 1
    let mu = 4.0;
    let inv8x = 1.0 / (8.0 * x);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) * inv8x / k as f64;
        if a.abs() >= prev {
            break;
        }
        prev = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - 3.0 * FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// First-order Bessel function of the first kind.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT {
        0.5 * ax * reduced_series(ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        bessel_integral(ax)
    } else {
        hankel_asymptotic(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `2 J1(x) / x` without input validation. Callers guarantee a finite argument.
#[inline]
pub fn somb_unchecked(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        reduced_series(ax)
    } else {
        2.0 * bessel_j1(ax) / ax
    }
}

/// The circular-aperture amplitude profile `somb(x) = 2 J1(x) / x`, with `somb(0) = 1`.
pub fn somb(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("somb argument must be finite, got {x}")));
    }
    Ok(somb_unchecked(x))
}

/// First positive zero of `J1`, located by bisection to full double precision.
pub fn j1_first_zero() -> f64 {
    static ZERO: OnceLock<f64> = OnceLock::new();
    *ZERO.get_or_init(|| {
        let (mut lo, mut hi) = (3.5_f64, 4.0_f64);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if bessel_j1(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// The Rayleigh constant `x0 / (2 pi)` (~0.6098), where `x0` is the first zero of `J1`.
pub fn rayleigh_factor() -> f64 {
    j1_first_zero() / (2.0 * PI)
}
