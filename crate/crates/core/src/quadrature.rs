//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 15-point Kronrod rule (embedded 7-point Gauss) is applied per interval;
//! the interval with the largest error estimate is bisected until the summed
//! error estimate meets the requested relative tolerance. Semi-infinite
//! integrals are mapped to (0, 1] by the exponential substitution
//! `s = a - scale * ln(v)`, which is well suited to integrands with an
//! exponentially decaying tail.

use crate::error::Error;

/// Default relative tolerance used by callers that do not have a reason to
/// pick their own.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const MAX_INTERVALS: usize = 4096;

// 15-point Kronrod abscissae on [-1, 1] (symmetric; only x >= 0 stored)
// and the matching Kronrod / embedded 7-point Gauss weights (QUADPACK).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Kronrod value and error estimate on a single interval.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];

    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }

    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    // The (200 * err)^1.5 sharpening from QUADPACK is overkill here; the raw
    // Gauss/Kronrod difference is already a conservative estimate for the
    // smooth integrands this crate produces.
    (value, err)
}

#[derive(Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Integrate `f` over the finite interval `[a, b]` to relative tolerance
/// `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64, Error> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate requires finite bounds"));
    }
    if a == b {
        return Ok(0.0);
    }

    let (value, err) = gk15(&f, a, b);
    let mut intervals = vec![Interval { a, b, value, err }];
    let mut total = value;
    let mut total_err = err;

    while total_err > rel_tol * total.abs().max(f64::MIN_POSITIVE) && total_err > 1e-300 {
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                context: format!("more than {MAX_INTERVALS} subintervals on [{a}, {b}]"),
                estimate: total,
                error: total_err,
            });
        }
        // Split the interval with the largest error estimate.
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("interval list is never empty");
        let iv = intervals.swap_remove(worst);
        let mid = 0.5 * (iv.a + iv.b);
        if mid <= iv.a || mid >= iv.b {
            // Interval has collapsed to machine precision; accept what we have.
            intervals.push(iv);
            break;
        }
        let (lv, le) = gk15(&f, iv.a, mid);
        let (rv, re) = gk15(&f, mid, iv.b);
        total += lv + rv - iv.value;
        total_err += le + re - iv.err;
        intervals.push(Interval {
            a: iv.a,
            b: mid,
            value: lv,
            err: le,
        });
        intervals.push(Interval {
            a: mid,
            b: iv.b,
            value: rv,
            err: re,
        });
    }

    // Re-sum the panels so the running-update drift does not end up in the
    // returned value.
    Ok(intervals.iter().map(|iv| iv.value).sum())
}

/// Integrate `f` over `[a, infinity)` to relative tolerance `rel_tol`.
///
/// `scale` sets the substitution `s = a - scale * ln(v)`; it should be of the
/// order of the integrand's decay length. The substituted integrand is
/// `f(a - scale ln v) * scale / v` on (0, 1], which stays bounded whenever
/// `f` decays at least as fast as `exp(-s / scale)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<f64, Error> {
    if !(scale > 0.0) {
        return Err(Error::domain("integrate_to_inf requires scale > 0"));
    }
    integrate(
        |v| {
            let s = a - scale * v.ln();
            f(s) * scale / v
        },
        0.0,
        1.0,
        rel_tol,
    )
}
