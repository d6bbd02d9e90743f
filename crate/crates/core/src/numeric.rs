//! Shared numeric kernels: adaptive Gauss–Kronrod quadrature, golden-section
//! maximization, and bracketed bisection.

use crate::error::{Error, Result};

/// 15-point Kronrod abscissae on [-1, 1] (nonnegative half; symmetric).
const KRONROD_X: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

const KRONROD_W: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// 7-point Gauss weights matching every other Kronrod node.
const GAUSS_W: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &w)) in KRONROD_X.iter().zip(KRONROD_W.iter()).enumerate() {
        let v = if x == 0.0 {
            f(mid)
        } else {
            f(mid - half * x) + f(mid + half * x)
        };
        kronrod += w * v;
        if i % 2 == 1 {
            gauss += GAUSS_W[i / 2] * v;
        } else if x == 0.0 {
            // center node belongs to the Gauss rule as well (i == 7)
            gauss += GAUSS_W[3] * v;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. Bisects the worst interval until the summed error
/// estimate is below `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = gauss_kronrod(&f, a, b);
    // (lo, hi, value, err)
    let mut segments: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = segments.iter().map(|s| s.3).sum();
        if total_err <= tol {
            return Ok(segments.iter().map(|s| s.2).sum());
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:.3e} above tolerance {tol:.3e} after {MAX_INTERVALS} intervals"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval narrower than f64 resolution; accept its estimate
            let (v, _) = gauss_kronrod(&f, lo, hi);
            segments.push((lo, hi, v, 0.0));
            continue;
        }
        let (v1, e1) = gauss_kronrod(&f, lo, mid);
        let (v2, e2) = gauss_kronrod(&f, mid, hi);
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
}

/// Golden-section maximization of `f` on `[a, b]`; returns `(x_max, f_max)`.
/// Assumes a single interior maximum inside the bracket.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > xtol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection on a bracketing interval `[a, b]` with `f(a)` and `f(b)` of
/// opposite sign; refines to width `xtol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootFind(format!(
            "no sign change on [{a}, {b}]: f(a)={fa:.6e}, f(b)={fb:.6e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= xtol || mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        // K15 is exact for degree <= 22
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn integrates_kinked_survival() {
        // piecewise function needs adaptivity
        let v = integrate(|x| if x < 1.0 { 1.0 } else { (2.0 - x).max(0.0) }, 0.0, 3.0, 1e-11)
            .unwrap();
        assert!((v - 1.5).abs() < 1e-9);
    }

    #[test]
    fn golden_finds_quadratic_peak() {
        let (x, v) = golden_max(|t| -(t - 0.3) * (t - 0.3) + 2.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7); // flat-top plateau of a quadratic is ~sqrt(ulp) wide
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_unbracketed() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
