//! Numerical integration: adaptive Gauss–Kronrod quadrature and cumulative
//! Simpson integration on sampled data.

use crate::error::{Error, Result};

/// Absolute error floor for adaptive quadrature.
pub const ABS_FLOOR: f64 = 1e-14;

const MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: returns (estimate, error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error until the total error is below
/// `max(abs_tol, rel_tol·|I|, ABS_FLOOR)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, rel_tol, abs_tol).map(|v| -v);
    }
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        let tol = abs_tol.max(rel_tol * total.abs()).max(ABS_FLOOR);
        if err <= tol {
            if !total.is_finite() {
                return Err(Error::Quadrature { a, b, err });
            }
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            let worst = panels
                .iter()
                .max_by(|x, y| x.3.total_cmp(&y.3))
                .copied()
                .unwrap_or((a, b, total, err));
            return Err(Error::Quadrature {
                a: worst.0,
                b: worst.1,
                err,
            });
        }
        let idx = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (pa, pb, pv, pe) = panels.swap_remove(idx);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            return Err(Error::Quadrature { a: pa, b: pb, err: pe });
        }
        let (v1, e1) = gk15(&f, pa, m);
        let (v2, e2) = gk15(&f, m, pb);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
        if panels.len() % 64 == 0 {
            // refresh the running sums to avoid drift
            total = panels.iter().map(|p| p.2).sum();
            err = panels.iter().map(|p| p.3).sum();
        }
    }
}

/// Cumulative integral of sampled values `y(x)` on a strictly increasing,
/// possibly non-uniform grid. Uses the three-point quadratic rule on each
/// interval, so the result is third-order accurate per step.
pub fn cumulative_simpson(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (y[0] + y[1]) * (x[1] - x[0]);
        return out;
    }
    for i in 0..n - 1 {
        // fit a parabola through three neighbouring nodes that include
        // [x_i, x_{i+1}] and integrate it over that interval
        let (j0, j1, j2) = if i + 2 < n { (i, i + 1, i + 2) } else { (i - 1, i, i + 1) };
        let inc = quad_interval(
            [x[j0], x[j1], x[j2]],
            [y[j0], y[j1], y[j2]],
            x[i],
            x[i + 1],
        );
        out[i + 1] = out[i] + inc;
    }
    out
}

// Integral over [lo, hi] of the interpolating parabola through three points.
fn quad_interval(xs: [f64; 3], ys: [f64; 3], lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..3 {
        let (a, b) = match k {
            0 => (xs[1], xs[2]),
            1 => (xs[0], xs[2]),
            _ => (xs[0], xs[1]),
        };
        let denom = (xs[k] - a) * (xs[k] - b);
        // ∫ (x-a)(x-b) dx
        let prim = |x: f64| x * x * x / 3.0 - 0.5 * (a + b) * x * x + a * b * x;
        total += ys[k] * (prim(hi) - prim(lo)) / denom;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert_relative_eq!(v, 64.0 / 6.0 - 6.0, max_relative = 1e-14);
    }

    #[test]
    fn steep_integrand() {
        // ∫_0^1 exp(-1/t) dt = e^{-1} - E1(1)
        let v = integrate(|t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 }, 0.0, 1.0, 1e-13, 0.0).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp() - 0.219_383_934_395_520_27, max_relative = 1e-12);
    }

    #[test]
    fn reversed_bounds() {
        let v = integrate(|x| x, 1.0, 0.0, 1e-12, 0.0).unwrap();
        assert_relative_eq!(v, -0.5);
    }

    #[test]
    fn nonintegrable_reports_interval() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-12, 0.0);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn cumulative_on_log_grid() {
        let n = 401;
        let x: Vec<f64> = (0..n).map(|i| (0.01f64).ln() + i as f64 * (100f64).ln() * 2.0 / (n - 1) as f64).collect();
        let y: Vec<f64> = x.iter().map(|s| s.exp()).collect();
        let c = cumulative_simpson(&x, &y);
        for i in 0..n {
            assert!((c[i] - (x[i].exp() - 0.01)).abs() < 2e-6 * x[i].exp());
        }
    }
}
