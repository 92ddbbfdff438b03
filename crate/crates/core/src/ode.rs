//! Adaptive Dormand–Prince 5(4) integration of a scalar ODE `y' = f(t, y)`.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-size controls.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-15,
            max_steps: 2_000_000,
            h_min: 1e-14,
        }
    }
}

/// Integrate from `(t0, y0)` and return `y` at each point of `grid`.
///
/// The grid must be monotone in the direction of integration; each grid
/// point is hit exactly by shortening the step that would overshoot it.
pub fn integrate_to_grid<F: Fn(f64, f64) -> f64>(
    f: F,
    t0: f64,
    y0: f64,
    grid: &[f64],
    opts: OdeOptions,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut t = t0;
    let mut y = y0;
    let mut h: f64 = 0.0;
    let mut steps = 0usize;
    for &target in grid {
        let dir = (target - t).signum();
        if target == t {
            out.push(y);
            continue;
        }
        if h == 0.0 || h.signum() != dir {
            h = dir * (1e-3 * (target - t).abs()).max(1e-6).min((target - t).abs());
        }
        let mut k1 = f(t, y);
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::convergence("ode", format!("step budget exhausted at t = {t}")));
            }
            let remaining = target - t;
            let landing = h.abs() >= remaining.abs();
            let hs = if landing { remaining } else { h };
            let k2 = f(t + C2 * hs, y + hs * A21 * k1);
            let k3 = f(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2));
            let k4 = f(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = f(t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            let k6 = f(t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
            let y5 = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let k7 = f(t + hs, y5);
            let err = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let sc = opts.atol + opts.rtol * y.abs().max(y5.abs());
            let ratio = (err / sc).abs();
            if !ratio.is_finite() || !y5.is_finite() {
                h = 0.25 * hs;
                if h.abs() < opts.h_min * t.abs().max(1.0) {
                    return Err(Error::convergence("ode", format!("step underflow at t = {t}")));
                }
                continue;
            }
            if ratio <= 1.0 {
                t = if landing { target } else { t + hs };
                y = y5;
                k1 = k7;
                let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                if !landing {
                    h = hs * fac;
                } else if fac < 1.0 {
                    h = h * fac;
                }
            } else {
                let fac = (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
                h = hs * fac;
                if h.abs() < opts.h_min * t.abs().max(1.0) {
                    return Err(Error::convergence("ode", format!("step underflow at t = {t}")));
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}
