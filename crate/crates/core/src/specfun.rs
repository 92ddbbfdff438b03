//! Special-function kernel.
//!
//! Real-argument implementations of the exponential integrals, the Bessel
//! functions needed by the radial profiles, the Airy pair, the confluent
//! hypergeometric function `1F1(a; 2; x)` for integer `a`, and zeros of the
//! integer-order Bessel functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this argument `Ei` switches from the convergent series to the
/// optimally truncated asymptotic series. At `x = 40` the smallest
/// asymptotic term is below `1e-16` relative; the positive-term series is
/// rounding-limited everywhere below it.
pub const EI_ASYMPTOTIC_FROM: f64 = 40.0;

/// `K0`/`K1` use the logarithmic power series up to this argument and
/// Steed's continued fraction above it.
pub const K_SERIES_UNTIL: f64 = 2.0;

const J_SERIES_UNTIL: f64 = 1.0;
const J_HANKEL_FROM: f64 = 25.0;

// ---------------------------------------------------------------------------
// Exponential integrals
// ---------------------------------------------------------------------------

/// Exponential integral `Ei(x)` for `x > 0`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("exp_integral_ei", format!("x = {x} must be positive")));
    }
    if x <= EI_ASYMPTOTIC_FROM {
        Ok(ei_series(x))
    } else {
        let (s, _) = ei_asymptotic_scaled(x);
        let v = s * x.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow {
                func: "exp_integral_ei",
                at: x,
            })
        }
    }
}

/// `e^{-x} Ei(x)`, finite for every positive `x`.
pub fn exp_integral_ei_scaled(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(
            "exp_integral_ei_scaled",
            format!("x = {x} must be positive"),
        ));
    }
    if x <= EI_ASYMPTOTIC_FROM {
        Ok(ei_series(x) * (-x).exp())
    } else {
        Ok(ei_asymptotic_scaled(x).0)
    }
}

/// Convergent series `γ + ln x + Σ xⁿ/(n·n!)`.
pub fn ei_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..1000 {
        let nf = n as f64;
        term *= x / nf;
        let t = term / nf;
        sum += t;
        if t < sum * 1e-17 {
            break;
        }
    }
    EULER_GAMMA + x.ln() + sum
}

/// Asymptotic form `(e^x/x)[1 + Σ n!/xⁿ]` stopped at its smallest term.
///
/// Returns `e^{-x}·Ei(x)` and the magnitude of the first omitted term
/// (same scaling) as an error estimate.
pub fn ei_asymptotic_scaled(x: f64) -> (f64, f64) {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 1.0;
    loop {
        let next = term * n / x;
        if next >= term || next < 1e-18 {
            return (sum / x, next.min(term) / x);
        }
        term = next;
        sum += term;
        n += 1.0;
    }
}

/// Exponential integral `E1(x) = -Ei(-x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("exp_integral_e1", format!("x = {x} must be positive")));
    }
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok(e1_cf_scaled(x) * (-x).exp())
    }
}

/// `e^{x} E1(x)` for `x > 0`.
pub fn exp_integral_e1_scaled(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(
            "exp_integral_e1_scaled",
            format!("x = {x} must be positive"),
        ));
    }
    if x <= 1.0 {
        Ok(e1_series(x) * x.exp())
    } else {
        Ok(e1_cf_scaled(x))
    }
}

fn e1_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..200 {
        let nf = n as f64;
        term *= -x / nf;
        let t = term / nf;
        sum += t;
        if t.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// Modified Lentz evaluation of the continued fraction for e^x E1(x).
fn e1_cf_scaled(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Bessel functions
// ---------------------------------------------------------------------------

/// The Bessel-type functions used by the radial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BesselKind {
    J0,
    J1,
    SphericalJ0,
    K0,
    K1,
}

pub fn bessel_family(kind: BesselKind, x: f64) -> Result<f64> {
    match kind {
        BesselKind::J0 | BesselKind::J1 | BesselKind::SphericalJ0 if x < 0.0 => Err(
            Error::domain("bessel_family", format!("{kind:?} requires x >= 0, got {x}")),
        ),
        BesselKind::J0 => Ok(bessel_j0(x)),
        BesselKind::J1 => Ok(bessel_j1(x)),
        BesselKind::SphericalJ0 => Ok(spherical_j0(x)),
        BesselKind::K0 => bessel_k0(x),
        BesselKind::K1 => bessel_k1(x),
    }
}

pub fn bessel_j0(x: f64) -> f64 {
    bessel_jn(0, x)
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_jn(1, x)
}

/// Integer-order Bessel function of the first kind.
pub fn bessel_jn(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_jn(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= J_SERIES_UNTIL || (n as f64) > x + 20.0 {
        jn_series(n, x)
    } else if x >= J_HANKEL_FROM {
        let j0 = j_hankel(0, x);
        if n == 0 {
            return j0;
        }
        let mut jm = j0;
        let mut j = j_hankel(1, x);
        for k in 1..n {
            let jp = 2.0 * k as f64 / x * j - jm;
            jm = j;
            j = jp;
        }
        j
    } else {
        jn_miller(n, x)
    }
}

fn jn_series(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= h / k as f64;
    }
    let q = -h * h;
    let mut term = lead;
    let mut sum = lead;
    for k in 1..200 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

// Miller's backward recurrence normalised by J0 + 2ΣJ_{2k} = 1.
fn jn_miller(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let mut start = (top + 30.0 + (60.0 * top).sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut jp = 0.0;
    let mut j = 1e-300;
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        // j now holds J_{k-1} (unnormalised)
        if k - 1 == n as usize {
            want = j;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            want *= 1e-250;
        }
    }
    norm += j;
    want / norm
}

// Hankel asymptotic expansion, stopped at the smallest term.
fn j_hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= prev {
            break;
        }
        prev = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * n as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `j0(x) = sin(x)/x` with the removable singularity at the origin.
pub fn spherical_j0(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Derivative of `j0`, equal to `-j1(x)`.
pub fn spherical_j0_prime(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        -x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0))
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

/// Modified Bessel function `K0(x)`, `x > 0`.
pub fn bessel_k0(x: f64) -> Result<f64> {
    Ok(k01(x, "bessel_k0")?.0)
}

/// Modified Bessel function `K1(x)`, `x > 0`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    Ok(k01(x, "bessel_k1")?.1)
}

fn k01(x: f64, func: &'static str) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::domain(func, format!("x = {x} must be positive")));
    }
    if x <= K_SERIES_UNTIL {
        Ok(k01_series(x))
    } else {
        Ok(k01_steed(x))
    }
}

fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let l = (0.5 * x).ln();
    // I0, I1 and the harmonic-number sums
    let mut t0 = 1.0; // y^k/(k!)^2
    let mut t1 = 1.0; // y^k/(k!(k+1)!)
    let mut i0 = 1.0;
    let mut i1 = 1.0;
    let mut harm = 0.0; // H_k
    let mut s0 = 0.0;
    let mut s1 = 1.0 - 2.0 * EULER_GAMMA; // psi(1) + psi(2) for k = 0
    for k in 1..100 {
        let kf = k as f64;
        t0 *= y / (kf * kf);
        t1 *= y / (kf * (kf + 1.0));
        harm += 1.0 / kf;
        i0 += t0;
        i1 += t1;
        s0 += t0 * harm;
        let psi_sum = 2.0 * (harm - EULER_GAMMA) + 1.0 / (kf + 1.0);
        s1 += t1 * psi_sum;
        if t0 < 1e-18 * i0 {
            break;
        }
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(l + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + l * i1 - 0.25 * x * s1;
    (k0, k1)
}

// Steed/Temme continued fraction for K_0 and K_1 (x >= 2).
fn k01_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

// ---------------------------------------------------------------------------
// Airy functions
// ---------------------------------------------------------------------------

/// `Ai`, `Bi` and their derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AiryPair {
    pub ai: f64,
    pub bi: f64,
    pub ai_prime: f64,
    pub bi_prime: f64,
}

impl AiryPair {
    pub fn wronskian(&self) -> f64 {
        self.ai * self.bi_prime - self.ai_prime * self.bi
    }
}

const AI0: f64 = 0.355_028_053_887_817_24;
const AIP0: f64 = -0.258_819_403_792_806_8;
const BI0: f64 = 0.614_926_627_446_000_7;
const BIP0: f64 = 0.448_288_357_353_826_36;
const AIRY_ASYMPTOTIC_FROM: f64 = 10.0;
const AIRY_STEP: f64 = 0.25;

/// Airy functions for `|x| <= 50`.
///
/// Both solutions are obtained by Taylor-series continuation of `y'' = x y`
/// from the origin, except `Ai` on the positive axis, which is recessive
/// there: it comes from its asymptotic series at `x >= 10` and is continued
/// backwards towards the origin.
pub fn airy_pair(x: f64) -> Result<AiryPair> {
    if !(x.abs() <= 50.0) {
        return Err(Error::domain("airy_pair", format!("|x| = {} exceeds 50", x.abs())));
    }
    let (bi, bi_prime) = airy_continue(0.0, BI0, BIP0, x);
    let (ai, ai_prime) = if x <= 2.0 {
        airy_continue(0.0, AI0, AIP0, x)
    } else if x >= AIRY_ASYMPTOTIC_FROM {
        ai_asymptotic(x)
    } else {
        let (a, ap) = ai_asymptotic(AIRY_ASYMPTOTIC_FROM);
        airy_continue(AIRY_ASYMPTOTIC_FROM, a, ap, x)
    };
    Ok(AiryPair {
        ai,
        bi,
        ai_prime,
        bi_prime,
    })
}

// Continue a solution of y'' = x y from x0 to x1.
fn airy_continue(x0: f64, mut y: f64, mut yp: f64, x1: f64) -> (f64, f64) {
    let span = x1 - x0;
    if span == 0.0 {
        return (y, yp);
    }
    let steps = (span.abs() / AIRY_STEP).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut a = x0;
    for _ in 0..steps {
        let (ny, nyp) = airy_taylor_step(a, y, yp, h);
        y = ny;
        yp = nyp;
        a += h;
    }
    (y, yp)
}

fn airy_taylor_step(a: f64, y: f64, yp: f64, h: f64) -> (f64, f64) {
    // c_{k+2} = (a c_k + c_{k-1}) / ((k+1)(k+2))
    let mut c_km1 = 0.0;
    let mut c_k = y;
    let mut c_kp1 = yp;
    let mut val = y + yp * h;
    let mut der = yp;
    let mut hk = h; // h^(k+1) for the current c_{k+1}
    let scale = y.abs().max(yp.abs()).max(1e-300);
    for k in 0..200usize {
        let kf = k as f64;
        let c_next = (a * c_k + c_km1) / ((kf + 1.0) * (kf + 2.0));
        let hk1 = hk * h;
        let tv = c_next * hk1;
        let td = (kf + 2.0) * c_next * hk;
        val += tv;
        der += td;
        c_km1 = c_k;
        c_k = c_kp1;
        c_kp1 = c_next;
        hk = hk1;
        if k > 4 && tv.abs() < 1e-18 * scale && td.abs() < 1e-18 * scale && c_k.abs() * hk < 1e-18 * scale {
            break;
        }
    }
    (val, der)
}

fn ai_asymptotic(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let mut u = 1.0;
    let mut su = 1.0;
    let mut sv = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..100 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        let zk = zeta.powi(k);
        let tu = u / zk;
        if tu.abs() >= prev || tu.abs() < 1e-18 {
            break;
        }
        prev = tu.abs();
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        su += sign * tu;
        sv += sign * v / zk;
    }
    let e = (-zeta).exp();
    let x14 = x.powf(0.25);
    let spi = PI.sqrt();
    (e / (2.0 * spi * x14) * su, -x14 * e / (2.0 * spi) * sv)
}

// ---------------------------------------------------------------------------
// Confluent hypergeometric function 1F1(a; 2; x)
// ---------------------------------------------------------------------------

/// `1F1(a; 2; x)` for positive integer `a`.
///
/// Summed directly for `x >= 0`. For negative `x` the closed form is used at
/// `a = 1`, and Kummer's transformation `e^x 1F1(2-a; 2; -x)` (a terminating
/// polynomial) for `a >= 2`.
pub fn hyp1f1_b2(a: u32, x: f64) -> Result<f64> {
    if a == 0 {
        return Err(Error::domain("hyp1f1_b2", "a must be a positive integer"));
    }
    if !x.is_finite() {
        return Err(Error::domain("hyp1f1_b2", format!("x = {x} is not finite")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if a == 1 {
        return Ok(x.exp_m1() / x);
    }
    if x > 0.0 {
        return Ok(hyp1f1_b2_direct(a as f64, x, 10_000));
    }
    // e^x * sum_{k=0}^{a-2} (2-a)_k / ((2)_k k!) (-x)^k
    let y = -x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..(a - 2) {
        let kf = k as f64;
        term *= (2.0 - a as f64 + kf) / ((2.0 + kf) * (kf + 1.0)) * y;
        sum += term;
    }
    Ok(x.exp() * sum)
}

/// Term-by-term summation of `1F1(a; 2; x)` with a term-ratio stop.
pub fn hyp1f1_b2_direct(a: f64, x: f64, max_terms: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..max_terms {
        let kf = k as f64;
        term *= (a + kf) / ((2.0 + kf) * (kf + 1.0)) * x;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && kf > a.abs() + x.abs() {
            break;
        }
    }
    sum
}

/// `1F1(a; 2; x)` for `a = 1..=a_max`, by the contiguous recurrence
/// `a·M(a+1) = (2a - 2 + x)·M(a) + (2 - a)·M(a-1)`.
pub fn hyp1f1_b2_sequence(a_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(a_max);
    if a_max == 0 {
        return out;
    }
    let m1 = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
    out.push(m1);
    if a_max == 1 {
        return out;
    }
    out.push(x.exp());
    for a in 2..a_max {
        let af = a as f64;
        let next = ((2.0 * af - 2.0 + x) * out[a - 1] + (2.0 - af) * out[a - 2]) / af;
        out.push(next);
    }
    out
}

// ---------------------------------------------------------------------------
// Bessel zeros
// ---------------------------------------------------------------------------

/// The `m`-th positive zero of `J_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselZero {
    pub order: u32,
    pub index: u32,
    pub value: f64,
}

fn jn_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -bessel_j1(x)
    } else {
        bessel_jn(n - 1, x) - n as f64 / x * bessel_jn(n, x)
    }
}

/// Locate `λ_{n,m}` by bracketing around McMahon's estimate, then
/// safeguarded Newton refinement.
pub fn bessel_zero(n: u32, m: u32) -> Result<BesselZero> {
    if m == 0 {
        return Err(Error::domain("bessel_zero", "zero index m starts at 1"));
    }
    let (lo, hi) = bracket_zero(n, m)?;
    let f = |x: f64| bessel_jn(n, x);
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let step = fx / jn_prime(n, x);
        let mut next = x - step;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() < 1e-15 * x {
            x = next;
            break;
        }
        x = next;
    }
    Ok(BesselZero {
        order: n,
        index: m,
        value: x,
    })
}

fn bracket_zero(n: u32, m: u32) -> Result<(f64, f64)> {
    // scan upward counting sign changes; zeros are spaced by roughly pi
    let nf = n as f64;
    let mut x = if n == 0 { 1e-3 } else { nf.max(1e-3) };
    let h = 0.05;
    let mut fx = bessel_jn(n, x);
    let mut count = 0;
    let limit = (m as f64 + nf / 2.0 + 2.0) * PI + nf + 10.0;
    while x < limit {
        let xn = x + h;
        let fn_ = bessel_jn(n, xn);
        if fx == 0.0 || fx.signum() != fn_.signum() {
            count += 1;
            if count == m {
                return Ok((x, xn));
            }
        }
        x = xn;
        fx = fn_;
    }
    Err(Error::convergence(
        "bessel_zero",
        format!("no bracket found for J_{n} zero {m}"),
    ))
}

/// First zero of the regular radial Helmholtz profile in `dim` dimensions:
/// `cos` (π/2), `J0` (2.4048…), `j0` (π).
pub fn first_regular_zero(dim: u32) -> Result<f64> {
    match dim {
        1 => Ok(0.5 * PI),
        2 => Ok(bessel_zero(0, 1)?.value),
        3 => Ok(PI),
        _ => Err(Error::Parameter(format!("dimension {dim} not in 1..=3"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ei_reference_values() {
        assert_relative_eq!(exp_integral_ei(1.0).unwrap(), 1.895_117_816_355_936_8, max_relative = 1e-14);
        assert_relative_eq!(exp_integral_ei(0.5).unwrap(), 0.454_219_904_863_173_58, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_ei(10.0).unwrap(), 2_492.228_976_241_877_8, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_ei(40.0).unwrap(), 6.039_718_263_611_241_6e15, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_ei(1e-3).unwrap(), -6.329_539_364_025_038, max_relative = 1e-13);
    }

    #[test]
    fn ei_rejects_nonpositive() {
        assert!(exp_integral_ei(0.0).is_err());
        assert!(exp_integral_ei(-1.0).is_err());
    }

    #[test]
    fn ei_small_argument_limit() {
        for &x in &[1e-4, 1e-6, 1e-9] {
            let d = exp_integral_ei(x).unwrap() - x.ln() - EULER_GAMMA;
            assert!(d.abs() < 2.0 * x, "x = {x}: {d}");
        }
    }

    #[test]
    fn ei_at_thirty_from_asymptotic_shape() {
        let v = exp_integral_ei(30.0).unwrap() * 30.0 * (-30.0f64).exp();
        assert!(v > 1.0 && v < 1.04, "{v}");
        assert_relative_eq!(exp_integral_ei(30.0).unwrap(), 368_973_209_407.274_2, max_relative = 1e-13);
    }

    #[test]
    fn ei_branches_agree_above_crossover() {
        for &x in &[38.0, 40.0, 45.0, 50.0] {
            let s = ei_series(x) * (-x as f64).exp();
            let (a, err) = ei_asymptotic_scaled(x);
            assert!(err < 1e-16);
            assert_relative_eq!(s, a, max_relative = 1e-13);
        }
    }

    #[test]
    fn ei_branch_gap_bounded_by_truncation_estimate() {
        // the optimally truncated series is only as good as its smallest term
        for i in 0..=8 {
            let x = 8.0 + 0.5 * i as f64;
            let s = ei_series(x) * (-x as f64).exp();
            let (a, err) = ei_asymptotic_scaled(x);
            assert!((s - a).abs() <= 2.0 * err, "x = {x}: gap {} vs {}", (s - a).abs(), err);
        }
    }

    #[test]
    fn e1_reference_values() {
        assert_relative_eq!(exp_integral_e1(0.5).unwrap(), 0.559_773_594_776_160_8, max_relative = 1e-14);
        assert_relative_eq!(exp_integral_e1(2.0).unwrap(), 0.048_900_510_708_061_12, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_e1(10.0).unwrap(), 4.156_968_929_685_324e-6, max_relative = 1e-13);
    }

    #[test]
    fn j_reference_values() {
        assert_relative_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, max_relative = 1e-14);
        assert_relative_eq!(bessel_j1(1.0), 0.440_050_585_744_933_5, max_relative = 1e-14);
        assert_relative_eq!(bessel_j0(10.0), -0.245_935_764_451_348_34, max_relative = 1e-13);
        assert_relative_eq!(bessel_j1(30.0), -0.118_751_062_616_622_94, max_relative = 1e-12);
        assert_relative_eq!(bessel_j0(60.0), -0.091_471_804_089_061_87, max_relative = 1e-12);
        assert_relative_eq!(bessel_jn(2, 3.0), 0.486_091_260_585_891_1, max_relative = 1e-13);
        assert_eq!(bessel_j0(0.0), 1.0);
        assert_relative_eq!(bessel_j0(1e-8), 1.0, max_relative = 1e-15);
        assert_relative_eq!(bessel_j1(1e-8), 5e-9, max_relative = 1e-14);
    }

    #[test]
    fn j_branches_agree_at_switch_points() {
        for n in 0..3 {
            let x = J_SERIES_UNTIL;
            assert!((jn_series(n, x) - jn_miller(n, x)).abs() < 1e-15, "n = {n}");
            let x = J_HANKEL_FROM;
            assert!((jn_miller(n, x) - bessel_jn(n, x)).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn j_sum_of_squares_identity() {
        // J0^2 + 2 sum_k J_k^2 = 1
        for i in 0..30 {
            let x = 0.3 + 1.7 * i as f64;
            let mut s = bessel_j0(x).powi(2);
            for k in 1..(x as u32 + 40) {
                s += 2.0 * bessel_jn(k, x).powi(2);
            }
            assert!((s - 1.0).abs() < 1e-13, "x = {x}: {s}");
        }
    }

    #[test]
    fn j0_satisfies_bessel_equation() {
        let h = 1e-3;
        for i in 0..40 {
            let x = 0.5 + i as f64 * 0.5;
            let d2 = (bessel_j0(x + h) - 2.0 * bessel_j0(x) + bessel_j0(x - h)) / (h * h);
            let r = d2 - bessel_j1(x) / x + bessel_j0(x);
            assert!(r.abs() < 1e-6, "x = {x}: {r}");
        }
    }

    #[test]
    fn k_reference_values() {
        assert_relative_eq!(bessel_k0(1.0).unwrap(), 0.421_024_438_240_708_34, max_relative = 1e-14);
        assert_relative_eq!(bessel_k1(1.0).unwrap(), 0.601_907_230_197_234_6, max_relative = 1e-14);
        assert_relative_eq!(bessel_k0(0.1).unwrap(), 2.427_069_024_702_016_6, max_relative = 1e-14);
        assert_relative_eq!(bessel_k0(0.01).unwrap(), 4.721_244_730_161_095, max_relative = 1e-14);
        assert_relative_eq!(bessel_k1(0.01).unwrap(), 99.973_894_118_296_25, max_relative = 1e-14);
        assert_relative_eq!(bessel_k0(2.0).unwrap(), 0.113_893_872_749_533_44, max_relative = 1e-13);
        assert_relative_eq!(bessel_k1(2.0).unwrap(), 0.139_865_881_816_522_43, max_relative = 1e-13);
        assert_relative_eq!(bessel_k0(5.0).unwrap(), 0.003_691_098_334_042_594, max_relative = 1e-13);
        assert_relative_eq!(bessel_k1(5.0).unwrap(), 0.004_044_613_445_452_164, max_relative = 1e-13);
        assert_relative_eq!(bessel_k0(30.0).unwrap(), 2.132_477_496_463_056_4e-14, max_relative = 1e-13);
        assert_relative_eq!(bessel_k0(100.0).unwrap(), 4.656_628_229_175_902e-45, max_relative = 1e-12);
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_family(BesselKind::K1, -1.0).is_err());
    }

    #[test]
    fn k_branches_continuous() {
        let x = K_SERIES_UNTIL;
        let (a0, a1) = k01_series(x);
        let (b0, b1) = k01_steed(x);
        assert_relative_eq!(a0, b0, max_relative = 1e-14);
        assert_relative_eq!(a1, b1, max_relative = 1e-14);
    }

    #[test]
    fn spherical_j0_values() {
        assert!(spherical_j0(PI).abs() < 1e-15);
        assert_eq!(spherical_j0(0.0), 1.0);
        assert_relative_eq!(spherical_j0(1e-5), (1e-5f64).sin() / 1e-5, max_relative = 1e-15);
        let h = 1e-6;
        for &x in &[1e-4, 0.5, 2.0, 7.0] {
            let fd = (spherical_j0(x + h) - spherical_j0(x - h)) / (2.0 * h);
            assert!((fd - spherical_j0_prime(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn airy_reference_values() {
        let cases: [(f64, f64, f64, f64, f64); 8] = [
            (1.0, 0.135_292_416_312_881_42, 1.207_423_594_952_871_3, -0.159_147_441_296_793_2, 0.932_435_933_392_775_6),
            (-1.0, 0.535_560_883_292_352_1, 0.103_997_389_496_944_61, -0.010_160_567_116_645_209, 0.592_375_626_422_792_4),
            (5.0, 1.083_444_281_360_744_2e-4, 657.792_044_171_171_2, -2.474_138_908_684_624_8e-4, 1_435.819_080_217_982_5),
            (-5.0, 0.350_761_009_024_114_3, -0.138_369_134_901_600_58, 0.327_192_818_554_443_14, 0.778_411_773_001_899_2),
            (-10.0, 0.040_241_238_486_443_19, -0.314_679_829_643_838_6, 0.996_265_044_132_790_1, 0.119_414_113_399_909_24),
            (10.0, 1.104_753_255_289_868_6e-10, 455_641_153.548_225_16, -3.520_633_676_738_923_6e-10, 1_429_236_134.482_865_8),
            (-30.0, -0.087_968_188_456_842_16, -0.224_446_942_200_566_3, 1.228_620_602_637_485_1, -0.483_694_725_827_681_5),
            (20.0, 1.691_672_868_670_540_3e-27, 2.103_765_049_651_103_8e25, -7.586_391_625_748_355e-27, 9.381_839_336_133_964e25),
        ];
        for (x, ai, bi, aip, bip) in cases {
            let p = airy_pair(x).unwrap();
            assert_relative_eq!(p.ai, ai, max_relative = 1e-10);
            assert_relative_eq!(p.bi, bi, max_relative = 1e-10);
            assert_relative_eq!(p.ai_prime, aip, max_relative = 1e-10);
            assert_relative_eq!(p.bi_prime, bip, max_relative = 1e-10);
        }
    }

    #[test]
    fn airy_origin_normalization() {
        let p = airy_pair(0.0).unwrap();
        let expected = 3f64.powf(-2.0 / 3.0) / 1.354_117_939_426_400_4; // Gamma(2/3)
        assert_relative_eq!(p.ai, expected, max_relative = 1e-15);
    }

    #[test]
    fn airy_wronskian() {
        for i in 0..=400 {
            let x = -20.0 + 0.1 * i as f64;
            let p = airy_pair(x).unwrap();
            assert_relative_eq!(p.wronskian(), 1.0 / PI, max_relative = 1e-12);
        }
        assert!(airy_pair(50.5).is_err());
    }

    #[test]
    fn hyp1f1_values() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            let expect = if x == 0.0 { 1.0 } else { (x as f64).exp_m1() / x };
            assert_relative_eq!(hyp1f1_b2(1, x).unwrap(), expect, max_relative = 1e-15);
        }
        assert_eq!(hyp1f1_b2(2, 0.0).unwrap(), 1.0);
        assert_relative_eq!(hyp1f1_b2(2, 1.5).unwrap(), 1.5f64.exp(), max_relative = 1e-14);
        assert_relative_eq!(hyp1f1_b2(5, 3.0).unwrap(), 223.451_598_270_462_8, max_relative = 1e-13);
        assert_relative_eq!(hyp1f1_b2(4, -3.0).unwrap(), -0.024_893_534_183_931_97, max_relative = 1e-13);
        assert!(hyp1f1_b2(0, 1.0).is_err());
    }

    #[test]
    fn hyp1f1_matches_long_direct_sum() {
        // a = 3, x = -2 vanishes exactly: 1F1(3;2;x) = e^x (1 + x/2)
        let direct = hyp1f1_b2_direct(3.0, -2.0, 200);
        let v = hyp1f1_b2(3, -2.0).unwrap();
        assert!((v - direct).abs() < 1e-14 && v.abs() < 1e-15);
    }

    #[test]
    fn hyp1f1_sequence_matches_pointwise() {
        for &x in &[-2.0, -0.1, 0.3] {
            let seq = hyp1f1_b2_sequence(12, x);
            for (i, v) in seq.iter().enumerate() {
                let a = i as u32 + 1;
                let p = hyp1f1_b2(a, x).unwrap();
                assert!((v - p).abs() < 1e-13 * p.abs().max(1.0), "a = {a}, x = {x}");
            }
        }
        assert_relative_eq!(hyp1f1_b2_sequence(7, -0.1)[6], 0.693_335_429_158_776_1, max_relative = 1e-13);
    }

    #[test]
    fn zeros() {
        let z01 = bessel_zero(0, 1).unwrap().value;
        let z11 = bessel_zero(1, 1).unwrap().value;
        let z02 = bessel_zero(0, 2).unwrap().value;
        assert!((z01 - 2.4048).abs() < 5e-5);
        assert!((z11 - 3.8317).abs() < 5e-5);
        assert_relative_eq!(z01, 2.404_825_557_695_773, max_relative = 1e-14);
        assert_relative_eq!(z11, 3.831_705_970_207_512_4, max_relative = 1e-14);
        assert_relative_eq!(z02, 5.520_078_110_286_311, max_relative = 1e-14);
        assert_relative_eq!(bessel_zero(2, 1).unwrap().value, 5.135_622_301_840_683, max_relative = 1e-14);
        assert_relative_eq!(bessel_zero(1, 2).unwrap().value, 7.015_586_669_815_619, max_relative = 1e-14);
        assert!(z01 < z11 && z11 < z02);
        for n in 0..2 {
            for m in 1..6 {
                let z = bessel_zero(n, m).unwrap();
                assert!(bessel_jn(n, z.value).abs() <= 1e-12);
                assert!(z.value < bessel_zero(n, m + 1).unwrap().value);
            }
        }
        assert!(bessel_zero(0, 0).is_err());
    }

    #[test]
    fn first_regular_zeros() {
        assert_relative_eq!(first_regular_zero(1).unwrap(), PI / 2.0);
        assert!((first_regular_zero(2).unwrap() - 2.4048).abs() < 5e-5);
        assert_relative_eq!(first_regular_zero(3).unwrap(), PI);
        assert!(first_regular_zero(4).is_err());
    }
}
