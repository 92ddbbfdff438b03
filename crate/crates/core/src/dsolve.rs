//! Construction of `D(θ)` from an Arrhenius reaction when κ > 0.
//!
//! Everything here works in dimensionless units (`|A| = K = B = 1`) where
//! `R(θ) = R0·e^{-1/θ}` and the Kirchhoff variable solves
//! `u' = σu/(R − u)` with `σ = sign A`. Three independent routes are
//! provided: the contraction map on `D`, a small-θ asymptotic double series
//! continued by linked Taylor segments, and direct ODE integration.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::construct::ReactionLaw;
use crate::error::{Error, Result};
use crate::ode::{integrate_to_grid, OdeOptions};
use crate::quad::cumulative_simpson;
use crate::specfun::{exp_integral_e1, hyp1f1_b2_sequence};

/// `(3 − √5)e/2`: the contraction map is a contraction for `R0` below this.
pub const CONTRACTION_R0_LIMIT: f64 = 1.038_291_267_470_144_1;

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

/// Dimensionless counterparts of physical quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nondimensional {
    pub r: f64,
    pub t: f64,
    pub theta: f64,
    /// Reaction amplitude in `R = R0·e^{-1/θ}`.
    pub r0: f64,
    /// Physical `D(0) = −A/K²`; scaled diffusivities are `D/D(0)`.
    pub d0_physical: f64,
}

/// Scale by `Kr`, `|A|t`, `θ/B`; the reaction amplitude becomes
/// `R0/(B|A|)`.
pub fn nondimensionalize(a: f64, k: f64, b: f64, r0: f64, r: f64, t: f64, theta: f64) -> Result<Nondimensional> {
    if !(a < 0.0) || !(k > 0.0) || !(b > 0.0) {
        return Err(Error::Parameter(format!(
            "need A < 0, K > 0, B > 0 (got A = {a}, K = {k}, B = {b})"
        )));
    }
    Ok(Nondimensional {
        r: k * r,
        t: a.abs() * t,
        theta: theta / b,
        r0: r0 / (b * a.abs()),
        d0_physical: -a / (k * k),
    })
}

/// `1 + 4R0/e²`, the upper bound on the dimensionless diffusivity.
pub fn dm_bound(r0: f64) -> f64 {
    1.0 + 4.0 * r0 / (E * E)
}

/// `1/(e/R0 − 2 + R0/e)` for `0 < R0 < (3 − √5)e/2`; `None` when the map
/// is not guaranteed to contract.
pub fn contraction_factor_bound(r0: f64) -> Option<f64> {
    if !(r0 > 0.0) || r0 >= CONTRACTION_R0_LIMIT {
        return None;
    }
    let den = E / r0 - 2.0 + r0 / E;
    if den > 1.0 {
        Some(1.0 / den)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Contraction map
// ---------------------------------------------------------------------------

/// `D` and `u = ∫₀^θ D` tabulated on an increasing θ grid.
///
/// Between nodes `u` is the cubic Hermite interpolant in `s = ln θ` with
/// slopes `du/ds = θD`, and `D` is its derivative, so the two stay
/// consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateTable {
    pub theta: Vec<f64>,
    pub d: Vec<f64>,
    pub u: Vec<f64>,
    /// Iteration index (0 for the starting guess).
    pub stage: usize,
}

impl IterateTable {
    pub fn theta_max(&self) -> f64 {
        *self.theta.last().unwrap_or(&0.0)
    }

    fn locate(&self, theta: f64) -> Result<Option<usize>> {
        let n = self.theta.len();
        if n < 2 {
            return Err(Error::Precondition("iterate table has fewer than two nodes".into()));
        }
        if theta > self.theta[n - 1] {
            return Err(Error::OutOfRange {
                value: theta,
                lo: 0.0,
                hi: self.theta[n - 1],
            });
        }
        if theta < self.theta[0] {
            return Ok(None);
        }
        let i = match self.theta.binary_search_by(|x| x.total_cmp(&theta)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        Ok(Some(i))
    }

    fn hermite(&self, i: usize, theta: f64) -> (f64, f64) {
        let (s0, s1) = (self.theta[i].ln(), self.theta[i + 1].ln());
        let h = s1 - s0;
        let t = (theta.ln() - s0) / h;
        let (u0, u1) = (self.u[i], self.u[i + 1]);
        let (m0, m1) = (self.theta[i] * self.d[i] * h, self.theta[i + 1] * self.d[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let u = (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * m1;
        let du_dt = (6.0 * t2 - 6.0 * t) * u0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * u1
            + (3.0 * t2 - 2.0 * t) * m1;
        // du/dθ = (du/dt)/(h·θ)
        (u, du_dt / (h * theta))
    }

    pub fn d(&self, theta: f64) -> Result<f64> {
        match self.locate(theta)? {
            None => Ok(self.d[0]),
            Some(i) => Ok(self.hermite(i, theta).1),
        }
    }

    pub fn u(&self, theta: f64) -> Result<f64> {
        match self.locate(theta)? {
            None => Ok(self.u[0] * theta / self.theta[0]),
            Some(i) => Ok(self.hermite(i, theta).0),
        }
    }
}

/// Geometric grid on `[theta_min, theta_max]`, uniform in `ln θ`
/// (equivalently in `ln β`).
pub fn log_grid(theta_min: f64, theta_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (theta_min.ln(), theta_max.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Starting guess `D0 ≡ 1` on a grid.
pub fn contraction_seed(theta_grid: &[f64]) -> IterateTable {
    IterateTable {
        theta: theta_grid.to_vec(),
        d: vec![1.0; theta_grid.len()],
        u: theta_grid.to_vec(),
        stage: 0,
    }
}

/// One application of `D_{n+1} = D̄_n/(D̄_n − R/θ)` with the running mean
/// `D̄_n = (1/θ)∫₀^θ D_n`, evaluated on `theta_grid`.
///
/// The integral below the first node uses `D̄ = D(θ_min)`, the continuity
/// convention `D̄(0) = D(0)` carried to the grid start.
pub fn contraction_step(d_n: &IterateTable, r: &ReactionLaw, theta_grid: &[f64]) -> Result<IterateTable> {
    if theta_grid.len() < 4 || theta_grid.windows(2).any(|w| !(w[1] > w[0])) || !(theta_grid[0] > 0.0) {
        return Err(Error::Precondition("theta grid must be positive and strictly increasing".into()));
    }
    let d_vals: Vec<f64> = theta_grid.iter().map(|&t| d_n.d(t)).collect::<Result<_>>()?;
    let s: Vec<f64> = theta_grid.iter().map(|t| t.ln()).collect();
    // ∫ D dθ = θ − θ_min + ∫ (D − 1)θ ds, which keeps the small excess exact
    let excess: Vec<f64> = theta_grid.iter().zip(&d_vals).map(|(t, d)| (d - 1.0) * t).collect();
    let cum = cumulative_simpson(&s, &excess);
    let t0 = theta_grid[0];
    let mut u = Vec::with_capacity(theta_grid.len());
    let mut d = Vec::with_capacity(theta_grid.len());
    for (i, &t) in theta_grid.iter().enumerate() {
        let integral = t0 * d_vals[0] + (t - t0) + cum[i];
        let den = integral - r.rate(t);
        if !(den > 0.0) {
            return Err(Error::Precondition(format!(
                "contraction denominator {den:e} <= 0 at theta = {t}"
            )));
        }
        d.push(integral / den);
        u.push(0.0);
    }
    // u for the new iterate, by the same quadrature
    let excess: Vec<f64> = theta_grid.iter().zip(&d).map(|(t, d)| (d - 1.0) * t).collect();
    let cum = cumulative_simpson(&s, &excess);
    for (i, &t) in theta_grid.iter().enumerate() {
        u[i] = t0 * d[0] + (t - t0) + cum[i];
    }
    Ok(IterateTable {
        theta: theta_grid.to_vec(),
        d,
        u,
        stage: d_n.stage + 1,
    })
}

/// `D_0 … D_n` on a common grid.
pub fn contraction_iterates(r: &ReactionLaw, theta_grid: &[f64], n: usize) -> Result<Vec<IterateTable>> {
    let mut out = vec![contraction_seed(theta_grid)];
    for _ in 0..n {
        let next = contraction_step(out.last().expect("seeded"), r, theta_grid)?;
        out.push(next);
    }
    Ok(out)
}

/// `max |a − b|` over a shared grid.
pub fn sup_distance(a: &IterateTable, b: &IterateTable) -> f64 {
    a.d.iter().zip(&b.d).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Small-θ double series
// ---------------------------------------------------------------------------

/// Index used in the `(r − j − 1)q_{r,m}` term of the coefficient
/// recurrence. `M` is the variant that reproduces the reference values;
/// `R` is kept so that the choice can be re-checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JIndex {
    #[default]
    M,
    R,
}

/// Coefficients `q_{r,m}` of
/// `u ~ −σθ + R0·θ·E·Σ_r θ^{-r}E^r Σ_m θ^m q_{r,m}`, `E = e^{-1/θ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSmallTheta {
    pub r0: f64,
    pub sign_a: f64,
    pub j_index: JIndex,
    /// `q[r][m]` for `0 <= r <= r_max`, `0 <= m <= m_max`.
    pub q: Vec<Vec<f64>>,
}

/// Upper limit on either table dimension.
pub const Q_TABLE_LIMIT: usize = 60;

// Neumaier-compensated accumulator.
#[derive(Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn q_coefficients(r0: f64, sign_a: f64, r_max: usize, m_max: usize) -> Result<SeriesSmallTheta> {
    q_coefficients_with(r0, sign_a, r_max, m_max, JIndex::M)
}

/// Fill the table from `q_{0,m} = (−1)ᵐm!`, `q_{r,0} = (−σR0)ʳ/(r+1)` and
///
/// `(r+2)q_{r+1,m+1} = (r−m)q_{r+1,m} + σR0[(r−j−1)q_{r,m} − (r+1)q_{r,m+1} + S]`,
///
/// `S = Σ_{s≤r} Σ_{l≤m} q_{r−s,m−l}[(s+1)q_{s,l} − (s−l)q_{s,l−1}]`, with
/// `q_{r,−1} = 0`.
pub fn q_coefficients_with(
    r0: f64,
    sign_a: f64,
    r_max: usize,
    m_max: usize,
    j_index: JIndex,
) -> Result<SeriesSmallTheta> {
    if r_max > Q_TABLE_LIMIT || m_max > Q_TABLE_LIMIT {
        return Err(Error::Parameter(format!(
            "q table limited to {Q_TABLE_LIMIT} in each index"
        )));
    }
    if sign_a.abs() != 1.0 {
        return Err(Error::Parameter(format!("sign_a = {sign_a} must be +1 or -1")));
    }
    let sr = sign_a * r0;
    let mut q = vec![vec![0.0; m_max + 1]; r_max + 1];
    let mut fact = 1.0;
    for m in 0..=m_max {
        if m > 0 {
            fact *= m as f64;
        }
        q[0][m] = if m % 2 == 0 { fact } else { -fact };
    }
    for r in 0..=r_max {
        q[r][0] = (-sr).powi(r as i32) / (r + 1) as f64;
    }
    let at = |q: &Vec<Vec<f64>>, r: usize, m: isize| if m < 0 { 0.0 } else { q[r][m as usize] };
    for r in 0..r_max {
        for m in 0..m_max {
            let j = match j_index {
                JIndex::M => m as f64,
                JIndex::R => r as f64,
            };
            let mut s = Compensated::default();
            for ss in 0..=r {
                for l in 0..=m {
                    let a = q[r - ss][m - l];
                    let b = (ss + 1) as f64 * q[ss][l] - (ss as f64 - l as f64) * at(&q, ss, l as isize - 1);
                    s.add(a * b);
                }
            }
            let mut inner = Compensated::default();
            inner.add((r as f64 - j - 1.0) * q[r][m]);
            inner.add(-((r + 1) as f64) * q[r][m + 1]);
            inner.add(s.value());
            let v = ((r as f64 - m as f64) * q[r + 1][m] + sr * inner.value()) / (r + 2) as f64;
            if !v.is_finite() {
                return Err(Error::Overflow {
                    func: "q_coefficients",
                    at: (r + 1) as f64,
                });
            }
            q[r + 1][m + 1] = v;
        }
    }
    Ok(SeriesSmallTheta {
        r0,
        sign_a,
        j_index,
        q,
    })
}

/// A series value with the magnitude of the first omitted terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesEval {
    pub value: f64,
    pub error: f64,
}

impl SeriesSmallTheta {
    pub fn r_max(&self) -> usize {
        self.q.len() - 1
    }

    pub fn m_max(&self) -> usize {
        self.q[0].len() - 1
    }

    /// `u(θ)` with the `r = 0` channel summed exactly as `R0·E1(1/θ)` and
    /// each remaining `m`-sum stopped at its smallest term.
    pub fn eval(&self, theta: f64) -> Result<SeriesEval> {
        if !(theta > 0.0) {
            return Err(Error::domain("u_series_small_theta", format!("theta = {theta} must be positive")));
        }
        let x = 1.0 / theta;
        let e = (-x).exp();
        let mut value = Compensated::default();
        value.add(-self.sign_a * theta);
        value.add(self.r0 * exp_integral_e1(x)?);
        let mut error = 0.0;
        let mut pref = self.r0 * theta * e;
        let mut last_channel = 0.0;
        for r in 1..=self.r_max() {
            pref *= e / theta;
            let row = &self.q[r];
            let mut sum = 0.0;
            let mut tm = 1.0;
            let mut prev = f64::INFINITY;
            let mut omitted = 0.0;
            for (m, &c) in row.iter().enumerate() {
                let term = c * tm;
                if term.abs() > prev && m > 1 {
                    omitted = term.abs();
                    break;
                }
                sum += term;
                prev = term.abs();
                omitted = prev;
                tm *= theta;
            }
            value.add(pref * sum);
            error += (pref * omitted).abs();
            last_channel = (pref * sum).abs();
        }
        // next channel scales by roughly R0·E/θ relative to the last one
        error += last_channel * (self.r0.abs() * e / theta).max(0.0);
        Ok(SeriesEval {
            value: value.value(),
            error,
        })
    }

    /// `D = u'` from the ODE `u' = σu/(R − u)` applied to the series value.
    pub fn eval_d(&self, theta: f64) -> Result<f64> {
        if theta == 0.0 {
            return Ok(-self.sign_a);
        }
        let u = self.eval(theta)?.value;
        let r = self.r0 * (-1.0 / theta).exp();
        Ok(self.sign_a * u / (r - u))
    }
}

/// Evaluate the small-θ series; see [`SeriesSmallTheta::eval`].
pub fn u_series_small_theta(s: &SeriesSmallTheta, theta: f64) -> Result<SeriesEval> {
    s.eval(theta)
}

/// Evaluate the small-θ series and reject points where the error estimate
/// exceeds `tol`.
pub fn u_series_small_theta_within(s: &SeriesSmallTheta, theta: f64, tol: f64) -> Result<f64> {
    let v = s.eval(theta)?;
    if v.error > tol {
        return Err(Error::Precondition(format!(
            "series error estimate {:e} exceeds {tol:e} at theta = {theta}",
            v.error
        )));
    }
    Ok(v.value)
}

// ---------------------------------------------------------------------------
// Taylor segments
// ---------------------------------------------------------------------------

/// Exponential in the denominator of the Taylor recurrence. `Theta0`
/// (`R0·e^{-1/θ0}`) is the consistent choice; `U0` (`R0·e^{-1/λ0}`) is kept
/// for re-checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaylorDenominator {
    #[default]
    Theta0,
    U0,
}

/// `u = Σ λ_n yⁿ` with `y = (θ0 − θ)/θ0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorSegment {
    pub theta0: f64,
    pub lambda: Vec<f64>,
    /// Radius in θ inside which the truncated series is trusted.
    pub trust_radius: f64,
}

impl TaylorSegment {
    pub fn u(&self, theta: f64) -> f64 {
        let y = (self.theta0 - theta) / self.theta0;
        self.lambda.iter().rev().fold(0.0, |acc, c| acc * y + c)
    }

    pub fn d(&self, theta: f64) -> f64 {
        let y = (self.theta0 - theta) / self.theta0;
        let n = self.lambda.len();
        let mut acc = 0.0;
        for k in (1..n).rev() {
            acc = acc * y + k as f64 * self.lambda[k];
        }
        -acc / self.theta0
    }

    pub fn order(&self) -> usize {
        self.lambda.len().saturating_sub(1)
    }
}

/// Taylor coefficients of `u` about `θ0`:
///
/// `λ_{i+1} = [σθ0λ_i − Σ_{n=1}^{i}(i−n+1)λ_{i−n+1}(λ_n + (R0/θ0)F_n)] / ((i+1)(λ0 − R0e^{-1/θ0}))`
///
/// with `F_n = 1F1(n+1; 2; −1/θ0)`.
pub fn u_taylor_segment(theta0: f64, lambda0: f64, n: usize, r0: f64, sign_a: f64) -> Result<TaylorSegment> {
    u_taylor_segment_with(theta0, lambda0, n, r0, sign_a, TaylorDenominator::Theta0)
}

pub fn u_taylor_segment_with(
    theta0: f64,
    lambda0: f64,
    n: usize,
    r0: f64,
    sign_a: f64,
    denominator: TaylorDenominator,
) -> Result<TaylorSegment> {
    if !(theta0 > 0.0) {
        return Err(Error::domain("u_taylor_segment", format!("theta0 = {theta0} must be positive")));
    }
    let lambda = taylor_coefficients(theta0, lambda0, n, r0, sign_a, denominator)?;
    let trust = trust_radius_y(&lambda, 1e-14 * lambda0.abs().max(1.0));
    Ok(TaylorSegment {
        theta0,
        lambda,
        trust_radius: trust * theta0,
    })
}

fn taylor_coefficients(
    theta0: f64,
    lambda0: f64,
    n: usize,
    r0: f64,
    sign_a: f64,
    denominator: TaylorDenominator,
) -> Result<Vec<f64>> {
    let ex = match denominator {
        TaylorDenominator::Theta0 => (-1.0 / theta0).exp(),
        TaylorDenominator::U0 => (-1.0 / lambda0).exp(),
    };
    let den0 = lambda0 - r0 * ex;
    if den0.abs() < 1e-14 * lambda0.abs().max(1e-300) || den0 == 0.0 {
        return Err(Error::Precondition(format!(
            "Taylor denominator vanishes at theta0 = {theta0}, lambda0 = {lambda0}"
        )));
    }
    // F_n = M(n+1), M(a) = 1F1(a; 2; x) for a = 1..=n+1
    let m = hyp1f1_b2_sequence(n + 1, -1.0 / theta0);
    let g: Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { r0 / theta0 * m[k] }).collect();
    let mut lam = Vec::with_capacity(n + 1);
    lam.push(lambda0);
    for i in 0..n {
        let mut s = Compensated::default();
        s.add(sign_a * theta0 * lam[i]);
        for k in 1..=i {
            s.add(-((i - k + 1) as f64) * lam[i - k + 1] * (lam[k] + g[k]));
        }
        let v = s.value() / ((i + 1) as f64 * den0);
        if !v.is_finite() {
            return Err(Error::Overflow {
                func: "u_taylor_segment",
                at: theta0,
            });
        }
        lam.push(v);
    }
    Ok(lam)
}

// Largest |y| for which the last retained terms stay below `tol`, capped by
// 0.9 of the root-test estimate of the convergence radius.
fn trust_radius_y(lambda: &[f64], tol: f64) -> f64 {
    let n = lambda.len();
    if n < 8 {
        return 0.0;
    }
    let tail = &lambda[n * 3 / 4..];
    let mut root = f64::INFINITY;
    let mut tail_r = f64::INFINITY;
    for (off, c) in tail.iter().enumerate() {
        let k = (n * 3 / 4 + off) as f64;
        if *c != 0.0 {
            root = root.min(c.abs().powf(-1.0 / k));
            tail_r = tail_r.min((tol / c.abs()).powf(1.0 / k));
        }
    }
    (0.9 * root).min(tail_r)
}

// ---------------------------------------------------------------------------
// Piecewise build
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SegmentSeries {
    SmallTheta { series: SeriesSmallTheta },
    Taylor { segment: TaylorSegment },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub series: SegmentSeries,
}

/// Agreement of adjacent segments at the probe points of a splice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpliceCheck {
    pub theta: f64,
    pub probes: Vec<(f64, f64)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildProvenance {
    pub method: String,
    pub r0: f64,
    pub sign_a: f64,
    pub tol: f64,
    pub j_index: JIndex,
    pub denominator: TaylorDenominator,
}

/// `u(θ)` and `D(θ)` on `[0, theta_max]` from a small-θ series followed by
/// Taylor segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDiffusivity {
    pub segments: Vec<Segment>,
    pub theta_max: f64,
    pub splices: Vec<SpliceCheck>,
    pub provenance: BuildProvenance,
}

impl PiecewiseDiffusivity {
    fn segment(&self, theta: f64) -> Result<&Segment> {
        if !(theta >= 0.0) || theta > self.theta_max {
            return Err(Error::OutOfRange {
                value: theta,
                lo: 0.0,
                hi: self.theta_max,
            });
        }
        let idx = self.segments.partition_point(|s| s.hi < theta);
        Ok(&self.segments[idx.min(self.segments.len() - 1)])
    }

    pub fn u(&self, theta: f64) -> Result<f64> {
        if theta == 0.0 {
            return Ok(0.0);
        }
        match &self.segment(theta)?.series {
            SegmentSeries::SmallTheta { series } => Ok(series.eval(theta)?.value),
            SegmentSeries::Taylor { segment } => Ok(segment.u(theta)),
        }
    }

    pub fn d(&self, theta: f64) -> Result<f64> {
        match &self.segment(theta)?.series {
            SegmentSeries::SmallTheta { series } => series.eval_d(theta),
            SegmentSeries::Taylor { segment } => Ok(segment.d(theta)),
        }
    }

    pub fn splices_pass(&self) -> bool {
        self.splices.iter().all(|s| s.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Knobs for [`build_diffusivity_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildOptions {
    /// Upper end of the small-θ series region.
    pub theta_a: f64,
    pub r_max: usize,
    pub m_max: usize,
    pub max_segments: usize,
    pub max_order: usize,
    /// Explicit Taylor centers; when empty they are placed adaptively.
    pub centers: Vec<f64>,
    /// Splice points between explicit centers (one fewer than `centers`).
    pub splice_points: Vec<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            theta_a: 0.1,
            r_max: 10,
            m_max: 10,
            max_segments: 64,
            max_order: 1500,
            centers: Vec::new(),
            splice_points: Vec::new(),
        }
    }
}

impl BuildOptions {
    /// Centers at 0.5 and 10 spliced at θ = 0.9.
    pub fn two_centers() -> Self {
        Self {
            centers: vec![0.5, 10.0],
            splice_points: vec![0.9],
            ..Self::default()
        }
    }
}

/// Adaptive build with `σ = −1` and default options.
pub fn build_diffusivity(r0: f64, theta_max: f64, tol: f64) -> Result<PiecewiseDiffusivity> {
    build_diffusivity_with(r0, theta_max, tol, &BuildOptions::default())
}

pub fn build_diffusivity_with(r0: f64, theta_max: f64, tol: f64, opts: &BuildOptions) -> Result<PiecewiseDiffusivity> {
    let sign_a = -1.0;
    if !(tol > 0.0) || !(theta_max > 0.0) {
        return Err(Error::Parameter("tol and theta_max must be positive".into()));
    }
    let series = q_coefficients(r0, sign_a, opts.r_max, opts.m_max)?;
    let theta_a = opts.theta_a.min(theta_max);
    let mut segments = vec![Segment {
        lo: 0.0,
        hi: theta_a,
        series: SegmentSeries::SmallTheta { series },
    }];
    let mut splices = Vec::new();
    let method;
    if opts.centers.is_empty() {
        method = "adaptive".to_string();
        let mut e = theta_a;
        while e < theta_max {
            if segments.len() > opts.max_segments {
                return Err(Error::convergence(
                    "build_diffusivity",
                    format!("segment budget {} exhausted at theta = {e}", opts.max_segments),
                ));
            }
            let c = 2.0 * e;
            let hi = (3.0 * e).min(theta_max);
            let (lo_y, hi_y) = ((c - hi) / c, (c - 0.9 * e) / c);
            let y_max = lo_y.abs().max(hi_y.abs());
            let (seg, check) = splice_segment(&segments, c, e, y_max, r0, sign_a, tol, opts.max_order)?;
            splices.push(check);
            segments.push(Segment {
                lo: e,
                hi,
                series: SegmentSeries::Taylor { segment: seg },
            });
            e = hi;
        }
    } else {
        method = format!("centers {:?}", opts.centers);
        if opts.splice_points.len() + 1 != opts.centers.len() {
            return Err(Error::Parameter("need one splice point between each pair of centers".into()));
        }
        let mut bounds = vec![theta_a];
        bounds.extend_from_slice(&opts.splice_points);
        bounds.push(theta_max);
        for (k, &c) in opts.centers.iter().enumerate() {
            let (lo, hi) = (bounds[k], bounds[k + 1]);
            if !(hi > lo) {
                return Err(Error::Parameter("splice points must increase".into()));
            }
            let y_max = ((c - lo) / c).abs().max(((c - hi) / c).abs()).max(((c - 0.9 * lo) / c).abs());
            if y_max >= 1.0 {
                return Err(Error::Parameter(format!(
                    "segment [{lo}, {hi}] is outside the convergence disc of center {c}"
                )));
            }
            let (seg, check) = splice_segment(&segments, c, lo, y_max, r0, sign_a, tol, opts.max_order)?;
            splices.push(check);
            segments.push(Segment {
                lo,
                hi,
                series: SegmentSeries::Taylor { segment: seg },
            });
        }
    }
    Ok(PiecewiseDiffusivity {
        segments,
        theta_max,
        splices,
        provenance: BuildProvenance {
            method,
            r0,
            sign_a,
            tol,
            j_index: JIndex::M,
            denominator: TaylorDenominator::Theta0,
        },
    })
}

fn eval_chain(segments: &[Segment], theta: f64) -> Result<f64> {
    let seg = segments.last().expect("chain is never empty");
    match &seg.series {
        SegmentSeries::SmallTheta { series } => Ok(series.eval(theta)?.value),
        SegmentSeries::Taylor { segment } => Ok(segment.u(theta)),
    }
}

fn eval_chain_d(segments: &[Segment], theta: f64) -> Result<f64> {
    let seg = segments.last().expect("chain is never empty");
    match &seg.series {
        SegmentSeries::SmallTheta { series } => series.eval_d(theta),
        SegmentSeries::Taylor { segment } => Ok(segment.d(theta)),
    }
}

// Find λ0 at center `c` so that the new segment matches the last segment of
// the chain at `e`, choose the order from a tail test over |y| <= y_max, and
// check agreement at two probe points inside the previous segment.
#[allow(clippy::too_many_arguments)]
fn splice_segment(
    chain: &[Segment],
    c: f64,
    e: f64,
    y_max: f64,
    r0: f64,
    sign_a: f64,
    tol: f64,
    max_order: usize,
) -> Result<(TaylorSegment, SpliceCheck)> {
    let target = eval_chain(chain, e)?;
    let slope = eval_chain_d(chain, e)?;
    let y_e = (c - e) / c;
    let mismatch = |l0: f64, n: usize| -> Result<f64> {
        let lam = taylor_coefficients(c, l0, n, r0, sign_a, TaylorDenominator::Theta0)?;
        let u = lam.iter().rev().fold(0.0, |acc, v| acc * y_e + v);
        Ok(u - target)
    };
    let order = |l0: f64| -> Result<usize> {
        let lam = taylor_coefficients(c, l0, max_order, r0, sign_a, TaylorDenominator::Theta0)?;
        let floor = 1e-3 * tol * l0.abs().max(1.0);
        let mut run = 0;
        for (k, v) in lam.iter().enumerate() {
            if (v * y_max.powi(k as i32)).abs() <= floor {
                run += 1;
                if run >= 8 {
                    return Ok(k + 4);
                }
            } else {
                run = 0;
            }
        }
        Err(Error::convergence(
            "build_diffusivity",
            format!("center {c}: no order up to {max_order} meets the tail test"),
        ))
    };
    let mut x0 = target + slope * (c - e);
    let mut n = order(x0)?;
    let mut x1 = x0 * (1.0 + 1e-4);
    let mut f0 = mismatch(x0, n)?;
    let mut f1 = mismatch(x1, n)?;
    for iter in 0..100 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = mismatch(x1, n)?;
        if f1.abs() <= 1e-15 * target.abs().max(1.0) {
            break;
        }
        if iter == 3 {
            // refine the order once λ0 is close
            n = order(x1)?;
            f0 = mismatch(x0, n)?;
            f1 = mismatch(x1, n)?;
        }
    }
    let n = order(x1)?.max(n);
    let lambda = taylor_coefficients(c, x1, n, r0, sign_a, TaylorDenominator::Theta0)?;
    let trust = trust_radius_y(&lambda, 1e-3 * tol * x1.abs().max(1.0));
    let seg = TaylorSegment {
        theta0: c,
        lambda,
        trust_radius: trust.max(y_max) * c,
    };
    let mut probes = Vec::new();
    let mut passed = true;
    for &p in &[0.9 * e, 0.95 * e] {
        let gap = (seg.u(p) - eval_chain(chain, p)?).abs();
        passed &= gap <= tol * (1.0f64).max(target.abs());
        probes.push((p, gap));
    }
    Ok((
        seg,
        SpliceCheck {
            theta: e,
            probes,
            passed,
        },
    ))
}

// ---------------------------------------------------------------------------
// ODE oracle
// ---------------------------------------------------------------------------

/// Leading behaviour `u ≈ −σθ + R0·E1(1/θ)`; the first neglected channel is
/// `O(e^{-2/θ})`, below double precision for `θ <= 0.02`.
pub fn leading_order_u(r0: f64, sign_a: f64, theta: f64) -> Result<f64> {
    Ok(-sign_a * theta + r0 * exp_integral_e1(1.0 / theta)?)
}

/// Integrate `u' = A·u/(R(θ) − κu)` from `(theta_s, u_s)` to every point of
/// `theta_grid` with local tolerance 1e-13.
pub fn ode_oracle_u(
    r: &ReactionLaw,
    a: f64,
    kappa: f64,
    theta_grid: &[f64],
    init: (f64, f64),
) -> Result<Vec<f64>> {
    let (ts, us) = init;
    let f = |t: f64, u: f64| a * u / (r.rate(t) - kappa * u);
    let mut out = vec![0.0; theta_grid.len()];
    let mut fwd: Vec<(usize, f64)> = theta_grid.iter().copied().enumerate().filter(|(_, t)| *t >= ts).collect();
    let mut bwd: Vec<(usize, f64)> = theta_grid.iter().copied().enumerate().filter(|(_, t)| *t < ts).collect();
    fwd.sort_by(|a, b| a.1.total_cmp(&b.1));
    bwd.sort_by(|a, b| b.1.total_cmp(&a.1));
    let opts = OdeOptions::default();
    for part in [fwd, bwd] {
        if part.is_empty() {
            continue;
        }
        let ts_grid: Vec<f64> = part.iter().map(|p| p.1).collect();
        let ys = integrate_to_grid(f, ts, us, &ts_grid, opts)?;
        for ((idx, _), y) in part.iter().zip(ys) {
            out[*idx] = y;
        }
    }
    Ok(out)
}

/// Oracle for the dimensionless Arrhenius problem seeded at θ = 0.02 from
/// [`leading_order_u`].
pub fn arrhenius_oracle_u(r0: f64, theta_grid: &[f64]) -> Result<Vec<f64>> {
    let ts = 0.02;
    let us = leading_order_u(r0, -1.0, ts)?;
    ode_oracle_u(&ReactionLaw::Arrhenius { r0, b: 1.0 }, -1.0, 1.0, theta_grid, (ts, us))
}

// ---------------------------------------------------------------------------
// Variant selection
// ---------------------------------------------------------------------------

/// Outcome of comparing the two readings of an ambiguous formula against the
/// ODE oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantCheck {
    pub theta: f64,
    pub oracle: f64,
    /// `(label, value, |value − oracle|)` per candidate.
    pub candidates: Vec<(String, f64, f64)>,
    pub chosen: Option<String>,
}

/// Compare the `j = m` and `j = r` recurrences at θ = 0.1 (R0 = 1, σ = −1,
/// 10×10 table); accept a candidate within 1e-12 of the oracle.
pub fn resolve_j_index() -> Result<VariantCheck> {
    let theta = 0.1;
    let oracle = arrhenius_oracle_u(1.0, &[theta])?[0];
    let mut candidates = Vec::new();
    for (label, j) in [("m", JIndex::M), ("r", JIndex::R)] {
        let s = q_coefficients_with(1.0, -1.0, 10, 10, j)?;
        let v = s.eval(theta)?.value;
        candidates.push((label.to_string(), v, (v - oracle).abs()));
    }
    Ok(pick(theta, oracle, candidates, 1e-12))
}

/// Compare `e^{-1/θ0}` and `e^{-1/λ0}` in the Taylor denominator: segment
/// about 0.5 seeded with the oracle value there, evaluated at θ = 0.1.
pub fn resolve_taylor_denominator() -> Result<VariantCheck> {
    let grid = [0.1, 0.5];
    let oracle = arrhenius_oracle_u(1.0, &grid)?;
    let mut candidates = Vec::new();
    for (label, den) in [("theta0", TaylorDenominator::Theta0), ("u0", TaylorDenominator::U0)] {
        let seg = u_taylor_segment_with(0.5, oracle[1], 200, 1.0, -1.0, den)?;
        let v = seg.u(0.1);
        candidates.push((label.to_string(), v, (v - oracle[0]).abs()));
    }
    Ok(pick(0.1, oracle[0], candidates, 1e-11))
}

fn pick(theta: f64, oracle: f64, candidates: Vec<(String, f64, f64)>, tol: f64) -> VariantCheck {
    let chosen = candidates
        .iter()
        .filter(|c| c.2 <= tol)
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|c| c.0.clone());
    VariantCheck {
        theta,
        oracle,
        candidates,
        chosen,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const U_TENTH: f64 = 0.100_004_157_909_4;
    const U_HALF: f64 = 0.555_824_091_959_37;
    const U_NINE_TENTHS: f64 = 1.113_517_208_780_1;
    const U_TEN: f64 = 11.793_130_280_846_56;

    #[test]
    fn scaling() {
        let s = nondimensionalize(-1.0, 1.0, 1.0, 2.0, 0.3, 0.4, 0.5).unwrap();
        assert_eq!((s.r, s.t, s.theta, s.r0, s.d0_physical), (0.3, 0.4, 0.5, 2.0, 1.0));
        let s = nondimensionalize(-4.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.d0_physical, 1.0);
        assert!(nondimensionalize(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn max_rate_over_theta_is_r0_over_e() {
        let law = ReactionLaw::Arrhenius { r0: 1.0, b: 1.0 };
        let best = (1..20000).map(|i| i as f64 * 1e-3).map(|t| law.rate(t) / t).fold(0.0, f64::max);
        assert!((best - 1.0 / E).abs() < 1e-8);
    }

    #[test]
    fn bounds() {
        assert!((dm_bound(1.0) - 1.5413).abs() < 1e-4);
        assert_eq!(dm_bound(0.0), 1.0);
        assert!((contraction_factor_bound(1.0).unwrap() - 1.0 / 1.086).abs() < 1e-3);
        assert!(contraction_factor_bound(2.0).is_none());
        assert!(contraction_factor_bound(CONTRACTION_R0_LIMIT).is_none());
        assert_relative_eq!(CONTRACTION_R0_LIMIT, (3.0 - 5f64.sqrt()) * E / 2.0, max_relative = 1e-15);
        let near = contraction_factor_bound(CONTRACTION_R0_LIMIT * (1.0 - 1e-7)).unwrap();
        assert!(near < 1.0 && near > 0.999);
    }

    #[test]
    fn q_base_cases() {
        let s = q_coefficients(1.0, -1.0, 6, 6).unwrap();
        assert_eq!(s.q[0][3], -6.0);
        assert_relative_eq!(s.q[2][0], 1.0 / 3.0);
        assert_relative_eq!(s.q[1][1], -0.5, max_relative = 1e-15);
        assert_relative_eq!(s.q[1][2], 0.75, max_relative = 1e-15);
        assert_relative_eq!(s.q[2][1], -0.722_222_222_222_222_2, max_relative = 1e-14);
        let expect = [0.25, -0.958_333_333_333_333_3, 1.940_972_222_222_222, -4.416_666_666_666_667, 12.763_888_888_888_89, -46.696_759_259_259_26];
        for (m, v) in expect.iter().enumerate() {
            assert_relative_eq!(s.q[3][m], *v, max_relative = 1e-12);
        }
        assert!(q_coefficients(1.0, -1.0, 61, 3).is_err());
    }

    #[test]
    fn series_reference_value() {
        let s = q_coefficients(1.0, -1.0, 10, 10).unwrap();
        let v = s.eval(0.1).unwrap();
        assert!((v.value - U_TENTH).abs() < 1e-12, "{}", v.value);
        assert!(v.error < 1e-11);
    }

    #[test]
    fn series_leading_term() {
        let s = q_coefficients(1.0, -1.0, 10, 10).unwrap();
        for &t in &[0.01, 0.005] {
            assert_relative_eq!(s.eval(t).unwrap().value, t, max_relative = 1e-15);
        }
        assert!(u_series_small_theta_within(&s, 0.5, 1e-12).is_err());
    }

    #[test]
    fn series_matches_oracle() {
        let s = q_coefficients(1.0, -1.0, 10, 10).unwrap();
        let grid: Vec<f64> = (0..=16).map(|i| 0.02 + 0.005 * i as f64).collect();
        let oracle = arrhenius_oracle_u(1.0, &grid).unwrap();
        for (t, o) in grid.iter().zip(&oracle) {
            let v = s.eval(*t).unwrap().value;
            assert!((v - o).abs() <= 1e-11, "theta = {t}: {v} vs {o}");
        }
    }

    #[test]
    fn oracle_reference_values() {
        let o = arrhenius_oracle_u(1.0, &[0.1, 0.5, 0.9, 10.0]).unwrap();
        assert!((o[0] - U_TENTH).abs() < 1e-12);
        assert!((o[1] - U_HALF).abs() < 1e-11);
        assert!((o[2] - U_NINE_TENTHS).abs() < 1e-11);
        assert!((o[3] - U_TEN).abs() < 1e-9);
    }

    #[test]
    fn oracle_zero_reaction() {
        let r = ReactionLaw::Constant { r0: 0.0 };
        let o = ode_oracle_u(&r, -1.0, 1.0, &[0.5, 2.0, 3.0], (1.0, 1.7)).unwrap();
        for (t, v) in [0.5, 2.0, 3.0].iter().zip(o) {
            assert_relative_eq!(v, 1.7 + (t - 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn taylor_about_half() {
        let seg = u_taylor_segment(0.5, U_HALF, 200, 1.0, -1.0).unwrap();
        assert!((seg.u(0.1) - U_TENTH).abs() < 1e-11);
        assert!((seg.u(0.9) - U_NINE_TENTHS).abs() < 1e-11);
        assert!(seg.trust_radius > 0.3 && seg.trust_radius < 0.5);
        assert!(u_taylor_segment(0.5, (-2.0f64).exp(), 10, 1.0, -1.0).is_err());
    }

    #[test]
    fn taylor_about_ten() {
        let seg = u_taylor_segment(10.0, U_TEN, 600, 1.0, -1.0).unwrap();
        let o = arrhenius_oracle_u(1.0, &[19.5]).unwrap();
        assert!((seg.u(19.5) - o[0]).abs() < 1e-9, "{} vs {}", seg.u(19.5), o[0]);
        assert!((seg.u(0.9) - U_NINE_TENTHS).abs() < 1e-10);
    }

    #[test]
    fn open_question_variants() {
        let j = resolve_j_index().unwrap();
        assert_eq!(j.chosen.as_deref(), Some("m"));
        let d = resolve_taylor_denominator().unwrap();
        assert_eq!(d.chosen.as_deref(), Some("theta0"));
    }

    #[test]
    fn hermite_table_consistency() {
        let grid = log_grid(0.01, 100.0, 400);
        let law = ReactionLaw::Arrhenius { r0: 1.0, b: 1.0 };
        let its = contraction_iterates(&law, &grid, 1).unwrap();
        let d1 = &its[1];
        for &t in &[0.05, 0.7, 1.0, 3.3, 50.0] {
            let exact = 1.0 / (1.0 - (-1.0 / t as f64).exp() / t);
            assert!((d1.d(t).unwrap() - exact).abs() < 1e-6, "theta = {t}");
            let h = 1e-4 * t;
            let fd = (d1.u(t + h).unwrap() - d1.u(t - h).unwrap()) / (2.0 * h);
            assert!((fd - d1.d(t).unwrap()).abs() < 1e-6);
        }
        assert!(d1.d(200.0).is_err());
    }

    #[test]
    fn contraction_zero_reaction_is_fixed() {
        let grid = log_grid(0.01, 10.0, 200);
        let its = contraction_iterates(&ReactionLaw::Constant { r0: 0.0 }, &grid, 2).unwrap();
        assert!(sup_distance(&its[0], &its[2]) < 1e-14);
    }

    #[test]
    fn contraction_precondition() {
        let grid = log_grid(0.01, 10.0, 200);
        assert!(contraction_step(&contraction_seed(&grid), &ReactionLaw::Arrhenius { r0: 5.0, b: 1.0 }, &grid).is_err());
    }

    fn check_build(b: &PiecewiseDiffusivity, tol: f64) {
        assert!(b.splices_pass(), "{:?}", b.splices);
        let grid: Vec<f64> = (1..=400).map(|i| 0.02 + (b.theta_max - 0.02) * i as f64 / 400.0).collect();
        let oracle = arrhenius_oracle_u(1.0, &grid).unwrap();
        for (t, o) in grid.iter().zip(&oracle) {
            let u = b.u(*t).unwrap();
            assert!((u - o).abs() <= 10.0 * tol * o.abs().max(1.0), "theta = {t}: {u} vs {o}");
        }
        for (t, v) in [(0.1, U_TENTH), (0.5, U_HALF), (0.9, U_NINE_TENTHS), (10.0, U_TEN)] {
            assert!((b.u(t).unwrap() - v).abs() <= 1e-11 * v, "theta = {t}");
        }
    }

    #[test]
    fn adaptive_build() {
        let b = build_diffusivity(1.0, 19.5, 1e-10).unwrap();
        check_build(&b, 1e-10);
        assert_eq!(b.d(0.0).unwrap(), 1.0);
        let peak = (0..=2000).map(|i| b.d(19.5 * i as f64 / 2000.0).unwrap()).fold(0.0, f64::max);
        assert!(peak <= dm_bound(1.0) && peak > 1.4);
        for i in 1..=2000 {
            assert!(b.d(19.5 * i as f64 / 2000.0).unwrap() >= 1.0);
        }
        assert!(b.u(20.0).is_err());
    }

    #[test]
    fn two_center_build() {
        let b = build_diffusivity_with(1.0, 19.5, 1e-10, &BuildOptions::two_centers()).unwrap();
        assert_eq!(b.segments.len(), 3);
        check_build(&b, 1e-10);
        match &b.segments[2].series {
            SegmentSeries::Taylor { segment } => assert!((segment.lambda[0] - U_TEN).abs() < 1e-10),
            _ => panic!("expected a Taylor segment"),
        }
    }

    #[test]
    fn build_round_trips_through_json() {
        let b = build_diffusivity(1.0, 5.0, 1e-10).unwrap();
        let back = PiecewiseDiffusivity::from_json(&b.to_json().unwrap()).unwrap();
        for &t in &[0.05, 0.3, 2.0, 4.9] {
            assert_eq!(b.u(t).unwrap(), back.u(t).unwrap());
        }
    }

    #[test]
    fn segment_derivative_matches_differences() {
        let b = build_diffusivity(1.0, 19.5, 1e-10).unwrap();
        for &t in &[0.05, 0.15, 0.8, 3.0, 15.0] {
            let h = 1e-5 * t;
            let fd = (b.u(t + h).unwrap() - b.u(t - h).unwrap()) / (2.0 * h);
            assert!((fd - b.d(t).unwrap()).abs() < 1e-7, "theta = {t}");
        }
    }

    #[test]
    fn contraction_ratios() {
        let grid = log_grid(0.01, 1e5, 40001);
        let law = ReactionLaw::Arrhenius { r0: 1.0, b: 1.0 };
        let its = contraction_iterates(&law, &grid, 7).unwrap();
        let diffs: Vec<f64> = its.windows(2).map(|w| sup_distance(&w[0], &w[1])).collect();
        for n in 1..=5 {
            assert!(diffs[n] / diffs[n - 1] <= 1.0 / 1.086, "n = {n}");
        }
    }
}
