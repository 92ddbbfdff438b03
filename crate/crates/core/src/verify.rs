//! Independent checks of assembled solutions: finite-difference residual of
//! the full nonlinear equation, a method-of-lines evolution oracle, and the
//! stability criterion with its perturbation experiment.

use std::f64::consts::{E, PI};
use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::construct::{kirchhoff_u, invert_kirchhoff, DiffusivityRep, ReactionLaw};
use crate::dsolve::{build_diffusivity, dm_bound};
use crate::error::{Error, Result};
use crate::quad::gk15;
use crate::scenario::{Scenario, Solution};
use crate::spatial::{unit_sphere_area, BoundaryKind, Hetero};
use crate::specfun::{bessel_jn, bessel_zero};

/// Tolerance on the relative PDE residual used by the acceptance checks.
pub const RESIDUAL_TOL: f64 = 1e-5;

/// Format a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Space-time sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub dim: u32,
    /// Heterogeneity factor at each radial node.
    pub f: Vec<f64>,
    pub hetero: Hetero,
}

impl Grid {
    pub fn new(r: Vec<f64>, t: Vec<f64>, dim: u32, hetero: Hetero) -> Result<Self> {
        for (name, v) in [("r", &r), ("t", &t)] {
            if v.len() < 4 {
                return Err(Error::Parameter(format!("grid needs at least 4 {name} nodes")));
            }
            if !v.windows(2).all(|w| w[1] > w[0]) {
                return Err(Error::Parameter(format!("{name} nodes must be strictly increasing")));
            }
        }
        if r[0] < 0.0 {
            return Err(Error::Parameter("radial nodes must be nonnegative".into()));
        }
        if r[0] == 0.0 && hetero.singular_at_origin() {
            return Err(Error::Precondition("grid spans the heterogeneity singularity at r = 0".into()));
        }
        let f = r.iter().map(|&x| hetero.f(x)).collect();
        Ok(Self { r, t, dim, f, hetero })
    }

    /// Radial nodes uniform from the origin or where `r^{d−1}f` is constant,
    /// geometric on other annuli; time nodes uniform over the verification
    /// window.
    pub fn for_scenario(s: &Scenario, nr: usize, nt: usize) -> Result<Self> {
        let (lo, hi) = s.domain;
        let flat = s.dim == 2 && matches!(s.profile.hetero, Hetero::InverseR { .. });
        let mut r: Vec<f64> = if lo == 0.0 || flat {
            (0..nr).map(|i| lo + (hi - lo) * i as f64 / (nr - 1) as f64).collect()
        } else {
            (0..nr).map(|i| lo * (hi / lo).powf(i as f64 / (nr - 1) as f64)).collect()
        };
        if let Some(last) = r.last_mut() {
            *last = hi;
        }
        let (t0, t1) = (s.time(s.grid.t_span.0), s.time(s.grid.t_span.1));
        let t = (0..nt).map(|j| t0 + (t1 - t0) * j as f64 / (nt - 1) as f64).collect();
        Grid::new(r, t, s.dim, s.profile.hetero)
    }
}

/// Face conductances approximating `r^{d−1}f/h` on each face. On an annulus
/// they are `1/∫_{r_i}^{r_{i+1}} ds/(s^{d−1}f(s))`, exact for the fundamental
/// solutions; grids through the origin use midpoint values, which are exact
/// for even polynomials there.
fn face_weights(r: &[f64], dim: u32, hetero: &Hetero) -> Vec<f64> {
    let through_origin = r[0] == 0.0;
    r.windows(2)
        .map(|w| {
            if through_origin {
                let m = 0.5 * (w[0] + w[1]);
                return m.powi(dim as i32 - 1) * hetero.f(m) / (w[1] - w[0]);
            }
            let g = |s: f64| 1.0 / (s.powi(dim as i32 - 1) * hetero.f(s));
            let (v, _) = gk15(&g, w[0], w[1]);
            1.0 / v
        })
        .collect()
}

// Conservative approximation of (1/r^{d−1})∂_r(r^{d−1} f ∂_r u) at node i.
fn apply_operator(u: &[f64], r: &[f64], w: &[f64], dim: u32, i: usize) -> f64 {
    if i == 0 && r[0] == 0.0 {
        return 2.0 * dim as f64 * (u[1] - u[0]) / (r[1] * r[1]);
    }
    let m = r[i].powi(dim as i32 - 1) * 0.5 * (r[i + 1] - r[i - 1]);
    (w[i] * (u[i + 1] - u[i]) - w[i - 1] * (u[i] - u[i - 1])) / m
}

// ---------------------------------------------------------------------------
// PDE residual
// ---------------------------------------------------------------------------

/// Summary of a finite-difference residual evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs_residual: f64,
    pub rms_residual: f64,
    /// `max_abs_residual / max|θ_t|`.
    pub max_relative: f64,
    /// `max|θ_t|` over the evaluated nodes.
    pub scale: f64,
    /// `(r, t)` of the largest residual.
    pub location: (f64, f64),
    /// `log₂` of the residual ratio under one halving of both steps.
    pub order: Option<f64>,
    pub nr: usize,
    pub nt: usize,
    /// Largest |residual| over time at each radial node evaluated.
    pub profile: Vec<(f64, f64)>,
}

impl ResidualReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative <= tol
    }

    /// CSV: comment header with provenance, then `r, max_abs_residual`.
    pub fn to_csv(&self, scenario_hash: &str, tol: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# scenario_hash={scenario_hash}");
        let _ = writeln!(s, "# grid nr={} nt={}; tol={}", self.nr, self.nt, fmt17(tol));
        let _ = writeln!(
            s,
            "# max_abs_residual={} rms_residual={} max_relative={} at r={} t={}",
            fmt17(self.max_abs_residual),
            fmt17(self.rms_residual),
            fmt17(self.max_relative),
            fmt17(self.location.0),
            fmt17(self.location.1)
        );
        if let Some(p) = self.order {
            let _ = writeln!(s, "# order_estimate={}", fmt17(p));
        }
        let _ = writeln!(s, "r,max_abs_residual");
        for (r, v) in &self.profile {
            let _ = writeln!(s, "{},{}", fmt17(*r), fmt17(*v));
        }
        s
    }
}

/// Residual of `θ_t − (1/r^{d−1})∂_r[r^{d−1} f D ∂_r θ] − R(θ)` at interior
/// nodes, with centered second-order differences in both directions.
///
/// The face diffusivity is the secant `[u(θ_{i+1}) − u(θ_i)]/(θ_{i+1} − θ_i)`
/// of the Kirchhoff integral, i.e. the mean of `D` over the face interval,
/// which stays well defined where `D` degenerates.
pub fn pde_residual(sol: &Solution, g: &Grid) -> Result<ResidualReport> {
    let s = sol.scenario();
    let (lo, hi) = s.domain;
    let slack = 1e-12 * hi;
    if g.r[0] < lo - slack || *g.r.last().unwrap_or(&hi) > hi + slack {
        return Err(Error::Precondition(format!(
            "grid [{}, {}] outside the solution domain [{lo}, {hi}]",
            g.r[0],
            g.r.last().unwrap_or(&hi)
        )));
    }
    if g.r[0] == 0.0 && s.profile.hetero.singular_at_origin() {
        return Err(Error::Precondition("grid spans the heterogeneity singularity at r = 0".into()));
    }
    let nr = g.r.len();
    let nt = g.t.len();
    let w = face_weights(&g.r, g.dim, &g.hetero);
    let d = &s.diffusivity;
    let mut theta = Vec::with_capacity(nt);
    let mut kir = Vec::with_capacity(nt);
    for &t in &g.t {
        let row: Vec<f64> = g.r.iter().map(|&r| sol.theta(r, t)).collect::<Result<_>>()?;
        let urow: Vec<f64> = row.iter().map(|&th| kirchhoff_u(d, th)).collect::<Result<_>>()?;
        theta.push(row);
        kir.push(urow);
    }
    let first = if g.r[0] == 0.0 { 0 } else { 1 };
    let mut max_abs: f64 = 0.0;
    let mut loc = (g.r[first], g.t[1]);
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    let mut scale: f64 = 0.0;
    let mut profile = vec![0.0f64; nr];
    for j in 1..nt - 1 {
        let dt = g.t[j + 1] - g.t[j - 1];
        for i in first..nr - 1 {
            let th_t = (theta[j + 1][i] - theta[j - 1][i]) / dt;
            let div = apply_operator(&kir[j], &g.r, &w, g.dim, i);
            let res = th_t - div - s.reaction.rate(theta[j][i]);
            if !res.is_finite() {
                return Err(Error::domain("pde_residual", format!("non-finite residual at r = {}", g.r[i])));
            }
            scale = scale.max(th_t.abs());
            sum_sq += res * res;
            count += 1;
            profile[i] = profile[i].max(res.abs());
            if res.abs() > max_abs {
                max_abs = res.abs();
                loc = (g.r[i], g.t[j]);
            }
        }
    }
    Ok(ResidualReport {
        max_abs_residual: max_abs,
        rms_residual: (sum_sq / count.max(1) as f64).sqrt(),
        max_relative: if scale > 0.0 { max_abs / scale } else { max_abs },
        scale,
        location: loc,
        order: None,
        nr,
        nt,
        profile: (first..nr - 1).map(|i| (g.r[i], profile[i])).collect(),
    })
}

/// [`pde_residual`] on the scenario grid `(nr, nt)`, with the convergence
/// order estimated against the grid of half the resolution,
/// `((nr + 1)/2, (nt + 1)/2)`. Refining beyond `(nr, nt)` instead runs into
/// the roundoff floor of the Kirchhoff round trip on the flux presets.
pub fn pde_residual_with_order(sol: &Solution, nr: usize, nt: usize) -> Result<ResidualReport> {
    let s = sol.scenario();
    let fine = pde_residual(sol, &Grid::for_scenario(s, nr, nt)?)?;
    let coarse = pde_residual(sol, &Grid::for_scenario(s, (nr + 1) / 2, (nt + 1) / 2)?)?;
    let order = if fine.max_abs_residual > 0.0 && coarse.max_abs_residual > 0.0 {
        let ratio = (nr - 1) as f64 / ((nr + 1) / 2 - 1) as f64;
        Some((coarse.max_abs_residual / fine.max_abs_residual).ln() / ratio.ln())
    } else {
        None
    };
    Ok(ResidualReport { order, ..fine })
}

// ---------------------------------------------------------------------------
// Coefficient tables
// ---------------------------------------------------------------------------

/// `D` and `R` tabulated against the Kirchhoff variable for fast lookup in
/// time stepping; linear interpolation between `points` nodes uniform in θ.
#[derive(Debug, Clone)]
pub struct KirchhoffTable {
    u: Vec<f64>,
    d: Vec<f64>,
    r: Vec<f64>,
}

impl KirchhoffTable {
    pub fn new(d: &DiffusivityRep, reaction: &ReactionLaw, theta_hi: f64, points: usize) -> Result<Self> {
        let n = points.max(16);
        let mut u = Vec::with_capacity(n);
        let mut dv = Vec::with_capacity(n);
        let mut rv = Vec::with_capacity(n);
        for k in 0..n {
            let th = theta_hi * k as f64 / (n - 1) as f64;
            u.push(kirchhoff_u(d, th)?);
            dv.push(d.d(th)?);
            rv.push(reaction.rate(th));
        }
        Ok(Self { u, d: dv, r: rv })
    }

    /// `(D, R)` at Kirchhoff value `u`.
    pub fn lookup(&self, u: f64) -> Result<(f64, f64)> {
        let n = self.u.len();
        if !(u >= self.u[0] - 1e-14 * self.u[n - 1].abs()) || u > self.u[n - 1] {
            return Err(Error::OutOfRange {
                value: u,
                lo: self.u[0],
                hi: self.u[n - 1],
            });
        }
        let k = self.u.partition_point(|&x| x <= u).clamp(1, n - 1);
        let (u0, u1) = (self.u[k - 1], self.u[k]);
        let s = if u1 > u0 { ((u - u0) / (u1 - u0)).clamp(0.0, 1.0) } else { 0.0 };
        Ok((
            self.d[k - 1] + s * (self.d[k] - self.d[k - 1]),
            self.r[k - 1] + s * (self.r[k] - self.r[k - 1]),
        ))
    }
}

// ---------------------------------------------------------------------------
// Method-of-lines evolution
// ---------------------------------------------------------------------------

/// Boundary condition at one end of the radial interval, in terms of `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndCondition {
    /// Symmetry at `r = 0`.
    Regular,
    /// `u = value·e^{rate·t}`.
    Dirichlet { value: f64, rate: f64 },
    /// Outward-normal flux `−f·u_r = g0·e^{rate·t}` (taken along `+r`).
    Flux { g0: f64, rate: f64 },
    /// `−u_r = Bi·u`.
    Robin { bi: f64 },
}

/// Boundary conditions implied by the scenario. Ends without one (the
/// truncation radius of exterior problems) take the exact trace.
pub fn default_end_conditions(s: &Scenario) -> Result<[EndCondition; 2]> {
    let (lo, hi) = s.domain;
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let trace = |r: f64| -> Result<EndCondition> {
        Ok(EndCondition::Dirichlet {
            value: s.amplitude * s.profile.phi(r)?,
            rate: s.params.a,
        })
    };
    let mut left = if lo == 0.0 { EndCondition::Regular } else { trace(lo)? };
    let mut right = trace(hi)?;
    for b in &s.boundaries {
        match b.kind {
            BoundaryKind::Flux { r0, q, a } if near(r0, lo) => {
                let area = unit_sphere_area(b.dim) * r0.powi(b.dim as i32 - 1);
                left = EndCondition::Flux {
                    g0: a.abs() * q / area,
                    rate: a,
                };
            }
            BoundaryKind::DirichletZero { r1 } if near(r1, hi) => {
                right = EndCondition::Dirichlet { value: 0.0, rate: 0.0 };
            }
            BoundaryKind::Biot { r2, bi } if near(r2, hi) => right = EndCondition::Robin { bi },
            _ => {}
        }
    }
    Ok([left, right])
}

/// Time-stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Local error tolerance of the step-doubling control.
    pub tol: f64,
    /// First trial step.
    pub dt0: f64,
    pub max_steps: usize,
    pub table_points: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            dt0: 1e-4,
            max_steps: 200_000,
            table_points: 16_384,
        }
    }
}

/// Fields recorded at the output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub steps: usize,
    pub rejected: usize,
}

struct MolSystem<'a> {
    r: &'a [f64],
    w: Vec<f64>,
    dim: u32,
    f: &'a [f64],
    ends: [EndCondition; 2],
    table: KirchhoffTable,
}

impl MolSystem<'_> {
    fn n(&self) -> usize {
        self.r.len()
    }

    fn dirichlet(&self, end: usize, t: f64) -> Option<f64> {
        match self.ends[end] {
            EndCondition::Dirichlet { value, rate } => Some(value * (rate * t).exp()),
            _ => None,
        }
    }

    // Linear operator L (tridiagonal rows) with the boundary forcing split
    // off; Dirichlet rows are left empty.
    fn linear_rows(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let (r, w, d) = (self.r, &self.w, self.dim as i32);
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for i in 1..n - 1 {
            let m = r[i].powi(d - 1) * 0.5 * (r[i + 1] - r[i - 1]);
            lo[i] = w[i - 1] / m;
            up[i] = w[i] / m;
            di[i] = -(w[i - 1] + w[i]) / m;
        }
        match self.ends[0] {
            EndCondition::Regular => {
                let c = 2.0 * self.dim as f64 / (r[1] * r[1]);
                di[0] = -c;
                up[0] = c;
            }
            EndCondition::Flux { .. } => {
                let m = r[0].powi(d - 1) * 0.5 * (r[1] - r[0]);
                di[0] = -w[0] / m;
                up[0] = w[0] / m;
            }
            EndCondition::Robin { bi } => {
                let m = r[0].powi(d - 1) * 0.5 * (r[1] - r[0]);
                // outward normal points to −r at the inner end
                di[0] = (-w[0] - r[0].powi(d - 1) * self.f[0] * bi) / m;
                up[0] = w[0] / m;
            }
            EndCondition::Dirichlet { .. } => {}
        }
        match self.ends[1] {
            EndCondition::Flux { .. } => {
                let m = r[n - 1].powi(d - 1) * 0.5 * (r[n - 1] - r[n - 2]);
                di[n - 1] = -w[n - 2] / m;
                lo[n - 1] = w[n - 2] / m;
            }
            EndCondition::Robin { bi } => {
                let m = r[n - 1].powi(d - 1) * 0.5 * (r[n - 1] - r[n - 2]);
                di[n - 1] = (-w[n - 2] - r[n - 1].powi(d - 1) * self.f[n - 1] * bi) / m;
                lo[n - 1] = w[n - 2] / m;
            }
            EndCondition::Regular | EndCondition::Dirichlet { .. } => {}
        }
        (lo, di, up)
    }

    fn forcing(&self, t: f64) -> (f64, f64) {
        let r = self.r;
        let n = self.n();
        let d = self.dim as i32;
        let left = match self.ends[0] {
            EndCondition::Flux { g0, rate } => {
                let m = r[0].powi(d - 1) * 0.5 * (r[1] - r[0]);
                // flux g along +r leaves through the outer side of the half cell
                r[0].powi(d - 1) * g0 * (rate * t).exp() / m
            }
            _ => 0.0,
        };
        let right = match self.ends[1] {
            EndCondition::Flux { g0, rate } => {
                let m = r[n - 1].powi(d - 1) * 0.5 * (r[n - 1] - r[n - 2]);
                -r[n - 1].powi(d - 1) * g0 * (rate * t).exp() / m
            }
            _ => 0.0,
        };
        (left, right)
    }

    fn rhs(&self, u: &[f64], t: f64, rows: &(Vec<f64>, Vec<f64>, Vec<f64>)) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let (lo, di, up) = rows;
        let (fl, fr) = self.forcing(t);
        let mut out = vec![0.0; n];
        let mut dv = vec![0.0; n];
        for i in 0..n {
            if (i == 0 && self.dirichlet(0, t).is_some()) || (i == n - 1 && self.dirichlet(1, t).is_some()) {
                continue;
            }
            let mut lu = di[i] * u[i];
            if i > 0 {
                lu += lo[i] * u[i - 1];
            }
            if i + 1 < n {
                lu += up[i] * u[i + 1];
            }
            if i == 0 {
                lu += fl;
            }
            if i == n - 1 {
                lu += fr;
            }
            let (d, q) = self.table.lookup(u[i])?;
            out[i] = d * (lu + q);
            dv[i] = d;
        }
        Ok((out, dv))
    }

    // One implicit trapezoid step with a frozen-coefficient Newton iteration.
    fn trapezoid(&self, u: &[f64], t: f64, dt: f64, rows: &(Vec<f64>, Vec<f64>, Vec<f64>)) -> Result<Vec<f64>> {
        let n = self.n();
        let (f0, _) = self.rhs(u, t, rows)?;
        let mut x = u.to_vec();
        for (i, fi) in f0.iter().enumerate() {
            x[i] += dt * fi;
        }
        if let Some(v) = self.dirichlet(0, t + dt) {
            x[0] = v;
        }
        if let Some(v) = self.dirichlet(1, t + dt) {
            x[n - 1] = v;
        }
        let (lo, di, up) = rows;
        for _ in 0..60 {
            let (f1, dv) = self.rhs(&x, t + dt, rows)?;
            let mut a = vec![0.0; n];
            let mut b = vec![1.0; n];
            let mut c = vec![0.0; n];
            let mut g = vec![0.0; n];
            for i in 0..n {
                let fixed = (i == 0 && self.dirichlet(0, t + dt).is_some())
                    || (i == n - 1 && self.dirichlet(1, t + dt).is_some());
                if fixed {
                    continue;
                }
                g[i] = -(x[i] - u[i] - 0.5 * dt * (f0[i] + f1[i]));
                let k = 0.5 * dt * dv[i];
                a[i] = -k * lo[i];
                b[i] = 1.0 - k * di[i];
                c[i] = -k * up[i];
            }
            solve_tridiagonal(&a, &b, &c, &mut g);
            let mut step: f64 = 0.0;
            let mut size: f64 = 0.0;
            for i in 0..n {
                x[i] += g[i];
                step = step.max(g[i].abs());
                size = size.max(x[i].abs());
            }
            if !step.is_finite() {
                break;
            }
            if step <= 1e-14 * size.max(1e-300) {
                return Ok(x);
            }
        }
        Err(Error::convergence("evolve_nonlinear", format!("implicit step failed at t = {t}")))
    }
}

/// Thomas algorithm; `a` is the sub-diagonal (`a[0]` unused), `c` the
/// super-diagonal (`c[n−1]` unused). Overwrites `d` with the solution.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut beta = b[0];
    d[0] /= beta;
    for i in 1..n {
        cp[i - 1] = c[i - 1] / beta;
        beta = b[i] - a[i] * cp[i - 1];
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Evolve `F(u)u_t = ∇·(f∇u) + Q(u)` from `theta_init` on the radial grid
/// with the scenario's boundary conditions, recording the fields at the
/// grid times up to `t_end`.
pub fn evolve_nonlinear(s: &Scenario, theta_init: &[f64], g: &Grid, t_end: f64) -> Result<Evolution> {
    evolve_nonlinear_with(s, theta_init, g, t_end, default_end_conditions(s)?, EvolveOptions::default())
}

pub fn evolve_nonlinear_with(
    s: &Scenario,
    theta_init: &[f64],
    g: &Grid,
    t_end: f64,
    ends: [EndCondition; 2],
    opts: EvolveOptions,
) -> Result<Evolution> {
    let n = g.r.len();
    if theta_init.len() != n {
        return Err(Error::Parameter("initial field does not match the grid".into()));
    }
    if matches!(ends[0], EndCondition::Regular) && g.r[0] != 0.0 {
        return Err(Error::Parameter("symmetry condition needs a node at r = 0".into()));
    }
    let d = &s.diffusivity;
    let u0: Vec<f64> = theta_init.iter().map(|&th| kirchhoff_u(d, th)).collect::<Result<_>>()?;
    let t0 = g.t[0];
    // cover the largest Kirchhoff value the run can reach
    let grow = (s.params.a * (t_end - t0)).exp().max(1.0);
    let mut u_hi = u0.iter().fold(0.0f64, |m, v| m.max(*v)) * grow;
    for e in &ends {
        if let EndCondition::Dirichlet { value, rate } = *e {
            u_hi = u_hi.max(value * (rate * t0).exp().max((rate * t_end).exp()));
        }
    }
    let theta_hi = (1.25 * invert_kirchhoff(d, 1.25 * u_hi + 1e-12)? + 1e-3).min(d.theta_max());
    let table = KirchhoffTable::new(d, &s.reaction, theta_hi, opts.table_points)?;
    let sys = MolSystem {
        r: &g.r,
        w: face_weights(&g.r, g.dim, &g.hetero),
        dim: g.dim,
        f: &g.f,
        ends,
        table,
    };
    let rows = sys.linear_rows();
    let mut u = u0;
    let mut t = t0;
    let mut dt = opts.dt0.min(t_end - t0).max(1e-300);
    let outputs: Vec<f64> = g.t.iter().copied().filter(|&x| x <= t_end + 1e-14 * t_end.abs()).collect();
    let mut out = Evolution {
        times: Vec::new(),
        u: Vec::new(),
        theta: Vec::new(),
        steps: 0,
        rejected: 0,
    };
    let record = |u: &[f64], t: f64, out: &mut Evolution| -> Result<()> {
        out.times.push(t);
        out.theta.push(u.iter().map(|&v| invert_kirchhoff(d, v.max(d.u0))).collect::<Result<_>>()?);
        out.u.push(u.to_vec());
        Ok(())
    };
    for &target in &outputs {
        while t < target - 1e-14 * target.abs().max(1.0) {
            if out.steps + out.rejected > opts.max_steps {
                return Err(Error::convergence("evolve_nonlinear", format!("step budget exhausted at t = {t}")));
            }
            let h = dt.min(target - t);
            let big = sys.trapezoid(&u, t, h, &rows);
            let half = sys
                .trapezoid(&u, t, 0.5 * h, &rows)
                .and_then(|m| sys.trapezoid(&m, t + 0.5 * h, 0.5 * h, &rows));
            let (big, small) = match (big, half) {
                (Ok(b), Ok(s)) => (b, s),
                _ => {
                    out.rejected += 1;
                    dt = 0.25 * h;
                    if dt < 1e-14 * t.abs().max(1.0) {
                        return Err(Error::convergence("evolve_nonlinear", format!("step underflow at t = {t}")));
                    }
                    continue;
                }
            };
            let size = small.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            let err = big.iter().zip(&small).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / 3.0;
            let ratio = err / (opts.tol * size.max(1.0));
            if ratio <= 1.0 {
                u = small;
                t += h;
                out.steps += 1;
                let grow = if ratio == 0.0 { 2.0 } else { (0.9 * ratio.powf(-1.0 / 3.0)).clamp(0.2, 2.0) };
                if h == dt {
                    dt = h * grow;
                }
            } else {
                out.rejected += 1;
                dt = h * (0.9 * ratio.powf(-1.0 / 3.0)).clamp(0.1, 0.9);
            }
        }
        t = target;
        record(&u, t, &mut out)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stability criterion
// ---------------------------------------------------------------------------

/// Outcome of the sufficient stability condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    /// `R0·r1²/(B·λ_{0,1}²·D(0))`.
    pub group: f64,
    /// `e²[(λ_{1,1}/λ_{0,1})² − 1]/4`.
    pub threshold: f64,
    /// `threshold − group`.
    pub margin: f64,
    pub pass: bool,
}

/// `e²[(λ11/λ01)² − 1]/4`.
pub fn stability_threshold(lambda01: f64, lambda11: f64) -> f64 {
    E * E * ((lambda11 / lambda01).powi(2) - 1.0) / 4.0
}

/// Evaluate the dimensionless group and compare it strictly with the
/// threshold; equality fails.
pub fn stability_criterion(r0_phys: f64, r1: f64, b: f64, d0: f64, zeros: (f64, f64)) -> StabilityVerdict {
    let (l01, l11) = zeros;
    let group = r0_phys * r1 * r1 / (b * l01 * l01 * d0);
    let threshold = stability_threshold(l01, l11);
    StabilityVerdict {
        group,
        threshold,
        margin: threshold - group,
        pass: group < threshold,
    }
}

/// `(λ_{0,1}, λ_{1,1})` from the Bessel zero finder.
pub fn dim2_zeros() -> Result<(f64, f64)> {
    Ok((bessel_zero(0, 1)?.value, bessel_zero(1, 1)?.value))
}

// ---------------------------------------------------------------------------
// Perturbation experiment
// ---------------------------------------------------------------------------

/// Polar grid and step for the perturbation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub nr: usize,
    pub nphi: usize,
    pub dt: f64,
}

impl Default for PolarGrid {
    fn default() -> Self {
        Self {
            nr: 128,
            nphi: 64,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayStatus {
    /// Exponential fit with `R² ≥ 0.99`.
    Fitted,
    /// Fit quality below `R² = 0.99`.
    Inconclusive,
    /// No perturbation was seeded.
    Zero,
}

/// Decay of one seeded mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDecay {
    pub n: u32,
    pub m: u32,
    pub eps: f64,
    /// Fitted rate of `‖w_n‖∞` in the similarity frame `v = u·e^{−At}`,
    /// where `w_n` is the seeded azimuthal harmonic of the perturbation.
    pub rate: Option<f64>,
    /// The same rate seen in `u`, i.e. shifted by `A`.
    pub rate_u: Option<f64>,
    pub r_squared: f64,
    /// Growth rate of the linear comparison problem,
    /// `D_m·K² − D(0)·λ_{n,m}²/r1²`.
    pub bound_rate: f64,
    /// Largest `(|w_n| − |Q|)/max|Q|` over grid and recorded times.
    pub comparison_excess: f64,
    /// Largest `‖w − w_n‖∞/‖w(0)‖∞`: second-order content in the other
    /// harmonics, outside the linear analysis.
    pub nonlinear_remainder: f64,
    /// `‖w_n‖∞` strictly decreasing across the recorded times.
    pub monotone: bool,
    pub status: DecayStatus,
    /// `(t, ‖w_n‖∞)` samples.
    pub history: Vec<(f64, f64)>,
}

/// Results of [`stability_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub r0: f64,
    pub d_m: f64,
    pub r1: f64,
    pub rows: Vec<ModeDecay>,
}

impl StabilityTable {
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {header}");
        let _ = writeln!(s, "# R0={} D_m={} r1={}", fmt17(self.r0), fmt17(self.d_m), fmt17(self.r1));
        let _ = writeln!(
            s,
            "n,m,eps,rate,rate_u,r_squared,bound_rate,comparison_excess,nonlinear_remainder,monotone,status"
        );
        for row in &self.rows {
            let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_else(|| "nan".into());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{:?}",
                row.n,
                row.m,
                fmt17(row.eps),
                opt(row.rate),
                opt(row.rate_u),
                fmt17(row.r_squared),
                fmt17(row.bound_rate),
                fmt17(row.comparison_excess),
                fmt17(row.nonlinear_remainder),
                row.monotone,
                row.status
            );
        }
        s
    }
}

// Polar solver for v_t = D(θ(v·e^{At}))·(∇²v + K²v) on the disk of radius
// r1 with v(r1) = 0, K = 1 and A = −1. Cell-centred radial nodes, Fourier
// modes in φ; the φ-mean of D is implicit, the remainder explicit.
struct PolarSolver {
    nr: usize,
    nphi: usize,
    r: Vec<f64>,
    h: f64,
    table: KirchhoffTable,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl PolarSolver {
    fn wavenumber(&self, k: usize) -> f64 {
        let n = self.nphi;
        if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        }
    }

    // Radial operator rows for Fourier mode q (Laplacian only). Face weights
    // r_face/h; the wall r1 = (nr + 1/2)h acts as a node holding v = 0.
    fn rows(&self, q: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nr = self.nr;
        let mut a = vec![0.0; nr];
        let mut b = vec![0.0; nr];
        let mut c = vec![0.0; nr];
        for i in 0..nr {
            let ri = self.r[i];
            let m = ri * self.h;
            let wl = i as f64;
            let wr = (i + 1) as f64;
            a[i] = wl / m;
            c[i] = if i + 1 < nr { wr / m } else { 0.0 };
            b[i] = -(wl + wr) / m - q * q / (ri * ri);
        }
        (a, b, c)
    }

    // ∇²v + v on the grid, spectrally in φ.
    fn operator(&self, v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (nr, np) = (self.nr, self.nphi);
        let spec: Vec<Vec<Complex<f64>>> = v
            .iter()
            .map(|row| {
                let mut c: Vec<Complex<f64>> = row.iter().map(|&x| Complex::new(x, 0.0)).collect();
                self.fft.process(&mut c);
                c
            })
            .collect();
        let mut out_spec = vec![vec![Complex::new(0.0, 0.0); np]; nr];
        for k in 0..np {
            let (a, b, c) = self.rows(self.wavenumber(k));
            for i in 0..nr {
                let mut acc = b[i] * spec[i][k] + spec[i][k];
                if i > 0 {
                    acc += a[i] * spec[i - 1][k];
                }
                if i + 1 < nr {
                    acc += c[i] * spec[i + 1][k];
                }
                out_spec[i][k] = acc;
            }
        }
        out_spec
            .iter_mut()
            .map(|row| {
                self.ifft.process(row);
                row.iter().map(|z| z.re / np as f64).collect()
            })
            .collect()
    }

    // Azimuthal harmonic n of a grid field.
    fn harmonic(&self, w: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
        let np = self.nphi;
        w.iter()
            .map(|row| {
                let mut c: Vec<Complex<f64>> = row.iter().map(|&x| Complex::new(x, 0.0)).collect();
                self.fft.process(&mut c);
                let mut keep = vec![Complex::new(0.0, 0.0); np];
                keep[n % np] = c[n % np];
                keep[(np - n % np) % np] = c[(np - n % np) % np];
                self.ifft.process(&mut keep);
                keep.iter().map(|z| z.re / np as f64).collect()
            })
            .collect()
    }

    fn step(&self, v: &[Vec<f64>], t: f64, dt: f64) -> Result<Vec<Vec<f64>>> {
        let (nr, np) = (self.nr, self.nphi);
        let decay = (-t).exp();
        let mut dfield = vec![vec![0.0; np]; nr];
        let mut dbar = vec![0.0; nr];
        for i in 0..nr {
            for j in 0..np {
                let (d, _) = self.table.lookup((v[i][j] * decay).max(0.0))?;
                dfield[i][j] = d;
            }
            dbar[i] = dfield[i].iter().sum::<f64>() / np as f64;
        }
        let op = self.operator(v);
        let mut rhs: Vec<Vec<Complex<f64>>> = (0..nr)
            .map(|i| {
                let mut row: Vec<Complex<f64>> = (0..np)
                    .map(|j| Complex::new(v[i][j] + dt * (dfield[i][j] - dbar[i]) * op[i][j], 0.0))
                    .collect();
                self.fft.process(&mut row);
                row
            })
            .collect();
        for k in 0..np {
            let (a, b, c) = self.rows(self.wavenumber(k));
            let aa: Vec<f64> = (0..nr).map(|i| -dt * dbar[i] * a[i]).collect();
            let bb: Vec<f64> = (0..nr).map(|i| 1.0 - dt * dbar[i] * (b[i] + 1.0)).collect();
            let cc: Vec<f64> = (0..nr).map(|i| -dt * dbar[i] * c[i]).collect();
            let mut re: Vec<f64> = (0..nr).map(|i| rhs[i][k].re).collect();
            let mut im: Vec<f64> = (0..nr).map(|i| rhs[i][k].im).collect();
            solve_tridiagonal(&aa, &bb, &cc, &mut re);
            solve_tridiagonal(&aa, &bb, &cc, &mut im);
            for i in 0..nr {
                rhs[i][k] = Complex::new(re[i], im[i]);
            }
        }
        Ok(rhs
            .iter_mut()
            .map(|row| {
                self.ifft.process(row);
                row.iter().map(|z| z.re / np as f64).collect()
            })
            .collect())
    }
}

/// Seed `eps·J_n(λ_{n,m}r/r1)cos(nφ)` on the similarity solution
/// `v = J0(r)` of the dimensionless disk `r1 = λ_{0,1}` (K = 1, A = −1,
/// D(0) = 1), evolve the full nonlinear problem alongside the unperturbed
/// one, and fit the decay of their difference after one e-folding.
pub fn stability_experiment(
    r0: f64,
    eps: f64,
    modes: &[(u32, u32)],
    grid: PolarGrid,
    t_end: f64,
) -> Result<StabilityTable> {
    if !(eps.abs() <= 1e-2) {
        return Err(Error::Parameter(format!("eps = {eps} exceeds 1e-2")));
    }
    if grid.nr < 4 || grid.nphi < 4 || !(grid.dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Parameter("invalid polar grid or end time".into()));
    }
    let (l01, _) = dim2_zeros()?;
    let r1 = l01;
    let build = build_diffusivity(r0, 20.0, 1e-12)?;
    let d = DiffusivityRep::piecewise(build);
    let reaction = ReactionLaw::Arrhenius { r0, b: 1.0 };
    let theta_hi = invert_kirchhoff(&d, 1.5 * (1.0 + eps.abs()))?;
    let table = KirchhoffTable::new(&d, &reaction, theta_hi, 16_384)?;
    let d0 = d.d(0.0)?;
    let d_m = dm_bound(r0);
    let h = r1 / (grid.nr as f64 + 0.5);
    let r: Vec<f64> = (0..grid.nr).map(|i| (i as f64 + 0.5) * h).collect();
    let mut planner = FftPlanner::new();
    let solver = PolarSolver {
        nr: grid.nr,
        nphi: grid.nphi,
        r: r.clone(),
        h,
        table,
        fft: planner.plan_fft_forward(grid.nphi),
        ifft: planner.plan_fft_inverse(grid.nphi),
    };
    let phis: Vec<f64> = (0..grid.nphi).map(|j| 2.0 * PI * j as f64 / grid.nphi as f64).collect();
    let base: Vec<Vec<f64>> = r.iter().map(|&ri| vec![bessel_jn(0, ri); grid.nphi]).collect();
    let steps = (t_end / grid.dt).round().max(1.0) as usize;
    let sample_every = (steps / 200).max(1);
    let mut rows = Vec::new();
    for &(n, m) in modes {
        let lam = bessel_zero(n, m)?.value;
        let seed: Vec<Vec<f64>> = r
            .iter()
            .map(|&ri| phis.iter().map(|&p| eps * bessel_jn(n, lam * ri / r1) * (n as f64 * p).cos()).collect())
            .collect();
        let bound_rate = d_m - d0 * lam * lam / (r1 * r1);
        let w0_max = seed.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        if w0_max == 0.0 {
            rows.push(ModeDecay {
                n,
                m,
                eps,
                rate: None,
                rate_u: None,
                r_squared: 1.0,
                bound_rate,
                comparison_excess: 0.0,
                nonlinear_remainder: 0.0,
                monotone: true,
                status: DecayStatus::Zero,
                history: vec![(0.0, 0.0), (t_end, 0.0)],
            });
            continue;
        }
        let mut v0 = base.clone();
        let mut v1: Vec<Vec<f64>> = base.iter().zip(&seed).map(|(b, s)| b.iter().zip(s).map(|(x, y)| x + y).collect()).collect();
        let mut history = vec![(0.0, w0_max)];
        let mut excess = f64::NEG_INFINITY;
        let mut remainder: f64 = 0.0;
        let mut t = 0.0;
        for k in 1..=steps {
            v0 = solver.step(&v0, t, grid.dt)?;
            v1 = solver.step(&v1, t, grid.dt)?;
            t = k as f64 * grid.dt;
            if k % sample_every == 0 || k == steps {
                let q = (bound_rate * t).exp();
                let qmax = w0_max * q;
                let w: Vec<Vec<f64>> = v1.iter().zip(&v0).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
                let wn = solver.harmonic(&w, n as usize);
                let mut wmax: f64 = 0.0;
                for i in 0..grid.nr {
                    for j in 0..grid.nphi {
                        wmax = wmax.max(wn[i][j].abs());
                        excess = excess.max((wn[i][j].abs() - (seed[i][j] * q).abs()) / qmax);
                        remainder = remainder.max((w[i][j] - wn[i][j]).abs() / w0_max);
                    }
                }
                history.push((t, wmax));
            }
        }
        let monotone = history.windows(2).all(|p| p[1].1 < p[0].1);
        let start = history
            .iter()
            .position(|&(_, w)| w <= w0_max / E)
            .unwrap_or(history.len());
        let window = &history[start.min(history.len())..];
        let (rate, r2) = if window.len() >= 3 {
            fit_exponential(window)
        } else if n == 0 {
            // the J0 seed only rescales the similarity solution
            fit_exponential(&history)
        } else {
            (f64::NAN, 0.0)
        };
        let status = if r2 >= 0.99 && rate.is_finite() {
            DecayStatus::Fitted
        } else {
            DecayStatus::Inconclusive
        };
        rows.push(ModeDecay {
            n,
            m,
            eps,
            rate: rate.is_finite().then_some(rate),
            rate_u: rate.is_finite().then_some(rate - 1.0),
            r_squared: r2,
            bound_rate,
            comparison_excess: excess,
            nonlinear_remainder: remainder,
            monotone,
            status,
            history,
        });
    }
    Ok(StabilityTable { r0, d_m, r1, rows })
}

/// Least-squares fit of `ln y = c + rate·t`; returns `(rate, R²)`. A flat
/// series counts as a perfect fit with zero rate.
pub fn fit_exponential(samples: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|p| p.1 > 0.0).map(|&(t, y)| (t, y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, 0.0);
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let sty = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>();
    let syy = pts.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
    let rate = sty / stt;
    if syy <= 1e-24 * n {
        return (rate, 1.0);
    }
    (rate, (sty * sty) / (stt * syy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::ClosedForm;
    use crate::scenario::{assemble, preset, preset_ids, preset_variant};
    use crate::spatial::phi_radial;
    use approx::assert_relative_eq;

    #[test]
    fn threshold_from_zeros() {
        let z = dim2_zeros().unwrap();
        assert!((stability_threshold(z.0, z.1) - 2.8425).abs() <= 5e-4);
        let v = stability_criterion(1.0, z.0, 1.0, 1.0, z);
        assert!(v.pass);
        assert_relative_eq!(v.group, 1.0, max_relative = 1e-15);
        let edge = stability_criterion(v.threshold, z.0, 1.0, 1.0, z);
        assert!(!edge.pass);
        assert!(!stability_criterion(5.0, z.0, 1.0, 1.0, z).pass);
    }

    #[test]
    fn tridiagonal_solves() {
        let a = [0.0, -1.0, -1.0, -1.0];
        let b = [2.0, 2.0, 2.0, 2.0];
        let c = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut d: Vec<f64> = (0..4)
            .map(|i| b[i] * x[i] + if i > 0 { a[i] * x[i - 1] } else { 0.0 } + if i < 3 { c[i] * x[i + 1] } else { 0.0 })
            .collect();
        solve_tridiagonal(&a, &b, &c, &mut d);
        for i in 0..4 {
            assert_relative_eq!(d[i], x[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn exponential_fit() {
        let s: Vec<(f64, f64)> = (0..20).map(|i| (0.1 * i as f64, 3.0 * (-1.7 * 0.1 * i as f64).exp())).collect();
        let (rate, r2) = fit_exponential(&s);
        assert_relative_eq!(rate, -1.7, max_relative = 1e-12);
        assert!(r2 > 0.999_999);
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let mut s = preset(3).unwrap();
        s.amplitude = 0.0;
        let sol = assemble(&s).unwrap();
        let rep = pde_residual(&sol, &Grid::for_scenario(&s, 50, 8).unwrap()).unwrap();
        assert_eq!(rep.max_abs_residual, 0.0);
    }

    #[test]
    fn preset_residuals_small() {
        for (id, v) in preset_ids().into_iter().filter(|_| true) {
            let s = preset_variant(id, v).unwrap();
            let sol0 = assemble(&s).unwrap();
            let g = Grid::for_scenario(&s, 200, 32).unwrap();
            let (r, t) = (g.r[191], g.t[7]);
            let u = sol0.u(r, t).unwrap();
            eprintln!("INV u {u:e} th {:?} direct {:?}", sol0.theta(r, t), crate::construct::invert_kirchhoff(&s.diffusivity, u));
            let t = 0.234;
            for r in [0.85, 0.88, 0.89, 0.896, 0.9, 0.91, 0.95, 0.99] {
                let th = sol0.theta(r, t).unwrap();
                let th2 = sol0.theta(r, t + 1e-4).unwrap();
                let _ = 0; eprintln!("r {r} u {:e} th {th:e} tht {:e} R {:e}", sol0.u(r,t).unwrap(), (th2-th)/1e-4, s.reaction.rate(th));
            }
            let sol = assemble(&s).unwrap();
            let rep = pde_residual_with_order(&sol, 400, 64).unwrap();
            assert!(rep.passes(RESIDUAL_TOL), "preset {id} {v:?}: {:e}", rep.max_relative);
            assert!(rep.order.unwrap() >= 1.8, "preset {id} {v:?}: order {:?}", rep.order);
        }
    }

    #[test]
    fn corrupted_diffusivity_fails_residual() {
        let mut s = preset(3).unwrap();
        s.diffusivity = s.diffusivity.clone().with_scale(1.1);
        let sol = crate::scenario::assemble_unchecked(&s);
        let rep = pde_residual(&sol, &Grid::for_scenario(&s, 100, 16).unwrap()).unwrap();
        assert!(rep.max_relative > 1e-2);
    }

    #[test]
    fn grid_rejects_singular_origin() {
        let r = vec![0.0, 0.1, 0.2, 0.3];
        let t = vec![0.0, 0.1, 0.2, 0.3];
        assert!(Grid::new(r.clone(), t.clone(), 2, Hetero::Square { r0: 1.0 }).is_err());
        assert!(Grid::new(r, vec![0.0, 0.1, 0.1, 0.3], 2, Hetero::None).is_err());
    }

    #[test]
    fn linear_heat_mode_decay() {
        // D ≡ 1, R ≡ 0 on the unit disk: the J0 mode decays at rate λ01²
        let (l01, _) = dim2_zeros().unwrap();
        let mut s = preset(3).unwrap();
        s.diffusivity = DiffusivityRep::closed(ClosedForm::Constant { d0: 1.0 }).unwrap();
        s.reaction = ReactionLaw::Constant { r0: 0.0 };
        s.profile = phi_radial(l01 * l01, 2, l01).unwrap();
        s.params.a = -l01 * l01;
        let nr = 201;
        let r: Vec<f64> = (0..nr).map(|i| i as f64 / (nr - 1) as f64).collect();
        let t: Vec<f64> = (0..11).map(|j| 0.02 * j as f64).collect();
        let g = Grid::new(r.clone(), t, 2, Hetero::None).unwrap();
        let init: Vec<f64> = r.iter().map(|&x| bessel_jn(0, l01 * x).max(0.0)).collect();
        let ev = evolve_nonlinear(&s, &init, &g, 0.2).unwrap();
        let samples: Vec<(f64, f64)> = ev.times.iter().zip(&ev.u).map(|(&t, u)| (t, u[0])).collect();
        let (rate, _) = fit_exponential(&samples);
        assert!((rate + l01 * l01).abs() < 1e-3 * l01 * l01, "rate {rate}");
    }

    #[test]
    fn evolution_tracks_exact_solution() {
        let s = preset(3).unwrap();
        let sol = assemble(&s).unwrap();
        let nr = 801;
        let r: Vec<f64> = (0..nr).map(|i| i as f64 / (nr - 1) as f64).collect();
        let t_end = s.time(1.0);
        let t: Vec<f64> = (0..5).map(|j| t_end * j as f64 / 4.0).collect();
        let g = Grid::new(r.clone(), t, 2, Hetero::None).unwrap();
        let init: Vec<f64> = r.iter().map(|&x| sol.theta(x, 0.0).unwrap()).collect();
        let ev = evolve_nonlinear(&s, &init, &g, t_end).unwrap();
        let last = ev.u.last().unwrap();
        let scale = last.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = r.iter().zip(last).fold(0.0f64, |m, (&x, &u)| m.max((u - sol.u(x, t_end).unwrap()).abs()));
        assert!(err / scale < 1e-5, "relative error {:e}", err / scale);
    }

    #[test]
    fn flux_boundary_evolution_matches() {
        let s = preset(2).unwrap();
        let sol = assemble(&s).unwrap();
        let g = Grid::for_scenario(&s, 200, 5).unwrap();
        let init: Vec<f64> = g.r.iter().map(|&x| sol.theta(x, g.t[0]).unwrap()).collect();
        let t_end = *g.t.last().unwrap();
        let ev = evolve_nonlinear(&s, &init, &g, t_end).unwrap();
        let last = ev.u.last().unwrap();
        let scale = last.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = g.r.iter().zip(last).fold(0.0f64, |m, (&x, &u)| m.max((u - sol.u(x, t_end).unwrap()).abs()));
        assert!(err / scale < 1e-3, "relative error {:e}", err / scale);
    }

    #[test]
    fn zero_perturbation_stays_zero() {
        let grid = PolarGrid { nr: 16, nphi: 8, dt: 1e-2 };
        let t = stability_experiment(1.0, 0.0, &[(1, 1)], grid, 0.1).unwrap();
        assert_eq!(t.rows[0].status, DecayStatus::Zero);
    }
}
