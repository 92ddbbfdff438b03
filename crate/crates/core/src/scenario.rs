//! Space-time solutions `u(r,t) = e^{At}Φ(r)`, their temperature fields,
//! and the worked-example presets.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::construct::{
    check_compatibility, invert_kirchhoff, kirchhoff_u, ClosedForm, DiffusivityRep, ReactionLaw,
    SymmetryParams, Table1Form, Table1Params, Table1Row,
};
use crate::dsolve::build_diffusivity;
use crate::error::{Error, Result};
use crate::spatial::{
    fit_biot, fit_dirichlet, fit_flux, hetero_phi, phi_radial, unit_sphere_area, BoundaryKind,
    BoundarySpec, CustomF, Hetero, HeteroParams, ProfileForm, SpatialProfile, HETERO_DIM,
};

/// Schema tag required in scenario documents.
pub const SCENARIO_SCHEMA: &str = "arrhenius-rd/scenario/v1";

/// Number of θ samples used by the assembly compatibility check.
pub const COMPAT_SAMPLES: usize = 32;

/// Largest compatibility residual accepted by [`assemble`].
pub const COMPAT_TOL: f64 = 1e-9;

/// Diffusivity/reaction pair of a scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSpec {
    /// Exact κ = 0 pair for the Arrhenius law.
    ArrheniusKappa0 {
        r0: f64,
        b: f64,
        #[serde(rename = "A")]
        a: f64,
        c1: f64,
    },
    /// Arrhenius law `R0·e^{-1/θ}` with κ > 0 taken from the profile,
    /// `A = −κ` and the diffusivity built by series; the build runs at the
    /// reduced rate `R0/κ`.
    ArrheniusBuilt { r0: f64, theta_max: f64, tol: f64 },
    Table1 {
        row: Table1Row,
        params: Table1Params,
        #[serde(default)]
        form: Table1Form,
    },
}

/// Spatial factor and boundary conditions of a scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// κ = 0 annulus with a source of strength `Q` at `r0` and `u(r1) = 0`.
    Flux {
        r0: f64,
        r1: f64,
        #[serde(rename = "Q")]
        q: f64,
    },
    /// Regular profile vanishing first at `r1`; `Φ(0) = amplitude`.
    Dirichlet { r1: f64, amplitude: f64 },
    /// Regular profile with `−u_r = Bi·u` at `r2`.
    Biot {
        r2: f64,
        #[serde(rename = "Bi")]
        bi: f64,
        amplitude: f64,
    },
    /// Decaying κ < 0 profile outside `r0`, truncated at `r_max`;
    /// `Φ(r0) = amplitude`.
    Exterior {
        r0: f64,
        #[serde(rename = "K")]
        k: f64,
        r_max: f64,
        amplitude: f64,
    },
    /// Heterogeneous closed form normalized to `Φ(r_ref) = amplitude`.
    Hetero {
        hetero: Hetero,
        kappa: f64,
        r_ref: f64,
        #[serde(default)]
        r1: Option<f64>,
        #[serde(default)]
        r_max: Option<f64>,
        amplitude: f64,
    },
    /// κ = 0 heterogeneous annulus with a source of strength `Q` at `r0`
    /// (where `f = 1`) and `u(r1) = 0`.
    HeteroFlux {
        f: CustomF,
        r0: f64,
        r1: f64,
        #[serde(rename = "Q")]
        q: f64,
    },
}

/// Sampling grid for outputs and verification. Times are in units of `|A|t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nr: usize,
    pub nt: usize,
    /// Verification time window in `|A|t`.
    pub t_span: (f64, f64),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nr: 400,
            nt: 64,
            t_span: (0.0, 0.25),
        }
    }
}

/// A scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub preset: Option<u8>,
    #[serde(default)]
    pub variant: Option<String>,
    pub dim: u32,
    pub pair: PairSpec,
    pub profile: ProfileSpec,
    /// Output times in units of `|A|t`.
    pub times: Vec<f64>,
    #[serde(default)]
    pub grid: GridSpec,
}

impl ScenarioSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(s)?;
        if spec.schema != SCENARIO_SCHEMA {
            return Err(Error::Parameter(format!(
                "unsupported schema '{}', expected '{SCENARIO_SCHEMA}'",
                spec.schema
            )));
        }
        Ok(spec)
    }

    /// Construct the diffusivity, profile and boundaries.
    pub fn build(&self) -> Result<Scenario> {
        let dim = self.dim;
        let kappa = self.kappa()?;
        let (params, diffusivity, reaction) = self.pair(kappa)?;
        let a = params.a;
        let mut amplitude = 1.0;
        let (profile, boundaries, domain) = match self.profile {
            ProfileSpec::Flux { r0, r1, q } => {
                let p = fit_flux(dim, r0, r1, q, a)?;
                let b = vec![
                    BoundarySpec { kind: BoundaryKind::Flux { r0, q, a }, dim },
                    BoundarySpec { kind: BoundaryKind::DirichletZero { r1 }, dim },
                ];
                (p, b, (r0, r1))
            }
            ProfileSpec::Dirichlet { r1, amplitude: amp } => {
                let k = fit_dirichlet(dim, r1)?;
                amplitude = amp;
                let b = vec![
                    BoundarySpec { kind: BoundaryKind::RegularAtOrigin, dim },
                    BoundarySpec { kind: BoundaryKind::DirichletZero { r1 }, dim },
                ];
                (phi_radial(k * k, dim, k)?, b, (0.0, r1))
            }
            ProfileSpec::Biot { r2, bi, amplitude: amp } => {
                let k = fit_biot(dim, r2, bi, None)?.k;
                amplitude = amp;
                let b = vec![
                    BoundarySpec { kind: BoundaryKind::RegularAtOrigin, dim },
                    BoundarySpec { kind: BoundaryKind::Biot { r2, bi }, dim },
                ];
                (phi_radial(k * k, dim, k)?, b, (0.0, r2))
            }
            ProfileSpec::Exterior { r0, k, r_max, amplitude: amp } => {
                let p = phi_radial(-k * k, dim, k)?;
                amplitude = amp / p.phi(r0)?;
                let mut b = Vec::new();
                if a < 0.0 {
                    let strength = -unit_sphere_area(dim) * r0.powi(dim as i32 - 1) * amplitude * p.phi_r(r0)?;
                    b.push(BoundarySpec {
                        kind: BoundaryKind::Flux { r0, q: strength / a.abs(), a },
                        dim,
                    });
                }
                (p, b, (r0, r_max))
            }
            ProfileSpec::Hetero { hetero, kappa, r_ref, r1, r_max, amplitude: amp } => {
                let hp = HeteroParams { r_ref, r1, amplitude: amp, normalize: true };
                let p = hetero_phi(hetero, kappa, hp)?;
                let hi = match (r1, r_max) {
                    (Some(r1), _) => r1,
                    (None, Some(m)) => m,
                    (None, None) => {
                        return Err(Error::Parameter("heterogeneous profile needs r1 or r_max".into()));
                    }
                };
                let b = r1
                    .map(|r1| vec![BoundarySpec { kind: BoundaryKind::DirichletZero { r1 }, dim: HETERO_DIM }])
                    .unwrap_or_default();
                (p, b, (r_ref, hi))
            }
            ProfileSpec::HeteroFlux { f, r0, r1, q } => {
                if !(a < 0.0) || !(q > 0.0) {
                    return Err(Error::Parameter("flux source needs A < 0 and Q > 0".into()));
                }
                let hp = HeteroParams {
                    r_ref: r0,
                    r1: Some(r1),
                    amplitude: a.abs() * q / (2.0 * PI * f.f(r0)),
                    normalize: false,
                };
                let p = hetero_phi(Hetero::Custom { f }, 0.0, hp)?;
                let b = vec![
                    BoundarySpec { kind: BoundaryKind::Flux { r0, q, a }, dim: HETERO_DIM },
                    BoundarySpec { kind: BoundaryKind::DirichletZero { r1 }, dim: HETERO_DIM },
                ];
                (p, b, (r0, r1))
            }
        };
        Ok(Scenario {
            name: self.name.clone(),
            params,
            diffusivity,
            reaction,
            profile,
            amplitude,
            boundaries,
            domain,
            dim,
            preset_id: self.preset,
            times: self.times.clone(),
            grid: self.grid,
        })
    }

    fn kappa(&self) -> Result<f64> {
        Ok(match self.profile {
            ProfileSpec::Flux { .. } | ProfileSpec::HeteroFlux { .. } => 0.0,
            ProfileSpec::Dirichlet { r1, .. } => fit_dirichlet(self.dim, r1)?.powi(2),
            ProfileSpec::Biot { r2, bi, .. } => fit_biot(self.dim, r2, bi, None)?.k.powi(2),
            ProfileSpec::Exterior { k, .. } => -k * k,
            ProfileSpec::Hetero { kappa, .. } => kappa,
        })
    }

    fn pair(&self, kappa: f64) -> Result<(SymmetryParams, DiffusivityRep, ReactionLaw)> {
        match self.pair {
            PairSpec::ArrheniusKappa0 { r0, b, a, c1 } => {
                if kappa != 0.0 {
                    return Err(Error::Parameter("the exact Arrhenius pair needs kappa = 0".into()));
                }
                let d = DiffusivityRep::closed(ClosedForm::ArrheniusKappa0 { r0, b, a, c1 })?;
                let p = SymmetryParams { a, kappa, u0: 0.0, c1 };
                Ok((p, d, ReactionLaw::Arrhenius { r0, b }))
            }
            PairSpec::ArrheniusBuilt { r0, theta_max, tol } => {
                if !(kappa > 0.0) {
                    return Err(Error::Parameter("the series-built pair needs kappa > 0".into()));
                }
                let build = build_diffusivity(r0 / kappa, theta_max, tol)?;
                if !build.splices_pass() {
                    return Err(Error::convergence("build_diffusivity", "splice check failed"));
                }
                let d = DiffusivityRep::piecewise(build);
                Ok((SymmetryParams::new(-kappa, kappa), d, ReactionLaw::Arrhenius { r0, b: 1.0 }))
            }
            PairSpec::Table1 { row, params, form } => {
                if (params.kappa - kappa).abs() > 1e-12 * kappa.abs().max(1.0) {
                    return Err(Error::Parameter(format!(
                        "pair kappa {} differs from profile kappa {kappa}",
                        params.kappa
                    )));
                }
                let params = Table1Params { kappa, ..params };
                let reaction = ReactionLaw::Table1 { row, params, form };
                reaction.validate()?;
                let expr = match row {
                    Table1Row::A => ClosedForm::Power { m: params.m },
                    Table1Row::B => ClosedForm::Exp,
                    Table1Row::C => ClosedForm::Cosh,
                    Table1Row::D => ClosedForm::Table1D {
                        r0: params.r0,
                        b: params.b,
                        a: params.a,
                        kappa,
                    },
                };
                let d = DiffusivityRep::closed(expr)?;
                Ok((SymmetryParams::new(params.a, kappa), d, reaction))
            }
        }
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A fully specified separable solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub params: SymmetryParams,
    pub diffusivity: DiffusivityRep,
    pub reaction: ReactionLaw,
    pub profile: SpatialProfile,
    /// Multiplies `Φ`.
    pub amplitude: f64,
    pub boundaries: Vec<BoundarySpec>,
    /// `(r_min, r_max)`.
    pub domain: (f64, f64),
    pub dim: u32,
    pub preset_id: Option<u8>,
    /// Output times in units of `|A|t`.
    pub times: Vec<f64>,
    pub grid: GridSpec,
}

impl Scenario {
    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        content_hash(&serde_json::to_vec(self).expect("scenario serializes"))
    }

    /// Physical time for a value of `|A|t`.
    pub fn time(&self, scaled: f64) -> f64 {
        scaled / self.params.a.abs()
    }

    /// θ samples for the compatibility check: log-spaced on
    /// `[0.05, min(10, θ_max)]`.
    pub fn compat_thetas(&self) -> Vec<f64> {
        let hi = self.diffusivity.theta_max().min(10.0);
        let lo = 0.05f64.min(0.5 * hi);
        (0..COMPAT_SAMPLES)
            .map(|i| lo * (hi / lo).powf(i as f64 / (COMPAT_SAMPLES - 1) as f64))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let p = &self.profile;
        let dk = (p.kappa - self.params.kappa).abs();
        if dk > 1e-12 * self.params.kappa.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "profile kappa {} differs from pair kappa {}",
                p.kappa, self.params.kappa
            )));
        }
        if p.dim != self.dim {
            return Err(Error::Precondition(format!(
                "profile dimension {} differs from scenario dimension {}",
                p.dim, self.dim
            )));
        }
        let (lo, hi) = self.domain;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Precondition(format!("invalid domain [{lo}, {hi}]")));
        }
        if lo == 0.0 && !matches!(p.form, ProfileForm::Regular { .. }) {
            return Err(Error::Precondition("domain reaches r = 0 where the profile is singular".into()));
        }
        Ok(())
    }
}

/// An assembled solution; immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct Solution {
    scenario: Arc<Scenario>,
    hash: String,
}

/// Check the scenario invariants, including compatibility of the pair at
/// [`COMPAT_SAMPLES`] θ values, and assemble the solution.
pub fn assemble(s: &Scenario) -> Result<Solution> {
    s.validate()?;
    let (res, theta) = check_compatibility(&s.diffusivity, &s.reaction, &s.params, &s.compat_thetas())?;
    if !(res <= COMPAT_TOL) {
        return Err(Error::Incompatible { theta, residual: res });
    }
    Ok(assemble_unchecked(s))
}

/// Assemble without checking compatibility, so that verification can be
/// exercised on inconsistent inputs.
pub fn assemble_unchecked(s: &Scenario) -> Solution {
    Solution {
        hash: s.hash(),
        scenario: Arc::new(s.clone()),
    }
}

impl Solution {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn time_factor(&self, t: f64) -> f64 {
        self.scenario.amplitude * (self.scenario.params.a * t).exp()
    }

    /// `u(r,t) = e^{At}Φ(r)`.
    pub fn u(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.time_factor(t) * self.scenario.profile.phi(r)?)
    }

    /// `∂u/∂r`.
    pub fn u_r(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.time_factor(t) * self.scenario.profile.phi_r(r)?)
    }

    /// θ(r,t) from the inverse Kirchhoff transform. Values of `u` below the
    /// Kirchhoff offset by no more than rounding error map to θ = 0.
    pub fn theta(&self, r: f64, t: f64) -> Result<f64> {
        let u = self.u(r, t)?;
        let u0 = self.scenario.diffusivity.u0;
        if u < u0 && u0 - u <= 64.0 * f64::EPSILON * self.time_factor(t).abs().max(u0.abs()) {
            return Ok(0.0);
        }
        invert_kirchhoff(&self.scenario.diffusivity, u)
    }

    /// Heat flux `−u_r`.
    pub fn flux(&self, r: f64, t: f64) -> Result<f64> {
        Ok(-self.u_r(r, t)?)
    }

    /// Residual of one boundary condition at time `t`.
    pub fn boundary_residual(&self, b: &BoundarySpec, t: f64) -> Result<f64> {
        let s = &self.scenario;
        match b.kind {
            BoundaryKind::DirichletZero { r1 } => self.u(r1, t),
            BoundaryKind::Biot { r2, bi } => Ok(-self.u_r(r2, t)? - bi * self.u(r2, t)?),
            BoundaryKind::Flux { r0, q, a } => {
                let total = unit_sphere_area(b.dim) * r0.powi(b.dim as i32 - 1) * s.profile.f(r0) * self.flux(r0, t)?;
                Ok(total - a.abs() * q * (a * t).exp())
            }
            BoundaryKind::RegularAtOrigin => self.u_r(0.0, t),
        }
    }
}

/// Radius in the domain where `θ(r,t) = theta_star`, or `None` when the
/// level is not attained. κ = 0 homogeneous profiles invert `Φ` in closed
/// form; other profiles fall back to [`isotherm_radius_bracketed`].
pub fn isotherm_radius(sol: &Solution, theta_star: f64, t: f64) -> Result<Option<f64>> {
    let s = sol.scenario();
    let target = phi_level(sol, theta_star, t)?;
    if s.profile.kappa == 0.0 && s.profile.laplace_radius(target).is_some() {
        let r = s.profile.laplace_radius(target).unwrap_or(f64::NAN);
        let (lo, hi) = s.domain;
        let slack = 1e-12 * hi;
        return Ok((r >= lo - slack && r <= hi + slack).then_some(r.clamp(lo, hi)));
    }
    isotherm_radius_bracketed(sol, theta_star, t)
}

/// Isotherm by scanning `Φ(r) − Φ*` on 512 cells and bisecting the first
/// sign change.
pub fn isotherm_radius_bracketed(sol: &Solution, theta_star: f64, t: f64) -> Result<Option<f64>> {
    let s = sol.scenario();
    let target = phi_level(sol, theta_star, t)?;
    let g = |r: f64| s.profile.phi(r).map(|v| v - target);
    let (lo, hi) = s.domain;
    let n = 512;
    let mut a = lo;
    let mut ga = g(a)?;
    if ga == 0.0 {
        return Ok(Some(a));
    }
    for i in 1..=n {
        let b = lo + (hi - lo) * i as f64 / n as f64;
        let gb = g(b)?;
        if gb == 0.0 {
            return Ok(Some(b));
        }
        if ga.signum() != gb.signum() {
            let (mut x0, mut x1, mut g0) = (a, b, ga);
            for _ in 0..200 {
                let m = 0.5 * (x0 + x1);
                if m <= x0 || m >= x1 {
                    break;
                }
                let gm = g(m)?;
                if gm.signum() == g0.signum() {
                    x0 = m;
                    g0 = gm;
                } else {
                    x1 = m;
                }
            }
            return Ok(Some(0.5 * (x0 + x1)));
        }
        a = b;
        ga = gb;
    }
    Ok(None)
}

fn phi_level(sol: &Solution, theta_star: f64, t: f64) -> Result<f64> {
    let s = sol.scenario();
    if !(theta_star >= 0.0) {
        return Err(Error::domain("isotherm_radius", format!("theta* = {theta_star} < 0")));
    }
    let u = kirchhoff_u(&s.diffusivity, theta_star)?;
    Ok(u / (s.amplitude * (s.params.a * t).exp()))
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

const PRESET_FILES: &[(u8, Option<&str>, &str)] = &[
    (1, None, include_str!("../../../configs/preset1.json")),
    (2, None, include_str!("../../../configs/preset2.json")),
    (3, None, include_str!("../../../configs/preset3.json")),
    (4, None, include_str!("../../../configs/preset4.json")),
    (5, None, include_str!("../../../configs/preset5.json")),
    (6, None, include_str!("../../../configs/preset6.json")),
    (6, Some("oscillatory"), include_str!("../../../configs/preset6-oscillatory.json")),
    (6, Some("airy"), include_str!("../../../configs/preset6-airy.json")),
    (7, None, include_str!("../../../configs/preset7.json")),
];

/// Every shipped preset as `(id, variant)`.
pub fn preset_ids() -> Vec<(u8, Option<&'static str>)> {
    PRESET_FILES.iter().map(|(id, v, _)| (*id, *v)).collect()
}

/// The shipped scenario document of a preset.
pub fn preset_spec(id: u8, variant: Option<&str>) -> Result<ScenarioSpec> {
    let (_, _, text) = PRESET_FILES
        .iter()
        .find(|(i, v, _)| *i == id && *v == variant)
        .ok_or_else(|| Error::Parameter(format!("no preset {id} variant {variant:?}")))?;
    ScenarioSpec::from_json(text)
}

/// Default scenario of a worked example (1–7).
pub fn preset(id: u8) -> Result<Scenario> {
    preset_spec(id, None)?.build()
}

/// A preset variant, e.g. `(6, Some("airy"))`.
pub fn preset_variant(id: u8, variant: Option<&str>) -> Result<Scenario> {
    preset_spec(id, variant)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sol(id: u8) -> Solution {
        assemble(&preset(id).unwrap()).unwrap()
    }

    #[test]
    fn presets_assemble_with_sign_constraints() {
        for (id, v) in preset_ids() {
            let s = preset_variant(id, v).unwrap();
            assemble(&s).unwrap_or_else(|e| panic!("preset {id} {v:?}: {e}"));
            assert_eq!(s.preset_id, Some(id));
            match id {
                1 | 2 => {
                    assert_eq!(s.params.kappa, 0.0);
                    assert!(s.params.a < 0.0 && s.params.c1 < 0.0);
                    assert_eq!(s.dim, if id == 1 { 3 } else { 2 });
                }
                3 => assert!(s.params.kappa > 0.0),
                4 => assert!(s.params.kappa < 0.0 && s.params.a < 0.0 && s.domain.0 > 0.0),
                5 => {
                    assert_eq!(s.params.kappa, 0.0);
                    assert!(matches!(s.profile.hetero, Hetero::Custom { .. }));
                }
                6 => assert!(s.params.kappa > 0.0 && s.profile.hetero != Hetero::None),
                7 => assert!(s.params.kappa < 0.0 && s.profile.hetero != Hetero::None),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn boundary_conditions_hold() {
        for (id, v) in preset_ids() {
            let s = assemble(&preset_variant(id, v).unwrap()).unwrap();
            for b in &s.scenario().boundaries {
                for k in 0..16 {
                    let t = s.scenario().time(-1.5 + 0.25 * k as f64);
                    let scale = 1.0f64.max(s.u(s.scenario().domain.0, t).unwrap().abs());
                    let res = s.boundary_residual(b, t).unwrap();
                    assert!(res.abs() <= 1e-9 * scale, "preset {id} {v:?} {b:?}: {res:e}");
                }
            }
        }
    }

    #[test]
    fn preset2_boundaries() {
        let s = preset(2).unwrap();
        let kinds: Vec<_> = s.boundaries.iter().map(|b| b.kind).collect();
        assert!(matches!(kinds[0], BoundaryKind::Flux { .. }));
        assert!(matches!(kinds[1], BoundaryKind::DirichletZero { .. }));
    }

    #[test]
    fn preset3_rate_and_separability() {
        let s = preset(3).unwrap();
        let k = fit_dirichlet(2, 1.0).unwrap();
        let d0 = s.diffusivity.d(0.0).unwrap();
        assert_relative_eq!(s.params.a, -k * k * d0, max_relative = 1e-9);
        let sol = assemble(&s).unwrap();
        assert_relative_eq!(sol.u(0.0, 0.0).unwrap(), s.amplitude);
        let t = 0.37;
        for r in [0.0, 0.3, 0.8] {
            let ratio = sol.u(r, t).unwrap() / sol.u(r, 0.0).unwrap();
            assert_relative_eq!(ratio, (s.params.a * t).exp(), max_relative = 1e-14);
            assert_relative_eq!(sol.flux(r.max(0.1), t).unwrap(), -(s.params.a * t).exp() * s.amplitude * s.profile.phi_r(r.max(0.1)).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn preset3_theta_below_u_with_shrinking_gap() {
        let sol = sol(3);
        let s = sol.scenario();
        let mut last = f64::INFINITY;
        for at in [-1.5, 0.0, 1.5, 2.5] {
            let t = s.time(at);
            let mut gap: f64 = 0.0;
            for i in 0..=40 {
                let r = i as f64 / 40.0;
                let (th, u) = (sol.theta(r, t).unwrap(), sol.u(r, t).unwrap());
                assert!(th <= u + 1e-12, "theta {th} above u {u} at r = {r}, |A|t = {at}");
                gap = gap.max(u - th);
            }
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn preset5_vanishes_at_r1() {
        let sol = sol(5);
        let r1 = sol.scenario().domain.1;
        for t in [0.0, 0.5, 2.0] {
            assert!(sol.u(r1, t).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn isotherms_kappa0() {
        let sol = sol(2);
        let (r0, r1) = sol.scenario().domain;
        let t = 0.3;
        assert_relative_eq!(isotherm_radius(&sol, 0.0, t).unwrap().unwrap(), r1, max_relative = 1e-12);
        let theta_in = sol.theta(0.5 * (r0 + r1), t).unwrap();
        // u(θ) underflows below θ ≈ 0.08, so stay well above it
        for frac in [0.5, 0.8, 1.0] {
            let th = frac * theta_in;
            let r = isotherm_radius(&sol, th, t).unwrap().unwrap();
            assert!((sol.theta(r, t).unwrap() - th).abs() <= 1e-9);
            let rb = isotherm_radius_bracketed(&sol, th, t).unwrap().unwrap();
            assert!((r - rb).abs() <= 1e-10);
        }
        assert!(isotherm_radius(&sol, 50.0, t).unwrap().is_none());
    }

    #[test]
    fn isotherm_fallback_round_trip() {
        let sol = sol(3);
        let t = 0.1;
        let th = 0.5 * sol.theta(0.0, t).unwrap();
        let r = isotherm_radius(&sol, th, t).unwrap().unwrap();
        assert!((sol.theta(r, t).unwrap() - th).abs() <= 1e-9);
    }

    #[test]
    fn corrupted_pair_is_rejected() {
        let mut s = preset(3).unwrap();
        s.diffusivity = s.diffusivity.clone().with_scale(1.1);
        assert!(matches!(assemble(&s), Err(Error::Incompatible { .. })));
        let mut s = preset(4).unwrap();
        s.profile.kappa = -2.0;
        assert!(matches!(assemble(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = preset(1).unwrap();
        let b = preset(1).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.amplitude = 2.0;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn spec_rejects_unknown_fields_and_schema() {
        let text = include_str!("../../../configs/preset1.json");
        let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(ScenarioSpec::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
        v["schema"] = serde_json::json!("other/v0");
        assert!(ScenarioSpec::from_json(&v.to_string()).is_err());
    }
}
