//! Spatial factors `Φ(r)` of the separable solution `u = e^{At}Φ`.
//!
//! Homogeneous media: `∇²Φ + κΦ = 0` in 1–3 radial dimensions.
//! Heterogeneous media (planar radial, diffusivity `f(r)·D(θ)`):
//! `fΦ'' + (f/r + f')Φ' + κΦ = 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::specfun::{
    airy_pair, bessel_j0, bessel_j1, bessel_k0, bessel_k1, first_regular_zero, spherical_j0,
    spherical_j0_prime,
};

/// Spatial dimension of the radial problems with heterogeneity.
pub const HETERO_DIM: u32 = 2;

/// Positive heterogeneity factor for the custom kind, normalized so that
/// `f(r0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CustomF {
    /// `(r/r0)^p`.
    Power { r0: f64, p: f64 },
    /// `e^{(r − r0)/l}`.
    Exp { r0: f64, l: f64 },
}

impl CustomF {
    pub fn f(&self, r: f64) -> f64 {
        match *self {
            CustomF::Power { r0, p } => (r / r0).powf(p),
            CustomF::Exp { r0, l } => ((r - r0) / l).exp(),
        }
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        match *self {
            CustomF::Power { r0, p } => p / r0 * (r / r0).powf(p - 1.0),
            CustomF::Exp { r0, l } => ((r - r0) / l).exp() / l,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CustomF::Power { r0, p } if r0 > 0.0 && p.is_finite() => Ok(()),
            CustomF::Exp { r0, l } if r0 > 0.0 && l != 0.0 && l.is_finite() => Ok(()),
            _ => Err(Error::Parameter(format!("invalid heterogeneity law {self:?}"))),
        }
    }
}

/// Spatial heterogeneity factor `f(r)` multiplying the diffusivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hetero {
    #[default]
    None,
    /// `f = r0/r`.
    InverseR { r0: f64 },
    /// `f = (r/r0)²`.
    Square { r0: f64 },
    Custom { f: CustomF },
}

impl Hetero {
    pub fn f(&self, r: f64) -> f64 {
        match *self {
            Hetero::None => 1.0,
            Hetero::InverseR { r0 } => r0 / r,
            Hetero::Square { r0 } => (r / r0).powi(2),
            Hetero::Custom { f } => f.f(r),
        }
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        match *self {
            Hetero::None => 0.0,
            Hetero::InverseR { r0 } => -r0 / (r * r),
            Hetero::Square { r0 } => 2.0 * r / (r0 * r0),
            Hetero::Custom { f } => f.f_prime(r),
        }
    }

    /// Whether `r = 0` must be excluded from the domain.
    pub fn singular_at_origin(&self) -> bool {
        !matches!(self, Hetero::None)
    }
}

/// Closed or quadrature form of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileForm {
    /// `cos(kr)`, `J0(kr)` or `j0(kr)` by dimension; `Φ(0) = 1`.
    Regular { k: f64 },
    /// `c2 − c3·r`, `c2 − c3·ln r` or `c2 − c3/r` by dimension.
    Laplace { c2: f64, c3: f64 },
    /// `e^{−kr}`, `K0(kr)` or `e^{−kr}/r` by dimension.
    Decaying { k: f64 },
    /// `c1·Ai(s·r) + c2·Bi(s·r)`.
    Airy { c1: f64, c2: f64, s: f64 },
    /// `c1·r^{p1} + c2·r^{p2}`.
    Euler { c1: f64, c2: f64, p1: f64, p2: f64 },
    /// `(1/r)[c1·cos(ω ln r) + c2·sin(ω ln r)]`.
    EulerOscillatory { c1: f64, c2: f64, omega: f64 },
    /// `c·∫_r^{r1} ds/(s·f(s))`.
    Quadrature { c: f64, r1: f64, f: CustomF },
}

/// A radial spatial factor together with the equation it solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialProfile {
    pub kappa: f64,
    pub dim: u32,
    /// `K = √|κ|`.
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default)]
    pub hetero: Hetero,
    pub form: ProfileForm,
    /// Set for profiles beyond the closed forms worked out in the source
    /// model (decaying solutions in one and three dimensions).
    #[serde(default)]
    pub extension: bool,
}

impl SpatialProfile {
    /// `Φ(r)`.
    pub fn phi(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let d = self.dim;
        Ok(match self.form {
            ProfileForm::Regular { k } => {
                let x = k * r;
                match d {
                    1 => x.cos(),
                    2 => bessel_j0(x),
                    _ => spherical_j0(x),
                }
            }
            ProfileForm::Laplace { c2, c3 } => match d {
                1 => c2 - c3 * r,
                2 => c2 - c3 * r.ln(),
                _ => c2 - c3 / r,
            },
            ProfileForm::Decaying { k } => match d {
                1 => (-k * r).exp(),
                2 => bessel_k0(k * r)?,
                _ => (-k * r).exp() / r,
            },
            ProfileForm::Airy { c1, c2, s } => {
                let p = airy_pair(s * r)?;
                c1 * p.ai + c2 * p.bi
            }
            ProfileForm::Euler { c1, c2, p1, p2 } => c1 * r.powf(p1) + c2 * r.powf(p2),
            ProfileForm::EulerOscillatory { c1, c2, omega } => {
                let w = omega * r.ln();
                (c1 * w.cos() + c2 * w.sin()) / r
            }
            ProfileForm::Quadrature { c, r1, f } => {
                let g = |s: f64| 1.0 / (s * f.f(s));
                c * quad::integrate(g, r, r1, 1e-13, 0.0)?
            }
        })
    }

    /// `dΦ/dr`.
    pub fn phi_r(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let d = self.dim;
        Ok(match self.form {
            ProfileForm::Regular { k } => {
                let x = k * r;
                match d {
                    1 => -k * x.sin(),
                    2 => -k * bessel_j1(x),
                    _ => k * spherical_j0_prime(x),
                }
            }
            ProfileForm::Laplace { c3, .. } => match d {
                1 => -c3,
                2 => -c3 / r,
                _ => c3 / (r * r),
            },
            ProfileForm::Decaying { k } => match d {
                1 => -k * (-k * r).exp(),
                2 => -k * bessel_k1(k * r)?,
                _ => -(-k * r).exp() * (k * r + 1.0) / (r * r),
            },
            ProfileForm::Airy { c1, c2, s } => {
                let p = airy_pair(s * r)?;
                s * (c1 * p.ai_prime + c2 * p.bi_prime)
            }
            ProfileForm::Euler { c1, c2, p1, p2 } => {
                c1 * p1 * r.powf(p1 - 1.0) + c2 * p2 * r.powf(p2 - 1.0)
            }
            ProfileForm::EulerOscillatory { c1, c2, omega } => {
                let w = omega * r.ln();
                let bracket = c1 * w.cos() + c2 * w.sin();
                let dbracket = omega * (c2 * w.cos() - c1 * w.sin());
                (dbracket - bracket) / (r * r)
            }
            ProfileForm::Quadrature { c, f, .. } => -c / (r * f.f(r)),
        })
    }

    /// Heterogeneity factor at `r`.
    pub fn f(&self, r: f64) -> f64 {
        self.hetero.f(r)
    }

    /// Residual of the defining equation
    /// `f·[Φ'' + (d−1)Φ'/r] + f'Φ' + κΦ` at `r > 0`, with `Φ''` from a
    /// five-point central difference of the analytic `Φ'`.
    pub fn equation_residual(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain("equation_residual", format!("r = {r} must be positive")));
        }
        let h = 2e-4 * r;
        let d = |s: f64| self.phi_r(s);
        let phi_rr = (d(r - 2.0 * h)? - 8.0 * d(r - h)? + 8.0 * d(r + h)? - d(r + 2.0 * h)?) / (12.0 * h);
        let p1 = self.phi_r(r)?;
        let f = self.hetero.f(r);
        let fp = self.hetero.f_prime(r);
        Ok(f * (phi_rr + (self.dim as f64 - 1.0) * p1 / r) + fp * p1 + self.kappa * self.phi(r)?)
    }

    /// Radius at which `Φ(r) = target` for the κ = 0 homogeneous profiles,
    /// by inverting the closed form.
    pub fn laplace_radius(&self, target: f64) -> Option<f64> {
        match (self.form, self.dim, self.hetero) {
            (ProfileForm::Laplace { c2, c3 }, d, Hetero::None) if c3 != 0.0 => {
                let r = match d {
                    1 => (c2 - target) / c3,
                    2 => ((c2 - target) / c3).exp(),
                    _ => c3 / (c2 - target),
                };
                (r.is_finite() && r > 0.0).then_some(r)
            }
            _ => None,
        }
    }

    fn check_r(&self, r: f64) -> Result<()> {
        let origin_ok = matches!(self.form, ProfileForm::Regular { .. })
            || (matches!(self.form, ProfileForm::Laplace { .. } | ProfileForm::Decaying { .. })
                && self.dim == 1);
        if r < 0.0 || !r.is_finite() || (r == 0.0 && !origin_ok) {
            return Err(Error::domain("spatial profile", format!("r = {r} outside the domain")));
        }
        Ok(())
    }
}

/// Boundary conditions on the Kirchhoff variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryKind {
    /// `u(r1, t) = 0`.
    DirichletZero { r1: f64 },
    /// `−u_r = Bi·u` at `r2`.
    Biot {
        r2: f64,
        #[serde(rename = "Bi")]
        bi: f64,
    },
    /// Total outward flux `|A|·Q·e^{At}` through the sphere (or circle, or
    /// point pair) of radius `r0`, counted as `−|S_{d}|·r0^{d−1}·f·u_r`. Only
    /// the strength `Q` is stored; the time factor is applied at assembly.
    Flux {
        r0: f64,
        #[serde(rename = "Q")]
        q: f64,
        #[serde(rename = "A")]
        a: f64,
    },
    RegularAtOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub dim: u32,
}

/// Surface measure of the unit sphere in `dim` dimensions (2 for the point
/// pair in one dimension).
pub fn unit_sphere_area(dim: u32) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn check_dim(dim: u32) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("dimension {dim} not in 1..=3")))
    }
}

/// Regular (`κ > 0`) or decaying (`κ < 0`) radial solution with `κ = ±K²`.
pub fn phi_radial(kappa: f64, dim: u32, k: f64) -> Result<SpatialProfile> {
    check_dim(dim)?;
    if kappa == 0.0 {
        return Err(Error::Parameter(
            "kappa = 0 profiles are parameterized by (c2, c3); use phi_laplace".into(),
        ));
    }
    if !(k > 0.0) || (kappa.abs() - k * k).abs() > 1e-12 * kappa.abs() {
        return Err(Error::Parameter(format!("K = {k} inconsistent with kappa = {kappa}")));
    }
    let (form, extension) = if kappa > 0.0 {
        (ProfileForm::Regular { k }, false)
    } else {
        (ProfileForm::Decaying { k }, dim != 2)
    };
    Ok(SpatialProfile {
        kappa,
        dim,
        k,
        hetero: Hetero::None,
        form,
        extension,
    })
}

/// κ = 0 homogeneous profile with the given coefficients.
pub fn phi_laplace(dim: u32, c2: f64, c3: f64) -> Result<SpatialProfile> {
    check_dim(dim)?;
    Ok(SpatialProfile {
        kappa: 0.0,
        dim,
        k: 0.0,
        hetero: Hetero::None,
        form: ProfileForm::Laplace { c2, c3 },
        extension: false,
    })
}

/// `K = λ1/r1` so that the regular profile vanishes first at `r1`.
pub fn fit_dirichlet(dim: u32, r1: f64) -> Result<f64> {
    if !(r1 > 0.0) {
        return Err(Error::Parameter(format!("r1 = {r1} must be positive")));
    }
    Ok(first_regular_zero(dim)? / r1)
}

/// Result of fitting a Newton-cooling boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiotFit {
    #[serde(rename = "K")]
    pub k: f64,
    /// `A = −K²D(0)` when `D(0)` was supplied.
    #[serde(rename = "A")]
    pub a: Option<f64>,
}

// Regular profile g and its derivative in the scaled variable x = Kr.
fn regular_g(dim: u32, x: f64) -> (f64, f64) {
    match dim {
        1 => (x.cos(), -x.sin()),
        2 => (bessel_j0(x), -bessel_j1(x)),
        _ => (spherical_j0(x), spherical_j0_prime(x)),
    }
}

/// Unique `K ∈ (0, λ1/r2)` with `−K·g'(K r2)/g(K r2) = Bi`, by bisection.
pub fn fit_biot(dim: u32, r2: f64, bi: f64, d0: Option<f64>) -> Result<BiotFit> {
    check_dim(dim)?;
    if !(r2 > 0.0) || !(bi > 0.0) || !bi.is_finite() {
        return Err(Error::Parameter(format!("need r2 > 0 and finite Bi > 0, got r2 = {r2}, Bi = {bi}")));
    }
    let k_hi = first_regular_zero(dim)? / r2;
    let resid = |k: f64| {
        let (g, gp) = regular_g(dim, k * r2);
        -k * gp / g - bi
    };
    let mut lo = 0.0;
    let mut hi = k_hi;
    // the residual is −Bi at K → 0⁺ and +∞ at the first zero
    assert!(resid(1e-9 * k_hi) < 0.0, "Biot bracket lost at the lower end");
    while hi - lo > 1e-12 * k_hi.max(1.0) * 0.5 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = resid(mid);
        if v > 0.0 || !v.is_finite() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    Ok(BiotFit {
        k,
        a: d0.map(|d| -k * k * d),
    })
}

/// κ = 0 profile with `u(r1) = 0` and total flux `|A|Q` through `r0`.
pub fn fit_flux(dim: u32, r0: f64, r1: f64, q: f64, a: f64) -> Result<SpatialProfile> {
    if !(0.0 < r0 && r0 < r1) {
        return Err(Error::Parameter(format!("need 0 < r0 < r1, got r0 = {r0}, r1 = {r1}")));
    }
    if !(q > 0.0) || !(a < 0.0) {
        return Err(Error::Parameter(format!("need Q > 0 and A < 0, got Q = {q}, A = {a}")));
    }
    let strength = a.abs() * q;
    let (c2, c3) = match dim {
        2 => {
            let c3 = strength / (2.0 * PI);
            (c3 * r1.ln(), c3)
        }
        3 => {
            let c3 = -strength / (4.0 * PI);
            (c3 / r1, c3)
        }
        _ => return Err(Error::Parameter(format!("flux fitting needs dim 2 or 3, got {dim}"))),
    };
    phi_laplace(dim, c2, c3)
}

/// Free constants of a heterogeneous profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroParams {
    /// Reference radius: inner edge of the working annulus.
    pub r_ref: f64,
    /// Outer radius where `Φ = 0` is imposed; `None` selects the branch
    /// that decays outward.
    #[serde(default)]
    pub r1: Option<f64>,
    /// With `normalize`, `Φ(r_ref) = amplitude`; otherwise the leading
    /// coefficient (`c1`, or `c` for the quadrature form) equals it.
    pub amplitude: f64,
    #[serde(default)]
    pub normalize: bool,
}

/// Closed-form (or quadrature-backed) profile for the heterogeneous
/// equation in planar radial coordinates.
pub fn hetero_phi(hetero: Hetero, kappa: f64, params: HeteroParams) -> Result<SpatialProfile> {
    let HeteroParams { r_ref, r1, amplitude, normalize } = params;
    if !(r_ref > 0.0) {
        return Err(Error::Parameter(format!("reference radius {r_ref} must be positive")));
    }
    if let Some(r1) = r1 {
        if !(r1 > r_ref) {
            return Err(Error::Parameter(format!("need r1 > r_ref, got {r1} <= {r_ref}")));
        }
    }
    let k = kappa.abs().sqrt();
    let form = match hetero {
        Hetero::None => {
            return Err(Error::Parameter("hetero_phi needs a heterogeneity factor".into()));
        }
        Hetero::Square { r0 } => {
            if !(r0 > 0.0) {
                return Err(Error::Parameter(format!("r0 = {r0} must be positive")));
            }
            let disc = 1.0 - kappa * r0 * r0;
            if disc.abs() <= 1e-12 {
                return Err(Error::Parameter(
                    "K·r0 = 1 gives a double Euler root; not supported".into(),
                ));
            }
            if disc > 0.0 {
                let s = disc.sqrt();
                let (p1, p2) = (-1.0 + s, -1.0 - s);
                match r1 {
                    Some(r1) => ProfileForm::Euler {
                        c1: 1.0,
                        c2: -r1.powf(2.0 * s),
                        p1,
                        p2,
                    },
                    None => ProfileForm::Euler { c1: 0.0, c2: 1.0, p1, p2 },
                }
            } else {
                let omega = (-disc).sqrt();
                let Some(r1) = r1 else {
                    return Err(Error::Parameter(
                        "oscillatory Euler profile needs an outer Dirichlet radius".into(),
                    ));
                };
                let w1 = omega * r1.ln();
                ProfileForm::EulerOscillatory {
                    c1: w1.sin(),
                    c2: -w1.cos(),
                    omega,
                }
            }
        }
        Hetero::InverseR { r0 } => {
            if !(r0 > 0.0) {
                return Err(Error::Parameter(format!("r0 = {r0} must be positive")));
            }
            if kappa == 0.0 {
                // Φ'' = 0
                match r1 {
                    Some(r1) => ProfileForm::Euler { c1: r1, c2: -1.0, p1: 0.0, p2: 1.0 },
                    None => ProfileForm::Euler { c1: 1.0, c2: 0.0, p1: 0.0, p2: 1.0 },
                }
            } else {
                let s = -(kappa / r0).cbrt();
                match r1 {
                    Some(r1) => {
                        let p = airy_pair(s * r1)?;
                        ProfileForm::Airy { c1: p.bi, c2: -p.ai, s }
                    }
                    None if kappa < 0.0 => ProfileForm::Airy { c1: 1.0, c2: 0.0, s },
                    None => {
                        return Err(Error::Parameter(
                            "oscillatory Airy profile needs an outer Dirichlet radius".into(),
                        ));
                    }
                }
            }
        }
        Hetero::Custom { f } => {
            f.validate()?;
            if kappa != 0.0 {
                return Err(Error::Parameter(
                    "custom heterogeneity is supported only for kappa = 0".into(),
                ));
            }
            let Some(r1) = r1 else {
                return Err(Error::Parameter("quadrature profile needs the outer radius r1".into()));
            };
            ProfileForm::Quadrature { c: 1.0, r1, f }
        }
    };
    let mut profile = SpatialProfile {
        kappa,
        dim: HETERO_DIM,
        k,
        hetero,
        form,
        extension: false,
    };
    let factor = if normalize {
        let at = profile.phi(r_ref)?;
        if at == 0.0 || !at.is_finite() {
            return Err(Error::Parameter(format!("profile vanishes at r_ref = {r_ref}")));
        }
        amplitude / at
    } else {
        let lead = match profile.form {
            ProfileForm::Euler { c1, c2, .. } if c1 == 0.0 => c2,
            ProfileForm::Euler { c1, .. } | ProfileForm::Airy { c1, .. } => c1,
            ProfileForm::EulerOscillatory { c1, c2, .. } => {
                if c1 != 0.0 {
                    c1
                } else {
                    c2
                }
            }
            _ => 1.0,
        };
        amplitude / lead
    };
    profile.form = scale_form(profile.form, factor);
    Ok(profile)
}

fn scale_form(form: ProfileForm, s: f64) -> ProfileForm {
    match form {
        ProfileForm::Laplace { c2, c3 } => ProfileForm::Laplace { c2: s * c2, c3: s * c3 },
        ProfileForm::Airy { c1, c2, s: z } => ProfileForm::Airy { c1: s * c1, c2: s * c2, s: z },
        ProfileForm::Euler { c1, c2, p1, p2 } => ProfileForm::Euler { c1: s * c1, c2: s * c2, p1, p2 },
        ProfileForm::EulerOscillatory { c1, c2, omega } => ProfileForm::EulerOscillatory {
            c1: s * c1,
            c2: s * c2,
            omega,
        },
        ProfileForm::Quadrature { c, r1, f } => ProfileForm::Quadrature { c: s * c, r1, f },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_residual(p: &SpatialProfile, lo: f64, hi: f64) -> f64 {
        let n = 200;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 1..=n {
            let r = lo + (hi - lo) * i as f64 / (n + 1) as f64;
            worst = worst.max(p.equation_residual(r).unwrap().abs());
            scale = scale.max(p.phi(r).unwrap().abs());
        }
        worst / scale
    }

    #[test]
    fn regular_profiles() {
        let p = phi_radial(PI * PI, 3, PI).unwrap();
        assert!(p.phi(1.0).unwrap().abs() < 1e-15);
        for dim in 1..=3 {
            let p = phi_radial(4.0, dim, 2.0).unwrap();
            assert_eq!(p.phi(0.0).unwrap(), 1.0);
            assert_eq!(p.phi_r(0.0).unwrap(), 0.0);
            assert!(max_residual(&p, 0.0, 3.0) < 1e-8, "dim {dim}");
        }
    }

    #[test]
    fn decaying_profiles() {
        let p = phi_radial(-1.0, 2, 1.0).unwrap();
        assert_relative_eq!(p.phi(1.0).unwrap(), 0.421_024_438_240_708_34, max_relative = 1e-14);
        assert!(!p.extension);
        for dim in 1..=3 {
            let p = phi_radial(-2.25, dim, 1.5).unwrap();
            assert_eq!(p.extension, dim != 2);
            assert!(max_residual(&p, 0.5, 5.0) < 1e-8, "dim {dim}");
        }
    }

    #[test]
    fn laplace_profiles() {
        for dim in 1..=3 {
            let p = phi_laplace(dim, 1.0, 0.3).unwrap();
            assert!(max_residual(&p, 0.2, 2.0) < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(phi_radial(1.0, 4, 1.0).is_err());
        assert!(phi_radial(0.0, 2, 1.0).is_err());
        assert!(phi_radial(2.0, 2, 1.0).is_err());
        assert!(phi_radial(-1.0, 2, 1.0).unwrap().phi(0.0).is_err());
    }

    #[test]
    fn dirichlet_fits() {
        assert_relative_eq!(fit_dirichlet(3, 1.0).unwrap(), PI);
        assert_relative_eq!(fit_dirichlet(2, 2.0).unwrap(), 1.202_412_778_847_886_5, max_relative = 1e-14);
        assert_relative_eq!(fit_dirichlet(1, PI).unwrap(), 0.5);
    }

    #[test]
    fn biot_root() {
        let fit = fit_biot(2, 1.0, 1.0, Some(1.0)).unwrap();
        assert_relative_eq!(fit.k * bessel_j1(fit.k), bessel_j0(fit.k), epsilon = 1e-11);
        assert_relative_eq!(fit.k, 1.255_783_711_794_593_5, max_relative = 1e-11);
        assert_relative_eq!(fit.a.unwrap(), -fit.k * fit.k);
    }

    #[test]
    fn biot_limits_and_monotonicity() {
        for dim in 1..=3 {
            let lam = first_regular_zero(dim).unwrap();
            let bis = [1e-6, 0.1, 1.0, 10.0, 100.0, 1e6];
            let ks: Vec<f64> = bis.iter().map(|&b| fit_biot(dim, 1.0, b, None).unwrap().k).collect();
            assert!(ks.windows(2).all(|w| w[0] < w[1]));
            assert!(ks[0] < 1e-2);
            assert!((ks[5] - lam).abs() < 1e-4 * lam);
        }
    }

    #[test]
    fn flux_fit_sphere() {
        let p = fit_flux(3, 0.5, 1.0, 4.0 * PI, -1.0).unwrap();
        let ProfileForm::Laplace { c2, c3 } = p.form else { panic!() };
        assert_relative_eq!(c3, -1.0, max_relative = 1e-15);
        assert_relative_eq!(c2, -1.0, max_relative = 1e-15);
        assert_relative_eq!(p.phi(0.5).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(p.phi(1.0).unwrap(), 0.0);
    }

    #[test]
    fn flux_fit_cylinder_conserves() {
        let (q, a) = (2.0, -0.5);
        let p = fit_flux(2, 0.1, 1.0, q, a).unwrap();
        assert!(p.phi(1.0).unwrap().abs() < 1e-15);
        for r in [0.1, 0.3, 0.77, 1.0] {
            let total = -2.0 * PI * r * p.phi_r(r).unwrap();
            assert_relative_eq!(total, a.abs() * q, max_relative = 1e-14);
        }
        assert!(fit_flux(2, 1.0, 0.5, q, a).is_err());
        assert!(fit_flux(1, 0.1, 1.0, q, a).is_err());
    }

    #[test]
    fn laplace_radius_inverts() {
        let p = fit_flux(2, 0.1, 1.0, 1.0, -1.0).unwrap();
        for r in [0.2, 0.5, 0.9] {
            assert_relative_eq!(p.laplace_radius(p.phi(r).unwrap()).unwrap(), r, max_relative = 1e-13);
        }
        let p = fit_flux(3, 0.1, 1.0, 1.0, -1.0).unwrap();
        assert_relative_eq!(p.laplace_radius(p.phi(0.4).unwrap()).unwrap(), 0.4, max_relative = 1e-13);
    }

    fn params(r_ref: f64, r1: Option<f64>) -> HeteroParams {
        HeteroParams {
            r_ref,
            r1,
            amplitude: 1.0,
            normalize: true,
        }
    }

    #[test]
    fn euler_exponents_and_dirichlet() {
        let p = hetero_phi(Hetero::Square { r0: 0.6 }, 1.0, params(0.6, Some(2.0))).unwrap();
        let ProfileForm::Euler { c1, c2, p1, p2 } = p.form else { panic!() };
        assert_relative_eq!(p1, -0.2, max_relative = 1e-14);
        assert_relative_eq!(p2, -1.8, max_relative = 1e-14);
        assert_relative_eq!(c2 / c1, -(2.0f64).powf(1.6), max_relative = 1e-14);
        assert!(p.phi(2.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(p.phi(0.6).unwrap(), 1.0, max_relative = 1e-14);
        assert!(max_residual(&p, 0.6, 2.0) < 1e-8);
    }

    #[test]
    fn euler_oscillatory() {
        let p = hetero_phi(Hetero::Square { r0: 2.0 }, 1.0, params(2.0, Some(4.0))).unwrap();
        let ProfileForm::EulerOscillatory { omega, .. } = p.form else { panic!() };
        assert_relative_eq!(omega, 3f64.sqrt(), max_relative = 1e-15);
        assert!(p.phi(4.0).unwrap().abs() < 1e-14);
        assert!(max_residual(&p, 2.0, 4.0) < 1e-8);
        assert!(hetero_phi(Hetero::Square { r0: 1.0 }, 1.0, params(1.0, Some(2.0))).is_err());
    }

    #[test]
    fn euler_negative_kappa() {
        let p = hetero_phi(Hetero::Square { r0: 1.0 }, -1.0, params(1.0, None)).unwrap();
        for r in [1.0, 2.0, 7.5] {
            assert_relative_eq!(p.phi(r).unwrap(), r.powf(-1.0 - 2f64.sqrt()), max_relative = 1e-14);
        }
        assert!(max_residual(&p, 1.0, 10.0) < 1e-8);
    }

    #[test]
    fn euler_branches_meet_at_double_root() {
        let (r0, r1) = (1.0, 1.5);
        let below = hetero_phi(Hetero::Square { r0 }, (0.999f64 / r0).powi(2), params(r0, Some(r1))).unwrap();
        let above = hetero_phi(Hetero::Square { r0 }, (1.001f64 / r0).powi(2), params(r0, Some(r1))).unwrap();
        for r in [1.1, 1.25, 1.4] {
            assert!((below.phi(r).unwrap() - above.phi(r).unwrap()).abs() < 1e-4);
        }
    }

    #[test]
    fn airy_profiles() {
        let p = hetero_phi(Hetero::InverseR { r0: 1.0 }, 1.0, params(1.0, Some(2.0))).unwrap();
        assert!(p.phi(2.0).unwrap().abs() < 1e-14);
        assert!(max_residual(&p, 1.0, 2.0) < 1e-8);
        let p = hetero_phi(Hetero::InverseR { r0: 0.5 }, -4.0, params(0.5, None)).unwrap();
        let ProfileForm::Airy { s, c2, .. } = p.form else { panic!() };
        assert_relative_eq!(s, (4.0f64).powf(1.0 / 3.0) * 0.5f64.powf(-1.0 / 3.0), max_relative = 1e-14);
        assert_eq!(c2, 0.0);
        assert!(max_residual(&p, 0.5, 3.0) < 1e-8);
        assert!(p.phi(3.0).unwrap() < p.phi(0.5).unwrap());
    }

    #[test]
    fn quadrature_matches_euler_closed_form() {
        let (r0, r1) = (0.1, 1.0);
        let hp = HeteroParams {
            r_ref: r0,
            r1: Some(r1),
            amplitude: 1.0 / (2.0 * PI),
            normalize: false,
        };
        let p = hetero_phi(Hetero::Custom { f: CustomF::Power { r0, p: 2.0 } }, 0.0, hp).unwrap();
        for i in 0..20 {
            let r = r0 + (r1 - r0) * i as f64 / 19.0;
            let exact = r0 * r0 / (4.0 * PI) * (r.powi(-2) - r1.powi(-2));
            assert!((p.phi(r).unwrap() - exact).abs() <= 1e-10 * exact.abs().max(1e-300) + 1e-16);
        }
        // unit flux through every circle: −2π r f Φ' = c·2π
        for r in [0.1, 0.5] {
            let flux = -2.0 * PI * r * p.f(r) * p.phi_r(r).unwrap();
            assert_relative_eq!(flux, 1.0, max_relative = 1e-14);
        }
        assert!(max_residual(&p, r0, r1) < 1e-8);
    }

    #[test]
    fn custom_requires_kappa_zero() {
        let f = CustomF::Exp { r0: 1.0, l: 2.0 };
        assert!(hetero_phi(Hetero::Custom { f }, 1.0, params(1.0, Some(2.0))).is_err());
        let p = hetero_phi(Hetero::Custom { f }, 0.0, params(1.0, Some(2.0))).unwrap();
        assert!(max_residual(&p, 1.0, 2.0) < 1e-8);
    }

    #[test]
    fn serde_round_trip() {
        let p = hetero_phi(Hetero::Square { r0: 0.6 }, 1.0, params(0.6, Some(2.0))).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: SpatialProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
    }
}
