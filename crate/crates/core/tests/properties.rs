use std::sync::OnceLock;

use arrhenius_rd::construct::{
    check_compatibility, invert_kirchhoff, kirchhoff_u, table1_pair, table1_sample_thetas, ClosedForm, DiffusivityRep,
    SymmetryParams, Table1Params, Table1Row,
};
use arrhenius_rd::dsolve::{arrhenius_oracle_u, build_diffusivity, dm_bound, PiecewiseDiffusivity};
use arrhenius_rd::scenario::{assemble, preset, Solution};
use arrhenius_rd::spatial::fit_biot;
use arrhenius_rd::specfun::{bessel_j0, bessel_j1, bessel_zero};
use proptest::prelude::*;

fn preset3() -> &'static Solution {
    static SOL: OnceLock<Solution> = OnceLock::new();
    SOL.get_or_init(|| assemble(&preset(3).unwrap()).unwrap())
}

fn unit_build() -> &'static PiecewiseDiffusivity {
    static B: OnceLock<PiecewiseDiffusivity> = OnceLock::new();
    B.get_or_init(|| build_diffusivity(1.0, 20.0, 1e-12).unwrap())
}

fn second_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

fn nonzero() -> impl Strategy<Value = f64> {
    prop_oneof![-3.0..-0.1f64, 0.1..3.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn j0_solves_bessel_equation(x in 0.5..20.0f64) {
        // Richardson-extrapolated second difference
        let h = 1e-2;
        let d2 = (4.0 * second_difference(bessel_j0, x, h / 2.0) - second_difference(bessel_j0, x, h)) / 3.0;
        let r = d2 - bessel_j1(x) / x + bessel_j0(x);
        prop_assert!(r.abs() <= 1e-8, "x = {x}: {r:e}");
    }

    #[test]
    fn bessel_zeros_interlace(m in 1u32..12) {
        let a = bessel_zero(0, m).unwrap().value;
        let b = bessel_zero(1, m).unwrap().value;
        let c = bessel_zero(0, m + 1).unwrap().value;
        prop_assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn table1_pairs_are_compatible(
        row in prop_oneof![Just(Table1Row::A), Just(Table1Row::B), Just(Table1Row::D)],
        m in -0.9..3.0f64,
        kappa in nonzero(),
        a in nonzero(),
    ) {
        // row (d) keeps D positive only for A/κ < 0
        let a = if row == Table1Row::D { -a.abs() * kappa.signum() } else { a };
        let p = SymmetryParams::new(a, kappa);
        let params = Table1Params { m, r0: 1.0, b: 1.0, kappa, a };
        let pair = table1_pair(row, params, &p).unwrap();
        let (res, at) = check_compatibility(&pair.diffusivity, &pair.reaction, &p, &table1_sample_thetas()).unwrap();
        prop_assert!(res <= 1e-9, "{row:?}: {res:e} at {at}");
    }

    #[test]
    fn kirchhoff_inverts(
        expr in prop_oneof![
            (0.0..3.0f64).prop_map(|m| ClosedForm::Power { m }),
            Just(ClosedForm::Exp),
            Just(ClosedForm::Cosh),
        ],
        u0 in -1.0..1.0f64,
        theta in 0.0..8.0f64,
    ) {
        let d = DiffusivityRep::closed(expr).unwrap().with_u0(u0);
        let u = kirchhoff_u(&d, theta).unwrap();
        let back = invert_kirchhoff(&d, u).unwrap();
        prop_assert!((back - theta).abs() <= 1e-9 * (1.0 + theta), "{expr:?}: {theta} -> {back}");
    }

    #[test]
    fn built_diffusivity_within_bounds(theta in 0.0..20.0f64) {
        let d = unit_build().d(theta).unwrap();
        prop_assert!((1.0..=dm_bound(1.0)).contains(&d), "D({theta}) = {d}");
    }

    #[test]
    fn series_matches_oracle(theta in 0.02..0.1f64) {
        let u = unit_build().u(theta).unwrap();
        let o = arrhenius_oracle_u(1.0, &[theta]).unwrap()[0];
        prop_assert!((u - o).abs() <= 1e-11, "theta = {theta}: {:e}", (u - o).abs());
    }

    #[test]
    fn biot_fit_increases(lo in 0.05..50.0f64, factor in 1.01..10.0f64) {
        let k1 = fit_biot(2, 1.0, lo, None).unwrap().k;
        let k2 = fit_biot(2, 1.0, lo * factor, None).unwrap().k;
        prop_assert!(k1 < k2);
    }

    #[test]
    fn flux_factorizes_in_time(r in 0.05..0.95f64, x in -2.0..3.0f64) {
        let sol = preset3();
        let s = preset(3).unwrap();
        let t = s.time(x);
        let lhs = sol.flux(r, t).unwrap();
        let rhs = (s.params.a * t).exp() * sol.flux(r, 0.0).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs(), "{lhs} vs {rhs}");
    }

    #[test]
    fn temperature_below_kirchhoff(r in 0.0..1.0f64, x in -2.0..3.0f64) {
        let sol = preset3();
        let t = preset(3).unwrap().time(x);
        prop_assert!(sol.theta(r, t).unwrap() <= sol.u(r, t).unwrap() + 1e-12);
    }
}
