//! Subcommand implementations.

use std::path::PathBuf;

use arrhenius_rd::construct::{ClosedForm, DiffusivityRep, ReactionLaw};
use arrhenius_rd::dsolve::{arrhenius_oracle_u, build_diffusivity, dm_bound};
use arrhenius_rd::scenario::{
    assemble, assemble_unchecked, content_hash, preset_variant, Scenario, ScenarioSpec,
};
use arrhenius_rd::spatial::BoundaryKind;
use arrhenius_rd::verify::{
    dim2_zeros, evolve_nonlinear, pde_residual_with_order, stability_criterion, stability_experiment, DecayStatus,
    Grid, PolarGrid, StabilityVerdict, RESIDUAL_TOL,
};

use crate::config::{parse_preset, BuildRequest, RunConfig, StabilityRequest, ThetaGrid};
use crate::output::{fmt17, write_atomic, Csv};
use crate::{CliError, EXIT_INCONCLUSIVE, EXIT_SPLICE, EXIT_TOLERANCE};

/// Smallest acceptable refinement order in `verify`.
pub const MIN_ORDER: f64 = 1.8;
/// Default tolerance on the evolution oracle in `verify`.
pub const EVOLVE_TOL: f64 = 1e-4;
/// Build tolerance of `build-diffusivity`.
pub const BUILD_TOL: f64 = 1e-12;

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn load_scenario(cfg: &RunConfig, default_preset: &str) -> Result<Scenario, CliError> {
    if let Some(path) = &cfg.scenario {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read scenario {}: {e}", path.display())))?;
        let spec = ScenarioSpec::from_json(&text).map_err(|e| CliError::invalid(format!("scenario: {e}")))?;
        return spec.build().map_err(|e| CliError::invalid(format!("scenario: {e}")));
    }
    let id = cfg.preset.as_deref().unwrap_or(default_preset);
    let (n, variant) = parse_preset(id)?;
    preset_variant(n, variant.as_deref()).map_err(|e| CliError::invalid(format!("preset {id}: {e}")))
}

fn theta_nodes(g: ThetaGrid) -> Vec<f64> {
    (0..g.n).map(|k| g.min + (g.max - g.min) * k as f64 / (g.n - 1) as f64).collect()
}

/// Hash of the effective configuration; the output directory is excluded.
fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.out = None;
    content_hash(&serde_json::to_vec(&c).expect("config serializes"))
}

/// `(θ, D, R, u)` over a θ grid for the scenario's pair.
pub fn construct_reaction(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_scenario(cfg, "1")?;
    let d = &s.diffusivity;
    let grid = cfg.theta.unwrap_or(ThetaGrid {
        min: 0.0,
        max: d.theta_max().min(10.0),
        n: 201,
    });
    if grid.max > d.theta_max() {
        return Err(CliError::invalid(format!(
            "theta grid reaches {} beyond the diffusivity range {}",
            grid.max,
            d.theta_max()
        )));
    }
    let mut csv = Csv::new(
        &[
            "arrhenius-rd construct-reaction".into(),
            format!("scenario={} scenario_hash={}", s.name, s.hash()),
            format!("A={} kappa={}", fmt17(s.params.a), fmt17(s.params.kappa)),
            "dimensionless; D(0) and R(0) are the theta -> 0 limits".into(),
        ],
        &["theta".into(), "D".into(), "R".into(), "u".into()],
    );
    for th in theta_nodes(grid) {
        let dv = if th == 0.0 { d.d(th).unwrap_or(0.0) } else { d.d(th)? };
        let u = d.u0 + d.integral(th)?;
        csv.row(&[th, dv, s.reaction.rate(th), u]);
    }
    let path = write_atomic(&out_dir(cfg), "reaction.csv", &csv.finish())?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Piecewise build of the Arrhenius-compatible diffusivity with the first
/// two contraction iterates and the ODE oracle alongside.
pub fn build_diffusivity_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let req = cfg.build.unwrap_or_default();
    let BuildRequest { r0, theta_max } = req;
    let tol = cfg.tol.unwrap_or(BUILD_TOL);
    let build = build_diffusivity(r0, theta_max, tol)?;
    let hash = config_hash(cfg);
    let dir = out_dir(cfg);
    let json = build.to_json()?;
    let p1 = write_atomic(&dir, "diffusivity.json", &json)?;
    let grid = cfg.theta.unwrap_or(ThetaGrid {
        min: 0.0,
        max: theta_max,
        n: 401,
    });
    if grid.max > theta_max {
        return Err(CliError::invalid("theta grid exceeds theta_max"));
    }
    let thetas = theta_nodes(grid);
    let oracle_from = 0.02;
    let oracle_thetas: Vec<f64> = thetas.iter().copied().filter(|t| *t >= oracle_from).collect();
    let oracle = arrhenius_oracle_u(r0, &oracle_thetas)?;
    let d1 = DiffusivityRep::closed(ClosedForm::ContractionD1 { r0 })?;
    let d2 = DiffusivityRep::closed(ClosedForm::ContractionD2 { r0 })?;
    let law = ReactionLaw::Arrhenius { r0, b: 1.0 };
    let mut csv = Csv::new(
        &[
            "arrhenius-rd build-diffusivity".into(),
            format!("config_hash={hash}"),
            format!(
                "R0={} theta_max={} tol={} segments={} splices_pass={} D_m_bound={}",
                fmt17(r0),
                fmt17(theta_max),
                fmt17(tol),
                build.segments.len(),
                build.splices_pass(),
                fmt17(dm_bound(r0))
            ),
            format!("dimensionless; oracle columns are NaN below theta={oracle_from}"),
        ],
        &[
            "theta".into(),
            "u".into(),
            "D".into(),
            "D1".into(),
            "D2".into(),
            "u_oracle".into(),
            "D_oracle".into(),
        ],
    );
    let mut k = 0;
    for th in thetas {
        let u = build.u(th)?;
        let (uo, dov) = if th >= oracle_from {
            let uo = oracle[k];
            k += 1;
            // D from the compatibility relation with A = −1, κ = 1
            (uo, uo / (uo - law.rate(th)))
        } else {
            (f64::NAN, f64::NAN)
        };
        csv.row(&[th, u, build.d(th)?, d1.d(th)?, d2.d(th)?, uo, dov]);
    }
    let p2 = write_atomic(&dir, "diffusivity.csv", &csv.finish())?;
    println!("wrote {}", p1.display());
    println!("wrote {}", p2.display());
    if !build.splices_pass() {
        for s in build.splices.iter().filter(|s| !s.passed) {
            eprintln!("splice at theta = {} failed: probes {:?}", s.theta, s.probes);
        }
        return Err(CliError::new(EXIT_SPLICE, "splice check failed"));
    }
    Ok(())
}

/// θ, u and flux profiles at the scenario's output times.
pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let mut s = load_scenario(cfg, "3")?;
    if let Some(k) = cfg.perturb_diffusivity {
        s.diffusivity = s.diffusivity.clone().with_scale(k);
    }
    let sol = assemble(&s)?;
    let nr = cfg.grid.map(|g| g.nr).unwrap_or(s.grid.nr);
    let r = Grid::for_scenario(&s, nr, 4)?.r;
    let mut columns = vec!["r".to_string()];
    for &x in &s.times {
        for q in ["theta", "u", "flux"] {
            columns.push(format!("{q}[|A|t={x}]"));
        }
    }
    let mut csv = Csv::new(
        &[
            "arrhenius-rd solve".into(),
            format!("scenario={} scenario_hash={}", s.name, s.hash()),
            format!("A={} kappa={} dim={}", fmt17(s.params.a), fmt17(s.params.kappa), s.dim),
            "dimensionless; flux is -u_r".into(),
        ],
        &columns,
    );
    for &ri in &r {
        let mut row = vec![ri];
        for &x in &s.times {
            let t = s.time(x);
            row.push(sol.theta(ri, t)?);
            row.push(sol.u(ri, t)?);
            row.push(sol.flux(ri, t)?);
        }
        csv.row(&row);
    }
    let path = write_atomic(&out_dir(cfg), "solution.csv", &csv.finish())?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Finite-difference residual, optionally with the evolution oracle.
pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let mut s = load_scenario(cfg, "3")?;
    let sol = match cfg.perturb_diffusivity {
        Some(k) => {
            s.diffusivity = s.diffusivity.clone().with_scale(k);
            assemble_unchecked(&s)
        }
        None => assemble(&s)?,
    };
    let (nr, nt) = cfg.grid.map(|g| (g.nr, g.nt)).unwrap_or((s.grid.nr, s.grid.nt));
    let tol = cfg.tol.unwrap_or(RESIDUAL_TOL);
    let rep = pde_residual_with_order(&sol, nr, nt)?;
    let dir = out_dir(cfg);
    let path = write_atomic(&dir, "residual.csv", &rep.to_csv(sol.hash(), tol))?;
    println!("wrote {}", path.display());
    let order = rep.order.unwrap_or(f64::NAN);
    println!(
        "max_relative_residual = {} (tol {}), order = {}",
        fmt17(rep.max_relative),
        fmt17(tol),
        fmt17(order)
    );
    let mut failures = Vec::new();
    if !rep.passes(tol) {
        failures.push(format!(
            "residual {:e} exceeds {tol:e} at r = {}, t = {}",
            rep.max_relative, rep.location.0, rep.location.1
        ));
    }
    // an identically zero residual has no order to estimate
    if rep.max_abs_residual > 0.0 && !(order >= MIN_ORDER) {
        failures.push(format!("refinement order {order:.3} below {MIN_ORDER}"));
    }
    if cfg.evolve {
        let g = Grid::for_scenario(&s, nr, nt)?;
        let t0 = g.t[0];
        let t_end = *g.t.last().expect("grid has time nodes");
        let init: Vec<f64> = g.r.iter().map(|&x| sol.theta(x, t0)).collect::<Result<_, _>>()?;
        let ev = evolve_nonlinear(&s, &init, &g, t_end)?;
        let last = ev.u.last().expect("evolution records the end time");
        let exact: Vec<f64> = g.r.iter().map(|&x| sol.u(x, t_end)).collect::<Result<_, _>>()?;
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut csv = Csv::new(
            &[
                "arrhenius-rd verify --evolve".into(),
                format!("scenario_hash={}", sol.hash()),
                format!("t_end={} steps={} rejected={}", fmt17(t_end), ev.steps, ev.rejected),
            ],
            &["r".into(), "u_exact".into(), "u_evolved".into()],
        );
        let mut err: f64 = 0.0;
        for ((&x, &ue), &uv) in g.r.iter().zip(&exact).zip(last) {
            err = err.max((ue - uv).abs());
            csv.row(&[x, ue, uv]);
        }
        let rel = err / scale;
        let etol = cfg.evolve_tol.unwrap_or(EVOLVE_TOL);
        let path = write_atomic(&dir, "evolve.csv", &csv.finish())?;
        println!("wrote {}", path.display());
        println!("evolve relative error = {} (tol {})", fmt17(rel), fmt17(etol));
        if !(rel <= etol) {
            failures.push(format!("evolution differs by {rel:e} (tol {etol:e})"));
        }
    }
    if failures.is_empty() {
        println!("verify: pass");
        Ok(())
    } else {
        Err(CliError::new(EXIT_TOLERANCE, failures.join("; ")))
    }
}

fn scenario_verdict(s: &Scenario) -> Result<(StabilityVerdict, f64), CliError> {
    if !(s.params.kappa > 0.0) {
        return Err(CliError::invalid("stability needs a kappa > 0 scenario"));
    }
    let ReactionLaw::Arrhenius { r0, b } = s.reaction else {
        return Err(CliError::invalid("stability needs an Arrhenius reaction"));
    };
    let r1 = s
        .boundaries
        .iter()
        .find_map(|bd| match bd.kind {
            BoundaryKind::DirichletZero { r1 } => Some(r1),
            _ => None,
        })
        .ok_or_else(|| CliError::invalid("stability needs a Dirichlet disk u(r1) = 0"))?;
    let d0 = s.diffusivity.d(0.0)?;
    let v = stability_criterion(r0, r1, b, d0, dim2_zeros()?);
    Ok((v, v.group * d0))
}

/// Sufficient criterion and, on request, the perturbation experiment.
pub fn stability(cfg: &RunConfig) -> Result<(), CliError> {
    let req: StabilityRequest = cfg.stability.clone().unwrap_or_default();
    let zeros = dim2_zeros()?;
    let (verdict, r0_dl, provenance) = match req.r0 {
        Some(r0) => {
            let v = stability_criterion(r0, zeros.0, 1.0, 1.0, zeros);
            (v, r0, format!("dimensionless R0={}", fmt17(r0)))
        }
        None => {
            let s = load_scenario(cfg, "3")?;
            let (v, r0_dl) = scenario_verdict(&s)?;
            (v, r0_dl, format!("scenario={} scenario_hash={}", s.name, s.hash()))
        }
    };
    println!("group = {}", fmt17(verdict.group));
    println!("threshold = {}", fmt17(verdict.threshold));
    println!("margin = {}", fmt17(verdict.margin));
    println!("verdict = {}", if verdict.pass { "pass" } else { "fail" });
    let dir = out_dir(cfg);
    let mut csv = Csv::new(
        &[
            "arrhenius-rd stability".into(),
            provenance.clone(),
            format!("config_hash={}", config_hash(cfg)),
        ],
        &["group".into(), "threshold".into(), "margin".into(), "pass".into()],
    );
    csv.row(&[verdict.group, verdict.threshold, verdict.margin, if verdict.pass { 1.0 } else { 0.0 }]);
    let path = write_atomic(&dir, "stability.csv", &csv.finish())?;
    println!("wrote {}", path.display());
    let mut inconclusive = false;
    if req.experiment {
        let grid = PolarGrid {
            nr: cfg.grid.map(|g| g.nr).unwrap_or(req.nr),
            nphi: cfg.grid.map(|g| g.nt).unwrap_or(req.nphi),
            dt: req.dt,
        };
        let table = stability_experiment(r0_dl, req.eps, &req.modes, grid, req.t_end)?;
        for row in &table.rows {
            println!(
                "mode ({},{}): rate = {} bound = {} r2 = {} status = {:?}",
                row.n,
                row.m,
                row.rate.map(fmt17).unwrap_or_else(|| "nan".into()),
                fmt17(row.bound_rate),
                fmt17(row.r_squared),
                row.status
            );
            inconclusive |= row.status == DecayStatus::Inconclusive;
        }
        let header = format!(
            "arrhenius-rd stability experiment; {provenance}; eps={} grid={}x{} dt={} t_end={}",
            fmt17(req.eps),
            grid.nr,
            grid.nphi,
            fmt17(grid.dt),
            fmt17(req.t_end)
        );
        let path = write_atomic(&dir, "stability_modes.csv", &table.to_csv(&header))?;
        println!("wrote {}", path.display());
    }
    if inconclusive {
        return Err(CliError::new(EXIT_INCONCLUSIVE, "exponential fit inconclusive (R^2 < 0.99)"));
    }
    if !verdict.pass {
        return Err(CliError::new(
            EXIT_TOLERANCE,
            format!("stability group {} is not below {}", verdict.group, verdict.threshold),
        ));
    }
    Ok(())
}
