//! The subcommands. Each one echoes the normalized scenario into the output
//! directory and writes its artifacts next to it; post-processing commands
//! read what earlier commands wrote.

use anyhow::{bail, Result};
use hjlab_core::assumptions::{
    check_boundary_data, check_compatibility, check_convexity, check_coercivity,
    check_kinetic_split, check_localized_ray_monotonicity, check_potential,
    check_ray_monotonicity, AssumptionReport, Sign, Verdict,
};
use hjlab_core::asymptotics::{
    compat_free_sandwich, dirichlet_asymptotic, drift_compensated, fit_decay,
    free_boundary_profile, mu_series, sup_distance, DecayFit, Formula, ProfileInputs,
};
use hjlab_core::ergodic::{
    ergodic_scheme, estimate_c_discount, estimate_c_slope, solve_stationary_dirichlet, Method,
    SlopeEstimate, StationaryConfig, StationaryOutcome,
};
use hjlab_core::hamiltonian::{min_over_p, COERCIVITY_CAP};
use hjlab_core::{BoundaryCondition, Sampling, Scheme};
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_field, read_state, write_field, write_snapshots, OutDir};
use crate::scenario::{Built, Exceptional, Scenario};

pub struct Context {
    pub scenario: Scenario,
    pub built: Built,
    pub out: OutDir,
}

impl Context {
    pub fn new(scenario: Scenario, out: OutDir) -> Result<Context> {
        let built = scenario.build()?;
        out.write_text("scenario.toml", &scenario.to_toml())?;
        Ok(Context { scenario, built, out })
    }

    /// The scheme with its slope box widened to cover the data.
    fn scheme(&self) -> Result<Scheme> {
        Ok(self.built.scheme()?.fitted_to(&[&self.built.u0])?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub bc: String,
    pub nodes: usize,
    pub t_final: f64,
    pub t: f64,
    pub dt: f64,
    pub steps: usize,
    pub p_max: f64,
    pub alpha: [f64; 2],
    pub lambda_sc: f64,
    pub lipschitz: f64,
    pub max_gradient: f64,
    pub max_boundary_excess: Option<f64>,
    pub snapshots: usize,
    pub warnings: Vec<String>,
}

pub fn evolve(ctx: &Context) -> Result<RunSummary> {
    let s = ctx.scheme()?;
    let grid = &ctx.built.grid;
    let state = s.evolve(&ctx.built.u0, ctx.scenario.run.t_final)?;
    let mut warnings = s.warnings().to_vec();
    warnings.extend(s.run_warnings(&state));
    let summary = RunSummary {
        bc: s.bc().name().to_string(),
        nodes: grid.len(),
        t_final: ctx.scenario.run.t_final,
        t: state.t,
        dt: state.dt,
        steps: state.steps,
        p_max: s.flux().p_max,
        alpha: s.flux().alpha,
        lambda_sc: s.lambda_sc(),
        lipschitz: state.lipschitz,
        max_gradient: state.max_gradient,
        max_boundary_excess: state.max_boundary_excess,
        snapshots: state.snapshots.len(),
        warnings,
    };
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    ctx.out.write_csv(
        "probes.csv",
        &["time", "sup_norm", "boundary_min_gap", "slope_estimate"],
        state
            .probes
            .iter()
            .map(|p| vec![p.time, p.sup_norm, opt(p.boundary_min_gap), opt(p.slope_estimate)]),
    )?;
    write_snapshots(&ctx.out, grid, &state.snapshots)?;
    write_field(&ctx.out, "final.csv", grid, "u", &state.u)?;
    ctx.out.write_json("run.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicSummary {
    pub c: f64,
    pub method: Method,
    pub residual: f64,
    pub converged: bool,
    pub refined: bool,
    pub delta_sequence: Vec<f64>,
    pub discount_values: Vec<f64>,
    pub extrapolated_c: f64,
    pub slope: Option<SlopeSummary>,
    /// `|c_discount - c_slope|`
    pub delta_c: Option<f64>,
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub c: f64,
    pub max_deviation: f64,
    pub t1: f64,
    pub t2: f64,
}

impl From<SlopeEstimate> for SlopeSummary {
    fn from(s: SlopeEstimate) -> Self {
        SlopeSummary {
            c: s.c,
            max_deviation: s.max_deviation,
            t1: s.t1,
            t2: s.t2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct StationaryEntry {
    a: f64,
    #[serde(flatten)]
    outcome: StationaryOutcome,
}

/// The additive eigenvalue by vanishing discount, cross-checked by the
/// long-time slope. Dirichlet problems use their state-constraint version.
pub fn ergodic(ctx: &Context) -> Result<ErgodicSummary> {
    let s = ctx.scheme()?;
    let run = &ctx.scenario.run;
    let erg = estimate_c_discount(&s, &ctx.scenario.ergodic_config())?;
    let mut warnings = erg.warnings.clone();
    let slope = if run.t_final > 0.0 {
        let es = ergodic_scheme(&s);
        let state = es.evolve(&ctx.built.u0, run.t_final)?;
        match estimate_c_slope(&state, run.t_final / 2.0, run.t_final) {
            Ok(sl) => Some(SlopeSummary::from(sl)),
            Err(e) => {
                warnings.push(format!("slope estimate unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let summary = ErgodicSummary {
        c: erg.c,
        method: erg.method,
        residual: erg.residual,
        converged: erg.converged,
        refined: erg.refined,
        delta_sequence: erg.delta_sequence.clone(),
        discount_values: erg.discount_values.clone(),
        extrapolated_c: erg.extrapolated_c,
        delta_c: slope.as_ref().map(|sl| (sl.c - erg.c).abs()),
        slope,
        tolerance: run.ergodic_tol,
        warnings,
    };
    write_field(&ctx.out, "eigenfunction.csv", &ctx.built.grid, "v", &erg.v)?;
    ctx.out.write_json("ergodic.json", &summary)?;
    if ctx.built.is_dirichlet() {
        let cfg = StationaryConfig::default();
        let entries = [erg.c, erg.c + 0.5, erg.c - 0.5]
            .into_iter()
            .map(|a| {
                Ok(StationaryEntry {
                    a,
                    outcome: solve_stationary_dirichlet(a, &s, &ctx.built.g, &cfg)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ctx.out.write_json("stationary.json", &entries)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub formula: String,
    pub distance: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub level: f64,
    pub boundary_loss_time: Option<f64>,
    pub candidates: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

fn formula_name(f: Formula) -> String {
    serde_json::to_value(f)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn load_run(ctx: &Context) -> Result<(RunSummary, ErgodicSummary)> {
    let run: RunSummary = ctx.out.read_json("run.json", "evolve")?;
    if run.nodes != ctx.built.grid.len() {
        bail!("run.json: {} nodes, but the scenario grid has {}", run.nodes, ctx.built.grid.len());
    }
    let erg: ErgodicSummary = ctx.out.read_json("ergodic.json", "ergodic")?;
    Ok((run, erg))
}

/// Compares the evolution limit with the representation formulas.
pub fn profile(ctx: &Context) -> Result<ProfileSummary> {
    let grid = &ctx.built.grid;
    if let Some(why) = ctx.scenario.profile_unsupported() {
        bail!("profile: {why}");
    }
    let (run, erg) = load_run(ctx)?;
    let mut state = read_state(&ctx.out, grid, run.t, run.dt)?;
    let s = ctx.scheme()?;
    let cfg = &ctx.scenario.run;
    // The scheme's numerical viscosity puts the discrete constant below the
    // critical value max_x min_p H, where the sublevel sets used by the
    // formulas become empty. Formulas are evaluated at the clamped level and
    // the evolution is compared after removing its own discrete drift.
    let sampling = Sampling::default();
    let floor = (0..grid.len())
        .map(|n| min_over_p(&ctx.built.spec, &grid.coords(n)[..1], s.flux().p_max, &sampling).0)
        .fold(f64::NEG_INFINITY, f64::max);
    let level = erg.c.max(floor);
    let mut notes = Vec::new();
    if level > erg.c {
        notes.push(format!(
            "discrete constant {:.6e} is below the critical value {floor:.6e}; formulas use the latter",
            erg.c
        ));
        let shift = (erg.c - level) * state.t;
        state.u.iter_mut().for_each(|u| *u += shift);
        for snap in &mut state.snapshots {
            let shift = (erg.c - level) * snap.time;
            snap.u.iter_mut().for_each(|u| *u += shift);
        }
    }
    let inputs = ProfileInputs {
        spec: &ctx.built.spec,
        grid,
        u0: &ctx.built.u0,
        p_max: s.flux().p_max,
        aubry_tol: cfg.aubry_tol,
        level_slack: cfg.level_slack,
        sampling,
    };
    let res = match &ctx.built.bc {
        BoundaryCondition::Neumann(_) => free_boundary_profile(&inputs, level, true, &state)?,
        BoundaryCondition::StateConstraint => free_boundary_profile(&inputs, level, false, &state)?,
        BoundaryCondition::Dirichlet(_) => {
            dirichlet_asymptotic(&inputs, &ctx.built.g, level, &state, cfg.dead_band)?
        }
    };
    let compatible = grid
        .boundary_nodes()
        .iter()
        .zip(&ctx.built.g)
        .all(|(b, g)| ctx.built.u0[b.node] <= *g);
    if ctx.built.is_dirichlet() && !compatible {
        let report = compat_free_sandwich(&s, &ctx.built.u0, &ctx.built.g, &cfg.ks, cfg.t_final, level, Some(&inputs))?;
        ctx.out.write_json("sandwich.json", &report)?;
    }
    write_field(&ctx.out, "phi_minus.csv", grid, "phi_minus", &res.phi_minus)?;
    write_field(&ctx.out, "phi_infty.csv", grid, "phi_infty", &res.phi_infty)?;
    write_field(&ctx.out, "limit.csv", grid, "limit", &res.limit)?;
    let summary = ProfileSummary {
        formula: formula_name(res.formula),
        distance: res.distance,
        tolerance: cfg.profile_tol,
        pass: res.formula != Formula::Ambiguous && res.distance <= cfg.profile_tol,
        level,
        boundary_loss_time: res.boundary_loss_time,
        candidates: res.candidates.iter().map(|(f, d)| (formula_name(*f), *d)).collect(),
        notes: notes.into_iter().chain(res.notes).collect(),
    };
    ctx.out.write_json("profile.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaDiagnostics {
    pub eta: f64,
    pub c_bound: f64,
    /// Decay rate of `1 - mu+`; absent when it is already 1 everywhere.
    pub lambda: Option<f64>,
    pub fit_points: usize,
    pub fit_error: Option<String>,
    pub delta_first: f64,
    pub delta_last: f64,
    /// First time after which `1 - mu+ <= 1e-3` at every later probe.
    pub settle_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseSummary {
    /// Drift removed from the evolution: `c`, or `max(c, 0)` for Dirichlet runs.
    pub drift: f64,
    /// `true` when the final drift-compensated state replaces the eigenfunction.
    pub reference_is_final_state: bool,
    pub etas: Vec<EtaDiagnostics>,
    /// `max - min` of `||u(t) + drift t||_inf` over the second half of the run.
    pub drift_growth: f64,
    /// Sup-norm change of `u + drift t` between the last two snapshots.
    pub final_change: f64,
    pub lipschitz: f64,
    pub max_boundary_excess: Option<f64>,
}

/// Monotonicity ratios of the drift-compensated evolution.
pub fn diagnose(ctx: &Context) -> Result<DiagnoseSummary> {
    let grid = &ctx.built.grid;
    let (run, erg) = load_run(ctx)?;
    let state = read_state(&ctx.out, grid, run.t, run.dt)?;
    if state.snapshots.len() < 2 {
        bail!("snapshots.csv: at least two snapshots are required");
    }
    let dirichlet = ctx.built.is_dirichlet();
    let drift = if dirichlet { erg.c.max(0.0) } else { erg.c };
    let history = drift_compensated(&state, drift);
    let reference: Vec<f64> = if dirichlet {
        history.last().expect("snapshots").u.clone()
    } else {
        read_field(&ctx.out, "eigenfunction.csv", "ergodic", grid)?
    };
    let mut rows = Vec::new();
    let mut etas = Vec::new();
    for &eta in &ctx.scenario.run.etas {
        let m = mu_series(&history, &reference, eta)?;
        for k in 0..m.times.len() {
            rows.push(vec![eta, m.times[k], m.mu_plus[k], m.mu_minus[k], m.delta[k]]);
        }
        let (lambda, fit_points, fit_error) = match fit_decay(&m) {
            Ok(DecayFit::Rate { lambda, points }) => (Some(lambda), points, None),
            Ok(DecayFit::Converged) => (None, 0, None),
            Err(e) => (None, 0, Some(e.to_string())),
        };
        etas.push(EtaDiagnostics {
            eta,
            c_bound: m.c_bound,
            lambda,
            fit_points,
            fit_error,
            delta_first: m.delta[0],
            delta_last: m.delta[m.delta.len() - 1],
            settle_time: m.settle_time(1e-3),
        });
    }
    ctx.out.write_csv("mu_series.csv", &["eta", "time", "mu_plus", "mu_minus", "delta"], rows)?;
    let norms = state.drift_norms(drift);
    let half: Vec<f64> = norms.iter().filter(|(t, _)| *t >= run.t / 2.0).map(|(_, n)| *n).collect();
    let hi = half.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = half.iter().copied().fold(f64::INFINITY, f64::min);
    let k = history.len();
    let summary = DiagnoseSummary {
        drift,
        reference_is_final_state: dirichlet,
        etas,
        drift_growth: if half.is_empty() { 0.0 } else { hi - lo },
        final_change: sup_distance(&history[k - 1].u, &history[k - 2].u),
        lipschitz: run.lipschitz,
        max_boundary_excess: run.max_boundary_excess,
    };
    ctx.out.write_json("diagnose.json", &summary)?;
    Ok(summary)
}

/// Runs the requested audits and writes `check_<id>.json` for each.
pub fn check(ctx: &Context, seed: u64) -> Result<Vec<AssumptionReport>> {
    let spec = &ctx.built.spec;
    let grid = &ctx.built.grid;
    let cfg = ctx.scenario.audit_config(seed);
    let a = ctx.scenario.check.level;
    let (potential, zeros) = check_potential(spec, grid);
    let exceptional = match ctx.scenario.check.exceptional {
        Exceptional::PotentialZeros => zeros,
        Exceptional::None => Vec::new(),
    };
    let mut reports = Vec::new();
    for id in ctx.scenario.assumptions() {
        let sampled = match id.as_str() {
            "coercivity" => Ok(check_coercivity(spec, grid, COERCIVITY_CAP, &Sampling::default())),
            "ray-monotonicity-plus" => check_ray_monotonicity(spec, grid, a, Sign::Plus, &cfg),
            "ray-monotonicity-minus" => check_ray_monotonicity(spec, grid, a, Sign::Minus, &cfg),
            "localized-ray-monotonicity-plus" => {
                check_localized_ray_monotonicity(spec, grid, a, &exceptional, Sign::Plus, &cfg)
            }
            "localized-ray-monotonicity-minus" => {
                check_localized_ray_monotonicity(spec, grid, a, &exceptional, Sign::Minus, &cfg)
            }
            "convexity" => check_convexity(spec, grid, &cfg),
            "kinetic-minimum-at-zero" => check_kinetic_split(spec, grid, &cfg),
            "potential-zero-set" => Ok(potential.clone()),
            "boundary-data-nonnegative" => Ok(check_boundary_data(grid, &ctx.built.g)),
            "compatibility" => Ok(check_compatibility(grid, &ctx.built.u0, &ctx.built.g)),
            other => bail!("check.assumptions: unknown assumption '{other}'"),
        };
        // a sampling box needs a coercive H; without one the audit has nothing to say
        let rep = sampled.unwrap_or_else(|e| {
            let mut rep = AssumptionReport::new(&id);
            rep.verdict = Verdict::Inconclusive;
            rep.notes.push(e.to_string());
            rep
        });
        ctx.out.write_json(&format!("check_{id}.json"), &rep)?;
        reports.push(rep);
    }
    Ok(reports)
}
