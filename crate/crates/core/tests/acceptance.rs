//! End-to-end acceptance runs. One line per criterion; the process fails if
//! the set of failing criteria differs from `KNOWN_RED`.

use std::f64::consts::PI;
use std::time::Instant;

use hjlab_core::assumptions::{
    check_localized_ray_monotonicity, check_ray_monotonicity, AuditConfig, Sign, Verdict,
};
use hjlab_core::asymptotics::{
    boundary_loss_time, compat_free_sandwich, dirichlet_asymptotic, drift_compensated, fit_decay,
    inf_convolution, mu_series, sup_distance, DecayFit, ProfileInputs,
};
use hjlab_core::ergodic::{
    estimate_c_discount, estimate_c_slope, solve_stationary_dirichlet, ErgodicConfig,
    StationaryConfig, StationaryOutcome,
};
use hjlab_core::hamiltonian::default_p_max;
use hjlab_core::solver::discrete_comparison;
use hjlab_core::{
    BoundaryCondition, DirichletData, EvolutionState, Grid, Hamiltonian, ObliqueField, Sampling,
    Scheme, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Criteria whose measured values miss the pinned tolerance; the reasons are
/// recorded in the decisions ledger.
const KNOWN_RED: &[usize] = &[1, 8];

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn unit(n: usize) -> Grid {
    Grid::interval(0.0, 1.0, n).unwrap()
}

fn nr() -> Hamiltonian {
    Hamiltonian::eikonal(1, |x| (x[0] - 0.5).abs())
}

fn neumann(grid: &Grid) -> BoundaryCondition {
    let g = vec![0.0; grid.boundary_nodes().len()];
    BoundaryCondition::Neumann(ObliqueField::normal(grid, g))
}

fn scheme(spec: &Hamiltonian, bc: BoundaryCondition, grid: &Grid, probe_every: f64) -> Scheme {
    let cfg = SolverConfig {
        probe_every,
        ..SolverConfig::default()
    };
    Scheme::new(spec, bc, grid, &cfg).unwrap()
}

fn inputs<'a>(spec: &'a Hamiltonian, grid: &'a Grid, u0: &'a [f64]) -> ProfileInputs<'a> {
    let sampling = Sampling::default();
    ProfileInputs {
        spec,
        grid,
        u0,
        p_max: default_p_max(spec, grid, &sampling).unwrap(),
        aubry_tol: 1e-3,
        level_slack: 1e-9,
        sampling,
    }
}

fn boundary_excess_ok(state: &EvolutionState) -> bool {
    state.max_boundary_excess.is_some_and(|e| e <= 1e-8)
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Least-squares slope of `(t, y)`.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    num / den
}

fn criterion_1() -> Outcome {
    let grid = unit(401);
    let spec = nr();
    let u0 = grid.sample(|x| 0.3 * (2.0 * PI * x[0]).cos());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let (state, disc) = pool.install(|| {
        let s = scheme(&spec, neumann(&grid), &grid, 0.5);
        let state = s.evolve(&u0, 20.0).unwrap();
        let disc = estimate_c_discount(&s, &ErgodicConfig::default()).unwrap();
        (state, disc)
    });
    let elapsed = start.elapsed().as_secs_f64();
    let slope = estimate_c_slope(&state, 10.0, 20.0).unwrap();
    // u0 attains its minimum -0.3 on the Aubry point x = 1/2 and the
    // distance to it is (x - 1/2)^2 / 2
    let oracle = grid.sample(|x| (x[0] - 0.5).powi(2) / 2.0 - 0.3);
    let err = sup_distance(&state.u, &oracle);
    let pass = disc.c.abs() <= 1e-2 && slope.c.abs() <= 1e-2 && err <= 2e-2 && elapsed <= 60.0;
    Outcome {
        id: 1,
        pass,
        detail: format!(
            "c_discount {:.3e}, c_slope {:.3e}, profile error {err:.4e} (tol 2e-2), {elapsed:.2} s single-threaded",
            disc.c, slope.c
        ),
    }
}

fn criterion_2() -> Outcome {
    let grid = unit(201);
    let spec = Hamiltonian::eikonal(1, |_| 1.0);
    let s = scheme(&spec, BoundaryCondition::StateConstraint, &grid, 0.5);
    let state = s.evolve(&vec![0.0; 201], 5.0).unwrap();
    let err = state.u.iter().map(|u| (u - state.t).abs()).fold(0.0, f64::max);
    let c = estimate_c_slope(&state, 2.5, 5.0).unwrap().c;
    Outcome {
        id: 2,
        pass: err <= 1e-8 && (c + 1.0).abs() <= 1e-8,
        detail: format!("max |u - t| {err:.2e}, c_slope {c:.12}"),
    }
}

fn criterion_3() -> Outcome {
    let grid = unit(401);
    let spec = nr();
    let s = scheme(&spec, neumann(&grid), &grid, 0.5);
    let reports: Vec<_> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(k);
            let coef: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let bump: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..0.3)).collect();
            let u0 = grid.sample(|x| {
                coef.iter()
                    .enumerate()
                    .map(|(j, a)| a * ((j + 1) as f64 * PI * x[0]).cos())
                    .sum()
            });
            let v0: Vec<f64> = u0
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let x = grid.coords(i)[0];
                    u + bump[0] + bump[1] * (bump[2] * 20.0 * x + bump[3]).sin().abs()
                })
                .collect();
            discrete_comparison(&s, &u0, &v0, 20.0).unwrap()
        })
        .collect();
    let worst_ratio = reports
        .iter()
        .map(|r| r.max_violation / r.dynamic_range)
        .fold(0.0, f64::max);
    let worst_contraction = reports.iter().map(|r| r.contraction_excess).fold(0.0, f64::max);
    Outcome {
        id: 3,
        pass: worst_ratio <= 1e-12 && worst_contraction <= 1e-10,
        detail: format!(
            "50 pairs: violation/range {worst_ratio:.2e}, contraction excess {worst_contraction:.2e}"
        ),
    }
}

struct DirichletRuns {
    a: (f64, f64, Option<f64>, EvolutionState),
    c: (f64, f64, EvolutionState),
}

fn dirichlet_runs() -> DirichletRuns {
    let grid = unit(401);
    let zero = vec![0.0; 2];
    let cfg = ErgodicConfig::default();

    let spec_a = Hamiltonian::shifted_eikonal(1, 0.5);
    let u0_a = grid.sample(|x| 0.2 * (PI * x[0]).sin());
    let sc_a = scheme(&spec_a, BoundaryCondition::StateConstraint, &grid, 0.5);
    let c_a = estimate_c_discount(&sc_a, &cfg).unwrap().c;
    let run_a = sc_a.with_bc(BoundaryCondition::Dirichlet(DirichletData::Fixed(zero.clone())));
    let st_a = run_a.evolve(&u0_a, 10.0).unwrap();
    let w: Vec<f64> = st_a.u.iter().map(|u| u + 0.5 * st_a.t).collect();
    let spread = w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - w.iter().copied().fold(f64::INFINITY, f64::min);
    let loss = boundary_loss_time(&st_a, &grid, &zero, 1e-8);

    let spec_c = Hamiltonian::eikonal(1, |x| 1.0 + x[0]);
    let sc_c = scheme(&spec_c, BoundaryCondition::StateConstraint, &grid, 0.5);
    let c_c = estimate_c_discount(&sc_c, &cfg).unwrap().c;
    let run_c = sc_c.with_bc(BoundaryCondition::Dirichlet(DirichletData::Fixed(zero)));
    let st_c = run_c.evolve(&vec![0.0; 401], 10.0).unwrap();
    // d_0 to the nearest endpoint: integral of 1 + z
    let oracle = grid.sample(|x| {
        let left = x[0] + x[0] * x[0] / 2.0;
        left.min(1.5 - left)
    });
    let err = sup_distance(&st_c.u, &oracle);
    DirichletRuns {
        a: (c_a, spread, loss, st_a),
        c: (c_c, err, st_c),
    }
}

fn criterion_4(runs: &DirichletRuns, extra: &[EvolutionState]) -> Outcome {
    let all: Vec<&EvolutionState> = [&runs.a.3, &runs.c.2].into_iter().chain(extra).collect();
    let worst = all
        .iter()
        .filter_map(|s| s.max_boundary_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        id: 4,
        pass: all.iter().all(|s| boundary_excess_ok(s)),
        detail: format!("{} dirichlet runs, max boundary excess {worst:.2e}", all.len()),
    }
}

fn criterion_5(runs: &DirichletRuns) -> Outcome {
    let (c_a, spread, loss, _) = &runs.a;
    let (c_c, err, st_c) = &runs.c;
    // the library dispatcher must agree with the oracle comparison
    let grid = unit(401);
    let spec_c = Hamiltonian::eikonal(1, |x| 1.0 + x[0]);
    let u0 = vec![0.0; 401];
    let prof = dirichlet_asymptotic(&inputs(&spec_c, &grid, &u0), &[0.0, 0.0], *c_c, st_c, 1e-2).unwrap();
    let pass_a = (c_a - 0.5).abs() <= 1e-2 && *spread <= 2e-2 && loss.is_some();
    let pass_c = (c_c + 1.0).abs() <= 1e-2 && *err <= 2e-2 && prof.distance <= 2e-2;
    Outcome {
        id: 5,
        pass: pass_a && pass_c,
        detail: format!(
            "(a) c_sc {c_a:.5}, spread of u+0.5t {spread:.2e}, loss time {loss:?}; (c) c_sc {c_c:.5}, oracle error {err:.2e}, {:?} distance {:.2e}",
            prof.formula, prof.distance
        ),
    }
}

fn criterion_6() -> Outcome {
    let grid = unit(201);
    let spec = Hamiltonian::eikonal(1, |_| 1.0);
    let s = scheme(&spec, BoundaryCondition::StateConstraint, &grid, 0.5);
    let c = estimate_c_discount(&s, &ErgodicConfig::default()).unwrap().c;
    let g = [0.0, 0.0];
    let cfg = StationaryConfig::default();
    let tag = |o: &StationaryOutcome| match o {
        StationaryOutcome::Solved { .. } => "solved",
        StationaryOutcome::Infeasible { .. } => "infeasible",
        StationaryOutcome::Unconverged { .. } => "unconverged",
    };
    let outcomes: Vec<(f64, StationaryOutcome)> = [c, c + 0.5, c - 0.5]
        .into_iter()
        .map(|a| (a, solve_stationary_dirichlet(a, &s, &g, &cfg).unwrap()))
        .collect();
    let pass = matches!(outcomes[0].1, StationaryOutcome::Solved { .. })
        && matches!(outcomes[1].1, StationaryOutcome::Solved { .. })
        && matches!(outcomes[2].1, StationaryOutcome::Infeasible { .. });
    let detail = outcomes
        .iter()
        .map(|(a, o)| format!("a={a:.4}: {}", tag(o)))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome {
        id: 6,
        pass,
        detail: format!("c_sc {c:.5}; {detail}"),
    }
}

fn criterion_7() -> Outcome {
    let grid = unit(401);
    let spec = nr();
    let s = scheme(&spec, neumann(&grid), &grid, 0.05);
    let u0 = grid.sample(|x| 0.3 * (2.0 * PI * x[0]).cos());
    let state = s.evolve(&u0, 20.0).unwrap();
    let erg = estimate_c_discount(&s, &ErgodicConfig::default()).unwrap();
    let history = drift_compensated(&state, erg.c);
    let m = mu_series(&history, &erg.v, 0.05).unwrap();
    let bounds = m
        .mu_plus
        .iter()
        .zip(&m.mu_minus)
        .all(|(p, q)| (0.0..=1.0).contains(p) && *q >= 1.0);
    let d1 = m.delta_near(1.0).unwrap();
    let dl = *m.delta.last().unwrap();
    let fit = fit_decay(&m).unwrap();
    let decays = match fit {
        DecayFit::Rate { lambda, .. } => lambda > 0.0,
        DecayFit::Converged => true,
    };
    Outcome {
        id: 7,
        pass: bounds && dl <= 0.1 * d1 && decays,
        detail: format!("bounds hold: {bounds}, delta(1) {d1:.3e}, delta(T) {dl:.3e}, fit {fit:?}"),
    }
}

fn criterion_8() -> Outcome {
    let grid = unit(401);
    let eik = nr();
    let cfg = AuditConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for sign in [Sign::Plus, Sign::Minus] {
        let rep = check_ray_monotonicity(&eik, &grid, 0.0, sign, &cfg).unwrap();
        let replay = rep
            .witness
            .as_ref()
            .is_some_and(|w| (w.replay(&eik) - w.recorded()).abs() <= 1e-10);
        let ok = rep.verdict == Verdict::Fail && replay;
        pass &= ok;
        parts.push(format!("eikonal ray {sign:?}: {:?} (replayed {replay})", rep.verdict));
    }
    let k = vec![grid.nearest_node(&[0.5])];
    let rep = check_localized_ray_monotonicity(&eik, &grid, 0.0, &k, Sign::Plus, &cfg).unwrap();
    pass &= rep.verdict == Verdict::Pass;
    let worst = rep
        .moduli
        .iter()
        .filter_map(|m| m.psi_hat)
        .fold(f64::INFINITY, f64::min);
    parts.push(format!("eikonal localized plus, K={{1/2}}: {:?} (min psi {worst:.2e})", rep.verdict));
    let quad = Hamiltonian::quadratic(1, |x| (x[0] - 0.5).abs());
    let rep = check_ray_monotonicity(&quad, &grid, 0.0, Sign::Plus, &cfg).unwrap();
    let psi = rep
        .moduli
        .iter()
        .map(|m| m.psi_hat.unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    pass &= rep.verdict == Verdict::Pass && psi >= 1e-3;
    parts.push(format!("quadratic ray plus: {:?} (min psi {psi:.4e})", rep.verdict));
    let again = check_ray_monotonicity(&quad, &grid, 0.0, Sign::Plus, &cfg).unwrap();
    let identical = format!("{rep:?}") == format!("{again:?}");
    pass &= identical;
    parts.push(format!("repeat identical {identical}"));
    Outcome {
        id: 8,
        pass,
        detail: parts.join("; "),
    }
}

fn criterion_9() -> Outcome {
    let cos = |x: &[f64]| 0.3 * (2.0 * PI * x[0]).cos();
    let line = unit(401);
    let square = Grid::rectangle([(0.0, 1.0), (0.0, 1.0)], [41, 41]).unwrap();
    let cases: Vec<(&str, Hamiltonian, &Grid, BoundaryCondition, Vec<f64>, f64)> = vec![
        ("eikonal neumann", nr(), &line, neumann(&line), line.sample(cos), 20.0),
        (
            "eikonal 1+x state-constraint",
            Hamiltonian::eikonal(1, |x| 1.0 + x[0]),
            &line,
            BoundaryCondition::StateConstraint,
            line.sample(cos),
            20.0,
        ),
        (
            "shifted eikonal state-constraint",
            Hamiltonian::shifted_eikonal(1, 0.5),
            &line,
            BoundaryCondition::StateConstraint,
            line.sample(cos),
            20.0,
        ),
        (
            "quadratic neumann",
            Hamiltonian::quadratic(1, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin()),
            &line,
            neumann(&line),
            // the default flux box is |p| <= sqrt(2); keep Du0 inside it
            line.sample(|x| 0.1 * (2.0 * PI * x[0]).cos()),
            20.0,
        ),
        (
            "eikonal 2d neumann",
            Hamiltonian::eikonal(2, |x| ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt()),
            &square,
            neumann(&square),
            square.sample(|x| 0.2 * (PI * x[0]).cos() * (PI * x[1]).cos()),
            10.0,
        ),
    ];
    let rows: Vec<(String, bool)> = cases
        .into_par_iter()
        .map(|(name, spec, grid, bc, u0, t)| {
            let s = scheme(&spec, bc, grid, 0.5);
            let disc = estimate_c_discount(&s, &ErgodicConfig::default()).unwrap();
            let state = s.evolve(&u0, t).unwrap();
            let sl = estimate_c_slope(&state, t / 2.0, t).unwrap();
            let tail: Vec<(f64, f64)> = state
                .drift_norms(disc.c)
                .into_iter()
                .filter(|p| p.0 >= t / 2.0)
                .collect();
            let growth = slope(&tail);
            let gap = (disc.c - sl.c).abs();
            let ok = gap <= 2e-2 && growth <= 1e-3;
            (
                format!("{name}: |dc| {gap:.2e}, growth {growth:.1e}"),
                ok,
            )
        })
        .collect();
    Outcome {
        id: 9,
        pass: rows.iter().all(|r| r.1),
        detail: rows.into_iter().map(|r| r.0).collect::<Vec<_>>().join("; "),
    }
}

fn criterion_10() -> (Outcome, Vec<EvolutionState>) {
    let grid = unit(401);
    let spec = Hamiltonian::eikonal(1, |x| ((x[0] - 0.5).abs() - 0.1).max(0.0));
    let s = scheme(&spec, BoundaryCondition::StateConstraint, &grid, 0.5);
    let c_sc = estimate_c_discount(&s, &ErgodicConfig::default()).unwrap().c;
    let u0 = vec![1.0; 401];
    let g = [0.0, 0.0];
    let inp = inputs(&spec, &grid, &u0);
    let rep = compat_free_sandwich(&s, &u0, &g, &[4.0, 16.0, 64.0], 20.0, c_sc, Some(&inp)).unwrap();
    let gaps: Vec<f64> = rep.entries.iter().map(|e| e.gap).collect();

    let h = grid.spacing()[0];
    let smooth = grid.sample(|x| x[0] * (1.0 - x[0]));
    let sane = [4.0, 16.0, 64.0].iter().all(|&k| {
        let uk = inf_convolution(&grid, &smooth, k);
        sup_distance(&uk, &smooth) <= 1.0 / k + h
    });
    // a dirichlet run to feed the boundary-bound check
    let d = s.with_bc(BoundaryCondition::Dirichlet(DirichletData::Fixed(g.to_vec())));
    let extra = vec![d.evolve(&u0, 5.0).unwrap()];
    (
        Outcome {
            id: 10,
            pass: rep.strictly_decreasing && sane,
            detail: format!(
                "c_sc {c_sc:.2e}, gaps [{}], compatible bound {sane}, candidates {:?}",
                sci(&gaps),
                rep.candidate_distances
            ),
        },
        extra,
    )
}

fn criterion_11() -> Outcome {
    // u = cos(pi x) / pi solves |u'|^2 = sin^2(pi x) with u' = 0 at both ends
    let spec = Hamiltonian::quadratic(1, |x| (PI * x[0]).sin().powi(2));
    let t = 0.5;
    let errs: Vec<f64> = [51, 101, 201, 401]
        .iter()
        .map(|&n| {
            let grid = unit(n);
            let exact = grid.sample(|x| (PI * x[0]).cos() / PI);
            let s = scheme(&spec, neumann(&grid), &grid, 0.5);
            let state = s.evolve(&exact, t).unwrap();
            sup_distance(&state.u, &exact)
        })
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    Outcome {
        id: 11,
        pass: ratios.iter().all(|r| (1.7..=2.3).contains(r)),
        detail: format!("errors [{}], ratios {ratios:.3?}", sci(&errs)),
    }
}

fn main() {
    let start = Instant::now();
    let runs = dirichlet_runs();
    let (c10, extra) = criterion_10();
    let mut outcomes = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(&runs, &extra),
        criterion_5(&runs),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        c10,
        criterion_11(),
    ];
    outcomes.sort_by_key(|o| o.id);
    for o in &outcomes {
        let mark = if o.pass { "PASS" } else { "FAIL" };
        let known = if !o.pass && KNOWN_RED.contains(&o.id) { " [known]" } else { "" };
        println!("criterion {:>2}: {mark}{known}  {}", o.id, o.detail);
    }
    let red: Vec<usize> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("acceptance finished in {:.1} s; failing {red:?}", start.elapsed().as_secs_f64());
    if red != KNOWN_RED {
        eprintln!("failing set {red:?} differs from the expected {KNOWN_RED:?}");
        std::process::exit(1);
    }
}
