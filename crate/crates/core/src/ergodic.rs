//! Additive eigenvalue `c` and eigenfunction `v` of `H(x, Dv) = c`, by the
//! vanishing-discount limit and by the drift of time-dependent runs, and the
//! stationary Dirichlet problem `H(x, Dv) = a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_many, Banded};
use crate::solver::{BoundaryCondition, DirichletData, EvolutionState, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Discount,
    Slope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicConfig {
    pub deltas: Vec<f64>,
    /// Residual bound `sup |F(v) - c|` for a converged result.
    pub tolerance: f64,
    /// Work cap for the relaxation fallback, in node updates.
    pub max_node_updates: f64,
    /// Polish the extrapolated pair by Newton's method on the eigenproblem.
    pub refine: bool,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        ErgodicConfig {
            deltas: vec![0.1, 0.05, 0.025, 0.0125],
            tolerance: 2e-2,
            max_node_updates: 1e7,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicResult {
    pub c: f64,
    /// Eigenfunction, zero at the anchor node.
    pub v: Vec<f64>,
    pub residual: f64,
    pub method: Method,
    pub delta_sequence: Vec<f64>,
    pub anchor_index: usize,
    pub converged: bool,
    /// `delta * u_delta(anchor)` along the sequence.
    pub discount_values: Vec<f64>,
    /// Richardson estimate before Newton polishing.
    pub extrapolated_c: f64,
    pub refined: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscountedSolution {
    pub u: Vec<f64>,
    pub converged: bool,
    /// `sup |delta u + F(u)|`
    pub residual: f64,
    pub iterations: usize,
    pub solver: &'static str,
}

/// The ergodic problem attached to a Dirichlet run is the state-constraint one.
pub fn ergodic_scheme(scheme: &Scheme) -> Scheme {
    match scheme.bc() {
        BoundaryCondition::Dirichlet(_) => scheme.with_bc(BoundaryCondition::StateConstraint),
        _ => scheme.clone(),
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Nodes whose values enter the numerical Hamiltonian at `node`.
fn stencil(scheme: &Scheme, node: usize) -> impl Iterator<Item = usize> {
    let grid = scheme.grid();
    let idx = grid.multi_index(node);
    let counts = grid.counts();
    let mut out = [usize::MAX; 5];
    out[0] = node;
    let mut k = 1;
    for a in 0..grid.dim() {
        let s = grid.stride(a);
        if idx[a] > 0 {
            out[k] = node - s;
            k += 1;
        }
        if idx[a] + 1 < counts[a] {
            out[k] = node + s;
            k += 1;
        }
    }
    out.into_iter().take(k)
}

/// Colouring with distinct colours inside every closed stencil, so one
/// perturbed flux evaluation per colour recovers the whole Jacobian.
fn colour(scheme: &Scheme, node: usize) -> usize {
    let idx = scheme.grid().multi_index(node);
    if scheme.grid().dim() == 1 {
        idx[0] % 3
    } else {
        (idx[0] + 2 * idx[1]) % 5
    }
}

/// Finite-difference Jacobian of the numerical Hamiltonian at `u`.
fn flux_jacobian(scheme: &Scheme, u: &[f64], f0: &[f64]) -> Banded {
    let grid = scheme.grid();
    let n = grid.len();
    let bw = if grid.dim() == 1 { 1 } else { grid.stride(1) };
    let ncol = if grid.dim() == 1 { 3 } else { 5 };
    let eps = 1e-7 * sup(u).max(1.0);
    let mut jac = Banded::zeros(n, bw);
    for col in 0..ncol {
        let mut up = u.to_vec();
        for (k, v) in up.iter_mut().enumerate() {
            if colour(scheme, k) == col {
                *v += eps;
            }
        }
        let fp = scheme.fluxes(&up);
        for i in 0..n {
            for k in stencil(scheme, i) {
                if colour(scheme, k) == col {
                    jac.set(i, k, (fp[i] - f0[i]) / eps);
                }
            }
        }
    }
    jac
}

const NEWTON_MAX_ITER: usize = 60;

fn discounted_residual(scheme: &Scheme, delta: f64, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let f = scheme.fluxes(u);
    let g = u.iter().zip(&f).map(|(u, f)| delta * u + f).collect();
    (f, g)
}

fn newton_discounted(scheme: &Scheme, delta: f64, u0: Vec<f64>, tol: f64) -> (Vec<f64>, f64, usize) {
    let mut u = u0;
    let (mut f, mut g) = discounted_residual(scheme, delta, &u);
    let mut res = sup(&g);
    let mut it = 0;
    while res > tol && it < NEWTON_MAX_ITER {
        it += 1;
        let mut jac = flux_jacobian(scheme, &u, &f);
        for i in 0..u.len() {
            jac.add(i, i, delta);
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(sol) = solve_many(&jac, &[rhs]) else {
            break;
        };
        let d = &sol[0];
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(d).map(|(u, d)| u + lambda * d).collect();
            let (ft, gt) = discounted_residual(scheme, delta, &trial);
            let rt = sup(&gt);
            if rt < res {
                u = trial;
                f = ft;
                g = gt;
                res = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (u, res, it)
}

/// Solves `delta u + F(u) = 0` for the scheme's numerical Hamiltonian `F`.
///
/// Newton's method with a backtracking line search is tried first; if it
/// stalls the damped pseudo-time iteration `u <- u - dt (delta u + F(u))`
/// takes over until the update is below `1e-10 / delta` or the work cap is
/// reached.
pub fn solve_discounted(
    delta: f64,
    scheme: &Scheme,
    initial: Option<&[f64]>,
    config: &ErgodicConfig,
) -> Result<DiscountedSolution> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("discount factor must be positive, got {delta}")));
    }
    let n = scheme.grid().len();
    let p_max = scheme.flux().p_max;
    let mut starts = Vec::with_capacity(2);
    match initial {
        Some(u) => starts.push(u.to_vec()),
        None => {
            let raw: Vec<f64> = scheme.fluxes(&vec![0.0; n]).iter().map(|f| -f / delta).collect();
            // -F(0)/delta can be far steeper than the flux box; the second try
            // flattens it about its mean to fit half the box
            let grad = scheme.max_gradient(&raw);
            let theta = 0.5 * p_max / grad;
            if theta < 1.0 {
                let mean = raw.iter().sum::<f64>() / n as f64;
                let flat = raw.iter().map(|v| mean + theta * (v - mean)).collect();
                starts.push(raw);
                starts.push(flat);
            } else {
                starts.push(raw);
            }
        }
    }
    let mut iterations = 0;
    let mut fallback: Option<Vec<f64>> = None;
    for start in &starts {
        let tol = 1e-10 * (1.0 + delta * sup(start));
        let (u, res, it) = newton_discounted(scheme, delta, start.clone(), tol);
        iterations += it;
        if res <= tol {
            return Ok(DiscountedSolution {
                u,
                converged: true,
                residual: res,
                iterations,
                solver: "newton",
            });
        }
        if fallback.is_none() && scheme.max_gradient(&u) <= p_max {
            fallback = Some(u);
        }
    }
    let mut u = fallback.unwrap_or_else(|| starts.pop().expect("at least one start"));
    let dt = scheme.dt() / (1.0 + delta * scheme.dt());
    let max_steps = (config.max_node_updates / n as f64).ceil() as usize;
    let mut steps = 0;
    let mut converged = false;
    while steps < max_steps {
        steps += 1;
        let (_, g) = discounted_residual(scheme, delta, &u);
        let mut change = 0.0f64;
        for (ui, gi) in u.iter_mut().zip(&g) {
            *ui -= dt * gi;
            change = change.max((dt * gi).abs());
        }
        if !change.is_finite() {
            return Err(Error::Divergence {
                node: u.iter().position(|v| !v.is_finite()).unwrap_or(0),
                time: steps as f64 * dt,
            });
        }
        if change <= 1e-10 / delta {
            converged = true;
            break;
        }
    }
    let (_, g) = discounted_residual(scheme, delta, &u);
    Ok(DiscountedSolution {
        u,
        converged,
        residual: sup(&g),
        iterations: iterations + steps,
        solver: "relaxation",
    })
}

/// `sup |F(v) - c|`
pub fn eigen_residual(scheme: &Scheme, v: &[f64], c: f64) -> f64 {
    scheme
        .fluxes(v)
        .iter()
        .map(|f| (f - c).abs())
        .fold(0.0, f64::max)
}

/// Newton's method on `F(v) = c`, `v(anchor) = 0`. Returns the polished
/// pair and its residual, or `None` if the iteration stalls.
pub fn refine_eigenpair(
    scheme: &Scheme,
    v: &[f64],
    c: f64,
    anchor: usize,
) -> Option<(Vec<f64>, f64, f64)> {
    let n = v.len();
    let mut v = v.to_vec();
    let mut c = c;
    let r_of = |v: &[f64], c: f64| -> (Vec<f64>, Vec<f64>) {
        let f = scheme.fluxes(v);
        let r = f.iter().map(|f| f - c).collect();
        (f, r)
    };
    let (mut f, mut r) = r_of(&v, c);
    let mut res = sup(&r);
    let scale = 1.0 + c.abs();
    for _ in 0..NEWTON_MAX_ITER {
        if res <= 1e-11 * scale {
            break;
        }
        let mut jac = flux_jacobian(scheme, &v, &f);
        // pinning the anchor leaves J d unchanged for d(anchor) = 0
        let pin = jac.get(anchor, anchor).abs().max(1.0);
        jac.add(anchor, anchor, pin);
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let sol = solve_many(&jac, &[rhs, vec![1.0; n]])?;
        let (y1, y2) = (&sol[0], &sol[1]);
        if y2[anchor].abs() < 1e-300 {
            return None;
        }
        let dc = -y1[anchor] / y2[anchor];
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..n).map(|i| v[i] + lambda * (y1[i] + dc * y2[i])).collect();
            let ct = c + lambda * dc;
            let (ft, rt) = r_of(&trial, ct);
            let rn = sup(&rt);
            if rn < res {
                v = trial;
                v[anchor] = 0.0;
                c = ct;
                f = ft;
                r = rt;
                res = rn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let res = eigen_residual(scheme, &v, c);
    res.is_finite().then_some((v, c, res))
}

/// Vanishing-discount estimate of the additive eigenvalue.
///
/// `c` is minus the linear extrapolation to zero of `delta u_delta(x0)` from
/// the two smallest discounts, `v = u_delta - u_delta(x0)` at the smallest
/// discount. With `refine`, the pair is then polished by Newton's method and
/// the polished pair is kept if it lowers the residual.
pub fn estimate_c_discount(scheme: &Scheme, config: &ErgodicConfig) -> Result<ErgodicResult> {
    let deltas = &config.deltas;
    if deltas.len() < 3 {
        return Err(Error::Config("at least three discount factors are required".into()));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Config(
            "discount factors must be positive and strictly decreasing".into(),
        ));
    }
    let scheme = ergodic_scheme(scheme);
    let anchor = scheme.grid().centroid_node();
    let mut warnings = Vec::new();
    let mut values = Vec::with_capacity(deltas.len());
    let mut last: Option<(f64, Vec<f64>)> = None;
    for &delta in deltas {
        // warm start: delta * u is roughly independent of delta
        let init = last
            .as_ref()
            .map(|(d, u)| u.iter().map(|v| v * d / delta).collect::<Vec<_>>());
        let sol = solve_discounted(delta, &scheme, init.as_deref(), config)?;
        if !sol.converged {
            warnings.push(format!(
                "discounted problem with delta = {delta} did not converge (residual {:.3e})",
                sol.residual
            ));
        }
        values.push(delta * sol.u[anchor]);
        last = Some((delta, sol.u));
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= -1e-6) || diffs.iter().all(|d| *d <= 1e-6);
    if !monotone {
        warnings.push("discount sequence delta*u(x0) is not monotone".into());
    }
    let k = deltas.len();
    let (d1, d2) = (deltas[k - 2], deltas[k - 1]);
    let (y1, y2) = (values[k - 2], values[k - 1]);
    let y0 = y2 - d2 * (y1 - y2) / (d1 - d2);
    let c0 = -y0;
    let (_, u) = last.expect("non-empty sequence");
    let base = u[anchor];
    let v0: Vec<f64> = u.iter().map(|x| x - base).collect();
    let res0 = eigen_residual(&scheme, &v0, c0);
    let (mut c, mut v, mut residual, mut refined) = (c0, v0, res0, false);
    if config.refine {
        if let Some((vr, cr, rr)) = refine_eigenpair(&scheme, &v, c, anchor) {
            if rr < residual && (cr - c0).abs() <= config.tolerance.max(1e-2) {
                c = cr;
                v = vr;
                residual = rr;
                refined = true;
            }
        }
    }
    let converged = residual <= config.tolerance;
    if !converged {
        warnings.push(format!(
            "eigenproblem residual {residual:.3e} exceeds tolerance {:.3e}",
            config.tolerance
        ));
    }
    Ok(ErgodicResult {
        c,
        v,
        residual,
        method: Method::Discount,
        delta_sequence: deltas.clone(),
        anchor_index: anchor,
        converged,
        discount_values: values,
        extrapolated_c: c0,
        refined,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeEstimate {
    pub c: f64,
    /// Largest deviation of a nodal slope from the mean slope.
    pub max_deviation: f64,
    pub t1: f64,
    pub t2: f64,
}

/// `c = -mean_x (u(x, T2) - u(x, T1)) / (T2 - T1)` from the recorded
/// snapshots nearest to the window ends.
pub fn estimate_c_slope(state: &EvolutionState, t1: f64, t2: f64) -> Result<SlopeEstimate> {
    if !(t2 > t1) {
        return Err(Error::Config(format!("empty slope window [{t1}, {t2}]")));
    }
    let (first, last) = match (state.snapshots.first(), state.snapshots.last()) {
        (Some(a), Some(b)) => (a.time, b.time),
        _ => return Err(Error::Config("no recorded probes".into())),
    };
    let slack = state.dt.max(1e-12);
    if t1 < first - slack || t2 > last + slack {
        return Err(Error::Config(format!(
            "slope window [{t1}, {t2}] outside the recorded probes [{first}, {last}]"
        )));
    }
    let a = state.snapshot_near(t1).expect("probes exist");
    let b = state.snapshot_near(t2).expect("probes exist");
    let span = b.time - a.time;
    if !(span > 0.0) {
        return Err(Error::Config(format!(
            "slope window [{t1}, {t2}] contains a single probe"
        )));
    }
    let slopes: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| (y - x) / span).collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let max_deviation = slopes.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    Ok(SlopeEstimate {
        c: -mean,
        max_deviation,
        t1: a.time,
        t2: b.time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryConfig {
    /// Pseudo-time before drift monitoring starts.
    pub burn_in: f64,
    pub max_time: f64,
    /// Steady state when `sup |v_new - v| / dt` falls below this.
    pub tolerance: f64,
    /// Infeasible when `min v` decreases faster than this per unit time.
    pub drift_threshold: f64,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        StationaryConfig {
            burn_in: 5.0,
            max_time: 400.0,
            tolerance: 1e-9,
            drift_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum StationaryOutcome {
    Solved {
        v: Vec<f64>,
        residual: f64,
        pseudo_time: f64,
    },
    Infeasible {
        drift: f64,
        pseudo_time: f64,
    },
    Unconverged {
        v: Vec<f64>,
        update: f64,
    },
}

/// Pseudo-time iteration for `H(x, Dv) = a` in the domain with `v <= g` on
/// the boundary, started from the constant `min g`.
pub fn solve_stationary_dirichlet(
    a: f64,
    scheme: &Scheme,
    g: &[f64],
    config: &StationaryConfig,
) -> Result<StationaryOutcome> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite dirichlet data".into()));
    }
    let s = scheme
        .shifted(a)
        .with_bc(BoundaryCondition::Dirichlet(DirichletData::Fixed(g.to_vec())));
    let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
    let mut state = EvolutionState::new(vec![gmin; s.grid().len()], s.dt());
    let dt = s.dt();
    let window = (1.0 / dt).ceil() as usize;
    let mut mins = vec![gmin];
    let mut update = f64::INFINITY;
    while state.t < config.max_time {
        let prev = state.u.clone();
        s.step(&mut state)?;
        update = prev
            .iter()
            .zip(&state.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / dt;
        if update <= config.tolerance {
            return Ok(StationaryOutcome::Solved {
                v: state.u,
                residual: update,
                pseudo_time: state.t,
            });
        }
        if state.steps % window == 0 {
            mins.push(state.u.iter().copied().fold(f64::INFINITY, f64::min));
            if state.t >= config.burn_in && mins.len() >= 2 {
                let k = mins.len();
                let drift = (mins[k - 1] - mins[k - 2]) / (window as f64 * dt);
                if drift < -config.drift_threshold {
                    return Ok(StationaryOutcome::Infeasible {
                        drift,
                        pseudo_time: state.t,
                    });
                }
            }
        }
    }
    Ok(StationaryOutcome::Unconverged { v: state.u, update })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, ObliqueField};
    use crate::hamiltonian::Hamiltonian;
    use crate::solver::SolverConfig;

    fn scheme(spec: Hamiltonian, bc: BoundaryCondition, n: usize) -> Scheme {
        let grid = Grid::interval(0.0, 1.0, n).unwrap();
        Scheme::new(&spec, bc, &grid, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn discounted_trivial_and_shifted() {
        let grid = Grid::interval(0.0, 1.0, 41).unwrap();
        let s = scheme(
            Hamiltonian::eikonal(1, |_| 0.0),
            BoundaryCondition::Neumann(ObliqueField::normal(&grid, vec![0.0, 0.0])),
            41,
        );
        let sol = solve_discounted(0.1, &s, None, &ErgodicConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sup(&sol.u) < 1e-12);

        let s = scheme(Hamiltonian::shifted_eikonal(1, 0.5), BoundaryCondition::StateConstraint, 41);
        let sol = solve_discounted(0.01, &s, None, &ErgodicConfig::default()).unwrap();
        assert!(sol.converged);
        for u in &sol.u {
            assert!((0.01 * u + 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn relaxation_matches_newton() {
        let s = scheme(
            Hamiltonian::eikonal(1, |x| 1.0 + x[0]),
            BoundaryCondition::StateConstraint,
            21,
        );
        let newton = solve_discounted(0.5, &s, None, &ErgodicConfig::default()).unwrap();
        let mut u = vec![0.0; 21];
        for _ in 0..200_000 {
            let (_, g) = discounted_residual(&s, 0.5, &u);
            for (ui, gi) in u.iter_mut().zip(&g) {
                *ui -= s.dt() * gi;
            }
        }
        for (a, b) in newton.u.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn eikonal_constants() {
        let cfg = ErgodicConfig::default();
        let s = scheme(
            Hamiltonian::eikonal(1, |x| (x[0] - 0.5).abs()),
            BoundaryCondition::StateConstraint,
            201,
        );
        let r = estimate_c_discount(&s, &cfg).unwrap();
        assert!(r.c.abs() < 1e-2, "c = {}", r.c);
        assert_eq!(r.v[r.anchor_index], 0.0);

        let s = scheme(
            Hamiltonian::eikonal(1, |x| 1.0 + x[0]),
            BoundaryCondition::StateConstraint,
            201,
        );
        let r = estimate_c_discount(&s, &cfg).unwrap();
        assert!((r.c + 1.0).abs() < 1e-2, "c = {}", r.c);
        assert!(r.converged);

        let grid = Grid::interval(0.0, 1.0, 51).unwrap();
        let s = scheme(
            Hamiltonian::eikonal(1, |_| 0.0),
            BoundaryCondition::Neumann(ObliqueField::normal(&grid, vec![0.0, 0.0])),
            51,
        );
        let r = estimate_c_discount(&s, &cfg).unwrap();
        assert!(r.c.abs() < 1e-3);
    }

    #[test]
    fn bad_delta_sequences() {
        let s = scheme(Hamiltonian::eikonal(1, |_| 1.0), BoundaryCondition::StateConstraint, 11);
        for deltas in [vec![0.1, 0.05], vec![0.1, 0.1, 0.05], vec![0.05, 0.1, 0.01]] {
            let cfg = ErgodicConfig {
                deltas,
                ..ErgodicConfig::default()
            };
            assert!(estimate_c_discount(&s, &cfg).is_err());
        }
    }

    #[test]
    fn slope_of_exact_solution() {
        let s = scheme(Hamiltonian::eikonal(1, |_| 1.0), BoundaryCondition::StateConstraint, 51);
        let state = s.evolve(&vec![0.0; 51], 3.0).unwrap();
        let est = estimate_c_slope(&state, 1.0, 3.0).unwrap();
        assert!((est.c + 1.0).abs() < 1e-10);
        assert!(estimate_c_slope(&state, 1.0, 10.0).is_err());
        assert!(estimate_c_slope(&state, 2.0, 1.0).is_err());
    }

    #[test]
    fn stationary_dirichlet_distance_and_infeasible() {
        let s = scheme(Hamiltonian::eikonal(1, |_| 1.0), BoundaryCondition::StateConstraint, 101);
        let g = vec![0.0, 0.0];
        match solve_stationary_dirichlet(0.0, &s, &g, &StationaryConfig::default()).unwrap() {
            StationaryOutcome::Solved { v, .. } => {
                for (node, vi) in v.iter().enumerate() {
                    let x = s.grid().coords(node)[0];
                    assert!((vi - x.min(1.0 - x)).abs() < 2e-2, "{vi} at {x}");
                }
            }
            other => panic!("expected a solution, got {other:?}"),
        }
        let out = solve_stationary_dirichlet(-1.5, &s, &g, &StationaryConfig::default()).unwrap();
        assert!(matches!(out, StationaryOutcome::Infeasible { .. }));
    }
}
